//! Feature tracklets and the five corpus formulations used to train the scorer.
//!
//! A tracklet holds `T + 1` components ordered most recent first. Component 0
//! plays the detection role, components `1..=T` are the agent history. The
//! five kinds differ in how frames may be skipped between components (time
//! steps) and whether history components may be replaced by intruders taken
//! from other identities.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embedding::{FeatureRecord, FeatureVector, ObservationMeta};
use crate::error::{Error, Result};

/// Rejection-sampling budget per emitted tracklet.
pub const MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub feature: FeatureVector,
    pub meta: ObservationMeta,
}

impl Component {
    pub fn identity(&self) -> u32 {
        self.meta.identity
    }

    pub fn frame(&self) -> u32 {
        self.meta.frame
    }
}

impl From<FeatureRecord> for Component {
    fn from((meta, feature): FeatureRecord) -> Self {
        Component { feature, meta }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTracklet {
    pub components: Vec<Component>,
    pub label: u8,
}

impl FeatureTracklet {
    /// Builds a tracklet and labels it from its identities.
    pub fn labelled(components: Vec<Component>) -> Result<Self> {
        let mut t = FeatureTracklet {
            components,
            label: 0,
        };
        t.label = label_tracklet(&t)?;
        Ok(t)
    }

    /// Memory length `T` (number of history components).
    pub fn memory(&self) -> usize {
        self.components.len().saturating_sub(1)
    }

    pub fn detection(&self) -> &Component {
        &self.components[0]
    }

    pub fn history(&self) -> &[Component] {
        &self.components[1..]
    }

    pub fn history_features(&self) -> Vec<&FeatureVector> {
        self.history().iter().map(|c| &c.feature).collect()
    }

    pub fn frames(&self) -> Vec<u32> {
        self.components.iter().map(Component::frame).collect()
    }

    pub fn identities(&self) -> Vec<u32> {
        self.components.iter().map(Component::identity).collect()
    }

    pub fn is_positive(&self) -> bool {
        self.label == 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TrackletKind {
    /// Consecutive frames, single identity.
    I,
    /// As I, but the detection may follow the history after a gap `< F`.
    II,
    /// Up to `S` gaps of at most `F` frames anywhere.
    III,
    /// As I with up to `N` intruders in the history.
    IV,
    /// As III with up to `N` intruders in the history.
    V,
}

impl TrackletKind {
    pub const ALL: [TrackletKind; 5] = [
        TrackletKind::I,
        TrackletKind::II,
        TrackletKind::III,
        TrackletKind::IV,
        TrackletKind::V,
    ];

    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            1 => Ok(TrackletKind::I),
            2 => Ok(TrackletKind::II),
            3 => Ok(TrackletKind::III),
            4 => Ok(TrackletKind::IV),
            5 => Ok(TrackletKind::V),
            _ => Err(Error::InvalidConfig(format!("tracklet kind must be 1..=5, got {i}"))),
        }
    }

    pub fn index(self) -> u8 {
        self as u8 + 1
    }

    fn has_gaps(self) -> bool {
        matches!(self, TrackletKind::III | TrackletKind::V)
    }

    fn has_intruders(self) -> bool {
        matches!(self, TrackletKind::IV | TrackletKind::V)
    }
}

impl fmt::Display for TrackletKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TrackletKind::I => "I",
            TrackletKind::II => "II",
            TrackletKind::III => "III",
            TrackletKind::IV => "IV",
            TrackletKind::V => "V",
        };
        f.write_str(s)
    }
}

impl FromStr for TrackletKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "I" | "i" => Ok(TrackletKind::I),
            "II" | "ii" => Ok(TrackletKind::II),
            "III" | "iii" => Ok(TrackletKind::III),
            "IV" | "iv" => Ok(TrackletKind::IV),
            "V" | "v" => Ok(TrackletKind::V),
            other => other
                .parse::<u8>()
                .map_err(|_| Error::InvalidConfig(format!("unknown tracklet kind `{other}`")))
                .and_then(TrackletKind::from_index),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactoryConfig {
    pub kind: TrackletKind,
    /// Set size `M`.
    pub set_size: usize,
    /// Memory length `T`.
    pub memory: usize,
    /// Maximum frame gap `F`.
    pub max_gap: u32,
    /// Maximum number of gapped transitions `S`.
    pub max_steps: usize,
    /// Maximum number of intruders `N`.
    pub max_intruders: usize,
    pub seed: u64,
}

impl Default for FactoryConfig {
    fn default() -> Self {
        FactoryConfig {
            kind: TrackletKind::I,
            set_size: 1000,
            memory: 5,
            max_gap: 5,
            max_steps: 2,
            max_intruders: 2,
            seed: 0,
        }
    }
}

impl FactoryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.set_size == 0 {
            return Err(Error::InvalidConfig("M ≥ 1".into()));
        }
        if self.memory < 1 {
            return Err(Error::InvalidConfig("T ≥ 1".into()));
        }
        if matches!(self.kind, TrackletKind::II | TrackletKind::III | TrackletKind::V)
            && self.max_gap < 2
        {
            return Err(Error::InvalidConfig(format!(
                "F ≥ 2 for kind {}",
                self.kind
            )));
        }
        if self.kind.has_intruders() && !(1..=self.memory).contains(&self.max_intruders) {
            return Err(Error::InvalidConfig(format!(
                "1 ≤ N ≤ T for kind {}",
                self.kind
            )));
        }
        if self.kind.has_gaps() && !(1..=self.memory).contains(&self.max_steps) {
            return Err(Error::InvalidConfig(format!(
                "1 ≤ S ≤ T for kind {}",
                self.kind
            )));
        }
        Ok(())
    }
}

/// Binary mask over tracklet positions marking intruder slots. Bit 0 is never set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskVector(Vec<bool>);

impl MaskVector {
    pub fn new(bits: Vec<bool>) -> Result<Self> {
        if bits.first().copied().unwrap_or(false) {
            return Err(Error::InvalidConfig("mask bit 0 (detection slot) must be clear".into()));
        }
        Ok(MaskVector(bits))
    }

    pub fn zeros(len: usize) -> Self {
        MaskVector(vec![false; len])
    }

    pub fn from_positions(len: usize, positions: &[usize]) -> Result<Self> {
        let mut bits = vec![false; len];
        for &p in positions {
            if p >= len {
                return Err(Error::LengthMismatch(format!(
                    "mask position {p} outside length {len}"
                )));
            }
            bits[p] = true;
        }
        MaskVector::new(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn popcount(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }
}

/// Most frequent identity; ties go to the smallest identity value.
pub fn mode_identity(history: &[u32]) -> Result<u32> {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for &id in history {
        *counts.entry(id).or_default() += 1;
    }
    let mut best: Option<(u32, usize)> = None;
    for (id, c) in counts {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((id, c));
        }
    }
    best.map(|(id, _)| id).ok_or(Error::Empty("identity history"))
}

/// 1 iff the detection identity equals the mode of the history identities.
pub fn label_tracklet(t: &FeatureTracklet) -> Result<u8> {
    if t.components.len() < 2 {
        return Err(Error::Empty("tracklet history"));
    }
    let history: Vec<u32> = t.history().iter().map(Component::identity).collect();
    Ok(u8::from(t.detection().identity() == mode_identity(&history)?))
}

/// Checks whether `t` belongs to the positive or negative subset (chosen by
/// its label) of the configured kind.
///
/// For kinds with intruders, frames are checked against the skeleton
/// constraints and the number of history slots deviating from the reference
/// identity is bounded by `N`.
pub fn validate_membership(t: &FeatureTracklet, cfg: &FactoryConfig) -> bool {
    let len = cfg.memory + 1;
    if t.components.len() != len {
        return false;
    }
    match label_tracklet(t) {
        Ok(l) if l == t.label => {}
        _ => return false,
    }
    let frames = t.frames();
    if frames.windows(2).any(|w| w[0] <= w[1]) {
        return false;
    }
    let gaps: Vec<u32> = frames.windows(2).map(|w| w[0] - w[1]).collect();
    let ids = t.identities();
    let positive = t.is_positive();
    let kind = cfg.kind;

    // Transitions constrained by the kind: all for positives, history-only for negatives.
    let constrained = if positive { &gaps[..] } else { &gaps[1..] };
    let frames_ok = match kind {
        TrackletKind::I | TrackletKind::IV => constrained.iter().all(|&g| g == 1),
        TrackletKind::II => {
            if positive {
                gaps[0] < cfg.max_gap && gaps[1..].iter().all(|&g| g == 1)
            } else {
                constrained.iter().all(|&g| g == 1)
            }
        }
        TrackletKind::III | TrackletKind::V => {
            constrained.iter().all(|&g| g <= cfg.max_gap)
                && constrained.iter().filter(|&&g| g > 1).count() <= cfg.max_steps
        }
    };
    if !frames_ok {
        return false;
    }

    let reference = if positive {
        ids[0]
    } else {
        match mode_identity(&ids[1..]) {
            Ok(m) => m,
            Err(_) => return false,
        }
    };
    let deviating = ids[1..].iter().filter(|&&id| id != reference).count();
    let allowed = if kind.has_intruders() {
        cfg.max_intruders
    } else {
        0
    };
    deviating <= allowed && (positive || ids[0] != reference)
}

/// Replaces the masked history slots with donor appearances.
///
/// Donors are consumed in slot order; each substituted component keeps the
/// slot's frame index and takes the donor's feature, identity and sequence.
pub fn apply_intruders(
    t: &FeatureTracklet,
    mask: &MaskVector,
    donors: &[Component],
) -> Result<FeatureTracklet> {
    if mask.len() != t.components.len() {
        return Err(Error::LengthMismatch(format!(
            "mask length {} vs tracklet length {}",
            mask.len(),
            t.components.len()
        )));
    }
    if mask.popcount() != donors.len() {
        return Err(Error::LengthMismatch(format!(
            "{} masked slots but {} donors",
            mask.popcount(),
            donors.len()
        )));
    }
    let mut donors = donors.iter();
    let components = t
        .components
        .iter()
        .zip(mask.bits())
        .map(|(c, &set)| {
            if set {
                let d = donors.next().expect("donor count checked");
                Component {
                    feature: d.feature.clone(),
                    meta: ObservationMeta {
                        sequence: d.meta.sequence.clone(),
                        frame: c.meta.frame,
                        identity: d.meta.identity,
                    },
                }
            } else {
                c.clone()
            }
        })
        .collect();
    FeatureTracklet::labelled(components)
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

struct PoolIndex<'a> {
    pool: &'a [FeatureRecord],
    /// (sequence, identity) -> frame -> pool index.
    tracks: Vec<((&'a str, u32), BTreeMap<u32, usize>)>,
    /// (sequence, frame) -> pool indices.
    by_frame: HashMap<(&'a str, u32), Vec<usize>>,
}

impl<'a> PoolIndex<'a> {
    fn new(pool: &'a [FeatureRecord]) -> Self {
        let mut tracks: BTreeMap<(&str, u32), BTreeMap<u32, usize>> = BTreeMap::new();
        let mut by_frame: HashMap<(&str, u32), Vec<usize>> = HashMap::new();
        for (i, (meta, _)) in pool.iter().enumerate() {
            tracks
                .entry((meta.sequence.as_str(), meta.identity))
                .or_default()
                .entry(meta.frame)
                .or_insert(i);
            by_frame
                .entry((meta.sequence.as_str(), meta.frame))
                .or_default()
                .push(i);
        }
        PoolIndex {
            pool,
            tracks: tracks.into_iter().collect(),
            by_frame,
        }
    }

    fn component(&self, i: usize) -> Component {
        self.pool[i].clone().into()
    }

    fn distinct_identities(&self) -> usize {
        let mut ids: Vec<u32> = self.tracks.iter().map(|((_, id), _)| *id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    fn longest_consecutive_run(&self) -> usize {
        self.tracks
            .iter()
            .map(|(_, frames)| {
                let mut best = 0;
                let mut run = 0;
                let mut prev: Option<u32> = None;
                for &f in frames.keys() {
                    run = if prev == Some(f.wrapping_sub(1)) { run + 1 } else { 1 };
                    best = best.max(run);
                    prev = Some(f);
                }
                best
            })
            .max()
            .unwrap_or(0)
    }

    /// Pool indices for frames `first, first - gaps[0], ...` of one track, if all exist.
    fn walk(&self, track: usize, first: u32, gaps: &[u32]) -> Option<Vec<usize>> {
        let frames = &self.tracks[track].1;
        let mut out = Vec::with_capacity(gaps.len() + 1);
        let mut f = first;
        out.push(*frames.get(&f)?);
        for &g in gaps {
            f = f.checked_sub(g)?;
            out.push(*frames.get(&f)?);
        }
        Some(out)
    }

    fn random_donor(&self, rng: &mut ChaCha8Rng, excluded: u32) -> Option<usize> {
        for _ in 0..64 {
            let i = rng.gen_range(0..self.pool.len());
            if self.pool[i].0.identity != excluded {
                return Some(i);
            }
        }
        let candidates: Vec<usize> = (0..self.pool.len())
            .filter(|&i| self.pool[i].0.identity != excluded)
            .collect();
        candidates.choose(rng).copied()
    }
}

/// Random transition gaps: `steps_max` gapped transitions at most, each in `2..=max_gap`.
fn random_gaps(rng: &mut ChaCha8Rng, len: usize, steps_max: usize, max_gap: u32) -> Vec<u32> {
    let mut gaps = vec![1; len];
    let steps = rng.gen_range(0..=steps_max.min(len));
    for pos in index::sample(rng, len, steps) {
        gaps[pos] = rng.gen_range(2..=max_gap);
    }
    gaps
}

fn intrude(
    rng: &mut ChaCha8Rng,
    index: &PoolIndex<'_>,
    skeleton: FeatureTracklet,
    max_intruders: usize,
    excluded: u32,
) -> Result<FeatureTracklet> {
    let len = skeleton.components.len();
    let count = rng.gen_range(0..=max_intruders.min(len - 1));
    let mut positions: Vec<usize> = index::sample(rng, len - 1, count)
        .into_iter()
        .map(|p| p + 1)
        .collect();
    positions.sort_unstable();
    let mut donors = Vec::with_capacity(count);
    for _ in 0..count {
        let d = index
            .random_donor(rng, excluded)
            .ok_or_else(|| Error::InsufficientPool("no intruder donor available".into()))?;
        donors.push(index.component(d));
    }
    let mask = MaskVector::from_positions(len, &positions)?;
    apply_intruders(&skeleton, &mask, &donors)
}

fn sample_positive(
    rng: &mut ChaCha8Rng,
    index: &PoolIndex<'_>,
    cfg: &FactoryConfig,
    eligible: &[usize],
) -> Result<Option<FeatureTracklet>> {
    let t = cfg.memory;
    let gaps = match cfg.kind {
        TrackletKind::I | TrackletKind::IV => vec![1; t],
        TrackletKind::II => {
            let mut g = vec![1; t];
            g[0] = rng.gen_range(1..cfg.max_gap);
            g
        }
        TrackletKind::III | TrackletKind::V => random_gaps(rng, t, cfg.max_steps, cfg.max_gap),
    };
    let track = *eligible.choose(rng).expect("eligible tracks checked");
    let frames = &index.tracks[track].1;
    let first = *frames
        .keys()
        .nth(rng.gen_range(0..frames.len()))
        .expect("non-empty track");
    let Some(idx) = index.walk(track, first, &gaps) else {
        return Ok(None);
    };
    let skeleton = FeatureTracklet::labelled(idx.into_iter().map(|i| index.component(i)).collect())?;
    let out = if cfg.kind.has_intruders() {
        let k = skeleton.detection().identity();
        intrude(rng, index, skeleton, cfg.max_intruders, k)?
    } else {
        skeleton
    };
    Ok(out.is_positive().then_some(out))
}

fn sample_negative(
    rng: &mut ChaCha8Rng,
    index: &PoolIndex<'_>,
    cfg: &FactoryConfig,
    eligible: &[usize],
) -> Result<Option<FeatureTracklet>> {
    let t = cfg.memory;
    let history_gaps = match cfg.kind {
        TrackletKind::III | TrackletKind::V => {
            random_gaps(rng, t - 1, cfg.max_steps, cfg.max_gap)
        }
        _ => vec![1; t - 1],
    };
    let track = *eligible.choose(rng).expect("eligible tracks checked");
    let ((sequence, k), frames) = &index.tracks[track];
    let first = *frames
        .keys()
        .nth(rng.gen_range(0..frames.len()))
        .expect("non-empty track");
    let Some(history) = index.walk(track, first, &history_gaps) else {
        return Ok(None);
    };

    // Detection: another identity shortly after the newest history frame,
    // same sequence when possible.
    let window = if cfg.kind.has_gaps() { cfg.max_gap } else { 1 };
    let mut candidates: Vec<usize> = Vec::new();
    for f in first + 1..=first + window {
        if let Some(v) = index.by_frame.get(&(*sequence, f)) {
            candidates.extend(v.iter().copied().filter(|&i| index.pool[i].0.identity != *k));
        }
    }
    let detection = match candidates.choose(rng) {
        Some(&i) => i,
        None => {
            let mut found = None;
            for _ in 0..64 {
                let i = rng.gen_range(0..index.pool.len());
                let m = &index.pool[i].0;
                if m.identity != *k && m.frame > first {
                    found = Some(i);
                    break;
                }
            }
            match found {
                Some(i) => i,
                None => return Ok(None),
            }
        }
    };

    let mut comps = Vec::with_capacity(t + 1);
    comps.push(index.component(detection));
    comps.extend(history.into_iter().map(|i| index.component(i)));
    let skeleton = FeatureTracklet::labelled(comps)?;
    let out = if cfg.kind.has_intruders() {
        intrude(rng, index, skeleton, cfg.max_intruders, *k)?
    } else {
        skeleton
    };
    Ok((!out.is_positive()).then_some(out))
}

/// Generates `M` tracklets of the configured kind, `ceil(M/2)` positive and
/// `floor(M/2)` negative, shuffled.
pub fn generate_set(cfg: &FactoryConfig, pool: &[FeatureRecord]) -> Result<Vec<FeatureTracklet>> {
    cfg.validate()?;
    let index = PoolIndex::new(pool);
    let t = cfg.memory;
    if index.longest_consecutive_run() < t + 1 {
        return Err(Error::InsufficientPool(format!(
            "no identity has {} consecutive-frame observations",
            t + 1
        )));
    }
    let negatives = cfg.set_size / 2;
    let positives = cfg.set_size - negatives;
    if (negatives > 0 || cfg.kind.has_intruders()) && index.distinct_identities() < 2 {
        return Err(Error::InsufficientPool(
            "negatives and intruders need at least two identities".into(),
        ));
    }
    let pos_tracks: Vec<usize> = (0..index.tracks.len())
        .filter(|&i| index.tracks[i].1.len() > t)
        .collect();
    let neg_tracks: Vec<usize> = (0..index.tracks.len())
        .filter(|&i| index.tracks[i].1.len() >= t)
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.set_size);
    for i in 0..cfg.set_size {
        let positive = i < positives;
        let mut emitted = None;
        for _ in 0..MAX_ATTEMPTS {
            let candidate = if positive {
                sample_positive(&mut rng, &index, cfg, &pos_tracks)?
            } else {
                sample_negative(&mut rng, &index, cfg, &neg_tracks)?
            };
            if let Some(c) = candidate {
                debug_assert!(validate_membership(&c, cfg));
                emitted = Some(c);
                break;
            }
        }
        match emitted {
            Some(c) => out.push(c),
            None => {
                return Err(Error::Unsatisfiable(format!(
                    "no {} tracklet of kind {} found in {MAX_ATTEMPTS} attempts (T={}, F={}, S={}, N={})",
                    if positive { "positive" } else { "negative" },
                    cfg.kind,
                    cfg.memory,
                    cfg.max_gap,
                    cfg.max_steps,
                    cfg.max_intruders
                )))
            }
        }
    }
    out.shuffle(&mut rng);
    Ok(out)
}

// ---------------------------------------------------------------------------
// Tracklet files
// ---------------------------------------------------------------------------

/// Writes `T=<int>,n=<dim>` followed by one `y|id:frame:v0,v1,...|...` line per tracklet.
///
/// Values use the shortest round-trip representation, so reloading is exact.
/// Sequence tags are not stored.
pub fn store_tracklets(
    set: &[FeatureTracklet],
    memory: usize,
    dim: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let (memory, dim) = set.first().map_or((memory, dim), |t| {
        (t.memory(), t.detection().feature.dim())
    });
    for t in set {
        if t.memory() != memory {
            return Err(Error::LengthMismatch(format!(
                "tracklet memory {} vs {memory}",
                t.memory()
            )));
        }
        if let Some(c) = t.components.iter().find(|c| c.feature.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: c.feature.dim(),
            });
        }
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "T={memory},n={dim}").map_err(io)?;
    for t in set {
        write!(w, "{}", t.label).map_err(io)?;
        for c in &t.components {
            write!(w, "|{}:{}:", c.meta.identity, c.meta.frame).map_err(io)?;
            for (i, v) in c.feature.as_slice().iter().enumerate() {
                if i > 0 {
                    w.write_all(b",").map_err(io)?;
                }
                write!(w, "{v:e}").map_err(io)?;
            }
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads a tracklet file written by [`store_tracklets`]. Returns `(T, n, set)`.
pub fn load_tracklets(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<FeatureTracklet>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "missing header `T=<int>,n=<dim>`"))?;
    let (memory, dim) = parse_tracklet_header(header)
        .ok_or_else(|| Error::parse(path, 1, format!("bad header `{header}`")))?;

    let mut set = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let err = |m: String| Error::parse(path, lineno, m);
        let mut parts = line.trim().split('|');
        let label: u8 = match parts.next() {
            Some("0") => 0,
            Some("1") => 1,
            other => return Err(err(format!("bad label {other:?}"))),
        };
        let mut components = Vec::with_capacity(memory + 1);
        for part in parts {
            let mut fields = part.splitn(3, ':');
            let (Some(id), Some(frame), Some(values)) = (fields.next(), fields.next(), fields.next())
            else {
                return Err(err(format!("component `{part}` is not `id:frame:values`")));
            };
            let identity = id.parse::<u32>().map_err(|e| err(format!("bad id `{id}`: {e}")))?;
            let frame = frame
                .parse::<u32>()
                .map_err(|e| err(format!("bad frame `{frame}`: {e}")))?;
            let values = values
                .split(',')
                .map(|v| v.parse::<f64>().map_err(|e| err(format!("bad value `{v}`: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            if values.len() != dim {
                return Err(err(format!(
                    "dimension mismatch: header n={dim}, component has {}",
                    values.len()
                )));
            }
            let feature = FeatureVector::new(values).map_err(|e| err(e.to_string()))?;
            components.push(Component {
                feature,
                meta: ObservationMeta::new("", frame, identity),
            });
        }
        if components.len() != memory + 1 {
            return Err(err(format!(
                "expected {} components, found {}",
                memory + 1,
                components.len()
            )));
        }
        set.push(FeatureTracklet { components, label });
    }
    Ok((memory, dim, set))
}

fn parse_tracklet_header(line: &str) -> Option<(usize, usize)> {
    let (t, n) = line.trim().split_once(',')?;
    Some((
        t.trim().strip_prefix("T=")?.parse().ok()?,
        n.trim().strip_prefix("n=")?.parse().ok()?,
    ))
}
