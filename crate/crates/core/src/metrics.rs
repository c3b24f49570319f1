//! CLEAR-MOT scoring: MOTA and its error sources, IDF1, mostly tracked /
//! mostly lost, precision and recall.
//!
//! Frame-level matching keeps last frame's pairings while they stay above the
//! IoU threshold and assigns the rest by minimum `1 - IoU`. Global figures are
//! computed from pooled counts, never by averaging per-sequence ratios.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tracker::{iou, solve_assignment, BBox, CostMatrix, ResultRow};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtEntry {
    pub frame: u32,
    pub id: u32,
    pub bbox: BBox,
    /// False for rows flagged as ignored or with zero visibility.
    pub valid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypEntry {
    pub frame: u32,
    pub id: u32,
    pub bbox: BBox,
}

impl From<ResultRow> for HypEntry {
    fn from(r: ResultRow) -> Self {
        HypEntry {
            frame: r.frame,
            id: r.id,
            bbox: r.bbox,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsConfig {
    pub iou_threshold: f64,
    /// Drop ground truth marked invalid or invisible.
    pub exclude_invalid: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            iou_threshold: 0.5,
            exclude_invalid: true,
        }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return Err(Error::InvalidConfig("IoU threshold ∈ (0,1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FrameCounts {
    pub frame: u32,
    pub gt: usize,
    pub hyp: usize,
    pub matches: usize,
    pub fp: usize,
    pub fn_: usize,
    pub idsw: usize,
}

/// Summed counts over frames (or sequences).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Totals {
    pub gt: usize,
    pub matches: usize,
    pub fp: usize,
    pub fn_: usize,
    pub idsw: usize,
}

impl Totals {
    pub fn add(&mut self, o: &Totals) {
        self.gt += o.gt;
        self.matches += o.matches;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.idsw += o.idsw;
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClearMatching {
    pub frames: Vec<FrameCounts>,
    /// `(frame, gt id, hyp id)` for every match.
    pub pairs: Vec<(u32, u32, u32)>,
}

impl ClearMatching {
    pub fn totals(&self) -> Totals {
        let mut t = Totals::default();
        for f in &self.frames {
            t.add(&Totals {
                gt: f.gt,
                matches: f.matches,
                fp: f.fp,
                fn_: f.fn_,
                idsw: f.idsw,
            });
        }
        t
    }
}

fn usable<'a>(gt: &'a [GtEntry], cfg: &MetricsConfig) -> impl Iterator<Item = &'a GtEntry> + 'a {
    let exclude = cfg.exclude_invalid;
    gt.iter().filter(move |g| g.valid || !exclude)
}

/// Frame-by-frame CLEAR-MOT matching.
pub fn clear_match(gt: &[GtEntry], hyp: &[HypEntry], cfg: &MetricsConfig) -> ClearMatching {
    let th = cfg.iou_threshold;
    let mut gt_by: BTreeMap<u32, Vec<&GtEntry>> = BTreeMap::new();
    let mut hyp_by: BTreeMap<u32, Vec<&HypEntry>> = BTreeMap::new();
    for g in usable(gt, cfg) {
        gt_by.entry(g.frame).or_default().push(g);
    }
    for h in hyp {
        hyp_by.entry(h.frame).or_default().push(h);
    }
    let frames: BTreeSet<u32> = gt_by.keys().chain(hyp_by.keys()).copied().collect();

    let mut last: BTreeMap<u32, u32> = BTreeMap::new();
    let mut out = ClearMatching::default();
    for frame in frames {
        let mut gs = gt_by.remove(&frame).unwrap_or_default();
        let mut hs = hyp_by.remove(&frame).unwrap_or_default();
        gs.sort_by_key(|g| g.id);
        hs.sort_by_key(|h| h.id);
        let mut g_used = vec![false; gs.len()];
        let mut h_used = vec![false; hs.len()];
        let mut matched: Vec<(usize, usize)> = Vec::new();

        for (gi, g) in gs.iter().enumerate() {
            let Some(&prev) = last.get(&g.id) else { continue };
            let keep = hs
                .iter()
                .enumerate()
                .find(|(hi, h)| !h_used[*hi] && h.id == prev && iou(&g.bbox, &h.bbox) >= th);
            if let Some((hi, _)) = keep {
                g_used[gi] = true;
                h_used[hi] = true;
                matched.push((gi, hi));
            }
        }

        let rows: Vec<usize> = (0..gs.len()).filter(|&i| !g_used[i]).collect();
        let cols: Vec<usize> = (0..hs.len()).filter(|&j| !h_used[j]).collect();
        let mut cost = Vec::with_capacity(rows.len() * cols.len());
        let mut forbidden = Vec::with_capacity(rows.len() * cols.len());
        for &i in &rows {
            for &j in &cols {
                let o = iou(&gs[i].bbox, &hs[j].bbox);
                cost.push(1.0 - o);
                forbidden.push(o < th);
            }
        }
        let res = solve_assignment(&CostMatrix::new(rows.len(), cols.len(), cost).with_forbidden(forbidden));
        let mut idsw = 0;
        for (r, c) in res.matches {
            let (gi, hi) = (rows[r], cols[c]);
            if last.get(&gs[gi].id).is_some_and(|&p| p != hs[hi].id) {
                idsw += 1;
            }
            matched.push((gi, hi));
        }
        matched.sort_unstable();
        for &(gi, hi) in &matched {
            last.insert(gs[gi].id, hs[hi].id);
            out.pairs.push((frame, gs[gi].id, hs[hi].id));
        }
        let m = matched.len();
        out.frames.push(FrameCounts {
            frame,
            gt: gs.len(),
            hyp: hs.len(),
            matches: m,
            fp: hs.len() - m,
            fn_: gs.len() - m,
            idsw,
        });
    }
    out
}

/// `1 - (FN + FP + IDsw) / Σg`.
pub fn mota(t: &Totals) -> Result<f64> {
    if t.gt == 0 {
        return Err(Error::Empty("ground-truth objects"));
    }
    Ok(1.0 - (t.fn_ + t.fp + t.idsw) as f64 / t.gt as f64)
}

pub fn precision_recall(t: &Totals) -> (f64, f64) {
    let ratio = |a: usize, b: usize| if a + b == 0 { 0.0 } else { a as f64 / (a + b) as f64 };
    (ratio(t.matches, t.fp), ratio(t.matches, t.fn_))
}

/// Identity-level counts behind IDF1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IdCounts {
    pub idtp: usize,
    pub gt: usize,
    pub hyp: usize,
}

impl IdCounts {
    pub fn idf1(&self) -> f64 {
        if self.gt + self.hyp == 0 {
            0.0
        } else {
            2.0 * self.idtp as f64 / (self.gt + self.hyp) as f64
        }
    }
}

/// Best one-to-one pairing of ground-truth and hypothesis identities by the
/// number of frames they overlap (IoU ≥ threshold).
pub fn id_counts(gt: &[GtEntry], hyp: &[HypEntry], cfg: &MetricsConfig) -> IdCounts {
    let gts: Vec<&GtEntry> = usable(gt, cfg).collect();
    let gt_ids: Vec<u32> = gts.iter().map(|g| g.id).collect::<BTreeSet<_>>().into_iter().collect();
    let hyp_ids: Vec<u32> = hyp.iter().map(|h| h.id).collect::<BTreeSet<_>>().into_iter().collect();
    let mut hyp_by: BTreeMap<u32, Vec<&HypEntry>> = BTreeMap::new();
    for h in hyp {
        hyp_by.entry(h.frame).or_default().push(h);
    }
    let mut overlap = vec![0usize; gt_ids.len() * hyp_ids.len()];
    for g in &gts {
        let gi = gt_ids.binary_search(&g.id).unwrap();
        for h in hyp_by.get(&g.frame).into_iter().flatten() {
            if iou(&g.bbox, &h.bbox) >= cfg.iou_threshold {
                let hi = hyp_ids.binary_search(&h.id).unwrap();
                overlap[gi * hyp_ids.len() + hi] += 1;
            }
        }
    }
    let cost = overlap.iter().map(|&c| -(c as f64)).collect();
    let forbidden = overlap.iter().map(|&c| c == 0).collect();
    let res = solve_assignment(&CostMatrix::new(gt_ids.len(), hyp_ids.len(), cost).with_forbidden(forbidden));
    IdCounts {
        idtp: res.matches.iter().map(|&(r, c)| overlap[r * hyp_ids.len() + c]).sum(),
        gt: gts.len(),
        hyp: hyp.len(),
    }
}

pub fn idf1(gt: &[GtEntry], hyp: &[HypEntry], cfg: &MetricsConfig) -> f64 {
    id_counts(gt, hyp, cfg).idf1()
}

/// Trajectory coverage classes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Coverage {
    pub trajectories: usize,
    pub mostly_tracked: usize,
    pub mostly_lost: usize,
}

impl Coverage {
    /// `(MT, ML)` as fractions of trajectories.
    pub fn ratios(&self) -> (f64, f64) {
        if self.trajectories == 0 {
            return (0.0, 0.0);
        }
        let n = self.trajectories as f64;
        (self.mostly_tracked as f64 / n, self.mostly_lost as f64 / n)
    }
}

/// Mostly tracked: matched in ≥ 80% of its frames. Mostly lost: ≤ 20%.
pub fn mt_ml(gt: &[GtEntry], matching: &ClearMatching, cfg: &MetricsConfig) -> Coverage {
    let mut life: BTreeMap<u32, usize> = BTreeMap::new();
    for g in usable(gt, cfg) {
        *life.entry(g.id).or_default() += 1;
    }
    let mut hit: BTreeMap<u32, usize> = BTreeMap::new();
    for &(_, g, _) in &matching.pairs {
        *hit.entry(g).or_default() += 1;
    }
    let mut c = Coverage {
        trajectories: life.len(),
        ..Default::default()
    };
    for (id, &n) in &life {
        let m = hit.get(id).copied().unwrap_or(0);
        // integer comparisons keep the 80% / 20% boundaries exact
        if 5 * m >= 4 * n {
            c.mostly_tracked += 1;
        }
        if 5 * m <= n {
            c.mostly_lost += 1;
        }
    }
    c
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceReport {
    pub name: String,
    pub totals: Totals,
    pub ids: IdCounts,
    pub coverage: Coverage,
    pub mota: f64,
    pub idf1: f64,
    pub mt: f64,
    pub ml: f64,
    pub precision: f64,
    pub recall: f64,
}

impl SequenceReport {
    fn from_counts(name: String, totals: Totals, ids: IdCounts, coverage: Coverage) -> Result<Self> {
        let (mt, ml) = coverage.ratios();
        let (precision, recall) = precision_recall(&totals);
        Ok(SequenceReport {
            mota: mota(&totals)?,
            idf1: ids.idf1(),
            name,
            totals,
            ids,
            coverage,
            mt,
            ml,
            precision,
            recall,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotReport {
    pub sequences: Vec<SequenceReport>,
    pub global: SequenceReport,
}

/// One named sequence of ground truth and hypotheses.
#[derive(Debug, Clone)]
pub struct SequenceInput {
    pub name: String,
    pub gt: Vec<GtEntry>,
    pub hyp: Vec<HypEntry>,
}

pub fn score_sequence(seq: &SequenceInput, cfg: &MetricsConfig) -> Result<SequenceReport> {
    let m = clear_match(&seq.gt, &seq.hyp, cfg);
    SequenceReport::from_counts(
        seq.name.clone(),
        m.totals(),
        id_counts(&seq.gt, &seq.hyp, cfg),
        mt_ml(&seq.gt, &m, cfg),
    )
}

pub fn score(sequences: &[SequenceInput], cfg: &MetricsConfig) -> Result<MotReport> {
    cfg.validate()?;
    if sequences.is_empty() {
        return Err(Error::Empty("sequences"));
    }
    let reports = sequences
        .iter()
        .map(|s| score_sequence(s, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut totals = Totals::default();
    let mut ids = IdCounts::default();
    let mut cov = Coverage::default();
    for r in &reports {
        totals.add(&r.totals);
        ids.idtp += r.ids.idtp;
        ids.gt += r.ids.gt;
        ids.hyp += r.ids.hyp;
        cov.trajectories += r.coverage.trajectories;
        cov.mostly_tracked += r.coverage.mostly_tracked;
        cov.mostly_lost += r.coverage.mostly_lost;
    }
    Ok(MotReport {
        global: SequenceReport::from_counts("Global".into(), totals, ids, cov)?,
        sequences: reports,
    })
}

/// `sequence,MOTA,FP,FN,IDsw,IDF1,MT,ML`, one row per sequence then the global row.
pub fn report_csv(report: &MotReport) -> String {
    let mut s = String::from("sequence,MOTA,FP,FN,IDsw,IDF1,MT,ML\n");
    for r in report.sequences.iter().chain(std::iter::once(&report.global)) {
        let _ = writeln!(
            s,
            "{},{:.6},{},{},{},{:.6},{:.6},{:.6}",
            r.name, r.mota, r.totals.fp, r.totals.fn_, r.totals.idsw, r.idf1, r.mt, r.ml
        );
    }
    s
}

/// Parses `frame,id,left,top,width,height[,flag,class,visibility]`.
pub fn parse_gt(text: &str, path: &Path) -> Result<Vec<GtEntry>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let lineno = i + 1;
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() < 6 {
            return Err(Error::parse(path, lineno, "expected at least 6 fields"));
        }
        let num = |k: usize| {
            f[k].parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(path, lineno, format!("field {} is not a number", k + 1)))
        };
        let int = |k: usize| {
            f[k].parse::<u32>()
                .ok()
                .filter(|&v| v >= 1)
                .ok_or_else(|| Error::parse(path, lineno, format!("field {} is not a positive integer", k + 1)))
        };
        let bbox = BBox::new(num(2)?, num(3)?, num(4)?, num(5)?);
        if !bbox.is_valid() {
            return Err(Error::parse(path, lineno, "box width and height must be positive"));
        }
        let flag = if f.len() > 6 { num(6)? } else { 1.0 };
        let visibility = if f.len() > 8 { num(8)? } else { 1.0 };
        out.push(GtEntry {
            frame: int(0)?,
            id: int(1)?,
            bbox,
            valid: flag != 0.0 && visibility > 0.0,
        });
    }
    Ok(out)
}

pub fn load_gt(path: impl AsRef<Path>) -> Result<Vec<GtEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_gt(&text, path)
}

pub fn load_hyp(path: impl AsRef<Path>) -> Result<Vec<HypEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(crate::tracker::parse_results(&text, path)?
        .into_iter()
        .map(HypEntry::from)
        .collect())
}

/// Writes ground truth in the nine-column layout.
pub fn format_gt(gt: &[GtEntry]) -> String {
    let mut s = String::new();
    for g in gt {
        let v = if g.valid { 1 } else { 0 };
        let _ = writeln!(
            s,
            "{},{},{:.3},{:.3},{:.3},{:.3},{v},1,{v}",
            g.frame, g.id, g.bbox.left, g.bbox.top, g.bbox.width, g.bbox.height
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x: f64) -> BBox {
        BBox::new(x, 0.0, 10.0, 10.0)
    }

    fn gt(frame: u32, id: u32, x: f64) -> GtEntry {
        GtEntry {
            frame,
            id,
            bbox: b(x),
            valid: true,
        }
    }

    fn hyp(frame: u32, id: u32, x: f64) -> HypEntry {
        HypEntry { frame, id, bbox: b(x) }
    }

    #[test]
    fn mota_hand_example() {
        let t = Totals {
            gt: 10,
            matches: 8,
            fp: 1,
            fn_: 2,
            idsw: 1,
        };
        assert!((mota(&t).unwrap() - 0.6).abs() < 1e-15);
        assert!(mota(&Totals::default()).is_err());
    }

    #[test]
    fn precision_recall_toy() {
        let t = Totals {
            gt: 20,
            matches: 7,
            fp: 3,
            fn_: 13,
            idsw: 0,
        };
        let (p, r) = precision_recall(&t);
        assert!((p - 0.7).abs() < 1e-15 && (r - 0.35).abs() < 1e-15);
        assert_eq!(precision_recall(&Totals::default()), (0.0, 0.0));
    }

    #[test]
    fn swap_counts_two_switches() {
        let mut g = Vec::new();
        let mut h = Vec::new();
        for f in 1..=5 {
            g.push(gt(f, 1, 0.0));
            g.push(gt(f, 2, 100.0));
            let (a, c) = if f >= 3 { (2, 1) } else { (1, 2) };
            h.push(hyp(f, a, 0.0));
            h.push(hyp(f, c, 100.0));
        }
        let t = clear_match(&g, &h, &MetricsConfig::default()).totals();
        assert_eq!((t.fp, t.fn_, t.idsw), (0, 0, 2));
        assert!((mota(&t).unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn coverage_boundary_is_inclusive() {
        let g: Vec<_> = (1..=10).map(|f| gt(f, 1, 0.0)).collect();
        let h: Vec<_> = (1..=8).map(|f| hyp(f, 5, 0.0)).collect();
        let cfg = MetricsConfig::default();
        let c = mt_ml(&g, &clear_match(&g, &h, &cfg), &cfg);
        assert_eq!(c.ratios(), (1.0, 0.0));
        let c = mt_ml(&g, &clear_match(&g, &[], &cfg), &cfg);
        assert_eq!(c.ratios(), (0.0, 1.0));
    }

    #[test]
    fn invalid_gt_is_excluded() {
        let mut g = vec![gt(1, 1, 0.0)];
        g.push(GtEntry {
            valid: false,
            ..gt(1, 2, 50.0)
        });
        let t = clear_match(&g, &[hyp(1, 1, 0.0)], &MetricsConfig::default()).totals();
        assert_eq!((t.gt, t.fn_, t.fp), (1, 0, 0));
    }

    #[test]
    fn gt_parse_flags_and_errors() {
        let g = parse_gt("1,1,0,0,5,5,1,1,1\n1,2,0,0,5,5,0,1,1\n2,1,0,0,5,5,1,1,0\n", Path::new("g")).unwrap();
        assert_eq!(g.iter().map(|e| e.valid).collect::<Vec<_>>(), vec![true, false, false]);
        let err = parse_gt("1,1,0,0,5,5\n0,1,0,0,5,5\n", Path::new("gt.txt")).unwrap_err();
        assert!(err.to_string().contains("gt.txt:2"));
    }
}
