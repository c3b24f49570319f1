//! Appearance feature space.
//!
//! Person observations are represented by fixed-length real arrays produced
//! offline by a convolutional embedder. This module does not run the embedder;
//! it provides two feature sources behind the same record type:
//!
//! * [`SyntheticWorld`]: per-identity Gaussian clusters with optional linear
//!   drift, deterministic in `(identity, frame, seed)`.
//! * feature files ([`load_features`] / [`store_features`]) holding features
//!   computed elsewhere.
//!
//! [`vgg11_shape_plan`] reproduces the layer-size arithmetic of the VGG11-style
//! embedder so input resolutions can be checked before features are computed.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Default feature dimension (output width of the embedder's last layer).
pub const DEFAULT_FEATURE_DIM: usize = 1000;

/// Appearance feature of a single observation. All elements are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "feature element {pos} is {}",
                values[pos]
            )));
        }
        Ok(FeatureVector(values))
    }

    pub fn zeros(dim: usize) -> Self {
        FeatureVector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Who and when a pooled feature was observed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObservationMeta {
    pub sequence: String,
    pub frame: u32,
    pub identity: u32,
}

impl ObservationMeta {
    pub fn new(sequence: impl Into<String>, frame: u32, identity: u32) -> Self {
        ObservationMeta {
            sequence: sequence.into(),
            frame,
            identity,
        }
    }
}

/// A pooled observation: metadata plus its feature.
pub type FeatureRecord = (ObservationMeta, FeatureVector);

/// L2 distance between two features.
pub fn euclidean_distance(a: &FeatureVector, b: &FeatureVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(a.0
        .iter()
        .zip(&b.0)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

// ---------------------------------------------------------------------------
// Shape plan
// ---------------------------------------------------------------------------

/// Activation volume size: rows x cols x channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShapeSpec {
    pub rows: usize,
    pub cols: usize,
    pub channels: usize,
}

impl ShapeSpec {
    pub const fn new(rows: usize, cols: usize, channels: usize) -> Self {
        ShapeSpec {
            rows,
            cols,
            channels,
        }
    }
}

impl fmt::Display for ShapeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.rows, self.cols, self.channels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKernel {
    /// `rows x cols x depth`, stride 1, padding 1.
    Conv { rows: usize, cols: usize, depth: usize },
    Pool {
        rows: usize,
        cols: usize,
        depth: usize,
        stride: usize,
    },
    FullyConnected { outputs: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerPlan {
    pub name: &'static str,
    pub input: ShapeSpec,
    pub output: ShapeSpec,
    pub kernel: LayerKernel,
}

enum Stage {
    Conv(&'static str, usize),
    Pool(&'static str),
    Fc(&'static str, usize),
}

const VGG11_STAGES: [Stage; 16] = [
    Stage::Conv("Conv-1-1", 64),
    Stage::Pool("Pool-1"),
    Stage::Conv("Conv-2-1", 128),
    Stage::Pool("Pool-2"),
    Stage::Conv("Conv-3-1", 256),
    Stage::Conv("Conv-3-2", 256),
    Stage::Pool("Pool-3"),
    Stage::Conv("Conv-4-1", 512),
    Stage::Conv("Conv-4-2", 512),
    Stage::Pool("Pool-4"),
    Stage::Conv("Conv-5-1", 512),
    Stage::Conv("Conv-5-2", 512),
    Stage::Pool("Pool-5"),
    Stage::Fc("FC-6", 4096),
    Stage::Fc("FC-7", 4096),
    Stage::Fc("FC-8", DEFAULT_FEATURE_DIM),
];

/// Layer-by-layer sizes of the VGG11-based embedder (classifier softmax removed).
///
/// Spatial sizes must survive five 2x2/stride-2 poolings, so rows and cols
/// must be multiples of 32.
pub fn vgg11_shape_plan(input: ShapeSpec) -> Result<Vec<LayerPlan>> {
    if input.rows == 0 || input.cols == 0 || input.channels == 0 {
        return Err(Error::InvalidConfig(format!(
            "input shape {input} must have positive dimensions"
        )));
    }
    if !input.rows.is_multiple_of(32) || !input.cols.is_multiple_of(32) {
        return Err(Error::InvalidConfig(format!(
            "input shape {input}: rows and cols must be divisible by 32"
        )));
    }

    let mut plan = Vec::with_capacity(VGG11_STAGES.len());
    let mut current = input;
    for stage in &VGG11_STAGES {
        let (name, output, kernel) = match *stage {
            Stage::Conv(name, filters) => (
                name,
                ShapeSpec::new(current.rows, current.cols, filters),
                LayerKernel::Conv {
                    rows: 3,
                    cols: 3,
                    depth: current.channels,
                },
            ),
            Stage::Pool(name) => (
                name,
                ShapeSpec::new(current.rows / 2, current.cols / 2, current.channels),
                LayerKernel::Pool {
                    rows: 2,
                    cols: 2,
                    depth: current.channels,
                    stride: 2,
                },
            ),
            Stage::Fc(name, outputs) => (
                name,
                ShapeSpec::new(1, 1, outputs),
                LayerKernel::FullyConnected { outputs },
            ),
        };
        plan.push(LayerPlan {
            name,
            input: current,
            output,
            kernel,
        });
        current = output;
    }
    Ok(plan)
}

// ---------------------------------------------------------------------------
// Synthetic feature source
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorldConfig {
    pub identities: usize,
    /// Exact distance between any two identity cluster centers.
    pub separation: f64,
    /// Expected distance between two noise-only samples of one identity.
    pub noise: f64,
    /// Center displacement per frame along a per-identity direction.
    pub drift: f64,
    pub dim: usize,
    pub seed: u64,
}

impl Default for SyntheticWorldConfig {
    fn default() -> Self {
        SyntheticWorldConfig {
            identities: 8,
            separation: 1.0,
            noise: 0.2,
            drift: 0.0,
            dim: DEFAULT_FEATURE_DIM,
            seed: 0,
        }
    }
}

impl SyntheticWorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.identities == 0 {
            return Err(Error::InvalidConfig("identity count must be positive".into()));
        }
        if self.dim == 0 {
            return Err(Error::InvalidConfig("feature dimension must be positive".into()));
        }
        if self.identities > self.dim {
            return Err(Error::InvalidConfig(format!(
                "identity count {} exceeds feature dimension {}",
                self.identities, self.dim
            )));
        }
        if !(self.separation > 0.0 && self.separation.is_finite()) {
            return Err(Error::InvalidConfig("separation must be > 0".into()));
        }
        // zero noise is accepted as the degenerate noiseless world
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::InvalidConfig("noise scale must be >= 0".into()));
        }
        if !(self.drift >= 0.0 && self.drift.is_finite()) {
            return Err(Error::InvalidConfig("drift must be >= 0".into()));
        }
        Ok(())
    }
}

/// Deterministic synthetic embedder.
///
/// Cluster centers are `separation / sqrt(2)` times an orthonormal set, so
/// every pair of centers is exactly `separation` apart.
#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    config: SyntheticWorldConfig,
    centers: Vec<Vec<f64>>,
    drift_dirs: Vec<Vec<f64>>,
}

impl SyntheticWorld {
    pub fn new(config: SyntheticWorldConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let dim = config.dim;

        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(config.identities);
        while basis.len() < config.identities {
            let mut v = gaussian_vec(&mut rng, dim);
            for b in &basis {
                let proj = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
            }
            let norm = dot(&v, &v).sqrt();
            if norm < 1e-8 {
                continue;
            }
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
        let scale = config.separation / std::f64::consts::SQRT_2;
        let centers = basis
            .into_iter()
            .map(|v| v.into_iter().map(|x| x * scale).collect())
            .collect();

        let drift_dirs = (0..config.identities)
            .map(|_| {
                let v = gaussian_vec(&mut rng, dim);
                let norm = dot(&v, &v).sqrt();
                v.into_iter().map(|x| x / norm).collect()
            })
            .collect();

        Ok(SyntheticWorld {
            config,
            centers,
            drift_dirs,
        })
    }

    pub fn config(&self) -> &SyntheticWorldConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn identities(&self) -> usize {
        self.config.identities
    }

    /// Feature of `identity` observed at `frame`.
    pub fn feature(&self, identity: u32, frame: u32) -> Result<FeatureVector> {
        let center = self
            .centers
            .get(identity as usize)
            .ok_or(Error::UnknownIdentity(identity))?;
        let dir = &self.drift_dirs[identity as usize];
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(
            self.config.seed,
            u64::from(identity),
            u64::from(frame),
        ));
        let sigma = self.config.noise / (2.0 * self.config.dim as f64).sqrt();
        let shift = self.config.drift * f64::from(frame);
        let values = center
            .iter()
            .zip(dir)
            .map(|(c, d)| {
                let z: f64 = rng.sample(StandardNormal);
                c + shift * d + sigma * z
            })
            .collect();
        Ok(FeatureVector(values))
    }

    /// Feature not belonging to any identity cluster (e.g. a clutter detection).
    pub fn clutter(&self, key: u64) -> FeatureVector {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.config.seed, u64::MAX, key));
        let scale = self.config.separation / (2.0 * self.config.dim as f64).sqrt();
        FeatureVector(
            (0..self.config.dim)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        )
    }

    /// Features of `identities` over the frame range, as a pool for tracklet generation.
    pub fn pool(
        &self,
        sequence: &str,
        identities: impl IntoIterator<Item = u32>,
        frames: std::ops::Range<u32>,
    ) -> Result<Vec<FeatureRecord>> {
        let mut out = Vec::new();
        for id in identities {
            for frame in frames.clone() {
                out.push((ObservationMeta::new(sequence, frame, id), self.feature(id, frame)?));
            }
        }
        Ok(out)
    }
}

/// Convenience wrapper over [`SyntheticWorld::feature`].
pub fn synth_feature(identity: u32, frame: u32, config: &SyntheticWorldConfig) -> Result<FeatureVector> {
    if identity as usize >= config.identities {
        return Err(Error::UnknownIdentity(identity));
    }
    SyntheticWorld::new(config.clone())?.feature(identity, frame)
}

fn gaussian_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// splitmix64 finalizer over the combined key.
pub(crate) fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F).rotate_left(17);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// ---------------------------------------------------------------------------
// Feature files
// ---------------------------------------------------------------------------

/// Formats a value with 9 significant digits.
pub(crate) fn fmt_sig9(v: f64) -> String {
    format!("{v:.8e}")
}

/// Reads a feature file: header `n=<dim>`, then `sequence,frame,id,v0,...` lines.
pub fn load_features(path: impl AsRef<Path>) -> Result<Vec<FeatureRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_features(&text, path)
}

pub(crate) fn parse_features(text: &str, path: &Path) -> Result<Vec<FeatureRecord>> {
    let mut lines = text.lines().enumerate();
    let dim = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((i, l)) => break parse_dim_header(l).ok_or_else(|| {
                Error::parse(path, i + 1, format!("expected header `n=<dim>`, found `{l}`"))
            })?,
            None => return Err(Error::parse(path, 1, "missing header `n=<dim>`")),
        }
    };

    let mut records = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 3 {
            return Err(Error::parse(path, lineno, "expected `sequence,frame,id,values...`"));
        }
        let frame = fields[1]
            .parse::<u32>()
            .map_err(|e| Error::parse(path, lineno, format!("bad frame `{}`: {e}", fields[1])))?;
        let identity = fields[2]
            .parse::<u32>()
            .map_err(|e| Error::parse(path, lineno, format!("bad id `{}`: {e}", fields[2])))?;
        let found = fields.len() - 3;
        if found != dim {
            return Err(Error::parse(
                path,
                lineno,
                format!("dimension mismatch: header n={dim}, line has {found} values"),
            ));
        }
        let mut values = Vec::with_capacity(dim);
        for raw in &fields[3..] {
            let v = raw
                .parse::<f64>()
                .map_err(|e| Error::parse(path, lineno, format!("bad value `{raw}`: {e}")))?;
            if !v.is_finite() {
                return Err(Error::parse(path, lineno, format!("non-finite value `{raw}`")));
            }
            values.push(v);
        }
        records.push((
            ObservationMeta::new(fields[0], frame, identity),
            FeatureVector(values),
        ));
    }
    Ok(records)
}

fn parse_dim_header(line: &str) -> Option<usize> {
    line.trim().strip_prefix("n=")?.trim().parse().ok()
}

/// Writes records in the feature-file format. `dim` is used for the header
/// when `records` is empty.
pub fn store_features(records: &[FeatureRecord], dim: usize, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dim = records.first().map_or(dim, |(_, f)| f.dim());
    for (meta, f) in records {
        if f.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: f.dim(),
            });
        }
        if meta.sequence.contains([',', '\n', '\r']) {
            return Err(Error::InvalidConfig(format!(
                "sequence tag `{}` contains a separator",
                meta.sequence
            )));
        }
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "n={dim}").map_err(io)?;
    for (meta, f) in records {
        write!(w, "{},{},{}", meta.sequence, meta.frame, meta.identity).map_err(io)?;
        for v in f.as_slice() {
            write!(w, ",{}", fmt_sig9(*v)).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn distance_basics() {
        assert_eq!(euclidean_distance(&fv(&[0.0, 0.0]), &fv(&[3.0, 4.0])).unwrap(), 5.0);
        let a = fv(&[1.5, -2.0, 7.0]);
        assert_eq!(euclidean_distance(&a, &a).unwrap(), 0.0);
        assert!(matches!(
            euclidean_distance(&fv(&[1.0]), &fv(&[1.0, 2.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn feature_vector_rejects_nan() {
        assert!(FeatureVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(FeatureVector::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn shape_plan_rejects_non_multiple_of_32() {
        assert!(vgg11_shape_plan(ShapeSpec::new(130, 64, 3)).is_err());
        assert!(vgg11_shape_plan(ShapeSpec::new(128, 48, 3)).is_err());
        assert!(vgg11_shape_plan(ShapeSpec::new(0, 64, 3)).is_err());
    }

    #[test]
    fn shape_plan_endpoints() {
        let plan = vgg11_shape_plan(ShapeSpec::new(128, 64, 3)).unwrap();
        assert_eq!(plan.len(), 16);
        assert_eq!(plan[0].output, ShapeSpec::new(128, 64, 64));
        assert_eq!(plan[15].name, "FC-8");
        assert_eq!(plan[15].output, ShapeSpec::new(1, 1, 1000));
    }

    #[test]
    fn synthetic_is_deterministic() {
        let cfg = SyntheticWorldConfig {
            dim: 32,
            ..Default::default()
        };
        let a = synth_feature(3, 17, &cfg).unwrap();
        let b = synth_feature(3, 17, &cfg).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, synth_feature(3, 18, &cfg).unwrap());
    }

    #[test]
    fn noiseless_centers_are_exactly_separated() {
        let cfg = SyntheticWorldConfig {
            identities: 4,
            separation: 2.5,
            noise: 0.0,
            drift: 0.0,
            dim: 16,
            seed: 9,
        };
        let w = SyntheticWorld::new(cfg).unwrap();
        let d = euclidean_distance(&w.feature(0, 5).unwrap(), &w.feature(1, 5).unwrap()).unwrap();
        assert!((d - 2.5).abs() < 1e-12, "{d}");
    }

    #[test]
    fn unknown_identity_is_rejected() {
        let cfg = SyntheticWorldConfig {
            identities: 2,
            dim: 8,
            ..Default::default()
        };
        assert!(matches!(synth_feature(2, 0, &cfg), Err(Error::UnknownIdentity(2))));
    }

    #[test]
    fn header_dimension_mismatch_reports_line() {
        let text = "n=4\ns,1,0,1,2,3,4\ns,2,0,1,2,3,4,5\n";
        match parse_features(text, Path::new("f.txt")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn three_line_file_gives_three_records() {
        let text = "n=2\na,1,7,0.5,1\na,2,7,0.25,1\nb,1,3,-1,2e-3\n";
        let recs = parse_features(text, Path::new("f.txt")).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[2].0, ObservationMeta::new("b", 1, 3));
        assert_eq!(recs[2].1.as_slice(), &[-1.0, 2e-3]);
    }

    #[test]
    fn non_finite_value_is_rejected() {
        let text = "n=2\na,1,7,0.5,inf\n";
        assert!(matches!(
            parse_features(text, Path::new("f.txt")),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
