//! The `msdoas` command line.
//!
//! Values resolve in three layers: built-in defaults, then the `--cfg` file,
//! then flags. Every output is written only after all inputs have loaded and
//! all computation has finished; each output gets a `.manifest` sidecar.
//!
//! Exit codes: 0 success, 1 usage or invalid parameter, 2 data error,
//! 3 numerical failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand};

use crate::config::Settings;
use crate::embedding::{load_features, store_features, FeatureRecord, FeatureVector, SyntheticWorld};
use crate::error::{Error, Result};
use crate::eval::{default_thresholds, emit_report, experiment_grid, roc_sweep, GridConfig, GridMetric, ReportFormat};
use crate::metrics::{load_gt, load_hyp, report_csv, score, SequenceInput};
use crate::model::{load_model, save_model, train, ModelConfig, MsDoasModel};
use crate::tracker::{load_detections, run_sequence, store_results, FeatureSource};
use crate::tracklet::{generate_set, load_tracklets, store_tracklets, FactoryConfig, TrackletKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "msdoas", version, about = "Multi-shot appearance similarity for online multi-object tracking")]
struct Cli {
    /// Sectioned configuration file.
    #[arg(long = "cfg", visible_alias = "config", global = true, value_name = "FILE")]
    cfg: Option<PathBuf>,
    /// Seed for every random stage (overrides the file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Progress messages on stderr; repeat for more.
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Feature pools.
    Features {
        #[command(subcommand)]
        mode: FeaturesMode,
    },
    /// Generate a labelled tracklet set from feature pools.
    Tracklets(TrackletArgs),
    /// Train a scorer on a tracklet set.
    Train(TrainArgs),
    /// ROC sweep of a model over a tracklet set.
    Eval(EvalArgs),
    /// Train on kinds I..V and evaluate every model on every kind.
    Grid(GridArgs),
    /// Track a detection sequence.
    Track(TrackArgs),
    /// Score tracker output against ground truth, or score one detection against a history.
    Score(ScoreArgs),
}

#[derive(Debug, Subcommand)]
enum FeaturesMode {
    /// Write a pool from the synthetic embedder.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, allow_negative_numbers = true)]
    identities: Option<i64>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    noise: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    drift: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    dim: Option<i64>,
    #[arg(long)]
    sequence: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    first_frame: Option<i64>,
    #[arg(long, allow_negative_numbers = true)]
    frames: Option<i64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Default)]
struct FactoryFlags {
    /// Tracklet kind, 1..5.
    #[arg(long, allow_negative_numbers = true)]
    kind: Option<i64>,
    /// Set size.
    #[arg(long = "M", allow_negative_numbers = true)]
    m: Option<i64>,
    /// Memory length.
    #[arg(long = "T", allow_negative_numbers = true)]
    t: Option<i64>,
    /// Maximum frame gap.
    #[arg(long = "F", allow_negative_numbers = true)]
    f: Option<i64>,
    /// Maximum number of gapped transitions.
    #[arg(long = "S", allow_negative_numbers = true)]
    s: Option<i64>,
    /// Maximum number of intruders.
    #[arg(long = "N", allow_negative_numbers = true)]
    n: Option<i64>,
}

#[derive(Debug, Args, Default)]
struct TrainFlags {
    /// Batch size.
    #[arg(long = "B", allow_negative_numbers = true)]
    b: Option<i64>,
    /// Iterations.
    #[arg(long = "IT", allow_negative_numbers = true)]
    it: Option<i64>,
    #[arg(long, allow_negative_numbers = true)]
    lr: Option<f64>,
    /// LSTM hidden size.
    #[arg(long = "H", allow_negative_numbers = true)]
    h: Option<i64>,
    /// Width of the head's hidden layer (0 for a single affine layer).
    #[arg(long, allow_negative_numbers = true)]
    head_hidden: Option<i64>,
}

#[derive(Debug, Args)]
struct TrackletArgs {
    #[command(flatten)]
    factory: FactoryFlags,
    /// Feature files forming the pool.
    #[arg(long, required = true, num_args = 1..)]
    pool: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    tracklets: PathBuf,
    #[command(flatten)]
    train: TrainFlags,
    #[arg(long)]
    out: PathBuf,
    /// Per-iteration loss as CSV.
    #[arg(long)]
    losses: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Test tracklet file.
    #[arg(long)]
    test: PathBuf,
    /// CSV report.
    #[arg(long)]
    out: PathBuf,
    /// ROC curve as SVG.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[arg(long, required = true, num_args = 1..)]
    pool: Vec<PathBuf>,
    #[command(flatten)]
    factory: FactoryFlags,
    #[command(flatten)]
    train: TrainFlags,
    /// Size of each test set.
    #[arg(long = "test-M", allow_negative_numbers = true)]
    test_m: Option<i64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrackArgs {
    #[arg(long)]
    det: PathBuf,
    /// Feature file, or `synthetic:<gt file>` to draw features from the configured world.
    #[arg(long)]
    features: String,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    /// Ground-truth file(s); pair with --hyp in order.
    #[arg(long, num_args = 1.., conflicts_with_all = ["model", "detection", "history"])]
    gt: Vec<PathBuf>,
    #[arg(long, num_args = 1..)]
    hyp: Vec<PathBuf>,
    /// Report CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, requires_all = ["detection", "history"])]
    model: Option<PathBuf>,
    /// Feature file whose first record is the detection.
    #[arg(long)]
    detection: Option<PathBuf>,
    /// Feature file with the agent history (ordered by frame, most recent used first).
    #[arg(long)]
    history: Option<PathBuf>,
}

/// Fully resolved invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: Task,
    pub settings: Settings,
    pub verbose: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureSpec {
    File(PathBuf),
    /// Features from the configured synthetic world, identities taken from this ground truth.
    SyntheticFromGt(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Task {
    Features { out: PathBuf },
    Tracklets { pool: Vec<PathBuf>, out: PathBuf },
    Train { tracklets: PathBuf, out: PathBuf, losses: Option<PathBuf> },
    Eval { model: PathBuf, test: PathBuf, out: PathBuf, svg: Option<PathBuf> },
    Grid { pool: Vec<PathBuf>, out: PathBuf },
    Track { det: PathBuf, features: FeatureSpec, model: PathBuf, out: PathBuf },
    Score { pairs: Vec<(PathBuf, PathBuf)>, out: Option<PathBuf> },
    Similarity { model: PathBuf, detection: PathBuf, history: PathBuf },
}

/// Parse failures: either clap's own (help, unknown flag, missing argument)
/// or a parameter that breaks a module constraint.
#[derive(Debug)]
pub enum ArgError {
    Clap(clap::Error),
    Invalid(Error),
}

impl ArgError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ArgError::Clap(e) if !e.use_stderr() => EXIT_OK,
            ArgError::Clap(_) => EXIT_USAGE,
            ArgError::Invalid(e) => exit_code(e),
        }
    }
}

impl std::fmt::Display for ArgError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ArgError::Clap(e) => write!(f, "{e}"),
            ArgError::Invalid(e) => write!(f, "{e}"),
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_) => EXIT_USAGE,
        e if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_DATA,
    }
}

fn at_least(name: &str, v: i64, min: i64) -> Result<i64> {
    if v < min {
        return Err(Error::InvalidConfig(format!("{name} ≥ {min} (got {v})")));
    }
    Ok(v)
}

fn set_usize(dst: &mut usize, v: Option<i64>, name: &str, min: i64) -> Result<()> {
    if let Some(v) = v {
        *dst = at_least(name, v, min)? as usize;
    }
    Ok(())
}

fn set_u32(dst: &mut u32, v: Option<i64>, name: &str, min: i64) -> Result<()> {
    if let Some(v) = v {
        *dst = u32::try_from(at_least(name, v, min)?)
            .map_err(|_| Error::InvalidConfig(format!("{name} out of range")))?;
    }
    Ok(())
}

impl FactoryFlags {
    fn apply(&self, f: &mut FactoryConfig) -> Result<()> {
        if let Some(k) = self.kind {
            f.kind = TrackletKind::from_index(u8::try_from(at_least("kind", k, 1)?).unwrap_or(u8::MAX))?;
        }
        set_usize(&mut f.set_size, self.m, "M", 1)?;
        set_usize(&mut f.memory, self.t, "T", 1)?;
        set_u32(&mut f.max_gap, self.f, "F", 1)?;
        set_usize(&mut f.max_steps, self.s, "S", 0)?;
        set_usize(&mut f.max_intruders, self.n, "N", 0)?;
        Ok(())
    }
}

impl TrainFlags {
    fn apply(&self, s: &mut Settings) -> Result<()> {
        set_usize(&mut s.train.batch_size, self.b, "B", 1)?;
        set_usize(&mut s.train.iterations, self.it, "IT", 0)?;
        if let Some(lr) = self.lr {
            s.train.learning_rate = lr;
        }
        set_usize(&mut s.model.hidden, self.h, "H", 1)?;
        set_usize(&mut s.model.head_hidden, self.head_hidden, "head_hidden", 0)?;
        s.train.validate()
    }
}

/// Parses a full argument vector (program name first).
pub fn parse_args<I, T>(argv: I) -> std::result::Result<RunConfig, ArgError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(ArgError::Clap)?;
    resolve(cli).map_err(ArgError::Invalid)
}

fn resolve(cli: Cli) -> Result<RunConfig> {
    let mut s = match &cli.cfg {
        Some(p) => Settings::from_file(p)?,
        None => Settings::default(),
    };
    if let Some(seed) = cli.seed {
        s.force_seed(seed);
    }
    s.resolve_seeds();

    let task = match cli.command {
        Command::Features {
            mode: FeaturesMode::Synth(a),
        } => {
            set_usize(&mut s.world.identities, a.identities, "identities", 1)?;
            set_usize(&mut s.world.dim, a.dim, "dim", 1)?;
            if let Some(v) = a.separation {
                s.world.separation = v;
            }
            if let Some(v) = a.noise {
                s.world.noise = v;
            }
            if let Some(v) = a.drift {
                s.world.drift = v;
            }
            if let Some(v) = a.sequence {
                if v.is_empty() || v.contains([',', '\n']) {
                    return Err(Error::InvalidConfig("sequence name must be non-empty without commas".into()));
                }
                s.pool.sequence = v;
            }
            set_u32(&mut s.pool.first_frame, a.first_frame, "first_frame", 0)?;
            set_u32(&mut s.pool.frames, a.frames, "frames", 1)?;
            s.world.validate()?;
            Task::Features { out: a.out }
        }
        Command::Tracklets(a) => {
            a.factory.apply(&mut s.factory)?;
            s.factory.validate()?;
            Task::Tracklets {
                pool: a.pool,
                out: a.out,
            }
        }
        Command::Train(a) => {
            a.train.apply(&mut s)?;
            Task::Train {
                tracklets: a.tracklets,
                out: a.out,
                losses: a.losses,
            }
        }
        Command::Eval(a) => Task::Eval {
            model: a.model,
            test: a.test,
            out: a.out,
            svg: a.svg,
        },
        Command::Grid(a) => {
            a.factory.apply(&mut s.factory)?;
            a.train.apply(&mut s)?;
            set_usize(&mut s.grid.test_size, a.test_m, "test_M", 1)?;
            s.validate_grid()?;
            for kind in TrackletKind::ALL {
                FactoryConfig { kind, ..s.factory.clone() }.validate()?;
            }
            Task::Grid {
                pool: a.pool,
                out: a.out,
            }
        }
        Command::Track(a) => {
            s.tracker.validate()?;
            let features = match a.features.strip_prefix("synthetic:") {
                Some(gt) if !gt.is_empty() => FeatureSpec::SyntheticFromGt(PathBuf::from(gt)),
                Some(_) => return Err(Error::InvalidConfig("`synthetic:` needs a ground-truth path".into())),
                None => FeatureSpec::File(PathBuf::from(a.features)),
            };
            Task::Track {
                det: a.det,
                features,
                model: a.model,
                out: a.out,
            }
        }
        Command::Score(a) => match (a.model, a.detection, a.history) {
            (Some(model), Some(detection), Some(history)) => Task::Similarity {
                model,
                detection,
                history,
            },
            (None, None, None) => {
                if a.gt.is_empty() || a.gt.len() != a.hyp.len() {
                    return Err(Error::InvalidConfig(
                        "score needs --gt and --hyp with the same number of files (or --model, --detection, --history)".into(),
                    ));
                }
                s.metrics.validate()?;
                Task::Score {
                    pairs: a.gt.into_iter().zip(a.hyp).collect(),
                    out: a.out,
                }
            }
            _ => {
                return Err(Error::InvalidConfig(
                    "--model, --detection and --history go together".into(),
                ))
            }
        },
    };
    Ok(RunConfig {
        task,
        settings: s,
        verbose: cli.verbose,
    })
}

/// Output files written to temporary siblings, renamed into place together.
struct Staging {
    items: Vec<(PathBuf, PathBuf)>,
}

impl Staging {
    fn new() -> Self {
        Staging { items: Vec::new() }
    }

    fn stage(&mut self, dest: &Path) -> PathBuf {
        let mut name = dest.file_name().map(OsString::from).unwrap_or_default();
        name.push(".partial");
        let tmp = dest.with_file_name(name);
        self.items.push((tmp.clone(), dest.to_path_buf()));
        tmp
    }

    fn write(&mut self, dest: &Path, body: &str) -> Result<()> {
        let tmp = self.stage(dest);
        fs::write(&tmp, body).map_err(|e| Error::io(&tmp, e))
    }

    fn commit(mut self) -> Result<Vec<PathBuf>> {
        let items = std::mem::take(&mut self.items);
        let mut done = Vec::new();
        for (tmp, dest) in &items {
            fs::rename(tmp, dest).map_err(|e| Error::io(dest, e))?;
            done.push(dest.clone());
        }
        Ok(done)
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        for (tmp, _) in &self.items {
            let _ = fs::remove_file(tmp);
        }
    }
}

fn manifest(command: &str, settings: &Settings, inputs: &[&Path], outputs: &[&Path]) -> String {
    let mut m = String::new();
    let _ = writeln!(m, "command: {command}");
    let _ = writeln!(m, "version: msdoas {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(m, "seed: {}", settings.seeds.global.unwrap_or(0));
    for p in inputs {
        let _ = writeln!(m, "input: {}", p.display());
    }
    for p in outputs {
        let _ = writeln!(m, "output: {}", p.display());
    }
    m.push_str("settings:\n");
    for line in settings.describe().lines() {
        let _ = writeln!(m, "  {line}");
    }
    m
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(OsString::from).unwrap_or_default();
    name.push(".manifest");
    out.with_file_name(name)
}

fn load_pool(paths: &[PathBuf]) -> Result<Vec<FeatureRecord>> {
    let mut pool = Vec::new();
    for p in paths {
        pool.extend(load_features(p)?);
    }
    if let Some(dim) = pool.first().map(|r| r.1.dim()) {
        if let Some(r) = pool.iter().find(|r| r.1.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: r.1.dim(),
            });
        }
    }
    Ok(pool)
}

fn note(cfg: &RunConfig, msg: impl FnOnce() -> String) {
    if cfg.verbose > 0 {
        eprintln!("msdoas: {}", msg());
    }
}

/// Executes a resolved invocation; returns the files written.
pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let s = &cfg.settings;
    let mut st = Staging::new();
    match &cfg.task {
        Task::Features { out } => {
            let world = SyntheticWorld::new(s.world.clone())?;
            let frames = s.pool.first_frame..s.pool.first_frame.saturating_add(s.pool.frames);
            let records = world.pool(&s.pool.sequence, 0..s.world.identities as u32, frames)?;
            note(cfg, || format!("{} feature records", records.len()));
            let tmp = st.stage(out);
            store_features(&records, s.world.dim, &tmp)?;
            st.write(&manifest_path(out), &manifest("features synth", s, &[], &[out]))?;
        }
        Task::Tracklets { pool, out } => {
            let records = load_pool(pool)?;
            let set = generate_set(&s.factory, &records)?;
            note(cfg, || format!("{} tracklets of kind {}", set.len(), s.factory.kind));
            let dim = records.first().map_or(0, |r| r.1.dim());
            let tmp = st.stage(out);
            store_tracklets(&set, s.factory.memory, dim, &tmp)?;
            let inputs: Vec<&Path> = pool.iter().map(PathBuf::as_path).collect();
            st.write(&manifest_path(out), &manifest("tracklets", s, &inputs, &[out]))?;
        }
        Task::Train { tracklets, out, losses } => {
            let (memory, dim, set) = load_tracklets(tracklets)?;
            let mc = ModelConfig {
                feature_dim: dim,
                hidden: s.model.hidden,
                memory,
                head_hidden: s.model.head_hidden,
            };
            let init = MsDoasModel::init(mc, s.train.seed, s.train.init_scale)?;
            let outcome = train(init, &set, &s.train)?;
            note(cfg, || {
                format!(
                    "trained {} iterations, final loss {:.6}",
                    outcome.losses.len(),
                    outcome.losses.last().copied().unwrap_or(f64::NAN)
                )
            });
            let tmp = st.stage(out);
            save_model(&outcome.model, &tmp)?;
            let mut outputs = vec![out.as_path()];
            if let Some(lp) = losses {
                let mut body = String::from("iteration,loss\n");
                for (i, l) in outcome.losses.iter().enumerate() {
                    let _ = writeln!(body, "{},{l:e}", i + 1);
                }
                st.write(lp, &body)?;
                outputs.push(lp);
            }
            st.write(&manifest_path(out), &manifest("train", s, &[tracklets], &outputs))?;
        }
        Task::Eval { model, test, out, svg } => {
            let m = load_model(model)?;
            let (_, _, set) = load_tracklets(test)?;
            let report = roc_sweep(&m, &set, &default_thresholds())?;
            note(cfg, || {
                format!(
                    "best F1 {:.4} at th={:.2}, best accuracy {:.4} at th={:.2}",
                    report.best_f1.f1,
                    report.best_f1.threshold,
                    report.best_accuracy.accuracy,
                    report.best_accuracy.threshold
                )
            });
            let tmp = st.stage(out);
            emit_report(&report, &tmp, ReportFormat::Csv)?;
            let mut outputs = vec![out.as_path()];
            if let Some(svg) = svg {
                let tmp = st.stage(svg);
                emit_report(&report, &tmp, ReportFormat::Svg)?;
                outputs.push(svg);
            }
            st.write(&manifest_path(out), &manifest("eval", s, &[model, test], &outputs))?;
        }
        Task::Grid { pool, out } => {
            let records = load_pool(pool)?;
            let (train_pool, test_pool) = split_by_frame(&records, s.grid.train_fraction)?;
            let mut train_sets = Vec::new();
            let mut test_sets = Vec::new();
            for (k, kind) in TrackletKind::ALL.into_iter().enumerate() {
                let base = FactoryConfig { kind, ..s.factory.clone() };
                train_sets.push(generate_set(
                    &FactoryConfig {
                        seed: crate::embedding::mix_seed(s.factory.seed, k as u64, 1),
                        ..base.clone()
                    },
                    &train_pool,
                )?);
                test_sets.push(generate_set(
                    &FactoryConfig {
                        set_size: s.grid.test_size,
                        seed: crate::embedding::mix_seed(s.factory.seed, k as u64, 2),
                        ..base
                    },
                    &test_pool,
                )?);
                note(cfg, || format!("generated TR{0}/TS{0}", k + 1));
            }
            let grid_cfg = GridConfig {
                model: ModelConfig {
                    feature_dim: records[0].1.dim(),
                    hidden: s.model.hidden,
                    memory: s.factory.memory,
                    head_hidden: s.model.head_hidden,
                },
                train: s.train.clone(),
                thresholds: default_thresholds(),
            };
            let report = experiment_grid(&train_sets, &test_sets, &grid_cfg)?;
            fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
            let f1 = out.join("f1.csv");
            let acc = out.join("accuracy.csv");
            st.write(&f1, &report.table_csv(GridMetric::F1))?;
            st.write(&acc, &report.table_csv(GridMetric::Accuracy))?;
            let mut outputs = vec![f1.clone(), acc.clone()];
            for (i, row) in report.cells.iter().enumerate() {
                for (j, cell) in row.iter().enumerate() {
                    let p = out.join(format!("exp{}_ts{}.csv", i + 1, j + 1));
                    st.write(&p, &crate::eval::report_csv(cell))?;
                    outputs.push(p);
                }
            }
            let inputs: Vec<&Path> = pool.iter().map(PathBuf::as_path).collect();
            let outs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
            st.write(&out.join("manifest.txt"), &manifest("grid", s, &inputs, &outs))?;
        }
        Task::Track { det, features, model, out } => {
            let m = load_model(model)?;
            let dets = load_detections(det)?;
            if dets.skipped > 0 {
                eprintln!("msdoas: warning: skipped {} malformed detection rows in {}", dets.skipped, det.display());
            }
            let (source, feature_input) = match features {
                FeatureSpec::File(p) => (FeatureSource::Records(load_features(p)?), p.as_path()),
                FeatureSpec::SyntheticFromGt(gt) => {
                    let world = SyntheticWorld::new(s.world.clone())?;
                    m.expect_feature_dim(world.dim())?;
                    (
                        FeatureSource::Synthetic {
                            world,
                            gt: load_gt(gt)?,
                        },
                        gt.as_path(),
                    )
                }
            };
            let detections = source.attach(&dets.rows)?;
            let tc = crate::tracker::TrackerConfig {
                memory: m.config.memory,
                ..s.tracker.clone()
            };
            let rows = run_sequence(&detections, &m, &tc)?;
            note(cfg, || format!("{} result rows", rows.len()));
            let tmp = st.stage(out);
            store_results(&rows, &tmp)?;
            st.write(&manifest_path(out), &manifest("track", s, &[det, feature_input, model], &[out]))?;
        }
        Task::Score { pairs, out } => {
            let mut seqs = Vec::new();
            for (gt, hyp) in pairs {
                seqs.push(SequenceInput {
                    name: sequence_name(hyp),
                    gt: load_gt(gt)?,
                    hyp: load_hyp(hyp)?,
                });
            }
            let report = score(&seqs, &s.metrics)?;
            let body = report_csv(&report);
            match out {
                Some(out) => {
                    st.write(out, &body)?;
                    let inputs: Vec<&Path> = pairs.iter().flat_map(|(g, h)| [g.as_path(), h.as_path()]).collect();
                    st.write(&manifest_path(out), &manifest("score", s, &inputs, &[out]))?;
                }
                None => print!("{body}"),
            }
        }
        Task::Similarity { model, detection, history } => {
            let m = load_model(model)?;
            let det = load_features(detection)?
                .into_iter()
                .next()
                .ok_or(Error::Empty("detection feature file"))?
                .1;
            let mut hist = load_features(history)?;
            hist.sort_by_key(|r| std::cmp::Reverse(r.0.frame));
            hist.truncate(m.config.memory);
            let refs: Vec<&FeatureVector> = hist.iter().map(|r| &r.1).collect();
            println!("{:.9}", m.msdoas(&det, &refs)?);
        }
    }
    st.commit()
}

/// Sequence label for a hypothesis file: the file stem.
fn sequence_name(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sequence".into())
}

/// Splits a pool at the frame below which `fraction` of its distinct frames lie.
fn split_by_frame(records: &[FeatureRecord], fraction: f64) -> Result<(Vec<FeatureRecord>, Vec<FeatureRecord>)> {
    let mut frames: Vec<u32> = records.iter().map(|r| r.0.frame).collect();
    frames.sort_unstable();
    frames.dedup();
    if frames.len() < 2 {
        return Err(Error::InsufficientPool("grid needs at least two distinct frames".into()));
    }
    let k = ((frames.len() as f64 * fraction).floor() as usize).clamp(1, frames.len() - 1);
    let cut = frames[k];
    Ok(records.iter().cloned().partition(|r| r.0.frame < cut))
}

/// Parses and runs; returns the process exit code.
pub fn run_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match parse_args(argv) {
        Ok(c) => c,
        Err(ArgError::Clap(e)) => {
            let _ = e.print();
            return ArgError::Clap(e).exit_code();
        }
        Err(e) => {
            eprintln!("msdoas: error: {e}");
            return e.exit_code();
        }
    };
    match run(&cfg) {
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("msdoas: error: {e}");
            exit_code(&e)
        }
    }
}

pub fn main() -> i32 {
    run_args(std::env::args_os())
}
