//! Binary-classifier evaluation of a trained scorer over tracklet test sets.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::embedding::{euclidean_distance, mix_seed};
use crate::error::{Error, Result};
use crate::model::{train, ModelConfig, MsDoasModel, TrainConfig};
use crate::tracklet::{FeatureTracklet, TrackletKind};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// Tallies predictions (`score >= th` means positive) against labels.
pub fn confusion(scores: &[f64], labels: &[u8], th: f64) -> Result<ConfusionCounts> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= th, y == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub tpr: f64,
    pub fpr: f64,
    pub ppv: f64,
    pub f1: f64,
    pub accuracy: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// TPR, FPR, PPV, F1 and accuracy; any zero denominator yields 0.
pub fn rates(c: &ConfusionCounts) -> Rates {
    let tpr = ratio(c.tp, c.tp + c.fn_);
    let ppv = ratio(c.tp, c.tp + c.fp);
    let f1 = if ppv + tpr > 0.0 {
        2.0 * ppv * tpr / (ppv + tpr)
    } else {
        0.0
    };
    Rates {
        tpr,
        fpr: ratio(c.fp, c.fp + c.tn),
        ppv,
        f1,
        accuracy: ratio(c.tp + c.tn, c.total()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub ppv: f64,
    pub f1: f64,
    pub accuracy: f64,
}

impl RocPoint {
    fn new(threshold: f64, r: Rates) -> Self {
        RocPoint {
            threshold,
            tpr: r.tpr,
            fpr: r.fpr,
            ppv: r.ppv,
            f1: r.f1,
            accuracy: r.accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub points: Vec<RocPoint>,
    pub best_f1: RocPoint,
    pub best_accuracy: RocPoint,
    pub samples: usize,
    pub kind: Option<TrackletKind>,
}

/// `0.00, 0.05, ..., 1.00`
pub fn default_thresholds() -> Vec<f64> {
    (0..=20).map(|i| f64::from(i) / 20.0).collect()
}

/// ROC sweep over precomputed scores. Best points prefer the smaller threshold on ties.
pub fn roc_from_scores(scores: &[f64], labels: &[u8], thresholds: &[f64]) -> Result<EvalReport> {
    if scores.is_empty() {
        return Err(Error::Empty("test set"));
    }
    if thresholds.is_empty() {
        return Err(Error::Empty("threshold grid"));
    }
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("thresholds must be strictly increasing".into()));
    }
    let mut points = Vec::with_capacity(thresholds.len());
    for &th in thresholds {
        points.push(RocPoint::new(th, rates(&confusion(scores, labels, th)?)));
    }
    let best_by = |key: fn(&RocPoint) -> f64| {
        let mut best = points[0];
        for p in &points[1..] {
            if key(p) > key(&best) {
                best = *p;
            }
        }
        best
    };
    Ok(EvalReport {
        best_f1: best_by(|p| p.f1),
        best_accuracy: best_by(|p| p.accuracy),
        points,
        samples: scores.len(),
        kind: None,
    })
}

/// Scores every tracklet of the set with the model (`NZ1`).
pub fn score_set(model: &MsDoasModel, set: &[FeatureTracklet]) -> Result<Vec<f64>> {
    set.par_iter().map(|t| model.tracklet_score(t)).collect()
}

pub fn roc_sweep(model: &MsDoasModel, set: &[FeatureTracklet], thresholds: &[f64]) -> Result<EvalReport> {
    let scores = score_set(model, set)?;
    let labels: Vec<u8> = set.iter().map(|t| t.label).collect();
    roc_from_scores(&scores, &labels, thresholds)
}

/// Single-shot baseline: compares the detection with the most recent history
/// feature only, mapping the Euclidean distance `d` to `exp(-d / scale)`.
pub fn euclidean_baseline_scores(set: &[FeatureTracklet], scale: f64) -> Result<Vec<f64>> {
    set.iter()
        .map(|t| {
            let h = t.history().first().ok_or(Error::Empty("tracklet history"))?;
            let d = euclidean_distance(&t.detection().feature, &h.feature)?;
            Ok((-d / scale).exp())
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Experiment grid
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub thresholds: Vec<f64>,
}

/// `cells[i][j]`: model trained on set `i`, evaluated on test set `j`.
#[derive(Debug, Clone)]
pub struct GridReport {
    pub cells: Vec<Vec<EvalReport>>,
    pub models: Vec<MsDoasModel>,
}

/// Trains one model per training set and evaluates each on every test set.
///
/// Model `i` uses a seed derived from `cfg.train.seed` and `i`.
pub fn experiment_grid(
    train_sets: &[Vec<FeatureTracklet>],
    test_sets: &[Vec<FeatureTracklet>],
    cfg: &GridConfig,
) -> Result<GridReport> {
    let models = train_sets
        .par_iter()
        .enumerate()
        .map(|(i, set)| {
            let seed = mix_seed(cfg.train.seed, i as u64, 0);
            let init = MsDoasModel::init(cfg.model, seed, cfg.train.init_scale)?;
            let tc = TrainConfig {
                seed,
                ..cfg.train.clone()
            };
            Ok(train(init, set, &tc)?.model)
        })
        .collect::<Result<Vec<_>>>()?;

    let cells = models
        .iter()
        .map(|m| {
            test_sets
                .iter()
                .enumerate()
                .map(|(j, ts)| {
                    let mut r = roc_sweep(m, ts, &cfg.thresholds)?;
                    r.kind = TrackletKind::ALL.get(j).copied();
                    Ok(r)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GridReport { cells, models })
}

impl GridReport {
    /// One row per trained model, one `value (th)` column per test set.
    pub fn table_csv(&self, metric: GridMetric) -> String {
        let mut out = String::from("experiment");
        for j in 0..self.cells.first().map_or(0, Vec::len) {
            let _ = write!(out, ",TS{},th", j + 1);
        }
        out.push('\n');
        for (i, row) in self.cells.iter().enumerate() {
            let _ = write!(out, "Exp{}", i + 1);
            for r in row {
                let p = match metric {
                    GridMetric::F1 => (r.best_f1.f1, r.best_f1.threshold),
                    GridMetric::Accuracy => (r.best_accuracy.accuracy, r.best_accuracy.threshold),
                };
                let _ = write!(out, ",{:.2},{:.2}", 100.0 * p.0, p.1);
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridMetric {
    F1,
    Accuracy,
}

// ---------------------------------------------------------------------------
// Report files
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Svg,
}

pub fn report_csv(report: &EvalReport) -> String {
    let mut out = String::from("th,TPR,FPR,PPV,F1,A\n");
    for p in &report.points {
        let _ = writeln!(
            out,
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            p.threshold, p.tpr, p.fpr, p.ppv, p.f1, p.accuracy
        );
    }
    out
}

/// Parses the CSV written by [`report_csv`] back into ROC points.
pub fn parse_report_csv(text: &str) -> Result<Vec<RocPoint>> {
    let path = Path::new("<report>");
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "th,TPR,FPR,PPV,F1,A")) => {}
        _ => return Err(Error::parse(path, 1, "expected header `th,TPR,FPR,PPV,F1,A`")),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let v = l
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
            if v.len() != 6 {
                return Err(Error::parse(path, i + 1, "expected 6 columns"));
            }
            Ok(RocPoint {
                threshold: v[0],
                tpr: v[1],
                fpr: v[2],
                ppv: v[3],
                f1: v[4],
                accuracy: v[5],
            })
        })
        .collect()
}

/// Self-contained SVG of the ROC polyline (FPR on x, TPR on y).
pub fn report_svg(report: &EvalReport) -> String {
    const SIZE: f64 = 400.0;
    const MARGIN: f64 = 50.0;
    let x = |v: f64| MARGIN + v * SIZE;
    let y = |v: f64| MARGIN + (1.0 - v) * SIZE;

    let mut pts: Vec<(f64, f64)> = report.points.iter().map(|p| (p.fpr, p.tpr)).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let poly = pts
        .iter()
        .map(|&(f, t)| format!("{:.2},{:.2}", x(f), y(t)))
        .collect::<Vec<_>>()
        .join(" ");

    let total = SIZE + 2.0 * MARGIN;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}">"#
    );
    let _ = writeln!(s, r#"  <rect x="0" y="0" width="{total}" height="{total}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"  <line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        x(0.0), y(0.0), x(1.0), y(0.0)
    );
    let _ = writeln!(
        s,
        r#"  <line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        x(0.0), y(0.0), x(0.0), y(1.0)
    );
    let _ = writeln!(
        s,
        r#"  <line x1="{}" y1="{}" x2="{}" y2="{}" stroke="gray" stroke-dasharray="4 4"/>"#,
        x(0.0), y(0.0), x(1.0), y(1.0)
    );
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(
            s,
            r#"  <text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{tick}</text>"#,
            x(tick),
            y(0.0) + 18.0
        );
        let _ = writeln!(
            s,
            r#"  <text x="{:.1}" y="{:.1}" font-size="12" text-anchor="end">{tick}</text>"#,
            x(0.0) - 6.0,
            y(tick) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"  <text x="{:.1}" y="{:.1}" font-size="14" text-anchor="middle">FPR</text>"#,
        x(0.5),
        total - 8.0
    );
    let _ = writeln!(
        s,
        r#"  <text x="14" y="{:.1}" font-size="14" text-anchor="middle" transform="rotate(-90 14 {:.1})">TPR</text>"#,
        y(0.5),
        y(0.5)
    );
    let _ = writeln!(
        s,
        r#"  <polyline points="{poly}" fill="none" stroke="steelblue" stroke-width="2"/>"#
    );
    s.push_str("</svg>\n");
    s
}

pub fn emit_report(report: &EvalReport, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    let path = path.as_ref();
    let body = match format {
        ReportFormat::Csv => report_csv(report),
        ReportFormat::Svg => report_svg(report),
    };
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_example() {
        let c = confusion(&[0.9, 0.1], &[1, 0], 0.5).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 1, tn: 1, fp: 0, fn_: 0 });
        assert!(confusion(&[0.9], &[1, 0], 0.5).is_err());
    }

    #[test]
    fn zero_threshold_predicts_everything_positive() {
        let c = confusion(&[0.0, 0.3, 1.0, 0.7], &[1, 0, 0, 1], 0.0).unwrap();
        let r = rates(&c);
        assert_eq!((r.tpr, r.fpr), (1.0, 1.0));
    }

    #[test]
    fn rate_examples() {
        let r = rates(&ConfusionCounts { tp: 1, tn: 0, fp: 0, fn_: 1 });
        assert_eq!(r.tpr, 0.5);
        let r = rates(&ConfusionCounts { tp: 3, tn: 0, fp: 1, fn_: 1 });
        assert_eq!((r.ppv, r.tpr), (0.75, 0.75));
        assert!((r.f1 - 0.75).abs() < 1e-15);
        let r = rates(&ConfusionCounts { tp: 50, tn: 50, fp: 0, fn_: 0 });
        assert_eq!(r.accuracy, 1.0);
        let r = rates(&ConfusionCounts::default());
        assert_eq!((r.tpr, r.fpr, r.ppv, r.f1, r.accuracy), (0.0, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn separated_scores_reach_perfect_point() {
        let r = roc_from_scores(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0], &default_thresholds()).unwrap();
        assert_eq!(r.best_f1.f1, 1.0);
        assert_eq!(r.best_accuracy.accuracy, 1.0);
        // tie between 0.25..0.8 resolved to the smallest threshold
        assert_eq!(r.best_accuracy.threshold, 0.25);
    }

    #[test]
    fn inverted_scores_best_at_endpoint() {
        // 3 positives scored 0, 1 negative scored 1: best A is the class majority
        let r = roc_from_scores(&[0.0, 0.0, 0.0, 1.0], &[1, 1, 1, 0], &default_thresholds()).unwrap();
        assert_eq!(r.best_accuracy.accuracy, 0.75);
        assert_eq!(r.best_accuracy.threshold, 0.0);
    }

    #[test]
    fn sweep_rejects_bad_grids() {
        assert!(roc_from_scores(&[], &[], &default_thresholds()).is_err());
        assert!(roc_from_scores(&[0.5], &[1], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn csv_has_header_plus_rows_and_parses_back() {
        let r = roc_from_scores(&[0.9, 0.2, 0.6], &[1, 0, 1], &[0.1, 0.5, 0.7]).unwrap();
        let csv = report_csv(&r);
        assert_eq!(csv.lines().count(), 4);
        let back = parse_report_csv(&csv).unwrap();
        for (a, b) in back.iter().zip(&r.points) {
            assert!((a.threshold - b.threshold).abs() < 1e-6);
            assert!((a.tpr - b.tpr).abs() < 1e-6);
            assert!((a.fpr - b.fpr).abs() < 1e-6);
            assert!((a.ppv - b.ppv).abs() < 1e-6);
            assert!((a.f1 - b.f1).abs() < 1e-6);
            assert!((a.accuracy - b.accuracy).abs() < 1e-6);
        }
    }
}
