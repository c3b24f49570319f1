//! MOTChallenge detection and submission files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{iou, BBox, Detection, ResultRow};
use crate::embedding::{FeatureRecord, SyntheticWorld};
use crate::error::{Error, Result};
use crate::metrics::GtEntry;

/// A detection row before a feature is attached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawDetection {
    pub frame: u32,
    pub bbox: BBox,
    pub confidence: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionFile {
    /// Valid rows in file order.
    pub rows: Vec<RawDetection>,
    /// Malformed rows that were skipped.
    pub skipped: usize,
}

/// Parses `frame,id,left,top,width,height,conf[,x,y,z]`; malformed rows are
/// counted and skipped.
pub fn parse_detections(text: &str) -> DetectionFile {
    let mut out = DetectionFile::default();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match parse_detection_line(line) {
            Some(d) => out.rows.push(d),
            None => out.skipped += 1,
        }
    }
    out
}

fn parse_detection_line(line: &str) -> Option<RawDetection> {
    let f: Vec<&str> = line.split(',').map(str::trim).collect();
    if f.len() < 7 {
        return None;
    }
    let frame: u32 = f[0].parse().ok().filter(|&v| v >= 1)?;
    let num = |i: usize| f[i].parse::<f64>().ok().filter(|v| v.is_finite());
    let bbox = BBox::new(num(2)?, num(3)?, num(4)?, num(5)?);
    if !bbox.is_valid() {
        return None;
    }
    Some(RawDetection {
        frame,
        bbox,
        confidence: num(6)?,
    })
}

pub fn load_detections(path: impl AsRef<Path>) -> Result<DetectionFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_detections(&text))
}

/// Where detection features come from.
#[derive(Debug, Clone)]
pub enum FeatureSource {
    /// Feature records; the k-th detection of frame f takes the k-th record of frame f.
    Records(Vec<FeatureRecord>),
    /// Features drawn from a synthetic world. Each detection takes the identity
    /// of the ground-truth box it overlaps most (IoU ≥ 0.5); ground-truth id `g`
    /// maps to world identity `(g - 1) mod identities`. Others get clutter.
    Synthetic {
        world: SyntheticWorld,
        gt: Vec<GtEntry>,
    },
}

impl FeatureSource {
    pub fn attach(&self, rows: &[RawDetection]) -> Result<Vec<Detection>> {
        match self {
            FeatureSource::Records(records) => {
                let mut by_frame: BTreeMap<u32, Vec<&FeatureRecord>> = BTreeMap::new();
                for r in records {
                    by_frame.entry(r.0.frame).or_default().push(r);
                }
                let mut seen: BTreeMap<u32, usize> = BTreeMap::new();
                rows.iter()
                    .map(|d| {
                        let k = seen.entry(d.frame).or_insert(0);
                        let rec = by_frame
                            .get(&d.frame)
                            .and_then(|v| v.get(*k))
                            .ok_or_else(|| {
                                Error::LengthMismatch(format!(
                                    "no feature for detection {} of frame {}",
                                    *k + 1,
                                    d.frame
                                ))
                            })?;
                        *k += 1;
                        Ok(with_feature(d, rec.1.clone()))
                    })
                    .collect()
            }
            FeatureSource::Synthetic { world, gt } => {
                let mut by_frame: BTreeMap<u32, Vec<&GtEntry>> = BTreeMap::new();
                for g in gt {
                    by_frame.entry(g.frame).or_default().push(g);
                }
                let n = world.identities() as u32;
                rows.iter()
                    .enumerate()
                    .map(|(line, d)| {
                        let best = by_frame.get(&d.frame).and_then(|v| {
                            v.iter()
                                .map(|g| (iou(&g.bbox, &d.bbox), g.id))
                                .filter(|&(o, _)| o >= 0.5)
                                .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)))
                        });
                        let feature = match best {
                            Some((_, id)) => world.feature((id.max(1) - 1) % n, d.frame)?,
                            None => world.clutter(line as u64),
                        };
                        Ok(with_feature(d, feature))
                    })
                    .collect()
            }
        }
    }
}

fn with_feature(d: &RawDetection, feature: crate::embedding::FeatureVector) -> Detection {
    Detection {
        frame: d.frame,
        bbox: d.bbox,
        confidence: d.confidence,
        feature,
    }
}

/// Submission rows: `frame,id,left,top,width,height,conf,-1,-1,-1`.
pub fn format_results(rows: &[ResultRow]) -> String {
    let mut s = String::new();
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:.3},{:.3},{:.3},{:.3},{:.4},-1,-1,-1",
            r.frame, r.id, r.bbox.left, r.bbox.top, r.bbox.width, r.bbox.height, r.confidence
        );
    }
    s
}

pub fn store_results(rows: &[ResultRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_results(rows)).map_err(|e| Error::io(path, e))
}

/// Strict parser for submission files; errors carry the line number.
pub fn parse_results(text: &str, path: &Path) -> Result<Vec<ResultRow>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() < 6 {
            return Err(Error::parse(path, i + 1, "expected at least 6 fields"));
        }
        let int = |k: usize| {
            f[k].parse::<f64>()
                .ok()
                .filter(|v| v.fract() == 0.0 && *v >= 1.0 && *v <= u32::MAX as f64)
                .map(|v| v as u32)
                .ok_or_else(|| Error::parse(path, i + 1, format!("field {} is not a positive integer", k + 1)))
        };
        let num = |k: usize| {
            f[k].parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(path, i + 1, format!("field {} is not a number", k + 1)))
        };
        let bbox = BBox::new(num(2)?, num(3)?, num(4)?, num(5)?);
        if !bbox.is_valid() {
            return Err(Error::parse(path, i + 1, "box width and height must be positive"));
        }
        out.push(ResultRow {
            frame: int(0)?,
            id: int(1)?,
            bbox,
            confidence: if f.len() > 6 { num(6)? } else { 1.0 },
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn malformed_detection_rows_are_counted() {
        let text = "1,-1,10,20,30,40,0.9,-1,-1,-1\nbad\n2,-1,1,1,0,5,0.9\n2,-1,1,1,4,5,0.8\n";
        let f = parse_detections(text);
        assert_eq!(f.rows.len(), 2);
        assert_eq!(f.skipped, 2);
        assert_eq!(f.rows[0].bbox, BBox::new(10.0, 20.0, 30.0, 40.0));
    }

    #[test]
    fn results_round_trip() {
        let rows = vec![ResultRow {
            frame: 3,
            id: 7,
            bbox: BBox::new(1.5, 2.0, 10.0, 20.0),
            confidence: 0.75,
        }];
        let back = parse_results(&format_results(&rows), Path::new("x")).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn result_parse_errors_name_the_line() {
        let err = parse_results("1,1,0,0,1,1\n1,x,0,0,1,1\n", Path::new("h.txt")).unwrap_err();
        assert!(err.to_string().contains("h.txt:2"), "{err}");
    }
}
