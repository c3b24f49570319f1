//! Online tracking-by-detection.
//!
//! Each frame, confirmed and lost tracks are associated with detections first;
//! tentative tracks get a second pass over whatever detections remain. The
//! association cost blends appearance (`1 - msdoas`) with motion (`1 - IoU` to
//! a constant-velocity prediction).

mod assignment;
mod bbox;
pub mod io;

use std::collections::VecDeque;

use rayon::prelude::*;

pub use assignment::{solve_assignment, AssignmentResult, CostMatrix};
pub use bbox::{iou, BBox};
pub use io::{
    format_results, load_detections, parse_detections, parse_results, store_results, DetectionFile, FeatureSource,
    RawDetection,
};

use crate::embedding::FeatureVector;
use crate::error::{Error, Result};
use crate::model::MsDoasModel;

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame: u32,
    pub bbox: BBox,
    pub confidence: f64,
    pub feature: FeatureVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Tentative,
    Active,
    Lost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u32,
    /// `(feature, frame)`, most recent first, at most `T` entries.
    pub history: VecDeque<(FeatureVector, u32)>,
    pub bbox: BBox,
    /// Pixels per frame.
    pub velocity: (f64, f64),
    pub status: TrackStatus,
    pub missed: u32,
    pub hits: u32,
}

impl Track {
    fn spawn(id: u32, det: &Detection) -> Self {
        Track {
            id,
            history: VecDeque::from([(det.feature.clone(), det.frame)]),
            bbox: det.bbox,
            velocity: (0.0, 0.0),
            status: TrackStatus::Tentative,
            missed: 0,
            hits: 1,
        }
    }

    pub fn last_frame(&self) -> u32 {
        self.history.front().map_or(0, |h| h.1)
    }

    pub fn history_features(&self) -> Vec<&FeatureVector> {
        self.history.iter().map(|(f, _)| f).collect()
    }

    fn observe(&mut self, det: &Detection, memory: usize) {
        let gap = det.frame.saturating_sub(self.last_frame()).max(1) as f64;
        self.velocity = (
            (det.bbox.left - self.bbox.left) / gap,
            (det.bbox.top - self.bbox.top) / gap,
        );
        self.bbox = det.bbox;
        self.history.push_front((det.feature.clone(), det.frame));
        self.history.truncate(memory);
        self.missed = 0;
        self.hits += 1;
    }
}

/// Last box shifted by velocity times the frame gap.
pub fn predict_bbox(track: &Track, frame: u32) -> BBox {
    let gap = f64::from(frame) - f64::from(track.last_frame());
    track
        .bbox
        .translated(track.velocity.0 * gap, track.velocity.1 * gap)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub memory: usize,
    /// Weight λ of the appearance term.
    pub appearance_weight: f64,
    pub assoc_threshold: f64,
    pub iou_gate: f64,
    pub max_age: u32,
    pub confirm_hits: u32,
    pub min_confidence: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            memory: 5,
            appearance_weight: 0.7,
            assoc_threshold: 0.5,
            iou_gate: 0.1,
            max_age: 30,
            confirm_hits: 3,
            min_confidence: 0.3,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.memory < 1 {
            return bad("T ≥ 1");
        }
        if !(0.0..=1.0).contains(&self.appearance_weight) {
            return bad("λ ∈ [0,1]");
        }
        if !self.assoc_threshold.is_finite() || !self.iou_gate.is_finite() {
            return bad("association thresholds must be finite");
        }
        if self.max_age < 1 {
            return bad("max_age ≥ 1");
        }
        if self.confirm_hits < 1 {
            return bad("confirm_hits ≥ 1");
        }
        if !self.min_confidence.is_finite() {
            return bad("confidence floor must be finite");
        }
        Ok(())
    }
}

/// Association costs plus the two cues they were built from (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationCosts {
    pub matrix: CostMatrix,
    pub appearance: Vec<f64>,
    pub overlap: Vec<f64>,
}

pub fn cost_matrix(
    tracks: &[&Track],
    detections: &[Detection],
    model: &MsDoasModel,
    cfg: &TrackerConfig,
) -> Result<AssociationCosts> {
    if model.config.memory != cfg.memory {
        return Err(Error::LengthMismatch(format!(
            "model T={} vs tracker T={}",
            model.config.memory, cfg.memory
        )));
    }
    let (rows, cols) = (tracks.len(), detections.len());
    let cells: Vec<(f64, f64)> = (0..rows * cols)
        .into_par_iter()
        .map(|k| {
            let (t, d) = (tracks[k / cols], &detections[k % cols]);
            let s = model.msdoas(&d.feature, &t.history_features())?;
            Ok((s, iou(&predict_bbox(t, d.frame), &d.bbox)))
        })
        .collect::<Result<_>>()?;
    let lambda = cfg.appearance_weight;
    let mut cost = Vec::with_capacity(cells.len());
    let mut forbidden = Vec::with_capacity(cells.len());
    for &(s, o) in &cells {
        cost.push(lambda * (1.0 - s) + (1.0 - lambda) * (1.0 - o));
        forbidden.push(s < cfg.assoc_threshold && o < cfg.iou_gate);
    }
    Ok(AssociationCosts {
        matrix: CostMatrix::new(rows, cols, cost).with_forbidden(forbidden),
        appearance: cells.iter().map(|c| c.0).collect(),
        overlap: cells.iter().map(|c| c.1).collect(),
    })
}

/// One line of tracker output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResultRow {
    pub frame: u32,
    pub id: u32,
    pub bbox: BBox,
    pub confidence: f64,
}

/// Per-sequence tracker state.
#[derive(Debug, Clone)]
pub struct Tracker<'m> {
    model: &'m MsDoasModel,
    config: TrackerConfig,
    tracks: Vec<Track>,
    next_id: u32,
    last_frame: Option<u32>,
}

impl<'m> Tracker<'m> {
    pub fn new(model: &'m MsDoasModel, config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        if model.config.memory != config.memory {
            return Err(Error::LengthMismatch(format!(
                "model T={} vs tracker T={}",
                model.config.memory, config.memory
            )));
        }
        Ok(Tracker {
            model,
            config,
            tracks: Vec::new(),
            next_id: 1,
            last_frame: None,
        })
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// Processes one frame. Detections below the confidence floor are ignored.
    pub fn step(&mut self, frame: u32, detections: &[Detection]) -> Result<Vec<ResultRow>> {
        if let Some(other) = detections.iter().map(|d| d.frame).find(|&f| f != frame) {
            return Err(Error::MixedFrames { first: frame, other });
        }
        if let Some(prev) = self.last_frame {
            if frame <= prev {
                return Err(Error::InvalidConfig(format!(
                    "frames must increase (frame {frame} after {prev})"
                )));
            }
        }
        self.last_frame = Some(frame);
        for d in detections {
            if !d.bbox.is_valid() {
                return Err(Error::InvalidConfig(format!(
                    "detection box on frame {frame} must have positive size"
                )));
            }
            self.model.expect_feature_dim(d.feature.dim())?;
        }
        let dets: Vec<&Detection> = detections
            .iter()
            .filter(|d| d.confidence >= self.config.min_confidence)
            .collect();

        let mut det_taken = vec![false; dets.len()];
        let mut track_hit: Vec<Option<usize>> = vec![None; self.tracks.len()];

        for pass in [Pass::Confirmed, Pass::Tentative] {
            let rows: Vec<usize> = (0..self.tracks.len())
                .filter(|&i| pass.admits(self.tracks[i].status))
                .collect();
            let cols: Vec<usize> = (0..dets.len()).filter(|&j| !det_taken[j]).collect();
            if rows.is_empty() || cols.is_empty() {
                continue;
            }
            let track_refs: Vec<&Track> = rows.iter().map(|&i| &self.tracks[i]).collect();
            let det_vals: Vec<Detection> = cols.iter().map(|&j| dets[j].clone()).collect();
            let costs = cost_matrix(&track_refs, &det_vals, self.model, &self.config)?;
            let result = solve_assignment(&costs.matrix);
            for (r, c) in result.matches {
                let (ti, dj) = (rows[r], cols[c]);
                self.tracks[ti].observe(dets[dj], self.config.memory);
                track_hit[ti] = Some(dj);
                det_taken[dj] = true;
            }
        }

        let mut emitted = Vec::new();
        let mut keep = Vec::with_capacity(self.tracks.len());
        for (track, hit) in self.tracks.drain(..).zip(track_hit) {
            let mut t = track;
            if let Some(dj) = hit {
                if t.status == TrackStatus::Lost
                    || (t.status == TrackStatus::Tentative && t.hits >= self.config.confirm_hits)
                {
                    t.status = TrackStatus::Active;
                }
                if t.status == TrackStatus::Active {
                    emitted.push(ResultRow {
                        frame,
                        id: t.id,
                        bbox: t.bbox,
                        confidence: dets[dj].confidence,
                    });
                }
                keep.push(t);
                continue;
            }
            match t.status {
                TrackStatus::Tentative => {}
                TrackStatus::Active | TrackStatus::Lost => {
                    t.missed += 1;
                    t.status = TrackStatus::Lost;
                    if t.missed <= self.config.max_age {
                        keep.push(t);
                    }
                }
            }
        }
        self.tracks = keep;

        for (j, d) in dets.iter().enumerate() {
            if det_taken[j] {
                continue;
            }
            let mut t = Track::spawn(self.next_id, d);
            self.next_id += 1;
            if self.config.confirm_hits <= 1 {
                t.status = TrackStatus::Active;
                emitted.push(ResultRow {
                    frame,
                    id: t.id,
                    bbox: d.bbox,
                    confidence: d.confidence,
                });
            }
            self.tracks.push(t);
        }
        emitted.sort_by_key(|r| r.id);
        Ok(emitted)
    }
}

#[derive(Clone, Copy)]
enum Pass {
    Confirmed,
    Tentative,
}

impl Pass {
    fn admits(self, s: TrackStatus) -> bool {
        match self {
            Pass::Confirmed => s != TrackStatus::Tentative,
            Pass::Tentative => s == TrackStatus::Tentative,
        }
    }
}

/// Runs the tracker over all frames of a sequence, in increasing frame order.
pub fn run_sequence(
    detections: &[Detection],
    model: &MsDoasModel,
    cfg: &TrackerConfig,
) -> Result<Vec<ResultRow>> {
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by_key(|&i| (detections[i].frame, i));
    let mut tracker = Tracker::new(model, cfg.clone())?;
    let mut out = Vec::new();
    let Some(&first) = order.first() else {
        return Ok(out);
    };
    let last = detections[*order.last().unwrap()].frame;
    let mut start = 0;
    // frames without detections still age the tracks
    for frame in detections[first].frame..=last {
        let end = start + order[start..].partition_point(|&i| detections[i].frame == frame);
        let batch: Vec<Detection> = order[start..end]
            .iter()
            .map(|&i| detections[i].clone())
            .collect();
        out.extend(tracker.step(frame, &batch)?);
        start = end;
    }
    Ok(out)
}
