//! Scripted synthetic sequences: straight-line trajectories rendered into
//! ground truth and detection rows, with optional occlusion windows.

use std::ops::{Range, RangeInclusive};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::metrics::GtEntry;
use crate::tracker::{BBox, RawDetection};

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Ground-truth id (≥ 1).
    pub id: u32,
    /// Top-left corner on the first frame.
    pub start: (f64, f64),
    /// Pixels per frame.
    pub velocity: (f64, f64),
    pub size: (f64, f64),
    pub frames: RangeInclusive<u32>,
    /// Frames with no detection; the ground truth is kept but marked invisible.
    pub hidden: Vec<Range<u32>>,
}

impl Trajectory {
    pub fn bbox_at(&self, frame: u32) -> BBox {
        let dt = f64::from(frame - self.frames.start());
        BBox::new(
            self.start.0 + self.velocity.0 * dt,
            self.start.1 + self.velocity.1 * dt,
            self.size.0,
            self.size.1,
        )
    }

    pub fn is_hidden(&self, frame: u32) -> bool {
        self.hidden.iter().any(|r| r.contains(&frame))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scenario {
    pub gt: Vec<GtEntry>,
    pub detections: Vec<RawDetection>,
}

/// Three pedestrians over `frames` frames: ids 1 and 2 walk towards each other
/// on nearly the same row and cross halfway; id 3 disappears for frames
/// `40..45`.
pub fn crossing_scenario(frames: u32) -> Vec<Trajectory> {
    let last = frames.max(1);
    let span = f64::from(last - 1);
    vec![
        Trajectory {
            id: 1,
            start: (100.0, 400.0),
            velocity: (16.0, 0.0),
            size: (80.0, 200.0),
            frames: 1..=last,
            hidden: vec![],
        },
        Trajectory {
            id: 2,
            start: (100.0 + 16.0 * span, 420.0),
            velocity: (-16.0, 0.0),
            size: (80.0, 200.0),
            frames: 1..=last,
            hidden: vec![],
        },
        Trajectory {
            id: 3,
            start: (300.0, 100.0),
            velocity: (5.0, 1.0),
            size: (60.0, 150.0),
            frames: 1..=last,
            hidden: vec![40..45],
        },
    ]
}

/// Renders trajectories frame by frame. Detection corners get uniform jitter
/// in `[-jitter, jitter]`; within a frame, detection order is shuffled.
pub fn render(trajectories: &[Trajectory], jitter: f64, confidence: f64, seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = trajectories.iter().map(|t| *t.frames.start()).min().unwrap_or(1);
    let last = trajectories.iter().map(|t| *t.frames.end()).max().unwrap_or(0);
    let mut out = Scenario::default();
    for frame in first..=last {
        let mut dets = Vec::new();
        for t in trajectories.iter().filter(|t| t.frames.contains(&frame)) {
            let bbox = t.bbox_at(frame);
            let hidden = t.is_hidden(frame);
            out.gt.push(GtEntry {
                frame,
                id: t.id,
                bbox,
                valid: !hidden,
            });
            if !hidden {
                let mut j = || if jitter > 0.0 { rng.gen_range(-jitter..=jitter) } else { 0.0 };
                let (dx, dy) = (j(), j());
                dets.push(RawDetection {
                    frame,
                    bbox: bbox.translated(dx, dy),
                    confidence,
                });
            }
        }
        dets.shuffle(&mut rng);
        out.detections.extend(dets);
    }
    out
}

/// Detection rows in the MOTChallenge `det.txt` layout.
pub fn format_detections(rows: &[RawDetection]) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    for d in rows {
        let _ = writeln!(
            s,
            "{},-1,{:.3},{:.3},{:.3},{:.3},{:.4},-1,-1,-1",
            d.frame, d.bbox.left, d.bbox.top, d.bbox.width, d.bbox.height, d.confidence
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hidden_frames_have_invalid_gt_and_no_detection() {
        let s = render(&crossing_scenario(100), 1.0, 0.9, 3);
        assert_eq!(s.gt.len(), 300);
        assert_eq!(s.gt.iter().filter(|g| !g.valid).count(), 5);
        assert_eq!(s.detections.len(), 295);
    }

    #[test]
    fn ids_one_and_two_cross() {
        let t = crossing_scenario(100);
        assert!(t[0].bbox_at(1).left < t[1].bbox_at(1).left);
        assert!(t[0].bbox_at(100).left > t[1].bbox_at(100).left);
    }
}
