//! Score a hand-written tracker output in which two tracks swap identities.
//!
//! ```text
//! cargo run --example mot_scoring
//! ```

use msdoas::metrics::{report_csv, score, GtEntry, HypEntry, MetricsConfig, SequenceInput};
use msdoas::tracker::BBox;

fn main() -> msdoas::Result<()> {
    let boxes = |frame: u32, x: f64| BBox::new(x + f64::from(frame), 100.0, 40.0, 90.0);
    let mut gt = Vec::new();
    let mut hyp = Vec::new();
    for frame in 1..=5 {
        for (id, x) in [(1, 0.0), (2, 200.0)] {
            gt.push(GtEntry { frame, id, bbox: boxes(frame, x), valid: true });
            // From frame 4 on, hypothesis 10 follows object 2 and 11 follows object 1.
            let h = if frame < 4 { 9 + id } else { 12 - id };
            hyp.push(HypEntry { frame, id: h, bbox: boxes(frame, x) });
        }
    }
    let clean: Vec<HypEntry> = gt.iter().map(|g| HypEntry { frame: g.frame, id: g.id, bbox: g.bbox }).collect();

    let report = score(
        &[
            SequenceInput { name: "swap".into(), gt: gt.clone(), hyp },
            SequenceInput { name: "clean".into(), gt, hyp: clean },
        ],
        &MetricsConfig::default(),
    )?;
    print!("{}", report_csv(&report));
    let s = &report.sequences[0];
    println!(
        "swap: {} identity switches, MOTA {:.3}, IDF1 {:.3}",
        s.totals.idsw, s.mota, s.idf1
    );
    Ok(())
}
