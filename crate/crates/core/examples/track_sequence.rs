//! Track a scripted three-person sequence (one crossing, one short occlusion)
//! with a freshly trained scorer, then score the result.
//!
//! ```text
//! cargo run --release --example track_sequence -- [seed] [out-dir]
//! ```
//!
//! With an output directory, the detections, ground truth and tracker output
//! are written there in MOTChallenge layout.

use std::path::PathBuf;

use msdoas::embedding::{SyntheticWorld, SyntheticWorldConfig};
use msdoas::metrics::{format_gt, report_csv, score, HypEntry, MetricsConfig, SequenceInput};
use msdoas::model::{train, ModelConfig, MsDoasModel, TrainConfig};
use msdoas::scenario::{crossing_scenario, format_detections, render};
use msdoas::tracker::{format_results, run_sequence, FeatureSource, TrackerConfig};
use msdoas::tracklet::{generate_set, FactoryConfig, TrackletKind};

fn main() -> msdoas::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed must be an integer"));
    let out_dir = args.next().map(PathBuf::from);

    let world = SyntheticWorld::new(SyntheticWorldConfig {
        identities: 8,
        dim: 64,
        seed,
        ..Default::default()
    })?;

    // Training features come from frames the test sequence never uses.
    let pool = world.pool("train", 0..8, 1000..1140)?;
    let set = generate_set(
        &FactoryConfig {
            kind: TrackletKind::III,
            set_size: 4000,
            seed,
            ..Default::default()
        },
        &pool,
    )?;
    let init = MsDoasModel::init(
        ModelConfig {
            feature_dim: 64,
            hidden: 16,
            memory: 5,
            head_hidden: 32,
        },
        seed,
        1.0,
    )?;
    let trained = train(init, &set, &TrainConfig { seed, ..Default::default() })?;
    println!(
        "trained: loss {:.4} -> {:.4}",
        trained.losses.first().unwrap_or(&f64::NAN),
        trained.losses.last().unwrap_or(&f64::NAN)
    );

    let scenario = render(&crossing_scenario(100), 1.0, 0.9, seed);
    let source = FeatureSource::Synthetic {
        world,
        gt: scenario.gt.clone(),
    };
    let detections = source.attach(&scenario.detections)?;
    let rows = run_sequence(&detections, &trained.model, &TrackerConfig::default())?;

    let report = score(
        &[SequenceInput {
            name: "crossing".into(),
            gt: scenario.gt.clone(),
            hyp: rows.iter().copied().map(HypEntry::from).collect(),
        }],
        &MetricsConfig::default(),
    )?;
    print!("{}", report_csv(&report));
    let g = &report.global;
    println!(
        "precision {:.3} recall {:.3} matches {}",
        g.precision, g.recall, g.totals.matches
    );

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(&dir).expect("create output directory");
        std::fs::write(dir.join("det.txt"), format_detections(&scenario.detections)).expect("write det.txt");
        std::fs::write(dir.join("gt.txt"), format_gt(&scenario.gt)).expect("write gt.txt");
        std::fs::write(dir.join("hyp.txt"), format_results(&rows)).expect("write hyp.txt");
        println!("wrote {}", dir.display());
    }
    Ok(())
}
