//! Threshold sweep of a trained scorer against the single-shot Euclidean
//! baseline on tracklets with intruders.
//!
//! ```text
//! cargo run --release --example roc_eval -- [svg-file]
//! ```

use msdoas::embedding::{SyntheticWorld, SyntheticWorldConfig};
use msdoas::eval::{default_thresholds, euclidean_baseline_scores, report_csv, report_svg, roc_from_scores, roc_sweep};
use msdoas::model::{train, ModelConfig, MsDoasModel, TrainConfig};
use msdoas::tracklet::{generate_set, FactoryConfig, TrackletKind};

fn main() -> msdoas::Result<()> {
    let svg = std::env::args().nth(1);
    let world = SyntheticWorld::new(SyntheticWorldConfig { identities: 8, dim: 32, noise: 0.4, ..Default::default() })?;
    let factory = FactoryConfig { kind: TrackletKind::IV, set_size: 3000, ..Default::default() };
    let train_set = generate_set(&factory, &world.pool("demo", 0..8, 0..140)?)?;
    let test_set = generate_set(&FactoryConfig { set_size: 1000, seed: 1, ..factory }, &world.pool("demo", 0..8, 140..200)?)?;

    let config = ModelConfig { feature_dim: 32, hidden: 16, memory: factory.memory, head_hidden: 32 };
    let model = train(MsDoasModel::init(config, 0, 1.0)?, &train_set, &TrainConfig::default())?.model;
    let thresholds = default_thresholds();
    let learned = roc_sweep(&model, &test_set, &thresholds)?;
    print!("{}", report_csv(&learned));

    let labels: Vec<u8> = test_set.iter().map(|t| t.label).collect();
    let baseline = roc_from_scores(&euclidean_baseline_scores(&test_set, 1.0)?, &labels, &thresholds)?;
    for (name, r) in [("learned", &learned), ("euclidean", &baseline)] {
        println!(
            "{name:>9}: best accuracy {:.4} at th {:.2}, best F1 {:.4} at th {:.2}",
            r.best_accuracy.accuracy, r.best_accuracy.threshold, r.best_f1.f1, r.best_f1.threshold
        );
    }
    if let Some(path) = svg {
        std::fs::write(&path, report_svg(&learned)).expect("write svg");
        println!("wrote {path}");
    }
    Ok(())
}
