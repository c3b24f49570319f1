//! Train one model per tracklet kind and test each on every kind, printing
//! the best accuracy and F1 tables.
//!
//! ```text
//! cargo run --release --example experiment_grid -- [iterations]
//! ```

use msdoas::embedding::{SyntheticWorld, SyntheticWorldConfig};
use msdoas::eval::{default_thresholds, experiment_grid, GridConfig, GridMetric};
use msdoas::model::{ModelConfig, TrainConfig};
use msdoas::tracklet::{generate_set, FactoryConfig, TrackletKind};

fn main() -> msdoas::Result<()> {
    let iterations: usize = std::env::args().nth(1).map_or(500, |s| s.parse().expect("iterations must be an integer"));
    let world = SyntheticWorld::new(SyntheticWorldConfig { identities: 8, dim: 32, noise: 0.3, ..Default::default() })?;
    let train_pool = world.pool("demo", 0..8, 0..140)?;
    let test_pool = world.pool("demo", 0..8, 140..200)?;

    let mut train_sets = Vec::new();
    let mut test_sets = Vec::new();
    for kind in TrackletKind::ALL {
        let cfg = FactoryConfig { kind, set_size: 1500, ..Default::default() };
        train_sets.push(generate_set(&cfg, &train_pool)?);
        test_sets.push(generate_set(&FactoryConfig { set_size: 400, seed: 1, ..cfg }, &test_pool)?);
    }
    let grid = experiment_grid(
        &train_sets,
        &test_sets,
        &GridConfig {
            model: ModelConfig { feature_dim: 32, hidden: 16, memory: 5, head_hidden: 32 },
            train: TrainConfig { iterations, ..Default::default() },
            thresholds: default_thresholds(),
        },
    )?;
    println!("best accuracy (%)");
    print!("{}", grid.table_csv(GridMetric::Accuracy));
    println!("best F1 (%)");
    print!("{}", grid.table_csv(GridMetric::F1));
    Ok(())
}
