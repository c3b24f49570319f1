//! Train the similarity scorer on kind-I tracklets, save it, reload it, and
//! score a few held-out tracklets.
//!
//! ```text
//! cargo run --release --example train_model -- [iterations] [model-file]
//! ```

use msdoas::embedding::{SyntheticWorld, SyntheticWorldConfig};
use msdoas::model::{load_model, save_model, train, ModelConfig, MsDoasModel, TrainConfig};
use msdoas::tracklet::{generate_set, FactoryConfig, TrackletKind};

fn main() -> msdoas::Result<()> {
    let mut args = std::env::args().skip(1);
    let iterations: usize = args.next().map_or(1000, |s| s.parse().expect("iterations must be an integer"));
    let path = args.next();

    let world = SyntheticWorld::new(SyntheticWorldConfig { identities: 8, dim: 32, ..Default::default() })?;
    let factory = FactoryConfig { kind: TrackletKind::I, set_size: 2000, ..Default::default() };
    let train_set = generate_set(&factory, &world.pool("demo", 0..8, 0..140)?)?;
    let test_set = generate_set(&FactoryConfig { set_size: 6, seed: 1, ..factory }, &world.pool("demo", 0..8, 140..200)?)?;

    let config = ModelConfig { feature_dim: 32, hidden: 16, memory: factory.memory, head_hidden: 32 };
    let init = MsDoasModel::init(config, 0, 1.0)?;
    let out = train(init, &train_set, &TrainConfig { iterations, ..Default::default() })?;
    for (i, chunk) in out.losses.chunks((iterations / 5).max(1)).enumerate() {
        let mean = chunk.iter().sum::<f64>() / chunk.len() as f64;
        println!("iterations {:>5}..: mean loss {mean:.4}", i * chunk.len());
    }

    let model = match &path {
        Some(p) => {
            save_model(&out.model, p)?;
            println!("saved {p}");
            load_model(p)?
        }
        None => out.model,
    };
    for t in &test_set {
        println!("label {} similarity {:.4}", t.label, model.tracklet_score(t)?);
    }
    Ok(())
}
