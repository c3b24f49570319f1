//! Shared fixtures for the integration tests.
#![allow(dead_code)]

pub mod dd;

use msdoas::embedding::{FeatureVector, ObservationMeta, SyntheticWorld, SyntheticWorldConfig};
use msdoas::model::{train, ModelConfig, MsDoasModel, TrainConfig};
use msdoas::tracklet::{generate_set, Component, FactoryConfig, FeatureTracklet, TrackletKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const DIM: usize = 64;

/// Eight identities, separation/noise ratio 5.
pub fn world(seed: u64) -> SyntheticWorld {
    SyntheticWorld::new(SyntheticWorldConfig {
        identities: 8,
        separation: 1.0,
        noise: 0.2,
        drift: 0.0,
        dim: DIM,
        seed,
    })
    .unwrap()
}

pub fn desk_model_config() -> ModelConfig {
    ModelConfig {
        feature_dim: DIM,
        hidden: 16,
        memory: 5,
        head_hidden: 32,
    }
}

pub fn factory(kind: TrackletKind, set_size: usize, seed: u64) -> FactoryConfig {
    FactoryConfig {
        kind,
        set_size,
        memory: 5,
        max_gap: 5,
        max_steps: 2,
        max_intruders: 2,
        seed,
    }
}

/// Trains a desk-scale model on `set` with the default schedule.
pub fn train_on(set: &[FeatureTracklet], seed: u64) -> MsDoasModel {
    let init = MsDoasModel::init(desk_model_config(), seed, 1.0).unwrap();
    let cfg = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    train(init, set, &cfg).unwrap().model
}

/// Train split: frames `0..140`; test split: frames `140..200`.
pub fn split_sets(
    w: &SyntheticWorld,
    train_cfg: &FactoryConfig,
    test_cfg: &FactoryConfig,
) -> (Vec<FeatureTracklet>, Vec<FeatureTracklet>) {
    let train_pool = w.pool("s", 0..8, 0..140).unwrap();
    let test_pool = w.pool("s", 0..8, 140..200).unwrap();
    (
        generate_set(train_cfg, &train_pool).unwrap(),
        generate_set(test_cfg, &test_pool).unwrap(),
    )
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> FeatureVector {
    FeatureVector::new((0..n).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
}

/// Tracklet of random Gaussian features with a given label; identities are
/// set so the label is consistent.
pub fn random_tracklet(rng: &mut ChaCha8Rng, n: usize, memory: usize, label: u8) -> FeatureTracklet {
    let det_id = if label == 1 { 0 } else { 1 };
    let mut comps = vec![Component {
        feature: gaussian(rng, n),
        meta: ObservationMeta::new("r", memory as u32 + 1, det_id),
    }];
    for k in 0..memory {
        comps.push(Component {
            feature: gaussian(rng, n),
            meta: ObservationMeta::new("r", (memory - k) as u32, 0),
        });
    }
    FeatureTracklet::labelled(comps).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
