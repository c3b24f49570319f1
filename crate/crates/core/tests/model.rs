mod common;

use msdoas::model::{
    adagrad_update, cross_entropy, load_model, save_model, softmax, train, AdagradState, ModelConfig,
    MsDoasModel, Params, TrainConfig, PROB_CLAMP,
};
use msdoas::tracklet::TrackletKind;
use msdoas::Error;
use proptest::prelude::*;

fn small() -> ModelConfig {
    ModelConfig {
        feature_dim: 16,
        hidden: 8,
        memory: 5,
        head_hidden: 8,
    }
}

#[test]
fn scores_are_probabilities() {
    let model = MsDoasModel::init(small(), 3, 1.0).unwrap();
    let mut r = common::rng(0);
    for label in [0, 1] {
        let t = common::random_tracklet(&mut r, 16, 5, label);
        let (s, _) = model.forward(&t.detection().feature, &t.history_features()).unwrap();
        assert!((s.probs[0] + s.probs[1] - 1.0).abs() < 1e-12);
        assert_eq!(s.similarity(), s.probs[1]);
        assert_eq!(model.tracklet_score(&t).unwrap(), s.probs[1]);
    }
}

#[test]
fn shorter_histories_are_accepted_longer_rejected() {
    let model = MsDoasModel::init(small(), 0, 1.0).unwrap();
    let mut r = common::rng(1);
    let d = common::gaussian(&mut r, 16);
    let hist: Vec<_> = (0..6).map(|_| common::gaussian(&mut r, 16)).collect();
    let refs: Vec<_> = hist.iter().collect();
    assert!(model.msdoas(&d, &refs[..1]).is_ok());
    assert!(model.msdoas(&d, &refs[..5]).is_ok());
    assert!(matches!(model.msdoas(&d, &refs), Err(Error::LengthMismatch(_))));
    assert!(matches!(model.msdoas(&d, &[]), Err(Error::Empty(_))));
    let wrong = common::gaussian(&mut r, 15);
    assert!(matches!(
        model.msdoas(&wrong, &refs[..5]),
        Err(Error::DimensionMismatch { expected: 16, found: 15 })
    ));
}

#[test]
fn history_order_matters() {
    let model = MsDoasModel::init(small(), 5, 1.0).unwrap();
    let mut r = common::rng(2);
    let d = common::gaussian(&mut r, 16);
    let hist: Vec<_> = (0..5).map(|_| common::gaussian(&mut r, 16)).collect();
    let fwd: Vec<_> = hist.iter().collect();
    let rev: Vec<_> = hist.iter().rev().collect();
    assert_ne!(model.msdoas(&d, &fwd).unwrap(), model.msdoas(&d, &rev).unwrap());
}

#[test]
fn cross_entropy_is_clamped() {
    let max = -(PROB_CLAMP.ln());
    assert!((cross_entropy(0.0, 0) - max).abs() < 1e-9);
    // 1 - (1 - PROB_CLAMP) is only accurate to about 1e-4 relative.
    assert!((cross_entropy(1.0, 1) - max).abs() < 1e-3);
    assert!(cross_entropy(1.0, 0) < 1e-11);
    assert!((cross_entropy(0.5, 1) - std::f64::consts::LN_2).abs() < 1e-15);
}

#[test]
fn model_files_round_trip_bit_exactly() {
    let model = MsDoasModel::init(small(), 11, 1.0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    save_model(&model, &path).unwrap();
    let loaded = load_model(&path).unwrap();
    assert_eq!(loaded.config, model.config);
    assert_eq!(loaded.params, model.params);
    let mut r = common::rng(4);
    let t = common::random_tracklet(&mut r, 16, 5, 1);
    assert_eq!(
        loaded.tracklet_score(&t).unwrap().to_bits(),
        model.tracklet_score(&t).unwrap().to_bits()
    );
}

#[test]
fn corrupt_model_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    std::fs::write(&path, b"not a model").unwrap();
    assert!(matches!(load_model(&path), Err(Error::Format(_))));

    let model = MsDoasModel::init(small(), 0, 1.0).unwrap();
    save_model(&model, &path).unwrap();
    let mut bytes = std::fs::read(&path).unwrap();
    bytes.truncate(bytes.len() - 3);
    std::fs::write(&path, &bytes).unwrap();
    assert!(load_model(&path).is_err());
}

#[test]
fn mismatched_parameter_shapes_are_rejected() {
    let other = ModelConfig { hidden: 4, ..small() };
    assert!(matches!(
        MsDoasModel::from_params(small(), Params::zeros(&other)),
        Err(Error::ShapeMismatch(_))
    ));
}

#[test]
fn adagrad_step_matches_hand_computation() {
    let cfg = ModelConfig {
        feature_dim: 1,
        hidden: 1,
        memory: 1,
        head_hidden: 0,
    };
    let mut params = Params::zeros(&cfg);
    let mut grads = Params::zeros(&cfg);
    grads.tensors_mut()[0][0] = 2.0;
    let mut state = AdagradState::new(&params, 0.1, 0.0);
    adagrad_update(&mut params, &mut state, &grads);
    // First step: -lr * g / sqrt(g^2) = -lr.
    assert!((params.tensors()[0].2[0] + 0.1).abs() < 1e-15);
    adagrad_update(&mut params, &mut state, &grads);
    assert!((params.tensors()[0].2[0] + 0.1 + 0.2 / 8f64.sqrt()).abs() < 1e-15);
    // Zero gradients leave parameters alone.
    assert_eq!(params.tensors()[1].2, &[0.0; 4][..]);
}

#[test]
fn training_is_deterministic_and_lowers_the_loss() {
    let w = common::world(0);
    let pool = w.pool("s", 0..8, 0..100).unwrap();
    let set = msdoas::tracklet::generate_set(&common::factory(TrackletKind::I, 500, 0), &pool).unwrap();
    let cfg = TrainConfig {
        iterations: 300,
        seed: 2,
        ..Default::default()
    };
    let init = MsDoasModel::init(common::desk_model_config(), 2, 1.0).unwrap();
    let a = train(init.clone(), &set, &cfg).unwrap();
    let b = train(init, &set, &cfg).unwrap();
    assert_eq!(a.model.params, b.model.params);
    assert_eq!(a.losses.len(), 300);
    let head: f64 = a.losses[..20].iter().sum::<f64>() / 20.0;
    let tail: f64 = a.losses[280..].iter().sum::<f64>() / 20.0;
    assert!(tail < 0.5 * head, "loss {head:.4} -> {tail:.4}");
}

#[test]
fn training_rejects_bad_settings_and_data() {
    let init = MsDoasModel::init(small(), 0, 1.0).unwrap();
    let mut r = common::rng(0);
    let set = vec![common::random_tracklet(&mut r, 16, 5, 1)];
    let bad = |cfg: TrainConfig| train(init.clone(), &set, &cfg).unwrap_err();
    assert!(bad(TrainConfig { batch_size: 0, ..Default::default() }).to_string().contains("B ≥ 1"));
    assert!(bad(TrainConfig { learning_rate: 0.0, ..Default::default() }).to_string().contains("lr > 0"));
    assert!(train(init.clone(), &[], &TrainConfig::default()).is_err());
    let wrong_memory = vec![common::random_tracklet(&mut r, 16, 3, 1)];
    assert!(train(init, &wrong_memory, &TrainConfig { iterations: 1, ..Default::default() }).is_err());
}

#[test]
fn divergent_training_reports_a_numerical_error() {
    let init = MsDoasModel::init(small(), 0, 1.0).unwrap();
    let mut r = common::rng(9);
    let set: Vec<_> = (0..8).map(|i| common::random_tracklet(&mut r, 16, 5, (i % 2) as u8)).collect();
    let cfg = TrainConfig {
        iterations: 50,
        learning_rate: f64::MAX,
        ..Default::default()
    };
    let e = train(init, &set, &cfg).unwrap_err();
    assert!(e.is_numerical(), "{e}");
}

proptest! {
    #[test]
    fn softmax_is_shift_invariant(z0 in -50f64..50.0, z1 in -50f64..50.0, c in -500f64..500.0) {
        let a = softmax([z0, z1]);
        let b = softmax([z0 + c, z1 + c]);
        prop_assert!((a[0] - b[0]).abs() < 1e-12);
        prop_assert!((a[0] + a[1] - 1.0).abs() < 1e-12);
        prop_assert!(a[0] >= 0.0 && a[1] >= 0.0);
    }

    #[test]
    fn softmax_survives_huge_logits(z0 in -1e300f64..1e300, z1 in -1e300f64..1e300) {
        let p = softmax([z0, z1]);
        prop_assert!(p[0].is_finite() && p[1].is_finite());
        prop_assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
    }
}
