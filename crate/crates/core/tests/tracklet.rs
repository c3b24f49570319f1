mod common;

use msdoas::embedding::{FeatureVector, ObservationMeta};
use msdoas::tracklet::{
    apply_intruders, generate_set, label_tracklet, load_tracklets, mode_identity, store_tracklets,
    validate_membership, Component, FactoryConfig, FeatureTracklet, MaskVector, TrackletKind,
};
use msdoas::Error;
use proptest::prelude::*;

fn comp(id: u32, frame: u32) -> Component {
    Component {
        feature: FeatureVector::new(vec![f64::from(id), f64::from(frame)]).unwrap(),
        meta: ObservationMeta::new("s", frame, id),
    }
}

fn tracklet(ids: &[u32], frames: &[u32]) -> FeatureTracklet {
    FeatureTracklet::labelled(ids.iter().zip(frames).map(|(&i, &f)| comp(i, f)).collect()).unwrap()
}

#[test]
fn every_kind_yields_balanced_valid_sets() {
    let w = common::world(3);
    let pool = w.pool("s", 0..8, 0..60).unwrap();
    for kind in TrackletKind::ALL {
        let cfg = common::factory(kind, 301, 9);
        let set = generate_set(&cfg, &pool).unwrap();
        assert_eq!(set.len(), 301);
        assert_eq!(set.iter().filter(|t| t.is_positive()).count(), 151, "kind {kind}");
        for t in &set {
            assert_eq!(t.memory(), 5);
            assert_eq!(label_tracklet(t).unwrap(), t.label);
            assert!(validate_membership(t, &cfg), "kind {kind}: {:?}", t.frames());
        }
    }
}

#[test]
fn intruder_kinds_actually_contain_intruders() {
    let w = common::world(0);
    let pool = w.pool("s", 0..8, 0..60).unwrap();
    let set = generate_set(&common::factory(TrackletKind::IV, 400, 1), &pool).unwrap();
    let intruded = set
        .iter()
        .filter(|t| {
            let ids = t.identities();
            let reference = if t.is_positive() { ids[0] } else { mode_identity(&ids[1..]).unwrap() };
            ids[1..].iter().any(|&i| i != reference)
        })
        .count();
    assert!(intruded > 100, "{intruded} of 400 tracklets have intruders");
}

#[test]
fn generation_is_deterministic_per_seed() {
    let w = common::world(0);
    let pool = w.pool("s", 0..8, 0..40).unwrap();
    let cfg = common::factory(TrackletKind::V, 50, 4);
    assert_eq!(generate_set(&cfg, &pool).unwrap(), generate_set(&cfg, &pool).unwrap());
    let other = FactoryConfig { seed: 5, ..cfg };
    assert_ne!(generate_set(&other, &pool).unwrap(), generate_set(&cfg, &pool).unwrap());
}

#[test]
fn pools_that_cannot_serve_the_kind_are_rejected() {
    let w = common::world(0);
    let short = w.pool("s", 0..8, 0..5).unwrap();
    assert!(matches!(
        generate_set(&common::factory(TrackletKind::I, 10, 0), &short),
        Err(Error::InsufficientPool(_))
    ));
    let single = w.pool("s", [2], 0..40).unwrap();
    assert!(matches!(
        generate_set(&common::factory(TrackletKind::I, 10, 0), &single),
        Err(Error::InsufficientPool(_))
    ));
    // A single positive needs no second identity.
    assert_eq!(generate_set(&common::factory(TrackletKind::I, 1, 0), &single).unwrap().len(), 1);
}

#[test]
fn invalid_factory_settings_name_the_violated_bound() {
    let pool = common::world(0).pool("s", 0..8, 0..40).unwrap();
    let cases = [
        (FactoryConfig { set_size: 0, ..Default::default() }, "M ≥ 1"),
        (FactoryConfig { memory: 0, ..Default::default() }, "T ≥ 1"),
        (FactoryConfig { kind: TrackletKind::II, max_gap: 1, ..Default::default() }, "F ≥ 2"),
        (FactoryConfig { kind: TrackletKind::IV, max_intruders: 6, ..Default::default() }, "N ≤ T"),
        (FactoryConfig { kind: TrackletKind::III, max_steps: 0, ..Default::default() }, "S ≤ T"),
    ];
    for (cfg, needle) in cases {
        let e = generate_set(&cfg, &pool).unwrap_err();
        assert!(matches!(e, Error::InvalidConfig(_)));
        assert!(e.to_string().contains(needle), "{e}");
    }
}

#[test]
fn intruders_keep_slot_frames_and_relabel() {
    let t = tracklet(&[4, 4, 4, 4], &[9, 8, 7, 6]);
    let mask = MaskVector::from_positions(4, &[1, 3]).unwrap();
    let out = apply_intruders(&t, &mask, &[comp(2, 100), comp(7, 200)]).unwrap();
    assert_eq!(out.identities(), vec![4, 2, 4, 7]);
    assert_eq!(out.frames(), vec![9, 8, 7, 6]);
    assert_eq!(out.components[1].feature.as_slice(), &[2.0, 100.0]);
    // History 2, 4, 7 is a three-way tie, so the mode is 2.
    assert_eq!(out.label, 0);
    let one = apply_intruders(&t, &MaskVector::from_positions(4, &[3]).unwrap(), &[comp(7, 1)]).unwrap();
    assert_eq!(one.label, 1);

    let flipped = apply_intruders(
        &t,
        &MaskVector::from_positions(4, &[1, 2]).unwrap(),
        &[comp(2, 1), comp(2, 2)],
    )
    .unwrap();
    // History 2, 2, 4 has mode 2, which is not the detection identity.
    assert_eq!(flipped.label, 0);

    assert!(apply_intruders(&t, &mask, &[comp(2, 1)]).is_err());
    assert!(MaskVector::from_positions(4, &[0]).is_err());
}

#[test]
fn tracklet_file_rejects_wrong_component_count() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.txt");
    std::fs::write(&path, "T=1,n=1\n1|3:5:0.5|3:4:0.25\n0|3:5:0.5\n").unwrap();
    assert!(matches!(load_tracklets(&path), Err(Error::Parse { line: 3, .. })));
}

fn arb_tracklet(memory: usize, dim: usize) -> impl Strategy<Value = FeatureTracklet> {
    prop::collection::vec(
        (0u32..6, 0u32..10_000, prop::collection::vec(-1e3f64..1e3, dim)),
        memory + 1,
    )
    .prop_map(|cs| {
        FeatureTracklet::labelled(
            cs.into_iter()
                .map(|(id, frame, v)| Component {
                    feature: FeatureVector::new(v).unwrap(),
                    meta: ObservationMeta::new("", frame, id),
                })
                .collect(),
        )
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn tracklet_files_round_trip(set in prop::collection::vec(arb_tracklet(3, 4), 500)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.txt");
        store_tracklets(&set, 3, 4, &path).unwrap();
        let (memory, dim, loaded) = load_tracklets(&path).unwrap();
        prop_assert_eq!((memory, dim), (3, 4));
        prop_assert_eq!(loaded, set);
    }
}

proptest! {
    #[test]
    fn mode_is_a_most_frequent_and_smallest_among_ties(ids in prop::collection::vec(0u32..5, 1..12)) {
        let m = mode_identity(&ids).unwrap();
        let count = |x: u32| ids.iter().filter(|&&i| i == x).count();
        for &other in &ids {
            prop_assert!(count(other) < count(m) || (count(other) == count(m) && other >= m));
        }
    }

    #[test]
    fn mode_ignores_order(mut ids in prop::collection::vec(0u32..5, 1..12), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let m = mode_identity(&ids).unwrap();
        ids.shuffle(&mut common::rng(seed));
        prop_assert_eq!(mode_identity(&ids).unwrap(), m);
    }
}
