//! Generate each of the five tracklet kinds from one feature pool and show
//! what distinguishes them.
//!
//! ```text
//! cargo run --example tracklet_sets -- [seed]
//! ```

use msdoas::embedding::{SyntheticWorld, SyntheticWorldConfig};
use msdoas::tracklet::{generate_set, FactoryConfig, TrackletKind};

fn main() -> msdoas::Result<()> {
    let seed: u64 = std::env::args().nth(1).map_or(0, |s| s.parse().expect("seed must be an integer"));
    let world = SyntheticWorld::new(SyntheticWorldConfig { identities: 5, dim: 8, seed, ..Default::default() })?;
    let pool = world.pool("demo", 0..5, 0..80)?;

    for kind in TrackletKind::ALL {
        let cfg = FactoryConfig {
            kind,
            set_size: 200,
            memory: 5,
            max_gap: 5,
            max_steps: 2,
            max_intruders: 2,
            seed,
        };
        let set = generate_set(&cfg, &pool)?;
        let positives = set.iter().filter(|t| t.is_positive()).count();
        println!("kind {kind}: {} tracklets, {positives} positive", set.len());
        for t in set.iter().take(2) {
            println!("  label {} identities {:?} frames {:?}", t.label, t.identities(), t.frames());
        }
    }
    Ok(())
}
