//! Draw features from a synthetic identity world and compare same-identity
//! and cross-identity distances.
//!
//! ```text
//! cargo run --example synth_features -- [noise] [out-file]
//! ```
//!
//! With an output file, the pool is written in the feature file format read
//! by `msdoas tracklets --pool`.

use msdoas::embedding::{euclidean_distance, store_features, SyntheticWorld, SyntheticWorldConfig};

fn main() -> msdoas::Result<()> {
    let mut args = std::env::args().skip(1);
    let noise: f64 = args.next().map_or(0.2, |s| s.parse().expect("noise must be a number"));
    let out = args.next();

    let config = SyntheticWorldConfig {
        identities: 6,
        noise,
        dim: 32,
        ..Default::default()
    };
    let world = SyntheticWorld::new(config)?;
    let pool = world.pool("demo", 0..6, 0..50)?;
    println!("{} records of dimension {}", pool.len(), world.dim());

    let (mut same, mut cross) = (Vec::new(), Vec::new());
    for (i, a) in pool.iter().enumerate().step_by(7) {
        for b in pool.iter().skip(i + 1).step_by(5) {
            let d = euclidean_distance(&a.1, &b.1)?;
            if a.0.identity == b.0.identity {
                same.push(d);
            } else {
                cross.push(d);
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let max_same = same.iter().copied().fold(0.0, f64::max);
    let min_cross = cross.iter().copied().fold(f64::INFINITY, f64::min);
    println!("same identity:  mean {:.3} max {:.3} ({} pairs)", mean(&same), max_same, same.len());
    println!("cross identity: mean {:.3} min {:.3} ({} pairs)", mean(&cross), min_cross, cross.len());
    println!("separable by a single threshold: {}", max_same < min_cross);

    if let Some(path) = out {
        store_features(&pool, world.dim(), &path)?;
        println!("wrote {path}");
    }
    Ok(())
}
