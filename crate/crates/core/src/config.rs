//! Sectioned run configuration.
//!
//! The file is TOML restricted to one level of sections holding `key = value`
//! pairs, plus an optional top-level `seed`:
//!
//! ```toml
//! seed = 7
//!
//! [world]
//! identities = 8
//! dim = 64
//!
//! [factory]
//! kind = 4
//! M = 4000
//! ```
//!
//! Unknown sections and keys are rejected. Values are checked with the owning
//! module's validation when a subcommand resolves them.

use std::path::Path;

use toml::{Table, Value};

use crate::embedding::SyntheticWorldConfig;
use crate::error::{Error, Result};
use crate::metrics::MetricsConfig;
use crate::model::TrainConfig;
use crate::tracker::TrackerConfig;
use crate::tracklet::{FactoryConfig, TrackletKind};

/// Frames and sequence name for synthetic feature pools.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolSettings {
    pub sequence: String,
    pub first_frame: u32,
    pub frames: u32,
}

impl Default for PoolSettings {
    fn default() -> Self {
        PoolSettings {
            sequence: "synth".into(),
            first_frame: 0,
            frames: 200,
        }
    }
}

/// Model shape parameters that are not implied by the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSettings {
    pub hidden: usize,
    pub head_hidden: usize,
}

impl Default for ModelSettings {
    fn default() -> Self {
        ModelSettings {
            hidden: 128,
            head_hidden: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSettings {
    /// Size of each test set.
    pub test_size: usize,
    /// Fraction of the pool's frames (earliest first) used for training sets.
    pub train_fraction: f64,
}

impl Default for GridSettings {
    fn default() -> Self {
        GridSettings {
            test_size: 1000,
            train_fraction: 0.7,
        }
    }
}

/// Seeds given explicitly in the file, per section.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SeedOverrides {
    pub global: Option<u64>,
    pub world: Option<u64>,
    pub factory: Option<u64>,
    pub train: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub seeds: SeedOverrides,
    pub world: SyntheticWorldConfig,
    pub pool: PoolSettings,
    pub factory: FactoryConfig,
    pub model: ModelSettings,
    pub train: TrainConfig,
    pub grid: GridSettings,
    pub tracker: TrackerConfig,
    pub metrics: MetricsConfig,
}

fn bad(key: &str, what: &str) -> Error {
    Error::InvalidConfig(format!("`{key}`: {what}"))
}

fn int(v: &Value, key: &str, min: i64) -> Result<i64> {
    let i = v.as_integer().ok_or_else(|| bad(key, "expected an integer"))?;
    if i < min {
        return Err(bad(key, &format!("{} ≥ {min}", key.rsplit('.').next().unwrap_or(key))));
    }
    Ok(i)
}

fn usize_of(v: &Value, key: &str, min: i64) -> Result<usize> {
    Ok(int(v, key, min)? as usize)
}

fn u32_of(v: &Value, key: &str, min: i64) -> Result<u32> {
    u32::try_from(int(v, key, min)?).map_err(|_| bad(key, "out of range"))
}

fn u64_of(v: &Value, key: &str) -> Result<u64> {
    Ok(int(v, key, 0)? as u64)
}

fn float(v: &Value, key: &str) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(bad(key, "expected a number")),
    }
}

fn boolean(v: &Value, key: &str) -> Result<bool> {
    v.as_bool().ok_or_else(|| bad(key, "expected true or false"))
}

impl Settings {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::InvalidConfig(m) => Error::InvalidConfig(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(e.message().to_string()))?;
        let mut s = Settings::default();
        for (section, body) in &table {
            if section == "seed" {
                s.seeds.global = Some(u64_of(body, "seed")?);
                continue;
            }
            let body = body
                .as_table()
                .ok_or_else(|| bad(section, "expected a section or `seed`"))?;
            for (key, v) in body {
                let full = format!("{section}.{key}");
                s.apply(section, key, v, &full)?;
            }
        }
        Ok(s)
    }

    fn apply(&mut self, section: &str, key: &str, v: &Value, full: &str) -> Result<()> {
        match (section, key) {
            ("world", "identities") => self.world.identities = usize_of(v, full, 1)?,
            ("world", "separation") => self.world.separation = float(v, full)?,
            ("world", "noise") => self.world.noise = float(v, full)?,
            ("world", "drift") => self.world.drift = float(v, full)?,
            ("world", "dim") => self.world.dim = usize_of(v, full, 1)?,
            ("world", "seed") => self.seeds.world = Some(u64_of(v, full)?),
            ("world", "sequence") => {
                self.pool.sequence = v
                    .as_str()
                    .filter(|s| !s.is_empty() && !s.contains(','))
                    .ok_or_else(|| bad(full, "expected a non-empty name without commas"))?
                    .to_string()
            }
            ("world", "first_frame") => self.pool.first_frame = u32_of(v, full, 0)?,
            ("world", "frames") => self.pool.frames = u32_of(v, full, 1)?,

            ("factory", "kind") => {
                self.factory.kind = TrackletKind::from_index(u8::try_from(int(v, full, 1)?).unwrap_or(u8::MAX))?
            }
            ("factory", "M") => self.factory.set_size = usize_of(v, full, 1)?,
            ("factory", "T") => self.factory.memory = usize_of(v, full, 1)?,
            ("factory", "F") => self.factory.max_gap = u32_of(v, full, 1)?,
            ("factory", "S") => self.factory.max_steps = usize_of(v, full, 0)?,
            ("factory", "N") => self.factory.max_intruders = usize_of(v, full, 0)?,
            ("factory", "seed") => self.seeds.factory = Some(u64_of(v, full)?),

            ("model", "H") => self.model.hidden = usize_of(v, full, 1)?,
            ("model", "head_hidden") => self.model.head_hidden = usize_of(v, full, 0)?,

            ("train", "B") => self.train.batch_size = usize_of(v, full, 1)?,
            ("train", "IT") => self.train.iterations = usize_of(v, full, 0)?,
            ("train", "lr") => self.train.learning_rate = float(v, full)?,
            ("train", "epsilon") => self.train.epsilon = float(v, full)?,
            ("train", "init_scale") => self.train.init_scale = float(v, full)?,
            ("train", "seed") => self.seeds.train = Some(u64_of(v, full)?),

            ("grid", "test_M") => self.grid.test_size = usize_of(v, full, 1)?,
            ("grid", "train_fraction") => self.grid.train_fraction = float(v, full)?,

            ("tracker", "lambda") => self.tracker.appearance_weight = float(v, full)?,
            ("tracker", "th_assoc") => self.tracker.assoc_threshold = float(v, full)?,
            ("tracker", "g_iou") => self.tracker.iou_gate = float(v, full)?,
            ("tracker", "max_age") => self.tracker.max_age = u32_of(v, full, 1)?,
            ("tracker", "confirm_hits") => self.tracker.confirm_hits = u32_of(v, full, 1)?,
            ("tracker", "min_conf") => self.tracker.min_confidence = float(v, full)?,

            ("metrics", "iou") => self.metrics.iou_threshold = float(v, full)?,
            ("metrics", "exclude_invalid") => self.metrics.exclude_invalid = boolean(v, full)?,

            ("world" | "factory" | "model" | "train" | "grid" | "tracker" | "metrics", _) => {
                return Err(bad(full, "unknown key"))
            }
            _ => return Err(bad(section, "unknown section")),
        }
        Ok(())
    }

    /// Makes `seed` the seed of every module, overriding the file.
    pub fn force_seed(&mut self, seed: u64) {
        self.seeds = SeedOverrides {
            global: Some(seed),
            world: Some(seed),
            factory: Some(seed),
            train: Some(seed),
        };
    }

    /// Copies the effective seeds into the module configurations: a section
    /// seed wins over the top-level seed, which wins over 0.
    pub fn resolve_seeds(&mut self) {
        let g = self.seeds.global.unwrap_or(0);
        self.world.seed = self.seeds.world.unwrap_or(g);
        self.factory.seed = self.seeds.factory.unwrap_or(g);
        self.train.seed = self.seeds.train.unwrap_or(g);
    }

    pub fn validate_grid(&self) -> Result<()> {
        let f = self.grid.train_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::InvalidConfig("train_fraction ∈ (0,1)".into()));
        }
        Ok(())
    }

    /// Readable dump of the resolved values, used in manifests.
    pub fn describe(&self) -> String {
        let w = &self.world;
        let f = &self.factory;
        let t = &self.train;
        let k = &self.tracker;
        format!(
            "world: identities={} separation={} noise={} drift={} dim={} seed={} sequence={} first_frame={} frames={}\n\
             factory: kind={} M={} T={} F={} S={} N={} seed={}\n\
             model: H={} head_hidden={}\n\
             train: B={} IT={} lr={} epsilon={} init_scale={} seed={}\n\
             grid: test_M={} train_fraction={}\n\
             tracker: lambda={} th_assoc={} g_iou={} max_age={} confirm_hits={} min_conf={}\n\
             metrics: iou={} exclude_invalid={}\n",
            w.identities, w.separation, w.noise, w.drift, w.dim, w.seed,
            self.pool.sequence, self.pool.first_frame, self.pool.frames,
            f.kind.index(), f.set_size, f.memory, f.max_gap, f.max_steps, f.max_intruders, f.seed,
            self.model.hidden, self.model.head_hidden,
            t.batch_size, t.iterations, t.learning_rate, t.epsilon, t.init_scale, t.seed,
            self.grid.test_size, self.grid.train_fraction,
            k.appearance_weight, k.assoc_threshold, k.iou_gate, k.max_age, k.confirm_hits, k.min_confidence,
            self.metrics.iou_threshold, self.metrics.exclude_invalid,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_seeds() {
        let mut s = Settings::parse(
            "seed = 4\n[factory]\nkind = 3\nM = 10\nseed = 9\n[tracker]\nlambda = 0.5\n",
        )
        .unwrap();
        s.resolve_seeds();
        assert_eq!(s.factory.kind, TrackletKind::III);
        assert_eq!(s.factory.set_size, 10);
        assert_eq!((s.factory.seed, s.world.seed, s.train.seed), (9, 4, 4));
        assert_eq!(s.tracker.appearance_weight, 0.5);
    }

    #[test]
    fn unknown_keys_and_constraints() {
        assert!(Settings::parse("[factory]\nQ = 1\n").is_err());
        assert!(Settings::parse("[nope]\nx = 1\n").is_err());
        let e = Settings::parse("[factory]\nT = -1\n").unwrap_err();
        assert!(e.to_string().contains("T ≥ 1"), "{e}");
    }
}
