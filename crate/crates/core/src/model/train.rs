//! Mini-batch training over feature tracklets with Adagrad updates.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{MsDoasModel, Params};
use crate::error::{Error, Result};
use crate::tracklet::FeatureTracklet;

/// Samples per gradient chunk. Chunks are reduced in index order, so the
/// result does not depend on the number of worker threads.
const CHUNK: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Multiplier of `1 / sqrt(fan_in)` for the initial weight range.
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            iterations: 2000,
            learning_rate: 0.1,
            epsilon: 1e-8,
            seed: 0,
            init_scale: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("B ≥ 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("lr > 0".into()));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::InvalidConfig("epsilon ≥ 0".into()));
        }
        Ok(())
    }
}

/// Accumulated squared gradients per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdagradState {
    pub accum: Params,
    pub learning_rate: f64,
    pub epsilon: f64,
}

impl AdagradState {
    pub fn new(like: &Params, learning_rate: f64, epsilon: f64) -> Self {
        let mut accum = like.clone();
        accum.tensors_mut().into_iter().for_each(|t| t.fill(0.0));
        AdagradState {
            accum,
            learning_rate,
            epsilon,
        }
    }
}

/// `G += g*g; w -= lr * g / (sqrt(G) + eps)`, element-wise.
pub fn adagrad_update(params: &mut Params, state: &mut AdagradState, grads: &Params) {
    let lr = state.learning_rate;
    let eps = state.epsilon;
    let grads: Vec<&[f64]> = grads.tensors().into_iter().map(|t| t.2).collect();
    for ((w, acc), g) in params
        .tensors_mut()
        .into_iter()
        .zip(state.accum.tensors_mut())
        .zip(grads)
    {
        for ((w, a), &g) in w.iter_mut().zip(acc.iter_mut()).zip(g) {
            if g == 0.0 {
                continue;
            }
            *a += g * g;
            *w -= lr * g / (a.sqrt() + eps);
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MsDoasModel,
    /// Mean batch loss at each iteration, before that iteration's update.
    pub losses: Vec<f64>,
}

/// Runs `iterations` rounds of forward pass, loss, backpropagation, batch-mean
/// gradient and Adagrad update.
///
/// Batches are drawn without replacement from a per-epoch shuffle of the
/// training set.
pub fn train(model: MsDoasModel, tracklets: &[FeatureTracklet], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if cfg.iterations == 0 {
        return Ok(TrainOutcome {
            model,
            losses: Vec::new(),
        });
    }
    if tracklets.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if let Some(t) = tracklets.iter().find(|t| t.memory() != model.config.memory) {
        return Err(Error::LengthMismatch(format!(
            "tracklet memory {} vs model T={}",
            t.memory(),
            model.config.memory
        )));
    }

    let mut model = model;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = AdagradState::new(&model.params, cfg.learning_rate, cfg.epsilon);
    let mut order: Vec<usize> = (0..tracklets.len()).collect();
    let mut cursor = order.len();
    let mut losses = Vec::with_capacity(cfg.iterations);
    let mut batch: Vec<&FeatureTracklet> = Vec::with_capacity(cfg.batch_size);

    for it in 0..cfg.iterations {
        batch.clear();
        while batch.len() < cfg.batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            batch.push(&tracklets[order[cursor]]);
            cursor += 1;
        }

        let (loss, grads) = batch_gradient(&model, &batch)?;
        if !loss.is_finite() || !grads.all_finite() {
            return Err(Error::NonFiniteLoss {
                iteration: it,
                batch: it,
            });
        }
        losses.push(loss);
        adagrad_update(&mut model.params, &mut state, &grads);
    }
    Ok(TrainOutcome { model, losses })
}

fn batch_gradient(model: &MsDoasModel, batch: &[&FeatureTracklet]) -> Result<(f64, Params)> {
    let w = 1.0 / batch.len() as f64;
    let partials: Vec<(f64, Params)> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = Params::zeros(&model.config);
            let mut loss = 0.0;
            for t in chunk {
                loss += model.accumulate_gradient(t, w, &mut g)?;
            }
            Ok((loss, g))
        })
        .collect::<Result<_>>()?;

    let mut parts = partials.into_iter();
    let (mut loss, mut grads) = parts.next().expect("non-empty batch");
    for (l, g) in parts {
        loss += l;
        grads.add_scaled(1.0, &g);
    }
    Ok((loss * w, grads))
}
