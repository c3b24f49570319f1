//! The multi-shot appearance similarity scorer.
//!
//! An LSTM summarises the agent's last `T` appearance features into an agent
//! feature. That feature is concatenated with the detection feature and fed
//! to a fully connected head producing two logits `(Z0, Z1)`; their softmax
//! `(NZ0, NZ1)` gives the probabilities of "no match" and "match". `NZ1` is the
//! similarity score used by the tracker.
//!
//! The head has an optional tanh hidden layer (`head_hidden > 0`, the default).
//! With `head_hidden = 0` the head is a single affine map, whose logit
//! difference splits into a detection-only term plus an agent-only term and
//! therefore cannot express a match/mismatch decision over several identities.

mod io;
mod lstm;
mod tensor;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embedding::FeatureVector;
use crate::error::{Error, Result};
use crate::tracklet::FeatureTracklet;

pub use io::{load_model, save_model, FORMAT_VERSION};
pub use lstm::{lstm_forward, LstmCache, LstmParams};
pub use tensor::Matrix;
pub use train::{adagrad_update, train, AdagradState, TrainConfig, TrainOutcome};

/// Number of output classes.
pub const CLASSES: usize = 2;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before taking logs.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    /// Feature dimension `n`.
    pub feature_dim: usize,
    /// LSTM hidden size `H`.
    pub hidden: usize,
    /// Memory length `T`.
    pub memory: usize,
    /// Width of the head's hidden layer; 0 for a single affine layer.
    pub head_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            feature_dim: crate::embedding::DEFAULT_FEATURE_DIM,
            hidden: 128,
            memory: 5,
            head_hidden: 64,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 || self.hidden == 0 || self.memory == 0 {
            return Err(Error::InvalidConfig(
                "model n, H and T must all be positive".into(),
            ));
        }
        Ok(())
    }

    fn head_input(&self) -> usize {
        self.feature_dim + self.hidden
    }
}

/// Fully connected layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            weight: Matrix::zeros(outputs, inputs),
            bias: vec![0.0; outputs],
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.bias.clone();
        self.weight.matvec_acc(x, &mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub hidden: Option<Dense>,
    /// `2 x (n + H)` without a hidden layer, `2 x head_hidden` with one.
    pub output: Dense,
}

/// All trainable parameters. Gradients and optimizer state use the same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub lstm: LstmParams,
    pub head: HeadParams,
}

impl Params {
    pub fn zeros(config: &ModelConfig) -> Self {
        let head = if config.head_hidden > 0 {
            HeadParams {
                hidden: Some(Dense::zeros(config.head_input(), config.head_hidden)),
                output: Dense::zeros(config.head_hidden, CLASSES),
            }
        } else {
            HeadParams {
                hidden: None,
                output: Dense::zeros(config.head_input(), CLASSES),
            }
        };
        Params {
            lstm: LstmParams::zeros(config.feature_dim, config.hidden),
            head,
        }
    }

    /// Tensor names, shapes `(rows, cols)` and values in declaration order.
    pub fn tensors(&self) -> Vec<(&'static str, (usize, usize), &[f64])> {
        let l = &self.lstm;
        let mut v = vec![
            ("lstm.w_x", (l.w_x.rows, l.w_x.cols), l.w_x.data.as_slice()),
            ("lstm.w_h", (l.w_h.rows, l.w_h.cols), l.w_h.data.as_slice()),
            ("lstm.bias", (l.bias.len(), 1), l.bias.as_slice()),
        ];
        if let Some(h) = &self.head.hidden {
            v.push(("head.hidden.weight", (h.weight.rows, h.weight.cols), &h.weight.data));
            v.push(("head.hidden.bias", (h.bias.len(), 1), &h.bias));
        }
        let o = &self.head.output;
        v.push(("head.output.weight", (o.weight.rows, o.weight.cols), &o.weight.data));
        v.push(("head.output.bias", (o.bias.len(), 1), &o.bias));
        v
    }

    /// Mutable views in the same order as [`Params::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = vec![
            &mut self.lstm.w_x.data,
            &mut self.lstm.w_h.data,
            &mut self.lstm.bias,
        ];
        if let Some(h) = &mut self.head.hidden {
            v.push(&mut h.weight.data);
            v.push(&mut h.bias);
        }
        v.push(&mut self.head.output.weight.data);
        v.push(&mut self.head.output.bias);
        v
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|t| t.2.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: f64, other: &Params) {
        let src: Vec<&[f64]> = other.tensors().into_iter().map(|t| t.2).collect();
        for (dst, src) in self.tensors_mut().into_iter().zip(src) {
            tensor::axpy(alpha, src, dst);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.2.iter().all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MsDoasModel {
    pub config: ModelConfig,
    pub params: Params,
}

/// Logits and their softmax.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub logits: [f64; CLASSES],
    pub probs: [f64; CLASSES],
}

impl Scores {
    /// `NZ1`, the match probability.
    pub fn similarity(&self) -> f64 {
        self.probs[1]
    }
}

/// Intermediate values kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    lstm: LstmCache,
    head_input: Vec<f64>,
    head_hidden: Option<Vec<f64>>,
}

/// Two-class softmax, stable for large logits.
pub fn softmax(z: [f64; CLASSES]) -> [f64; CLASSES] {
    let m = z[0].max(z[1]);
    let e0 = (z[0] - m).exp();
    let e1 = (z[1] - m).exp();
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

/// Binary cross-entropy written over class 0, whose indicator is `1 - y`.
pub fn cross_entropy(nz0: f64, label: u8) -> f64 {
    let p = nz0.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let y0 = 1.0 - f64::from(label);
    -y0 * p.ln() - (1.0 - y0) * (1.0 - p).ln()
}

impl MsDoasModel {
    /// Random initialisation: uniform in `[-s, s]` with `s = scale / sqrt(fan_in)`,
    /// forget-gate biases set to 1.
    pub fn init(config: ModelConfig, seed: u64, scale: f64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Params::zeros(&config);

        let lstm_fan = (config.feature_dim + config.hidden) as f64;
        let head_fan = config.head_input() as f64;
        let out_fan = if config.head_hidden > 0 {
            config.head_hidden as f64
        } else {
            head_fan
        };
        let mut fill = |xs: &mut [f64], fan: f64| {
            let s = scale / fan.sqrt();
            xs.iter_mut().for_each(|x| *x = rng.gen_range(-s..=s));
        };
        fill(&mut params.lstm.w_x.data, lstm_fan);
        fill(&mut params.lstm.w_h.data, lstm_fan);
        if let Some(h) = &mut params.head.hidden {
            fill(&mut h.weight.data, head_fan);
        }
        fill(&mut params.head.output.weight.data, out_fan);
        let hd = config.hidden;
        params.lstm.bias[hd..2 * hd].iter_mut().for_each(|b| *b = 1.0);

        Ok(MsDoasModel { config, params })
    }

    pub fn from_params(config: ModelConfig, params: Params) -> Result<Self> {
        config.validate()?;
        let expected = Params::zeros(&config);
        let shapes = |p: &Params| p.tensors().iter().map(|t| (t.0, t.1)).collect::<Vec<_>>();
        if shapes(&expected) != shapes(&params) {
            return Err(Error::ShapeMismatch(
                "parameter tensors do not match the model configuration".into(),
            ));
        }
        Ok(MsDoasModel { config, params })
    }

    /// Errors unless the model consumes features of dimension `n`.
    pub fn expect_feature_dim(&self, n: usize) -> Result<()> {
        if self.config.feature_dim != n {
            return Err(Error::ShapeMismatch(format!(
                "model expects n={}, features have n={n}",
                self.config.feature_dim
            )));
        }
        Ok(())
    }

    fn check_inputs(&self, detection: &FeatureVector, history: &[&FeatureVector]) -> Result<()> {
        if history.is_empty() {
            return Err(Error::Empty("agent history"));
        }
        if history.len() > self.config.memory {
            return Err(Error::LengthMismatch(format!(
                "history of {} exceeds memory T={}",
                history.len(),
                self.config.memory
            )));
        }
        if detection.dim() != self.config.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.config.feature_dim,
                found: detection.dim(),
            });
        }
        Ok(())
    }

    /// Scores a detection against an agent history (most recent first).
    pub fn forward(
        &self,
        detection: &FeatureVector,
        history: &[&FeatureVector],
    ) -> Result<(Scores, ForwardCache)> {
        self.check_inputs(detection, history)?;
        let (agent, lstm) = lstm_forward(&self.params.lstm, history)?;
        let mut head_input = detection.as_slice().to_vec();
        head_input.extend_from_slice(&agent);

        let (logits, head_hidden) = match &self.params.head.hidden {
            Some(layer) => {
                let mut u = layer.apply(&head_input);
                u.iter_mut().for_each(|v| *v = v.tanh());
                (self.params.head.output.apply(&u), Some(u))
            }
            None => (self.params.head.output.apply(&head_input), None),
        };
        let logits = [logits[0], logits[1]];
        Ok((
            Scores {
                logits,
                probs: softmax(logits),
            },
            ForwardCache {
                lstm,
                head_input,
                head_hidden,
            },
        ))
    }

    /// Match probability `NZ1` in `[0, 1]`.
    pub fn msdoas(&self, detection: &FeatureVector, history: &[&FeatureVector]) -> Result<f64> {
        Ok(self.forward(detection, history)?.0.similarity())
    }

    fn tracklet_inputs<'a>(&self, t: &'a FeatureTracklet) -> Result<(&'a FeatureVector, Vec<&'a FeatureVector>)> {
        if t.memory() != self.config.memory {
            return Err(Error::LengthMismatch(format!(
                "tracklet memory {} vs model T={}",
                t.memory(),
                self.config.memory
            )));
        }
        Ok((&t.detection().feature, t.history_features()))
    }

    /// Cross-entropy of one tracklet (component 0 as detection, 1..=T as history).
    pub fn tracklet_loss(&self, t: &FeatureTracklet) -> Result<f64> {
        let (d, h) = self.tracklet_inputs(t)?;
        let (s, _) = self.forward(d, &h)?;
        Ok(cross_entropy(s.probs[0], t.label))
    }

    /// `NZ1` for a tracklet.
    pub fn tracklet_score(&self, t: &FeatureTracklet) -> Result<f64> {
        let (d, h) = self.tracklet_inputs(t)?;
        self.msdoas(d, &h)
    }

    /// Mean cross-entropy over the batch.
    pub fn batch_loss(&self, batch: &[FeatureTracklet]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let mut sum = 0.0;
        for t in batch {
            sum += self.tracklet_loss(t)?;
        }
        Ok(sum / batch.len() as f64)
    }

    /// Accumulates `weight * d loss(t) / d params` into `grads`; returns the loss.
    pub fn accumulate_gradient(&self, t: &FeatureTracklet, weight: f64, grads: &mut Params) -> Result<f64> {
        let (d, h) = self.tracklet_inputs(t)?;
        let (scores, cache) = self.forward(d, &h)?;
        let loss = cross_entropy(scores.probs[0], t.label);

        // softmax + cross-entropy: dZ = NZ - onehot(label)
        let y = f64::from(t.label);
        let dz = [weight * (scores.probs[0] - (1.0 - y)), weight * (scores.probs[1] - y)];

        let n = self.config.feature_dim;
        let mut d_input = vec![0.0; self.config.head_input()];
        let out_layer = &self.params.head.output;
        match (&self.params.head.hidden, &cache.head_hidden, &mut grads.head.hidden) {
            (Some(layer), Some(u), Some(g_layer)) => {
                grads.head.output.weight.outer_acc(&dz, u);
                let mut du = vec![0.0; u.len()];
                out_layer.weight.matvec_t_acc(&dz, &mut du);
                let da: Vec<f64> = du.iter().zip(u).map(|(d, u)| d * (1.0 - u * u)).collect();
                g_layer.weight.outer_acc(&da, &cache.head_input);
                g_layer.bias.iter_mut().zip(&da).for_each(|(b, d)| *b += d);
                layer.weight.matvec_t_acc(&da, &mut d_input);
            }
            (None, None, None) => {
                grads.head.output.weight.outer_acc(&dz, &cache.head_input);
                out_layer.weight.matvec_t_acc(&dz, &mut d_input);
            }
            _ => {
                return Err(Error::ShapeMismatch(
                    "gradient buffer layout differs from the model".into(),
                ))
            }
        }
        grads.head.output.bias.iter_mut().zip(dz).for_each(|(b, d)| *b += d);

        lstm::lstm_backward(&self.params.lstm, &cache.lstm, &d_input[n..], &mut grads.lstm);
        Ok(loss)
    }

    /// Exact gradient of [`MsDoasModel::batch_loss`]; returns `(loss, gradient)`.
    pub fn backward(&self, batch: &[FeatureTracklet]) -> Result<(f64, Params)> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let w = 1.0 / batch.len() as f64;
        let mut grads = Params::zeros(&self.config);
        let mut loss = 0.0;
        for t in batch {
            loss += self.accumulate_gradient(t, w, &mut grads)?;
        }
        Ok((loss * w, grads))
    }
}
