//! Single-layer LSTM over an agent's feature history.
//!
//! Gates are stacked row-wise in the order input, forget, output, candidate:
//!
//! ```text
//! a = W_x x_t + W_h h_{t-1} + b
//! i = σ(a_i)  f = σ(a_f)  o = σ(a_o)  g = tanh(a_g)
//! c_t = f ⊙ c_{t-1} + i ⊙ g
//! h_t = o ⊙ tanh(c_t)
//! ```
//!
//! The recurrence starts from zero hidden and cell states and consumes the
//! history in stored order (most recent observation first).

use super::tensor::{sigmoid, Matrix};
use crate::embedding::FeatureVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// `4H x n`
    pub w_x: Matrix,
    /// `4H x H`
    pub w_h: Matrix,
    /// `4H`
    pub bias: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmParams {
            w_x: Matrix::zeros(4 * hidden, input),
            w_h: Matrix::zeros(4 * hidden, hidden),
            bias: vec![0.0; 4 * hidden],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_x.cols
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_h.cols
    }
}

#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Gate activations `[i, f, o, g]`, each of length H.
    pub gates: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct LstmCache {
    pub(crate) steps: Vec<StepCache>,
}

/// Runs the recurrence and returns the final hidden state (the agent feature).
pub fn lstm_forward(params: &LstmParams, history: &[&FeatureVector]) -> Result<(Vec<f64>, LstmCache)> {
    if history.is_empty() {
        return Err(Error::Empty("agent history"));
    }
    let n = params.input_dim();
    let hd = params.hidden_dim();
    let mut h = vec![0.0; hd];
    let mut c = vec![0.0; hd];
    let mut steps = Vec::with_capacity(history.len());

    for x in history {
        if x.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: x.dim(),
            });
        }
        let x = x.as_slice();
        let mut a = params.bias.clone();
        params.w_x.matvec_acc(x, &mut a);
        params.w_h.matvec_acc(&h, &mut a);

        let mut gates = vec![0.0; 4 * hd];
        for k in 0..3 * hd {
            gates[k] = sigmoid(a[k]);
        }
        for k in 3 * hd..4 * hd {
            gates[k] = a[k].tanh();
        }

        let mut c_new = vec![0.0; hd];
        let mut tanh_c = vec![0.0; hd];
        let mut h_new = vec![0.0; hd];
        for j in 0..hd {
            let (i, f, o, g) = (gates[j], gates[hd + j], gates[2 * hd + j], gates[3 * hd + j]);
            c_new[j] = f * c[j] + i * g;
            tanh_c[j] = c_new[j].tanh();
            h_new[j] = o * tanh_c[j];
        }

        steps.push(StepCache {
            x: x.to_vec(),
            h_prev: std::mem::replace(&mut h, h_new),
            c_prev: std::mem::replace(&mut c, c_new),
            gates,
            tanh_c,
        });
    }
    Ok((h, LstmCache { steps }))
}

/// Backpropagation through time from `d_out` (gradient w.r.t. the final
/// hidden state), accumulating into `grads`.
pub(crate) fn lstm_backward(params: &LstmParams, cache: &LstmCache, d_out: &[f64], grads: &mut LstmParams) {
    let hd = params.hidden_dim();
    let mut dh = d_out.to_vec();
    let mut dc = vec![0.0; hd];
    let mut da = vec![0.0; 4 * hd];

    for step in cache.steps.iter().rev() {
        let g = &step.gates;
        for j in 0..hd {
            let (i, f, o, cand) = (g[j], g[hd + j], g[2 * hd + j], g[3 * hd + j]);
            let tc = step.tanh_c[j];
            let d_o = dh[j] * tc;
            let d_c = dc[j] + dh[j] * o * (1.0 - tc * tc);
            let d_f = d_c * step.c_prev[j];
            let d_i = d_c * cand;
            let d_g = d_c * i;
            dc[j] = d_c * f;

            da[j] = d_i * i * (1.0 - i);
            da[hd + j] = d_f * f * (1.0 - f);
            da[2 * hd + j] = d_o * o * (1.0 - o);
            da[3 * hd + j] = d_g * (1.0 - cand * cand);
        }
        grads.w_x.outer_acc(&da, &step.x);
        grads.w_h.outer_acc(&da, &step.h_prev);
        grads.bias.iter_mut().zip(&da).for_each(|(b, d)| *b += d);

        dh.iter_mut().for_each(|v| *v = 0.0);
        params.w_h.matvec_t_acc(&da, &mut dh);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_params(rng: &mut ChaCha8Rng, n: usize, h: usize) -> LstmParams {
        LstmParams {
            w_x: Matrix::from_fn(4 * h, n, |_, _| rng.gen_range(-0.5..0.5)),
            w_h: Matrix::from_fn(4 * h, h, |_, _| rng.gen_range(-0.5..0.5)),
            bias: (0..4 * h).map(|_| rng.gen_range(-0.5..0.5)).collect(),
        }
    }

    fn random_feature(rng: &mut ChaCha8Rng, n: usize) -> FeatureVector {
        FeatureVector::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let p = LstmParams::zeros(4, 3);
        let x = FeatureVector::new(vec![1.0, -2.0, 3.0, 0.5]).unwrap();
        let (h, _) = lstm_forward(&p, &[&x, &x, &x]).unwrap();
        assert_eq!(h, vec![0.0; 3]);
    }

    #[test]
    fn one_step_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (n, hd) = (5, 3);
        let p = random_params(&mut rng, n, hd);
        let x = random_feature(&mut rng, n);
        let (h, _) = lstm_forward(&p, &[&x]).unwrap();

        // with h0 = c0 = 0: c = σ(a_i) tanh(a_g), h = σ(a_o) tanh(c)
        for j in 0..hd {
            let pre = |gate: usize| {
                let r = gate * hd + j;
                p.bias[r] + (0..n).map(|k| p.w_x.row(r)[k] * x.as_slice()[k]).sum::<f64>()
            };
            let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
            let c = sig(pre(0)) * pre(3).tanh();
            let expected = sig(pre(2)) * c.tanh();
            assert!((h[j] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn order_matters() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_params(&mut rng, 6, 4);
        let a = random_feature(&mut rng, 6);
        let b = random_feature(&mut rng, 6);
        let (h1, _) = lstm_forward(&p, &[&a, &b]).unwrap();
        let (h2, _) = lstm_forward(&p, &[&b, &a]).unwrap();
        assert!(h1.iter().zip(&h2).any(|(x, y)| (x - y).abs() > 1e-9));
    }

    #[test]
    fn empty_and_mismatched_history() {
        let p = LstmParams::zeros(4, 2);
        assert!(lstm_forward(&p, &[]).is_err());
        let x = FeatureVector::zeros(3);
        assert!(matches!(
            lstm_forward(&p, &[&x]),
            Err(Error::DimensionMismatch { expected: 4, found: 3 })
        ));
    }
}
