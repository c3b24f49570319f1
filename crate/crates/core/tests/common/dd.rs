//! Double-double reference forward pass of the scorer, used to take finite
//! differences without f64 cancellation error.

use std::ops::{Add, Div, Mul, Neg, Sub};

use msdoas::model::{MsDoasModel, PROB_CLAMP};
use msdoas::tracklet::FeatureTracklet;

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

const LN2: Dd = Dd {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd { hi: s, lo: b - (s - a) }
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn scale_pow2(self, k: i32) -> Dd {
        let s = 2f64.powi(k);
        Dd { hi: self.hi * s, lo: self.lo * s }
    }

    pub fn exp(self) -> Dd {
        const SQUARINGS: i32 = 10;
        let k = (self.hi / LN2.hi).round();
        let r = (self - LN2 * k).scale_pow2(-SQUARINGS);
        // Taylor series of exp(r) - 1 for |r| < 4e-4.
        let mut term = r;
        let mut sum = r;
        for j in 2..=12 {
            term = term * r / f64::from(j);
            sum = sum + term;
        }
        for _ in 0..SQUARINGS {
            sum = sum * (sum + 2.0);
        }
        (sum + 1.0).scale_pow2(k as i32)
    }

    pub fn ln(self) -> Dd {
        let mut y = Dd::from(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - 1.0;
        }
        y
    }

    pub fn sigmoid(self) -> Dd {
        Dd::ONE / ((-self).exp() + 1.0)
    }

    pub fn tanh(self) -> Dd {
        let e = (Dd::from(-2.0 * self.hi.signum()) * self).exp();
        let t = (Dd::ONE - e) / (e + 1.0);
        if self.hi < 0.0 {
            -t
        } else {
            t
        }
    }
}

impl From<f64> for Dd {
    fn from(hi: f64) -> Dd {
        Dd { hi, lo: 0.0 }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let v = quick_two_sum(s, e + t);
        quick_two_sum(v.hi, v.lo + f)
    }
}

impl Add<f64> for Dd {
    type Output = Dd;
    fn add(self, b: f64) -> Dd {
        let (s, e) = two_sum(self.hi, b);
        quick_two_sum(s, e + self.lo)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + -b
    }
}

impl Sub<f64> for Dd {
    type Output = Dd;
    fn sub(self, b: f64) -> Dd {
        self + -b
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, b: Dd) -> Dd {
        let p = self.hi * b.hi;
        let e = self.hi.mul_add(b.hi, -p);
        quick_two_sum(p, e + (self.hi * b.lo + self.lo * b.hi))
    }
}

impl Mul<f64> for Dd {
    type Output = Dd;
    fn mul(self, b: f64) -> Dd {
        let p = self.hi * b;
        let e = self.hi.mul_add(b, -p);
        quick_two_sum(p, e + self.lo * b)
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b * q1;
        let q2 = r.hi / b.hi;
        let r = r - b * q2;
        let q3 = r.hi / b.hi;
        let q = quick_two_sum(q1, q2);
        q + q3
    }
}

impl Div<f64> for Dd {
    type Output = Dd;
    fn div(self, b: f64) -> Dd {
        self / Dd::from(b)
    }
}

/// Parameter tensors of a model, in declaration order, as double-doubles.
#[derive(Debug, Clone)]
pub struct RefModel {
    n: usize,
    hidden: usize,
    head_hidden: usize,
    pub tensors: Vec<Vec<Dd>>,
}

/// One tracklet with the input half of every LSTM preactivation precomputed.
struct Prepared<'a> {
    tracklet: &'a FeatureTracklet,
    /// `W_x x_t + b` per history step.
    pre: Vec<Vec<Dd>>,
}

impl RefModel {
    pub fn new(model: &MsDoasModel) -> Self {
        RefModel {
            n: model.config.feature_dim,
            hidden: model.config.hidden,
            head_hidden: model.config.head_hidden,
            tensors: model
                .params
                .tensors()
                .iter()
                .map(|t| t.2.iter().map(|&v| Dd::from(v)).collect())
                .collect(),
        }
    }

    fn prepare<'a>(&self, t: &'a FeatureTracklet) -> Prepared<'a> {
        let (wx, b) = (&self.tensors[0], &self.tensors[2]);
        let pre = t
            .history_features()
            .iter()
            .map(|x| {
                let x = x.as_slice();
                (0..4 * self.hidden)
                    .map(|r| {
                        let mut a = b[r];
                        for (c, &xc) in x.iter().enumerate() {
                            a = a + wx[r * self.n + c] * xc;
                        }
                        a
                    })
                    .collect()
            })
            .collect();
        Prepared { tracklet: t, pre }
    }

    fn agent(&self, p: &Prepared) -> Vec<Dd> {
        let hd = self.hidden;
        let wh = &self.tensors[1];
        let mut h = vec![Dd::ZERO; hd];
        let mut c = vec![Dd::ZERO; hd];
        for pre in &p.pre {
            let a: Vec<Dd> = (0..4 * hd)
                .map(|r| {
                    let mut a = pre[r];
                    for (j, &hj) in h.iter().enumerate() {
                        a = a + wh[r * hd + j] * hj;
                    }
                    a
                })
                .collect();
            for j in 0..hd {
                let i = a[j].sigmoid();
                let f = a[hd + j].sigmoid();
                let o = a[2 * hd + j].sigmoid();
                let g = a[3 * hd + j].tanh();
                c[j] = f * c[j] + i * g;
                h[j] = o * c[j].tanh();
            }
        }
        h
    }

    fn loss_one(&self, p: &Prepared, agent: &[Dd]) -> Dd {
        let mut input: Vec<Dd> = p
            .tracklet
            .detection()
            .feature
            .as_slice()
            .iter()
            .map(|&v| Dd::from(v))
            .collect();
        input.extend_from_slice(agent);
        let dense = |w: &[Dd], b: &[Dd], x: &[Dd]| -> Vec<Dd> {
            b.iter()
                .enumerate()
                .map(|(r, &br)| {
                    let mut s = br;
                    for (c, &xc) in x.iter().enumerate() {
                        s = s + w[r * x.len() + c] * xc;
                    }
                    s
                })
                .collect()
        };
        let z = if self.head_hidden > 0 {
            let u: Vec<Dd> = dense(&self.tensors[3], &self.tensors[4], &input)
                .into_iter()
                .map(Dd::tanh)
                .collect();
            dense(&self.tensors[5], &self.tensors[6], &u)
        } else {
            dense(&self.tensors[3], &self.tensors[4], &input)
        };
        let nz0 = Dd::ONE / ((z[1] - z[0]).exp() + 1.0);
        let lo = Dd::from(PROB_CLAMP);
        let hi = Dd::ONE - lo;
        let p0 = if nz0 < lo {
            lo
        } else if nz0 > hi {
            hi
        } else {
            nz0
        };
        if p.tracklet.label == 0 {
            -p0.ln()
        } else {
            -(Dd::ONE - p0).ln()
        }
    }

    /// Mean cross-entropy over the batch.
    pub fn batch_loss(&self, batch: &[FeatureTracklet]) -> Dd {
        let mut sum = Dd::ZERO;
        for t in batch {
            let p = self.prepare(t);
            sum = sum + self.loss_one(&p, &self.agent(&p));
        }
        sum / batch.len() as f64
    }

    /// Central difference `(L(θ + h e_k) - L(θ - h e_k)) / 2h` for every
    /// parameter, tensor by tensor.
    pub fn central_differences(&mut self, batch: &[FeatureTracklet], h: f64) -> Vec<Vec<f64>> {
        let prepared: Vec<Prepared> = batch.iter().map(|t| self.prepare(t)).collect();
        let agents: Vec<Vec<Dd>> = prepared.iter().map(|p| self.agent(p)).collect();
        let m = batch.len() as f64;
        let n = self.n;
        let mut out = Vec::with_capacity(self.tensors.len());

        for ti in 0..self.tensors.len() {
            let mut grads = Vec::with_capacity(self.tensors[ti].len());
            for k in 0..self.tensors[ti].len() {
                let orig = self.tensors[ti][k];
                let side = |delta: f64, this: &mut RefModel| -> Dd {
                    this.tensors[ti][k] = orig + delta;
                    let mut sum = Dd::ZERO;
                    for (p, agent) in prepared.iter().zip(&agents) {
                        let loss = match ti {
                            // W_x and the bias enter only through one preactivation row.
                            0 | 2 => {
                                let (row, col) = if ti == 0 { (k / n, Some(k % n)) } else { (k, None) };
                                let hist = p.tracklet.history_features();
                                let pre = p
                                    .pre
                                    .iter()
                                    .zip(&hist)
                                    .map(|(v, x)| {
                                        let mut v = v.clone();
                                        let shift = match col {
                                            Some(c) => Dd::from(delta) * x.as_slice()[c],
                                            None => Dd::from(delta),
                                        };
                                        v[row] = v[row] + shift;
                                        v
                                    })
                                    .collect();
                                let q = Prepared { tracklet: p.tracklet, pre };
                                this.loss_one(&q, &this.agent(&q))
                            }
                            1 => this.loss_one(p, &this.agent(p)),
                            _ => this.loss_one(p, agent),
                        };
                        sum = sum + loss;
                    }
                    sum / m
                };
                let up = side(h, self);
                let down = side(-h, self);
                self.tensors[ti][k] = orig;
                grads.push(((up - down) / (2.0 * h)).to_f64());
            }
            out.push(grads);
        }
        out
    }
}
