//! Multilayer perceptron regression: ReLU hidden layers, a linear output
//! unit, squared-error loss with an L2 penalty, trained by Adam on shuffled
//! mini-batches or by backtracking gradient descent on the full batch.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::params::{ParamValue, Params, Reader};
use crate::error::{Error, Result};
use crate::numerics::Standardizer;
use crate::rng;

pub const HYPERPARAMETERS: &[&str] = &[
    "hidden",
    "alpha",
    "learning_rate",
    "batch_size",
    "max_epochs",
    "early_stopping",
    "validation_fraction",
    "patience",
    "tol",
];

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
const DEFAULT_BATCH: usize = 200;
/// Sufficient-decrease constant for the full-batch line search.
const ARMIJO_C: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BatchSize {
    /// `min(200, n)` rows per Adam step.
    Auto,
    Rows(usize),
    /// Full-batch gradient descent with Armijo backtracking.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub alpha: f64,
    pub learning_rate: f64,
    pub batch_size: BatchSize,
    pub max_epochs: usize,
    pub early_stopping: bool,
    pub validation_fraction: f64,
    pub patience: usize,
    /// Relative improvement a monitored loss must make to reset patience.
    pub tol: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: vec![100],
            alpha: 1e-4,
            learning_rate: 1e-3,
            batch_size: BatchSize::Auto,
            max_epochs: 200,
            early_stopping: true,
            validation_fraction: 0.1,
            patience: 10,
            tol: 1e-4,
        }
    }
}

fn parse_hidden(v: &ParamValue) -> Option<Vec<usize>> {
    let layers = match v {
        ParamValue::Str(s) => s.split(',').map(|p| p.trim().parse::<usize>().ok()).collect::<Option<Vec<_>>>()?,
        other => vec![other.as_usize()?],
    };
    (!layers.is_empty() && layers.iter().all(|&h| h > 0)).then_some(layers)
}

impl MlpParams {
    pub fn from_params(params: &Params) -> Result<Self> {
        let r = Reader::new("mlp", params, HYPERPARAMETERS)?;
        let d = MlpParams::default();
        let hidden = match r.raw("hidden") {
            None => d.hidden,
            Some(v) => parse_hidden(v).ok_or_else(|| {
                Error::InvalidArgument(format!("mlp hidden must be a positive integer or a list like \"64,32\", got {v}"))
            })?,
        };
        let batch_size = match r.raw("batch_size") {
            None => d.batch_size,
            Some(ParamValue::Str(s)) if s == "auto" => BatchSize::Auto,
            Some(ParamValue::Str(s)) if s == "full" => BatchSize::Full,
            Some(_) => BatchSize::Rows(r.usize("batch_size", 0)?.max(1)),
        };
        let validation_fraction = r.f64("validation_fraction", d.validation_fraction)?;
        if !(0.0..1.0).contains(&validation_fraction) {
            return Err(Error::InvalidArgument("mlp validation_fraction must be in [0, 1)".into()));
        }
        let alpha = r.f64("alpha", d.alpha)?;
        if alpha < 0.0 {
            return Err(Error::InvalidArgument("mlp alpha must be >= 0".into()));
        }
        Ok(MlpParams {
            hidden,
            alpha,
            learning_rate: r.positive_f64("learning_rate", d.learning_rate)?,
            batch_size,
            max_epochs: r.usize("max_epochs", d.max_epochs)?.max(1),
            early_stopping: r.bool("early_stopping", d.early_stopping)?,
            validation_fraction,
            patience: r.usize("patience", d.patience)?.max(1),
            tol: r.f64("tol", d.tol)?.max(0.0),
        })
    }
}

/// Dense layer `out = W·in + b`, `W` stored row-major as `n_out × n_in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Network parameters in working form.
#[derive(Clone)]
struct Net {
    w: Vec<DMatrix<f64>>,
    b: Vec<DVector<f64>>,
}

impl Net {
    fn init(sizes: &[usize], r: &mut rng::Rng) -> Net {
        let mut w = Vec::new();
        let mut b = Vec::new();
        for pair in sizes.windows(2) {
            let (n_in, n_out) = (pair[0], pair[1]);
            let bound = (6.0 / (n_in + n_out) as f64).sqrt();
            w.push(DMatrix::from_fn(n_out, n_in, |_, _| r.random_range(-bound..bound)));
            b.push(DVector::from_fn(n_out, |_, _| r.random_range(-bound..bound)));
        }
        Net { w, b }
    }

    fn from_layers(layers: &[Layer]) -> Net {
        Net {
            w: layers.iter().map(|l| DMatrix::from_row_slice(l.n_out, l.n_in, &l.weights)).collect(),
            b: layers.iter().map(|l| DVector::from_column_slice(&l.bias)).collect(),
        }
    }

    fn to_layers(&self) -> Vec<Layer> {
        self.w
            .iter()
            .zip(&self.b)
            .map(|(w, b)| Layer {
                n_in: w.ncols(),
                n_out: w.nrows(),
                weights: w.transpose().as_slice().to_vec(),
                bias: b.as_slice().to_vec(),
            })
            .collect()
    }

    /// Activations per layer for a batch (rows are samples); the last entry
    /// is the `b × 1` output.
    fn forward(&self, x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let mut acts = Vec::with_capacity(self.w.len());
        let last = self.w.len() - 1;
        let mut a = x.clone();
        for (l, (w, b)) in self.w.iter().zip(&self.b).enumerate() {
            let mut z = &a * w.transpose();
            for mut row in z.row_iter_mut() {
                row += b.transpose();
            }
            if l < last {
                z.apply(|v| *v = v.max(0.0));
            }
            acts.push(z.clone());
            a = z;
        }
        acts
    }

    fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        self.forward(x).pop().map(|o| o.column(0).iter().copied().collect()).unwrap_or_default()
    }

    fn sq_weights(&self) -> f64 {
        self.w.iter().map(|w| w.norm_squared()).sum()
    }

    /// `(1/2n)Σ(ŷ-y)² + (α/2n)Σ‖W‖²`.
    fn loss(&self, x: &DMatrix<f64>, y: &[f64], alpha: f64) -> f64 {
        let n = y.len() as f64;
        let pred = self.predict(x);
        let sse: f64 = pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum();
        sse / (2.0 * n) + alpha * self.sq_weights() / (2.0 * n)
    }

    /// Loss and gradient by backpropagation.
    fn loss_grad(&self, x: &DMatrix<f64>, y: &[f64], alpha: f64) -> (f64, Net) {
        let n = y.len() as f64;
        let acts = self.forward(x);
        let out = &acts[acts.len() - 1];
        let mut delta = DMatrix::from_fn(y.len(), 1, |i, _| (out[(i, 0)] - y[i]) / n);
        let sse: f64 = (0..y.len()).map(|i| (out[(i, 0)] - y[i]).powi(2)).sum();
        let loss = sse / (2.0 * n) + alpha * self.sq_weights() / (2.0 * n);
        let depth = self.w.len();
        let mut gw = vec![DMatrix::zeros(0, 0); depth];
        let mut gb = vec![DVector::zeros(0); depth];
        for l in (0..depth).rev() {
            let input = if l == 0 { x } else { &acts[l - 1] };
            gw[l] = delta.transpose() * input + &self.w[l] * (alpha / n);
            gb[l] = delta.row_sum().transpose();
            if l > 0 {
                let mut back = &delta * &self.w[l];
                // ReLU derivative from the stored post-activation
                back.zip_apply(&acts[l - 1], |d, a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
        }
        (loss, Net { w: gw, b: gb })
    }

    fn axpy(&mut self, step: f64, g: &Net) {
        for (w, gw) in self.w.iter_mut().zip(&g.w) {
            w.zip_apply(gw, |a, g| *a += step * g);
        }
        for (b, gb) in self.b.iter_mut().zip(&g.b) {
            b.zip_apply(gb, |a, g| *a += step * g);
        }
    }

    fn norm_squared(&self) -> f64 {
        self.w.iter().map(|w| w.norm_squared()).sum::<f64>() + self.b.iter().map(|b| b.norm_squared()).sum::<f64>()
    }

    fn zeros_like(&self) -> Net {
        Net {
            w: self.w.iter().map(|w| DMatrix::zeros(w.nrows(), w.ncols())).collect(),
            b: self.b.iter().map(|b| DVector::zeros(b.len())).collect(),
        }
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w
            .iter_mut()
            .flat_map(|w| w.iter_mut())
            .chain(self.b.iter_mut().flat_map(|b| b.iter_mut()))
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.w.iter().flat_map(|w| w.iter()).chain(self.b.iter().flat_map(|b| b.iter()))
    }
}

struct Adam {
    m: Net,
    v: Net,
    t: i32,
}

impl Adam {
    fn step(&mut self, net: &mut Net, g: &Net, lr: f64) {
        self.t += 1;
        let lr_t = lr * (1.0 - BETA2.powi(self.t)).sqrt() / (1.0 - BETA1.powi(self.t));
        let grads: Vec<f64> = g.params().copied().collect();
        for ((m, v), gi) in self.m.params_mut().zip(self.v.params_mut()).zip(&grads) {
            *m = BETA1 * *m + (1.0 - BETA1) * gi;
            *v = BETA2 * *v + (1.0 - BETA2) * gi * gi;
        }
        let m: Vec<f64> = self.m.params().copied().collect();
        let v: Vec<f64> = self.v.params().copied().collect();
        for ((p, mi), vi) in net.params_mut().zip(&m).zip(&v) {
            *p -= lr_t * mi / (vi.sqrt() + ADAM_EPS);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub params: MlpParams,
    pub scaler: Standardizer,
    pub layers: Vec<Layer>,
    /// Training loss after each epoch (including the penalty).
    pub loss_curve: Vec<f64>,
    pub validation_curve: Vec<f64>,
    pub epochs: usize,
}

fn rows(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    x.select_rows(idx)
}

/// Patience bookkeeping on a monitored loss.
struct Monitor {
    best: f64,
    stale: usize,
}

impl Monitor {
    /// Records `value`; returns true when it is a new best.
    fn observe(&mut self, value: f64, tol: f64) -> bool {
        if value < self.best - tol * self.best.abs() {
            self.best = value;
            self.stale = 0;
            true
        } else {
            if value < self.best {
                self.best = value;
            }
            self.stale += 1;
            false
        }
    }
}

impl Mlp {
    pub fn fit(x: &DMatrix<f64>, y: &[f64], params: &MlpParams, seed: u64) -> Result<Mlp> {
        let n = x.nrows();
        if y.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: y.len() });
        }
        let scaler = Standardizer::fit(x)?;
        let xs = scaler.apply(x)?;
        let mut sizes = vec![x.ncols()];
        sizes.extend(&params.hidden);
        sizes.push(1);
        let mut net = Net::init(&sizes, &mut rng::rng(rng::derive_labeled(seed, "init")));

        let mut order: Vec<usize> = (0..n).collect();
        let mut split_rng = rng::rng(rng::derive_labeled(seed, "validation"));
        let n_val = if params.early_stopping {
            (params.validation_fraction * n as f64).ceil() as usize
        } else {
            0
        };
        // too little data for a meaningful held-out loss: monitor training loss
        let use_val = n_val >= 2 && n - n_val >= 2;
        let (train_idx, val_idx) = if use_val {
            order.shuffle(&mut split_rng);
            let (v, t) = order.split_at(n_val);
            let (mut t, mut v) = (t.to_vec(), v.to_vec());
            t.sort_unstable();
            v.sort_unstable();
            (t, v)
        } else {
            (order.clone(), Vec::new())
        };
        let xt = rows(&xs, &train_idx);
        let yt: Vec<f64> = train_idx.iter().map(|&i| y[i]).collect();
        let xv = rows(&xs, &val_idx);
        let yv: Vec<f64> = val_idx.iter().map(|&i| y[i]).collect();
        let nt = yt.len();

        let mut shuffle_rng = rng::rng(rng::derive_labeled(seed, "shuffle"));
        let mut adam = Adam {
            m: net.zeros_like(),
            v: net.zeros_like(),
            t: 0,
        };
        let mut step = params.learning_rate;
        let mut monitor = Monitor { best: f64::INFINITY, stale: 0 };
        let mut best_net = net.clone();
        let mut loss_curve = Vec::new();
        let mut validation_curve = Vec::new();
        let mut batch_order: Vec<usize> = (0..nt).collect();

        for _epoch in 0..params.max_epochs {
            let epoch_loss = match params.batch_size {
                BatchSize::Full => {
                    let (loss, g) = net.loss_grad(&xt, &yt, params.alpha);
                    let g2 = g.norm_squared();
                    if g2 == 0.0 {
                        loss_curve.push(loss);
                        break;
                    }
                    // Armijo backtracking from twice the last accepted step
                    let mut s = step * 2.0;
                    let mut accepted = None;
                    while s >= MIN_STEP {
                        let mut cand = net.clone();
                        cand.axpy(-s, &g);
                        let l = cand.loss(&xt, &yt, params.alpha);
                        if l <= loss - ARMIJO_C * s * g2 {
                            accepted = Some((cand, l));
                            break;
                        }
                        s *= 0.5;
                    }
                    let Some((cand, l)) = accepted else {
                        loss_curve.push(loss);
                        break;
                    };
                    step = s;
                    net = cand;
                    l
                }
                bs => {
                    let bs = match bs {
                        BatchSize::Rows(b) => b.min(nt),
                        _ => DEFAULT_BATCH.min(nt),
                    };
                    batch_order.shuffle(&mut shuffle_rng);
                    let mut total = 0.0;
                    for chunk in batch_order.chunks(bs) {
                        let xb = rows(&xt, chunk);
                        let yb: Vec<f64> = chunk.iter().map(|&i| yt[i]).collect();
                        let (loss, g) = net.loss_grad(&xb, &yb, params.alpha);
                        total += loss * chunk.len() as f64;
                        adam.step(&mut net, &g, params.learning_rate);
                    }
                    total / nt as f64
                }
            };
            if !epoch_loss.is_finite() {
                return Err(Error::NonFinite("mlp training loss diverged; lower learning_rate".into()));
            }
            loss_curve.push(epoch_loss);
            let monitored = if use_val {
                let v = net.loss(&xv, &yv, 0.0);
                validation_curve.push(v);
                v
            } else {
                epoch_loss
            };
            if monitor.observe(monitored, params.tol) {
                best_net = net.clone();
            }
            if monitor.stale >= params.patience {
                break;
            }
        }
        let final_net = if use_val { best_net } else { net };
        Ok(Mlp {
            params: params.clone(),
            scaler,
            layers: final_net.to_layers(),
            epochs: loss_curve.len(),
            loss_curve,
            validation_curve,
        })
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        let xs = self.scaler.apply(x)?;
        Ok(Net::from_layers(&self.layers).predict(&xs))
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let mut n_in = self.scaler.dim();
        for l in &self.layers {
            if l.n_in != n_in || l.weights.len() != l.n_in * l.n_out || l.bias.len() != l.n_out {
                return Err(Error::Format("mlp layer shapes are inconsistent".into()));
            }
            n_in = l.n_out;
        }
        if self.layers.is_empty() || n_in != 1 {
            return Err(Error::Format("mlp must end in a single output unit".into()));
        }
        Ok(())
    }
}

/// Compare backpropagated gradients of the penalized loss with central
/// finite differences (step `h`) for a freshly initialized network.
/// Returns the largest relative error `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn gradient_check(x: &DMatrix<f64>, y: &[f64], hidden: &[usize], alpha: f64, seed: u64, h: f64) -> f64 {
    let mut sizes = vec![x.ncols()];
    sizes.extend(hidden);
    sizes.push(1);
    let net = Net::init(&sizes, &mut rng::rng(seed));
    let (_, g) = net.loss_grad(x, y, alpha);
    let analytic: Vec<f64> = g.params().copied().collect();
    let mut worst: f64 = 0.0;
    for (k, a) in analytic.iter().enumerate() {
        let mut plus = net.clone();
        *plus.params_mut().nth(k).expect("parameter index") += h;
        let mut minus = net.clone();
        *minus.params_mut().nth(k).expect("parameter index") -= h;
        let numeric = (plus.loss(x, y, alpha) - minus.loss(x, y, alpha)) / (2.0 * h);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}
