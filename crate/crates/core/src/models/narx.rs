//! Single-hidden-layer tanh network trained by Levenberg–Marquardt, and the
//! committee of independently initialized networks used for forecasting.
//!
//! Output for a scaled input row `x`:
//!
//! ```text
//! f(x) = Σ_k v_k tanh(W_k · x + b_k) + c
//! ```
//!
//! Parameters are packed as `[W (row-major, hidden × inputs), b, v, c]`.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linalg::column_gram;
use super::ols::check_finite;
use super::seed::mix_seed;
use crate::error::{EpfError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NarxConfig {
    pub hidden: usize,
    pub committee_size: usize,
    pub mu_init: f64,
    pub mu_increase: f64,
    pub mu_decrease: f64,
    pub mu_max: f64,
    pub max_epochs: usize,
    /// Consecutive validation checks without improvement before stopping.
    pub patience: usize,
    pub holdout_fraction: f64,
    /// Training stops once the gradient norm falls below this.
    pub min_gradient: f64,
    pub min_rows: usize,
}

impl Default for NarxConfig {
    fn default() -> Self {
        Self {
            hidden: 5,
            committee_size: 10,
            mu_init: 1e-3,
            mu_increase: 10.0,
            mu_decrease: 0.1,
            mu_max: 1e10,
            max_epochs: 1000,
            patience: 6,
            holdout_fraction: 0.1,
            min_gradient: 1e-7,
            min_rows: 50,
        }
    }
}

/// Per-column min-max map onto [-1, 1]. Constant columns map to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit_columns(x: &DMatrix<f64>) -> Self {
        let (min, max) = (0..x.ncols())
            .map(|j| (x.column(j).min(), x.column(j).max()))
            .unzip();
        Self { min, max }
    }

    pub fn fit_values(values: &[f64]) -> Self {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self {
            min: vec![min],
            max: vec![max],
        }
    }

    pub fn scale(&self, j: usize, v: f64) -> f64 {
        let range = self.max[j] - self.min[j];
        if range > 0.0 {
            2.0 * (v - self.min[j]) / range - 1.0
        } else {
            0.0
        }
    }

    pub fn unscale(&self, j: usize, s: f64) -> f64 {
        let range = self.max[j] - self.min[j];
        if range > 0.0 {
            (s + 1.0) * range / 2.0 + self.min[j]
        } else {
            self.min[j]
        }
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| self.scale(j, x[(i, j)]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NarxNet {
    /// hidden × inputs
    pub input_weights: DMatrix<f64>,
    pub hidden_bias: DVector<f64>,
    pub output_weights: DVector<f64>,
    pub output_bias: f64,
    pub input_scaler: MinMaxScaler,
    pub target_scaler: MinMaxScaler,
}

impl NarxNet {
    /// Network with all weights zero and identity-like scaling over [-1, 1].
    pub fn zeros(inputs: usize, hidden: usize) -> Self {
        Self {
            input_weights: DMatrix::zeros(hidden, inputs),
            hidden_bias: DVector::zeros(hidden),
            output_weights: DVector::zeros(hidden),
            output_bias: 0.0,
            input_scaler: MinMaxScaler {
                min: vec![-1.0; inputs],
                max: vec![1.0; inputs],
            },
            target_scaler: MinMaxScaler {
                min: vec![-1.0],
                max: vec![1.0],
            },
        }
    }

    pub fn inputs(&self) -> usize {
        self.input_weights.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.input_weights.nrows()
    }

    pub fn param_count(&self) -> usize {
        self.hidden() * (self.inputs() + 2) + 1
    }

    pub fn params(&self) -> DVector<f64> {
        let (h, d) = (self.hidden(), self.inputs());
        let mut p = DVector::zeros(self.param_count());
        for k in 0..h {
            for i in 0..d {
                p[k * d + i] = self.input_weights[(k, i)];
            }
            p[h * d + k] = self.hidden_bias[k];
            p[h * d + h + k] = self.output_weights[k];
        }
        p[h * d + 2 * h] = self.output_bias;
        p
    }

    pub fn set_params(&mut self, p: &DVector<f64>) {
        let (h, d) = (self.hidden(), self.inputs());
        for k in 0..h {
            for i in 0..d {
                self.input_weights[(k, i)] = p[k * d + i];
            }
            self.hidden_bias[k] = p[h * d + k];
            self.output_weights[k] = p[h * d + h + k];
        }
        self.output_bias = p[h * d + 2 * h];
    }

    fn hidden_activations(&self, xs: &DMatrix<f64>) -> DMatrix<f64> {
        let mut a = xs * self.input_weights.transpose();
        for mut row in a.row_iter_mut() {
            for (k, v) in row.iter_mut().enumerate() {
                *v = (*v + self.hidden_bias[k]).tanh();
            }
        }
        a
    }

    /// Outputs on already-scaled inputs, in scaled target units.
    pub fn forward_scaled(&self, xs: &DMatrix<f64>) -> DVector<f64> {
        let h = self.hidden_activations(xs);
        let mut out = &h * &self.output_weights;
        out.add_scalar_mut(self.output_bias);
        out
    }

    /// Jacobian of [`forward_scaled`](Self::forward_scaled) with respect to the packed parameters.
    pub fn jacobian(&self, xs: &DMatrix<f64>) -> DMatrix<f64> {
        let (n, d, hid) = (xs.nrows(), self.inputs(), self.hidden());
        let act = self.hidden_activations(xs);
        let mut jac = DMatrix::zeros(n, self.param_count());
        for k in 0..hid {
            let v = self.output_weights[k];
            let gate: Vec<f64> = act.column(k).iter().map(|a| v * (1.0 - a * a)).collect();
            for i in 0..d {
                let mut col = jac.column_mut(k * d + i);
                for (r, dst) in col.iter_mut().enumerate() {
                    *dst = gate[r] * xs[(r, i)];
                }
            }
            jac.column_mut(hid * d + k).copy_from_slice(&gate);
            jac.column_mut(hid * d + hid + k).copy_from(&act.column(k));
        }
        jac.column_mut(hid * d + 2 * hid).fill(1.0);
        jac
    }

    /// Prediction for one raw (unscaled) input row.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut out = self.output_bias;
        for k in 0..self.hidden() {
            let mut a = self.hidden_bias[k];
            for (i, &v) in x.iter().enumerate() {
                a += self.input_weights[(k, i)] * self.input_scaler.scale(i, v);
            }
            out += self.output_weights[k] * a.tanh();
        }
        self.target_scaler.unscale(0, out)
    }
}

/// Networks whose predictions are averaged.
#[derive(Debug, Clone, PartialEq)]
pub struct NarxCommittee {
    pub nets: Vec<NarxNet>,
}

impl NarxCommittee {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.nets.iter().map(|n| n.predict(x)).sum::<f64>() / self.nets.len() as f64
    }
}

fn sse(net: &NarxNet, xs: &DMatrix<f64>, ys: &DVector<f64>) -> f64 {
    (ys - net.forward_scaled(xs)).norm_squared()
}

/// Trains one network on scaled data. `train`/`valid` index rows of `xs`.
fn train_net(
    mut net: NarxNet,
    xs: &DMatrix<f64>,
    ys: &DVector<f64>,
    train: &[usize],
    valid: &[usize],
    cfg: &NarxConfig,
) -> NarxNet {
    let xt = xs.select_rows(train);
    let yt = DVector::from_iterator(train.len(), train.iter().map(|&i| ys[i]));
    let xv = xs.select_rows(valid);
    let yv = DVector::from_iterator(valid.len(), valid.iter().map(|&i| ys[i]));

    let mut params = net.params();
    let mut mu = cfg.mu_init;
    let mut best_params = params.clone();
    let mut best_valid = sse(&net, &xv, &yv);
    let mut fails = 0;
    let mut current = sse(&net, &xt, &yt);

    'epochs: for _ in 0..cfg.max_epochs {
        let jac = net.jacobian(&xt);
        let residual = &yt - net.forward_scaled(&xt);
        let grad = jac.tr_mul(&residual);
        if grad.norm() < cfg.min_gradient {
            break;
        }
        // With fewer rows than parameters, solve the equivalent n × n system
        // (J Jᵀ + μI) α = r and take Jᵀα.
        let jt = jac.transpose();
        let dual = jac.nrows() < jac.ncols();
        let normal = column_gram(if dual { &jt } else { &jac });
        loop {
            let mut damped = normal.clone();
            for i in 0..damped.nrows() {
                damped[(i, i)] += mu;
            }
            let step = damped.cholesky().map(|c| {
                if dual {
                    &jt * c.solve(&residual)
                } else {
                    c.solve(&grad)
                }
            });
            if let Some(step) = step {
                let candidate = &params + step;
                net.set_params(&candidate);
                let trial = sse(&net, &xt, &yt);
                if trial.is_finite() && trial < current {
                    params = candidate;
                    current = trial;
                    mu *= cfg.mu_decrease;
                    break;
                }
            }
            net.set_params(&params);
            mu *= cfg.mu_increase;
            if mu > cfg.mu_max {
                break 'epochs;
            }
        }

        let valid_err = sse(&net, &xv, &yv);
        if valid_err < best_valid {
            best_valid = valid_err;
            best_params = params.clone();
            fails = 0;
        } else {
            fails += 1;
            if fails >= cfg.patience {
                break;
            }
        }
    }

    net.set_params(&best_params);
    net
}

fn init_net(inputs: usize, cfg: &NarxConfig, rng: &mut ChaCha8Rng) -> NarxNet {
    let mut net = NarxNet::zeros(inputs, cfg.hidden);
    let w_scale = 1.0 / (inputs.max(1) as f64).sqrt();
    let v_scale = 1.0 / (cfg.hidden as f64).sqrt();
    for w in net.input_weights.iter_mut() {
        *w = rng.random_range(-1.0..1.0) * w_scale;
    }
    for b in net.hidden_bias.iter_mut() {
        *b = rng.random_range(-1.0..1.0);
    }
    for v in net.output_weights.iter_mut() {
        *v = rng.random_range(-1.0..1.0) * v_scale;
    }
    net
}

/// Trains a committee of `cfg.committee_size` networks on raw rows `x`
/// and targets `y`. Net `i` draws its initial weights and its random
/// validation holdout from a stream derived from `(seed, i)`.
pub fn narx_train(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    seed: u64,
    cfg: &NarxConfig,
) -> Result<NarxCommittee> {
    check_finite(x, y, "NARX training set")?;
    let n = x.nrows();
    let holdout = (cfg.holdout_fraction * n as f64).round() as usize;
    if n < cfg.min_rows || holdout == 0 || holdout >= n {
        return Err(EpfError::InsufficientHistory(format!(
            "NARX needs at least {} rows with a non-empty holdout, got {n}",
            cfg.min_rows
        )));
    }
    if cfg.committee_size == 0 {
        return Err(EpfError::InvalidArgument("committee size must be positive".into()));
    }

    let input_scaler = MinMaxScaler::fit_columns(x);
    let target_scaler = MinMaxScaler::fit_values(y.as_slice());
    let xs = input_scaler.transform(x);
    let ys = y.map(|v| target_scaler.scale(0, v));

    let nets = (0..cfg.committee_size)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, i as u64]));
            let mut net = init_net(x.ncols(), cfg, &mut rng);
            net.input_scaler = input_scaler.clone();
            net.target_scaler = target_scaler.clone();
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let (valid, train) = order.split_at(holdout);
            train_net(net, &xs, &ys, train, valid, cfg)
        })
        .collect();
    Ok(NarxCommittee { nets })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn zero_weights_predict_output_bias() {
        let mut net = NarxNet::zeros(3, 5);
        net.output_bias = 0.25;
        for x in [[0.0, 0.0, 0.0], [1.0, -3.0, 7.5], [-0.2, 0.4, 100.0]] {
            assert_eq!(net.predict(&x), 0.25);
        }
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = init_net(3, &NarxConfig::default(), &mut rng);
        let xs = DMatrix::from_fn(20, 3, |_, _| rng.random_range(-1.0..1.0));
        let jac = net.jacobian(&xs);
        let p0 = net.params();
        let h = 1e-6;
        let mut probe = net.clone();
        let mut worst = 0.0f64;
        for j in 0..p0.len() {
            let mut p = p0.clone();
            p[j] += h;
            probe.set_params(&p);
            let up = probe.forward_scaled(&xs);
            p[j] -= 2.0 * h;
            probe.set_params(&p);
            let down = probe.forward_scaled(&xs);
            for r in 0..xs.nrows() {
                let numeric = (up[r] - down[r]) / (2.0 * h);
                let analytic = jac[(r, j)];
                let scale = analytic.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max((analytic - numeric).abs() / scale);
            }
        }
        assert!(worst < 1e-4, "max relative error {worst:e}");
    }

    #[test]
    fn committee_of_identical_nets_equals_single_net() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = init_net(3, &NarxConfig::default(), &mut rng);
        let committee = NarxCommittee {
            nets: vec![net.clone(); 10],
        };
        let x = [0.3, -0.1, 0.8];
        assert!((committee.predict(&x) - net.predict(&x)).abs() < 1e-15);
    }

    #[test]
    fn params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = init_net(4, &NarxConfig::default(), &mut rng);
        let mut other = NarxNet::zeros(4, 5);
        other.set_params(&net.params());
        assert_eq!(other.params(), net.params());
        assert_eq!(net.param_count(), 5 * 4 + 5 + 5 + 1);
    }

    #[test]
    fn learns_a_smooth_function() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let n = 200;
        let x: DMatrix<f64> = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-2.0..2.0));
        let y = DVector::from_fn(n, |i, _| {
            (x[(i, 0)]).sin() + 0.5 * x[(i, 1)] + noise.sample(&mut rng)
        });
        let cfg = NarxConfig {
            committee_size: 2,
            ..NarxConfig::default()
        };
        let committee = narx_train(&x, &y, 1, &cfg).unwrap();
        let mse: f64 = (0..n)
            .map(|i| (committee.predict(&[x[(i, 0)], x[(i, 1)]]) - y[i]).powi(2))
            .sum::<f64>()
            / n as f64;
        assert!(mse < 0.01, "mse {mse}");
    }

    #[test]
    fn training_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = DMatrix::from_fn(60, 3, |_, _| rng.random_range(-1.0..1.0));
        let y = DVector::from_fn(60, |i, _| x[(i, 0)] * x[(i, 1)] - x[(i, 2)]);
        let cfg = NarxConfig {
            committee_size: 2,
            ..NarxConfig::default()
        };
        let a = narx_train(&x, &y, 5, &cfg).unwrap();
        let b = narx_train(&x, &y, 5, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_rows() {
        let x = DMatrix::from_element(20, 2, 1.0);
        let y = DVector::from_element(20, 1.0);
        assert!(matches!(
            narx_train(&x, &y, 0, &NarxConfig::default()),
            Err(EpfError::InsufficientHistory(_))
        ));
    }
}
