//! LASSO by cyclic coordinate descent with warm starts.
//!
//! Columns are standardized to zero mean and unit (population) variance and
//! the response is centered, so the intercept is unpenalized. The objective
//! on the standardized scale is
//!
//! ```text
//! (1 / 2n) ‖y_c − X_s β‖² + λ ‖β‖₁
//! ```
//!
//! Coordinate updates run on the Gram matrix `X_sᵀX_s / n`, which keeps a
//! sweep at O(p · changed coordinates) once it is formed. Sweeps alternate
//! between the active set and a full pass, as in glmnet.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::linalg::{column_gram, dot};
use super::ols::{check_finite, LinearFit};
use crate::error::{EpfError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LassoConfig {
    /// Points on the logarithmic λ grid.
    pub grid_points: usize,
    /// Smallest λ as a fraction of λ_max.
    pub min_ratio: f64,
    /// Convergence threshold on the largest standardized coefficient change in a sweep.
    pub tol: f64,
    pub max_sweeps: usize,
    /// The path stops once in-sample R² reaches this level; smaller penalties
    /// would only interpolate the calibration window.
    pub max_r2: f64,
}

impl Default for LassoConfig {
    fn default() -> Self {
        Self {
            grid_points: 100,
            min_ratio: 1e-4,
            tol: 1e-7,
            max_sweeps: 10_000,
            max_r2: 0.999,
        }
    }
}

struct Standardized {
    /// Indices of columns with non-zero variance.
    active_cols: Vec<usize>,
    means: Vec<f64>,
    scales: Vec<f64>,
    y_mean: f64,
    /// Gram matrix over active columns, divided by n.
    gram: DMatrix<f64>,
    /// X_sᵀ y_c / n over active columns.
    xty: Vec<f64>,
    /// y_cᵀ y_c / n.
    yty: f64,
    n: usize,
    p: usize,
}

fn standardize(x: &DMatrix<f64>, y: &DVector<f64>) -> Standardized {
    let (n, p) = x.shape();
    let nf = n as f64;
    let mut means = vec![0.0; p];
    let mut scales = vec![0.0; p];
    let mut active_cols = Vec::with_capacity(p);
    for j in 0..p {
        let col = x.column(j);
        let mean = col.sum() / nf;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
        means[j] = mean;
        scales[j] = var.sqrt();
        if scales[j] > 1e-12 * mean.abs().max(1.0) {
            active_cols.push(j);
        }
    }

    let q = active_cols.len();
    let mut xs = DMatrix::<f64>::zeros(n, q);
    for (k, &j) in active_cols.iter().enumerate() {
        let (m, s) = (means[j], scales[j]);
        for (dst, src) in xs.column_mut(k).iter_mut().zip(x.column(j).iter()) {
            *dst = (src - m) / s;
        }
    }
    let y_mean = y.sum() / nf;
    let yc = y.map(|v| v - y_mean);
    let gram = column_gram(&xs) / nf;
    let xty: Vec<f64> = (xs.tr_mul(&yc) / nf).iter().copied().collect();
    let yty = yc.norm_squared() / nf;

    Standardized {
        active_cols,
        means,
        scales,
        y_mean,
        gram,
        xty,
        yty,
        n,
        p,
    }
}

fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

/// Smallest λ at which every penalized coefficient is zero: `max_j |x_jᵀ y_c| / n`
/// on standardized columns.
pub fn lambda_max(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
    check_finite(x, y, "LASSO design")?;
    let s = standardize(x, y);
    Ok(s.xty.iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// Descending logarithmic grid from λ_max to `min_ratio · λ_max`.
pub fn lambda_grid(x: &DMatrix<f64>, y: &DVector<f64>, cfg: &LassoConfig) -> Result<Vec<f64>> {
    let max = lambda_max(x, y)?;
    let points = cfg.grid_points.max(1);
    if max == 0.0 || points == 1 {
        return Ok(vec![max]);
    }
    let (hi, lo) = (max.ln(), (max * cfg.min_ratio).ln());
    Ok((0..points)
        .map(|i| (hi + (lo - hi) * i as f64 / (points - 1) as f64).exp())
        .collect())
}

/// One point on the regularization path, on the standardized scale.
struct PathPoint {
    lambda: f64,
    beta: Vec<f64>,
    rss: f64,
}

struct Solver<'a> {
    s: &'a Standardized,
    beta: Vec<f64>,
    /// Gram · beta
    g_beta: Vec<f64>,
}

impl<'a> Solver<'a> {
    fn new(s: &'a Standardized) -> Self {
        let q = s.active_cols.len();
        Self {
            s,
            beta: vec![0.0; q],
            g_beta: vec![0.0; q],
        }
    }

    fn update(&mut self, j: usize, lambda: f64) -> f64 {
        let gjj = self.s.gram[(j, j)];
        let rho = self.s.xty[j] - self.g_beta[j] + gjj * self.beta[j];
        let new = soft_threshold(rho, lambda) / gjj;
        let delta = new - self.beta[j];
        if delta != 0.0 {
            self.beta[j] = new;
            let q = self.beta.len();
            let column = &self.s.gram.as_slice()[j * q..(j + 1) * q];
            for (gb, g) in self.g_beta.iter_mut().zip(column) {
                *gb += delta * g;
            }
        }
        delta.abs()
    }

    fn sweep(&mut self, lambda: f64, coords: &[usize]) -> f64 {
        let mut max_change = 0.0f64;
        for &j in coords {
            max_change = max_change.max(self.update(j, lambda));
        }
        max_change
    }

    /// Active-set step. On the current support `A` with signs `s` the
    /// objective is the quadratic `½βᵀGβ − (c − λs)ᵀβ`. When `G_AA` is
    /// regular along `c_A − λs_A`, move from β toward its minimizer; when the
    /// right-hand side leaves the range of a singular `G_AA` (exactly
    /// collinear columns), the objective falls linearly along the null-space
    /// residual, so move along that instead. Either move stops where a
    /// coefficient first reaches zero, which then leaves the support, and
    /// coordinate descent resumes from there. The move stays in one orthant
    /// and never increases the objective.
    fn polish(&mut self, lambda: f64, active: &[usize]) {
        let k = active.len();
        if k == 0 {
            return;
        }
        let g = &self.s.gram;
        let q = g.nrows();
        let gs = g.as_slice();
        let before = self.beta.clone();
        let start_objective = self.objective(lambda);
        let gaa = DMatrix::from_fn(k, k, |a, b| gs[active[b] * q + active[a]]);
        let rhs = DVector::from_fn(k, |a, _| {
            let j = active[a];
            self.s.xty[j] - lambda * self.beta[j].signum()
        });
        let (direction, mut step) = match orthant_direction(&gaa, &rhs) {
            Direction::Target(target) => {
                let current = DVector::from_fn(k, |a, _| self.beta[active[a]]);
                (target - current, 1.0)
            }
            Direction::Null(d) => (d, f64::INFINITY),
        };
        if direction.iter().any(|v| !v.is_finite()) {
            return;
        }
        let mut blocking = None;
        for (a, &j) in active.iter().enumerate() {
            let (b, d) = (self.beta[j], direction[a]);
            if b * d < 0.0 {
                let t = -b / d;
                if t <= step {
                    step = t;
                    blocking = Some(j);
                }
            }
        }
        if !step.is_finite() {
            return;
        }
        for (a, &j) in active.iter().enumerate() {
            self.beta[j] += step * direction[a];
        }
        if let Some(j) = blocking {
            self.beta[j] = 0.0;
        }
        let old_g_beta = std::mem::take(&mut self.g_beta);
        self.g_beta = vec![0.0; q];
        for &j in active {
            let b = self.beta[j];
            for (gb, v) in self.g_beta.iter_mut().zip(&gs[j * q..(j + 1) * q]) {
                *gb += b * v;
            }
        }
        // Guard against ill-conditioned solves: keep the move only if it helped.
        if !(self.objective(lambda) < start_objective) {
            self.beta = before;
            self.g_beta = old_g_beta;
        }
    }

    /// `½βᵀGβ − cᵀβ + λ‖β‖₁`, the standardized objective up to a constant.
    fn objective(&self, lambda: f64) -> f64 {
        self.beta
            .iter()
            .zip(&self.g_beta)
            .zip(&self.s.xty)
            .map(|((b, gb), c)| 0.5 * b * gb - c * b + lambda * b.abs())
            .sum()
    }

    fn solve(&mut self, lambda: f64, cfg: &LassoConfig) {
        const POLISH_EVERY: usize = 32;
        let all: Vec<usize> = (0..self.beta.len()).collect();
        let mut sweeps = 0;
        loop {
            let change = self.sweep(lambda, &all);
            sweeps += 1;
            if change < cfg.tol || sweeps >= cfg.max_sweeps {
                break;
            }
            // Iterate on the active set until it settles, then re-check all.
            // Slow progress on collinear columns triggers an exact solve on
            // the active set.
            let mut active: Vec<usize> = all.iter().copied().filter(|&j| self.beta[j] != 0.0).collect();
            let mut since_polish = 0;
            while sweeps < cfg.max_sweeps {
                let change = self.sweep(lambda, &active);
                sweeps += 1;
                if change < cfg.tol {
                    break;
                }
                since_polish += 1;
                if since_polish == POLISH_EVERY {
                    since_polish = 0;
                    self.polish(lambda, &active);
                    active.retain(|&j| self.beta[j] != 0.0);
                }
            }
        }
        if sweeps >= cfg.max_sweeps {
            log::warn!("LASSO hit the sweep limit at lambda = {lambda:e}");
        }
    }

    fn rss(&self) -> f64 {
        // n (y'y − 2β'c + β'Gβ), all scaled by 1/n
        let quad: f64 = self.beta.iter().zip(&self.g_beta).map(|(b, g)| b * g).sum();
        let cross: f64 = self.beta.iter().zip(&self.s.xty).map(|(b, c)| b * c).sum();
        (self.s.yty - 2.0 * cross + quad).max(0.0) * self.s.n as f64
    }
}

enum Direction {
    /// Minimizer of the orthant quadratic.
    Target(DVector<f64>),
    /// Null-space direction along which the orthant objective decreases linearly.
    Null(DVector<f64>),
}

/// Solves `G b = r` for a positive semidefinite `G` by a Cholesky
/// factorization that skips columns whose Schur complement vanishes
/// (relative `1e-10`). Skipped columns are linear combinations of earlier
/// ones; their factor rows give both the consistency residual of `r` and
/// an exact null direction of `G`.
fn orthant_direction(g: &DMatrix<f64>, r: &DVector<f64>) -> Direction {
    let k = g.nrows();
    let scale = g.diagonal().max().max(f64::MIN_POSITIVE);
    // Row-major lower factor; columns of dependent indices stay zero, so
    // plain prefix dot products skip them automatically.
    let mut l = vec![0.0; k * k];
    let mut is_dependent = vec![false; k];
    for i in 0..k {
        for c in 0..i {
            if is_dependent[c] {
                continue;
            }
            let v = g[(i, c)] - dot(&l[i * k..i * k + c], &l[c * k..c * k + c]);
            l[i * k + c] = v / l[c * k + c];
        }
        let row = &l[i * k..i * k + i];
        let d = g[(i, i)] - dot(row, row);
        if d > 1e-10 * scale {
            l[i * k + i] = d.sqrt();
        } else {
            is_dependent[i] = true;
        }
    }

    // z = L_II⁻¹ r_I
    let mut z = vec![0.0; k];
    for i in 0..k {
        if !is_dependent[i] {
            z[i] = (r[i] - dot(&l[i * k..i * k + i], &z[..i])) / l[i * k + i];
        }
    }
    // x_I = L_II⁻ᵀ y_I, column-oriented so rows of `l` are read contiguously.
    let back = |y: &[f64]| -> Vec<f64> {
        let mut x: Vec<f64> = y.to_vec();
        for i in (0..k).rev() {
            if is_dependent[i] {
                x[i] = 0.0;
                continue;
            }
            x[i] /= l[i * k + i];
            let xi = x[i];
            for (xm, lm) in x[..i].iter_mut().zip(&l[i * k..i * k + i]) {
                *xm -= lm * xi;
            }
        }
        x
    };

    let r_scale = r.amax().max(f64::MIN_POSITIVE);
    let worst = (0..k)
        .filter(|&j| is_dependent[j])
        .map(|j| (j, r[j] - dot(&l[j * k..j * k + j], &z[..j])))
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()));
    match worst {
        Some((j, resid)) if resid.abs() > 1e-9 * r_scale => {
            let mut w = vec![0.0; k];
            w[..j].copy_from_slice(&l[j * k..j * k + j]);
            let mut d = back(&w);
            let sign = resid.signum();
            for v in d.iter_mut() {
                *v = -sign * *v;
            }
            d[j] = sign;
            Direction::Null(DVector::from_vec(d))
        }
        _ => Direction::Target(DVector::from_vec(back(&z))),
    }
}

fn solve_path(s: &Standardized, grid: &[f64], cfg: &LassoConfig) -> Vec<PathPoint> {
    let mut solver = Solver::new(s);
    let tss = s.yty * s.n as f64;
    let mut out = Vec::with_capacity(grid.len());
    for &lambda in grid {
        solver.solve(lambda, cfg);
        let rss = solver.rss();
        out.push(PathPoint {
            lambda,
            beta: solver.beta.clone(),
            rss,
        });
        if tss > 0.0 && 1.0 - rss / tss >= cfg.max_r2 {
            break;
        }
    }
    out
}

fn to_fit(s: &Standardized, point: &PathPoint) -> LinearFit {
    let mut coefficients = vec![0.0; s.p];
    for (k, &j) in s.active_cols.iter().enumerate() {
        coefficients[j] = point.beta[k] / s.scales[j];
    }
    let intercept = s.y_mean
        - coefficients
            .iter()
            .zip(&s.means)
            .map(|(b, m)| b * m)
            .sum::<f64>();
    let nnz = coefficients.iter().filter(|b| **b != 0.0).count();
    let dof = s.n.saturating_sub(nnz + 1).max(1);
    LinearFit {
        coefficients,
        intercept,
        fit_intercept: true,
        residual_variance: point.rss / dof as f64,
        lambda: Some(point.lambda),
        rank: nnz,
        rank_deficient: false,
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(EpfError::InvalidArgument("empty lambda grid".into()));
    }
    if grid.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(EpfError::InvalidArgument("lambda grid must be finite and non-negative".into()));
    }
    if grid.windows(2).any(|w| w[1] > w[0]) {
        return Err(EpfError::InvalidArgument("lambda grid must be descending".into()));
    }
    Ok(())
}

/// Fits along `grid` (descending) with warm starts and returns every point
/// reached before the R² saturation stop.
pub fn lasso_path(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    grid: &[f64],
    cfg: &LassoConfig,
) -> Result<Vec<LinearFit>> {
    check_finite(x, y, "LASSO design")?;
    validate_grid(grid)?;
    let s = standardize(x, y);
    Ok(solve_path(&s, grid, cfg).iter().map(|p| to_fit(&s, p)).collect())
}

/// In-sample BIC: `n ln(RSS / n) + k ln n`, with `k` the non-zero
/// coefficients plus the intercept.
pub fn bic(n: usize, rss: f64, nonzero: usize) -> f64 {
    let nf = n as f64;
    nf * (rss.max(f64::MIN_POSITIVE) / nf).ln() + (nonzero + 1) as f64 * nf.ln()
}

/// LASSO fit at the BIC-minimizing λ of `grid` (ties go to the larger λ).
/// Coefficients are reported on the original column scale.
pub fn lasso_fit(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    grid: &[f64],
    cfg: &LassoConfig,
) -> Result<LinearFit> {
    check_finite(x, y, "LASSO design")?;
    validate_grid(grid)?;
    if x.nrows() == 0 {
        return Err(EpfError::Shape("LASSO needs at least one row".into()));
    }
    let s = standardize(x, y);
    let path = solve_path(&s, grid, cfg);
    let mut best: Option<(f64, &PathPoint)> = None;
    for point in &path {
        let nnz = point.beta.iter().filter(|b| **b != 0.0).count();
        let score = bic(s.n, point.rss, nnz);
        if best.is_none_or(|(b, _)| score < b) {
            best = Some((score, point));
        }
    }
    let (_, point) = best.expect("path has at least one point");
    Ok(to_fit(&s, point))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ols::ols_fit;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn problem(n: usize, p: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let x = DMatrix::from_fn(n, p, |_, j| normal.sample(&mut rng) * (1.0 + j as f64) + j as f64);
        let beta: Vec<f64> = (0..p).map(|j| if j % 3 == 0 { 0.0 } else { 1.0 / (1.0 + j as f64) }).collect();
        let y = DVector::from_fn(n, |i, _| {
            3.0 + (0..p).map(|j| x[(i, j)] * beta[j]).sum::<f64>() + 0.5 * normal.sample(&mut rng)
        });
        (x, y)
    }

    /// Standardized-scale optimality conditions at every path point.
    fn assert_kkt(x: &DMatrix<f64>, y: &DVector<f64>) {
        let cfg = LassoConfig::default();
        let grid = lambda_grid(x, y, &cfg).unwrap();
        let s = standardize(x, y);
        for point in solve_path(&s, &grid, &cfg) {
            let gb = &s.gram * DVector::from_vec(point.beta.clone());
            for j in 0..point.beta.len() {
                let grad = s.xty[j] - gb[j];
                let slack = 1e-5 * point.lambda + 1e-9;
                if point.beta[j] == 0.0 {
                    assert!(grad.abs() <= point.lambda + slack, "inactive {j} at {}", point.lambda);
                } else {
                    let want = point.lambda * point.beta[j].signum();
                    assert!((grad - want).abs() <= slack, "active {j} at {}", point.lambda);
                }
            }
        }
    }

    #[test]
    fn kkt_on_lear_design() {
        use crate::ingest::{frame_for, synth_market, FrameOptions, FrameSource, PriceProfile};
        use crate::models::{Estimator, Family};
        let ds = synth_market(4, 70, PriceProfile::Duck);
        let src = FrameSource::from_dataset(&ds, &ds.prices);
        for hour in [1, 19] {
            let mut rows = Vec::new();
            for day in 7..63 {
                let f = frame_for(&src, day, hour, Family::Lear, Estimator::Heterogeneous, FrameOptions::default())
                    .unwrap();
                rows.extend(f.regressors());
            }
            let x = DMatrix::from_row_slice(56, 184, &rows);
            let y = DVector::from_fn(56, |i, _| ds.prices.get(7 + i, hour - 1));
            assert_kkt(&x, &y);
        }
    }

    #[test]
    fn kkt_on_collinear_wide_design() {
        // 30 rows, 12 noisy columns, their mean, and a duplicate: p > rank.
        let (base, y) = problem(30, 12, 17);
        let mut x = DMatrix::zeros(30, 50);
        for i in 0..30 {
            for j in 0..12 {
                x[(i, j)] = base[(i, j)];
                x[(i, 12 + j)] = base[(i, j)] * 0.5 + base[(i, (j + 1) % 12)];
                x[(i, 24 + j)] = (base[(i, j)] * 0.3).sin();
                x[(i, 36 + j)] = base[(i, j)] - base[(i, (j + 5) % 12)];
            }
            x[(i, 48)] = (0..12).map(|j| base[(i, j)]).sum::<f64>() / 12.0;
            x[(i, 49)] = base[(i, 3)];
        }
        assert_kkt(&x, &y);
    }

    #[test]
    fn zero_penalty_matches_ols() {
        let (x, y) = problem(200, 10, 1);
        let lasso = lasso_fit(&x, &y, &[0.0], &LassoConfig::default()).unwrap();
        let with_const = x.clone().insert_column(10, 1.0);
        let ols = ols_fit(&with_const, &y).unwrap();
        for j in 0..10 {
            assert!((lasso.coefficients[j] - ols.coefficients[j]).abs() < 1e-6);
        }
        assert!((lasso.intercept - ols.coefficients[10]).abs() < 1e-5);
    }

    #[test]
    fn lambda_max_zeroes_everything() {
        let (x, y) = problem(80, 6, 2);
        let lmax = lambda_max(&x, &y).unwrap();
        for l in [lmax, 2.0 * lmax] {
            let fit = lasso_fit(&x, &y, &[l], &LassoConfig::default()).unwrap();
            assert!(fit.coefficients.iter().all(|&b| b == 0.0));
            assert!((fit.intercept - y.mean()).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_is_descending_and_spans_ratio() {
        let (x, y) = problem(50, 4, 3);
        let grid = lambda_grid(&x, &y, &LassoConfig::default()).unwrap();
        assert_eq!(grid.len(), 100);
        assert!(grid.windows(2).all(|w| w[1] < w[0]));
        assert!((grid[99] / grid[0] - 1e-4).abs() < 1e-12);
    }

    #[test]
    fn bad_grids_rejected() {
        let (x, y) = problem(20, 2, 4);
        let cfg = LassoConfig::default();
        assert!(lasso_fit(&x, &y, &[], &cfg).is_err());
        assert!(lasso_fit(&x, &y, &[0.1, 0.2], &cfg).is_err());
        assert!(lasso_fit(&x, &y, &[f64::NAN], &cfg).is_err());
    }

    #[test]
    fn constant_columns_get_zero_coefficients() {
        let (mut x, y) = problem(60, 4, 5);
        x.column_mut(2).fill(7.0);
        let fit = lasso_fit(&x, &y, &[0.0], &LassoConfig::default()).unwrap();
        assert_eq!(fit.coefficients[2], 0.0);
    }

    #[test]
    fn path_support_grows_as_lambda_falls() {
        let (x, y) = problem(120, 8, 6);
        let cfg = LassoConfig::default();
        let grid = lambda_grid(&x, &y, &cfg).unwrap();
        let path = lasso_path(&x, &y, &grid, &cfg).unwrap();
        assert_eq!(path[0].nonzero(), 0);
        assert!(path.last().unwrap().nonzero() >= path[path.len() / 2].nonzero());
    }
}
