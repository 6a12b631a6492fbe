use log::debug;
use nalgebra::{DMatrix, DVector};

use crate::error::{EpfError, Result};

/// Linear model `y ≈ intercept + x·coefficients`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Whether `intercept` was estimated (LASSO) or is fixed at zero (OLS with an explicit constant column).
    pub fit_intercept: bool,
    pub residual_variance: f64,
    /// Selected penalty for LASSO fits.
    pub lambda: Option<f64>,
    pub rank: usize,
    pub rank_deficient: bool,
}

impl LinearFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.coefficients.len());
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(x)
                .map(|(b, v)| b * v)
                .sum::<f64>()
    }

    pub fn nonzero(&self) -> usize {
        self.coefficients.iter().filter(|b| **b != 0.0).count()
    }
}

pub(crate) fn check_finite(x: &DMatrix<f64>, y: &DVector<f64>, what: &'static str) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(EpfError::Shape(format!(
            "{what}: {} design rows but {} targets",
            x.nrows(),
            y.len()
        )));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(EpfError::NonFinite(what));
    }
    Ok(())
}

/// Least squares through a singular value decomposition.
///
/// Singular values below `max(n, p) · σ_max · ε` are treated as zero, which
/// yields the minimum-norm solution for rank-deficient designs (flagged on
/// the returned fit and logged).
pub fn ols_fit(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<LinearFit> {
    check_finite(x, y, "OLS design")?;
    let (n, p) = x.shape();
    if n == 0 || p == 0 {
        return Err(EpfError::Shape("OLS needs a non-empty design".into()));
    }

    let svd = x.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let tol = n.max(p) as f64 * sigma_max * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let rank_deficient = rank < p;
    if rank_deficient {
        debug!("OLS design is rank deficient (rank {rank} < {p} columns); using minimum-norm solution");
    }
    let beta = svd
        .solve(y, tol)
        .map_err(|e| EpfError::InvalidArgument(format!("SVD solve failed: {e}")))?;

    let residuals = y - x * &beta;
    let rss = residuals.norm_squared();
    let residual_variance = if n > rank { rss / (n - rank) as f64 } else { 0.0 };

    Ok(LinearFit {
        coefficients: beta.iter().copied().collect(),
        intercept: 0.0,
        fit_intercept: false,
        residual_variance,
        lambda: None,
        rank,
        rank_deficient,
    })
}
