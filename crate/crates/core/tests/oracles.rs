use chrono::NaiveDate;
use epf_core::metrics::{cov_e, ErrorPanel};
use epf_core::models::{lasso_path, LassoConfig};
use epf_core::panel::consecutive_dates;
use epf_core::Panel;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn single_regressor_lasso_is_a_soft_threshold() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let n = 80;
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..5.0)).collect();
    let y: Vec<f64> = x.iter().map(|v| 1.5 * v + rng.random_range(-2.0..2.0)).collect();

    let nf = n as f64;
    let (xm, ym) = (x.iter().sum::<f64>() / nf, y.iter().sum::<f64>() / nf);
    let sd = (x.iter().map(|v| (v - xm).powi(2)).sum::<f64>() / nf).sqrt();
    // Slope on the standardized regressor, i.e. the OLS solution in that basis.
    let c = x.iter().zip(&y).map(|(a, b)| (a - xm) / sd * (b - ym)).sum::<f64>() / nf;

    let design = DMatrix::from_column_slice(n, 1, &x);
    let target = DVector::from_vec(y);
    let cfg = LassoConfig { max_r2: 1.0, ..LassoConfig::default() };
    for lambda in [0.0, 0.1, 0.5 * c.abs(), c.abs() - 1e-3, c.abs(), 2.0 * c.abs()] {
        let fit = &lasso_path(&design, &target, &[lambda], &cfg).unwrap()[0];
        let expected = c.signum() * (c.abs() - lambda).max(0.0) / sd;
        assert!((fit.coefficients[0] - expected).abs() < 1e-8, "λ={lambda}: {} vs {expected}", fit.coefficients[0]);
    }
}

#[test]
fn cov_e_matches_direct_log_determinant() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let days = 40;
        let dates = consecutive_dates(NaiveDate::from_ymd_opt(2022, 1, 1).unwrap(), days);
        let data: Vec<f64> = (0..days * 4).map(|_| rng.random_range(-5.0..5.0)).collect();
        let e = ErrorPanel::from_panel(Panel::new(dates, 4, data.clone()).unwrap()).unwrap();
        let m = DMatrix::from_row_slice(days, 4, &data);
        let sigma = m.tr_mul(&m) / days as f64;
        let direct = sigma.determinant().ln();
        let c = cov_e(&e, false);
        assert!(!c.degenerate);
        assert!((c.value - direct).abs() < 1e-10, "{} vs {direct}", c.value);
    }
}
