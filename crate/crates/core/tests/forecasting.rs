use chrono::NaiveDate;
use epf_core::ingest::{synth_market, MarketDataset, PriceProfile};
use epf_core::models::*;
use epf_core::panel::consecutive_dates;
use epf_core::Panel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn quick() -> ModelConfig {
    let mut cfg = ModelConfig::default();
    cfg.narx.committee_size = 1;
    cfg
}

fn spec(id: &str) -> ForecastSpec {
    id.parse().unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn future_and_same_day_prices_are_never_read() {
    let ds = synth_market(5, 75, PriceProfile::Duck);
    let t = 70;
    let mut tampered = ds.clone();
    for d in t..ds.days() {
        for h in 0..24 {
            tampered.prices.set(d, h, 1e4 + (d * h) as f64);
        }
    }
    for d in t + 1..ds.days() {
        for h in 0..24 {
            tampered.load_fc.set(d, h, 1.0);
            tampered.res_fc.set(d, h, 1.0);
        }
    }
    // Commodity closes from t-1 on are not yet known at forecast time.
    for row in &mut tampered.commodities[t - 1..] {
        *row = [999.0; 4];
    }
    for id in [
        "ARX-direct-raw-het-56",
        "ARX-deviation-vst-pool-56",
        "LEAR-direct-vst-pool-56",
        "NARX-deviation-raw-het-56",
    ] {
        let s = spec(id);
        let a = forecast_day(&s, &ds, ds.dates()[t], &quick()).unwrap();
        let b = forecast_day(&s, &tampered, ds.dates()[t], &quick()).unwrap();
        assert_eq!(a, b, "{id}");
    }
}

#[test]
fn lag_one_model_reproduces_yesterday() {
    let ds = synth_market(8, 70, PriceProfile::Duck);
    let s = spec("ARX-direct-raw-het-56");
    // ARX frame: 3 deterministic terms, then Y(t-1,h), Y(t-2,h), Y(t-7,h), ...
    let mut coefficients = vec![0.0; 19];
    coefficients[3] = 1.0;
    let fit = LinearFit {
        coefficients,
        intercept: 0.0,
        fit_intercept: false,
        residual_variance: 0.0,
        lambda: None,
        rank: 1,
        rank_deficient: false,
    };
    let model = FittedModel {
        spec: s,
        hourly: vec![Regressor::Linear(fit); 24],
        daily_mean: None,
        vst: None,
    };
    for t in [63, 66, 69] {
        let f = predict_with(&model, &ds, ds.dates()[t], &quick()).unwrap();
        assert_eq!(&f.prices[..], ds.prices.row(t - 1));
    }
}

/// Prices from one linear process shared by all hours:
/// `P(t,h) = 8 + 0.5 P(t-1,h) + 0.2 P(t-7,h) + 0.01 L(t,h) + ε`.
fn hour_invariant_market(days: usize, seed: u64) -> MarketDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Normal<f64> = Normal::new(0.0, 4.0).unwrap();
    let dates = consecutive_dates(NaiveDate::from_ymd_opt(2019, 1, 1).unwrap(), days);
    let mut load = vec![vec![0.0; 24]; days];
    let mut res = vec![vec![0.0; 24]; days];
    let mut prices = vec![vec![40.0; 24]; days];
    for d in 0..days {
        for h in 0..24 {
            load[d][h] = 1000.0 + 300.0 * noise.sample(&mut rng).abs();
            res[d][h] = 200.0 + 50.0 * noise.sample(&mut rng).abs();
            if d >= 7 {
                prices[d][h] = 8.0
                    + 0.5 * prices[d - 1][h]
                    + 0.2 * prices[d - 7][h]
                    + 0.01 * load[d][h]
                    + noise.sample(&mut rng);
            }
        }
    }
    let commodities = (0..days)
        .map(|d| [20.0 + (d % 13) as f64, 70.0 + (d % 5) as f64, 90.0, 30.0 + (d % 7) as f64])
        .collect();
    MarketDataset::new(
        Panel::from_rows(dates.clone(), &prices).unwrap(),
        Panel::from_rows(dates.clone(), &load).unwrap(),
        Panel::from_rows(dates, &res).unwrap(),
        commodities,
    )
    .unwrap()
}

fn linear(r: &Regressor) -> &LinearFit {
    match r {
        Regressor::Linear(f) => f,
        Regressor::Narx(_) => panic!("expected a linear model"),
    }
}

/// Mean absolute gap between each hour's coefficients and the pooled ones.
fn het_pooled_gap(ds: &MarketDataset, window: usize, target: usize) -> f64 {
    let het = calibrate(&spec(&format!("ARX-direct-raw-het-{window}")), ds, ds.dates()[target], &quick()).unwrap();
    let pooled = calibrate(&spec(&format!("ARX-direct-raw-pool-{window}")), ds, ds.dates()[target], &quick()).unwrap();
    let shared = linear(&pooled.hourly[0]);
    // Lags and the hourly load are the coefficients the process actually uses.
    let idx = [3, 4, 5, 15];
    let mut total = 0.0;
    for m in &het.hourly {
        let fit = linear(m);
        total += idx.iter().map(|&i| (fit.coefficients[i] - shared.coefficients[i]).abs()).sum::<f64>();
    }
    total / (24 * idx.len()) as f64
}

#[test]
fn heterogeneous_fits_approach_pooled_on_hour_invariant_process() {
    let ds = hour_invariant_market(400, 17);
    let t = ds.days() - 1;
    let gaps: Vec<f64> = [56, 112, 365].iter().map(|&w| het_pooled_gap(&ds, w, t)).collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
}

#[test]
fn constant_daily_mean_passes_through_deviation_spec() {
    let mut ds = synth_market(12, 75, PriceProfile::Duck);
    let level = 55.0;
    for d in 0..ds.days() {
        let m = ds.prices.row_mean(d);
        for v in ds.prices.row_mut(d) {
            *v += level - m;
        }
    }
    let target = ds.dates()[70];
    let f = forecast_day_components(&spec("ARX-deviation-raw-het-56"), &ds, target, &quick()).unwrap();
    let mean = f.daily_mean.unwrap();
    assert!((mean - level).abs() < 1e-8, "daily mean forecast {mean}");
    let deviation = f.deviation.unwrap();
    for h in 0..24 {
        assert!((f.prices[h] - (deviation[h] + mean)).abs() < 1e-12);
    }
}

#[test]
fn vst_absorbs_affine_price_maps() {
    let ds = synth_market(3, 75, PriceProfile::Spiky);
    let (a, b) = (3.5, -20.0);
    let mut scaled = ds.clone();
    scaled.prices = ds.prices.map(|p| a * p + b);
    let t = ds.dates()[70];
    for id in ["ARX-direct-vst-het-56", "ARX-deviation-vst-pool-56", "LEAR-direct-vst-pool-56"] {
        let s = spec(id);
        let base = forecast_day(&s, &ds, t, &quick()).unwrap();
        let mapped: Vec<f64> = forecast_day(&s, &scaled, t, &quick())
            .unwrap()
            .iter()
            .map(|v| (v - b) / a)
            .collect();
        let scale = base.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let gap = max_abs_diff(&base, &mapped) / scale;
        assert!(gap < 1e-8, "{id}: relative gap {gap:e}");
    }
}

#[test]
fn pool_is_deterministic_across_thread_counts() {
    let ds = synth_market(9, 70, PriceProfile::Duck);
    let pool = PoolConfig {
        specs: vec![spec("NARX-direct-raw-het-56").base(), spec("ARX-direct-vst-pool-56").base()],
        windows: vec![56],
        averages: true,
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_pool(&ds, ds.dates()[66], ds.dates()[69], &pool, &quick()).unwrap())
    };
    let one = run(1);
    assert_eq!(one.len(), 4);
    assert_eq!(one, run(3));
}

#[test]
fn member_order_does_not_change_the_average() {
    let ds = synth_market(1, 70, PriceProfile::Duck);
    let dates = ds.dates()[60..63].to_vec();
    let base = spec("ARX-direct-raw-het-56");
    let members: Vec<ForecastMatrix> = (0..7)
        .map(|k| ForecastMatrix {
            spec: base.with_window(Window::Days(WINDOWS[k])),
            values: Panel::from_rows(dates.clone(), &[vec![k as f64 * 1.3; 24], vec![-(k as f64); 24], vec![0.1 * k as f64; 24]])
                .unwrap(),
        })
        .collect();
    let forward = average_forecasts(&members).unwrap();
    let mut reversed = members.clone();
    reversed.reverse();
    assert_eq!(forward, average_forecasts(&reversed).unwrap());
}
