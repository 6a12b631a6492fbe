use chrono::NaiveDate;
use epf_core::bess::{backtest, compute_profit, oracle_profit, select_schedule, BessSpec};
use epf_core::metrics::*;
use epf_core::panel::consecutive_dates;
use epf_core::Panel;
use proptest::collection::vec;
use proptest::prelude::*;

fn panel(days: usize, values: &[f64]) -> Panel {
    let dates = consecutive_dates(NaiveDate::from_ymd_opt(2023, 1, 1).unwrap(), days);
    Panel::new(dates, 24, values[..days * 24].to_vec()).unwrap()
}

fn prices() -> impl Strategy<Value = Vec<f64>> {
    vec(-100.0f64..400.0, 24)
}

fn spec_with_block(block: usize) -> BessSpec {
    BessSpec {
        name: format!("B{block}"),
        energy: 3.0,
        power: 3.0 / block as f64,
        block,
        ..BessSpec::bess_a()
    }
}

proptest! {
    #[test]
    fn rmse_dominates_mae(days in 1usize..6, a in vec(-50.0f64..50.0, 144), f in vec(-50.0f64..50.0, 144)) {
        let e = ErrorPanel::new(&panel(days, &a), &panel(days, &f)).unwrap();
        prop_assert!(rmse(&e) >= mae(&e) * (1.0 - 1e-12));
    }

    #[test]
    fn rank_metrics_ignore_monotone_maps(days in 1usize..6, a in vec(-50.0f64..50.0, 144), f in vec(-50.0f64..50.0, 144)) {
        let (actual, forecast) = (panel(days, &a), panel(days, &f));
        let mapped = forecast.map(|v| (v / 30.0).exp() + 0.5 * v);
        prop_assert_eq!(corr_f(&actual, &forecast).unwrap(), corr_f(&actual, &mapped).unwrap());
        prop_assert_eq!(mhd(&actual, &forecast).unwrap(), mhd(&actual, &mapped).unwrap());
        prop_assert_eq!(mpd(&actual, &forecast).unwrap(), mpd(&actual, &mapped).unwrap());
    }

    #[test]
    fn cov_e_shifts_by_h_log_k(e in vec(-20.0f64..20.0, 30 * 24), k in 0.1f64..10.0) {
        let base = ErrorPanel::from_panel(panel(30, &e)).unwrap();
        let scaled = ErrorPanel::from_panel(base.errors.map(|v| v * k.sqrt())).unwrap();
        let (c0, c1) = (cov_e(&base, false), cov_e(&scaled, false));
        prop_assume!(!c0.degenerate);
        prop_assert!((c1.value - c0.value - 24.0 * k.ln()).abs() < 1e-8 * c0.value.abs().max(1.0));
    }

    #[test]
    fn spearman_is_rank_invariant(x in vec(-10.0f64..10.0, 3..30), seed in 0u64..1000) {
        let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| (v * 1.7 + ((i as u64 * 31 + seed) % 7) as f64).sin()).collect();
        let base = spearman(&x, &y);
        let mapped: Vec<f64> = x.iter().map(|v| v.powi(3) + 2.0 * v).collect();
        prop_assert_eq!(base, spearman(&mapped, &y));
        prop_assert!((-1.0..=1.0).contains(&base.rho));
    }

    #[test]
    fn selected_schedule_is_feasible_and_optimal(p in prices(), block in 1usize..=6) {
        let spec = spec_with_block(block);
        let s = select_schedule(&p, &spec).unwrap();
        prop_assert!(s.is_feasible(block, 24));
        let day = NaiveDate::from_ymd_opt(2023, 1, 1).unwrap();
        let best = compute_profit(day, s, &p, &spec).unwrap().profit_abs;
        for h_ch in 1..=25 - 2 * block {
            for h_dis in h_ch + block..=25 - block {
                let other = epf_core::bess::DaySchedule { h_ch, h_dis };
                prop_assert!(compute_profit(day, other, &p, &spec).unwrap().profit_abs <= best);
            }
        }
    }

    #[test]
    fn oracle_dominates_any_forecast(a in vec(-100.0f64..400.0, 96), f in vec(-100.0f64..400.0, 96)) {
        let (actual, forecast) = (panel(4, &a), panel(4, &f));
        for spec in [BessSpec::bess_a(), BessSpec::bess_b()] {
            let oracle = oracle_profit(&actual, &spec).unwrap();
            let run = backtest(&forecast, &actual, &spec).unwrap();
            for (o, r) in oracle.iter().zip(&run) {
                prop_assert!(r.profit_abs <= o.profit_abs);
            }
        }
    }

    #[test]
    fn single_hour_blocks_beat_three_hour_blocks(a in vec(-100.0f64..400.0, 48)) {
        let actual = panel(2, &a);
        let one = oracle_profit(&actual, &BessSpec::bess_a()).unwrap();
        let three = oracle_profit(&actual, &BessSpec::bess_b()).unwrap();
        for (x, y) in one.iter().zip(&three) {
            prop_assert!(x.profit_per_mwh >= y.profit_per_mwh - 1e-9);
        }
    }

    #[test]
    fn lossless_battery_ignores_price_level(p in prices(), shift in -200.0f64..200.0, block in 1usize..=4) {
        let spec = BessSpec { eta_ch: 1.0, eta_dis: 1.0, ..spec_with_block(block) };
        let shifted: Vec<f64> = p.iter().map(|v| v + shift).collect();
        let s = select_schedule(&p, &spec).unwrap();
        let day = NaiveDate::from_ymd_opt(2023, 1, 1).unwrap();
        let a = compute_profit(day, s, &p, &spec).unwrap().profit_abs;
        let b = compute_profit(day, select_schedule(&shifted, &spec).unwrap(), &shifted, &spec).unwrap().profit_abs;
        prop_assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
    }
}
