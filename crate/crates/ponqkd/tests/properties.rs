//! Module invariants over randomized inputs.

use proptest::prelude::*;

use ponqkd::detector::{register_counts, SpadParams};
use ponqkd::dps::{monte_carlo_run, raw_rate_and_qber, secure_key_fraction, wilson_interval, DpsLinkParams};
use ponqkd::odn::{density_by_segment, PonTopology};
use ponqkd::raman::{
    backward_raman_power, backward_raman_saturation, forward_raman_power, raman_efficiency, FiberSpan,
    RamanProfile,
};
use ponqkd::scenario::{load_preset, sweep, Axis, Rows};
use ponqkd::spectral::{
    filter_transmission, wavelength_to_frequency, ChannelGroup, ClassicalChannel, Direction, FilterSpec, Mode,
    Wavelength,
};
use ponqkd::units::{dbm_to_watt, watt_to_dbm};

fn cfg() -> ProptestConfig {
    ProptestConfig {
        cases: 256,
        ..ProptestConfig::default()
    }
}

fn link() -> DpsLinkParams {
    load_preset("fig3c_dark_ngpon2").unwrap().link_params()
}

fn spad() -> SpadParams {
    load_preset("fig3c_dark_ngpon2").unwrap().spad_params()
}

fn topology(feeder: f64, drop: f64, split_n: u32, active: u32) -> PonTopology {
    PonTopology {
        feeder_ds: FiberSpan::new(feeder).unwrap(),
        feeder_us: FiberSpan::new(feeder).unwrap(),
        drop: FiberSpan::new(drop).unwrap(),
        split_m: 2,
        split_n,
        n_onus_active: active.min(split_n),
        splitter_excess_db: 1.5,
        directivity_db: 55.0,
        co_mux_loss_db: 3.0,
        quantum_bypasses_first_stage: true,
    }
}

fn channel(nm: f64, dbm: f64, up: bool) -> ClassicalChannel {
    ClassicalChannel::new(
        Wavelength::new(nm).unwrap(),
        dbm,
        if up { Direction::Upstream } else { Direction::Downstream },
        Mode::Continuous,
        if up { ChannelGroup::Upstream } else { ChannelGroup::Downstream },
    )
    .unwrap()
}

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn dbm_round_trip(dbm in -60.0..20.0f64) {
        prop_assert!((watt_to_dbm(dbm_to_watt(dbm)) - dbm).abs() < 1e-9);
    }

    #[test]
    fn frequency_round_trip(nm in 1200.0..1700.0f64) {
        let thz = wavelength_to_frequency(nm).unwrap();
        prop_assert!((Wavelength::from_thz(thz).unwrap().nm() - nm).abs() < 1e-9);
    }

    #[test]
    fn filter_peaks_at_center_and_falls_off(center in 1300.0..1600.0f64, d1 in 0.0..3.0f64, d2 in 0.0..3.0f64) {
        let f = FilterSpec::lan_wdm(Wavelength::new(center).unwrap());
        let peak = filter_transmission(&f, center);
        let (near, far) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        let t_near = filter_transmission(&f, center + near);
        let t_far = filter_transmission(&f, center + far);
        prop_assert!(t_near <= peak * (1.0 + 1e-12));
        prop_assert!(t_far <= t_near * (1.0 + 1e-12));
    }

    #[test]
    fn raman_powers_linear_in_pump_and_efficiency(
        p in 1e-6..1e-1f64, l in 0.0..60.0f64, ap in 0.15..0.6f64, as_ in 0.15..0.6f64, k in 0.5..5.0f64,
    ) {
        for f in [forward_raman_power, backward_raman_power] {
            let base = f(p, l, ap, as_, 1e-8, 1.0).unwrap();
            let scaled_p = f(k * p, l, ap, as_, 1e-8, 1.0).unwrap();
            let scaled_r = f(p, l, ap, as_, k * 1e-8, 1.0).unwrap();
            prop_assert!((scaled_p - k * base).abs() <= 1e-12 * scaled_p.max(1e-300));
            prop_assert!((scaled_r - k * base).abs() <= 1e-12 * scaled_r.max(1e-300));
        }
    }

    #[test]
    fn backward_raman_grows_to_saturation(
        p in 1e-6..1e-1f64, l in 0.0..60.0f64, dl in 0.0..10.0f64, ap in 0.15..0.6f64, as_ in 0.15..0.6f64,
    ) {
        let a = backward_raman_power(p, l, ap, as_, 1e-8, 1.0).unwrap();
        let b = backward_raman_power(p, l + dl, ap, as_, 1e-8, 1.0).unwrap();
        prop_assert!(b >= a * (1.0 - 1e-12));
        prop_assert!(b <= backward_raman_saturation(p, ap, as_, 1e-8, 1.0) * (1.0 + 1e-12));
    }

    #[test]
    fn forward_raman_below_lossless_bound(p in 1e-6..1e-1f64, l in 0.0..60.0f64, ap in 0.15..0.6f64, as_ in 0.15..0.6f64) {
        let f = forward_raman_power(p, l, ap, as_, 1e-8, 1.0).unwrap();
        prop_assert!(f >= 0.0 && f <= p * 1e-8 * l * (1.0 + 1e-12));
    }

    #[test]
    fn anti_stokes_weaker_than_stokes(a in 1290.0..1620.0f64, b in 1290.0..1620.0f64) {
        prop_assume!((a - b).abs() > 0.5);
        let p = RamanProfile::silica(1.0).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        // pump at hi scattering up to lo is anti-Stokes
        prop_assert!(raman_efficiency(&p, hi, lo, 293.0) <= raman_efficiency(&p, lo, hi, 293.0));
    }

    #[test]
    fn noise_density_linear_in_launch_power(
        feeder in 0.5..30.0f64, drop in 0.0..3.0f64, pump in 1480.0..1600.0f64, probe in 1290.0..1330.0f64,
        dbm in -10.0..5.0f64, up in any::<bool>(),
    ) {
        let t = topology(feeder, drop, 16, 1);
        let p = RamanProfile::silica(2e-8).unwrap();
        let (d1, f1) = density_by_segment(&t, &p, &[channel(pump, dbm, up)], probe).unwrap();
        let (d2, f2) = density_by_segment(&t, &p, &[channel(pump, dbm + 3.0, up)], probe).unwrap();
        let k = 10f64.powf(0.3);
        prop_assert!((d2 - k * d1).abs() <= 1e-9 * d2.max(1e-300));
        prop_assert!((f2 - k * f1).abs() <= 1e-9 * f2.max(1e-300));
    }

    #[test]
    fn more_split_less_drop_noise(
        feeder in 0.5..30.0f64, drop in 0.01..3.0f64, pump in 1480.0..1600.0f64, probe in 1290.0..1330.0f64,
        up in any::<bool>(), k in 1u32..5,
    ) {
        let p = RamanProfile::silica(2e-8).unwrap();
        let src = [channel(pump, 5.0, up)];
        let n = 1u32 << k;
        let (a, _) = density_by_segment(&topology(feeder, drop, n, 1), &p, &src, probe).unwrap();
        let (b, _) = density_by_segment(&topology(feeder, drop, 2 * n, 1), &p, &src, probe).unwrap();
        prop_assert!(b <= a);
    }

    #[test]
    fn dead_time_bounds(sig in 0.0..1e7f64, noise in 0.0..1e6f64, tau in 0.0..1e-4f64, ap in 0.0..0.2f64) {
        let s = SpadParams { efficiency: 0.1, dark_rate: 500.0, dead_time: tau, window_accept: 0.2, afterpulse_frac: ap };
        let c = register_counts(sig, noise, &s);
        prop_assert!(c.total_registered <= c.raw_total * (1.0 + 1e-12));
        if tau > 0.0 {
            prop_assert!(c.total_registered < 1.0 / tau);
        }
        prop_assert!((c.signal + c.noise - c.total_registered).abs() <= 1e-9 * c.total_registered.max(1.0));
        let more = register_counts(sig * 1.5 + 1.0, noise, &s);
        prop_assert!(more.total_registered >= c.total_registered);
    }

    #[test]
    fn qber_is_a_probability(budget in 0.0..60.0f64, noise in 0.0..1e5f64) {
        let r = raw_rate_and_qber(&link(), budget, noise, &spad()).unwrap();
        prop_assert!((0.0..=0.5).contains(&r.qber));
        prop_assert!(r.raw_rate >= 0.0);
    }

    #[test]
    fn more_noise_more_errors(budget in 5.0..40.0f64, noise in 0.0..1e4f64, extra in 1.0..1e4f64) {
        let (l, s) = (link(), spad());
        let a = raw_rate_and_qber(&l, budget, noise, &s).unwrap();
        let b = raw_rate_and_qber(&l, budget, noise + extra, &s).unwrap();
        prop_assert!(b.qber >= a.qber);
    }

    #[test]
    fn key_fraction_decreasing(e in 0.0..0.49f64, de in 1e-4..0.01f64) {
        let a = secure_key_fraction(e, 0.1, 1.16).unwrap();
        let b = secure_key_fraction((e + de).min(0.4999), 0.1, 1.16).unwrap();
        prop_assert!(a.is_finite() && b <= a);
    }

    #[test]
    fn wilson_contains_estimate(k in 0u64..1000, extra in 0u64..100_000, z in 0.5..4.0f64) {
        let n = k + extra + 1;
        let (lo, hi) = wilson_interval(k, n, z);
        let p = k as f64 / n as f64;
        prop_assert!(lo <= p && p <= hi);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    #[test]
    fn monte_carlo_deterministic_per_seed(seed in any::<u64>(), budget in 6.0..30.0f64, noise in 0.0..3000.0f64) {
        let (l, s) = (link(), spad());
        let a = monte_carlo_run(&l, budget, noise, &s, 200_000, seed).unwrap();
        let b = monte_carlo_run(&l, budget, noise, &s, 200_000, seed).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(a.errors <= a.registered);
    }

    #[test]
    fn sweep_rows_follow_value_order(values in proptest::collection::vec(6.0..25.0f64, 1..8)) {
        let cfg = load_preset("fig3c_dark_ngpon2").unwrap();
        let art = sweep(&cfg, Axis::BudgetDb, &values).unwrap();
        let Rows::Links { rows, .. } = &art.rows else { panic!("link rows") };
        let got: Vec<f64> = rows.iter().map(|r| r.axis_value).collect();
        prop_assert_eq!(got, values);
    }

    #[test]
    fn planner_choice_is_open_and_in_band(t in 0.0..=1.0f64) {
        let mut cfg = load_preset("fig3d_take_rate").unwrap();
        cfg.planner.as_mut().unwrap().grid.step_nm = 2.5;
        let tree = cfg.mixed_tree(t).unwrap();
        let r = cfg.plan_at(t).unwrap();
        prop_assert!(tree.feasible(r.lambda_opt.nm()));
        prop_assert!(r.curve.iter().all(|&(_, v)| v >= 0.0));
        let open_min = r.curve.iter().filter(|(nm, _)| tree.feasible(*nm)).map(|&(_, v)| v).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(r.noise_at_opt, open_min);
    }
}
