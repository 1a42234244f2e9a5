use evtcast_core::envelope::EnvelopeIndexSeries;
use evtcast_core::evt::*;
use evtcast_core::{Error, Timestamp};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

fn rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Inverse-CDF GPD draws written independently of the library sampler.
fn draw_gpd(r: &mut Xoshiro256PlusPlus, xi: f64, sigma: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let u: f64 = 1.0 - r.random::<f64>();
            if xi == 0.0 {
                -sigma * u.ln()
            } else {
                sigma * (u.powf(-xi) - 1.0) / xi
            }
        })
        .collect()
}

fn survival(xi: f64, sigma: f64, z: f64) -> f64 {
    (1.0 + xi * z / sigma).max(0.0).powf(-1.0 / xi)
}

#[test]
fn sampler_matches_survival_function() {
    let z = draw_gpd(&mut rng(1), -0.125, 2.0, 20000);
    for q in [0.5, 1.0, 3.0, 6.0, 10.0] {
        let emp = z.iter().filter(|&&v| v > q).count() as f64 / z.len() as f64;
        assert!((emp - survival(-0.125, 2.0, q)).abs() < 0.01, "q={q}");
    }
}

#[test]
fn exponential_sample_recovers_zero_shape() {
    let z: Vec<f64> = (0..5000).map({
        let mut r = rng(2);
        move |_| -2.0 * (1.0 - r.random::<f64>()).ln()
    })
    .collect();
    let f = fit_gpd_constant(&z).unwrap();
    assert!(f.xi.abs() < 3.0 * f.se_xi, "{f:?}");
    assert!((f.sigma - 2.0).abs() < 3.0 * f.se_sigma, "{f:?}");
    assert_eq!(f.n, 5000);
}

#[test]
fn negative_shape_sample_recovered() {
    let z = draw_gpd(&mut rng(3), -0.125, 2.0, 5000);
    let f = fit_gpd_constant(&z).unwrap();
    assert!((f.xi + 0.125).abs() < 3.0 * f.se_xi, "{f:?}");
    assert!((f.sigma - 2.0).abs() < 3.0 * f.se_sigma, "{f:?}");
    let zmax = z.iter().copied().fold(0.0, f64::max);
    assert!(zmax < -f.sigma / f.xi);
}

#[test]
fn degenerate_and_small_samples_rejected() {
    assert!(matches!(fit_gpd_constant(&[1.5; 20]), Err(Error::Fit { .. })));
    assert!(matches!(fit_gpd_constant(&[1.0, 2.0, 3.0]), Err(Error::SampleSize { needed: 10, got: 3 })));
    assert!(matches!(fit_gpd_constant(&[1.0, -2.0, 3.0, 1.0, 2.0, 3.0, 1.0, 2.0, 3.0, 4.0]), Err(Error::Data(_))));
}

fn fd_score(z: &[f64], xi: f64, sigma: f64) -> [f64; 2] {
    let h = 1e-5;
    let tau = sigma.ln();
    let ll = |x: f64, t: f64| gpd_loglik(z, x, t.exp());
    [
        (ll(xi + h, tau) - ll(xi - h, tau)) / (2.0 * h),
        (ll(xi, tau + h) - ll(xi, tau - h)) / (2.0 * h),
    ]
}

#[test]
fn analytic_score_matches_finite_differences() {
    let z = draw_gpd(&mut rng(4), -0.125, 2.0, 400);
    let zmax = z.iter().copied().fold(0.0, f64::max);
    let mut r = rng(5);
    let mut checked = 0;
    while checked < 20 {
        let xi = -0.4 + 0.8 * r.random::<f64>();
        let sigma = 0.5 + 4.0 * r.random::<f64>();
        if xi < 0.0 && zmax >= -0.9 * sigma / xi {
            continue;
        }
        let a = gpd_score(&z, xi, sigma).unwrap();
        let n = fd_score(&z, xi, sigma);
        for k in 0..2 {
            let scale = a[k].abs().max(1.0);
            assert!((a[k] - n[k]).abs() / scale < 1e-6, "xi={xi} sigma={sigma} k={k}: {} vs {}", a[k], n[k]);
        }
        checked += 1;
    }
}

#[test]
fn score_is_accurate_near_zero_shape() {
    let z = draw_gpd(&mut rng(6), 0.0, 1.5, 300);
    for xi in [-1e-3, -1e-7, 0.0, 1e-7, 1e-3] {
        let a = gpd_score(&z, xi, 1.4).unwrap();
        let n = fd_score(&z, xi, 1.4);
        for k in 0..2 {
            assert!((a[k] - n[k]).abs() / a[k].abs().max(1.0) < 1e-6, "xi={xi} k={k}");
        }
    }
}

#[test]
fn optimum_is_a_local_maximum_with_vanishing_gradient() {
    let z = draw_gpd(&mut rng(7), -0.125, 2.0, 2000);
    let f = fit_gpd_constant(&z).unwrap();
    let best = gpd_loglik(&z, f.xi, f.sigma);
    assert!((best - f.loglik).abs() < 1e-9 * best.abs());
    for dx in [-0.01, 0.0, 0.01] {
        for ds in [0.99, 1.0, 1.01] {
            assert!(gpd_loglik(&z, f.xi + dx, f.sigma * ds) <= best + 1e-9);
        }
    }
    let g = fd_score(&z, f.xi, f.sigma);
    assert!((g[0] * g[0] + g[1] * g[1]).sqrt() / (z.len() as f64) < 1e-4);
}

#[test]
fn quantile_inverts_cdf() {
    for xi in [-0.3, 0.0, 0.2] {
        for p in [0.01, 0.3, 0.9, 0.999] {
            let q = gpd_quantile(xi, 2.0, p);
            assert!((gpd_cdf(xi, 2.0, q) - p).abs() < 1e-12);
        }
    }
}

/// Anderson-Darling and Cramer-von Mises statistics by numeric integration of
/// their defining integrals over the probability scale.
fn gof_by_quadrature(u: &[f64]) -> (f64, f64) {
    let mut s = u.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let m = 400_000;
    let (mut ad, mut cvm) = (0.0, 0.0);
    for k in 0..m {
        let x = (k as f64 + 0.5) / m as f64;
        let fn_ = s.partition_point(|&v| v <= x) as f64 / n;
        let d = (fn_ - x) * (fn_ - x);
        cvm += d / m as f64;
        ad += d / (x * (1.0 - x)) / m as f64;
    }
    (n * ad, n * cvm)
}

#[test]
fn statistics_match_integral_definitions() {
    let z = draw_gpd(&mut rng(8), -0.1, 3.0, 40);
    let (ad, cvm) = gof_statistics(&z, -0.1, 3.0);
    let u: Vec<f64> = z.iter().map(|&v| 1.0 - survival(-0.1, 3.0, v)).collect();
    let (ad_q, cvm_q) = gof_by_quadrature(&u);
    assert!((cvm - cvm_q).abs() < 1e-3, "{cvm} vs {cvm_q}");
    assert!((ad - ad_q).abs() / ad_q < 2e-2, "{ad} vs {ad_q}");
}

#[test]
fn bootstrap_pvalues_are_calibrated_under_the_null() {
    let mut pass = 0;
    for seed in 0..50 {
        let z = draw_gpd(&mut rng(100 + seed), -0.1, 4.0, 500);
        let f = fit_gpd_constant(&z).unwrap();
        let (pa, pc) = gof_pvalues(&z, &f, 199, seed).unwrap();
        if pa > 0.10 && pc > 0.10 {
            pass += 1;
        }
    }
    assert!(pass >= 43, "{pass}/50");
}

#[test]
fn bootstrap_rejects_point_mass_mixture() {
    let mut r = rng(9);
    let z: Vec<f64> = (0..300)
        .map(|i| match i % 3 {
            0 => 3.0,
            1 => r.random::<f64>(),
            _ => 1.0 - 2.0 * (1.0 - r.random::<f64>()).ln(),
        })
        .collect();
    let f = fit_gpd_constant(&z).unwrap();
    let (pa, pc) = gof_pvalues(&z, &f, 199, 1).unwrap();
    assert!(pa < 0.01 && pc < 0.01, "{pa} {pc}");
}

#[test]
fn pvalues_are_reproducible_and_need_replicates() {
    let z = draw_gpd(&mut rng(10), -0.1, 4.0, 200);
    let f = fit_gpd_constant(&z).unwrap();
    assert_eq!(gof_pvalues(&z, &f, 49, 3).unwrap(), gof_pvalues(&z, &f, 49, 3).unwrap());
    assert!(matches!(gof_pvalues(&z, &f, 0, 3), Err(Error::Parameter(_))));
}

#[test]
fn scan_on_pure_gpd_picks_lowest_feasible_point() {
    let y: Vec<f64> = draw_gpd(&mut rng(11), -0.1, 4.0, 800).into_iter().map(|z| 60.0 + z).collect();
    let grid = [59.0, 60.0, 61.0, 62.0];
    let cfg = ScanConfig { alpha: 0.10, n_boot: 99, seed: 4 };
    let sel = threshold_scan_values(&y, &grid, &cfg).unwrap();
    let lowest_tested = sel.points.iter().filter(|p| p.p_ad.is_some()).map(|p| p.threshold).fold(f64::INFINITY, f64::min);
    assert!(sel.chosen >= 60.0);
    assert_eq!(sel.grid(), grid.to_vec());
    let cp = sel.chosen_point();
    assert!(cp.p_ad.unwrap() >= 0.10 && cp.p_cvm.unwrap() >= 0.10);
    if lowest_tested < sel.chosen {
        let below = sel.points.iter().find(|p| p.threshold == lowest_tested).unwrap();
        assert!(below.p_ad.unwrap().min(below.p_cvm.unwrap()) < 0.10);
    }
}

#[test]
fn scan_without_enough_excesses_is_a_selection_error() {
    let y: Vec<f64> = (0..100).map(|i| i as f64 / 10.0).collect();
    let r = threshold_scan_values(&y, &[8.0, 9.0], &ScanConfig::default());
    assert!(matches!(r, Err(Error::Selection { ref pvalues }) if pvalues.is_empty()));
    assert!(matches!(threshold_scan_values(&y, &[2.0, 1.0], &ScanConfig::default()), Err(Error::Parameter(_))));
}

#[test]
fn scan_stops_at_the_first_rejection() {
    let mut r = rng(12);
    let mut y: Vec<f64> = (0..4000).map(|_| 50.0 + 3.0 * normal(&mut r)).collect();
    y.extend(draw_gpd(&mut r, -0.1, 4.0, 300).into_iter().map(|z| 70.0 + z));
    let grid: Vec<f64> = (60..=80).map(f64::from).collect();
    let sel = threshold_scan_values(&y, &grid, &ScanConfig { alpha: 0.1, n_boot: 99, seed: 1 }).unwrap();
    let tested: Vec<&ScanPoint> = sel.points.iter().filter(|p| p.p_ad.is_some()).collect();
    let lowest = tested.first().unwrap();
    for p in &tested {
        let ok = p.p_ad.unwrap().min(p.p_cvm.unwrap()) >= 0.1;
        assert_eq!(ok, p.threshold >= sel.chosen, "{p:?}");
    }
    assert!(lowest.threshold < sel.chosen);
    for p in &sel.points {
        if p.n_exceed < MIN_EXCESSES {
            assert!(p.p_ad.is_none());
        }
    }
}

fn normal(r: &mut Xoshiro256PlusPlus) -> f64 {
    let (u1, u2): (f64, f64) = (1.0 - r.random::<f64>(), r.random());
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[test]
fn default_grid_spans_median_to_upper_percentile() {
    let y: Vec<f64> = (0..=1000).map(|i| i as f64 / 10.0).collect();
    let g = default_grid(&y).unwrap();
    assert_eq!(g.first(), Some(&50.0));
    assert_eq!(g.last(), Some(&99.0));
    assert!(g.windows(2).all(|w| w[1] - w[0] == 1.0));
}

#[test]
fn multi_event_rule_takes_the_lowest() {
    assert_eq!(multi_event_threshold(&[89.0, 96.0, 85.0]).unwrap(), 85.0);
    assert_eq!(multi_event_threshold(&[85.0]).unwrap(), 85.0);
    assert_eq!(multi_event_threshold(&[70.5, 70.5]).unwrap(), 70.5);
    assert!(matches!(multi_event_threshold(&[]), Err(Error::Parameter(_))));
}

#[test]
fn exceedance_indicators_use_strict_inequality() {
    let idx = EnvelopeIndexSeries::from_index(vec![84.0, 86.0, 85.0], Timestamp::EPOCH, 1.0).unwrap();
    let ds = exceedances(&idx, 85.0, std::time::Duration::from_secs(3600)).unwrap();
    assert_eq!(ds.indicators(), &[false, true, false]);
    assert_eq!(ds.excess(1), Some(1.0));
    assert_eq!(ds.excess(0), None);
    assert_eq!(ds.threshold(), 85.0);
    assert_eq!(ds.lag().as_secs(), 3600);
    let none = exceedances(&idx, 90.0, std::time::Duration::ZERO).unwrap();
    assert_eq!(none.n_exceed(), 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn multi_event_threshold_is_a_lower_bound(v in prop::collection::vec(0.0f64..200.0, 1..10)) {
        let m = multi_event_threshold(&v).unwrap();
        prop_assert!(v.iter().all(|&x| m <= x));
        prop_assert!(v.contains(&m));
    }

    #[test]
    fn chosen_threshold_rises_with_alpha(seed in 0u64..1000) {
        let mut r = rng(seed);
        let mut y: Vec<f64> = (0..1500).map(|_| 50.0 + 3.0 * normal(&mut r)).collect();
        y.extend(draw_gpd(&mut r, -0.1, 4.0, 150).into_iter().map(|z| 70.0 + z));
        let grid: Vec<f64> = (66..=76).map(f64::from).collect();
        let mut last = f64::NEG_INFINITY;
        for alpha in [0.01, 0.05, 0.1, 0.3] {
            let cfg = ScanConfig { alpha, n_boot: 39, seed };
            match threshold_scan_values(&y, &grid, &cfg) {
                Ok(sel) => { prop_assert!(sel.chosen >= last); last = sel.chosen; }
                Err(_) => last = f64::INFINITY,
            }
        }
    }
}
