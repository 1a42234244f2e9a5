use std::collections::BTreeMap;
use std::time::Duration;

use evtcast_core::envelope::EnvelopeIndexSeries;
use evtcast_core::evt::GpdFit;
use evtcast_core::features::{Domain, Feature, FeatureSet, Source};
use evtcast_core::forecast::*;
use evtcast_core::preprocess::{CovariateMatrix, TransformSpec};
use evtcast_core::regress::{excess_survival, FitDiagnostics, GpdModel, LinearPredictor, LogisticModel, Shape};
use evtcast_core::trace::{bandpass, BandSpec, SeismicTrace};
use evtcast_core::{Error, Timestamp};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

fn hourly() -> ForecastConfig {
    ForecastConfig {
        horizon: Duration::from_secs(3600),
        window: Duration::from_secs(1800),
        cadence: Duration::from_secs(10),
        ..Default::default()
    }
}

fn covariates(start: Timestamp, rows: usize) -> CovariateMatrix {
    let ts: Vec<Timestamp> = (0..rows as i64).map(|k| start.offset(k * 10_000_000)).collect();
    let col: Vec<f64> = (0..rows).map(|k| (k as f64 * 0.37).sin()).collect();
    CovariateMatrix::from_columns(ts, vec![("x".into(), col)]).unwrap()
}

fn index(start: Timestamp, secs: usize) -> EnvelopeIndexSeries {
    let v: Vec<f64> = (0..=secs).map(|k| 40.0 + (k as f64 * 0.01).sin() * 20.0).collect();
    EnvelopeIndexSeries::from_index(v, start, 1.0).unwrap()
}

#[test]
fn two_hours_align_to_361_rows() {
    let start = Timestamp::from_secs(1_500_000_000);
    let (ds, x, y) = build_dataset(&index(start, 7200), &covariates(start, 721), 50.0, &hourly()).unwrap();
    assert_eq!(ds.len(), 361);
    assert_eq!(x.nrows(), 361);
    assert_eq!(y.len(), 361);
    assert_eq!(ds.lag(), Duration::from_secs(3600));
    let idx = index(start, 7200);
    for (i, &t) in x.timestamps().iter().enumerate() {
        assert_eq!(y[i], idx.value_at(t + Duration::from_secs(3600)).unwrap());
        assert_eq!(ds.indicators()[i], y[i] > 50.0);
    }
}

#[test]
fn shifting_clocks_keeps_the_pairing() {
    let a = Timestamp::from_secs(1_000);
    let b = Timestamp::from_secs(1_000 + 12_345);
    let (da, _, ya) = build_dataset(&index(a, 7200), &covariates(a, 721), 50.0, &hourly()).unwrap();
    let (db, _, yb) = build_dataset(&index(b, 7200), &covariates(b, 721), 50.0, &hourly()).unwrap();
    assert_eq!(ya, yb);
    assert_eq!(da.indicators(), db.indicators());
}

#[test]
fn invalid_horizons_and_empty_overlap_fail() {
    let start = Timestamp::EPOCH;
    let zero = ForecastConfig { horizon: Duration::ZERO, ..hourly() };
    assert!(matches!(build_dataset(&index(start, 100), &covariates(start, 10), 50.0, &zero), Err(Error::Config(_))));
    let late = ForecastConfig { cadence: Duration::from_secs(7200), ..hourly() };
    assert!(matches!(late.validate(), Err(Error::Config(_))));
    assert!(matches!(
        build_dataset(&index(start, 100), &covariates(start, 10), 50.0, &hourly()),
        Err(Error::Alignment(_))
    ));
}

fn predictor(intercept: f64, coefs: &[(&str, f64)]) -> LinearPredictor {
    LinearPredictor {
        intercept,
        coefficients: coefs.iter().map(|(n, c)| (n.to_string(), *c)).collect(),
        transform: TransformSpec::default(),
    }
}

fn diag() -> FitDiagnostics {
    FitDiagnostics { loglik: 0.0, aic: 0.0, iterations: 0, converged: true, standard_errors: vec![] }
}

fn pipeline(config: ForecastConfig, shape: Shape, logit: LinearPredictor, lognu: LinearPredictor) -> Pipeline {
    Pipeline {
        config,
        threshold: 60.0,
        events: vec![],
        gpd_fit: GpdFit { xi: shape.xi(), sigma: 2.0, se_xi: 0.01, se_sigma: 0.1, n: 100, loglik: 0.0 },
        logistic: LogisticModel { predictor: logit, diagnostics: diag() },
        excess: GpdModel { shape, predictor: lognu, diagnostics: diag() },
    }
}

fn constant_pipeline(xi: f64, phi: f64, nu: f64) -> Pipeline {
    let logit = (phi / (1.0 - phi)).ln();
    pipeline(hourly(), Shape::Gpd(xi), predictor(logit, &[]), predictor(nu.ln(), &[]))
}

#[test]
fn return_level_closed_form() {
    let p = constant_pipeline(-0.125, 0.5, 2.0);
    let x = BTreeMap::new();
    let y = return_level(&p, &x, 0.25).unwrap();
    assert!((y - 60.0 - 16.0 * (1.0 - 0.5f64.powf(0.125))).abs() < 1e-12);
    assert!((y - 61.32794).abs() < 1e-5);
    let (phi, nu) = p.predict(&x).unwrap();
    let mut lo = 0.0;
    let mut hi = 16.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if p.tail(phi, nu, mid) > 0.25 { lo = mid } else { hi = mid }
    }
    assert!((y - 60.0 - lo).abs() < 1e-9);
    assert!((return_level(&p, &x, phi).unwrap() - 60.0).abs() < 1e-9);
    assert!(matches!(return_level(&p, &x, 0.6), Err(Error::Parameter(_))));
    assert!(matches!(return_level(&p, &x, 0.0), Err(Error::Parameter(_))));
}

#[test]
fn tail_at_zero_and_beyond_the_endpoint() {
    let p = constant_pipeline(-0.25, 0.3, 2.0);
    let pt = p.point(Timestamp::EPOCH, &BTreeMap::new(), &[0.0, 1.0, 8.0, 50.0]).unwrap();
    assert!((pt.tail[0].1 - pt.phi).abs() <= 1e-12);
    assert_eq!(pt.tail[2].1, 0.0);
    assert_eq!(pt.tail[3].1, 0.0);
    assert_eq!(pt.target_time, Timestamp::from_secs(3600));
    assert_eq!(pt.threshold, 60.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tail_is_bounded_monotone_and_inverted_by_return_level(
        xi in -0.8f64..0.5, phi in 0.01f64..0.99, nu in 0.1f64..10.0, q in 0.001f64..1.0
    ) {
        let p = constant_pipeline(xi, phi, nu);
        let (phi, nu) = p.predict(&BTreeMap::new()).unwrap();
        prop_assert!((p.tail(phi, nu, 0.0) - phi).abs() <= 1e-12);
        let mut prev = phi;
        for k in 0..100 {
            let t = p.tail(phi, nu, k as f64 * 0.5);
            prop_assert!(t <= prev && t >= 0.0);
            prev = t;
        }
        let target = q * phi;
        let y = return_level_at(60.0, Shape::Gpd(xi), phi, nu, target).unwrap();
        prop_assert!((p.tail(phi, nu, y - 60.0) - target).abs() <= 1e-8);
        let y2 = return_level_at(60.0, Shape::Gpd(xi), phi, nu, target * 0.5).unwrap();
        prop_assert!(y2 > y);
    }
}

const B1: BandSpec = BandSpec::Bandpass { lo_hz: 1.0, hi_hz: 3.0 };
const B2: BandSpec = BandSpec::Bandpass { lo_hz: 3.0, hi_hz: 6.0 };

fn small_config() -> ForecastConfig {
    ForecastConfig {
        horizon: Duration::from_secs(60),
        window: Duration::from_secs(30),
        cadence: Duration::from_secs(5),
        bands: vec![B1, B2],
        index_band: B1,
        feature_set: FeatureSet {
            features: vec![Feature::Energy, Feature::Kurtosis, Feature::RateOfAttack],
            domains: vec![Domain::Temporal, Domain::Cepstral],
            sources: vec![Source::Signal, Source::Envelope],
        },
        ..Default::default()
    }
}

fn raw(seed: u64, secs: f64, start: Timestamp) -> SeismicTrace {
    let mut r = Xoshiro256PlusPlus::seed_from_u64(seed);
    let n = (secs * 20.0) as usize;
    let s = (0..n).map(|i| (r.random::<f64>() - 0.5) * (1.0 + (i as f64 / 400.0).sin().abs())).collect();
    SeismicTrace::new(s, 20.0, start, BandSpec::Raw).unwrap()
}

fn linked_pipeline() -> Pipeline {
    pipeline(
        small_config(),
        Shape::Gpd(-0.1),
        predictor(-1.0, &[("energy_temporal_signal_bp1-3", 0.01), ("kurtosis_cepstral_envelope_bp3-6", -0.2)]),
        predictor(0.5, &[("roa_temporal_envelope_bp1-3", 0.3)]),
    )
}

#[test]
fn streaming_in_chunks_matches_whole_trace() {
    let p = linked_pipeline();
    let start = Timestamp::from_micros(1_234_567);
    let r = raw(1, 300.0, start);
    let bands: Vec<SeismicTrace> = [B1, B2].iter().map(|&b| bandpass(&r, b).unwrap()).collect();
    let whole = forecast_bands(&p, &bands, &[0.0, 2.0]).unwrap();
    assert_eq!(whole.len(), 55);
    assert_eq!(whole[0].issue_time, start + Duration::from_secs(30));
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(2);
    let mut f = Forecaster::new(&p, start, 20.0, &[0.0, 2.0]).unwrap();
    let mut streamed = Vec::new();
    let mut at = 0;
    while at < bands[0].len() {
        let len = rng.random_range(1..700).min(bands[0].len() - at);
        let chunks: Vec<&[f64]> = bands.iter().map(|b| &b.samples()[at..at + len]).collect();
        streamed.extend(f.push(&chunks).unwrap());
        at += len;
    }
    assert_eq!(streamed, whole);
}

#[test]
fn forecasts_match_the_batch_feature_matrix() {
    let p = linked_pipeline();
    let r = raw(3, 200.0, Timestamp::EPOCH);
    let bands: Vec<SeismicTrace> = [B1, B2].iter().map(|&b| bandpass(&r, b).unwrap()).collect();
    let x = evtcast_core::features::feature_matrix(&bands, &p.config).unwrap();
    let batch = p.predict_matrix(&x).unwrap();
    let live = forecast(&p, &r, &[1.0]).unwrap();
    assert_eq!(live.len(), batch.len());
    for (pt, (phi, nu)) in live.iter().zip(batch) {
        assert!((pt.phi - phi).abs() < 1e-12 && (pt.nu - nu).abs() < 1e-12);
        let s = excess_survival(&p.excess, &BTreeMap::from([("roa_temporal_envelope_bp1-3".to_string(), 0.0)]), 0.0).unwrap();
        assert_eq!(s, 1.0);
    }
}

#[test]
fn forecaster_rejects_bad_input() {
    let p = linked_pipeline();
    assert!(matches!(Forecaster::new(&p, Timestamp::EPOCH, 20.0, &[-1.0]), Err(Error::Parameter(_))));
    let mut f = Forecaster::new(&p, Timestamp::EPOCH, 20.0, &[]).unwrap();
    assert!(matches!(f.push(&[&[0.0; 4]]), Err(Error::Alignment(_))));
    assert!(matches!(f.push(&[&[0.0; 4], &[0.0; 3]]), Err(Error::Alignment(_))));
    let r = raw(4, 100.0, Timestamp::EPOCH);
    let wrong = [bandpass(&r, B2).unwrap(), bandpass(&r, B1).unwrap()];
    assert!(matches!(forecast_bands(&p, &wrong, &[]), Err(Error::Alignment(_))));
}

#[test]
fn pipeline_survives_a_json_round_trip() {
    let p = linked_pipeline();
    let back: Pipeline = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
    assert_eq!(back, p);
    let r = raw(5, 120.0, Timestamp::EPOCH);
    assert_eq!(forecast(&back, &r, &[0.5]).unwrap(), forecast(&p, &r, &[0.5]).unwrap());
}
