//! Rolling-window covariates in the temporal, frequency and cepstral domains.
//!
//! Every issue time `t` on the cadence grid gets one row computed from the
//! samples in `[t - W, t)` of each band. For each band the window is viewed as
//! the raw signal and as its envelope (the modulus of the window's own analytic
//! signal, so a row never depends on samples outside its window). Each of those
//! is mapped into the configured domains and summarised by the configured
//! features. Columns are named `<feature>_<domain>_<source>_<band>`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::envelope::{hilbert_with, FftPlanner};
use crate::forecast::ForecastConfig;
use crate::math::{floor, hypot, ln, sqrt};
use crate::preprocess::CovariateMatrix;
use crate::trace::{BandSpec, SeismicTrace};
use crate::{Error, Result, Timestamp};

/// Smallest window the moment features are computed on.
pub const MIN_WINDOW: usize = 8;
/// Equal-width bins used by the Shannon entropy.
pub const ENTROPY_BINS: usize = 64;
/// Sub-blocks whose means feed `mean_kurtosis`.
pub const MEAN_KURTOSIS_BLOCKS: usize = 16;
/// Guard inside the cepstral logarithm.
pub const CEPSTRAL_LOG_GUARD: f64 = 1e-12;

macro_rules! named_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $label:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn name(self) -> &'static str {
                match self { $($name::$variant => $label),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim() {
                    $($label => Ok($name::$variant),)+
                    other => Err(Error::Config(format!(concat!("unknown ", stringify!($name), " `{}`"), other))),
                }
            }
        }
    };
}

named_enum!(
    /// Representation a window is summarised in.
    Domain {
        Temporal => "temporal",
        Frequency => "frequency",
        Cepstral => "cepstral",
    }
);

named_enum!(
    /// Whether features come from the band-filtered signal or its envelope.
    Source {
        Signal => "signal",
        Envelope => "envelope",
    }
);

named_enum!(
    Feature {
        Mean => "mean",
        Sd => "sd",
        Skewness => "skewness",
        Kurtosis => "kurtosis",
        MeanKurtosis => "mean_kurtosis",
        Energy => "energy",
        Max => "max",
        Min => "min",
        RatioMaxMean => "ratio_max_mean",
        RmsBandwidth => "rms_bandwidth",
        Ioce => "ioce",
        ShannonEntropy => "shannon_entropy",
        RateOfAttack => "roa",
        RateOfDecay => "rod",
    }
);

/// Which features, domains and sources to compute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub features: Vec<Feature>,
    pub domains: Vec<Domain>,
    pub sources: Vec<Source>,
}

impl Default for FeatureSet {
    fn default() -> Self {
        FeatureSet {
            features: Feature::ALL.to_vec(),
            domains: Domain::ALL.to_vec(),
            sources: Source::ALL.to_vec(),
        }
    }
}

impl FeatureSet {
    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() || self.domains.is_empty() || self.sources.is_empty() {
            return Err(Error::Config("feature set needs at least one feature, domain and source".into()));
        }
        Ok(())
    }

    /// Number of columns produced per band.
    pub fn columns_per_band(&self) -> usize {
        self.features.len() * self.domains.len() * self.sources.len()
    }
}

pub fn column_name(feature: Feature, domain: Domain, source: Source, band: &BandSpec) -> String {
    format!("{}_{}_{}_{}", feature, domain, source, band.label())
}

/// One window of values in a given representation.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureWindow {
    pub values: Vec<f64>,
    pub domain: Domain,
    pub source: Source,
    pub band: BandSpec,
    pub window_end: Timestamp,
    /// Length of the temporal window the values were derived from.
    pub n: usize,
}

/// Named feature values of one window.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct FeatureVector {
    pub values: BTreeMap<String, f64>,
    pub window_end: Timestamp,
    /// Features that hit a degenerate case (zero variance, zero energy, zero mean).
    pub degenerate: Vec<Feature>,
}

impl FeatureVector {
    pub fn get(&self, feature: Feature) -> Option<f64> {
        self.values.get(feature.name()).copied()
    }
}

fn magnitude_half(spec: &[Complex64]) -> Vec<f64> {
    spec[..spec.len() / 2 + 1].iter().map(|z| hypot(z.re, z.im)).collect()
}

fn domain_values(values: &[f64], domain: Domain, planner: &mut FftPlanner) -> Vec<f64> {
    match domain {
        Domain::Temporal => values.to_vec(),
        Domain::Frequency | Domain::Cepstral => {
            let plan = planner.plan(values.len());
            let x: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            let spec = plan.forward(&x);
            if domain == Domain::Frequency {
                return magnitude_half(&spec);
            }
            let logmag: Vec<Complex64> = spec
                .iter()
                .map(|z| Complex64::new(ln(hypot(z.re, z.im) + CEPSTRAL_LOG_GUARD), 0.0))
                .collect();
            magnitude_half(&plan.forward(&logmag))
        }
    }
}

/// Map a raw temporal window into `domain`.
///
/// Frequency: modulus of the DFT, bins `0..=n/2`. Cepstral: modulus of the DFT of
/// the log-magnitude spectrum, quefrencies `0..=n/2`.
pub fn to_domain(values: &[f64], domain: Domain) -> Result<FeatureWindow> {
    to_domain_with(values, domain, Source::Signal, BandSpec::Raw, Timestamp::EPOCH, &mut FftPlanner::new())
}

pub(crate) fn to_domain_with(
    values: &[f64],
    domain: Domain,
    source: Source,
    band: BandSpec,
    window_end: Timestamp,
    planner: &mut FftPlanner,
) -> Result<FeatureWindow> {
    if values.len() < MIN_WINDOW {
        return Err(Error::SampleSize {
            needed: MIN_WINDOW,
            got: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite value in feature window".into()));
    }
    Ok(FeatureWindow {
        values: domain_values(values, domain, planner),
        domain,
        source,
        band,
        window_end,
        n: values.len(),
    })
}

struct Moments {
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

fn moments(v: &[f64]) -> Moments {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in v {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    Moments {
        mean,
        m2: m2 / n,
        m3: m3 / n,
        m4: m4 / n,
    }
}

/// Standardised third and fourth moments; `(0, 3)` and `true` for zero variance.
fn skew_kurt(m: &Moments) -> (f64, f64, bool) {
    if m.m2 <= 0.0 || !(m.m2 > f64::MIN_POSITIVE) {
        return (0.0, 3.0, true);
    }
    (m.m3 / (m.m2 * sqrt(m.m2)), m.m4 / (m.m2 * m.m2), false)
}

fn block_means(v: &[f64], blocks: usize) -> Vec<f64> {
    let n = v.len();
    let b = blocks.min(n);
    (0..b)
        .map(|i| {
            let (lo, hi) = (i * n / b, (i + 1) * n / b);
            v[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

fn shannon_entropy(v: &[f64]) -> f64 {
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if !(hi > lo) {
        return 0.0;
    }
    let mut counts = [0usize; ENTROPY_BINS];
    let width = hi - lo;
    for &x in v {
        let b = floor((x - lo) / width * ENTROPY_BINS as f64) as usize;
        counts[b.min(ENTROPY_BINS - 1)] += 1;
    }
    let n = v.len() as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * ln(p)
        })
        .sum()
}

/// Compute `features` over the window's values.
pub fn extract_features(window: &FeatureWindow, features: &[Feature]) -> FeatureVector {
    let v = &window.values;
    let mut out = FeatureVector {
        window_end: window.window_end,
        ..Default::default()
    };
    let mom = moments(v);
    let energy: f64 = v.iter().map(|x| x * x).sum();
    let centroid = if energy > 0.0 {
        Some(v.iter().enumerate().map(|(i, x)| i as f64 * x * x).sum::<f64>() / energy)
    } else {
        None
    };
    for &f in features {
        let mut degenerate = false;
        let value = match f {
            Feature::Mean => mom.mean,
            Feature::Sd => {
                let n = v.len() as f64;
                sqrt(mom.m2 * n / (n - 1.0))
            }
            Feature::Skewness => {
                let (s, _, d) = skew_kurt(&mom);
                degenerate = d;
                s
            }
            Feature::Kurtosis => {
                let (_, k, d) = skew_kurt(&mom);
                degenerate = d;
                k
            }
            Feature::MeanKurtosis => {
                let (_, k, d) = skew_kurt(&moments(&block_means(v, MEAN_KURTOSIS_BLOCKS)));
                degenerate = d;
                k
            }
            Feature::Energy => energy,
            Feature::Max => v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Feature::Min => v.iter().copied().fold(f64::INFINITY, f64::min),
            Feature::RatioMaxMean => {
                let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let r = max / mom.mean;
                if r.is_finite() {
                    r
                } else {
                    degenerate = true;
                    0.0
                }
            }
            Feature::RmsBandwidth => match centroid {
                Some(c) => sqrt(v.iter().enumerate().map(|(i, x)| (i as f64 - c) * (i as f64 - c) * x * x).sum::<f64>() / energy),
                None => {
                    degenerate = true;
                    0.0
                }
            },
            Feature::Ioce => centroid.unwrap_or_else(|| {
                degenerate = true;
                0.0
            }),
            Feature::ShannonEntropy => shannon_entropy(v),
            Feature::RateOfAttack | Feature::RateOfDecay => {
                let n = window.n as f64;
                let diffs = v.windows(2).map(|w| (w[1] - w[0]) / n);
                if f == Feature::RateOfAttack {
                    diffs.fold(f64::NEG_INFINITY, f64::max)
                } else {
                    diffs.fold(f64::INFINITY, f64::min)
                }
            }
        };
        if degenerate {
            out.degenerate.push(f);
        }
        out.values.insert(f.name().to_string(), value);
    }
    out
}

/// Feature columns of one issue time from per-band windows of `[t - W, t)`.
pub(crate) fn feature_row(
    windows: &[(BandSpec, &[f64])],
    window_end: Timestamp,
    set: &FeatureSet,
    wanted: Option<&BTreeSet<String>>,
    planner: &mut FftPlanner,
) -> Result<Vec<(String, f64)>> {
    let mut row = Vec::with_capacity(windows.len() * set.columns_per_band());
    let needed = |source: Source, domain: Option<Domain>, band: &BandSpec| {
        wanted.is_none_or(|w| {
            let domains: &[Domain] = match &domain {
                Some(d) => core::slice::from_ref(d),
                None => &set.domains,
            };
            domains
                .iter()
                .any(|&d| set.features.iter().any(|&f| w.contains(&column_name(f, d, source, band))))
        })
    };
    for (band, samples) in windows {
        for &source in &set.sources {
            if !needed(source, None, band) {
                continue;
            }
            let base: Vec<f64> = match source {
                Source::Signal => samples.to_vec(),
                Source::Envelope => hilbert_with(samples, planner)?.modulus(),
            };
            for &domain in &set.domains {
                if !needed(source, Some(domain), band) {
                    continue;
                }
                let w = to_domain_with(&base, domain, source, *band, window_end, planner)?;
                let fv = extract_features(&w, &set.features);
                if !fv.degenerate.is_empty() {
                    log::debug!("degenerate {:?} in {domain}/{source}/{band} at {window_end}", fv.degenerate);
                }
                for &f in &set.features {
                    let name = column_name(f, domain, source, band);
                    if wanted.is_some_and(|w| !w.contains(&name)) {
                        continue;
                    }
                    row.push((name, fv.values[f.name()]));
                }
            }
        }
    }
    Ok(row)
}

/// Issue times `start + W + k * cadence` whose window fits inside `[start, end)`.
pub fn issue_times(start: Timestamp, end: Timestamp, config: &ForecastConfig) -> Vec<Timestamp> {
    let w = crate::time::micros(config.window);
    let step = crate::time::micros(config.cadence);
    let mut out = Vec::new();
    let mut t = start.offset(w);
    while t <= end {
        out.push(t);
        t = t.offset(step);
    }
    out
}

pub(crate) fn check_bands(traces: &[SeismicTrace]) -> Result<()> {
    let first = traces.first().ok_or_else(|| Error::param("no band traces supplied"))?;
    for tr in traces {
        if tr.start_time() != first.start_time() || tr.sample_rate_hz() != first.sample_rate_hz() || tr.len() != first.len() {
            return Err(Error::Alignment(format!(
                "band {} does not share start time, rate and length with band {}",
                tr.band(),
                first.band()
            )));
        }
    }
    let mut labels: Vec<String> = traces.iter().map(|t| t.band().label()).collect();
    labels.sort();
    labels.dedup();
    if labels.len() != traces.len() {
        return Err(Error::Alignment("duplicate band in feature input".into()));
    }
    Ok(())
}

/// Covariate matrix with one row per issue time on the cadence grid.
///
/// All band traces must share start time, sample rate and length. The first row
/// is issued at `start + W`; the last at the latest grid time not after the
/// trace end.
pub fn feature_matrix(traces_by_band: &[SeismicTrace], config: &ForecastConfig) -> Result<CovariateMatrix> {
    config.validate()?;
    check_bands(traces_by_band)?;
    let first = &traces_by_band[0];
    let times = issue_times(first.start_time(), first.end_time(), config);
    if times.is_empty() {
        return Err(Error::SampleSize {
            needed: (config.window.as_secs_f64() * first.sample_rate_hz()) as usize,
            got: first.len(),
        });
    }
    let mut planner = FftPlanner::new();
    let mut names: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(times.len());
    for &t in &times {
        let range = first.index_range(t - config.window, t);
        let windows: Vec<(BandSpec, &[f64])> =
            traces_by_band.iter().map(|tr| (tr.band(), &tr.samples()[range.clone()])).collect();
        let row = feature_row(&windows, t, &config.feature_set, None, &mut planner)?;
        if names.is_empty() {
            names = row.iter().map(|(n, _)| n.clone()).collect();
        }
        rows.push(row.into_iter().map(|(_, v)| v).collect());
    }
    let mut values = vec![0.0; times.len() * names.len()];
    for (i, r) in rows.iter().enumerate() {
        values[i * names.len()..(i + 1) * names.len()].copy_from_slice(r);
    }
    CovariateMatrix::new(times, names, values).map(CovariateMatrix::sorted_columns)
}
