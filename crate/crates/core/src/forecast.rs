//! End-to-end pipeline: training on recorded events and horizon-ahead forecasts.
//!
//! At each issue time `t` the pipeline computes covariates from `[t - W, t)`,
//! and forecasts the index at `t + dt`:
//!
//! ```text
//! P(Y > u + z | x) = phi(x) * S(z; xi, nu(x))
//! ```
//!
//! where `phi` is the logistic exceedance probability and `S` the survival of
//! the excess model.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::time::Duration;

use serde::{Deserialize, Serialize};

use crate::envelope::{envelope, EnvelopeIndexSeries, FftPlanner, DEFAULT_FLOOR_DB};
use crate::evt::{self, default_grid, fit_gpd_constant, multi_event_threshold, GpdFit, ScanConfig, ThresholdSelection};
use crate::features::{self, feature_matrix, feature_row, FeatureSet};
use crate::math::{exp, logistic};
use crate::preprocess::{apply_transform, fit_standardizer, prune_collinear, CovariateMatrix, Lambda, DEFAULT_CUTOFF};
use crate::regress::{
    choose_shape, gpd_survival, stepwise_aic, Direction, ExceedanceDataset, FittedModel, GpdModel, LogisticModel,
    Response, Shape,
};
use crate::time::micros;
use crate::trace::{bandpass, BandSpec, SeismicTrace};
use crate::{Error, Result, Timestamp};

/// Durations stored as seconds.
pub mod secs {
    use core::time::Duration;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastConfig {
    /// Lead time `dt` between issue time and target time.
    #[serde(with = "secs")]
    pub horizon: Duration,
    /// Covariate window `W`.
    #[serde(with = "secs")]
    pub window: Duration,
    #[serde(with = "secs")]
    pub cadence: Duration,
    /// Bands covariates are computed on.
    pub bands: Vec<BandSpec>,
    /// Band the eruption index is computed on.
    pub index_band: BandSpec,
    pub feature_set: FeatureSet,
    /// Significance level of the threshold scan.
    pub alpha: f64,
    pub n_boot: usize,
    pub seed: u64,
    pub floor_db: f64,
    /// Absolute correlation above which the less informative covariate is dropped.
    pub cutoff: f64,
    /// Select Box-Cox powers; identity power otherwise.
    pub boxcox: bool,
    /// Explicit threshold grid; integer percentile grid per event otherwise.
    pub grid: Option<Vec<f64>>,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        let band = BandSpec::Bandpass { lo_hz: 1.0, hi_hz: 5.0 };
        ForecastConfig {
            horizon: Duration::from_secs(3600),
            window: Duration::from_secs(3600),
            cadence: Duration::from_secs(10),
            bands: vec![band],
            index_band: band,
            feature_set: FeatureSet::default(),
            alpha: evt::DEFAULT_ALPHA,
            n_boot: evt::DEFAULT_N_BOOT,
            seed: 0,
            floor_db: DEFAULT_FLOOR_DB,
            cutoff: DEFAULT_CUTOFF,
            boxcox: true,
            grid: None,
        }
    }
}

impl ForecastConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.horizon.is_zero() {
            return bad("horizon must be positive");
        }
        if self.window.is_zero() {
            return bad("window must be positive");
        }
        if self.cadence.is_zero() {
            return bad("cadence must be positive");
        }
        if self.cadence > self.horizon {
            return bad("cadence must not exceed the horizon");
        }
        if self.bands.is_empty() {
            return bad("at least one covariate band is required");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if self.n_boot == 0 {
            return bad("n_boot must be positive");
        }
        if !(self.cutoff > 0.0 && self.cutoff <= 1.0) {
            return bad("cutoff must lie in (0, 1]");
        }
        self.feature_set.validate()
    }

    pub fn scan_config(&self, event: usize) -> ScanConfig {
        ScanConfig {
            alpha: self.alpha,
            n_boot: self.n_boot,
            seed: crate::rng::mix(self.seed, event as u64),
        }
    }
}

/// Pair each covariate row at issue time `t` with the index at `t + dt`.
///
/// Rows whose target has no index sample are dropped. Returns the dataset, the
/// aligned covariate rows and the index value at each target time.
pub fn build_dataset(
    index: &EnvelopeIndexSeries,
    x: &CovariateMatrix,
    u: f64,
    config: &ForecastConfig,
) -> Result<(ExceedanceDataset, CovariateMatrix, Vec<f64>)> {
    config.validate()?;
    let (rows, targets): (Vec<usize>, Vec<f64>) = x
        .timestamps()
        .iter()
        .enumerate()
        .filter_map(|(i, &t)| index.value_at(t + config.horizon).map(|y| (i, y)))
        .unzip();
    if rows.is_empty() {
        return Err(Error::Alignment("no covariate row has an index value at its target time".into()));
    }
    let aligned = x.select_rows(&rows);
    let ds = ExceedanceDataset::from_values(aligned.timestamps().to_vec(), &targets, u, config.horizon)?;
    Ok((ds, aligned, targets))
}

/// Per-event quantities recorded during training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventSummary {
    pub threshold: f64,
    pub rows: usize,
    pub n_exceed: usize,
}

/// A trained forecasting pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub config: ForecastConfig,
    pub threshold: f64,
    pub events: Vec<EventSummary>,
    pub gpd_fit: GpdFit,
    pub logistic: LogisticModel,
    pub excess: GpdModel,
}

/// Band-filtered traces and the eruption index of one recording.
#[derive(Clone, Debug)]
pub struct PreparedEvent {
    pub bands: Vec<SeismicTrace>,
    pub index: EnvelopeIndexSeries,
}

impl PreparedEvent {
    pub fn new(raw: &SeismicTrace, config: &ForecastConfig) -> Result<Self> {
        let bands: Vec<SeismicTrace> = config.bands.iter().map(|&b| bandpass(raw, b)).collect::<Result<_>>()?;
        let index_trace = match bands.iter().find(|t| t.band() == config.index_band) {
            Some(t) => t.clone(),
            None => bandpass(raw, config.index_band)?,
        };
        Ok(PreparedEvent {
            index: envelope(&index_trace, config.floor_db)?,
            bands,
        })
    }

    /// Index sampled on the cadence grid from the trace start.
    pub fn scan_values(&self, config: &ForecastConfig) -> Result<Vec<f64>> {
        Ok(self.index.resample_every(config.cadence)?.index_db().to_vec())
    }
}

/// Everything produced while training, beyond the pipeline itself.
#[derive(Clone, Debug)]
pub struct TrainingRun {
    pub pipeline: Pipeline,
    pub selections: Vec<ThresholdSelection>,
    /// Pooled aligned raw covariates.
    pub covariates: CovariateMatrix,
    /// Pooled covariates after the fitted transform.
    pub transformed: CovariateMatrix,
    pub dataset: ExceedanceDataset,
    /// Index value at each row's target time.
    pub targets: Vec<f64>,
}

impl TrainingRun {
    /// Fitted exceedance probabilities on the training rows.
    pub fn fitted_phi(&self) -> Result<Vec<f64>> {
        Ok(self.pipeline.logistic.predictor.eval_matrix(&self.covariates)?.into_iter().map(logistic).collect())
    }
}

/// Threshold selection of one prepared event.
pub fn event_threshold(event: &PreparedEvent, config: &ForecastConfig, k: usize) -> Result<ThresholdSelection> {
    let values = event.scan_values(config)?;
    let grid = match &config.grid {
        Some(g) => g.clone(),
        None => default_grid(&values)?,
    };
    evt::threshold_scan_values(&values, &grid, &config.scan_config(k))
}

/// Train on prepared events with a given threshold.
pub fn train_at_threshold(events: &[PreparedEvent], u: f64, config: &ForecastConfig) -> Result<TrainingRun> {
    let mut parts = Vec::new();
    let mut summaries = Vec::new();
    for ev in events {
        let x = feature_matrix(&ev.bands, config)?;
        let (ds, xa, y) = build_dataset(&ev.index, &x, u, config)?;
        summaries.push(EventSummary {
            threshold: u,
            rows: ds.len(),
            n_exceed: ds.n_exceed(),
        });
        parts.push((ds, xa, y));
    }
    let dataset = ExceedanceDataset::concat(&parts.iter().map(|p| p.0.clone()).collect::<Vec<_>>())?;
    let pooled = CovariateMatrix::vstack(&parts.iter().map(|p| p.1.clone()).collect::<Vec<_>>())?;
    let targets: Vec<f64> = parts.iter().flat_map(|p| p.2.iter().copied()).collect();
    fit_pipeline(pooled, dataset, targets, summaries, config)
}

fn fit_pipeline(
    pooled: CovariateMatrix,
    dataset: ExceedanceDataset,
    targets: Vec<f64>,
    events: Vec<EventSummary>,
    config: &ForecastConfig,
) -> Result<TrainingRun> {
    let u = dataset.threshold();
    let (pooled, dropped) = pooled.drop_constant_columns();
    if !dropped.is_empty() {
        log::warn!("dropped {} constant covariates", dropped.len());
    }
    let spec = fit_standardizer(&pooled, if config.boxcox { Lambda::Select } else { Lambda::Fixed(1.0) })?;
    let transformed = apply_transform(&pooled, &spec)?;

    let (rows, z) = dataset.exceedance_rows();
    let gpd_fit = fit_gpd_constant(&z)?;
    let shape = choose_shape(&gpd_fit);

    let labels = dataset.indicators();
    let kept = prune_collinear(&transformed, Response::Logistic(labels), config.cutoff)?;
    let sel = stepwise_aic(&transformed.select_columns(&kept)?, Response::Logistic(labels), Direction::BackwardThenForward)?;
    let FittedModel::Logistic(logistic) = sel.model else {
        unreachable!("logistic response yields a logistic model")
    };

    let xz = transformed.select_rows(&rows);
    let response = Response::Excess { excesses: &z, shape };
    let kept = prune_collinear(&xz, response, config.cutoff)?;
    let sel = stepwise_aic(&xz.select_columns(&kept)?, response, Direction::ForwardThenBackward)?;
    let FittedModel::Gpd(excess) = sel.model else {
        unreachable!("excess response yields an excess model")
    };
    log::info!(
        "trained: u = {u}, shape {:?}, {} logistic and {} excess covariates",
        shape,
        logistic.predictor.coefficients.len(),
        excess.predictor.coefficients.len()
    );
    Ok(TrainingRun {
        pipeline: Pipeline {
            config: config.clone(),
            threshold: u,
            events,
            gpd_fit,
            logistic,
            excess,
        },
        selections: Vec::new(),
        covariates: pooled,
        transformed,
        dataset,
        targets,
    })
}

/// Train on raw recordings: per-event threshold scans, the lowest threshold,
/// pooled covariates, transforms, pruning and stepwise fits.
pub fn train_detailed(events: &[SeismicTrace], config: &ForecastConfig) -> Result<TrainingRun> {
    config.validate()?;
    if events.is_empty() {
        return Err(Error::param("training needs at least one event"));
    }
    let prepared: Vec<PreparedEvent> = events.iter().map(|e| PreparedEvent::new(e, config)).collect::<Result<_>>()?;
    let selections: Vec<ThresholdSelection> = prepared
        .iter()
        .enumerate()
        .map(|(k, ev)| event_threshold(ev, config, k))
        .collect::<Result<_>>()?;
    let per_event: Vec<f64> = selections.iter().map(|s| s.chosen).collect();
    let u = multi_event_threshold(&per_event)?;
    log::info!("per-event thresholds {per_event:?}, pooled threshold {u}");
    let mut run = train_at_threshold(&prepared, u, config)?;
    for (s, sel) in run.pipeline.events.iter_mut().zip(&selections) {
        s.threshold = sel.chosen;
    }
    run.selections = selections;
    Ok(run)
}

pub fn train(events: &[SeismicTrace], config: &ForecastConfig) -> Result<Pipeline> {
    train_detailed(events, config).map(|r| r.pipeline)
}

/// Forecast at one issue time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastPoint {
    pub issue_time: Timestamp,
    pub target_time: Timestamp,
    pub phi: f64,
    pub nu: f64,
    /// `(z, P(Y > u + z))` per requested excess level.
    pub tail: Vec<(f64, f64)>,
    pub threshold: f64,
}

impl Pipeline {
    /// Covariate names either model uses.
    pub fn covariates(&self) -> BTreeSet<String> {
        self.logistic.predictor.names().chain(self.excess.predictor.names()).map(String::from).collect()
    }

    pub fn xi(&self) -> f64 {
        self.excess.shape.xi()
    }

    /// `(phi, nu)` at raw covariates.
    pub fn predict(&self, x: &BTreeMap<String, f64>) -> Result<(f64, f64)> {
        Ok((
            logistic(self.logistic.predictor.eval_map(x)?),
            exp(self.excess.predictor.eval_map(x)?),
        ))
    }

    /// `(phi, nu)` for every row of a raw covariate matrix.
    pub fn predict_matrix(&self, x: &CovariateMatrix) -> Result<Vec<(f64, f64)>> {
        let a = self.logistic.predictor.eval_matrix(x)?;
        let b = self.excess.predictor.eval_matrix(x)?;
        Ok(a.into_iter().zip(b).map(|(a, b)| (logistic(a), exp(b))).collect())
    }

    /// `P(Y > u + z)` given `phi` and `nu`.
    pub fn tail(&self, phi: f64, nu: f64, z: f64) -> f64 {
        phi * gpd_survival(self.xi(), nu, z)
    }

    pub fn point(&self, issue_time: Timestamp, x: &BTreeMap<String, f64>, z_list: &[f64]) -> Result<ForecastPoint> {
        let (phi, nu) = self.predict(x)?;
        Ok(ForecastPoint {
            issue_time,
            target_time: issue_time + self.config.horizon,
            phi,
            nu,
            tail: z_list.iter().map(|&z| (z, self.tail(phi, nu, z))).collect(),
            threshold: self.threshold,
        })
    }
}

/// Level `y` with `P(Y > y | x) = p`, for `0 < p <= phi`.
pub fn return_level(pipeline: &Pipeline, x: &BTreeMap<String, f64>, p: f64) -> Result<f64> {
    let (phi, nu) = pipeline.predict(x)?;
    return_level_at(pipeline.threshold, pipeline.excess.shape, phi, nu, p)
}

/// Return level for given `phi` and `nu`.
pub fn return_level_at(u: f64, shape: Shape, phi: f64, nu: f64, p: f64) -> Result<f64> {
    if !(p > 0.0) || p > phi {
        return Err(Error::param(format!("return level needs 0 < p <= phi, got p = {p}, phi = {phi}")));
    }
    Ok(u + evt::gpd_quantile(shape.xi(), nu, 1.0 - p / phi))
}

/// Incremental forecaster over band-filtered sample streams.
///
/// Ticks fall on `start + W + k * cadence`; a tick is emitted once all samples
/// of its window `[t - W, t)` have arrived, so output does not depend on how
/// the streams are chunked.
pub struct Forecaster<'a> {
    pipeline: &'a Pipeline,
    z_list: Vec<f64>,
    start: Timestamp,
    rate: f64,
    wanted: BTreeSet<String>,
    buffers: Vec<Vec<f64>>,
    /// Global index of `buffers[_][0]`.
    offset: usize,
    received: usize,
    next_tick: Timestamp,
    planner: FftPlanner,
}

impl<'a> Forecaster<'a> {
    pub fn new(pipeline: &'a Pipeline, start: Timestamp, sample_rate_hz: f64, z_list: &[f64]) -> Result<Self> {
        pipeline.config.validate()?;
        if !(sample_rate_hz > 0.0) {
            return Err(Error::param("sample rate must be positive"));
        }
        if let Some(z) = z_list.iter().find(|z| !(**z >= 0.0)) {
            return Err(Error::param(format!("excess levels must be non-negative, got {z}")));
        }
        Ok(Forecaster {
            pipeline,
            z_list: z_list.to_vec(),
            start,
            rate: sample_rate_hz,
            wanted: pipeline.covariates(),
            buffers: vec![Vec::new(); pipeline.config.bands.len()],
            offset: 0,
            received: 0,
            next_tick: start + pipeline.config.window,
            planner: FftPlanner::new(),
        })
    }

    fn index(&self, t: Timestamp) -> usize {
        self.start.index_at_or_after(t, self.rate).max(0) as usize
    }

    /// Append one chunk per band (in configured band order) and emit every completed tick.
    pub fn push(&mut self, chunks: &[&[f64]]) -> Result<Vec<ForecastPoint>> {
        if chunks.len() != self.buffers.len() {
            return Err(Error::Alignment(format!("expected {} band chunks, got {}", self.buffers.len(), chunks.len())));
        }
        let len = chunks[0].len();
        if chunks.iter().any(|c| c.len() != len) {
            return Err(Error::Alignment("band chunks differ in length".into()));
        }
        for (b, c) in self.buffers.iter_mut().zip(chunks) {
            b.extend_from_slice(c);
        }
        self.received += len;
        let config = &self.pipeline.config;
        let mut out = Vec::new();
        loop {
            let t = self.next_tick;
            let (lo, hi) = (self.index(t - config.window), self.index(t));
            if hi > self.received {
                break;
            }
            if lo < self.offset || hi - lo < features::MIN_WINDOW {
                log::warn!("skipping tick {t}: insufficient trailing data");
            } else {
                let windows: Vec<(BandSpec, &[f64])> = config
                    .bands
                    .iter()
                    .zip(&self.buffers)
                    .map(|(&band, b)| (band, &b[lo - self.offset..hi - self.offset]))
                    .collect();
                let row = feature_row(&windows, t, &config.feature_set, Some(&self.wanted), &mut self.planner)?;
                let x: BTreeMap<String, f64> = row.into_iter().collect();
                out.push(self.pipeline.point(t, &x, &self.z_list)?);
            }
            self.next_tick = t.offset(micros(config.cadence));
        }
        let keep_from = self.index(self.next_tick - config.window).min(self.received);
        if keep_from > self.offset {
            let drop = keep_from - self.offset;
            self.buffers.iter_mut().for_each(|b| {
                b.drain(..drop);
            });
            self.offset = keep_from;
        }
        Ok(out)
    }
}

/// Forecasts over whole band-filtered traces (in configured band order).
pub fn forecast_bands(pipeline: &Pipeline, bands: &[SeismicTrace], z_list: &[f64]) -> Result<Vec<ForecastPoint>> {
    features::check_bands(bands)?;
    for (tr, b) in bands.iter().zip(&pipeline.config.bands) {
        if tr.band() != *b {
            return Err(Error::Alignment(format!("expected band {b}, got {}", tr.band())));
        }
    }
    let first = &bands[0];
    let mut f = Forecaster::new(pipeline, first.start_time(), first.sample_rate_hz(), z_list)?;
    let chunks: Vec<&[f64]> = bands.iter().map(|t| t.samples()).collect();
    f.push(&chunks)
}

/// Forecasts over a raw recording: band filtering, then one forecast per tick.
pub fn forecast(pipeline: &Pipeline, raw: &SeismicTrace, z_list: &[f64]) -> Result<Vec<ForecastPoint>> {
    let bands: Vec<SeismicTrace> = pipeline
        .config
        .bands
        .iter()
        .map(|&b| bandpass(raw, b))
        .collect::<Result<_>>()?;
    forecast_bands(pipeline, &bands, z_list)
}
