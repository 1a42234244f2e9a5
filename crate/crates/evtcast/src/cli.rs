//! Command-line interface.
//!
//! Every option can also be set in a TOML file passed with `--config`, in a
//! section named after the command, using the flag's long name as the key.
//! Flags override the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, CommandFactory, Parser, Subcommand};
use evtcast_core::envelope::{envelope, EnvelopeIndexSeries};
use evtcast_core::eval::{evaluate, EvaluationReport};
use evtcast_core::evt::{default_grid, threshold_scan_values};
use evtcast_core::features::{feature_matrix, Domain, Feature, FeatureSet, Source};
use evtcast_core::forecast::{build_dataset, forecast, train_detailed, ForecastConfig, PreparedEvent};
use evtcast_core::preprocess::CovariateMatrix;
use evtcast_core::synth::{generate, ScenarioSpec};
use evtcast_core::trace::{bandpass, BandSpec, SeismicTrace};
use evtcast_core::{Error, Timestamp};
use serde::{Deserialize, Serialize};

use crate::io::{self, format_real};
use crate::model;

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (model schema 1)");

#[derive(Debug, Parser)]
#[command(name = "evtcast", version = VERSION, about = "Extreme-value forecasting of eruption indices from seismic traces")]
pub struct Cli {
    /// TOML file with one section per command.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Log progress to standard error (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Band-filter a trace and write its envelope and decibel index.
    Envelope(EnvelopeArgs),
    /// Compute the covariate matrix of a trace.
    Features(FeaturesArgs),
    /// Goodness-of-fit threshold scan of one recording's index.
    Threshold(ThresholdArgs),
    /// Fit a forecasting model to one or more recorded events.
    Train(TrainArgs),
    /// Issue forecasts for a recording with a trained model.
    Forecast(ForecastArgs),
    /// Evaluate a trained model on recordings.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic scenario with phase labels.
    Synth(SynthArgs),
}

/// Failure classes mapped to exit codes 1 and 2.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) => m,
        }
    }
}

fn usage(m: impl std::fmt::Display) -> Failure {
    Failure::Usage(m.to_string())
}

fn data(m: impl std::fmt::Display) -> Failure {
    Failure::Data(m.to_string())
}

type Run<T> = Result<T, Failure>;

trait Merge {
    fn merge(self, file: Self) -> Self;
}

macro_rules! merge_fields {
    ($t:ty { $($f:ident),* $(,)? } $(nested { $($n:ident),* })?) => {
        impl Merge for $t {
            fn merge(self, file: Self) -> Self {
                Self {
                    $($f: self.$f.or(file.$f),)*
                    $($($n: self.$n.merge(file.$n),)*)?
                }
            }
        }
    };
}

/// Options shared by every command that builds a forecasting configuration.
#[derive(Debug, Clone, Default, Args, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct PipelineOpts {
    /// Forecast horizon in seconds.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Covariate window in seconds.
    #[arg(long)]
    pub window: Option<f64>,
    /// Seconds between issue times.
    #[arg(long)]
    pub cadence: Option<f64>,
    /// Covariate bands, e.g. `bp1-5,bp0.1-1,hp0.01`.
    #[arg(long, value_delimiter = ',')]
    pub bands: Option<Vec<String>>,
    /// Band the eruption index is computed on.
    #[arg(long)]
    pub index_band: Option<String>,
    /// Feature names (default: all).
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
    /// Domains: temporal, frequency, cepstral (default: all).
    #[arg(long, value_delimiter = ',')]
    pub domains: Option<Vec<String>>,
    /// Sources: signal, envelope (default: both).
    #[arg(long, value_delimiter = ',')]
    pub sources: Option<Vec<String>>,
    /// Significance level of the threshold scan.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Bootstrap replicates per tested threshold.
    #[arg(long)]
    pub n_boot: Option<usize>,
    /// Seed of every random draw.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Lower clamp of the decibel index.
    #[arg(long, allow_hyphen_values = true)]
    pub floor_db: Option<f64>,
    /// Correlation cutoff of the covariate screen.
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// Select Box-Cox powers (`false` keeps covariates untransformed before standardising).
    #[arg(long)]
    pub boxcox: Option<bool>,
    /// Explicit threshold grid in dB.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub grid: Option<Vec<f64>>,
}

merge_fields!(PipelineOpts {
    horizon, window, cadence, bands, index_band, features, domains, sources, alpha, n_boot, seed, floor_db, cutoff, boxcox, grid
});

fn secs(v: f64, name: &str) -> Run<Duration> {
    Duration::try_from_secs_f64(v).map_err(|_| usage(format!("`{name}` must be a non-negative number of seconds")))
}

fn parse_list<T: std::str::FromStr<Err = Error>>(items: &[String]) -> Run<Vec<T>> {
    items.iter().map(|s| s.parse().map_err(|e: Error| usage(e))).collect()
}

impl PipelineOpts {
    fn config(&self) -> Run<ForecastConfig> {
        let mut c = ForecastConfig::default();
        if let Some(v) = self.horizon {
            c.horizon = secs(v, "horizon")?;
        }
        if let Some(v) = self.window {
            c.window = secs(v, "window")?;
        }
        if let Some(v) = self.cadence {
            c.cadence = secs(v, "cadence")?;
        }
        if let Some(b) = &self.bands {
            c.bands = parse_list::<BandSpec>(b)?;
            c.index_band = c.bands[0];
        }
        if let Some(b) = &self.index_band {
            c.index_band = b.parse().map_err(usage)?;
        }
        let mut fs = FeatureSet::default();
        if let Some(f) = &self.features {
            fs.features = parse_list::<Feature>(f)?;
        }
        if let Some(d) = &self.domains {
            fs.domains = parse_list::<Domain>(d)?;
        }
        if let Some(s) = &self.sources {
            fs.sources = parse_list::<Source>(s)?;
        }
        c.feature_set = fs;
        c.alpha = self.alpha.unwrap_or(c.alpha);
        c.n_boot = self.n_boot.unwrap_or(c.n_boot);
        c.seed = self.seed.unwrap_or(c.seed);
        c.floor_db = self.floor_db.unwrap_or(c.floor_db);
        c.cutoff = self.cutoff.unwrap_or(c.cutoff);
        c.boxcox = self.boxcox.unwrap_or(c.boxcox);
        c.grid = self.grid.clone();
        if let Some(g) = &c.grid {
            if g.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(usage("`grid` must be strictly ascending"));
            }
        }
        c.validate().map_err(usage)?;
        Ok(c)
    }

    fn require_seed(&self, command: &str) -> Run<()> {
        match self.seed {
            Some(_) => Ok(()),
            None => Err(usage(format!("`{command}` is stochastic and needs `--seed`"))),
        }
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct EnvelopeArgs {
    /// Input trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Band to filter to before the envelope (`raw` skips filtering).
    #[arg(long)]
    pub band: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub floor_db: Option<f64>,
    /// Output envelope CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
merge_fields!(EnvelopeArgs { trace, band, floor_db, out });

#[derive(Debug, Clone, Default, Args, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct FeaturesArgs {
    /// Input raw trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Output feature CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub pipeline: PipelineOpts,
}
merge_fields!(FeaturesArgs { trace, out } nested { pipeline });

#[derive(Debug, Clone, Default, Args, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct ThresholdArgs {
    /// Raw trace CSV; its index is sampled on the cadence grid.
    #[arg(long, conflicts_with = "index")]
    pub trace: Option<PathBuf>,
    /// Envelope CSV whose index is sampled on the cadence grid.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Output scan report CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub pipeline: PipelineOpts,
}
merge_fields!(ThresholdArgs { trace, index, out } nested { pipeline });

#[derive(Debug, Clone, Default, Args, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct TrainArgs {
    /// Raw trace CSV of each training event.
    #[arg(long, value_delimiter = ',')]
    pub trace: Option<Vec<PathBuf>>,
    /// Output model file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Directory for one scan report per event.
    #[arg(long)]
    pub scan_dir: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub pipeline: PipelineOpts,
}
merge_fields!(TrainArgs { trace, model, scan_dir } nested { pipeline });

#[derive(Debug, Clone, Default, Args, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct ForecastArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Raw trace CSV to forecast over.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Excess levels `z` (dB above the threshold) to report tail probabilities at.
    #[arg(long, value_delimiter = ',')]
    pub z: Option<Vec<f64>>,
    /// Output forecast CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
merge_fields!(ForecastArgs { model, trace, z, out });

#[derive(Debug, Clone, Default, Args, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Raw trace CSVs to evaluate on.
    #[arg(long, value_delimiter = ',')]
    pub trace: Option<Vec<PathBuf>>,
    /// Largest residual autocorrelation lag.
    #[arg(long)]
    pub max_lag: Option<usize>,
    /// Output directory for the summary and tables.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}
merge_fields!(EvaluateArgs { model, trace, max_lag, out_dir });

#[derive(Debug, Clone, Default, Args, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct SynthArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for `trace.csv` and `truth.csv`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Background only: no precursors and no tremor.
    #[arg(long)]
    pub quiet: Option<bool>,
    /// ISO-8601 UTC start time.
    #[arg(long)]
    pub start_time: Option<String>,
    /// Scenario length in seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub sample_rate_hz: Option<f64>,
    #[arg(long)]
    pub background_db: Option<f64>,
    /// Seconds after the start.
    #[arg(long)]
    pub crisis_start: Option<f64>,
    /// Seconds after the start.
    #[arg(long)]
    pub swarm_start: Option<f64>,
    /// Seconds after the start.
    #[arg(long)]
    pub swarm_end: Option<f64>,
    /// Seconds after the start.
    #[arg(long)]
    pub eruption_onset: Option<f64>,
    #[arg(long)]
    pub link_strength: Option<f64>,
    #[arg(long)]
    pub crisis_gain_db: Option<f64>,
    #[arg(long)]
    pub swarm_gain_db: Option<f64>,
    #[arg(long)]
    pub burst_hz: Option<f64>,
    #[arg(long)]
    pub burst_rate_hz: Option<f64>,
    /// Seconds.
    #[arg(long)]
    pub burst_decay: Option<f64>,
    #[arg(long)]
    pub eruption_gain_db: Option<f64>,
    #[arg(long)]
    pub tremor_hz: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub tail_xi: Option<f64>,
    #[arg(long)]
    pub tail_sigma: Option<f64>,
    /// Seconds.
    #[arg(long)]
    pub knot_interval: Option<f64>,
}
merge_fields!(SynthArgs {
    seed, out_dir, quiet, start_time, duration, sample_rate_hz, background_db, crisis_start, swarm_start, swarm_end,
    eruption_onset, link_strength, crisis_gain_db, swarm_gain_db, burst_hz, burst_rate_hz, burst_decay,
    eruption_gain_db, tremor_hz, tail_xi, tail_sigma, knot_interval
});

impl SynthArgs {
    fn spec(&self) -> Run<ScenarioSpec> {
        let seed = self.seed.ok_or_else(|| usage("`synth` is stochastic and needs `--seed`"))?;
        let mut s = if self.quiet.unwrap_or(false) { ScenarioSpec::quiet(seed) } else { ScenarioSpec { seed, ..Default::default() } };
        let default_start = s.start_time;
        if let Some(t) = &self.start_time {
            s.start_time = io::parse_time(t).ok_or_else(|| usage(format!("bad `start-time` `{t}`")))?;
        }
        let offset = |cur: Timestamp, v: Option<f64>, name: &str| -> Run<Timestamp> {
            match v {
                Some(v) => Ok(s.start_time + secs(v, name)?),
                None => Ok(s.start_time.offset(cur.as_micros() - default_start.as_micros())),
            }
        };
        s.crisis_start = offset(s.crisis_start, self.crisis_start, "crisis-start")?;
        s.swarm_start = offset(s.swarm_start, self.swarm_start, "swarm-start")?;
        s.swarm_end = offset(s.swarm_end, self.swarm_end, "swarm-end")?;
        s.eruption_onset = offset(s.eruption_onset, self.eruption_onset, "eruption-onset")?;
        if let Some(v) = self.duration {
            s.duration = secs(v, "duration")?;
        }
        if let Some(v) = self.burst_decay {
            s.burst_decay = secs(v, "burst-decay")?;
        }
        if let Some(v) = self.knot_interval {
            s.knot_interval = secs(v, "knot-interval")?;
        }
        macro_rules! copy {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { s.$f = v; })* };
        }
        copy!(sample_rate_hz, background_db, link_strength, crisis_gain_db, swarm_gain_db, burst_hz, burst_rate_hz, eruption_gain_db, tremor_hz, tail_xi, tail_sigma);
        s.validate().map_err(usage)?;
        Ok(s)
    }
}

fn required<T: Clone>(v: &Option<T>, name: &str) -> Run<T> {
    v.clone().ok_or_else(|| usage(format!("missing `--{name}`")))
}

fn existing(p: &Path) -> Run<PathBuf> {
    if p.exists() {
        Ok(p.to_path_buf())
    } else {
        Err(usage(format!("input `{}` does not exist", p.display())))
    }
}

/// Long option names a subcommand accepts, used to validate config sections.
fn known_keys(command: &str) -> Vec<String> {
    let cmd = Cli::command();
    cmd.find_subcommand(command)
        .map(|c| c.get_arguments().filter_map(|a| a.get_long().map(String::from)).collect())
        .unwrap_or_default()
}

fn section<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>, command: &str) -> Run<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let mut table: toml::Table = toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let Some(value) = table.remove(command) else { return Ok(T::default()) };
    let toml::Value::Table(t) = &value else {
        return Err(usage(format!("{}: `{command}` must be a table", path.display())));
    };
    let known = known_keys(command);
    if let Some(k) = t.keys().find(|k| !known.contains(k) || *k == "config" || *k == "verbose") {
        return Err(usage(format!("{}: unknown key `{k}` in section `{command}`", path.display())));
    }
    value.try_into().map_err(|e| usage(format!("{}: section `{command}`: {e}", path.display())))
}

fn load_raw(path: &Path) -> Run<SeismicTrace> {
    let tr = io::load_trace(path, None).map_err(data)?;
    if tr.band() != BandSpec::Raw {
        return Err(data(format!("{}: expected a raw trace, found band {}", path.display(), tr.band())));
    }
    Ok(tr)
}

fn to_band(trace: &SeismicTrace, band: BandSpec) -> Run<SeismicTrace> {
    if trace.band() == band {
        return Ok(trace.clone());
    }
    if trace.band() != BandSpec::Raw {
        return Err(data(format!("trace is already filtered to {}, cannot refilter to {band}", trace.band())));
    }
    if band == BandSpec::Raw {
        return Ok(trace.clone());
    }
    bandpass(trace, band).map_err(data)
}

pub fn run(cli: Cli) -> Run<()> {
    let cfg = cli.config.as_deref();
    if let Some(p) = cfg {
        existing(p)?;
    }
    match cli.command {
        Command::Envelope(a) => cmd_envelope(a.merge(section(cfg, "envelope")?)),
        Command::Features(a) => cmd_features(a.merge(section(cfg, "features")?)),
        Command::Threshold(a) => cmd_threshold(a.merge(section(cfg, "threshold")?)),
        Command::Train(a) => cmd_train(a.merge(section(cfg, "train")?)),
        Command::Forecast(a) => cmd_forecast(a.merge(section(cfg, "forecast")?)),
        Command::Evaluate(a) => cmd_evaluate(a.merge(section(cfg, "evaluate")?)),
        Command::Synth(a) => cmd_synth(a.merge(section(cfg, "synth")?)),
    }
}

fn cmd_envelope(a: EnvelopeArgs) -> Run<()> {
    let input = existing(&required(&a.trace, "trace")?)?;
    let out = required(&a.out, "out")?;
    let band: BandSpec = a.band.as_deref().unwrap_or("bp1-5").parse().map_err(usage)?;
    let floor = a.floor_db.unwrap_or(evtcast_core::envelope::DEFAULT_FLOOR_DB);
    let trace = io::load_trace(&input, None).map_err(data)?;
    let filtered = to_band(&trace, band)?;
    let idx = envelope(&filtered, floor).map_err(data)?;
    io::write_envelope(&out, &idx).map_err(data)
}

fn cmd_features(a: FeaturesArgs) -> Run<()> {
    let input = existing(&required(&a.trace, "trace")?)?;
    let out = required(&a.out, "out")?;
    let config = a.pipeline.config()?;
    let raw = load_raw(&input)?;
    let bands: Vec<SeismicTrace> = config.bands.iter().map(|&b| to_band(&raw, b)).collect::<Run<_>>()?;
    let m = feature_matrix(&bands, &config).map_err(data)?;
    io::write_features(&out, &m).map_err(data)
}

/// Index values on the cadence grid.
fn scan_values(index: &EnvelopeIndexSeries, config: &ForecastConfig) -> Run<Vec<f64>> {
    Ok(index.resample_every(config.cadence).map_err(data)?.index_db().to_vec())
}

fn cmd_threshold(a: ThresholdArgs) -> Run<()> {
    a.pipeline.require_seed("threshold")?;
    let out = required(&a.out, "out")?;
    let config = a.pipeline.config()?;
    let index = match (&a.trace, &a.index) {
        (Some(t), None) => {
            let raw = load_raw(&existing(t)?)?;
            envelope(&to_band(&raw, config.index_band)?, config.floor_db).map_err(data)?
        }
        (None, Some(i)) => io::load_envelope(&existing(i)?).map_err(data)?,
        _ => return Err(usage("give exactly one of `--trace` and `--index`")),
    };
    let values = scan_values(&index, &config)?;
    let grid = match &config.grid {
        Some(g) => g.clone(),
        None => default_grid(&values).map_err(data)?,
    };
    let sel = threshold_scan_values(&values, &grid, &config.scan_config(0)).map_err(data)?;
    log::info!("chosen threshold {} dB", sel.chosen);
    io::write_scan_report(&out, &sel).map_err(data)
}

fn cmd_train(a: TrainArgs) -> Run<()> {
    a.pipeline.require_seed("train")?;
    let inputs = required(&a.trace, "trace")?;
    let out = required(&a.model, "model")?;
    let config = a.pipeline.config()?;
    let traces: Vec<SeismicTrace> = inputs.iter().map(|p| existing(p).and_then(|p| load_raw(&p))).collect::<Run<_>>()?;
    let run = train_detailed(&traces, &config).map_err(data)?;
    if let Some(dir) = &a.scan_dir {
        for (k, sel) in run.selections.iter().enumerate() {
            io::write_scan_report(&dir.join(format!("event-{k}.csv")), sel).map_err(data)?;
        }
    }
    for (k, e) in run.pipeline.events.iter().enumerate() {
        log::info!("event {k}: threshold {} dB, {} rows, {} exceedances", e.threshold, e.rows, e.n_exceed);
    }
    model::save(&out, &run.pipeline).map_err(data)
}

fn cmd_forecast(a: ForecastArgs) -> Run<()> {
    let model_path = existing(&required(&a.model, "model")?)?;
    let input = existing(&required(&a.trace, "trace")?)?;
    let out = required(&a.out, "out")?;
    let z = a.z.clone().unwrap_or_else(|| vec![0.0]);
    if let Some(bad) = z.iter().find(|z| !(**z >= 0.0)) {
        return Err(usage(format!("excess levels must be non-negative, got {bad}")));
    }
    let pipeline = model::load(&model_path).map_err(data)?;
    let raw = load_raw(&input)?;
    let points = forecast(&pipeline, &raw, &z).map_err(data)?;
    io::write_forecast(&out, &z, &points).map_err(data)
}

/// Pooled raw covariates and index targets of recordings under a trained model.
pub fn evaluation_data(pipeline: &evtcast_core::forecast::Pipeline, traces: &[SeismicTrace]) -> evtcast_core::Result<(CovariateMatrix, Vec<f64>)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for raw in traces {
        let ev = PreparedEvent::new(raw, &pipeline.config)?;
        let x = feature_matrix(&ev.bands, &pipeline.config)?;
        let (_, xa, y) = build_dataset(&ev.index, &x, pipeline.threshold, &pipeline.config)?;
        xs.push(xa);
        ys.extend(y);
    }
    Ok((CovariateMatrix::vstack(&xs)?, ys))
}

#[derive(Serialize)]
struct Summary<'a> {
    rows: usize,
    exceedances: usize,
    threshold: f64,
    auc: f64,
    deviance_statistic: f64,
    deviance_df: usize,
    deviance_p_value: f64,
    acf_pearson_outside: usize,
    acf_excess_outside: Option<usize>,
    threshold_curve: &'a [evtcast_core::eval::SweepEntry],
}

fn cmd_evaluate(a: EvaluateArgs) -> Run<()> {
    let model_path = existing(&required(&a.model, "model")?)?;
    let inputs = required(&a.trace, "trace")?;
    let dir = required(&a.out_dir, "out-dir")?;
    let max_lag = a.max_lag.unwrap_or(20);
    let pipeline = model::load(&model_path).map_err(data)?;
    let traces: Vec<SeismicTrace> = inputs.iter().map(|p| existing(p).and_then(|p| load_raw(&p))).collect::<Run<_>>()?;
    let (x, y) = evaluation_data(&pipeline, &traces).map_err(data)?;
    let report: EvaluationReport =
        evaluate(&pipeline.logistic, &pipeline.excess, &x, &y, pipeline.threshold, max_lag).map_err(data)?;
    let summary = Summary {
        rows: y.len(),
        exceedances: y.iter().filter(|&&v| v > pipeline.threshold).count(),
        threshold: pipeline.threshold,
        auc: report.auc,
        deviance_statistic: report.deviance.statistic,
        deviance_df: report.deviance.df,
        deviance_p_value: report.deviance.p_value,
        acf_pearson_outside: report.acf_pearson.outside(),
        acf_excess_outside: report.acf_excess.as_ref().map(|a| a.outside()),
        threshold_curve: &report.threshold_curve,
    };
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serialises");
    text.push('\n');
    io::write_text(&dir.join("summary.json"), &text).map_err(data)?;
    let acf_rows = |a: &evtcast_core::eval::Acf| {
        (0..a.values.len())
            .map(|k| vec![k.to_string(), format_real(a.values[k]), format_real(a.halfwidth[k])])
            .collect::<Vec<_>>()
    };
    io::write_table(&dir.join("acf_pearson.csv"), &["lag", "acf", "halfwidth"], acf_rows(&report.acf_pearson)).map_err(data)?;
    if let Some(acf) = &report.acf_excess {
        io::write_table(&dir.join("acf_excess.csv"), &["lag", "acf", "halfwidth"], acf_rows(acf)).map_err(data)?;
    }
    io::write_table(
        &dir.join("qq.csv"),
        &["theoretical", "empirical"],
        report.qq_points.iter().map(|(a, b)| vec![format_real(*a), format_real(*b)]),
    )
    .map_err(data)?;
    io::write_table(
        &dir.join("threshold_curve.csv"),
        &["fraction", "threshold", "n_exceed", "auc"],
        report.threshold_curve.iter().map(|e| {
            vec![format_real(e.fraction), format_real(e.threshold), e.n_exceed.to_string(), e.auc.map(format_real).unwrap_or_default()]
        }),
    )
    .map_err(data)
}

fn cmd_synth(a: SynthArgs) -> Run<()> {
    let dir = required(&a.out_dir, "out-dir")?;
    let spec = a.spec()?;
    let sc = generate(&spec).map_err(data)?;
    log::info!("phase sample counts: {:?}", phase_counts(&sc.phases));
    io::write_trace(&dir.join("trace.csv"), &sc.raw).map_err(data)?;
    io::write_truth(&dir.join("truth.csv"), &sc.raw, &sc.phases).map_err(data)
}

/// Phase spans of a scenario for logging.
pub fn phase_counts(phases: &[evtcast_core::synth::Phase]) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for p in phases {
        *m.entry(p.to_string()).or_insert(0) += 1;
    }
    m
}
