//! Model evaluation: AUC, deviance test, residual autocorrelation, QQ data and
//! threshold sweeps.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::evt::gpd_quantile;
use crate::math::{exp, ln, logistic, mean, sort_f64, sqrt};
use crate::preprocess::CovariateMatrix;
use crate::regress::{fit_logistic, logistic_term, GpdModel, LinearPredictor, LogisticModel};
use crate::special::chi2_sf;
use crate::{Error, Result};

/// Two-sided 95% normal quantile used for white-noise bands.
pub const BAND_Z: f64 = 1.96;
pub const MIN_QQ: usize = 10;
pub const DEFAULT_FRACTIONS: [f64; 6] = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

/// Probability that a random positive outscores a random negative, ties counting one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Alignment("scores and labels differ in length".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedAuc);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += order[i..=j].iter().filter(|&&k| labels[k]).count() as f64 * mid;
        i = j + 1;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

fn logistic_loglik(eta: &[f64], labels: &[bool]) -> f64 {
    eta.iter().zip(labels).map(|(&e, &y)| logistic_term(y, e).0).sum()
}

/// Likelihood-ratio test of a logistic model against the intercept-only model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DevianceTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Deviance test of `model` on raw covariates `x` with indicators `labels`.
pub fn deviance_test(model: &LogisticModel, x: &CovariateMatrix, labels: &[bool]) -> Result<DevianceTest> {
    if x.nrows() != labels.len() {
        return Err(Error::Alignment("covariate rows and labels differ in length".into()));
    }
    let k = labels.iter().filter(|&&l| l).count();
    if k == 0 || k == labels.len() {
        return Err(Error::Data("null model needs both classes".into()));
    }
    let p = k as f64 / labels.len() as f64;
    let null = k as f64 * ln(p) + (labels.len() - k) as f64 * ln(1.0 - p);
    let full = logistic_loglik(&model.predictor.eval_matrix(x)?, labels);
    let statistic = (2.0 * (full - null)).max(0.0);
    let df = model.predictor.coefficients.len();
    let p_value = if df == 0 { 1.0 } else { chi2_sf(statistic, df as f64) };
    Ok(DevianceTest { statistic, df, p_value })
}

/// Sample autocorrelations with Bartlett 95% half-widths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Acf {
    /// Lags `0..=max_lag`; lag 0 is 1.
    pub values: Vec<f64>,
    /// Half-width at each lag: `1.96 / sqrt(n) * sqrt(1 + 2 sum_{j<k} r_j^2)`; zero at lag 0.
    pub halfwidth: Vec<f64>,
}

impl Acf {
    /// Lags `1..` whose autocorrelation lies outside the band.
    pub fn outside(&self) -> usize {
        (1..self.values.len()).filter(|&k| self.values[k].abs() > self.halfwidth[k]).count()
    }
}

pub fn acf(series: &[f64], max_lag: usize) -> Result<Acf> {
    let n = series.len();
    if n <= max_lag + 1 {
        return Err(Error::SampleSize {
            needed: max_lag + 2,
            got: n,
        });
    }
    let m = mean(series);
    let c0: f64 = series.iter().map(|x| (x - m) * (x - m)).sum();
    if !(c0 > 0.0) {
        return Err(Error::Data("constant residual series".into()));
    }
    let values: Vec<f64> = (0..=max_lag)
        .map(|k| {
            if k == 0 {
                1.0
            } else {
                (0..n - k).map(|t| (series[t] - m) * (series[t + k] - m)).sum::<f64>() / c0
            }
        })
        .collect();
    let base = BAND_Z / sqrt(n as f64);
    let mut halfwidth = vec![0.0; max_lag + 1];
    let mut acc = 1.0;
    for k in 1..=max_lag {
        if k > 1 {
            acc += 2.0 * values[k - 1] * values[k - 1];
        }
        halfwidth[k] = base * sqrt(acc);
    }
    Ok(Acf { values, halfwidth })
}

/// `(I_t - phi_t) / sqrt(phi_t (1 - phi_t))`.
pub fn pearson_residuals(model: &LogisticModel, x: &CovariateMatrix, labels: &[bool]) -> Result<Vec<f64>> {
    if x.nrows() != labels.len() {
        return Err(Error::Alignment("covariate rows and labels differ in length".into()));
    }
    Ok(model
        .predictor
        .eval_matrix(x)?
        .into_iter()
        .zip(labels)
        .map(|(e, &y)| {
            let phi = logistic(e);
            (f64::from(u8::from(y)) - phi) / sqrt(phi * (1.0 - phi))
        })
        .collect())
}

/// `z_t - nu_t / (1 - xi)`, the excess minus its conditional mean.
pub fn excess_residuals(model: &GpdModel, x: &CovariateMatrix, z: &[f64]) -> Result<Vec<f64>> {
    let xi = model.shape.xi();
    if xi >= 1.0 {
        return Err(Error::param("excess mean is undefined for xi >= 1"));
    }
    if x.nrows() != z.len() {
        return Err(Error::Alignment("covariate rows and excesses differ in length".into()));
    }
    Ok(model
        .predictor
        .eval_matrix(x)?
        .into_iter()
        .zip(z)
        .map(|(e, &z)| z - exp(e) / (1.0 - xi))
        .collect())
}

/// Which residual series to autocorrelate.
#[derive(Clone, Copy, Debug)]
pub enum Residuals<'a> {
    PearsonLogistic {
        model: &'a LogisticModel,
        x: &'a CovariateMatrix,
        labels: &'a [bool],
    },
    ExcessGpd {
        model: &'a GpdModel,
        x: &'a CovariateMatrix,
        excesses: &'a [f64],
    },
}

pub fn residual_acf(kind: Residuals, max_lag: usize) -> Result<Acf> {
    let r = match kind {
        Residuals::PearsonLogistic { model, x, labels } => pearson_residuals(model, x, labels)?,
        Residuals::ExcessGpd { model, x, excesses } => excess_residuals(model, x, excesses)?,
    };
    acf(&r, max_lag)
}

/// Sorted `(theoretical, empirical)` quantiles of `z_t / nu_t` against the unit-scale GPD.
pub fn qq_standardised_excesses(model: &GpdModel, x: &CovariateMatrix, z: &[f64]) -> Result<Vec<(f64, f64)>> {
    if z.len() < MIN_QQ {
        return Err(Error::SampleSize {
            needed: MIN_QQ,
            got: z.len(),
        });
    }
    if x.nrows() != z.len() {
        return Err(Error::Alignment("covariate rows and excesses differ in length".into()));
    }
    let mut e: Vec<f64> = model
        .predictor
        .eval_matrix(x)?
        .into_iter()
        .zip(z)
        .map(|(eta, &z)| z / exp(eta))
        .collect();
    sort_f64(&mut e);
    let n = e.len() as f64;
    let xi = model.shape.xi();
    Ok(e
        .into_iter()
        .enumerate()
        .map(|(i, v)| (gpd_quantile(xi, 1.0, (i as f64 + 0.5) / n), v))
        .collect())
}

/// AUC of a retrained exceedance model at `fraction * u`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub fraction: f64,
    pub threshold: f64,
    pub n_exceed: usize,
    /// `None` when only one class is present or the refit failed.
    pub auc: Option<f64>,
}

/// Training AUC per threshold fraction. `targets` are the index values the
/// labels are built from; `train` maps labels to fitted scores.
pub fn threshold_sweep<F>(targets: &[f64], u: f64, fractions: &[f64], mut train: F) -> Vec<SweepEntry>
where
    F: FnMut(&[bool]) -> Result<Vec<f64>>,
{
    fractions
        .iter()
        .map(|&fraction| {
            let threshold = u * fraction;
            let labels: Vec<bool> = targets.iter().map(|&y| y > threshold).collect();
            let n_exceed = labels.iter().filter(|&&l| l).count();
            let auc = if n_exceed == 0 || n_exceed == labels.len() {
                None
            } else {
                match train(&labels).and_then(|s| auc(&s, &labels)) {
                    Ok(a) => Some(a),
                    Err(e) => {
                        log::warn!("threshold fraction {fraction}: {e}");
                        None
                    }
                }
            };
            SweepEntry {
                fraction,
                threshold,
                n_exceed,
                auc,
            }
        })
        .collect()
}

/// Refit a logistic model on the covariates of `predictor` (transformed with its
/// stored transform) and return the fitted linear predictors.
pub fn refit_scores(predictor: &LinearPredictor, x: &CovariateMatrix, labels: &[bool]) -> Result<Vec<f64>> {
    let names: Vec<&str> = predictor.names().collect();
    let sub = x.select_columns(&names)?;
    let mut values = Vec::with_capacity(sub.values().len());
    for i in 0..sub.nrows() {
        for (j, &v) in sub.row(i).iter().enumerate() {
            values.push(predictor.transform.apply_value(names[j], v)?);
        }
    }
    let t = CovariateMatrix::new(sub.timestamps().to_vec(), sub.names().to_vec(), values)?;
    let model = fit_logistic(&t, labels)?;
    model.predictor.eval_matrix(&t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub auc: f64,
    pub deviance: DevianceTest,
    pub acf_pearson: Acf,
    pub acf_excess: Option<Acf>,
    pub qq_points: Vec<(f64, f64)>,
    pub threshold_curve: Vec<SweepEntry>,
}

/// Full evaluation of fitted models on raw aligned covariates and index targets.
pub fn evaluate(
    logistic_model: &LogisticModel,
    excess_model: &GpdModel,
    x: &CovariateMatrix,
    targets: &[f64],
    u: f64,
    max_lag: usize,
) -> Result<EvaluationReport> {
    if x.nrows() != targets.len() {
        return Err(Error::Alignment("covariate rows and targets differ in length".into()));
    }
    let labels: Vec<bool> = targets.iter().map(|&y| y > u).collect();
    let eta = logistic_model.predictor.eval_matrix(x)?;
    let auc_value = auc(&eta, &labels)?;
    let deviance = deviance_test(logistic_model, x, &labels)?;
    let acf_pearson = residual_acf(
        Residuals::PearsonLogistic {
            model: logistic_model,
            x,
            labels: &labels,
        },
        max_lag,
    )?;
    let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let xz = x.select_rows(&rows);
    let z: Vec<f64> = rows.iter().map(|&i| targets[i] - u).collect();
    let acf_excess = if z.len() > max_lag + 1 {
        Some(residual_acf(
            Residuals::ExcessGpd {
                model: excess_model,
                x: &xz,
                excesses: &z,
            },
            max_lag,
        )?)
    } else {
        log::warn!("{} excesses are too few for a lag-{max_lag} ACF", z.len());
        None
    };
    let qq_points = if z.len() >= MIN_QQ {
        qq_standardised_excesses(excess_model, &xz, &z)?
    } else {
        Vec::new()
    };
    let threshold_curve = threshold_sweep(targets, u, &DEFAULT_FRACTIONS, |l| {
        refit_scores(&logistic_model.predictor, x, l)
    });
    if threshold_curve.iter().all(|e| e.auc.is_none()) {
        log::warn!("no threshold fraction produced a defined AUC");
    }
    Ok(EvaluationReport {
        auc: auc_value,
        deviance,
        acf_pearson,
        acf_excess,
        qq_points,
        threshold_curve,
    })
}
