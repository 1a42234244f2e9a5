//! Dynamic exceedance and excess regressions.
//!
//! The exceedance indicator `I_t` follows a logistic model
//! `phi_t = logistic(psi_0 + sum psi_i x_i)`; the excess `z_t = Y_t - u` given an
//! exceedance follows a GPD with fixed shape `xi` and scale
//! `nu_t = exp(kappa_0 + sum kappa_i x_i)`. When the shape is indistinguishable
//! from zero the excess model becomes exponential with the same log-linear scale.
//!
//! All fits maximise the log-likelihood by damped Newton ascent with step
//! halving (at most 200 iterations). Models carry the covariate transform of the
//! matrix they were fitted on and apply it to raw covariates at prediction time.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::time::Duration;

use serde::{Deserialize, Serialize};

use crate::evt::{gpd_eta_terms, GpdFit};
use crate::math::{exp, ln, ln_1p, logistic, mean, softplus};
use crate::optim::{Design, Optimum, Settings};
use crate::preprocess::{CovariateMatrix, TransformSpec};
use crate::{Error, Result, Timestamp};

/// Improvement in AIC a stepwise move must exceed.
pub const AIC_TOLERANCE: f64 = 1e-9;
/// Critical value of the two-sided 95% normal interval.
pub const Z_95: f64 = 1.96;

/// Exceedance indicators and excesses of an index over a threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceDataset {
    timestamps: Vec<Timestamp>,
    indicators: Vec<bool>,
    excesses: Vec<Option<f64>>,
    threshold: f64,
    lag: Duration,
}

impl ExceedanceDataset {
    /// Indicators `Y > u` (strict) and excesses `Y - u` where exceeded.
    pub fn from_values(timestamps: Vec<Timestamp>, values: &[f64], threshold: f64, lag: Duration) -> Result<Self> {
        if !threshold.is_finite() {
            return Err(Error::param("threshold must be finite"));
        }
        if timestamps.len() != values.len() {
            return Err(Error::Alignment("timestamps and values differ in length".into()));
        }
        let indicators: Vec<bool> = values.iter().map(|&y| y > threshold).collect();
        let excesses = values
            .iter()
            .zip(&indicators)
            .map(|(&y, &i)| if i { Some(y - threshold) } else { None })
            .collect();
        Ok(ExceedanceDataset {
            timestamps,
            indicators,
            excesses,
            threshold,
            lag,
        })
    }

    pub fn len(&self) -> usize {
        self.indicators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indicators.is_empty()
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }

    pub fn indicators(&self) -> &[bool] {
        &self.indicators
    }

    pub fn excess(&self, i: usize) -> Option<f64> {
        self.excesses[i]
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn lag(&self) -> Duration {
        self.lag
    }

    pub fn n_exceed(&self) -> usize {
        self.indicators.iter().filter(|&&i| i).count()
    }

    /// Row positions of the exceedances and their excesses.
    pub fn exceedance_rows(&self) -> (Vec<usize>, Vec<f64>) {
        self.excesses.iter().enumerate().filter_map(|(i, z)| z.map(|z| (i, z))).unzip()
    }

    /// Concatenate datasets sharing threshold and lag.
    pub fn concat(parts: &[ExceedanceDataset]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::param("no datasets to pool"))?;
        let mut out = ExceedanceDataset {
            timestamps: Vec::new(),
            indicators: Vec::new(),
            excesses: Vec::new(),
            threshold: first.threshold,
            lag: first.lag,
        };
        for p in parts {
            if p.threshold != first.threshold || p.lag != first.lag {
                return Err(Error::Alignment("pooled datasets must share threshold and lag".into()));
            }
            out.timestamps.extend_from_slice(&p.timestamps);
            out.indicators.extend_from_slice(&p.indicators);
            out.excesses.extend_from_slice(&p.excesses);
        }
        Ok(out)
    }
}

/// Optimiser diagnostics stored with a fitted model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub loglik: f64,
    pub aic: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Standard errors in coefficient order: intercept, then covariates by name.
    pub standard_errors: Vec<f64>,
}

impl FitDiagnostics {
    fn from_optimum(opt: &Optimum) -> Self {
        let k = opt.params.len();
        FitDiagnostics {
            loglik: opt.loglik,
            aic: aic(opt.loglik, k),
            iterations: opt.iterations,
            converged: opt.converged,
            standard_errors: opt.standard_errors().unwrap_or_else(|| vec![f64::NAN; k]),
        }
    }
}

pub fn aic(loglik: f64, k: usize) -> f64 {
    2.0 * k as f64 - 2.0 * loglik
}

/// Intercept and named coefficients of a linear predictor, plus the transform
/// that maps raw covariates onto the scale the coefficients were fitted on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearPredictor {
    pub intercept: f64,
    pub coefficients: BTreeMap<String, f64>,
    pub transform: TransformSpec,
}

impl LinearPredictor {
    fn from_fit(params: &[f64], names: &[String], source: &CovariateMatrix) -> Self {
        LinearPredictor {
            intercept: params[0],
            coefficients: names.iter().cloned().zip(params[1..].iter().copied()).collect(),
            transform: source.transform().map(|t| t.restrict(names)).unwrap_or_default(),
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.coefficients.keys().map(String::as_str)
    }

    /// Linear predictor at raw covariate values looked up by name.
    pub fn eval<F>(&self, mut lookup: F) -> Result<f64>
    where
        F: FnMut(&str) -> Option<f64>,
    {
        let mut eta = self.intercept;
        for (name, c) in &self.coefficients {
            let raw = lookup(name).ok_or_else(|| Error::Schema(format!("missing covariate `{name}`")))?;
            eta += c * self.transform.apply_value(name, raw)?;
        }
        Ok(eta)
    }

    pub fn eval_map(&self, x: &BTreeMap<String, f64>) -> Result<f64> {
        self.eval(|n| x.get(n).copied())
    }

    /// Linear predictor for every row of a raw (untransformed) matrix.
    pub fn eval_matrix(&self, x: &CovariateMatrix) -> Result<Vec<f64>> {
        let idx: Vec<(usize, f64, &str)> = self
            .coefficients
            .iter()
            .map(|(n, &c)| {
                x.column_index(n)
                    .map(|j| (j, c, n.as_str()))
                    .ok_or_else(|| Error::Schema(format!("missing covariate `{n}`")))
            })
            .collect::<Result<_>>()?;
        (0..x.nrows())
            .map(|i| {
                let row = x.row(i);
                let mut eta = self.intercept;
                for &(j, c, name) in &idx {
                    eta += c * self.transform.apply_value(name, row[j])?;
                }
                Ok(eta)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub predictor: LinearPredictor,
    pub diagnostics: FitDiagnostics,
}

/// Shape of the excess distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "xi", rename_all = "snake_case")]
pub enum Shape {
    Gpd(f64),
    Exponential,
}

impl Shape {
    pub fn xi(self) -> f64 {
        match self {
            Shape::Gpd(xi) => xi,
            Shape::Exponential => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpdModel {
    pub shape: Shape,
    pub predictor: LinearPredictor,
    pub diagnostics: FitDiagnostics,
}

fn design_for(x: &CovariateMatrix, names: &[String], rows: Option<&[usize]>) -> Result<Design> {
    let cols: Vec<Vec<f64>> = names
        .iter()
        .map(|n| {
            let c = x.column_by_name(n).ok_or_else(|| Error::Schema(format!("unknown covariate `{n}`")))?;
            Ok(match rows {
                Some(r) => r.iter().map(|&i| c[i]).collect(),
                None => c,
            })
        })
        .collect::<Result<_>>()?;
    let n = rows.map_or(x.nrows(), <[usize]>::len);
    let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    Ok(Design::from_columns(n, &refs))
}

fn sorted_names(x: &CovariateMatrix) -> Vec<String> {
    let mut names = x.names().to_vec();
    names.sort();
    names
}

pub(crate) fn logistic_term(y: bool, eta: f64) -> (f64, f64, f64) {
    let phi = logistic(eta);
    let l = if y { -softplus(-eta) } else { -softplus(eta) };
    (l, f64::from(u8::from(y)) - phi, -phi * (1.0 - phi))
}

fn fit_logistic_design(design: &Design, labels: &[bool], names: &[String]) -> Result<Optimum> {
    let ones = labels.iter().filter(|&&y| y).count();
    if ones == 0 || ones == labels.len() {
        return Err(Error::Data("logistic fit needs both exceedances and non-exceedances".into()));
    }
    let p1 = ones as f64 / labels.len() as f64;
    let mut start = vec![0.0; design.p];
    start[0] = ln(p1 / (1.0 - p1));
    let opt = design.maximise(start, &Settings::default(), |i, eta| Some(logistic_term(labels[i], eta)))?;
    let (j_max, b_max) = opt
        .params
        .iter()
        .enumerate()
        .skip(usize::from(design.p > 1))
        .fold((0, 0.0f64), |acc, (j, b)| if b.abs() > acc.1 { (j, b.abs()) } else { acc });
    let direction = || if j_max == 0 { "intercept".to_string() } else { names[j_max - 1].clone() };
    let eta = design.eta(&opt.params);
    let perfect = eta
        .iter()
        .zip(labels)
        .all(|(&e, &y)| (f64::from(u8::from(y)) - logistic(e)).abs() < 1e-6);
    if perfect || (!opt.converged && b_max > 30.0) {
        return Err(Error::Separation { direction: direction() });
    }
    if !opt.converged {
        return Err(opt.fit_error("logistic fit did not converge"));
    }
    Ok(opt)
}

/// Logistic regression of the indicators on every column of `x`.
pub fn fit_logistic(x: &CovariateMatrix, indicators: &[bool]) -> Result<LogisticModel> {
    if x.nrows() != indicators.len() {
        return Err(Error::Alignment("covariate rows and indicators differ in length".into()));
    }
    let names = sorted_names(x);
    let design = design_for(x, &names, None)?;
    let opt = fit_logistic_design(&design, indicators, &names)?;
    Ok(LogisticModel {
        predictor: LinearPredictor::from_fit(&opt.params, &names, x),
        diagnostics: FitDiagnostics::from_optimum(&opt),
    })
}

fn check_excesses(z: &[f64]) -> Result<()> {
    if z.is_empty() {
        return Err(Error::SampleSize { needed: 1, got: 0 });
    }
    if let Some(bad) = z.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::Data(format!("excesses must be positive and finite, got {bad}")));
    }
    Ok(())
}

/// Intercept start keeping every excess inside the support for `xi < 0`.
pub fn default_gpd_start(z: &[f64], xi: f64) -> f64 {
    let m = mean(z);
    let moment = ln(m * (1.0 - xi).max(1e-3));
    if xi < 0.0 {
        let zmax = z.iter().copied().fold(0.0, f64::max);
        moment.max(ln(zmax * (-xi) * 1.05))
    } else {
        moment
    }
}

fn fit_gpd_design(design: &Design, z: &[f64], shape: Shape, start: Vec<f64>) -> Result<Optimum> {
    let xi = shape.xi();
    if xi <= -1.0 || !xi.is_finite() {
        return Err(Error::param("fixed shape must exceed -1"));
    }
    let opt = design.maximise(start, &Settings::default(), |i, eta| gpd_eta_terms(z[i], xi, eta))?;
    if !opt.converged {
        return Err(opt.fit_error("GPD regression did not converge"));
    }
    Ok(opt)
}

fn gpd_model(x: &CovariateMatrix, z: &[f64], shape: Shape, start: Option<Vec<f64>>) -> Result<GpdModel> {
    if x.nrows() != z.len() {
        return Err(Error::Alignment("covariate rows and excesses differ in length".into()));
    }
    check_excesses(z)?;
    let names = sorted_names(x);
    let design = design_for(x, &names, None)?;
    let start = match start {
        Some(s) if s.len() != design.p => {
            return Err(Error::param(format!("start needs {} values, got {}", design.p, s.len())))
        }
        Some(s) => s,
        None => {
            let mut s = vec![0.0; design.p];
            s[0] = default_gpd_start(z, shape.xi());
            s
        }
    };
    let opt = fit_gpd_design(&design, z, shape, start)?;
    Ok(GpdModel {
        shape,
        predictor: LinearPredictor::from_fit(&opt.params, &names, x),
        diagnostics: FitDiagnostics::from_optimum(&opt),
    })
}

/// GPD regression of the excesses on every column of `x` with the shape held at `xi_fixed`.
///
/// For negative shape the start keeps every excess below the upper endpoint
/// `-nu/xi`; points outside the support have zero likelihood and are never accepted.
pub fn fit_gpd_regression(x: &CovariateMatrix, z: &[f64], xi_fixed: f64) -> Result<GpdModel> {
    gpd_model(x, z, Shape::Gpd(xi_fixed), None)
}

/// As [`fit_gpd_regression`] from an explicit coefficient start (intercept first,
/// then covariates by name). A start with any excess outside the support is a fit error.
pub fn fit_gpd_regression_from(x: &CovariateMatrix, z: &[f64], xi_fixed: f64, start: Vec<f64>) -> Result<GpdModel> {
    gpd_model(x, z, Shape::Gpd(xi_fixed), Some(start))
}

/// Exponential regression: the zero-shape limit of the GPD regression.
pub fn fit_exponential_regression(x: &CovariateMatrix, z: &[f64]) -> Result<GpdModel> {
    gpd_model(x, z, Shape::Exponential, None)
}

/// Excess regression for a given shape.
pub fn fit_excess_regression(x: &CovariateMatrix, z: &[f64], shape: Shape) -> Result<GpdModel> {
    gpd_model(x, z, shape, None)
}

/// Exponential when the 95% interval of the constant-GPD shape contains zero.
pub fn choose_shape(fit: &GpdFit) -> Shape {
    let (lo, hi) = (fit.xi - Z_95 * fit.se_xi, fit.xi + Z_95 * fit.se_xi);
    if lo <= 0.0 && 0.0 <= hi {
        Shape::Exponential
    } else {
        Shape::Gpd(fit.xi)
    }
}

/// Exceedance probability at raw covariates `x`.
pub fn predict_phi(model: &LogisticModel, x: &BTreeMap<String, f64>) -> Result<f64> {
    model.predictor.eval_map(x).map(logistic)
}

/// Scale `nu` at raw covariates `x`.
pub fn predict_nu(model: &GpdModel, x: &BTreeMap<String, f64>) -> Result<f64> {
    model.predictor.eval_map(x).map(exp)
}

/// GPD survival `P(Z > z)` for shape `xi` and scale `nu`.
pub fn gpd_survival(xi: f64, nu: f64, z: f64) -> f64 {
    if z <= 0.0 {
        return 1.0;
    }
    let y = z / nu;
    if xi == 0.0 {
        return exp(-y);
    }
    let w = xi * y;
    if w <= -1.0 {
        return 0.0;
    }
    exp(-ln_1p(w) / xi)
}

/// `P(Z > z | x)` under the excess model.
pub fn excess_survival(model: &GpdModel, x: &BTreeMap<String, f64>, z: f64) -> Result<f64> {
    Ok(gpd_survival(model.shape.xi(), predict_nu(model, x)?, z))
}

/// Which model a stepwise search or a univariate screen fits.
#[derive(Clone, Copy, Debug)]
pub enum Response<'a> {
    Logistic(&'a [bool]),
    /// Excesses of the exceedance rows of the matrix, one per row.
    Excess { excesses: &'a [f64], shape: Shape },
}

impl Response<'_> {
    fn len(&self) -> usize {
        match self {
            Response::Logistic(y) => y.len(),
            Response::Excess { excesses, .. } => excesses.len(),
        }
    }

    /// Maximised log-likelihood of the model on the given columns.
    pub(crate) fn fit(&self, x: &CovariateMatrix, names: &[String]) -> Result<Optimum> {
        let design = design_for(x, names, None)?;
        match *self {
            Response::Logistic(y) => fit_logistic_design(&design, y, names),
            Response::Excess { excesses, shape } => {
                check_excesses(excesses)?;
                let mut s = vec![0.0; design.p];
                s[0] = default_gpd_start(excesses, shape.xi());
                fit_gpd_design(&design, excesses, shape, s)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    BackwardThenForward,
    ForwardThenBackward,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FittedModel {
    Logistic(LogisticModel),
    Gpd(GpdModel),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    /// Selected covariates in lexicographic order.
    pub selected: Vec<String>,
    pub aic: f64,
    pub model: FittedModel,
}

fn candidate_aic(response: &Response, x: &CovariateMatrix, set: &[String]) -> Option<f64> {
    match response.fit(x, set) {
        Ok(opt) => Some(aic(opt.loglik, set.len() + 1)),
        Err(e) => {
            log::warn!("stepwise move {:?} skipped: {e}", set);
            None
        }
    }
}

fn phase(response: &Response, x: &CovariateMatrix, current: &mut Vec<String>, aic_now: &mut f64, forward: bool) {
    loop {
        let candidates: Vec<String> = if forward {
            x.names().iter().filter(|n| !current.contains(n)).cloned().collect()
        } else {
            current.clone()
        };
        let mut best: Option<(f64, String, Vec<String>)> = None;
        for name in candidates {
            let mut set: Vec<String> = if forward {
                let mut s = current.clone();
                s.push(name.clone());
                s
            } else {
                current.iter().filter(|n| **n != name).cloned().collect()
            };
            set.sort();
            if let Some(a) = candidate_aic(response, x, &set) {
                let better = match &best {
                    None => true,
                    Some((b, bn, _)) => a < *b || (a == *b && name < *bn),
                };
                if better {
                    best = Some((a, name, set));
                }
            }
        }
        match best {
            Some((a, _, set)) if a < *aic_now - AIC_TOLERANCE => {
                *aic_now = a;
                *current = set;
            }
            _ => return,
        }
    }
}

/// Greedy stepwise selection by AIC over the columns of `x`.
///
/// Each phase repeatedly applies the single addition or removal with the lowest
/// AIC until none improves it by more than [`AIC_TOLERANCE`]. The intercept is
/// always kept. Candidate ties go to the lexicographically smaller covariate.
pub fn stepwise_aic(x: &CovariateMatrix, response: Response, direction: Direction) -> Result<Selection> {
    if x.nrows() != response.len() {
        return Err(Error::Alignment("covariate rows and response differ in length".into()));
    }
    let all = sorted_names(x);
    let mut direction = direction;
    let mut current = Vec::new();
    let mut aic_now = f64::INFINITY;
    if direction == Direction::BackwardThenForward {
        match candidate_aic(&response, x, &all) {
            Some(a) => {
                current = all.clone();
                aic_now = a;
            }
            None => {
                log::warn!("full model failed to fit; starting from the intercept-only model");
                direction = Direction::ForwardThenBackward;
            }
        }
    }
    if direction == Direction::ForwardThenBackward {
        aic_now = response.fit(x, &[]).map(|o| aic(o.loglik, 1))?;
    }
    let forward_first = direction == Direction::ForwardThenBackward;
    phase(&response, x, &mut current, &mut aic_now, forward_first);
    phase(&response, x, &mut current, &mut aic_now, !forward_first);
    let sub = x.select_columns(&current)?;
    let model = match response {
        Response::Logistic(y) => FittedModel::Logistic(fit_logistic(&sub, y)?),
        Response::Excess { excesses, shape } => FittedModel::Gpd(fit_excess_regression(&sub, excesses, shape)?),
    };
    let aic = match &model {
        FittedModel::Logistic(m) => m.diagnostics.aic,
        FittedModel::Gpd(m) => m.diagnostics.aic,
    };
    Ok(Selection {
        selected: current,
        aic,
        model,
    })
}

/// Univariate-model AIC of each column, `None` where the fit failed.
pub fn univariate_aic(x: &CovariateMatrix, response: Response) -> Vec<(String, Option<f64>)> {
    x.names()
        .iter()
        .map(|n| {
            let set = [n.clone()];
            (n.clone(), candidate_aic(&response, x, &set))
        })
        .collect()
}

fn loglik_score<T>(x: &CovariateMatrix, params: &[f64], n: usize, term: T) -> Result<Option<(f64, Vec<f64>)>>
where
    T: Fn(usize, f64) -> Option<(f64, f64, f64)>,
{
    if x.nrows() != n {
        return Err(Error::Alignment("covariate rows and response differ in length".into()));
    }
    let design = design_for(x, &sorted_names(x), None)?;
    if params.len() != design.p {
        return Err(Error::param(format!("expected {} coefficients, got {}", design.p, params.len())));
    }
    let mut ll = 0.0;
    let mut g = vec![0.0; design.p];
    for (i, eta) in design.eta(params).into_iter().enumerate() {
        let Some((l, d1, _)) = term(i, eta) else {
            return Ok(None);
        };
        ll += l;
        for (gj, xj) in g.iter_mut().zip(design.row(i)) {
            *gj += d1 * xj;
        }
    }
    Ok(Some((ll, g)))
}

/// Logistic log-likelihood and score at `beta` (intercept, then covariates by name).
pub fn logistic_loglik_score(x: &CovariateMatrix, labels: &[bool], beta: &[f64]) -> Result<(f64, Vec<f64>)> {
    loglik_score(x, beta, labels.len(), |i, eta| Some(logistic_term(labels[i], eta))).map(|o| o.expect("always feasible"))
}

/// Excess-model log-likelihood and score at `kappa`; `None` outside the support.
pub fn excess_loglik_score(x: &CovariateMatrix, z: &[f64], shape: Shape, kappa: &[f64]) -> Result<Option<(f64, Vec<f64>)>> {
    let xi = shape.xi();
    loglik_score(x, kappa, z.len(), |i, eta| gpd_eta_terms(z[i], xi, eta))
}
