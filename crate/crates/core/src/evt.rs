//! Constant GPD fits, bootstrap goodness of fit and threshold selection.
//!
//! Excesses `z > 0` over a threshold are modelled as GPD with shape `xi` and
//! scale `sigma`: survival `(1 + xi z / sigma)^(-1/xi)`, exponential at `xi = 0`.
//! Fits work in `(xi, tau = ln sigma)` with derivatives written through
//! `w = xi z / sigma` so that they stay accurate as `xi` approaches zero.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::envelope::EnvelopeIndexSeries;
use crate::math::{ceil, exp, floor, ln, ln_1p, mean, quantile_sorted, sample_variance, sort_f64, sqrt};
use crate::optim::{maximise, Evaluation, Settings};
use crate::regress::{gpd_survival, ExceedanceDataset};
use crate::{rng, Error, Result};

/// Smallest sample the constant GPD is fitted to.
pub const MIN_FIT: usize = 10;
/// Smallest number of excesses for a grid point to be tested.
pub const MIN_EXCESSES: usize = 30;
pub const DEFAULT_ALPHA: f64 = 0.10;
pub const DEFAULT_N_BOOT: usize = 999;
/// Largest share of failed bootstrap refits that is tolerated.
pub const MAX_BOOT_FAILURES: f64 = 0.05;

const SERIES_CUTOFF: f64 = 1e-2;
const SERIES_TERMS: i32 = 12;

/// `ln(1 + w) / w`.
fn l_fn(w: f64) -> f64 {
    if w.abs() < SERIES_CUTOFF {
        (0..SERIES_TERMS).rev().fold(0.0, |acc, k| acc * w + if k % 2 == 0 { 1.0 } else { -1.0 } / (k + 1) as f64)
    } else {
        ln_1p(w) / w
    }
}

/// `(ln(1 + w) - w / (1 + w)) / w^2`.
fn m_fn(w: f64) -> f64 {
    if w.abs() < SERIES_CUTOFF {
        (0..SERIES_TERMS).rev().fold(0.0, |acc, k| {
            let c = (k + 1) as f64 / (k + 2) as f64;
            acc * w + if k % 2 == 0 { c } else { -c }
        })
    } else {
        (ln_1p(w) - w / (1.0 + w)) / (w * w)
    }
}

/// Derivative of [`m_fn`].
fn n_fn(w: f64) -> f64 {
    if w.abs() < SERIES_CUTOFF {
        (0..SERIES_TERMS).rev().fold(0.0, |acc, k| {
            let c = ((k + 1) * (k + 2)) as f64 / (k + 3) as f64;
            acc * w + if k % 2 == 0 { -c } else { c }
        })
    } else {
        (-2.0 * ln_1p(w) + 2.0 * w / (1.0 + w)) / (w * w * w) + 1.0 / (w * (1.0 + w) * (1.0 + w))
    }
}

/// Per-excess log-density and its derivatives in `(xi, tau)`:
/// `(l, l_xi, l_tau, l_xixi, l_xitau, l_tautau)`, or `None` outside the support.
pub(crate) fn gpd_terms(z: f64, xi: f64, tau: f64) -> Option<[f64; 6]> {
    let y = z * exp(-tau);
    let w = xi * y;
    let a = 1.0 + w;
    if !(a > 0.0) {
        return None;
    }
    let l = -tau - ln_1p(w) - y * l_fn(w);
    let d_tau = -1.0 + (w + y) / a;
    let d_xi = y * y * m_fn(w) - y / a;
    let d_tautau = -(w + y) / (a * a);
    let d_xitau = y * (1.0 - y) / (a * a);
    let d_xixi = y * y * y * n_fn(w) + y * y / (a * a);
    Some([l, d_xi, d_tau, d_xixi, d_xitau, d_tautau])
}

/// Log-density in the log-scale `eta` at fixed shape with its first two derivatives.
pub(crate) fn gpd_eta_terms(z: f64, xi: f64, eta: f64) -> Option<(f64, f64, f64)> {
    let y = z * exp(-eta);
    let w = xi * y;
    let a = 1.0 + w;
    if !(a > 0.0) {
        return None;
    }
    let l = -eta - ln_1p(w) - y * l_fn(w);
    Some((l, -1.0 + (w + y) / a, -(w + y) / (a * a)))
}

/// GPD log-likelihood of `z` at `(xi, sigma)`; `-inf` outside the support.
pub fn gpd_loglik(z: &[f64], xi: f64, sigma: f64) -> f64 {
    let tau = ln(sigma);
    z.iter()
        .map(|&v| gpd_terms(v, xi, tau).map_or(f64::NEG_INFINITY, |t| t[0]))
        .sum()
}

/// Analytic gradient of [`gpd_loglik`] in `(xi, ln sigma)`.
pub fn gpd_score(z: &[f64], xi: f64, sigma: f64) -> Option<[f64; 2]> {
    let tau = ln(sigma);
    let mut g = [0.0; 2];
    for &v in z {
        let t = gpd_terms(v, xi, tau)?;
        g[0] += t[1];
        g[1] += t[2];
    }
    Some(g)
}

/// Constant-GPD maximum likelihood fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpdFit {
    pub xi: f64,
    pub sigma: f64,
    pub se_xi: f64,
    pub se_sigma: f64,
    pub n: usize,
    pub loglik: f64,
}

/// GPD distribution function.
pub fn gpd_cdf(xi: f64, sigma: f64, z: f64) -> f64 {
    1.0 - gpd_survival(xi, sigma, z)
}

/// GPD quantile at probability `p` in `[0, 1)`.
pub fn gpd_quantile(xi: f64, sigma: f64, p: f64) -> f64 {
    let s = 1.0 - p;
    if xi == 0.0 {
        -sigma * ln(s)
    } else {
        sigma * (exp(-xi * ln(s)) - 1.0) / xi
    }
}

fn moment_start(z: &[f64]) -> (f64, f64) {
    let m = mean(z);
    let v = sample_variance(z);
    let r = m * m / v;
    let mut xi = (0.5 * (1.0 - r)).clamp(-0.9, 0.9);
    let mut sigma = m * (1.0 - xi);
    let zmax = z.iter().copied().fold(0.0, f64::max);
    if xi < 0.0 && sigma <= -xi * zmax * 1.01 {
        xi = xi.max(-0.5);
        sigma = -xi * zmax * 1.05;
    }
    (xi, sigma)
}

fn fit_from(z: &[f64], start: (f64, f64)) -> Result<GpdFit> {
    let settings = Settings {
        score_tol: 1e-9 * z.len() as f64,
        ..Settings::default()
    };
    let opt = maximise([start.0, ln(start.1)].to_vec(), &settings, |p, derivs| {
        let (xi, tau) = (p[0], p[1]);
        if xi <= -1.0 {
            return None;
        }
        let mut ll = 0.0;
        let mut h = [0.0; 5];
        for &v in z {
            let t = gpd_terms(v, xi, tau)?;
            ll += t[0];
            if derivs {
                for k in 0..5 {
                    h[k] += t[k + 1];
                }
            }
        }
        Some(Evaluation {
            loglik: ll,
            grad: if derivs { [h[0], h[1]].to_vec() } else { Vec::new() },
            neg_hess: if derivs { [-h[2], -h[3], -h[3], -h[4]].to_vec() } else { Vec::new() },
        })
    })?;
    if !opt.converged {
        return Err(opt.fit_error("constant GPD fit did not converge"));
    }
    let (xi, sigma) = (opt.params[0], exp(opt.params[1]));
    if xi <= -1.0 + 1e-6 {
        return Err(opt.fit_error("shape estimate on the boundary xi = -1"));
    }
    let cov = opt
        .covariance()
        .ok_or_else(|| opt.fit_error("observed information is not positive definite"))?;
    Ok(GpdFit {
        xi,
        sigma,
        se_xi: sqrt(cov[0]),
        se_sigma: sigma * sqrt(cov[3]),
        n: z.len(),
        loglik: opt.loglik,
    })
}

/// Maximum likelihood fit of a constant GPD to positive excesses, restricted to `xi > -1`.
pub fn fit_gpd_constant(excesses: &[f64]) -> Result<GpdFit> {
    if excesses.len() < MIN_FIT {
        return Err(Error::SampleSize {
            needed: MIN_FIT,
            got: excesses.len(),
        });
    }
    if let Some(bad) = excesses.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::Data(format!("excesses must be positive and finite, got {bad}")));
    }
    if !(sample_variance(excesses) > 0.0) {
        return Err(Error::fit("all excesses are equal; no interior optimum", 0, f64::NAN));
    }
    fit_from(excesses, moment_start(excesses))
}

/// Maximum likelihood over the closed region `xi >= -1`.
///
/// Where the likelihood increases toward `xi = -1` the supremum is the
/// uniform limit `xi = -1, sigma = max z`, returned with undefined standard errors.
pub fn fit_gpd_constrained(excesses: &[f64]) -> Result<GpdFit> {
    match fit_gpd_constant(excesses) {
        Err(Error::Fit { .. }) if sample_variance(excesses) > 0.0 => {
            let zmax = excesses.iter().copied().fold(0.0, f64::max);
            let interior = fit_from(excesses, (-0.99, zmax * 0.99 * 1.0001));
            let boundary = -(excesses.len() as f64) * ln(zmax);
            match interior {
                Ok(f) if f.loglik > boundary => Ok(f),
                _ => Ok(GpdFit {
                    xi: -1.0,
                    sigma: zmax,
                    se_xi: f64::NAN,
                    se_sigma: f64::NAN,
                    n: excesses.len(),
                    loglik: boundary,
                }),
            }
        }
        other => other,
    }
}

/// Anderson-Darling and Cramer-von Mises statistics of `z` against a GPD.
pub fn gof_statistics(z: &[f64], xi: f64, sigma: f64) -> (f64, f64) {
    let mut u: Vec<f64> = z.iter().map(|&v| gpd_cdf(xi, sigma, v).clamp(1e-300, 1.0 - 1e-16)).collect();
    sort_f64(&mut u);
    let n = u.len();
    let nf = n as f64;
    let mut ad = 0.0;
    let mut cvm = 1.0 / (12.0 * nf);
    for i in 0..n {
        let k = (2 * i + 1) as f64;
        ad += k * (ln(u[i]) + ln_1p(-u[n - 1 - i]));
        let d = u[i] - k / (2.0 * nf);
        cvm += d * d;
    }
    (-nf - ad / nf, cvm)
}

/// Draw `n` GPD variates by inversion.
pub fn sample_gpd(rng: &mut rng::Rng, xi: f64, sigma: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            gpd_quantile(xi, sigma, u)
        })
        .collect()
}

/// Parametric-bootstrap p-values `(p_ad, p_cvm)` of the fitted GPD.
///
/// Replicate `b` draws from `rng::stream(seed, b)`, so results do not depend on
/// evaluation order. Failed refits are dropped if fewer than 5% fail.
pub fn gof_pvalues(excesses: &[f64], fit: &GpdFit, n_boot: usize, seed: u64) -> Result<(f64, f64)> {
    if n_boot == 0 {
        return Err(Error::param("n_boot must be positive"));
    }
    let (ad0, cvm0) = gof_statistics(excesses, fit.xi, fit.sigma);
    let n = excesses.len();
    let (mut ge_ad, mut ge_cvm, mut used, mut failed) = (0usize, 0usize, 0usize, 0usize);
    for b in 0..n_boot {
        let mut r = rng::stream(seed, b as u64);
        let sim = sample_gpd(&mut r, fit.xi, fit.sigma, n);
        let refit = if fit.xi > -1.0 {
            fit_from(&sim, (fit.xi, fit.sigma)).or_else(|_| fit_gpd_constrained(&sim))
        } else {
            fit_gpd_constrained(&sim)
        };
        match refit {
            Ok(f) => {
                let (ad, cvm) = gof_statistics(&sim, f.xi, f.sigma);
                ge_ad += usize::from(ad >= ad0);
                ge_cvm += usize::from(cvm >= cvm0);
                used += 1;
            }
            Err(_) => failed += 1,
        }
    }
    if failed > 0 {
        if failed as f64 >= MAX_BOOT_FAILURES * n_boot as f64 {
            return Err(Error::fit(
                format!("{failed} of {n_boot} bootstrap refits failed"),
                0,
                f64::NAN,
            ));
        }
        log::warn!("dropped {failed} of {n_boot} failed bootstrap refits");
    }
    let d = (used + 1) as f64;
    Ok(((ge_ad + 1) as f64 / d, (ge_cvm + 1) as f64 / d))
}

/// Test results at one grid threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub threshold: f64,
    pub n_exceed: usize,
    /// `None` where the point was skipped or not reached by the downward scan.
    pub p_ad: Option<f64>,
    pub p_cvm: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSelection {
    pub points: Vec<ScanPoint>,
    pub alpha: f64,
    pub chosen: f64,
}

impl ThresholdSelection {
    pub fn grid(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.threshold).collect()
    }

    pub fn chosen_point(&self) -> &ScanPoint {
        self.points.iter().find(|p| p.threshold == self.chosen).expect("chosen is on the grid")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub alpha: f64,
    pub n_boot: usize,
    pub seed: u64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            alpha: DEFAULT_ALPHA,
            n_boot: DEFAULT_N_BOOT,
            seed: 0,
        }
    }
}

/// Integer thresholds from the 50th to the 99.9th percentile of `values`.
pub fn default_grid(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::SampleSize { needed: 1, got: 0 });
    }
    let mut s = values.to_vec();
    sort_f64(&mut s);
    let (lo, hi) = (ceil(quantile_sorted(&s, 0.5)), floor(quantile_sorted(&s, 0.999)));
    let mut grid = Vec::new();
    let mut u = lo;
    while u <= hi {
        grid.push(u);
        u += 1.0;
    }
    if grid.is_empty() {
        grid.push(lo);
    }
    Ok(grid)
}

/// Threshold selection on raw index values.
///
/// Grid points leaving fewer than [`MIN_EXCESSES`] excesses are skipped. From
/// the highest tested point downward, points are accepted while both bootstrap
/// p-values are at least `alpha`; the lowest accepted point is chosen and the
/// scan stops at the first rejection. Point `k` of the grid draws its bootstrap
/// from seed stream `k`.
pub fn threshold_scan_values(values: &[f64], grid: &[f64], config: &ScanConfig) -> Result<ThresholdSelection> {
    if grid.is_empty() {
        return Err(Error::param("threshold grid is empty"));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::param("threshold grid must be strictly ascending"));
    }
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(Error::param("alpha must lie in (0, 1)"));
    }
    let mut points: Vec<ScanPoint> = grid
        .iter()
        .map(|&u| ScanPoint {
            threshold: u,
            n_exceed: values.iter().filter(|&&y| y > u).count(),
            p_ad: None,
            p_cvm: None,
        })
        .collect();
    let skipped = points.iter().filter(|p| p.n_exceed < MIN_EXCESSES).count();
    if skipped > 0 {
        log::warn!("{skipped} grid points leave fewer than {MIN_EXCESSES} excesses and are skipped");
    }
    let mut chosen = None;
    for k in (0..points.len()).rev() {
        if points[k].n_exceed < MIN_EXCESSES {
            continue;
        }
        let u = points[k].threshold;
        let z: Vec<f64> = values.iter().filter(|&&y| y > u).map(|&y| y - u).collect();
        let tested = fit_gpd_constrained(&z).and_then(|fit| gof_pvalues(&z, &fit, config.n_boot, rng::mix(config.seed, k as u64)));
        let (p_ad, p_cvm) = tested.unwrap_or_else(|e| {
            log::warn!("goodness-of-fit test at threshold {u} failed: {e}");
            (0.0, 0.0)
        });
        points[k].p_ad = Some(p_ad);
        points[k].p_cvm = Some(p_cvm);
        if p_ad.min(p_cvm) < config.alpha {
            break;
        }
        chosen = Some(u);
    }
    match chosen {
        Some(chosen) => Ok(ThresholdSelection {
            points,
            alpha: config.alpha,
            chosen,
        }),
        None => Err(Error::Selection {
            pvalues: points
                .iter()
                .filter_map(|p| Some((p.threshold, p.p_ad?, p.p_cvm?)))
                .collect(),
        }),
    }
}

/// Threshold selection on the values of an index series.
pub fn threshold_scan(index: &EnvelopeIndexSeries, grid: &[f64], config: &ScanConfig) -> Result<ThresholdSelection> {
    threshold_scan_values(index.index_db(), grid, config)
}

/// Lowest of the per-event thresholds.
pub fn multi_event_threshold(thresholds: &[f64]) -> Result<f64> {
    if thresholds.is_empty() {
        return Err(Error::param("no event thresholds"));
    }
    Ok(thresholds.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Exceedances of an index over `u`, recorded with covariate lag `lag`.
pub fn exceedances(index: &EnvelopeIndexSeries, u: f64, lag: core::time::Duration) -> Result<ExceedanceDataset> {
    ExceedanceDataset::from_values(index.timestamps().collect(), index.index_db(), u, lag)
}
