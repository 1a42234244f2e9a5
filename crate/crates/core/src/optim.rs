//! Damped Newton ascent with step halving, shared by every likelihood fit.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{cholesky, cholesky_inverse, cholesky_solve};
use crate::{Error, Result};

pub(crate) const MAX_ITER: usize = 200;

/// Log-likelihood with, when requested, its gradient and negated Hessian.
pub(crate) struct Evaluation {
    pub loglik: f64,
    pub grad: Vec<f64>,
    pub neg_hess: Vec<f64>,
}

#[derive(Clone, Debug)]
pub(crate) struct Optimum {
    pub params: Vec<f64>,
    pub loglik: f64,
    pub grad: Vec<f64>,
    pub neg_hess: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl Optimum {
    pub fn grad_max(&self) -> f64 {
        self.grad.iter().fold(0.0f64, |m, g| m.max(g.abs()))
    }

    /// Inverse observed information, if positive definite.
    pub fn covariance(&self) -> Option<Vec<f64>> {
        let p = self.params.len();
        cholesky(&self.neg_hess, p).map(|l| cholesky_inverse(&l, p))
    }

    pub fn standard_errors(&self) -> Option<Vec<f64>> {
        let p = self.params.len();
        self.covariance().map(|c| (0..p).map(|i| crate::math::sqrt(c[i * p + i].max(0.0))).collect())
    }

    pub fn fit_error(&self, reason: &str) -> Error {
        Error::fit(reason, self.iterations, self.grad_max())
    }
}

pub(crate) struct Settings {
    pub max_iter: usize,
    pub score_tol: f64,
    pub rel_tol: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            max_iter: MAX_ITER,
            score_tol: 1e-8,
            rel_tol: 1e-12,
        }
    }
}

fn newton_direction(neg_hess: &[f64], grad: &[f64]) -> Vec<f64> {
    let p = grad.len();
    let scale = (0..p).fold(0.0f64, |m, i| m.max(neg_hess[i * p + i].abs())).max(1e-300);
    let mut damping = 0.0;
    loop {
        let mut a = neg_hess.to_vec();
        for i in 0..p {
            a[i * p + i] += damping;
        }
        if let Some(l) = cholesky(&a, p) {
            return cholesky_solve(&l, p, grad);
        }
        damping = if damping == 0.0 { scale * 1e-8 } else { damping * 10.0 };
        if damping > scale * 1e8 {
            return grad.iter().map(|g| g / scale).collect();
        }
    }
}

/// Maximise `eval` from `start`. `eval(x, true)` must fill gradient and negated
/// Hessian; `eval(x, false)` only the log-likelihood. `None` marks an infeasible point.
pub(crate) fn maximise<F>(start: Vec<f64>, settings: &Settings, mut eval: F) -> Result<Optimum>
where
    F: FnMut(&[f64], bool) -> Option<Evaluation>,
{
    let mut x = start;
    let mut cur = match eval(&x, true) {
        Some(e) if e.loglik.is_finite() => e,
        _ => return Err(Error::fit("starting point outside the likelihood support", 0, f64::NAN)),
    };
    let mut converged = false;
    let mut iterations = 0;
    while iterations < settings.max_iter {
        let gmax = cur.grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gmax < settings.score_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let dir = newton_direction(&cur.neg_hess, &cur.grad);
        let predicted: f64 = dir.iter().zip(&cur.grad).map(|(d, g)| d * g).sum();
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            if let Some(e) = eval(&trial, false) {
                if e.loglik.is_finite() && e.loglik >= cur.loglik {
                    accepted = Some(trial);
                    break;
                }
            }
            step *= 0.5;
        }
        let Some(trial) = accepted else {
            converged = predicted.abs() <= 1e-10 * (1.0 + cur.loglik.abs());
            break;
        };
        let next = match eval(&trial, true) {
            Some(e) => e,
            None => break,
        };
        let change = next.loglik - cur.loglik;
        x = trial;
        cur = next;
        if change.abs() <= settings.rel_tol * cur.loglik.abs() {
            converged = true;
            break;
        }
    }
    Ok(Optimum {
        params: x,
        loglik: cur.loglik,
        grad: cur.grad,
        neg_hess: cur.neg_hess,
        iterations,
        converged,
    })
}

/// Row-major `n x p` design whose first column is the intercept.
#[derive(Clone, Debug)]
pub(crate) struct Design {
    pub n: usize,
    pub p: usize,
    pub x: Vec<f64>,
}

impl Design {
    /// Intercept followed by the given columns.
    pub fn from_columns(n: usize, columns: &[&[f64]]) -> Self {
        let p = columns.len() + 1;
        let mut x = vec![0.0; n * p];
        for i in 0..n {
            x[i * p] = 1.0;
            for (j, c) in columns.iter().enumerate() {
                x[i * p + j + 1] = c[i];
            }
        }
        Design { n, p, x }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn eta(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().zip(beta).map(|(a, b)| a * b).sum()).collect()
    }

    /// Fit a model whose log-likelihood is a sum of per-row terms in the linear
    /// predictor. `term(i, eta)` returns `(l_i, dl/deta, d2l/deta2)` or `None` if infeasible.
    pub fn maximise<T>(&self, start: Vec<f64>, settings: &Settings, term: T) -> Result<Optimum>
    where
        T: Fn(usize, f64) -> Option<(f64, f64, f64)>,
    {
        let p = self.p;
        maximise(start, settings, |beta, derivs| {
            let mut ll = 0.0;
            let mut grad = if derivs { vec![0.0; p] } else { Vec::new() };
            let mut neg_hess = if derivs { vec![0.0; p * p] } else { Vec::new() };
            for i in 0..self.n {
                let row = self.row(i);
                let eta: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
                let (l, d1, d2) = term(i, eta)?;
                ll += l;
                if derivs {
                    for a in 0..p {
                        grad[a] += d1 * row[a];
                        let ra = -d2 * row[a];
                        for b in 0..=a {
                            neg_hess[a * p + b] += ra * row[b];
                        }
                    }
                }
            }
            if derivs {
                for a in 0..p {
                    for b in 0..a {
                        neg_hess[b * p + a] = neg_hess[a * p + b];
                    }
                }
            }
            Some(Evaluation { loglik: ll, grad, neg_hess })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::cell::RefCell;

    #[test]
    fn accepted_logliks_never_decrease() {
        let ys = [0.3, 1.7, 2.2, 0.9, 4.1, 0.2, 1.1];
        let design = Design::from_columns(ys.len(), &[&[-1.0, 0.5, 1.0, 0.0, 2.0, -1.5, 0.3]]);
        let accepted = RefCell::new(Vec::new());
        let opt = maximise([3.0, -2.0].to_vec(), &Settings::default(), |b, derivs| {
            let mut ll = 0.0;
            let mut g = [0.0; 2];
            let mut h = [0.0; 4];
            for (i, &yi) in ys.iter().enumerate() {
                let r = design.row(i);
                let eta = r[0] * b[0] + r[1] * b[1];
                let y = yi * crate::math::exp(-eta);
                ll += -eta - y;
                for a in 0..2 {
                    g[a] += (y - 1.0) * r[a];
                    for c in 0..2 {
                        h[a * 2 + c] += y * r[a] * r[c];
                    }
                }
            }
            if derivs {
                accepted.borrow_mut().push(ll);
            }
            Some(Evaluation {
                loglik: ll,
                grad: g.to_vec(),
                neg_hess: h.to_vec(),
            })
        })
        .unwrap();
        assert!(opt.converged);
        let lls = accepted.into_inner();
        assert!(lls.len() > 2);
        assert!(lls.windows(2).all(|w| w[1] >= w[0]));
    }
}
