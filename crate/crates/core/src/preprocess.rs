//! Covariate matrices, Box-Cox selection, standardisation and collinearity pruning.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math::{ln, mean, pearson, powf, sample_variance, sqrt};
use crate::regress::{univariate_aic, Response};
use crate::{Error, Result, Timestamp};

/// Candidate Box-Cox powers; zero encodes the logarithm.
pub const LAMBDA_GRID: [f64; 9] = [-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0];
pub const MIN_BOXCOX: usize = 20;
pub const DEFAULT_CUTOFF: f64 = 0.6;

/// Rows of covariates indexed by issue time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovariateMatrix {
    timestamps: Vec<Timestamp>,
    names: Vec<String>,
    values: Vec<f64>,
    transform: Option<TransformSpec>,
}

impl CovariateMatrix {
    /// Row-major `values` with one row per timestamp and one column per name.
    pub fn new(timestamps: Vec<Timestamp>, names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if values.len() != timestamps.len() * names.len() {
            return Err(Error::Data(format!(
                "{} values do not fill {} rows x {} columns",
                values.len(),
                timestamps.len(),
                names.len()
            )));
        }
        let mut sorted = names.clone();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Data(format!("duplicate column `{}`", w[0])));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("covariate matrix has a missing or non-finite cell".into()));
        }
        Ok(CovariateMatrix {
            timestamps,
            names,
            values,
            transform: None,
        })
    }

    /// Matrix from named columns.
    pub fn from_columns(timestamps: Vec<Timestamp>, columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let n = timestamps.len();
        if let Some((name, c)) = columns.iter().find(|(_, c)| c.len() != n) {
            return Err(Error::Data(format!("column `{name}` has {} rows, expected {n}", c.len())));
        }
        let mut values = Vec::with_capacity(n * columns.len());
        for i in 0..n {
            values.extend(columns.iter().map(|(_, c)| c[i]));
        }
        Self::new(timestamps, columns.into_iter().map(|(n, _)| n).collect(), values)
    }

    pub fn nrows(&self) -> usize {
        self.timestamps.len()
    }

    pub fn ncols(&self) -> usize {
        self.names.len()
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn transform(&self) -> Option<&TransformSpec> {
        self.transform.as_ref()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.ncols();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn row_map(&self, i: usize) -> BTreeMap<String, f64> {
        self.names.iter().cloned().zip(self.row(i).iter().copied()).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        let p = self.ncols();
        (0..self.nrows()).map(|i| self.values[i * p + j]).collect()
    }

    pub fn column_by_name(&self, name: &str) -> Option<Vec<f64>> {
        self.column_index(name).map(|j| self.column(j))
    }

    pub fn select_columns<S: AsRef<str>>(&self, names: &[S]) -> Result<Self> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.column_index(n.as_ref())
                    .ok_or_else(|| Error::Schema(format!("unknown column `{}`", n.as_ref())))
            })
            .collect::<Result<_>>()?;
        let p = self.ncols();
        let mut values = Vec::with_capacity(self.nrows() * idx.len());
        for i in 0..self.nrows() {
            values.extend(idx.iter().map(|&j| self.values[i * p + j]));
        }
        let names: Vec<String> = idx.iter().map(|&j| self.names[j].clone()).collect();
        Ok(CovariateMatrix {
            timestamps: self.timestamps.clone(),
            transform: self.transform.as_ref().map(|t| t.restrict(&names)),
            names,
            values,
        })
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut values = Vec::with_capacity(rows.len() * self.ncols());
        for &i in rows {
            values.extend_from_slice(self.row(i));
        }
        CovariateMatrix {
            timestamps: rows.iter().map(|&i| self.timestamps[i]).collect(),
            names: self.names.clone(),
            values,
            transform: self.transform.clone(),
        }
    }

    /// Columns reordered lexicographically by name.
    pub fn sorted_columns(self) -> Self {
        let mut names = self.names.clone();
        names.sort();
        if names == self.names {
            return self;
        }
        self.select_columns(&names).expect("same column set")
    }

    /// Stack matrices with identical columns.
    pub fn vstack(parts: &[CovariateMatrix]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::param("nothing to stack"))?;
        let mut out = CovariateMatrix {
            timestamps: Vec::new(),
            names: first.names.clone(),
            values: Vec::new(),
            transform: first.transform.clone(),
        };
        for p in parts {
            if p.names != first.names {
                return Err(Error::Schema("stacked matrices must share columns".into()));
            }
            out.timestamps.extend_from_slice(&p.timestamps);
            out.values.extend_from_slice(&p.values);
        }
        Ok(out)
    }

    /// Same values with every timestamp moved by `micros`.
    pub fn shift_time(mut self, micros: i64) -> Self {
        self.timestamps.iter_mut().for_each(|t| *t = t.offset(micros));
        self
    }

    /// Drop columns with zero sample variance, returning their names.
    pub fn drop_constant_columns(self) -> (Self, Vec<String>) {
        let (keep, drop): (Vec<String>, Vec<String>) = self
            .names
            .iter()
            .enumerate()
            .map(|(j, n)| (n.clone(), sample_variance(&self.column(j)) > 0.0))
            .fold((Vec::new(), Vec::new()), |(mut k, mut d), (n, ok)| {
                if ok {
                    k.push(n)
                } else {
                    d.push(n)
                }
                (k, d)
            });
        if drop.is_empty() {
            return (self, drop);
        }
        (self.select_columns(&keep).expect("subset of own columns"), drop)
    }
}

/// Box-Cox transform `(x^lambda - 1) / lambda`, `ln x` at zero.
pub fn boxcox(x: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        ln(x)
    } else if lambda == 1.0 {
        x - 1.0
    } else {
        (powf(x, lambda) - 1.0) / lambda
    }
}

/// Shift that makes every value strictly positive: `max(0, -min + 1e-6 * range)`.
pub fn positivity_shift(values: &[f64]) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if lo > 0.0 {
        0.0
    } else {
        -lo + 1e-6 * (hi - lo)
    }
}

/// Box-Cox profile log-likelihood of positive values at `lambda`.
pub fn boxcox_profile_loglik(positive: &[f64], lambda: f64) -> f64 {
    let n = positive.len() as f64;
    let t: Vec<f64> = positive.iter().map(|&x| boxcox(x, lambda)).collect();
    let m = mean(&t);
    let var = t.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    let log_jac: f64 = positive.iter().map(|&x| ln(x)).sum();
    -0.5 * n * ln(var) + (lambda - 1.0) * log_jac
}

/// Grid power maximising the profile likelihood after the positivity shift.
pub fn boxcox_select(values: &[f64]) -> Result<f64> {
    if values.len() < MIN_BOXCOX {
        return Err(Error::SampleSize {
            needed: MIN_BOXCOX,
            got: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Transform("non-finite value".into()));
    }
    if !(sample_variance(values) > 0.0) {
        return Err(Error::Transform("constant input has no Box-Cox power".into()));
    }
    let shift = positivity_shift(values);
    let x: Vec<f64> = values.iter().map(|v| v + shift).collect();
    let mut best = (f64::NEG_INFINITY, 1.0);
    for &l in &LAMBDA_GRID {
        let ll = boxcox_profile_loglik(&x, l);
        if ll.is_finite() && ll > best.0 {
            best = (ll, l);
        }
    }
    Ok(best.1)
}

/// Transform of one covariate: shift, Box-Cox power, then standardisation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnTransform {
    pub lambda: f64,
    pub shift: f64,
    /// Smallest shifted training value; new values are clamped to it when the power needs positivity.
    pub floor: Option<f64>,
    pub mean: f64,
    pub sd: f64,
}

impl ColumnTransform {
    pub fn apply(&self, v: f64) -> f64 {
        let mut x = v + self.shift;
        if let Some(f) = self.floor {
            x = x.max(f);
        }
        (boxcox(x, self.lambda) - self.mean) / self.sd
    }
}

/// Per-covariate transforms fitted on training rows.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub columns: BTreeMap<String, ColumnTransform>,
}

impl TransformSpec {
    /// Transform of `v` for covariate `name`; covariates without an entry pass through.
    pub fn apply_value(&self, name: &str, v: f64) -> Result<f64> {
        let out = match self.columns.get(name) {
            Some(t) => t.apply(v),
            None => v,
        };
        if out.is_finite() {
            Ok(out)
        } else {
            Err(Error::Transform(format!("transform of `{name}` at {v} is not finite")))
        }
    }

    pub fn restrict<S: AsRef<str>>(&self, names: &[S]) -> TransformSpec {
        TransformSpec {
            columns: names
                .iter()
                .filter_map(|n| self.columns.get(n.as_ref()).map(|t| (String::from(n.as_ref()), t.clone())))
                .collect(),
        }
    }
}

/// How Box-Cox powers are chosen when fitting a transform.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Lambda {
    /// Profile-likelihood choice from [`LAMBDA_GRID`] per column.
    Select,
    Fixed(f64),
}

/// Fit shift, power, mean and sd (`n - 1` denominator) of every column.
pub fn fit_standardizer(matrix: &CovariateMatrix, lambda: Lambda) -> Result<TransformSpec> {
    let mut columns = BTreeMap::new();
    for (j, name) in matrix.names().iter().enumerate() {
        let col = matrix.column(j);
        let ctx = |e: Error| Error::Transform(format!("column `{name}`: {e}"));
        let lambda = match lambda {
            Lambda::Select => boxcox_select(&col).map_err(ctx)?,
            Lambda::Fixed(l) => l,
        };
        let shift = positivity_shift(&col);
        let shifted: Vec<f64> = col.iter().map(|v| v + shift).collect();
        let floor = (lambda != 1.0).then(|| shifted.iter().copied().fold(f64::INFINITY, f64::min));
        if floor.is_some_and(|f| !(f > 0.0)) {
            return Err(Error::Transform(format!("column `{name}` is not positive after shifting")));
        }
        let t: Vec<f64> = shifted.iter().map(|&x| boxcox(x, lambda)).collect();
        let m = mean(&t);
        let sd = sqrt(sample_variance(&t));
        if !(sd > 0.0) || !sd.is_finite() || !m.is_finite() {
            return Err(Error::Transform(format!("column `{name}` has no spread after transformation")));
        }
        columns.insert(
            name.clone(),
            ColumnTransform {
                lambda,
                shift,
                floor,
                mean: m,
                sd,
            },
        );
    }
    Ok(TransformSpec { columns })
}

/// Apply a fitted transform. Every column of `matrix` must have an entry in `spec`.
pub fn apply_transform(matrix: &CovariateMatrix, spec: &TransformSpec) -> Result<CovariateMatrix> {
    let ts: Vec<&ColumnTransform> = matrix
        .names()
        .iter()
        .map(|n| spec.columns.get(n).ok_or_else(|| Error::Schema(format!("column `{n}` has no fitted transform"))))
        .collect::<Result<_>>()?;
    let p = matrix.ncols();
    let mut values = Vec::with_capacity(matrix.values().len());
    for (k, &v) in matrix.values().iter().enumerate() {
        let out = ts[k % p].apply(v);
        if !out.is_finite() {
            return Err(Error::Transform(format!("transform of `{}` at {v} is not finite", matrix.names()[k % p])));
        }
        values.push(out);
    }
    let mut out = CovariateMatrix::new(matrix.timestamps().to_vec(), matrix.names().to_vec(), values)?;
    out.transform = Some(spec.restrict(matrix.names()));
    Ok(out)
}

/// Greedy correlation screen.
///
/// Columns are ranked by the AIC of their univariate model for `response`
/// (failed fits last, ties by name); a column is kept if its absolute
/// correlation with every previously kept column is at most `cutoff`.
/// Returns kept names in rank order.
pub fn prune_collinear(matrix: &CovariateMatrix, response: Response, cutoff: f64) -> Result<Vec<String>> {
    let mut ranked = univariate_aic(matrix, response);
    for (n, a) in &ranked {
        if a.is_none() {
            log::warn!("univariate fit for `{n}` failed; ranked last");
        }
    }
    ranked.sort_by(|(na, a), (nb, b)| match (a, b) {
        (Some(x), Some(y)) => x.total_cmp(y).then_with(|| na.cmp(nb)),
        (Some(_), None) => core::cmp::Ordering::Less,
        (None, Some(_)) => core::cmp::Ordering::Greater,
        (None, None) => na.cmp(nb),
    });
    let mut kept: Vec<(String, Vec<f64>)> = Vec::new();
    for (name, _) in ranked {
        let col = matrix.column_by_name(&name).expect("ranked names come from the matrix");
        if kept.iter().all(|(_, k)| pearson(&col, k).abs() <= cutoff) {
            kept.push((name, col));
        }
    }
    Ok(kept.into_iter().map(|(n, _)| n).collect())
}

