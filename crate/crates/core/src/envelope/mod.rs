//! Analytic signal, trace envelope and the decibel eruption index.
//!
//! For a trace `s` of length `T`:
//!
//! ```text
//! f   = DFT(s)                     f_t = sum_k s_k exp(-2 pi i k t / T)
//! H   = IDFT(f * h) / T            IDFT uses exp(+2 pi i k t / T)
//! E_t = |H_t|
//! Y_t = 20 log10(E_t)
//! ```
//!
//! `h` keeps DC (weight 1), doubles the positive frequencies, keeps the Nyquist
//! bin once for even `T` (weight 1) and zeroes the negative frequencies.

pub mod fft;

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::math::{hypot, log10, powf};
use crate::trace::SeismicTrace;
use crate::{Error, Result, Timestamp};
pub use fft::{FftPlan, FftPlanner};

/// Floor applied to the decibel index when the envelope vanishes.
pub const DEFAULT_FLOOR_DB: f64 = -300.0;

pub fn dft(series: &[Complex64]) -> Result<Vec<Complex64>> {
    if series.is_empty() {
        return Err(Error::param("DFT of an empty sequence"));
    }
    Ok(FftPlan::new(series.len()).forward(series))
}

pub fn dft_real(series: &[f64]) -> Result<Vec<Complex64>> {
    let c: Vec<Complex64> = series.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    dft(&c)
}

/// Unnormalised inverse DFT (`+` sign in the exponent).
pub fn idft(spectrum: &[Complex64]) -> Result<Vec<Complex64>> {
    if spectrum.is_empty() {
        return Err(Error::param("inverse DFT of an empty sequence"));
    }
    Ok(FftPlan::new(spectrum.len()).inverse(spectrum))
}

/// Spectral weights turning a real sequence of length `n` into its analytic signal.
pub fn hilbert_weights(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n];
    if n == 0 {
        return h;
    }
    h[0] = 1.0;
    if n.is_multiple_of(2) {
        h[1..n / 2].iter_mut().for_each(|v| *v = 2.0);
        h[n / 2] = 1.0;
    } else {
        h[1..n.div_ceil(2)].iter_mut().for_each(|v| *v = 2.0);
    }
    h
}

/// Complex analytic extension of a real sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticSignal {
    values: Vec<Complex64>,
}

impl AnalyticSignal {
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Instantaneous amplitude `|H_t|`.
    pub fn modulus(&self) -> Vec<f64> {
        self.values.iter().map(|z| hypot(z.re, z.im)).collect()
    }
}

pub fn hilbert(series: &[f64]) -> Result<AnalyticSignal> {
    hilbert_with(series, &mut FftPlanner::new())
}

pub(crate) fn hilbert_with(series: &[f64], planner: &mut FftPlanner) -> Result<AnalyticSignal> {
    let n = series.len();
    if n < 2 {
        return Err(Error::SampleSize { needed: 2, got: n });
    }
    let plan = planner.plan(n);
    let x: Vec<Complex64> = series.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut f = plan.forward(&x);
    for (fk, hk) in f.iter_mut().zip(hilbert_weights(n)) {
        *fk *= hk;
    }
    let scale = 1.0 / n as f64;
    let values = plan.inverse(&f).into_iter().map(|v| v * scale).collect();
    Ok(AnalyticSignal { values })
}

/// `20 log10(value)`, clamped below at `floor_db`.
pub fn db_index(value: f64, floor_db: f64) -> Result<f64> {
    if !(value >= 0.0) {
        return Err(Error::param("envelope value must be non-negative"));
    }
    Ok(db_unchecked(value, floor_db))
}

fn db_unchecked(value: f64, floor_db: f64) -> f64 {
    if value <= powf(10.0, floor_db / 20.0) {
        floor_db
    } else {
        (20.0 * log10(value)).max(floor_db)
    }
}

/// Envelope `E_t` and index `Y_t = 20 log10 E_t` on a uniform time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeIndexSeries {
    envelope: Vec<f64>,
    index_db: Vec<f64>,
    start_time: Timestamp,
    sample_rate_hz: f64,
}

impl EnvelopeIndexSeries {
    pub fn from_envelope(envelope: Vec<f64>, start_time: Timestamp, sample_rate_hz: f64, floor_db: f64) -> Result<Self> {
        if envelope.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Data("envelope values must be non-negative".into()));
        }
        let index_db = envelope.iter().map(|&v| db_unchecked(v, floor_db)).collect();
        Self::checked(envelope, index_db, start_time, sample_rate_hz)
    }

    /// Build directly from decibel values; the envelope is recovered as `10^(Y/20)`.
    pub fn from_index(index_db: Vec<f64>, start_time: Timestamp, sample_rate_hz: f64) -> Result<Self> {
        if index_db.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("index values must be finite".into()));
        }
        let envelope = index_db.iter().map(|&y| powf(10.0, y / 20.0)).collect();
        Self::checked(envelope, index_db, start_time, sample_rate_hz)
    }

    fn checked(envelope: Vec<f64>, index_db: Vec<f64>, start_time: Timestamp, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz > 0.0) {
            return Err(Error::param("sample rate must be positive"));
        }
        if index_db.is_empty() {
            return Err(Error::SampleSize { needed: 1, got: 0 });
        }
        Ok(EnvelopeIndexSeries {
            envelope,
            index_db,
            start_time,
            sample_rate_hz,
        })
    }

    pub fn envelope(&self) -> &[f64] {
        &self.envelope
    }

    pub fn index_db(&self) -> &[f64] {
        &self.index_db
    }

    pub fn len(&self) -> usize {
        self.index_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index_db.is_empty()
    }

    pub fn start_time(&self) -> Timestamp {
        self.start_time
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn timestamp(&self, i: usize) -> Timestamp {
        self.start_time.sample_time(i, self.sample_rate_hz)
    }

    pub fn timestamps(&self) -> impl Iterator<Item = Timestamp> + '_ {
        (0..self.len()).map(|i| self.timestamp(i))
    }

    /// Index value at exactly `t`, if `t` falls on (within half a period of) a sample.
    pub fn value_at(&self, t: Timestamp) -> Option<f64> {
        let i = self.start_time.nearest_index(t, self.sample_rate_hz);
        if i < 0 || i as usize >= self.len() {
            return None;
        }
        Some(self.index_db[i as usize])
    }

    /// Index values sampled every `step` starting at the first sample.
    pub fn resample_every(&self, step: core::time::Duration) -> Result<EnvelopeIndexSeries> {
        let step_us = crate::time::micros(step);
        if step_us <= 0 {
            return Err(Error::param("resampling step must be positive"));
        }
        let mut values = Vec::new();
        let mut t = self.start_time;
        while let Some(v) = self.value_at(t) {
            values.push(v);
            t = t.offset(step_us);
        }
        EnvelopeIndexSeries::from_index(values, self.start_time, 1e6 / step_us as f64)
    }

    pub fn with_start_time(mut self, start_time: Timestamp) -> Self {
        self.start_time = start_time;
        self
    }
}

/// Envelope and decibel index of a whole contiguous trace.
pub fn envelope(trace: &SeismicTrace, floor_db: f64) -> Result<EnvelopeIndexSeries> {
    let analytic = hilbert(trace.samples())?;
    EnvelopeIndexSeries::from_envelope(analytic.modulus(), trace.start_time(), trace.sample_rate_hz(), floor_db)
}
