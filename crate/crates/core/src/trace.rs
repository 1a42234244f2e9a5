//! Signal traces, zero-phase Butterworth band filtering and decimation.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::math::{hypot, sqrt, tan};
use crate::{Error, Result, Timestamp};

/// Frequency band a trace has been restricted to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BandSpec {
    Raw,
    Bandpass { lo_hz: f64, hi_hz: f64 },
    Highpass { lo_hz: f64 },
}

impl BandSpec {
    /// Short label used in column names and file headers: `raw`, `bp1-5`, `hp0.01`.
    pub fn label(&self) -> String {
        match self {
            BandSpec::Raw => String::from("raw"),
            BandSpec::Bandpass { lo_hz, hi_hz } => format!("bp{}-{}", lo_hz, hi_hz),
            BandSpec::Highpass { lo_hz } => format!("hp{}", lo_hz),
        }
    }

    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        let nyq = sample_rate_hz / 2.0;
        match *self {
            BandSpec::Raw => Ok(()),
            BandSpec::Bandpass { lo_hz, hi_hz } => {
                if lo_hz > 0.0 && lo_hz < hi_hz && hi_hz < nyq {
                    Ok(())
                } else {
                    Err(Error::param(format!(
                        "band {} invalid for Nyquist {} Hz",
                        self.label(),
                        nyq
                    )))
                }
            }
            BandSpec::Highpass { lo_hz } => {
                if lo_hz > 0.0 && lo_hz < nyq {
                    Ok(())
                } else {
                    Err(Error::param(format!(
                        "band {} invalid for Nyquist {} Hz",
                        self.label(),
                        nyq
                    )))
                }
            }
        }
    }
}

impl fmt::Display for BandSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for BandSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::param(format!("unrecognised band `{s}` (expected raw, bp<lo>-<hi> or hp<lo>)"));
        let s = s.trim();
        if s == "raw" {
            return Ok(BandSpec::Raw);
        }
        if let Some(rest) = s.strip_prefix("bp") {
            let (lo, hi) = rest.split_once('-').ok_or_else(bad)?;
            let lo_hz = lo.parse::<f64>().map_err(|_| bad())?;
            let hi_hz = hi.parse::<f64>().map_err(|_| bad())?;
            return Ok(BandSpec::Bandpass { lo_hz, hi_hz });
        }
        if let Some(rest) = s.strip_prefix("hp") {
            let lo_hz = rest.parse::<f64>().map_err(|_| bad())?;
            return Ok(BandSpec::Highpass { lo_hz });
        }
        Err(bad())
    }
}

/// Uniformly sampled real-valued signal.
#[derive(Clone, Debug, PartialEq)]
pub struct SeismicTrace {
    samples: Vec<f64>,
    sample_rate_hz: f64,
    start_time: Timestamp,
    band: BandSpec,
}

impl SeismicTrace {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64, start_time: Timestamp, band: BandSpec) -> Result<Self> {
        if !(sample_rate_hz > 0.0) || !sample_rate_hz.is_finite() {
            return Err(Error::param(format!("sample rate must be positive, got {sample_rate_hz}")));
        }
        if samples.len() < 2 {
            return Err(Error::SampleSize {
                needed: 2,
                got: samples.len(),
            });
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite sample at index {i}")));
        }
        band.validate(sample_rate_hz)?;
        Ok(SeismicTrace {
            samples,
            sample_rate_hz,
            start_time,
            band,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn start_time(&self) -> Timestamp {
        self.start_time
    }

    pub fn band(&self) -> BandSpec {
        self.band
    }

    pub fn time_of(&self, i: usize) -> Timestamp {
        self.start_time.sample_time(i, self.sample_rate_hz)
    }

    /// One sample period past the last sample.
    pub fn end_time(&self) -> Timestamp {
        self.time_of(self.samples.len())
    }

    /// Sample index range covering `[from, to)`, clipped to the trace.
    pub fn index_range(&self, from: Timestamp, to: Timestamp) -> core::ops::Range<usize> {
        let n = self.samples.len() as i64;
        let a = self.start_time.index_at_or_after(from, self.sample_rate_hz).clamp(0, n);
        let b = self.start_time.index_at_or_after(to, self.sample_rate_hz).clamp(a, n);
        a as usize..b as usize
    }

    /// Same samples, shifted clock.
    pub fn with_start_time(mut self, start_time: Timestamp) -> Self {
        self.start_time = start_time;
        self
    }

    pub(crate) fn with_samples(&self, samples: Vec<f64>, band: BandSpec) -> Self {
        SeismicTrace {
            samples,
            sample_rate_hz: self.sample_rate_hz,
            start_time: self.start_time,
            band,
        }
    }
}

/// Second-order sections `[b0, b1, b2, 1, a1, a2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sos {
    sections: Vec<[f64; 6]>,
}

impl Sos {
    pub fn sections(&self) -> &[[f64; 6]] {
        &self.sections
    }

    /// Order of the full transfer function.
    pub fn order(&self) -> usize {
        2 * self.sections.len()
    }

    /// Complex frequency response at `f_hz`.
    pub fn response(&self, f_hz: f64, sample_rate_hz: f64) -> Complex64 {
        let w = 2.0 * PI * f_hz / sample_rate_hz;
        let (s, c) = crate::math::sin_cos(w);
        let z1 = Complex64::new(c, -s);
        let z2 = z1 * z1;
        self.sections.iter().fold(Complex64::new(1.0, 0.0), |acc, sec| {
            let num = z2 * sec[2] + z1 * sec[1] + sec[0];
            let den = z2 * sec[5] + z1 * sec[4] + sec[3];
            acc * num / den
        })
    }

    /// Steady-state section states for a unit step input (transposed direct form II).
    fn step_states(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let gain = (s[0] + s[1] + s[2]) / (1.0 + s[4] + s[5]);
                let z2 = (s[2] - s[5] * gain) * scale;
                let z1 = (gain - s[0]) * scale;
                scale *= gain;
                [z1, z2]
            })
            .collect()
    }

    fn run(&self, x: &mut [f64], init: &[[f64; 2]], x0: f64) {
        for (sec, zi) in self.sections.iter().zip(init) {
            let (b0, b1, b2, a1, a2) = (sec[0], sec[1], sec[2], sec[4], sec[5]);
            let mut z1 = zi[0] * x0;
            let mut z2 = zi[1] * x0;
            for v in x.iter_mut() {
                let xin = *v;
                let y = b0 * xin + z1;
                z1 = b1 * xin - a1 * y + z2;
                z2 = b2 * xin - a2 * y;
                *v = y;
            }
        }
    }

    /// Forward-backward filtering with odd reflection padding of `3 * order` samples.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let pad = (3 * self.order()).min(n.saturating_sub(1));
        let mut ext = Vec::with_capacity(n + 2 * pad);
        for i in (1..=pad).rev() {
            ext.push(2.0 * x[0] - x[i]);
        }
        ext.extend_from_slice(x);
        for i in 1..=pad {
            ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
        }
        let zi = self.step_states();
        let x0 = ext[0];
        self.run(&mut ext, &zi, x0);
        ext.reverse();
        let x0 = ext[0];
        self.run(&mut ext, &zi, x0);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

fn csqrt(z: Complex64) -> Complex64 {
    let r = hypot(z.re, z.im);
    let re = sqrt(((r + z.re) / 2.0).max(0.0));
    let im = sqrt(((r - z.re) / 2.0).max(0.0));
    Complex64::new(re, if z.im < 0.0 { -im } else { im })
}

// Left-half-plane poles of the normalised analog Butterworth prototype, upper half only.
fn prototype_upper_poles(order: usize) -> Vec<Complex64> {
    (0..order / 2)
        .map(|k| {
            let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
            let (s, c) = crate::math::sin_cos(theta);
            Complex64::new(c, s)
        })
        .collect()
}

fn bilinear(s: Complex64, fs2: f64) -> Complex64 {
    (Complex64::new(fs2, 0.0) + s) / (Complex64::new(fs2, 0.0) - s)
}

fn section_from_pole(z: Complex64, num: [f64; 3]) -> [f64; 6] {
    [num[0], num[1], num[2], 1.0, -2.0 * z.re, z.norm_sqr()]
}

fn normalise(mut sections: Vec<[f64; 6]>, f_ref: f64, sample_rate_hz: f64) -> Sos {
    let mag = {
        let sos = Sos {
            sections: sections.clone(),
        };
        { let r = sos.response(f_ref, sample_rate_hz); hypot(r.re, r.im) }
    };
    let per = crate::math::powf(1.0 / mag, 1.0 / sections.len() as f64);
    for s in &mut sections {
        s[0] *= per;
        s[1] *= per;
        s[2] *= per;
    }
    Sos { sections }
}

/// Digital Butterworth design by bilinear transform with prewarping.
///
/// `order` is the prototype order (even). A bandpass doubles it.
pub fn butterworth(band: BandSpec, order: usize, sample_rate_hz: f64) -> Result<Sos> {
    band.validate(sample_rate_hz)?;
    if order == 0 || !order.is_multiple_of(2) {
        return Err(Error::param("Butterworth order must be even and positive"));
    }
    let fs2 = 2.0 * sample_rate_hz;
    let warp = |f: f64| fs2 * tan(PI * f / sample_rate_hz);
    let proto = prototype_upper_poles(order);
    match band {
        BandSpec::Raw => Err(Error::param("raw band has no filter")),
        BandSpec::Highpass { lo_hz } => {
            let wc = warp(lo_hz);
            let sections = proto
                .iter()
                .map(|&p| section_from_pole(bilinear(Complex64::new(wc, 0.0) / p, fs2), [1.0, -2.0, 1.0]))
                .collect();
            Ok(normalise(sections, sample_rate_hz / 2.0, sample_rate_hz))
        }
        BandSpec::Bandpass { lo_hz, hi_hz } => {
            let (w1, w2) = (warp(lo_hz), warp(hi_hz));
            let bw = w2 - w1;
            let w0sq = w1 * w2;
            let mut sections = Vec::with_capacity(order);
            for &p in &proto {
                let pb = p * bw;
                let disc = csqrt(pb * pb - 4.0 * w0sq);
                for s in [(pb + disc) / 2.0, (pb - disc) / 2.0] {
                    // Each root and its conjugate (from the conjugate prototype pole) form one section.
                    let s = if s.im < 0.0 { s.conj() } else { s };
                    sections.push(section_from_pole(bilinear(s, fs2), [1.0, 0.0, -1.0]));
                }
            }
            let f0 = sample_rate_hz / PI * libm::atan(sqrt(w0sq) / fs2);
            Ok(normalise(sections, f0, sample_rate_hz))
        }
    }
}

/// Zero-phase 4th-order Butterworth filtering into `band`.
pub fn bandpass(trace: &SeismicTrace, band: BandSpec) -> Result<SeismicTrace> {
    if band == BandSpec::Raw {
        return Ok(trace.with_samples(trace.samples.clone(), band));
    }
    let sos = butterworth(band, 4, trace.sample_rate_hz)?;
    Ok(trace.with_samples(sos.filtfilt(&trace.samples), band))
}

/// Keep every `k`-th sample. For display only.
pub fn decimate(trace: &SeismicTrace, k: usize) -> Result<SeismicTrace> {
    if k == 0 {
        return Err(Error::param("decimation factor must be at least 1"));
    }
    let samples: Vec<f64> = trace.samples.iter().step_by(k).copied().collect();
    if samples.len() < 2 {
        return Err(Error::SampleSize {
            needed: 2,
            got: samples.len(),
        });
    }
    Ok(SeismicTrace {
        samples,
        sample_rate_hz: trace.sample_rate_hz / k as f64,
        start_time: trace.start_time,
        band: trace.band,
    })
}
