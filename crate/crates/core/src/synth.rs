//! Seeded synthetic monitoring scenarios with phase labels.
//!
//! A scenario is white Gaussian noise whose level follows the phases of an
//! eruptive sequence:
//!
//! - quiet: noise with standard deviation `10^(background_db / 20)`;
//! - crisis: the noise level ramps up by `link_strength * crisis_gain_db`
//!   between `crisis_start` and `eruption_onset`;
//! - swarm: decaying wave packets at `burst_hz` arrive as a Poisson process
//!   whose rate grows linearly to `burst_rate_hz` by `swarm_end`, each with
//!   peak level `background_db + link_strength * swarm_gain_db`;
//! - eruption: from `eruption_onset`, an amplitude-modulated tremor at
//!   `tremor_hz` whose level in decibels is `background_db + eruption_gain_db`
//!   plus a GPD(`tail_xi`, `tail_sigma`) excess drawn at knots every
//!   `knot_interval`, linear in decibels between knots.
//!
//! All randomness comes from [`crate::rng`] seeded with `seed`, so a spec
//! always produces the same samples.

use alloc::format;
use alloc::vec::Vec;
use core::time::Duration;

use rand::Rng as _;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::evt::sample_gpd;
use crate::forecast::secs;
use crate::math::{ceil, exp, floor, powf, sin};
use crate::trace::{bandpass, BandSpec, SeismicTrace};
use crate::{rng, Error, Result, Timestamp};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Quiet,
    Crisis,
    Swarm,
    Eruption,
}

impl Phase {
    pub const ALL: &'static [Phase] = &[Phase::Quiet, Phase::Crisis, Phase::Swarm, Phase::Eruption];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Quiet => "quiet",
            Phase::Crisis => "crisis",
            Phase::Swarm => "swarm",
            Phase::Eruption => "eruption",
        }
    }
}

impl core::fmt::Display for Phase {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for Phase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "quiet" => Ok(Phase::Quiet),
            "crisis" => Ok(Phase::Crisis),
            "swarm" => Ok(Phase::Swarm),
            "eruption" => Ok(Phase::Eruption),
            other => Err(Error::Data(format!("unknown phase `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    pub start_time: Timestamp,
    #[serde(with = "secs")]
    pub duration: Duration,
    pub sample_rate_hz: f64,
    pub background_db: f64,
    pub crisis_start: Timestamp,
    pub swarm_start: Timestamp,
    pub swarm_end: Timestamp,
    pub eruption_onset: Timestamp,
    /// Scales the crisis ramp and swarm bursts; zero removes all precursors.
    pub link_strength: f64,
    pub crisis_gain_db: f64,
    pub swarm_gain_db: f64,
    pub burst_hz: f64,
    pub burst_rate_hz: f64,
    #[serde(with = "secs")]
    pub burst_decay: Duration,
    /// Tremor level above background; zero disables the tremor.
    pub eruption_gain_db: f64,
    pub tremor_hz: f64,
    pub tail_xi: f64,
    pub tail_sigma: f64,
    #[serde(with = "secs")]
    pub knot_interval: Duration,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        let start = Timestamp::EPOCH;
        let min = |m: u64| start + Duration::from_secs(60 * m);
        ScenarioSpec {
            start_time: start,
            duration: Duration::from_secs(90 * 60),
            sample_rate_hz: 20.0,
            background_db: 40.0,
            crisis_start: min(30),
            swarm_start: min(45),
            swarm_end: min(60),
            eruption_onset: min(60),
            link_strength: 1.0,
            crisis_gain_db: 6.0,
            swarm_gain_db: 18.0,
            burst_hz: 3.0,
            burst_rate_hz: 0.3,
            burst_decay: Duration::from_millis(800),
            eruption_gain_db: 30.0,
            tremor_hz: 2.5,
            tail_xi: -0.1,
            tail_sigma: 4.0,
            knot_interval: Duration::from_secs(1),
            seed: 0,
        }
    }
}

impl ScenarioSpec {
    /// Background noise only: no precursors and no tremor.
    pub fn quiet(seed: u64) -> Self {
        ScenarioSpec {
            link_strength: 0.0,
            eruption_gain_db: 0.0,
            seed,
            ..Self::default()
        }
    }

    pub fn end_time(&self) -> Timestamp {
        self.start_time + self.duration
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("scenario: {m}")));
        if !(self.sample_rate_hz > 0.0) || self.duration.is_zero() {
            return bad("sample rate and duration must be positive");
        }
        if !(self.crisis_start <= self.swarm_start
            && self.swarm_start < self.swarm_end
            && self.swarm_end <= self.eruption_onset)
        {
            return bad("phases must satisfy crisis_start <= swarm_start < swarm_end <= eruption_onset");
        }
        if self.crisis_start < self.start_time {
            return bad("crisis starts before the scenario");
        }
        if !(self.link_strength >= 0.0) || !(self.eruption_gain_db >= 0.0) {
            return bad("link strength and eruption gain must be non-negative");
        }
        let nyq = self.sample_rate_hz / 2.0;
        if !(self.burst_hz > 0.0 && self.burst_hz < nyq && self.tremor_hz > 0.0 && self.tremor_hz < nyq) {
            return bad("burst and tremor frequencies must lie below Nyquist");
        }
        if !(self.tail_sigma > 0.0) || !(self.tail_xi > -1.0) || self.knot_interval.is_zero() {
            return bad("tail needs sigma > 0, xi > -1 and a positive knot interval");
        }
        if !(self.burst_rate_hz >= 0.0) || self.burst_decay.is_zero() {
            return bad("burst rate must be non-negative and decay positive");
        }
        Ok(())
    }

    pub fn phase_at(&self, t: Timestamp) -> Phase {
        if t >= self.eruption_onset && self.eruption_gain_db > 0.0 {
            Phase::Eruption
        } else if self.link_strength > 0.0 && t >= self.swarm_start && t < self.swarm_end {
            Phase::Swarm
        } else if self.link_strength > 0.0 && t >= self.crisis_start && t < self.eruption_onset {
            Phase::Crisis
        } else {
            Phase::Quiet
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub raw: SeismicTrace,
    pub phases: Vec<Phase>,
    /// Tremor level excesses over `background_db + eruption_gain_db` at each knot.
    pub knot_excesses: Vec<f64>,
}

impl Scenario {
    pub fn bands(&self, bands: &[BandSpec]) -> Result<Vec<SeismicTrace>> {
        bands.iter().map(|&b| bandpass(&self.raw, b)).collect()
    }
}

fn db_to_amp(db: f64) -> f64 {
    powf(10.0, db / 20.0)
}

/// Generate the raw trace and per-sample phase labels of a scenario.
pub fn generate(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let rate = spec.sample_rate_hz;
    let n = floor(spec.duration.as_secs_f64() * rate) as usize;
    if n < 2 {
        return Err(Error::Config("scenario is shorter than two samples".into()));
    }
    let secs_of = |t: Timestamp| t.secs_since(spec.start_time);
    let (crisis, swarm0, swarm1, onset) = (
        secs_of(spec.crisis_start),
        secs_of(spec.swarm_start),
        secs_of(spec.swarm_end),
        secs_of(spec.eruption_onset),
    );
    let dt = 1.0 / rate;
    let two_pi = 2.0 * core::f64::consts::PI;

    let mut noise_rng = rng::stream(spec.seed, 0);
    let base = db_to_amp(spec.background_db);
    let mut samples: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 * dt;
            let ramp = if t >= crisis {
                ((t - crisis) / (onset - crisis).max(dt)).min(1.0)
            } else {
                0.0
            };
            let g: f64 = StandardNormal.sample(&mut noise_rng);
            base * db_to_amp(spec.link_strength * spec.crisis_gain_db * ramp) * g
        })
        .collect();

    if spec.link_strength > 0.0 && spec.burst_rate_hz > 0.0 {
        let mut burst_rng = rng::stream(spec.seed, 1);
        let amp = db_to_amp(spec.background_db + spec.link_strength * spec.swarm_gain_db);
        let decay = spec.burst_decay.as_secs_f64();
        let len = (decay * 8.0 * rate) as usize;
        let span = swarm1 - swarm0;
        let mut t = swarm0;
        loop {
            let e: f64 = Exp1.sample(&mut burst_rng);
            t += e / spec.burst_rate_hz;
            if t >= swarm1 {
                break;
            }
            if burst_rng.random::<f64>() > (t - swarm0) / span {
                continue;
            }
            let phase0: f64 = burst_rng.random::<f64>() * two_pi;
            let i0 = (t * rate) as usize;
            for k in 0..len.min(n.saturating_sub(i0)) {
                let s = k as f64 * dt;
                samples[i0 + k] += amp * exp(-s / decay) * sin(two_pi * spec.burst_hz * s + phase0);
            }
        }
    }

    let mut knot_excesses = Vec::new();
    if spec.eruption_gain_db > 0.0 && onset < n as f64 * dt {
        let mut tail_rng = rng::stream(spec.seed, 2);
        let knot = spec.knot_interval.as_secs_f64();
        let n_knots = floor((n as f64 * dt - onset) / knot) as usize + 2;
        knot_excesses = sample_gpd(&mut tail_rng, spec.tail_xi, spec.tail_sigma, n_knots);
        let level = spec.background_db + spec.eruption_gain_db;
        let i_on = ceil(onset * rate - 1e-9).max(0.0) as usize;
        for (i, s) in samples.iter_mut().enumerate().skip(i_on) {
            let t = i as f64 * dt;
            let pos = (t - onset) / knot;
            let k = floor(pos) as usize;
            let frac = pos - k as f64;
            let db = level + knot_excesses[k] * (1.0 - frac) + knot_excesses[k + 1] * frac;
            *s += db_to_amp(db) * sin(two_pi * spec.tremor_hz * (t - onset));
        }
    }

    let raw = SeismicTrace::new(samples, rate, spec.start_time, BandSpec::Raw)?;
    let phases = (0..n).map(|i| spec.phase_at(raw.time_of(i))).collect();
    Ok(Scenario {
        raw,
        phases,
        knot_excesses,
    })
}
