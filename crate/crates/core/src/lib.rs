//! Dynamic extreme value forecasting of threshold exceedances.
//!
//! The crate turns uniformly sampled signal traces into horizon-ahead
//! probabilistic forecasts of an envelope index exceeding a high threshold,
//! and of the size of the excess:
//!
//! ```text
//! P(Y_t > u + z | F_{t-1}) = phi_t * S_GPD(z; xi, nu_t)
//! phi_t = logistic(psi_0 + sum psi_i x_{t-1,i})
//! nu_t  = exp(kappa_0 + sum kappa_i x_{t-1,i})
//! ```
//!
//! Pipeline stages map onto modules:
//!
//! - [`trace`]: trace container, zero-phase Butterworth band filtering, decimation.
//! - [`envelope`]: exact-length DFT, analytic signal, envelope and decibel index.
//! - [`features`]: rolling-window covariates in temporal, frequency and cepstral domains.
//! - [`preprocess`]: Box-Cox selection, standardisation, collinearity pruning.
//! - [`evt`]: constant GPD fits, bootstrap AD/CvM tests, threshold selection.
//! - [`regress`]: logistic and fixed-shape GPD/exponential regression, stepwise AIC.
//! - [`forecast`]: dataset alignment, training, live forecasting, return levels.
//! - [`eval`]: AUC, deviance test, residual ACFs, QQ data, threshold sweeps.
//! - [`synth`]: seeded synthetic monitoring scenarios.
//!
//! The crate is `no_std` and needs only `alloc`. All transcendental functions go
//! through `libm`, so results do not depend on the platform math library.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod error;
mod linalg;
mod math;
mod optim;
mod special;

pub mod envelope;
pub mod eval;
pub mod evt;
pub mod features;
pub mod forecast;
pub mod preprocess;
pub mod regress;
pub mod rng;
pub mod synth;
pub mod time;
pub mod trace;

pub use error::{Error, Result};
pub use time::Timestamp;
