//! File formats, model persistence and the `evtcast` command-line tool.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod io;
pub mod model;

pub use model::SCHEMA_VERSION;
