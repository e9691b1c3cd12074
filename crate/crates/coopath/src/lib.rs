//! File formats, run exports and the command-line front end around
//! `coopath-core`.
// `!(x > 0.0)` style checks reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dem;
pub mod export;
pub mod runner;
pub mod scenario;
