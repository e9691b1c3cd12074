//! Simulation core for cooperative fixed-wing path following with local
//! replanning and time-index consensus.
//!
//! `no_std` with `alloc`; file formats, IO and the CLI live in the `coopath`
//! crate.
#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` style checks reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod coordination;
pub mod dynamics;
pub mod fleet;
pub mod geo;
pub mod guidance;
pub mod metrics;
pub mod network;
pub mod replanner;
pub mod rng;
pub mod sim;
