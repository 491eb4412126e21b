//! Distributed transmit antenna selection for distributed massive MIMO.
//!
//! Antennas are places of a token-conserving Petri net laid out on a
//! toroid. Each token marks a switched-on antenna; tokens hop between
//! adjacent places whenever the move raises the sum capacity of the
//! neighbourhood governing that edge, until no move helps.
//!
//! The crate contains:
//!
//! - [`numerics`]: log-det sum capacity, zero-forcing gains, water-filling.
//! - [`channel`]: a single-bounce geometric channel generator, normalisation,
//!   CSI error injection and subcarrier subsampling, plus a text format.
//! - [`topology`]: the toroid place graph and per-edge neighbourhoods.
//! - [`rpn`]: the marking, enabling rule, asynchronous scheduler and racing.
//! - [`baselines`]: greedy, random, exhaustive and nearest-neighbour selection.
//! - [`metrics`]: the analytic flop cost model and scaling fits.
//! - [`harness`]: seeded experiment sweeps and the command line front end.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod channel;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod numerics;
pub mod objective;
pub mod rpn;
pub mod topology;

pub use error::{Error, Result};
