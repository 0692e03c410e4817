//! Feasible output regions of a current-limited grid-connected inverter.
//!
//! The crate is `no_std` (with `alloc`) and contains only the numerical
//! core: the steady-state output maps of an RL-coupled voltage-source
//! inverter, the geometry of the reachable `(S1, S2)` output sets, setpoint
//! optimization over those sets, and a fixed-step simulator for the
//! controllers that track the resulting setpoints. File formats and the
//! command-line front end live in the `invfeas` crate.

#![cfg_attr(not(test), no_std)]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod error;
pub mod linalg;
mod math;
pub mod model;
pub mod optimizer;
pub mod region;
pub mod simulator;

pub use error::Error;
pub use model::{
    DqVector, InverterParams, LemmaForm, OutputPair, OutputQuantity, OutputTriple,
    QuadraticOutputMap,
};

pub type Result<T> = core::result::Result<T, Error>;
