//! Throughput modeling of pipelined superscalar CPUs through conjunctive
//! resource mappings.
//!
//! The crate works with two dual views of a machine:
//!
//! * a *disjunctive* port mapping, where each instruction may execute on any
//!   port of a compatibility set (the ground truth of the simulated CPU in
//!   [`oracle`]), and
//! * a *conjunctive* resource mapping, where each instruction must load every
//!   abstract resource it is connected to by a fixed amount ([`model`]).
//!
//! [`dualize`] converts the first into the second. [`selection`], [`lp`] and
//! [`pipeline`] infer a conjunctive mapping from throughput measurements
//! alone, and [`eval`] scores the result on instruction mixes.
//!
//! All arithmetic on mappings, kernels and solver state is exact rational
//! arithmetic; floating point only appears when injecting measurement noise
//! and when emitting reports.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod dualize;
pub mod eval;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod ratio;
pub mod selection;

pub use ratio::Rat;
