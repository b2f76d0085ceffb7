//! Exact toolkit for the Stackelberg shortest-path pricing game.
//!
//! A leader prices the pricable edges of a DAG; a single client then buys a
//! cheapest source-sink path, breaking ties in the leader's favor; the
//! leader's payoff is the sum of prices along the bought path's pricable
//! edges. This crate models instances exactly (arbitrary-precision
//! rationals), computes best responses and exact optimal pricings at desk
//! scale, generates hardness-style instances from CNF formulas via a
//! two-prover constraint system, orders constraints into far sequences, and
//! verifies the path-decomposition bounds that drive the gap analysis.

pub mod buyer;
pub mod csp;
pub mod decomposition;
pub mod farseq;
pub mod instance;
pub mod reduction;
pub mod rng;
pub mod scalar;
pub mod solvers;

pub use instance::{PathWitness, PriceAssignment, PricingInstance};
pub use scalar::{Price, Rat};
