//! Discrete-time simulator and exact analytics for the age of information of a
//! base station serving a Poisson field of nodes.
//!
//! The model: nodes form a homogeneous Poisson process inside a disk around the
//! base station, interferers form an independent Poisson field around it, and
//! time is slotted. Every transmitter is gated by an independent per-slot ALOHA
//! coin, links fade independently per slot (Rayleigh, so received power is
//! exponential), and a packet is decoded iff its SIR clears a threshold. Two
//! directions are covered:
//!
//! * broadcast: the base transmits, every node listens; the age of broadcast
//!   (AoB) is the staleness of the worst-informed node,
//! * collection: nodes transmit, the base listens; the age of collection (AoC)
//!   is the staleness of the node the base has heard from least recently.
//!
//! [`geometry`] samples spatial realizations, [`channel`] holds the slot-level
//! dynamics and the closed-form success probabilities, [`age`] the age
//! recursions and delay measurement, [`sim`] the seeded Monte Carlo estimators,
//! and [`analytics`] the exact expected-age formulas and upper bounds that the
//! simulator is validated against.
//!
//! All numeric code is generic over the scalar type via [`Real`]; `f64` aliases
//! for the common types are exported at the crate root.

pub mod age;
pub mod analytics;
pub mod channel;
mod error;
pub mod geometry;
mod numeric;
mod real;
pub mod sim;

pub use error::Error;
pub use real::Real;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;

// Concrete f64 aliases for the types that make up the public surface.
pub type Point64 = geometry::Point<f64>;
pub type Realization64 = geometry::Realization<f64>;
pub type NetworkParams64 = channel::NetworkParams<f64>;
pub type SimConfig64 = sim::SimConfig<f64>;
pub type SimResult64 = sim::SimResult<f64>;
