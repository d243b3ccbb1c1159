//! Steady-state scattering and photon statistics of driven two-level
//! emitters coupled to a single-mode waveguide.
//!
//! The model: N two-level emitters (quantum dots) sit in a waveguide that
//! weakly reflects at its end facets. A continuous-wave laser of photon
//! flux F drives the emitters through the guided mode; the transmitted
//! field is the interference of the directly transmitted laser with the
//! field re-scattered by the emitters. Everything observable here is a
//! stationary property of the emitter density matrix under a Lindblad
//! master equation, or a two-time correlator of it obtained through the
//! quantum regression theorem.
//!
//! Internal units are angular frequencies in rad/ns throughout; the
//! conversion from laboratory GHz (quoted as f = omega/2pi) happens in
//! exactly one place, [`units`]. Hilbert space dimension is 2^N with a
//! hard cap at N = 6; all matrices are dense.

pub mod dynamics;
pub mod emission;
pub mod fitting;
pub mod operators;
pub mod scattering;
pub mod units;
pub mod waveguide;

mod linalg;

pub use operators::{EmitterParams, Liouvillian, Op};
