//! Selective magnetic face encodings built from Hadamard matrices.
//!
//! The library covers the full desk-scale pipeline: constructing and scoring
//! ±1 face encodings ([`encoding`], [`score`], [`rotation`]), searching a
//! matrix universe for maximal sets of mutually agnostic encodings
//! ([`search`]), mapping scores to physical forces ([`force`]), emitting and
//! verifying plotter toolpaths ([`plotter`]), and running stochastic
//! self-assembly experiments ([`sim`]).
//!
//! All scores on exact paths are rationals with denominator dividing N²
//! (or (N·upsample)² on the discretized rotation path); nothing is compared
//! through floating point.

pub mod encoding;
pub mod error;
pub mod force;
pub mod plotter;
pub mod rational;
pub mod rotation;
pub mod score;
pub mod search;
pub mod sim;

mod bits;
mod parallel;

pub use encoding::Encoding;
pub use error::{Error, ErrorKind, Result};
pub use rational::Rational;
