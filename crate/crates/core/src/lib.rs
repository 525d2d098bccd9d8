//! Exact lattice-point correlations, Kac–Rice expansions and nodal-volume
//! simulation for arithmetic random waves on the flat torus `T^d`.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`] enumerates the frequency set `E_m = {μ ∈ Z^d : |μ|² = m}`.
//! * [`correlations`] counts zero-sum tuples of frequencies (`C(4)`, `C(6)`)
//!   through representation-function convolution.
//! * [`moments`] computes the inner-product moments `B_k` exactly.
//! * [`spectral`] evaluates the covariance function and its derivatives and
//!   turns every torus integral of the variance expansion into an exact
//!   correlation sum.
//! * [`kacrice`] holds the Gaussian norm-product expansion, the block
//!   determinant and the pointwise two-point intensity `K2`.
//! * [`simulate`] samples random waves and estimates nodal volume by
//!   counting zeros along random line transects.
//! * [`predict`] collects the closed-form predictions and bound ladder.

pub mod correlations;
pub mod error;
pub mod kacrice;
pub mod lattice;
pub mod moments;
pub mod predict;
pub mod quad;
pub mod rational;
pub mod rng;
pub mod simulate;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use lattice::{enumerate_frequencies, EnumerationMode, FrequencySet};
pub use rational::Rational;
