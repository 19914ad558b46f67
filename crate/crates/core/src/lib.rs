//! `extlab`: self-adjoint extensions of the Dirac-type operator `(1/i)d/dθ` on a
//! partitioned interval, their spectra, index pairings with unitary loops, and the
//! integer Chern-character calculus for circles and surfaces.

pub mod analysis;
pub mod error;
pub mod ksum;
pub mod linalg;
pub mod pairing;
pub mod spectral;
pub mod vonneumann;

pub use analysis::{
    boundary_values, inner_product, ExponentialAtom, Partition, PiecewiseFunction, C64,
    DEFAULT_TOL,
};
pub use error::{Error, Result};
