//! Spectral curves of periodic Dirac operators `∂̄ + [[0, -q̄], [q, 0]]` on a flat torus.
//!
//! The spectral parameter `(a, b) ∈ ℂ²` enters through `∂̄_{a,b} = ∂̄ + diag(b, a)` acting on
//! sections with Floquet multipliers. A point lies on the spectrum when the truncated
//! Fourier matrix of the operator has a kernel. The crate locates those points, follows
//! the curve through regions of interest, classifies double points of the vacuum and
//! extracts the Willmore energy from the asymptotics of the ends.
//!
//! Everything is generic over [`Real`] (`f32` or `f64`); the aliases at the crate root fix
//! `f64`, which is what the tolerances are tuned for.

pub mod energy;
mod error;
pub mod fourier;
pub mod kernel;
pub mod lattice;
pub mod linalg;
mod scalar;
pub mod tracer;

pub use error::{Error, Result};
pub use fourier::{Dirac, Potential, SectionCoeffs, Species};
pub use lattice::{dual_lattice, enumerate_dual, Coord, DualLattice, Symmetry, TorusLattice};
pub use scalar::{Real, C};

/// Helpers for working with complex numbers over a generic [`Real`].
pub mod complex {
    pub use crate::scalar::{
        abs, abs2, arg, arg_positive, c, cast, cexp, cln, csqrt, from_real, i_unit,
    };
}

pub type Complex64 = C<f64>;
pub type Lattice64 = TorusLattice<f64>;
pub type Dual64 = DualLattice<f64>;
pub type Potential64 = Potential<f64>;
pub type Dirac64 = Dirac<f64>;
pub type Section64 = SectionCoeffs<f64>;

pub type Lattice32 = TorusLattice<f32>;
pub type Potential32 = Potential<f32>;
pub type Dirac32 = Dirac<f32>;
