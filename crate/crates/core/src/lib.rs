//! Computable pieces of the coarea formula for maps `H_n → R^{2n}`.
//!
//! * [`heis`]: the Heisenberg group, Korányi metric, vertical cones.
//! * [`curve`]: signed and symplectic areas of rough curves, dyadic
//!   approximations, the square sum `σ`, winding numbers.
//! * [`pathological`]: a ½-Hölder curve whose dyadic areas vanish while
//!   other partitions see area 1.
//! * [`vertical`]: vertical curves, dyadic patchworks, the fiber area formula.
//! * [`fields`]: test maps with horizontal derivatives, β-numbers, nets,
//!   fiber tracing.
//! * [`coarea`]: numerical comparison of both sides of the coarea formula.

pub mod coarea;
pub mod curve;
pub mod dyadic;
pub mod error;
pub mod fields;
pub mod heis;
pub mod io;
pub mod numeric;
pub mod pathological;
pub mod vertical;

pub use dyadic::Dyadic;
pub use error::{Error, ErrorKind, Result};
pub use heis::{in_vcone, omega, precedes, ConeSign, HeisPoint, VConeSpec};
