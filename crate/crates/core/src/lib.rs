//! Cutting planes for box-constrained nonconvex QCQPs.
//!
//! The crate is organised bottom-up:
//!
//! * [`exactnum`]: exact rationals and single square-root radicals `r·√d`.
//! * [`ineq`]: lifted points, linear inequalities over `(x, X)`, McCormick and
//!   triangle generators, brute-force validity oracles and cone domination.
//! * [`eigencg`]: eigen-cuts, their Chvátal–Gomory rounding (E-CG),
//!   Boros–Hammer (BH) inequalities, family classification and the two-BH
//!   decomposition of `F2` members.
//! * [`atlas`]: exact facet enumeration of the Boolean quadric polytope for
//!   small `n` and lookup-table separation over index subsets.
//! * [`certify`]: automated certificates that a facet is not an E-CG inequality.
//! * [`separate`]: the bounded integer BH separator and the sampling loop.
//! * [`numerics`]: Jacobi eigensolver and a dense dual simplex LP solver.
//! * [`relax`]: lifted LP relaxations, the eigen-cut outer approximation of the
//!   PSD constraint, and the cutting-plane pipelines.
//! * [`io`]: BiqMac instance ingestion and report emission.

pub mod atlas;
pub mod certify;
pub mod eigencg;
pub mod error;
pub mod exactnum;
pub mod ineq;
pub mod io;
pub mod numerics;
pub mod relax;
pub mod separate;

pub use error::{Error, Result};
pub use exactnum::{Radical, Rational};
pub use ineq::{LiftedPoint, LinearIneq, QcqpInstance};
