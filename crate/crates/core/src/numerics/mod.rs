//! Dense numerical kernels: a symmetric eigensolver and an LP solver.

pub mod eigen;
pub mod lp;
pub mod mps;

pub use eigen::{jacobi_eigen, min_eigenvalue, EigenDecomp, JACOBI_TOL};
pub use lp::{
    lp_solve, DenseSimplex, LpProblem, LpRow, LpSession, LpSolution, LpSolver, LpStatus, Relation,
    SimplexOptions,
};
pub use mps::{to_mps, write_mps};
