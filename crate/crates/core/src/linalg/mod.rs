//! Numerical kernel: sparse symmetric storage with a Jacobi-preconditioned CG,
//! banded Cholesky for local Dirichlet problems, sparse Cholesky for global ones, and dense symmetric pencils.

mod banded;
mod dense;
mod direct;
mod sparse;

pub use banded::BandedCholesky;
pub use dense::{
    eig_gen_sym, solve_psd_pivoted, triple_product, triple_product_dense, DenseSym, GenEigen, PivotedSolve,
};
pub use direct::SparseCholesky;
pub use sparse::{dot, norm2, pcg, solve_spd, PcgOutcome, SparseSym, TripletBuilder};
