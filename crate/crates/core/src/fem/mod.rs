//! Fine-grid Q1 vector elasticity: assembly, local Dirichlet problems,
//! the conforming and interior-penalty reference solvers, and error norms.

mod assembly;
mod dg;
pub mod element;
mod local;
mod norms;

pub use assembly::{
    assemble_domain, assemble_region, assemble_stiffness, broken_load, conforming_to_broken, domain_load, load_vector,
    solve_fine_cg, solve_with_operator, weighted_mass, FineOperator, SolveMethod, SolverOptions,
};
pub use dg::{
    block_offset, boundary_flux, boundary_mass, boundary_positions, edge_average_jump, edge_segment_pmod,
    segment_pmod_average, solve_fine_dg, BlockFlux, BoundaryFlux, DgOperator, DgOptions, EdgeTrace, FluxMass, PenaltyLength,
};
pub use local::LocalDirichlet;
pub use norms::{analytic_errors, energy, error_norms, for_each_cell, NormMode};
