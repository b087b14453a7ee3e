//! Solution landscapes of semilinear elliptic problems `-Δu = λ f(u)` with
//! zero Dirichlet data on intervals and rectangles.
//!
//! Minimal solutions come from monotone iteration between barriers or from
//! continuation in `λ`; folds are located through the smallest eigenvalue of
//! the linearization, and unstable solutions through pseudo-arclength
//! continuation or a mountain-pass path search.

pub mod barriers;
pub mod branch;
pub mod cli;
pub mod error;
pub mod grid;
pub mod linops;
pub mod minimax;
pub mod problems;

pub use barriers::{
    default_barriers, monotone_iterate, stability_classify, verify_barrier, BarrierPair, Direction, MonotoneOptions,
    MonotoneTrace, Side, StabilityTag,
};
pub use branch::{
    estimate_lambda_star, newton_solve, pseudo_arclength_continue, trace_minimal_branch, BranchConfig, BranchPoint,
    Diagram, NewtonOptions, Termination,
};
pub use error::{Error, Result};
pub use grid::{build_grid, integrate, norm_h1, norm_inf, norm_l2, write_csv, Dim, Field, Grid, GridId, Point};
pub use linops::{assemble, dirichlet_lambda1, smallest_eigenpair, solve, EigenPair, ShiftedLaplacian};
pub use minimax::{ekeland_point, energy, grad, mountain_pass, second_solution, MinimaxResult, MountainPassOptions};
pub use problems::{
    bratu_oracle, catalog, catalog_entries, shooting_oracle, Coupling, Meta, Nonlinearity, Params, ProblemSpec,
};
