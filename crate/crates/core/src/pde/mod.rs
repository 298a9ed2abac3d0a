//! Monotone IMEX finite-volume solver for `u_t = Δu + f(u)`.

pub mod grid;
pub mod initial;
pub mod step;
pub mod trajectory;

pub use grid::{make_grid_full_tree, make_grid_half_line, BoundaryCondition, Grid, GridMode};
pub use initial::InitialData;
pub use step::{step_imex, Stepper, RANGE_TOL};
pub use trajectory::{
    evaluate_along_ray, interpolate, solve, symmetrize, Field, RayTrace, SolveParams, SolverStats,
    Trajectory,
};
