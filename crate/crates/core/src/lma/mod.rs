//! Linearized Monge-Ampere operators `L_phi u = Phi^{ij} u_ij`.

mod green;
mod operator;
mod rescale;

pub use green::{green_function, green_functions, green_lq_bound, green_tail_statistics, GreenField};
pub use operator::{
    closure_data, directional_weights, nondivergence_apply, nondivergence_system, solve_dirichlet, CrossScheme,
    DirichletProblem, LinearizedOperator,
};
pub use rescale::{rescale_problem, RescaleSpec, RescaledProblem, Source, MIN_SECTION_NODES};
