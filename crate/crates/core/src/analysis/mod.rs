//! Energy functions, passivity balances, equilibria, regions of attraction,
//! ultimate bounds and settling times.

mod bound;
mod energy;
mod equilibrium;
mod linear;
mod passivity;
mod roa;
mod settling;

pub use bound::{bound_objective, epsilon_window, sym2_eigen, ultimate_bound, BoundVariant, UltimateBound};
pub use energy::{energy_eval, EnergyKind, EnergyParams, EnergyPoint};
pub use equilibrium::{classify_equilibrium, EquilibriumClass, EquilibriumReport};
pub use linear::atan_linear_solution;
pub use passivity::{is_non_increasing, max_energy_increase, passivity_residual};
pub use roa::{
    default_validation_integrator, roa_inner_estimate, roa_sample, roa_validate, roa_validate_points,
    roa_validate_with, RoaEstimate, RoaKind, RoaValidation,
};
pub use settling::{settling_time, settling_time_of, Channel};
