//! Finite-population dynamics: the exact birth-death process, its Ito
//! diffusion limit, and the drift of the potential-current decomposition.

mod decomposition;
mod rng;
mod sde;
mod ssa;

pub use decomposition::{JACOBIAN_STEP, decomposition_drift, fixed_point_eigenvalues, jacobian_eigenvalues_at, locate_fixed_point, predicted_eigenvalues};
pub use rng::{path_rng, PathRng};
pub use sde::{MAX_HALVINGS, MAX_REDRAWS, sde_ensemble, sde_simulate, sde_simulate_with, SdeConfig, SdePath};
pub use ssa::{
    master_stationarity_residual, ssa_ensemble_at, DEFAULT_MAX_EVENTS, ssa_rates, ssa_simulate, ssa_simulate_with, ssa_states_at,
    DiscreteState, JumpEvent, JumpPath, SsaRates, Termination,
};
