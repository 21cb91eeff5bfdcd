pub mod error;
pub mod model;
pub mod ode;
pub mod orbit;
pub mod stats;
pub mod eos;
pub mod exec;
pub mod stochastic;
pub mod hdiff;
pub mod entropy;
pub mod io;
pub mod checks;

pub use error::{LvError, Result};
pub use model::{ModelParams, PhaseState};
