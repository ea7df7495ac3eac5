//! Mean field and feedback-modified linear response of a single cavity mode.

mod feedback;
mod params;
mod reservoir;
mod steady_state;

pub use feedback::{chi_c0, sigma_d, LinearizedCavity, LOOP_TOLERANCE};
pub use params::{total_kappa, CavityParams, ThermalPole, ThermalResponseModel};
pub use reservoir::{reservoir_correlators, ReservoirCorrelators};
pub use steady_state::{steady_state, Branch, MeanField, ROOT_TOLERANCE};
