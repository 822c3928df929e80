//! Slow-fast E/I conductance oscillator whose coefficients wander at random.
//!
//! The crate is organised by concern:
//!
//! * [`model`]: vector field, fixed points, Hopf curve, singular orbit;
//! * [`integrator`]: fixed-step RK4 and the measurements built on it;
//! * [`walk`]: the coefficient random walk and stochastic runs;
//! * [`spectral`]: windowed Fourier spectra;
//! * [`canard`]: local analysis near the fold;
//! * [`io`]: CSV tables.

pub mod canard;
pub mod events;
pub mod integrator;
pub mod io;
pub mod model;
pub mod rng;
pub mod spectral;
pub mod walk;

pub use integrator::{integrate, IntegrationConfig, IntegrationError, Trajectory};
pub use model::{ModelError, ModelParams, State};
pub use walk::{simulate_stochastic, WalkConfig, WalkError};
