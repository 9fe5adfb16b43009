//! Certificates and tooling for input/output-to-state stability of switched
//! nonlinear systems whose switching is restricted by an admissible
//! transition graph and per-subsystem dwell windows.
//!
//! - [`model`]: the switched-system description, switching signals and the
//!   interval counting functions `N`, `N_p`, `N_pq`, `T_p`.
//! - [`certificate`]: the frequency-budget inequality, budget search and the
//!   closed-form sufficient conditions.
//! - [`signals`]: admissibility and class-membership checks, a seeded
//!   generator and a brute-force enumerator.
//! - [`bounds`]: the decay/gain functions along a signal, their uniform
//!   bounds, and envelope dominance checks.
//! - [`sim`]: fixed-step RK4 simulation, quadratic Lyapunov-like functions
//!   and the sampled dissipation audit.
//! - [`config`]: the JSON project format and bundled example configurations.
//! - [`experiment`]: seeded, parallel batches of generated signals and
//!   simulated trajectories.

pub mod bounds;
pub mod certificate;
pub mod config;
pub mod error;
pub mod experiment;
pub mod model;
pub mod signals;
pub mod sim;

pub use error::{Error, Result};
