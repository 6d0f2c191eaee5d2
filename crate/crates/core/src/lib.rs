//! Two-monomer microtubule growth: simulation, exact finite-strip velocity,
//! phase boundaries, lifetime transforms and coupling checks.

pub mod bd;
pub mod config;
pub mod coupling;
pub mod io;
pub mod laplace;
pub mod model;
pub mod phase;
pub mod projected;
pub mod rng;
pub mod sim;
pub mod stats;

pub use model::{Event, Head, Monomer, MtState, ProjectedState, Rates};
pub use rng::RngSeed;
