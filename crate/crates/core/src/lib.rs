//! Simulation and numerics for iterated perturbed random walks.
//!
//! A perturbed random walk is `T_k = S_{k-1} + eta_k` where `S` is the random
//! walk of the steps `xi_k` and `(xi_k, eta_k)` are i.i.d. pairs with an
//! arbitrary joint law. Using `T` as the reproduction point process of a
//! Crump-Mode-Jagers branching process gives generation counts `Y_j(t)`.
//!
//! * [`distributions`]: joint step laws, samplers and CDFs.
//! * [`prw`] and [`branching`]: trajectories and generation counts.
//! * [`renewal`]: `U`, `V` and `V_j` on a uniform grid.
//! * [`lil`]: normalizers and Monte Carlo experiments.
//! * [`config`], [`cli`], [`acceptance`]: reproducible runs.

pub mod acceptance;
pub mod branching;
pub mod cli;
pub mod config;
pub mod csvio;
pub mod distributions;
pub mod error;
pub mod grid;
pub mod lil;
pub mod prw;
pub mod renewal;
pub mod rng;
pub mod stats;
pub mod syntax;

pub use distributions::JointStepLaw;
pub use error::{Error, Result};
