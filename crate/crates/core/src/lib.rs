//! Inverse-problem toolkit for cellulose degradation kinetics in power
//! transformers.
//!
//! Insulation paper ages by chain scission; its degree of polymerization (DP)
//! falls from ~1100 when new to ~200 at end-of-life. This crate recovers the
//! governing kinetics from DP time series:
//!
//! - [`kinetics`] — the degradation models (second-order scission with an
//!   Arrhenius rate, and the variant where the rate itself decays), their
//!   exact closed-form solutions, and a fixed-step RK4 integrator.
//! - [`data`] — synthetic dataset generation, calibrated Gaussian noise,
//!   nondimensional scaling, and CSV ingestion of measured DP values.
//! - [`autodiff`] — a tape-based reverse-mode engine, dense MLPs, Adam, and a
//!   batched layer-level trainer for the larger networks.
//! - [`pinn`] — physics-informed training: joint recovery of ln(A) and E/RT
//!   from DP data, and joint recovery of an unknown right-hand side plus a
//!   rate constant with a dual-network setup.
//! - [`symreg`] — multi-population genetic-programming symbolic regression
//!   over expression trees, with Pareto-front extraction and score-based
//!   model selection.

pub mod autodiff;
pub mod data;
pub mod error;
pub mod kinetics;
pub mod pinn;
pub mod rng;
pub mod symreg;

pub use error::{Error, Result};
