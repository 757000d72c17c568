//! Smooth covariate effects for relational event models.
//!
//! Each covariate effect f_k is a small feed-forward network with a single
//! input and output. The networks are trained jointly on nested case-control
//! pairs, where the sampled partial likelihood of a pair reduces to
//! `sigma(f(case) - f(control))`. Bootstrap refits evaluated on a grid are
//! summarized by a Gaussian-process posterior to give mean curves and bands.
//!
//! Pipeline: [`simulator`] (or real data) → [`rem::sample_controls`] →
//! [`trainer::train`] / [`trainer::bootstrap_refits`] →
//! [`uncertainty::gpr_posterior`] → [`eval`].

pub mod error;
pub mod eval;
pub mod nam;
pub mod optim;
pub mod rem;
pub mod rng;
pub mod simulator;
pub mod trainer;
pub mod uncertainty;

pub use error::{Error, Result};
