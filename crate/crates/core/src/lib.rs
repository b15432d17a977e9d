//! Diffusion-training laboratory on a 2D Gaussian mixture.
//!
//! The crate pairs a small time-conditioned MLP trained with weighted
//! denoising objectives against exact Bayes oracles for the mixture, and
//! provides the diagnostics used to study how training behaves across noise
//! levels: Bayes floors and excess, signal/noise decompositions, empirical NTK
//! spectra, entropy effective rank and representation PCA.
//!
//! Loss weights include the recoverability rule `w(t) ∝ sqrt((c_x α)² + (c_eps σ)²)`,
//! normalized to unit mean over `t ~ U[0, 1]`.

pub mod error;
pub mod experiment;
pub mod gmm;
pub mod mlp;
pub mod rng;
pub mod schedule;
pub mod spectra;
pub mod stats;
pub mod target;
pub mod train;

pub use error::{Error, Result};
pub use gmm::{BayesDecomposition, Gmm};
pub use mlp::{Mlp, MlpConfig};
pub use schedule::{Schedule, ScheduleKind};
pub use target::{TargetKind, WeightKind, WeightRule};
