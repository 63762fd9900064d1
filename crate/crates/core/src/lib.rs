//! Population Monte Carlo with adaptive mixtures of random-walk kernels.
//!
//! The crate covers the whole experimental pipeline:
//!
//! * [`target`]: the Gaussian mean-mixture posterior on a square and the
//!   clumped five-cluster data generator used to make it multimodal.
//! * [`kernel`]: isotropic Gaussian random-walk kernels and their
//!   simplex-weighted mixture.
//! * [`pmc`]: the PMC iteration with naive, single Rao-Blackwellised and
//!   double Rao-Blackwellised weighting/adaptation.
//! * [`modefinder`]: a grid census of posterior modes and their basins, used
//!   to score how many modes a particle cloud has found.
//! * [`experiment`]: the factorial sweep harness, report tables and plots.

pub mod config;
pub mod error;
pub mod experiment;
pub mod kernel;
pub mod math;
pub mod modefinder;
pub mod pmc;
pub mod rng;
pub mod target;
pub mod timing;

pub use error::{Error, Result};
pub use kernel::{KernelMixture, RwKernel};
pub use target::{MixtureHyper, ObservedSample, PriorSquare, Theta};
