use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::ParticleCloud;
use crate::error::{invalid, Error, Result};
use crate::math::normalize_log_weights;
use crate::target::{LogTarget, PriorSquare, Theta};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// The proposal that produces the very first population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialProposal {
    /// Isotropic Gaussian.
    Gaussian { center: Theta, sd: f64 },
    /// Uniform on a square.
    Flat { square: PriorSquare },
}

impl InitialProposal {
    /// Gaussian at the centre of the square with sd a quarter of its width.
    pub fn gaussian_over(square: &PriorSquare) -> Self {
        let c = square.center();
        InitialProposal::Gaussian {
            center: Theta::new(c, c),
            sd: square.width() / 4.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InitialProposal::Gaussian { center, sd } => {
                if !(center.is_finite() && *sd > 0.0 && sd.is_finite()) {
                    return invalid("initial Gaussian needs a finite centre and positive sd");
                }
                Ok(())
            }
            InitialProposal::Flat { square } => square.validate(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Theta {
        match self {
            InitialProposal::Gaussian { center, sd } => {
                let z1: f64 = StandardNormal.sample(rng);
                let z2: f64 = StandardNormal.sample(rng);
                Theta::new(center.mu1 + sd * z1, center.mu2 + sd * z2)
            }
            InitialProposal::Flat { square } => Theta::new(
                rng.random_range(square.lo..=square.hi),
                rng.random_range(square.lo..=square.hi),
            ),
        }
    }

    pub fn log_density(&self, theta: &Theta) -> f64 {
        match self {
            InitialProposal::Gaussian { center, sd } => {
                -LN_2PI - 2.0 * sd.ln() - center.dist2(theta) / (2.0 * sd * sd)
            }
            InitialProposal::Flat { square } => {
                if square.contains(theta) {
                    -2.0 * square.width().ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }
}

/// Draws `n` points from the initial proposal and weights them by
/// `π / μ₀`. Component and ancestor indices are set to 0 and `i`.
pub fn init_cloud<T: LogTarget, R: Rng + ?Sized>(
    init: &InitialProposal,
    n: usize,
    target: &T,
    rng: &mut R,
) -> Result<ParticleCloud> {
    if n < 2 {
        return invalid(format!("need at least 2 particles, got {n}"));
    }
    init.validate()?;
    let particles: Vec<Theta> = (0..n).map(|_| init.sample(rng)).collect();
    let log_weights: Vec<f64> = particles
        .iter()
        .map(|x| {
            let lt = target.log_density(x);
            if lt == f64::NEG_INFINITY {
                lt
            } else {
                lt - init.log_density(x)
            }
        })
        .collect();
    let (norm_weights, _) =
        normalize_log_weights(&log_weights).ok_or(Error::InitializationFailure)?;
    Ok(ParticleCloud {
        particles,
        log_weights,
        norm_weights,
        components: vec![0; n],
        ancestors: (0..n).collect(),
        iteration: 0,
    })
}
