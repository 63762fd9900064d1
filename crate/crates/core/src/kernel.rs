//! Isotropic Gaussian random-walk kernels and their weighted mixture
//! `q_α(x, x') = Σ_d α_d q_d(x, x')`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::target::Theta;

/// Default kernel scales.
pub const DEFAULT_SCALES: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const SIMPLEX_TOL: f64 = 1e-12;

/// `x' = x + scale · ε`, `ε ~ N(0, I₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RwKernel {
    scale: f64,
}

impl RwKernel {
    pub fn new(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return invalid(format!("kernel scale {scale} must be positive and finite"));
        }
        Ok(Self { scale })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `ln` of the normalising constant `1 / (2π s²)`.
    #[inline]
    pub fn log_norm(&self) -> f64 {
        -LN_2PI - 2.0 * self.scale.ln()
    }

    /// `1 / (2 s²)`.
    #[inline]
    pub fn half_precision(&self) -> f64 {
        0.5 / (self.scale * self.scale)
    }

    #[inline]
    pub fn log_density(&self, from: &Theta, to: &Theta) -> f64 {
        self.log_norm() - from.dist2(to) * self.half_precision()
    }

    pub fn sample<R: Rng + ?Sized>(&self, from: &Theta, rng: &mut R) -> Theta {
        let z1: f64 = StandardNormal.sample(rng);
        let z2: f64 = StandardNormal.sample(rng);
        Theta::new(from.mu1 + self.scale * z1, from.mu2 + self.scale * z2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMixture {
    kernels: Vec<RwKernel>,
    alpha: Vec<f64>,
}

impl KernelMixture {
    pub fn new(kernels: Vec<RwKernel>, alpha: Vec<f64>) -> Result<Self> {
        if kernels.is_empty() {
            return invalid("kernel mixture needs at least one kernel");
        }
        if alpha.len() != kernels.len() {
            return invalid(format!(
                "{} weights for {} kernels",
                alpha.len(),
                kernels.len()
            ));
        }
        check_simplex(&alpha)?;
        Ok(Self { kernels, alpha })
    }

    /// Kernels with the given scales and uniform weights.
    pub fn uniform(scales: &[f64]) -> Result<Self> {
        let kernels = scales
            .iter()
            .map(|&s| RwKernel::new(s))
            .collect::<Result<Vec<_>>>()?;
        let d = kernels.len().max(1);
        Self::new(kernels, vec![1.0 / d as f64; scales.len()])
    }

    pub fn from_scales(scales: &[f64], alpha: Vec<f64>) -> Result<Self> {
        let kernels = scales
            .iter()
            .map(|&s| RwKernel::new(s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(kernels, alpha)
    }

    /// Same kernels, new weights.
    pub fn with_alpha(&self, alpha: Vec<f64>) -> Result<Self> {
        Self::new(self.kernels.clone(), alpha)
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    pub fn kernels(&self) -> &[RwKernel] {
        &self.kernels
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn scales(&self) -> Vec<f64> {
        self.kernels.iter().map(RwKernel::scale).collect()
    }

    /// `ln q_d(from, to)`.
    ///
    /// # Panics
    /// If `d` is out of range.
    pub fn kernel_logdensity(&self, d: usize, from: &Theta, to: &Theta) -> f64 {
        self.kernels[d].log_density(from, to)
    }

    /// `ln α_d + ln q_d(from, to)` for every component, written into `out`.
    pub fn component_log_terms(&self, from: &Theta, to: &Theta, out: &mut [f64]) {
        let r2 = from.dist2(to);
        for ((o, k), &a) in out.iter_mut().zip(&self.kernels).zip(&self.alpha) {
            *o = a.ln() + k.log_norm() - r2 * k.half_precision();
        }
    }

    /// `ln Σ_d α_d q_d(from, to)`.
    pub fn logdensity(&self, from: &Theta, to: &Theta) -> f64 {
        let mut terms = vec![0.0; self.len()];
        self.component_log_terms(from, to, &mut terms);
        crate::math::log_sum_exp(&terms)
    }

    /// Draws a component index with probability `α_d`.
    pub fn sample_component<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.component_sampler().sample(rng)
    }

    /// A reusable sampler over component indices.
    pub fn component_sampler(&self) -> WeightedIndex<f64> {
        WeightedIndex::new(&self.alpha).expect("alpha is a validated simplex")
    }

    /// Draws from `q_d(from, ·)`.
    pub fn sample_transition<R: Rng + ?Sized>(&self, d: usize, from: &Theta, rng: &mut R) -> Theta {
        self.kernels[d].sample(from, rng)
    }
}

pub(crate) fn check_simplex(alpha: &[f64]) -> Result<()> {
    if alpha.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
        return invalid(format!(
            "mixture weights {alpha:?} must be finite and non-negative"
        ));
    }
    let total: f64 = alpha.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOL {
        return invalid(format!("mixture weights sum to {total}, not 1"));
    }
    Ok(())
}

/// Clamps every weight to at least `floor` and rescales the rest so the
/// vector sums to one. Weights that end up below the floor after rescaling
/// are clamped in turn, so the result is exactly floored.
pub fn apply_alpha_floor(alpha: &[f64], floor: f64) -> Vec<f64> {
    let d = alpha.len();
    assert!(
        floor * d as f64 <= 1.0,
        "floor {floor} infeasible for {d} components"
    );
    let mut clamped = vec![false; d];
    loop {
        let fixed = clamped.iter().filter(|&&c| c).count() as f64 * floor;
        let free: f64 = alpha
            .iter()
            .zip(&clamped)
            .filter(|(_, &c)| !c)
            .map(|(a, _)| a)
            .sum();
        let scale = if free > 0.0 {
            (1.0 - fixed) / free
        } else {
            0.0
        };
        let mut changed = false;
        for k in 0..d {
            if !clamped[k] && alpha[k] * scale < floor {
                clamped[k] = true;
                changed = true;
            }
        }
        if !changed {
            let mut out: Vec<f64> = alpha
                .iter()
                .zip(&clamped)
                .map(|(&a, &c)| if c { floor } else { a * scale })
                .collect();
            // Put rounding residue on the largest entry.
            let residue = 1.0 - out.iter().sum::<f64>();
            if let Some(big) = out
                .iter_mut()
                .max_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal))
            {
                *big += residue;
            }
            return out;
        }
    }
}
