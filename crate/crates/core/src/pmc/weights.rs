//! Importance weights for the single and double Rao-Blackwellised schemes.

use rayon::prelude::*;

use super::{ParticleCloud, ProposedCloud};
use crate::error::{invalid, Error, Result};
use crate::kernel::KernelMixture;
use crate::math::{log_sum_exp, normalize_log_weights};
use crate::target::{LogTarget, Theta};

/// Below this a shifted per-kernel sum is recomputed with the exact max shift.
const RESHIFT_BELOW: f64 = 1e-200;

fn map_indices<F>(n: usize, parallel: bool, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    if parallel {
        (0..n).into_par_iter().with_min_len(32).map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

fn finish(proposed: &ProposedCloud, log_weights: Vec<f64>) -> Result<ParticleCloud> {
    let (norm_weights, _) = normalize_log_weights(&log_weights).ok_or(Error::DegenerateCloud {
        iteration: proposed.iteration,
    })?;
    Ok(ParticleCloud {
        particles: proposed.particles.clone(),
        log_weights,
        norm_weights,
        components: proposed.components.clone(),
        ancestors: proposed.ancestors.clone(),
        iteration: proposed.iteration,
    })
}

fn log_ratio(log_target: f64, log_proposal: f64) -> f64 {
    if log_target == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        log_target - log_proposal
    }
}

pub(super) fn single_rb<T: LogTarget>(
    proposed: &ProposedCloud,
    prev: &[Theta],
    mix: &KernelMixture,
    target: &T,
    parallel: bool,
) -> Result<ParticleCloud> {
    let log_weights = map_indices(proposed.len(), parallel, |i| {
        let x = &proposed.particles[i];
        let anc = &prev[proposed.ancestors[i]];
        log_ratio(target.log_density(x), mix.logdensity(anc, x))
    });
    finish(proposed, log_weights)
}

/// Weights `ω̄ᵢ ∝ π(Xᵢ) / Σ_d α_d q_d(X̃_{aᵢ}, Xᵢ)`, where `aᵢ` is the
/// recorded ancestor of particle `i` in `prev`.
pub fn weights_single_rb<T: LogTarget>(
    proposed: &ProposedCloud,
    prev: &[Theta],
    mix: &KernelMixture,
    target: &T,
) -> Result<ParticleCloud> {
    if proposed.ancestors.iter().any(|&a| a >= prev.len()) {
        return invalid("ancestor index outside the previous population");
    }
    single_rb(proposed, prev, mix, target, false)
}

/// The proposal density with the ancestor integrated out, evaluated at every
/// new particle:
/// `Σ_j w_j Σ_d α_d q_d(X̃_j, Xᵢ)`, together with its per-kernel parts.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratedProposal {
    /// `ln Σ_j w_j Σ_d α_d q_d(X̃_j, Xᵢ)` per particle.
    pub log_denominators: Vec<f64>,
    /// `ln Σ_j w_j α_d q_d(X̃_j, Xᵢ)`, row-major `N × D`.
    pub log_component_sums: Vec<f64>,
    pub components: usize,
}

impl IntegratedProposal {
    pub fn component_row(&self, i: usize) -> &[f64] {
        &self.log_component_sums[i * self.components..(i + 1) * self.components]
    }
}

struct Ancestors {
    points: Vec<Theta>,
    log_w: Vec<f64>,
    max_log_w: f64,
}

impl Ancestors {
    /// Keeps only ancestors with positive weight.
    fn new(prev: &[Theta], prev_weights: &[f64]) -> Self {
        let (points, log_w): (Vec<Theta>, Vec<f64>) = prev
            .iter()
            .zip(prev_weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(t, &w)| (*t, w.ln()))
            .unzip();
        let max_log_w = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self {
            points,
            log_w,
            max_log_w,
        }
    }
}

/// `ln Σ_j exp(log_w[j] − r2[j]·hp)` with a cheap upper-bound shift, falling
/// back to the exact max when the cheap shift would underflow.
fn log_kernel_sum(log_w: &[f64], r2: &[f64], r2_min: f64, max_log_w: f64, hp: f64) -> f64 {
    let shift = max_log_w - r2_min * hp;
    let s: f64 = log_w
        .iter()
        .zip(r2)
        .map(|(lw, d)| (lw - d * hp - shift).exp())
        .sum();
    if s >= RESHIFT_BELOW {
        return shift + s.ln();
    }
    let exact = log_w
        .iter()
        .zip(r2)
        .map(|(lw, d)| lw - d * hp)
        .fold(f64::NEG_INFINITY, f64::max);
    if exact == f64::NEG_INFINITY {
        return exact;
    }
    let s: f64 = log_w
        .iter()
        .zip(r2)
        .map(|(lw, d)| (lw - d * hp - exact).exp())
        .sum();
    exact + s.ln()
}

fn integrated_row(
    x: &Theta,
    anc: &Ancestors,
    mix: &KernelMixture,
    r2: &mut Vec<f64>,
    out: &mut [f64],
) -> f64 {
    r2.clear();
    r2.extend(anc.points.iter().map(|p| p.dist2(x)));
    let r2_min = r2.iter().copied().fold(f64::INFINITY, f64::min);
    for ((o, k), &a) in out.iter_mut().zip(mix.kernels()).zip(mix.alpha()) {
        let s = log_kernel_sum(&anc.log_w, r2, r2_min, anc.max_log_w, k.half_precision());
        *o = a.ln() + k.log_norm() + s;
    }
    log_sum_exp(out)
}

pub(super) fn integrated(
    particles: &[Theta],
    prev: &[Theta],
    prev_weights: &[f64],
    mix: &KernelMixture,
    parallel: bool,
) -> IntegratedProposal {
    let d = mix.len();
    let anc = Ancestors::new(prev, prev_weights);
    let row = |x: &Theta| {
        let mut r2 = Vec::with_capacity(anc.points.len());
        let mut comps = vec![0.0; d];
        let den = integrated_row(x, &anc, mix, &mut r2, &mut comps);
        (den, comps)
    };
    let rows: Vec<(f64, Vec<f64>)> = if parallel {
        particles.par_iter().with_min_len(32).map(row).collect()
    } else {
        particles.iter().map(row).collect()
    };
    let mut log_denominators = Vec::with_capacity(rows.len());
    let mut log_component_sums = Vec::with_capacity(rows.len() * d);
    for (den, comps) in rows {
        log_denominators.push(den);
        log_component_sums.extend(comps);
    }
    IntegratedProposal {
        log_denominators,
        log_component_sums,
        components: d,
    }
}

/// Evaluates the integrated proposal at `particles`.
pub fn integrated_proposal(
    particles: &[Theta],
    prev: &[Theta],
    prev_weights: &[f64],
    mix: &KernelMixture,
) -> Result<IntegratedProposal> {
    if prev.len() != prev_weights.len() {
        return invalid(format!(
            "{} weights for {} particles",
            prev_weights.len(),
            prev.len()
        ));
    }
    if !prev_weights.iter().any(|&w| w > 0.0) {
        return invalid("previous weights carry no mass");
    }
    Ok(integrated(particles, prev, prev_weights, mix, false))
}

pub(super) fn double_rb_from<T: LogTarget>(
    proposed: &ProposedCloud,
    integrated: &IntegratedProposal,
    target: &T,
    parallel: bool,
) -> Result<ParticleCloud> {
    let log_weights = map_indices(proposed.len(), parallel, |i| {
        log_ratio(
            target.log_density(&proposed.particles[i]),
            integrated.log_denominators[i],
        )
    });
    finish(proposed, log_weights)
}

/// Weights `ω̄ᵢ ∝ π(Xᵢ) / Σ_j ω̄_{j,t−1} Σ_d α_d q_d(X̃_j, Xᵢ)`.
///
/// Ancestor indices of `proposed` are not used: two equal points always get
/// equal weights.
pub fn weights_double_rb<T: LogTarget>(
    proposed: &ProposedCloud,
    prev: &[Theta],
    prev_weights: &[f64],
    mix: &KernelMixture,
    target: &T,
) -> Result<ParticleCloud> {
    let integrated = integrated_proposal(&proposed.particles, prev, prev_weights, mix)?;
    double_rb_from(proposed, &integrated, target, false)
}

/// Double-RB denominators restricted to ancestors near each particle.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedDenominators {
    pub log_denominators: Vec<f64>,
    /// Particles with no ancestor inside the radius; these use the full sum.
    pub fallback: Vec<bool>,
    /// Upper bound on `(full − truncated) / truncated` per particle.
    pub relative_error_bound: Vec<f64>,
}

/// Approximates the double-RB denominators by summing only over ancestors
/// within `radius` of each particle. Omitted ancestors are all farther than
/// `radius`, so the dropped mass is at most
/// `W_out · Σ_d α_d exp(−radius²/(2 s_d²)) / (2π s_d²)`, which is reported
/// relative to the kept sum.
pub fn truncated_double_rb_denominator(
    particles: &[Theta],
    prev: &[Theta],
    prev_weights: &[f64],
    mix: &KernelMixture,
    radius: f64,
) -> Result<TruncatedDenominators> {
    if !(radius > 0.0) {
        return invalid(format!("truncation radius {radius} must be positive"));
    }
    let full = integrated_proposal(particles, prev, prev_weights, mix)?;
    let anc = Ancestors::new(prev, prev_weights);
    let r2_cut = radius * radius;
    let mut out = TruncatedDenominators {
        log_denominators: Vec::with_capacity(particles.len()),
        fallback: Vec::with_capacity(particles.len()),
        relative_error_bound: Vec::with_capacity(particles.len()),
    };
    let mut comps = vec![0.0; mix.len()];
    let mut r2 = Vec::new();
    for (i, x) in particles.iter().enumerate() {
        let keep: Vec<usize> = (0..anc.points.len())
            .filter(|&j| anc.points[j].dist2(x) <= r2_cut)
            .collect();
        if keep.is_empty() {
            out.log_denominators.push(full.log_denominators[i]);
            out.fallback.push(true);
            out.relative_error_bound.push(0.0);
            continue;
        }
        let near = Ancestors {
            points: keep.iter().map(|&j| anc.points[j]).collect(),
            log_w: keep.iter().map(|&j| anc.log_w[j]).collect(),
            max_log_w: keep
                .iter()
                .map(|&j| anc.log_w[j])
                .fold(f64::NEG_INFINITY, f64::max),
        };
        let kept = integrated_row(x, &near, mix, &mut r2, &mut comps);
        let w_out: f64 = (0..anc.points.len())
            .filter(|j| !keep.contains(j))
            .map(|j| anc.log_w[j].exp())
            .sum();
        let tail: Vec<f64> = mix
            .kernels()
            .iter()
            .zip(mix.alpha())
            .map(|(k, a)| a.ln() + k.log_norm() - r2_cut * k.half_precision())
            .collect();
        let log_bound = if w_out > 0.0 {
            w_out.ln() + log_sum_exp(&tail)
        } else {
            f64::NEG_INFINITY
        };
        out.log_denominators.push(kept);
        out.fallback.push(false);
        out.relative_error_bound.push((log_bound - kept).exp());
    }
    Ok(out)
}
