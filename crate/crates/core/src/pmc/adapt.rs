//! Re-estimation of the kernel weights `α`.

use super::weights::{integrated, IntegratedProposal};
use super::{DoubleRbAlpha, ParticleCloud, Scheme};
use crate::error::{invalid, Result};
use crate::kernel::{apply_alpha_floor, KernelMixture};
use crate::target::Theta;

/// `f(d | x, x', α) = α_d q_d(x, x') / Σ_e α_e q_e(x, x')`.
pub fn responsibilities(mix: &KernelMixture, from: &Theta, to: &Theta) -> Vec<f64> {
    let mut r = vec![0.0; mix.len()];
    write_responsibilities(mix, from, to, &mut r);
    r
}

fn write_responsibilities(mix: &KernelMixture, from: &Theta, to: &Theta, out: &mut [f64]) {
    mix.component_log_terms(from, to, out);
    let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in out.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in out.iter_mut() {
        *v /= total;
    }
}

/// Naive: `α'_d = Σᵢ ω̄ᵢ 1{Zᵢ = d}`. Otherwise the indicator is replaced by
/// the responsibility given the particle's recorded ancestor.
pub(super) fn alpha_conditional(
    cloud: &ParticleCloud,
    prev: &[Theta],
    mix: &KernelMixture,
    scheme: Scheme,
) -> Vec<f64> {
    let mut alpha = vec![0.0; mix.len()];
    if scheme == Scheme::Naive {
        for (&z, &w) in cloud.components.iter().zip(&cloud.norm_weights) {
            alpha[z] += w;
        }
        return alpha;
    }
    let mut r = vec![0.0; mix.len()];
    for i in 0..cloud.len() {
        let w = cloud.norm_weights[i];
        if w == 0.0 {
            continue;
        }
        write_responsibilities(mix, &prev[cloud.ancestors[i]], &cloud.particles[i], &mut r);
        for (a, ri) in alpha.iter_mut().zip(&r) {
            *a += w * ri;
        }
    }
    alpha
}

/// `α'_d = Σᵢ ω̄ᵢ · Σ_j w_j α_d q_d(X̃_j, Xᵢ) / Σ_j w_j Σ_e α_e q_e(X̃_j, Xᵢ)`.
pub(super) fn alpha_marginalized(
    cloud: &ParticleCloud,
    integrated: &IntegratedProposal,
    mix: &KernelMixture,
) -> Vec<f64> {
    let mut alpha = vec![0.0; mix.len()];
    for (i, &w) in cloud.norm_weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let den = integrated.log_denominators[i];
        for (a, lc) in alpha.iter_mut().zip(integrated.component_row(i)) {
            *a += w * (lc - den).exp();
        }
    }
    alpha
}

/// The unfloored `α` update for `scheme`.
///
/// `prev`/`prev_weights` describe the population the cloud was proposed
/// from, exactly as passed to [`super::propose`].
pub fn update_alpha_raw(
    cloud: &ParticleCloud,
    prev: &[Theta],
    prev_weights: &[f64],
    mix: &KernelMixture,
    scheme: Scheme,
    rule: DoubleRbAlpha,
) -> Result<Vec<f64>> {
    if cloud.ancestors.iter().any(|&a| a >= prev.len())
        || cloud.components.iter().any(|&z| z >= mix.len())
    {
        return invalid("cloud indices inconsistent with the previous population or mixture");
    }
    Ok(match (scheme, rule) {
        (Scheme::DoubleRb, DoubleRbAlpha::Marginalized) => {
            if prev_weights.len() != prev.len() {
                return invalid(format!(
                    "{} weights for {} particles",
                    prev_weights.len(),
                    prev.len()
                ));
            }
            let integ = integrated(&cloud.particles, prev, prev_weights, mix, false);
            alpha_marginalized(cloud, &integ, mix)
        }
        (Scheme::DoubleRb, DoubleRbAlpha::Conditional) => {
            alpha_conditional(cloud, prev, mix, Scheme::SingleRb)
        }
        (s, _) => alpha_conditional(cloud, prev, mix, s),
    })
}

/// [`update_alpha_raw`] followed by the floor `floor_factor / D` and renormalisation.
pub fn update_alpha(
    cloud: &ParticleCloud,
    prev: &[Theta],
    prev_weights: &[f64],
    mix: &KernelMixture,
    scheme: Scheme,
    rule: DoubleRbAlpha,
    floor_factor: f64,
) -> Result<Vec<f64>> {
    let raw = update_alpha_raw(cloud, prev, prev_weights, mix, scheme, rule)?;
    Ok(apply_alpha_floor(&raw, floor_factor / mix.len() as f64))
}
