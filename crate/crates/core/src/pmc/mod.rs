//! Population Monte Carlo with an adaptive mixture of random-walk kernels.
//!
//! One iteration proposes `N` new points from the current kernel mixture,
//! weights them against the target, re-estimates the mixture weights `α`
//! and resamples. The three [`Scheme`]s differ in how the importance
//! denominator and the `α` update treat the latent quantities:
//!
//! * [`Scheme::Naive`]: denominator is the mixture centred on the particle's
//!   own ancestor; `α_d` is the weight mass of particles drawn from kernel `d`.
//! * [`Scheme::SingleRb`]: same denominator; the component indicator in the
//!   `α` update is replaced by its conditional probability.
//! * [`Scheme::DoubleRb`]: the ancestor is integrated out as well, so the
//!   denominator is the whole weighted mixture over the previous population.
//!   Costs `O(N²D)` kernel evaluations per iteration.

mod adapt;
mod init;
mod resample;
mod weights;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::{apply_alpha_floor, KernelMixture};
use crate::math::{effective_sample_size, shannon_entropy};
use crate::target::{LogTarget, Theta};

pub use adapt::{responsibilities, update_alpha, update_alpha_raw};
pub use init::{init_cloud, InitialProposal};
pub use resample::resample_multinomial;
pub use weights::{
    integrated_proposal, truncated_double_rb_denominator, weights_double_rb, weights_single_rb,
    IntegratedProposal, TruncatedDenominators,
};

/// Multiplier of `1/D` giving the smallest weight any kernel may keep.
pub const DEFAULT_ALPHA_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Naive,
    SingleRb,
    DoubleRb,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Naive, Scheme::SingleRb, Scheme::DoubleRb];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Naive => "naive",
            Scheme::SingleRb => "single",
            Scheme::DoubleRb => "double",
        }
    }

    /// Stable label for RNG substreams.
    pub fn stream_label(&self) -> u64 {
        match self {
            Scheme::Naive => 1,
            Scheme::SingleRb => 2,
            Scheme::DoubleRb => 3,
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(Scheme::Naive),
            "single" | "single_rb" => Ok(Scheme::SingleRb),
            "double" | "double_rb" => Ok(Scheme::DoubleRb),
            other => invalid(format!(
                "unknown scheme {other:?} (expected naive, single or double)"
            )),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Which responsibility the double-RB `α` update uses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoubleRbAlpha {
    /// Responsibility averaged over all weighted ancestors.
    #[default]
    Marginalized,
    /// Responsibility given the ancestor actually sampled, as in single RB.
    Conditional,
}

/// Freshly proposed points, before weighting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposedCloud {
    pub particles: Vec<Theta>,
    /// Kernel index each point was drawn from.
    pub components: Vec<usize>,
    /// Index into the previous population of each point's ancestor.
    pub ancestors: Vec<usize>,
    pub iteration: usize,
}

impl ProposedCloud {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }
}

/// A weighted population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleCloud {
    pub particles: Vec<Theta>,
    /// Unnormalised log importance weights.
    pub log_weights: Vec<f64>,
    pub norm_weights: Vec<f64>,
    pub components: Vec<usize>,
    pub ancestors: Vec<usize>,
    /// 0 for the initial population, then 1, 2, ...
    pub iteration: usize,
}

impl ParticleCloud {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn ess(&self) -> f64 {
        effective_sample_size(&self.norm_weights)
    }

    pub fn entropy(&self) -> f64 {
        shannon_entropy(&self.norm_weights)
    }

    /// Self-normalised estimate of the target mean.
    pub fn weighted_mean(&self) -> Theta {
        let (a, b) = self
            .particles
            .iter()
            .zip(&self.norm_weights)
            .fold((0.0, 0.0), |(a, b), (t, w)| (a + w * t.mu1, b + w * t.mu2));
        Theta::new(a, b)
    }
}

/// An equally weighted population obtained by resampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResampledCloud {
    pub particles: Vec<Theta>,
    /// Index of the source particle each entry was copied from.
    pub sources: Vec<usize>,
    pub iteration: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PmcDiagnostics {
    /// Effective sample size of each weighted population, initial one first.
    pub ess: Vec<f64>,
    /// Shannon entropy of the normalised weights, aligned with `ess`.
    pub entropy: Vec<f64>,
    /// `α` before the first iteration and after every update.
    pub alpha_trace: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmcConfig {
    pub scheme: Scheme,
    pub particles: usize,
    pub iterations: usize,
    #[serde(default)]
    pub double_rb_alpha: DoubleRbAlpha,
    /// The floor applied to each `α_d` is `alpha_floor / D`.
    #[serde(default = "default_alpha_floor")]
    pub alpha_floor: f64,
    /// Spread the per-particle weight computations over the rayon pool.
    #[serde(default)]
    pub parallel: bool,
}

fn default_alpha_floor() -> f64 {
    DEFAULT_ALPHA_FLOOR
}

impl PmcConfig {
    pub fn new(scheme: Scheme, particles: usize, iterations: usize) -> Self {
        Self {
            scheme,
            particles,
            iterations,
            double_rb_alpha: DoubleRbAlpha::default(),
            alpha_floor: DEFAULT_ALPHA_FLOOR,
            parallel: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.particles < 2 {
            return invalid(format!("need at least 2 particles, got {}", self.particles));
        }
        if self.iterations < 1 {
            return invalid("need at least one PMC iteration");
        }
        if !(0.0..=1.0).contains(&self.alpha_floor) {
            return invalid(format!("alpha floor {} outside [0, 1]", self.alpha_floor));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmcRun {
    /// Resampled population after each iteration; entry `k` is iteration `k + 1`.
    pub clouds: Vec<ResampledCloud>,
    pub final_cloud: ParticleCloud,
    pub final_mixture: KernelMixture,
    pub diagnostics: PmcDiagnostics,
}

impl PmcRun {
    /// Resampled population after iteration `t` (1-based).
    pub fn snapshot(&self, t: usize) -> Option<&ResampledCloud> {
        t.checked_sub(1).and_then(|k| self.clouds.get(k))
    }
}

/// Draws the next population.
///
/// Under [`Scheme::DoubleRb`] each ancestor is drawn from `prev` with
/// probabilities `prev_weights` (`prev` is then the weighted previous
/// population); otherwise particle `i` moves from `prev[i]` (`prev` is the
/// resampled population and `prev_weights` is ignored).
pub fn propose<R: Rng + ?Sized>(
    prev: &[Theta],
    prev_weights: &[f64],
    mix: &KernelMixture,
    scheme: Scheme,
    iteration: usize,
    rng: &mut R,
) -> Result<ProposedCloud> {
    let n = prev.len();
    let ancestor_sampler = match scheme {
        Scheme::DoubleRb => {
            if prev_weights.len() != n {
                return invalid(format!("{} weights for {n} particles", prev_weights.len()));
            }
            Some(
                WeightedIndex::new(prev_weights)
                    .map_err(|e| Error::InvalidArgument(e.to_string()))?,
            )
        }
        _ => None,
    };
    let components_dist = mix.component_sampler();
    let mut particles = Vec::with_capacity(n);
    let mut components = Vec::with_capacity(n);
    let mut ancestors = Vec::with_capacity(n);
    for i in 0..n {
        let a = match &ancestor_sampler {
            Some(s) => s.sample(rng),
            None => i,
        };
        let d = components_dist.sample(rng);
        particles.push(mix.sample_transition(d, &prev[a], rng));
        components.push(d);
        ancestors.push(a);
    }
    Ok(ProposedCloud {
        particles,
        components,
        ancestors,
        iteration,
    })
}

/// Runs `config.iterations` PMC iterations from the initial proposal.
pub fn run_pmc<T: LogTarget, R: Rng + ?Sized>(
    target: &T,
    init: &InitialProposal,
    mix0: &KernelMixture,
    config: &PmcConfig,
    rng: &mut R,
) -> Result<PmcRun> {
    config.validate()?;
    let d = mix0.len();
    let floor = config.alpha_floor / d as f64;
    let n = config.particles;

    let mut weighted = init_cloud(init, n, target, rng)?;
    let mut diagnostics = PmcDiagnostics {
        ess: vec![weighted.ess()],
        entropy: vec![weighted.entropy()],
        alpha_trace: vec![mix0.alpha().to_vec()],
    };
    let mut resampled = match config.scheme {
        Scheme::DoubleRb => None,
        _ => Some(resample_multinomial(&weighted, rng)),
    };
    let mut mix = mix0.clone();
    let mut clouds = Vec::with_capacity(config.iterations);

    for t in 1..=config.iterations {
        let (prev, prev_weights): (&[Theta], &[f64]) = match (&resampled, config.scheme) {
            (Some(r), Scheme::Naive | Scheme::SingleRb) => (&r.particles, &[]),
            _ => (&weighted.particles, &weighted.norm_weights),
        };
        let proposed = propose(prev, prev_weights, &mix, config.scheme, t, rng)?;
        let (cloud, raw_alpha) = match config.scheme {
            Scheme::Naive | Scheme::SingleRb => {
                let cloud = weights::single_rb(&proposed, prev, &mix, target, config.parallel)?;
                let raw = adapt::alpha_conditional(&cloud, prev, &mix, config.scheme);
                (cloud, raw)
            }
            Scheme::DoubleRb => {
                let integrated = weights::integrated(
                    &proposed.particles,
                    prev,
                    prev_weights,
                    &mix,
                    config.parallel,
                );
                let cloud =
                    weights::double_rb_from(&proposed, &integrated, target, config.parallel)?;
                let raw = match config.double_rb_alpha {
                    DoubleRbAlpha::Marginalized => {
                        adapt::alpha_marginalized(&cloud, &integrated, &mix)
                    }
                    DoubleRbAlpha::Conditional => {
                        adapt::alpha_conditional(&cloud, prev, &mix, Scheme::SingleRb)
                    }
                };
                (cloud, raw)
            }
        };
        mix = mix.with_alpha(apply_alpha_floor(&raw_alpha, floor))?;
        let next = resample_multinomial(&cloud, rng);
        diagnostics.ess.push(cloud.ess());
        diagnostics.entropy.push(cloud.entropy());
        diagnostics.alpha_trace.push(mix.alpha().to_vec());
        clouds.push(next.clone());
        resampled = Some(next);
        weighted = cloud;
    }

    Ok(PmcRun {
        clouds,
        final_cloud: weighted,
        final_mixture: mix,
        diagnostics,
    })
}
