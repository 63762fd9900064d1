use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use super::{ParticleCloud, ResampledCloud};

/// `N` i.i.d. draws from the weighted empirical distribution of `cloud`.
///
/// # Panics
/// If the cloud's normalised weights are not a valid distribution.
pub fn resample_multinomial<R: Rng + ?Sized>(cloud: &ParticleCloud, rng: &mut R) -> ResampledCloud {
    let dist = WeightedIndex::new(&cloud.norm_weights).expect("normalised weights");
    let sources: Vec<usize> = (0..cloud.len()).map(|_| dist.sample(rng)).collect();
    ResampledCloud {
        particles: sources.iter().map(|&j| cloud.particles[j]).collect(),
        sources,
        iteration: cloud.iteration,
    }
}
