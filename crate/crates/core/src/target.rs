//! The Gaussian mean-mixture benchmark posterior.
//!
//! Observations follow `p·N(μ₁, σ₁²) + (1−p)·N(μ₂, σ₂²)` with `p`, `σ₁`, `σ₂`
//! known; the parameter is `θ = (μ₁, μ₂)` under a flat prior on a square.
//! Artificial data sets are drawn from a five-cluster normal mixture instead
//! of the model itself, which puts extra modes on the posterior surface.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math::log_add_exp;
use crate::modefinder::LogDensityGrid;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Variance of each artificial cluster.
pub const CLUSTER_VARIANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub mu1: f64,
    pub mu2: f64,
}

impl Theta {
    pub const fn new(mu1: f64, mu2: f64) -> Self {
        Self { mu1, mu2 }
    }

    pub fn is_finite(&self) -> bool {
        self.mu1.is_finite() && self.mu2.is_finite()
    }

    #[inline]
    pub fn dist2(&self, other: &Theta) -> f64 {
        let a = self.mu1 - other.mu1;
        let b = self.mu2 - other.mu2;
        a * a + b * b
    }

    pub fn swapped(&self) -> Theta {
        Theta::new(self.mu2, self.mu1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureHyper {
    pub p: f64,
    pub sigma1: f64,
    pub sigma2: f64,
}

impl MixtureHyper {
    pub fn new(p: f64, sigma1: f64, sigma2: f64) -> Result<Self> {
        let h = Self { p, sigma1, sigma2 };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return invalid(format!("mixing weight p = {} must lie in (0, 1)", self.p));
        }
        if !(self.sigma1 > 0.0 && self.sigma1.is_finite()) {
            return invalid(format!("sigma1 = {} must be positive", self.sigma1));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return invalid(format!("sigma2 = {} must be positive", self.sigma2));
        }
        Ok(())
    }

    /// The same model with the component labels exchanged.
    pub fn swapped(&self) -> MixtureHyper {
        MixtureHyper {
            p: 1.0 - self.p,
            sigma1: self.sigma2,
            sigma2: self.sigma1,
        }
    }
}

/// Flat prior support `[lo, hi]²` in `(μ₁, μ₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSquare {
    pub lo: f64,
    pub hi: f64,
}

impl PriorSquare {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        let s = Self { lo, hi };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return invalid(format!("prior square [{}, {}] is empty", self.lo, self.hi));
        }
        Ok(())
    }

    /// `[min(data) − margin, max(data) + margin]`, rounded outward to integers.
    /// An empty data set falls back to `[-margin, margin]`.
    pub fn around_data(data: &[f64], margin: f64) -> Result<Self> {
        let (min, max) = data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
                (a.min(x), b.max(x))
            });
        let (min, max) = if data.is_empty() {
            (0.0, 0.0)
        } else {
            (min, max)
        };
        let lo = (min - margin).floor();
        let mut hi = (max + margin).ceil();
        if hi <= lo {
            hi = lo + 1.0;
        }
        Self::new(lo, hi)
    }

    pub fn contains(&self, theta: &Theta) -> bool {
        theta.mu1 >= self.lo && theta.mu1 <= self.hi && theta.mu2 >= self.lo && theta.mu2 <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedSample {
    pub data: Vec<f64>,
    pub hyper: MixtureHyper,
}

impl ObservedSample {
    pub fn new(data: Vec<f64>, hyper: MixtureHyper) -> Result<Self> {
        hyper.validate()?;
        if let Some(bad) = data.iter().find(|x| !x.is_finite()) {
            return invalid(format!("non-finite observation {bad}"));
        }
        Ok(Self { data, hyper })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Anything the PMC engine can target: an unnormalised log-density on the plane.
pub trait LogTarget: Sync {
    fn log_density(&self, theta: &Theta) -> f64;
}

/// The mean-mixture posterior with its constants precomputed.
#[derive(Debug, Clone)]
pub struct MeanMixturePosterior<'a> {
    sample: &'a ObservedSample,
    prior: PriorSquare,
    ln_w1: f64,
    ln_w2: f64,
    inv2var1: f64,
    inv2var2: f64,
}

impl<'a> MeanMixturePosterior<'a> {
    pub fn new(sample: &'a ObservedSample, prior: PriorSquare) -> Result<Self> {
        sample.hyper.validate()?;
        prior.validate()?;
        let h = sample.hyper;
        Ok(Self {
            sample,
            prior,
            ln_w1: h.p.ln() - h.sigma1.ln() - LN_SQRT_2PI,
            ln_w2: (1.0 - h.p).ln() - h.sigma2.ln() - LN_SQRT_2PI,
            inv2var1: 0.5 / (h.sigma1 * h.sigma1),
            inv2var2: 0.5 / (h.sigma2 * h.sigma2),
        })
    }

    pub fn prior(&self) -> PriorSquare {
        self.prior
    }

    fn log_likelihood(&self, theta: &Theta) -> f64 {
        self.sample
            .data
            .iter()
            .map(|&x| {
                let a = x - theta.mu1;
                let b = x - theta.mu2;
                log_add_exp(
                    self.ln_w1 - a * a * self.inv2var1,
                    self.ln_w2 - b * b * self.inv2var2,
                )
            })
            .sum()
    }
}

impl LogTarget for MeanMixturePosterior<'_> {
    #[inline]
    fn log_density(&self, theta: &Theta) -> f64 {
        if !self.prior.contains(theta) {
            return f64::NEG_INFINITY;
        }
        self.log_likelihood(theta)
    }
}

/// An isotropic Gaussian on the plane, handy as a target with known moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianTarget {
    pub mean: Theta,
    pub sd: f64,
}

impl LogTarget for GaussianTarget {
    fn log_density(&self, theta: &Theta) -> f64 {
        -theta.dist2(&self.mean) / (2.0 * self.sd * self.sd)
    }
}

/// A target that is constant on a square and zero outside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatTarget {
    pub square: PriorSquare,
}

impl LogTarget for FlatTarget {
    fn log_density(&self, theta: &Theta) -> f64 {
        if self.square.contains(theta) {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Unnormalised log posterior; `-∞` outside the prior square.
pub fn log_posterior(theta: &Theta, sample: &ObservedSample, prior: &PriorSquare) -> Result<f64> {
    if !theta.is_finite() {
        return Err(Error::Domain(format!(
            "non-finite parameter ({}, {})",
            theta.mu1, theta.mu2
        )));
    }
    Ok(MeanMixturePosterior::new(sample, *prior)?.log_density(theta))
}

/// Centres of the five artificial clusters: `0, ±μ₂, ±2μ₂`.
pub fn cluster_centres(mu2: f64) -> [f64; 5] {
    [0.0, mu2, -mu2, 2.0 * mu2, -2.0 * mu2]
}

/// Draws `n` observations from the equal-weight five-cluster mixture with
/// centres [`cluster_centres`] and variance [`CLUSTER_VARIANCE`].
pub fn generate_artificial_sample<R: Rng + ?Sized>(
    n: usize,
    mu2: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    generate_labelled_sample(n, mu2, rng).map(|v| v.into_iter().map(|(x, _)| x).collect())
}

/// As [`generate_artificial_sample`], also returning each draw's cluster index.
pub fn generate_labelled_sample<R: Rng + ?Sized>(
    n: usize,
    mu2: f64,
    rng: &mut R,
) -> Result<Vec<(f64, usize)>> {
    if n == 0 {
        return invalid("artificial sample size must be at least 1");
    }
    if !(mu2 > 0.0 && mu2.is_finite()) {
        return invalid(format!("cluster spacing mu2 = {mu2} must be positive"));
    }
    let centres = cluster_centres(mu2);
    let sd = CLUSTER_VARIANCE.sqrt();
    Ok((0..n)
        .map(|_| {
            let k = rng.random_range(0..5);
            let z: f64 = StandardNormal.sample(rng);
            (centres[k] + sd * z, k)
        })
        .collect())
}

/// Cell-centred coordinate of index `k` on an `r`-cell axis over the square.
#[inline]
pub fn cell_centre(prior: &PriorSquare, resolution: usize, k: usize) -> f64 {
    prior.lo + (k as f64 + 0.5) * prior.width() / resolution as f64
}

/// Evaluates `target` at the cell centres of a `resolution²` grid over the square.
/// Row index runs over `μ₁`, column index over `μ₂`.
pub fn grid_log_density<T: LogTarget>(
    target: &T,
    prior: &PriorSquare,
    resolution: usize,
) -> Result<LogDensityGrid> {
    if resolution < 3 {
        return invalid(format!("grid resolution {resolution} must be at least 3"));
    }
    prior.validate()?;
    let values: Vec<f64> = (0..resolution)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mu1 = cell_centre(prior, resolution, i);
            (0..resolution).map(move |j| {
                let mu2 = cell_centre(prior, resolution, j);
                target.log_density(&Theta::new(mu1, mu2))
            })
        })
        .collect();
    LogDensityGrid::new(resolution, values)
}

pub fn grid_log_posterior(
    sample: &ObservedSample,
    prior: &PriorSquare,
    resolution: usize,
) -> Result<LogDensityGrid> {
    let post = MeanMixturePosterior::new(sample, *prior)?;
    grid_log_density(&post, prior, resolution)
}

/// Hyper-parameters and prior bounds stored next to a data CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSidecar {
    pub hyper: MixtureHyper,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorSquare>,
}

/// Writes one observation per line, using the shortest round-trip decimal form.
pub fn write_data_csv(path: &Path, data: &[f64]) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for x in data {
        writeln!(out, "{x}")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads one observation per line; blank lines and `#` comments are skipped.
pub fn read_data_csv(path: &Path) -> Result<Vec<f64>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut data = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let field = line.trim();
        if field.is_empty() || field.starts_with('#') {
            continue;
        }
        let x: f64 = field.parse().map_err(|_| {
            Error::Parse(format!(
                "{}:{}: not a number: {field:?}",
                path.display(),
                lineno + 1
            ))
        })?;
        if !x.is_finite() {
            return Err(Error::Parse(format!(
                "{}:{}: non-finite value",
                path.display(),
                lineno + 1
            )));
        }
        data.push(x);
    }
    Ok(data)
}

pub fn write_sidecar(path: &Path, sidecar: &SampleSidecar) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(sidecar)?)?;
    Ok(())
}

pub fn read_sidecar(path: &Path) -> Result<SampleSidecar> {
    let sidecar: SampleSidecar = serde_json::from_str(&fs::read_to_string(path)?)?;
    sidecar.hyper.validate()?;
    if let Some(prior) = &sidecar.prior {
        prior.validate()?;
    }
    Ok(sidecar)
}
