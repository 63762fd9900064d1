//! TOML configuration shared by the library entry points and the CLI.
//!
//! Every field has a default, so an empty file is a valid configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::DEFAULT_SCALES;
use crate::modefinder::{DEFAULT_MIN_PROMINENCE, DEFAULT_RESOLUTION};
use crate::pmc::{DoubleRbAlpha, Scheme, DEFAULT_ALPHA_FLOOR};

pub const DEFAULT_SEED: u64 = 20_100_101;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    /// Gaussian at the square centre, sd a quarter of the width.
    #[default]
    Gaussian,
    /// Uniform on the prior square.
    Flat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepAxes {
    pub n_values: Vec<usize>,
    pub p_values: Vec<f64>,
    pub mu2_values: Vec<f64>,
    pub sigma2_values: Vec<f64>,
    pub sigma1: f64,
    pub replicates: usize,
}

fn steps(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let k = ((hi - lo) / step).round() as usize;
    (0..=k)
        .map(|i| ((lo + i as f64 * step) * 1e9).round() / 1e9)
        .collect()
}

impl Default for SweepAxes {
    fn default() -> Self {
        Self {
            n_values: vec![20, 30, 40, 50, 100, 500, 1000],
            p_values: steps(0.1, 0.6, 0.1),
            mu2_values: steps(1.0, 5.0, 0.5),
            sigma2_values: steps(1.0, 5.0, 0.5),
            sigma1: 1.0,
            replicates: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PmcSettings {
    pub particles: usize,
    pub iterations: usize,
    /// Earlier iteration at which detection is also scored.
    pub snapshot: usize,
    pub scales: Vec<f64>,
    pub alpha_floor: f64,
    pub double_rb_alpha: DoubleRbAlpha,
    pub init: InitKind,
    /// Schemes compared by the sweep.
    pub schemes: Vec<Scheme>,
}

impl Default for PmcSettings {
    fn default() -> Self {
        Self {
            particles: 1000,
            iterations: 10,
            snapshot: 5,
            scales: DEFAULT_SCALES.to_vec(),
            alpha_floor: DEFAULT_ALPHA_FLOOR,
            double_rb_alpha: DoubleRbAlpha::Marginalized,
            init: InitKind::Gaussian,
            schemes: vec![Scheme::SingleRb, Scheme::DoubleRb],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModeSettings {
    pub resolution: usize,
    pub min_prominence: f64,
    /// Particles needed in a basin for its mode to count as detected.
    pub min_particles: usize,
    /// Distance added around the data range to build the prior square.
    pub prior_margin: f64,
}

impl Default for ModeSettings {
    fn default() -> Self {
        Self {
            resolution: DEFAULT_RESOLUTION,
            min_prominence: DEFAULT_MIN_PROMINENCE,
            min_particles: 1,
            prior_margin: 2.0,
        }
    }
}

/// A single fit, as driven by `rbpmc run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    pub n: usize,
    pub p: f64,
    pub mu2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub scheme: Scheme,
    /// Observations to fit instead of a generated sample.
    pub data: Option<PathBuf>,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            n: 100,
            p: 0.3,
            mu2: 3.0,
            sigma1: 1.0,
            sigma2: 1.0,
            scheme: Scheme::DoubleRb,
            data: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub sweep: SweepAxes,
    pub pmc: PmcSettings,
    pub modes: ModeSettings,
    pub run: RunSettings,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            sweep: SweepAxes::default(),
            pmc: PmcSettings::default(),
            modes: ModeSettings::default(),
            run: RunSettings::default(),
        }
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.sweep;
        if s.n_values.is_empty()
            || s.p_values.is_empty()
            || s.mu2_values.is_empty()
            || s.sigma2_values.is_empty()
        {
            return invalid("every sweep axis needs at least one value");
        }
        if s.replicates < 1 {
            return invalid("replicates must be at least 1");
        }
        if s.n_values.contains(&0) {
            return invalid("sample sizes must be positive");
        }
        if s.p_values.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
            return invalid("p values must lie in (0, 1)");
        }
        if s.mu2_values.iter().any(|m| !m.is_finite()) {
            return invalid("mu2 values must be finite");
        }
        if !(s.sigma1 > 0.0) || s.sigma2_values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return invalid("standard deviations must be positive");
        }
        self.validate_pmc()?;
        self.validate_modes()?;
        self.validate_run()
    }

    pub fn validate_pmc(&self) -> Result<()> {
        let p = &self.pmc;
        if p.particles < 2 {
            return invalid(format!("need at least 2 particles, got {}", p.particles));
        }
        if p.iterations < 1 {
            return invalid("need at least one PMC iteration");
        }
        if p.snapshot < 1 || p.snapshot > p.iterations {
            return invalid(format!(
                "snapshot {} outside 1..={}",
                p.snapshot, p.iterations
            ));
        }
        if p.scales.is_empty() || p.scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return invalid("kernel scales must be positive and finite");
        }
        if !(0.0..=1.0).contains(&p.alpha_floor) {
            return invalid(format!("alpha floor {} outside [0, 1]", p.alpha_floor));
        }
        if p.schemes.is_empty() {
            return invalid("at least one scheme must be compared");
        }
        Ok(())
    }

    pub fn validate_modes(&self) -> Result<()> {
        let m = &self.modes;
        if m.resolution < 2 {
            return invalid("grid resolution must be at least 2");
        }
        if !(m.min_prominence >= 0.0) {
            return invalid("min_prominence must be non-negative");
        }
        if !(m.prior_margin >= 0.0 && m.prior_margin.is_finite()) {
            return invalid("prior_margin must be non-negative");
        }
        Ok(())
    }

    pub fn validate_run(&self) -> Result<()> {
        let r = &self.run;
        if r.data.is_none() && r.n == 0 {
            return invalid("the data generator needs n >= 1");
        }
        crate::target::MixtureHyper::new(r.p, r.sigma1, r.sigma2)?;
        Ok(())
    }
}
