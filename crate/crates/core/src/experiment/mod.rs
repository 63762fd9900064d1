//! Factorial sweep over `(n, p, μ₂, σ₂)` comparing PMC schemes on shared samples.
//!
//! Each replicate of a cell generates one artificial sample, builds one mode
//! census for it and then runs every configured scheme on that same sample,
//! scoring the resampled clouds at the snapshot iteration and at `T`.
//! Replicates are independent work items spread over a bounded rayon pool;
//! their random streams depend only on `(seed, cell, replicate, scheme,
//! stage)`, so the report is identical for any worker count.
//!
//! CPU times are measured per PMC run on the executing thread. They vary
//! between runs, so they are kept out of `report.json` and written to
//! `timing.json` and `tables/cpu_by_n.csv` instead.

mod aggregate;
mod output;
mod plot;

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Config, InitKind, ModeSettings, PmcSettings, SweepAxes};
use crate::error::{invalid, Error, Result};
use crate::kernel::KernelMixture;
use crate::math::{mean, sample_sd};
use crate::modefinder::{census_for_sample, detection_score, ModeCensus};
use crate::pmc::{run_pmc, InitialProposal, PmcConfig, Scheme};
use crate::rng::{fnv1a, stage, substream};
use crate::target::{
    generate_artificial_sample, MeanMixturePosterior, MixtureHyper, ObservedSample, PriorSquare,
};
use crate::timing::timed;

pub use aggregate::{marginalize, table_by, Axis, Curve, CurveTable, Field, Metric, WideTable};
pub use output::{write_outputs, OutputPaths};
pub use plot::{plot_svg, render_plots};

/// Everything a sweep needs; the `run` section of a [`Config`] is ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub seed: u64,
    pub axes: SweepAxes,
    pub pmc: PmcSettings,
    pub modes: ModeSettings,
}

impl From<&Config> for SweepConfig {
    fn from(c: &Config) -> Self {
        Self {
            seed: c.seed,
            axes: c.sweep.clone(),
            pmc: c.pmc.clone(),
            modes: c.modes.clone(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let c = Config {
            seed: self.seed,
            sweep: self.axes.clone(),
            pmc: self.pmc.clone(),
            modes: self.modes.clone(),
            run: Default::default(),
        };
        c.validate()
    }

    /// Cells in report order: σ₂, then μ₂, then p, then n.
    pub fn cells(&self) -> Vec<CellCoord> {
        let a = &self.axes;
        let mut out = Vec::with_capacity(
            a.n_values.len() * a.p_values.len() * a.mu2_values.len() * a.sigma2_values.len(),
        );
        for &sigma2 in &a.sigma2_values {
            for &mu2 in &a.mu2_values {
                for &p in &a.p_values {
                    for &n in &a.n_values {
                        out.push(CellCoord { n, p, mu2, sigma2 });
                    }
                }
            }
        }
        out
    }

    fn pmc_config(&self, scheme: Scheme) -> PmcConfig {
        let mut c = PmcConfig::new(scheme, self.pmc.particles, self.pmc.iterations);
        c.double_rb_alpha = self.pmc.double_rb_alpha;
        c.alpha_floor = self.pmc.alpha_floor;
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellCoord {
    pub n: usize,
    pub p: f64,
    pub mu2: f64,
    pub sigma2: f64,
}

impl CellCoord {
    /// Stream label derived from the coordinates, not from the cell's position.
    pub fn key(&self) -> u64 {
        let mut bytes = Vec::with_capacity(32);
        bytes.extend_from_slice(&(self.n as u64).to_le_bytes());
        for v in [self.p, self.mu2, self.sigma2] {
            bytes.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        fnv1a(&bytes)
    }
}

impl std::fmt::Display for CellCoord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "n={} p={} mu2={} sigma2={}",
            self.n, self.p, self.mu2, self.sigma2
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        Self {
            mean: mean(xs),
            sd: sample_sd(xs),
        }
    }
}

/// One scheme's result on one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeOutcome {
    pub scheme: Scheme,
    /// Detection rate at the snapshot iteration and at `T`; `None` on failure.
    pub early: Option<f64>,
    pub late: Option<f64>,
    pub error: Option<String>,
    #[serde(skip)]
    pub cpu_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub modes: Option<usize>,
    pub error: Option<String>,
    pub outcomes: Vec<SchemeOutcome>,
}

impl ReplicateRecord {
    pub fn outcome(&self, scheme: Scheme) -> Option<&SchemeOutcome> {
        self.outcomes.iter().find(|o| o.scheme == scheme)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSummary {
    pub scheme: Scheme,
    pub early: Stat,
    pub late: Stat,
    pub failures: usize,
    #[serde(skip)]
    pub cpu: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub coord: CellCoord,
    pub replicates: usize,
    /// `false` when fewer than two replicates succeeded and every sd is 0.
    pub sd_defined: bool,
    pub mode_count: Stat,
    pub schemes: Vec<SchemeSummary>,
    /// Replicates whose sample or census could not be built.
    pub failures: usize,
    pub records: Vec<ReplicateRecord>,
}

impl CellResult {
    pub fn scheme(&self, scheme: Scheme) -> Option<&SchemeSummary> {
        self.schemes.iter().find(|s| s.scheme == scheme)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub complete: bool,
    pub cells: Vec<CellResult>,
    pub by_mu2: Option<CurveTable>,
    pub by_n: Option<CurveTable>,
}

impl SweepReport {
    /// Per-replicate differences `rate(a) − rate(b)` over every replicate where both succeeded.
    pub fn paired_differences(&self, a: Scheme, b: Scheme, late: bool) -> Vec<f64> {
        let pick = |o: &SchemeOutcome| if late { o.late } else { o.early };
        self.cells
            .iter()
            .flat_map(|c| &c.records)
            .filter_map(|r| Some(pick(r.outcome(a)?)? - pick(r.outcome(b)?)?))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report always serializes")
    }
}

/// Build the shared sample, prior and census for one replicate.
pub fn replicate_sample(
    coord: &CellCoord,
    replicate: usize,
    config: &SweepConfig,
) -> Result<(ObservedSample, PriorSquare, ModeCensus)> {
    let mut rng = substream(config.seed, &[coord.key(), replicate as u64, stage::DATA]);
    let data = generate_artificial_sample(coord.n, coord.mu2, &mut rng)?;
    let hyper = MixtureHyper::new(coord.p, config.axes.sigma1, coord.sigma2)?;
    let prior = PriorSquare::around_data(&data, config.modes.prior_margin)?;
    let sample = ObservedSample::new(data, hyper)?;
    let census = census_for_sample(
        &sample,
        &prior,
        config.modes.resolution,
        config.modes.min_prominence,
    )?;
    Ok((sample, prior, census))
}

fn run_scheme(
    scheme: Scheme,
    coord: &CellCoord,
    replicate: usize,
    sample: &ObservedSample,
    prior: &PriorSquare,
    census: &ModeCensus,
    config: &SweepConfig,
) -> SchemeOutcome {
    let attempt = || -> Result<(f64, f64, f64)> {
        let target = MeanMixturePosterior::new(sample, *prior)?;
        let mix = KernelMixture::uniform(&config.pmc.scales)?;
        let init = match config.pmc.init {
            InitKind::Gaussian => InitialProposal::gaussian_over(prior),
            InitKind::Flat => InitialProposal::Flat { square: *prior },
        };
        let pmc = config.pmc_config(scheme);
        let mut rng = substream(
            config.seed,
            &[
                coord.key(),
                replicate as u64,
                scheme.stream_label(),
                stage::PMC,
            ],
        );
        let (run, secs) = timed(|| run_pmc(&target, &init, &mix, &pmc, &mut rng));
        let run = run?;
        let k = config.modes.min_particles;
        let score = |t: usize| -> Result<f64> {
            let cloud = run
                .snapshot(t)
                .ok_or_else(|| Error::InvalidArgument(format!("no snapshot at t={t}")))?;
            Ok(detection_score(&cloud.particles, census, k).rate)
        };
        Ok((
            score(config.pmc.snapshot)?,
            score(config.pmc.iterations)?,
            secs,
        ))
    };
    match attempt() {
        Ok((early, late, cpu_seconds)) => SchemeOutcome {
            scheme,
            early: Some(early),
            late: Some(late),
            error: None,
            cpu_seconds,
        },
        Err(e) => SchemeOutcome {
            scheme,
            early: None,
            late: None,
            error: Some(e.to_string()),
            cpu_seconds: 0.0,
        },
    }
}

/// One replicate: shared sample and census, then every configured scheme.
pub fn run_replicate(coord: &CellCoord, replicate: usize, config: &SweepConfig) -> ReplicateRecord {
    match replicate_sample(coord, replicate, config) {
        Ok((sample, prior, census)) => ReplicateRecord {
            replicate,
            modes: Some(census.len()),
            error: None,
            outcomes: config
                .pmc
                .schemes
                .iter()
                .map(|&s| run_scheme(s, coord, replicate, &sample, &prior, &census, config))
                .collect(),
        },
        Err(e) => {
            log::warn!("{coord} replicate {replicate}: {e}");
            ReplicateRecord {
                replicate,
                modes: None,
                error: Some(e.to_string()),
                outcomes: Vec::new(),
            }
        }
    }
}

/// Aggregates replicate records into a cell summary.
pub fn summarize_cell(
    coord: CellCoord,
    records: Vec<ReplicateRecord>,
    schemes: &[Scheme],
) -> CellResult {
    let modes: Vec<f64> = records
        .iter()
        .filter_map(|r| r.modes.map(|m| m as f64))
        .collect();
    let failures = records.iter().filter(|r| r.modes.is_none()).count();
    let mut min_ok = modes.len();
    let summaries = schemes
        .iter()
        .map(|&scheme| {
            let outs: Vec<&SchemeOutcome> =
                records.iter().filter_map(|r| r.outcome(scheme)).collect();
            let early: Vec<f64> = outs.iter().filter_map(|o| o.early).collect();
            let late: Vec<f64> = outs.iter().filter_map(|o| o.late).collect();
            let cpu: Vec<f64> = outs
                .iter()
                .filter(|o| o.error.is_none())
                .map(|o| o.cpu_seconds)
                .collect();
            min_ok = min_ok.min(late.len());
            SchemeSummary {
                scheme,
                early: Stat::of(&early),
                late: Stat::of(&late),
                failures: records.len() - late.len(),
                cpu: Stat::of(&cpu),
            }
        })
        .collect();
    CellResult {
        coord,
        replicates: records.len(),
        sd_defined: min_ok >= 2,
        mode_count: Stat::of(&modes),
        schemes: summaries,
        failures,
        records,
    }
}

/// Runs every replicate of one cell sequentially.
pub fn run_cell(coord: CellCoord, config: &SweepConfig) -> Result<CellResult> {
    config.validate()?;
    let records = (0..config.axes.replicates)
        .map(|r| run_replicate(&coord, r, config))
        .collect();
    Ok(summarize_cell(coord, records, &config.pmc.schemes))
}

/// Called once per finished cell with `(cells done, cells total, cell)`.
pub type ProgressFn<'a> = dyn Fn(usize, usize, &CellCoord) + Sync + 'a;

#[derive(Default)]
pub struct SweepOptions<'a> {
    /// Worker threads; `None` uses the available parallelism.
    pub workers: Option<usize>,
    /// Set to stop starting new replicates; finished cells are kept.
    pub cancel: Option<&'a AtomicBool>,
    pub progress: Option<&'a ProgressFn<'a>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeTiming {
    pub scheme: Scheme,
    pub cpu_seconds: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTiming {
    pub coord: CellCoord,
    pub schemes: Vec<SchemeTiming>,
}

/// Timing data kept apart from the deterministic report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub workers: usize,
    pub wall_seconds: f64,
    pub cells: Vec<CellTiming>,
}

impl TimingReport {
    pub fn from_cells(cells: &[CellResult], workers: usize, wall_seconds: f64) -> Self {
        Self {
            workers,
            wall_seconds,
            cells: cells
                .iter()
                .map(|c| CellTiming {
                    coord: c.coord,
                    schemes: c
                        .schemes
                        .iter()
                        .map(|s| SchemeTiming {
                            scheme: s.scheme,
                            cpu_seconds: s.cpu,
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    /// Mean and sd of per-run CPU seconds for each `n`, per scheme, pooled over cells.
    pub fn cpu_by_n(cells: &[CellResult], schemes: &[Scheme]) -> Vec<(usize, Vec<Stat>)> {
        let mut ns: Vec<usize> = cells.iter().map(|c| c.coord.n).collect();
        ns.sort_unstable();
        ns.dedup();
        ns.into_iter()
            .map(|n| {
                let stats = schemes
                    .iter()
                    .map(|&s| {
                        let xs: Vec<f64> = cells
                            .iter()
                            .filter(|c| c.coord.n == n)
                            .flat_map(|c| &c.records)
                            .filter_map(|r| r.outcome(s))
                            .filter(|o| o.error.is_none())
                            .map(|o| o.cpu_seconds)
                            .collect();
                        Stat::of(&xs)
                    })
                    .collect();
                (n, stats)
            })
            .collect()
    }
}

pub struct SweepOutcome {
    pub report: SweepReport,
    pub timing: TimingReport,
}

/// Runs the whole factorial sweep.
pub fn run_sweep(config: &SweepConfig, options: &SweepOptions<'_>) -> Result<SweepOutcome> {
    config.validate()?;
    let workers = options
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        return invalid("worker count must be positive");
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;

    let cells = config.cells();
    let reps = config.axes.replicates;
    let remaining: Vec<AtomicUsize> = cells.iter().map(|_| AtomicUsize::new(reps)).collect();
    let done_cells = AtomicUsize::new(0);
    let cancelled = || options.cancel.is_some_and(|c| c.load(Ordering::Relaxed));
    let started = std::time::Instant::now();

    let records: Vec<Option<ReplicateRecord>> = pool.install(|| {
        (0..cells.len() * reps)
            .into_par_iter()
            .with_max_len(1)
            .map(|item| {
                let (ci, r) = (item / reps, item % reps);
                if cancelled() {
                    return None;
                }
                let rec = run_replicate(&cells[ci], r, config);
                if remaining[ci].fetch_sub(1, Ordering::AcqRel) == 1 {
                    let k = done_cells.fetch_add(1, Ordering::AcqRel) + 1;
                    if let Some(progress) = options.progress {
                        progress(k, cells.len(), &cells[ci]);
                    }
                }
                Some(rec)
            })
            .collect()
    });

    let mut results = Vec::with_capacity(cells.len());
    let mut complete = true;
    for (ci, chunk) in records.chunks(reps.max(1)).enumerate() {
        if chunk.iter().any(Option::is_none) {
            complete = false;
            continue;
        }
        let recs = chunk.iter().flatten().cloned().collect();
        results.push(summarize_cell(cells[ci], recs, &config.pmc.schemes));
    }
    let wall_seconds = started.elapsed().as_secs_f64();
    let timing = TimingReport::from_cells(&results, workers, wall_seconds);
    let by_mu2 = marginalize(
        &results,
        Axis::Sigma2,
        config.pmc.snapshot,
        config.pmc.iterations,
    )
    .ok();
    let by_n = marginalize(
        &results,
        Axis::P,
        config.pmc.snapshot,
        config.pmc.iterations,
    )
    .ok();
    let report = SweepReport {
        config: config.clone(),
        complete,
        cells: results,
        by_mu2,
        by_n,
    };
    Ok(SweepOutcome { report, timing })
}
