mod args;
mod manifest;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use anyhow::{Context, Result};
use chrono::Utc;
use clap::Parser;
use serde::Serialize;

use rbpmc::config::{Config, InitKind};
use rbpmc::experiment::{self, SweepConfig, SweepOptions};
use rbpmc::modefinder::{census_for_sample, Mode};
use rbpmc::pmc::{run_pmc, InitialProposal, PmcConfig, PmcDiagnostics};
use rbpmc::rng::{stage, substream};
use rbpmc::target::{self, MeanMixturePosterior, SampleSidecar};
use rbpmc::{KernelMixture, MixtureHyper, ObservedSample, PriorSquare, Theta};

use args::{Cli, Command, ModesArgs, PlotArgs, RunArgs, Shared, SweepArgs};
use manifest::RunManifest;

const EXIT_USAGE: u8 = 2;
const EXIT_DEGENERATE: u8 = 3;
const EXIT_IO: u8 = 4;

/// Marks an error as a configuration or input problem (exit 2).
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(e: impl std::fmt::Display) -> anyhow::Error {
    Usage(e.to_string()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return EXIT_USAGE;
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<rbpmc::Error>() {
            return match e {
                rbpmc::Error::InvalidArgument(_)
                | rbpmc::Error::Domain(_)
                | rbpmc::Error::Parse(_) => EXIT_USAGE,
                rbpmc::Error::InitializationFailure
                | rbpmc::Error::DegenerateCloud { .. }
                | rbpmc::Error::EmptySurface => EXIT_DEGENERATE,
                rbpmc::Error::Io(_) | rbpmc::Error::Json(_) => EXIT_IO,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some()
            || cause.downcast_ref::<serde_json::Error>().is_some()
        {
            return EXIT_IO;
        }
    }
    1
}

/// Effective configuration plus the flag overrides that produced it.
struct Setup {
    config: Config,
    overrides: BTreeMap<String, String>,
    started: chrono::DateTime<Utc>,
}

impl Setup {
    fn load(shared: &Shared) -> Result<Self> {
        let started = Utc::now();
        let mut config = match &shared.config {
            Some(path) => {
                Config::load(path).map_err(|e| usage(format!("config {}: {e}", path.display())))?
            }
            None => Config::default(),
        };
        let mut overrides = BTreeMap::new();
        if let Some(seed) = shared.seed {
            config.seed = seed;
            overrides.insert("seed".into(), seed.to_string());
        }
        if let Some(scheme) = shared.scheme {
            config.run.scheme = scheme;
            config.pmc.schemes = vec![scheme];
            overrides.insert("scheme".into(), scheme.to_string());
        }
        if let Some(t) = shared.threads {
            if t == 0 {
                return Err(usage("--threads must be positive"));
            }
            overrides.insert("threads".into(), t.to_string());
        }
        Ok(Self {
            config,
            overrides,
            started,
        })
    }

    fn set<T: ToString>(
        &mut self,
        key: &str,
        value: Option<T>,
        apply: impl FnOnce(&mut Config, T),
    ) {
        if let Some(v) = value {
            self.overrides.insert(key.into(), v.to_string());
            apply(&mut self.config, v);
        }
    }

    fn manifest(&self, command: &str, shared: &Shared) -> RunManifest {
        RunManifest::new(
            command,
            &self.config,
            shared.config.clone(),
            self.overrides.clone(),
            self.started,
        )
    }
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        b = b.num_threads(t);
    }
    b.build().map_err(usage)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

#[derive(Serialize)]
struct RunArtifact<'a> {
    scheme: String,
    particles: usize,
    iterations: usize,
    hyper: MixtureHyper,
    prior: PriorSquare,
    n: usize,
    alpha: &'a [f64],
    scales: Vec<f64>,
    weighted_mean: Theta,
    diagnostics: &'a PmcDiagnostics,
}

fn cmd_run(shared: &Shared, args: &RunArgs) -> Result<()> {
    let mut setup = Setup::load(shared)?;
    setup.set(
        "data",
        args.data.as_ref().map(|p| p.display().to_string()),
        |c, v| c.run.data = Some(v.into()),
    );
    setup.set("n", args.n, |c, v| c.run.n = v);
    setup.set("p", args.p, |c, v| c.run.p = v);
    setup.set("mu2", args.mu2, |c, v| c.run.mu2 = v);
    setup.set("sigma2", args.sigma2, |c, v| c.run.sigma2 = v);
    setup.set("particles", args.particles, |c, v| c.pmc.particles = v);
    setup.set("iterations", args.iterations, |c, v| {
        c.pmc.iterations = v;
        c.pmc.snapshot = c.pmc.snapshot.min(v);
    });
    let cfg = &setup.config;
    cfg.validate_run().map_err(usage)?;
    cfg.validate_pmc().map_err(usage)?;
    cfg.validate_modes().map_err(usage)?;
    if shared.dry_run {
        println!("{}", cfg.to_toml_string());
        return Ok(());
    }

    let r = &cfg.run;
    let data = match &r.data {
        Some(path) => target::read_data_csv(path).map_err(usage)?,
        None => target::generate_artificial_sample(
            r.n,
            r.mu2,
            &mut substream(cfg.seed, &[stage::DATA]),
        )?,
    };
    let hyper = MixtureHyper::new(r.p, r.sigma1, r.sigma2).map_err(usage)?;
    let prior = PriorSquare::around_data(&data, cfg.modes.prior_margin)?;
    let sample = ObservedSample::new(data, hyper).map_err(usage)?;
    let posterior = MeanMixturePosterior::new(&sample, prior)?;
    let mix = KernelMixture::uniform(&cfg.pmc.scales).map_err(usage)?;
    let init = match cfg.pmc.init {
        InitKind::Gaussian => InitialProposal::gaussian_over(&prior),
        InitKind::Flat => InitialProposal::Flat { square: prior },
    };
    let mut pmc = PmcConfig::new(r.scheme, cfg.pmc.particles, cfg.pmc.iterations);
    pmc.double_rb_alpha = cfg.pmc.double_rb_alpha;
    pmc.alpha_floor = cfg.pmc.alpha_floor;
    pmc.parallel = shared.threads.is_some_and(|t| t > 1);

    let mut rng = substream(cfg.seed, &[r.scheme.stream_label(), stage::PMC]);
    let run = pool(shared.threads)?.install(|| run_pmc(&posterior, &init, &mix, &pmc, &mut rng))?;
    log::info!(
        "{} PMC: N={} T={} final ESS {:.1}",
        r.scheme,
        pmc.particles,
        pmc.iterations,
        run.diagnostics.ess.last().copied().unwrap_or(f64::NAN)
    );

    let out = &shared.out_dir;
    create_dir(out)?;
    let mut manifest = setup.manifest("run", shared);
    let data_path = out.join("data.csv");
    target::write_data_csv(&data_path, &sample.data)?;
    let sidecar_path = out.join("data.json");
    target::write_sidecar(
        &sidecar_path,
        &SampleSidecar {
            hyper,
            prior: Some(prior),
        },
    )?;
    let artifact = RunArtifact {
        scheme: r.scheme.to_string(),
        particles: pmc.particles,
        iterations: pmc.iterations,
        hyper,
        prior,
        n: sample.len(),
        alpha: run.final_mixture.alpha(),
        scales: run.final_mixture.scales(),
        weighted_mean: run.final_cloud.weighted_mean(),
        diagnostics: &run.diagnostics,
    };
    let run_path = out.join("run.json");
    std::fs::write(&run_path, serde_json::to_string_pretty(&artifact)?)?;
    let cloud_path = out.join("particles.csv");
    let mut csv = String::from("mu1,mu2,weight\n");
    for (t, w) in run
        .final_cloud
        .particles
        .iter()
        .zip(&run.final_cloud.norm_weights)
    {
        csv.push_str(&format!("{},{},{}\n", t.mu1, t.mu2, w));
    }
    std::fs::write(&cloud_path, csv)?;
    manifest.artifacts = vec![data_path, sidecar_path, run_path, cloud_path];
    manifest.finish(out, true)?;
    Ok(())
}

#[derive(Serialize)]
struct CensusArtifact<'a> {
    resolution: usize,
    min_prominence: f64,
    prior: PriorSquare,
    hyper: MixtureHyper,
    n: usize,
    modes: &'a [Mode],
}

fn cmd_modes(shared: &Shared, args: &ModesArgs) -> Result<()> {
    let mut setup = Setup::load(shared)?;
    setup.set("data", Some(args.data.display().to_string()), |c, v| {
        c.run.data = Some(v.into())
    });
    setup.set("p", args.p, |c, v| c.run.p = v);
    setup.set("sigma2", args.sigma2, |c, v| c.run.sigma2 = v);
    setup.set("resolution", args.resolution, |c, v| c.modes.resolution = v);
    setup.set("min_prominence", args.min_prominence, |c, v| {
        c.modes.min_prominence = v
    });
    let data = target::read_data_csv(&args.data).map_err(usage)?;
    let sidecar = match &args.sidecar {
        Some(p) => Some(target::read_sidecar(p).map_err(usage)?),
        None => None,
    };
    if let Some(s) = &sidecar {
        setup.config.run.p = s.hyper.p;
        setup.config.run.sigma1 = s.hyper.sigma1;
        setup.config.run.sigma2 = s.hyper.sigma2;
    }
    let cfg = &setup.config;
    cfg.validate_modes().map_err(usage)?;
    let r = &cfg.run;
    let hyper = MixtureHyper::new(r.p, r.sigma1, r.sigma2).map_err(usage)?;
    let prior = match sidecar.and_then(|s| s.prior) {
        Some(p) => p,
        None => PriorSquare::around_data(&data, cfg.modes.prior_margin)?,
    };
    if shared.dry_run {
        println!(
            "census of {} observations on [{}, {}]^2 at {}x{}",
            data.len(),
            prior.lo,
            prior.hi,
            cfg.modes.resolution,
            cfg.modes.resolution
        );
        return Ok(());
    }
    let sample = ObservedSample::new(data, hyper).map_err(usage)?;
    let census = pool(shared.threads)?.install(|| {
        census_for_sample(
            &sample,
            &prior,
            cfg.modes.resolution,
            cfg.modes.min_prominence,
        )
    })?;
    log::info!("{} modes", census.len());

    let out = &shared.out_dir;
    create_dir(out)?;
    let mut manifest = setup.manifest("modes", shared);
    let artifact = CensusArtifact {
        resolution: census.resolution,
        min_prominence: cfg.modes.min_prominence,
        prior,
        hyper,
        n: sample.len(),
        modes: &census.modes,
    };
    let census_path = out.join("census.json");
    std::fs::write(&census_path, serde_json::to_string_pretty(&artifact)?)?;
    let basins_path = out.join("basins.csv");
    std::fs::write(&basins_path, census.basins_csv())?;
    manifest.artifacts = vec![census_path, basins_path];
    manifest.finish(out, true)?;
    Ok(())
}

fn cmd_sweep(shared: &Shared, args: &SweepArgs) -> Result<()> {
    let mut setup = Setup::load(shared)?;
    setup.set("replicates", args.replicates, |c, v| c.sweep.replicates = v);
    setup.set("particles", args.particles, |c, v| c.pmc.particles = v);
    let sweep = SweepConfig::from(&setup.config);
    sweep.validate().map_err(usage)?;
    let cells = sweep.cells();
    if shared.dry_run {
        println!(
            "{} cells x {} replicates",
            cells.len(),
            sweep.axes.replicates
        );
        for c in &cells {
            println!("{c}");
        }
        return Ok(());
    }

    let out = shared.out_dir.clone();
    create_dir(&out)?;
    let cancel = Arc::new(AtomicBool::new(false));
    {
        let cancel = Arc::clone(&cancel);
        if let Err(e) = ctrlc::set_handler(move || cancel.store(true, Ordering::SeqCst)) {
            log::warn!("interrupt handler not installed: {e}");
        }
    }
    let progress = |k: usize, total: usize, cell: &experiment::CellCoord| {
        log::info!("cell {k}/{total} done: {cell}")
    };
    let options = SweepOptions {
        workers: shared.threads,
        cancel: Some(&cancel),
        progress: Some(&progress),
    };
    log::info!(
        "sweep: {} cells x {} replicates",
        cells.len(),
        sweep.axes.replicates
    );
    let outcome = experiment::run_sweep(&sweep, &options)?;
    let complete = outcome.report.complete;
    if !complete {
        log::warn!(
            "interrupted: {} of {} cells finished",
            outcome.report.cells.len(),
            cells.len()
        );
    }
    let mut manifest = setup.manifest("sweep", shared);
    let written = experiment::write_outputs(&outcome, &out);
    if let Ok(paths) = &written {
        manifest.artifacts = paths.all();
    }
    manifest.finish(&out, complete && written.is_ok())?;
    written?;
    Ok(())
}

fn cmd_plot(shared: &Shared, args: &PlotArgs) -> Result<()> {
    let setup = Setup::load(shared)?;
    let text = std::fs::read_to_string(&args.report)
        .with_context(|| format!("reading {}", args.report.display()))?;
    let report: experiment::SweepReport = serde_json::from_str(&text).map_err(usage)?;
    if shared.dry_run {
        println!("{} cells", report.cells.len());
        return Ok(());
    }
    let out = &shared.out_dir;
    create_dir(out)?;
    let mut manifest = setup.manifest("plot", shared);
    let mut artifacts: Vec<PathBuf> =
        experiment::render_plots(&report, &out.join("plots")).map_err(usage)?;
    for curve in [&report.by_mu2, &report.by_n].into_iter().flatten() {
        let path = out.join(format!("capture_vs_{}.csv", curve.key.name()));
        std::fs::write(&path, curve.to_csv())?;
        artifacts.push(path);
    }
    manifest.artifacts = artifacts;
    manifest.finish(out, true)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.shared.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(&cli.shared, a),
        Command::Modes(a) => cmd_modes(&cli.shared, a),
        Command::Sweep(a) => cmd_sweep(&cli.shared, a),
        Command::Plot(a) => cmd_plot(&cli.shared, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
