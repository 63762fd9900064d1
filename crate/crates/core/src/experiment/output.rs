use std::path::{Path, PathBuf};

use super::aggregate::{table_by, Field, Metric};
use super::{render_plots, SweepOutcome, TimingReport};
use crate::error::Result;

/// Files produced by [`write_outputs`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputPaths {
    pub report: PathBuf,
    pub timing: PathBuf,
    pub tables: Vec<PathBuf>,
    pub plots: Vec<PathBuf>,
}

impl OutputPaths {
    pub fn all(&self) -> Vec<PathBuf> {
        let mut v = vec![self.report.clone(), self.timing.clone()];
        v.extend(self.tables.iter().cloned());
        v.extend(self.plots.iter().cloned());
        v
    }
}

fn put(dir: &Path, name: &str, body: &str, list: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, body)?;
    list.push(path);
    Ok(())
}

/// Writes `report.json`, `timing.json`, `tables/*.csv` and `plots/*.svg`
/// under `out_dir`. Tables and plots are skipped when no cell finished.
pub fn write_outputs(outcome: &SweepOutcome, out_dir: &Path) -> Result<OutputPaths> {
    let report = &outcome.report;
    std::fs::create_dir_all(out_dir)?;
    let mut paths = OutputPaths {
        report: out_dir.join("report.json"),
        timing: out_dir.join("timing.json"),
        ..Default::default()
    };
    std::fs::write(&paths.report, report.to_json())?;
    std::fs::write(
        &paths.timing,
        serde_json::to_string_pretty(&outcome.timing)?,
    )?;
    if report.cells.is_empty() {
        return Ok(paths);
    }

    let tables = out_dir.join("tables");
    std::fs::create_dir_all(&tables)?;
    let cells = &report.cells;
    let mut layouts = vec![(
        "mode_counts".to_string(),
        Field::Sigma2,
        Field::Mu2,
        Metric::ModeCount,
    )];
    let iterations = [
        (false, report.config.pmc.snapshot),
        (true, report.config.pmc.iterations),
    ];
    for scheme in &report.config.pmc.schemes {
        for (late, t) in iterations {
            let metric = Metric::Detection {
                scheme: *scheme,
                late,
            };
            let stem = format!("detection_{}_t{t}", scheme.name());
            layouts.push((
                format!("{stem}_sigma2_mu2"),
                Field::Sigma2,
                Field::Mu2,
                metric,
            ));
            layouts.push((format!("{stem}_p_n"), Field::P, Field::N, metric));
        }
    }
    for (stem, rows, cols, metric) in layouts {
        let t = table_by(cells, rows, cols, metric)?;
        put(
            &tables,
            &format!("{stem}.csv"),
            &t.to_csv(false),
            &mut paths.tables,
        )?;
        put(
            &tables,
            &format!("{stem}_sd.csv"),
            &t.to_csv(true),
            &mut paths.tables,
        )?;
    }
    for curve in [&report.by_mu2, &report.by_n].into_iter().flatten() {
        let name = format!("capture_vs_{}.csv", curve.key.name());
        put(&tables, &name, &curve.to_csv(), &mut paths.tables)?;
    }

    let schemes = &report.config.pmc.schemes;
    let mut cpu = String::from("n");
    for s in schemes {
        cpu.push_str(&format!(",{0}_mean,{0}_sd", s.name()));
    }
    cpu.push('\n');
    for (n, stats) in TimingReport::cpu_by_n(cells, schemes) {
        cpu.push_str(&n.to_string());
        for st in stats {
            cpu.push_str(&format!(",{},{}", st.mean, st.sd));
        }
        cpu.push('\n');
    }
    put(&tables, "cpu_by_n.csv", &cpu, &mut paths.tables)?;

    paths.plots = render_plots(report, &out_dir.join("plots"))?;
    Ok(paths)
}
