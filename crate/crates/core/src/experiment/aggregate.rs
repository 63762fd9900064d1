use serde::{Deserialize, Serialize};

use super::{CellCoord, CellResult};
use crate::error::{invalid, Result};
use crate::math::{mean, sample_sd};
use crate::pmc::Scheme;

/// A sweep coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    N,
    P,
    Mu2,
    Sigma2,
}

impl Field {
    pub fn name(&self) -> &'static str {
        match self {
            Field::N => "n",
            Field::P => "p",
            Field::Mu2 => "mu2",
            Field::Sigma2 => "sigma2",
        }
    }

    pub fn of(&self, c: &CellCoord) -> f64 {
        match self {
            Field::N => c.n as f64,
            Field::P => c.p,
            Field::Mu2 => c.mu2,
            Field::Sigma2 => c.sigma2,
        }
    }
}

/// The axis averaged out by [`marginalize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Capture rate against `μ₂`, averaged over `σ₂` (and `n`, `p`).
    Sigma2,
    /// Capture rate against `n`, averaged over `p` (and `μ₂`, `σ₂`).
    P,
}

impl Axis {
    pub fn key(&self) -> Field {
        match self {
            Axis::Sigma2 => Field::Mu2,
            Axis::P => Field::N,
        }
    }
}

/// Quantity tabulated per cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    ModeCount,
    Detection { scheme: Scheme, late: bool },
}

impl Metric {
    fn cell_mean(&self, c: &CellResult) -> f64 {
        match *self {
            Metric::ModeCount => c.mode_count.mean,
            Metric::Detection { scheme, late } => {
                c.scheme(scheme)
                    .map_or(f64::NAN, |s| if late { s.late.mean } else { s.early.mean })
            }
        }
    }

    fn replicate_values(&self, c: &CellResult) -> Vec<f64> {
        match *self {
            Metric::ModeCount => c
                .records
                .iter()
                .filter_map(|r| r.modes.map(|m| m as f64))
                .collect(),
            Metric::Detection { scheme, late } => c
                .records
                .iter()
                .filter_map(|r| r.outcome(scheme))
                .filter_map(|o| if late { o.late } else { o.early })
                .collect(),
        }
    }
}

fn distinct(cells: &[CellResult], f: Field) -> Vec<f64> {
    let mut v: Vec<f64> = cells.iter().map(|c| f.of(&c.coord)).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub scheme: Scheme,
    pub iteration: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveTable {
    pub axis: Axis,
    pub key: Field,
    pub keys: Vec<f64>,
    pub curves: Vec<Curve>,
}

impl CurveTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(self.key.name());
        for c in &self.curves {
            out.push_str(&format!(",{}_t{}", c.scheme.name(), c.iteration));
        }
        out.push('\n');
        for (k, key) in self.keys.iter().enumerate() {
            out.push_str(&key.to_string());
            for c in &self.curves {
                out.push_str(&format!(",{}", c.values[k]));
            }
            out.push('\n');
        }
        out
    }
}

/// Capture-rate curves with `axis` averaged out: the unweighted mean of
/// the cell means sharing each key value. One curve per scheme and per
/// scored iteration.
pub fn marginalize(
    cells: &[CellResult],
    axis: Axis,
    snapshot: usize,
    iterations: usize,
) -> Result<CurveTable> {
    if cells.is_empty() {
        return invalid("cannot marginalize an empty report");
    }
    let key = axis.key();
    let keys = distinct(cells, key);
    let mut curves = Vec::new();
    for s in &cells[0].schemes {
        for (late, iteration) in [(false, snapshot), (true, iterations)] {
            let metric = Metric::Detection {
                scheme: s.scheme,
                late,
            };
            let values = keys
                .iter()
                .map(|&k| {
                    let xs: Vec<f64> = cells
                        .iter()
                        .filter(|c| key.of(&c.coord) == k)
                        .map(|c| metric.cell_mean(c))
                        .collect();
                    mean(&xs)
                })
                .collect();
            curves.push(Curve {
                scheme: s.scheme,
                iteration,
                values,
            });
        }
    }
    Ok(CurveTable {
        axis,
        key,
        keys,
        curves,
    })
}

/// Two-way table in the layout of the paper's tables: rows and columns are
/// sweep coordinates; each entry averages the cell means over the remaining
/// coordinates, and its sd is taken over all pooled replicate values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WideTable {
    pub row_field: Field,
    pub col_field: Field,
    pub rows: Vec<f64>,
    pub cols: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub sds: Vec<Vec<f64>>,
}

impl WideTable {
    pub fn to_csv(&self, sd: bool) -> String {
        let body = if sd { &self.sds } else { &self.means };
        let mut out = format!("{}\\{}", self.row_field.name(), self.col_field.name());
        for c in &self.cols {
            out.push_str(&format!(",{c}"));
        }
        out.push('\n');
        for (r, row) in self.rows.iter().zip(body) {
            out.push_str(&r.to_string());
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

pub fn table_by(
    cells: &[CellResult],
    row_field: Field,
    col_field: Field,
    metric: Metric,
) -> Result<WideTable> {
    if cells.is_empty() {
        return invalid("cannot tabulate an empty report");
    }
    let rows = distinct(cells, row_field);
    let cols = distinct(cells, col_field);
    let mut means = vec![vec![f64::NAN; cols.len()]; rows.len()];
    let mut sds = vec![vec![f64::NAN; cols.len()]; rows.len()];
    for (i, &r) in rows.iter().enumerate() {
        for (j, &c) in cols.iter().enumerate() {
            let group: Vec<&CellResult> = cells
                .iter()
                .filter(|x| row_field.of(&x.coord) == r && col_field.of(&x.coord) == c)
                .collect();
            if group.is_empty() {
                continue;
            }
            let cell_means: Vec<f64> = group.iter().map(|x| metric.cell_mean(x)).collect();
            let pooled: Vec<f64> = group
                .iter()
                .flat_map(|x| metric.replicate_values(x))
                .collect();
            means[i][j] = mean(&cell_means);
            sds[i][j] = sample_sd(&pooled);
        }
    }
    Ok(WideTable {
        row_field,
        col_field,
        rows,
        cols,
        means,
        sds,
    })
}
