//! Grid census of posterior modes and their basins of attraction.
//!
//! Cells are totally ordered by `(value, reverse row-major index)`, so ties
//! never leave a cell without a well-defined uphill neighbour and every
//! plateau collapses onto a single representative. Candidate modes are the
//! local maxima of that order over the 8-neighbourhood. A flooding pass
//! (highest cell first, union-find over 8-neighbours) records for each
//! candidate the saddle where it first meets a higher peak; candidates whose
//! height above that saddle is below `min_prominence` are folded into the
//! dominant peak. Basins follow steepest-ascent paths.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::target::{cell_centre, grid_log_posterior, ObservedSample, PriorSquare, Theta};

pub const DEFAULT_RESOLUTION: usize = 200;
pub const DEFAULT_MIN_PROMINENCE: f64 = 1.0;

/// Square grid of log-density values, row-major; rows index `μ₁`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogDensityGrid {
    resolution: usize,
    values: Vec<f64>,
}

impl LogDensityGrid {
    pub fn new(resolution: usize, values: Vec<f64>) -> Result<Self> {
        if resolution == 0 || values.len() != resolution * resolution {
            return invalid(format!(
                "{} values for a {resolution}x{resolution} grid",
                values.len()
            ));
        }
        if values.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return invalid("grid values must be finite or -inf");
        }
        Ok(Self { resolution, values })
    }

    /// Tabulates `f(row, col)`.
    pub fn from_fn(resolution: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let values = (0..resolution * resolution)
            .map(|k| f(k / resolution, k % resolution))
            .collect();
        Self::new(resolution, values)
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.resolution + col]
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Adds `c` to every cell.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            resolution: self.resolution,
            values: self.values.iter().map(|v| v + c).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub row: usize,
    pub col: usize,
    pub location: Theta,
    pub log_density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeCensus {
    /// Sorted by decreasing log-density.
    pub modes: Vec<Mode>,
    /// Mode index of every cell, row-major.
    pub basin_labels: Vec<usize>,
    pub resolution: usize,
    pub prior: PriorSquare,
}

impl ModeCensus {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Grid cell containing `theta`; the upper edge belongs to the last cell.
    pub fn cell_of(&self, theta: &Theta) -> Option<(usize, usize)> {
        if !self.prior.contains(theta) {
            return None;
        }
        let h = self.prior.width() / self.resolution as f64;
        let idx = |x: f64| (((x - self.prior.lo) / h).floor() as usize).min(self.resolution - 1);
        Some((idx(theta.mu1), idx(theta.mu2)))
    }

    pub fn basin_of_cell(&self, row: usize, col: usize) -> usize {
        self.basin_labels[row * self.resolution + col]
    }

    /// Writes the basin labels as CSV, one grid row per line.
    pub fn basins_csv(&self) -> String {
        let mut out = String::with_capacity(self.basin_labels.len() * 3);
        for row in self.basin_labels.chunks(self.resolution) {
            let line: Vec<String> = row.iter().map(|l| l.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionScore {
    pub detected: usize,
    pub total: usize,
    pub rate: f64,
    pub per_mode: Vec<bool>,
}

/// `true` when cell `a` ranks above cell `b`.
#[inline]
fn above(values: &[f64], a: usize, b: usize) -> bool {
    match values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => a < b,
    }
}

fn neighbours(res: usize, k: usize) -> impl Iterator<Item = (usize, f64)> {
    let (r, c) = ((k / res) as isize, (k % res) as isize);
    let res_i = res as isize;
    (-1isize..=1).flat_map(move |dr| {
        (-1isize..=1).filter_map(move |dc| {
            let (nr, nc) = (r + dr, c + dc);
            if (dr, dc) == (0, 0) || nr < 0 || nc < 0 || nr >= res_i || nc >= res_i {
                None
            } else {
                let dist = if dr != 0 && dc != 0 {
                    std::f64::consts::SQRT_2
                } else {
                    1.0
                };
                Some(((nr * res_i + nc) as usize, dist))
            }
        })
    })
}

/// Steepest-ascent successor of every cell (itself for local maxima).
fn ascent_pointers(grid: &LogDensityGrid) -> Vec<usize> {
    let res = grid.resolution;
    let v = &grid.values;
    (0..res * res)
        .into_par_iter()
        .with_min_len(256)
        .map(|k| {
            let mut best = k;
            let mut best_slope = f64::NEG_INFINITY;
            for (nb, dist) in neighbours(res, k) {
                if !above(v, nb, k) {
                    continue;
                }
                let slope = if v[k] == f64::NEG_INFINITY {
                    if v[nb] == f64::NEG_INFINITY {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    (v[nb] - v[k]) / dist
                };
                if best == k || slope > best_slope || (slope == best_slope && above(v, nb, best)) {
                    best = nb;
                    best_slope = slope;
                }
            }
            best
        })
        .collect()
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

/// Locates modes of `grid`, merging those less prominent than `min_prominence`.
pub fn find_modes(
    grid: &LogDensityGrid,
    prior: &PriorSquare,
    min_prominence: f64,
) -> Result<ModeCensus> {
    prior.validate()?;
    if !(min_prominence >= 0.0) {
        return invalid(format!(
            "min_prominence {min_prominence} must be non-negative"
        ));
    }
    let res = grid.resolution;
    let v = &grid.values;
    if v.iter().all(|x| *x == f64::NEG_INFINITY) {
        return Err(Error::EmptySurface);
    }
    let cells = res * res;
    let mut order: Vec<usize> = (0..cells).collect();
    order.sort_unstable_by(|&a, &b| {
        if above(v, a, b) {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    });

    const UNSEEN: usize = usize::MAX;
    let mut uf = UnionFind {
        parent: vec![UNSEEN; cells],
    };
    // Peak cell of each component root, and where each candidate peak was folded.
    let mut peak_of = vec![UNSEEN; cells];
    let mut absorbed_into = vec![UNSEEN; cells];
    let mut is_candidate = vec![false; cells];
    let mut roots: Vec<usize> = Vec::with_capacity(8);

    for &k in &order {
        roots.clear();
        for (nb, _) in neighbours(res, k) {
            if uf.parent[nb] != UNSEEN {
                let r = uf.find(nb);
                if !roots.contains(&r) {
                    roots.push(r);
                }
            }
        }
        if roots.is_empty() {
            uf.parent[k] = k;
            peak_of[k] = k;
            is_candidate[k] = true;
            continue;
        }
        roots.sort_by(|&a, &b| {
            if above(v, peak_of[a], peak_of[b]) {
                Ordering::Less
            } else {
                Ordering::Greater
            }
        });
        let dominant = roots[0];
        for &r in &roots[1..] {
            let lower = peak_of[r];
            let prominence = v[lower] - v[k];
            let keep = v[lower] != f64::NEG_INFINITY
                && (prominence >= min_prominence || prominence.is_nan());
            if !keep {
                absorbed_into[lower] = peak_of[dominant];
            }
            uf.parent[r] = dominant;
        }
        uf.parent[k] = dominant;
    }

    let resolve = |mut p: usize| {
        while absorbed_into[p] != UNSEEN {
            p = absorbed_into[p];
        }
        p
    };

    let mut survivors: Vec<usize> = (0..cells)
        .filter(|&k| is_candidate[k] && absorbed_into[k] == UNSEEN)
        .collect();
    survivors.sort_by(|&a, &b| {
        if above(v, a, b) {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    });
    let mut mode_index = vec![UNSEEN; cells];
    for (m, &k) in survivors.iter().enumerate() {
        mode_index[k] = m;
    }

    let next = ascent_pointers(grid);
    let mut terminal = vec![UNSEEN; cells];
    let mut path = Vec::new();
    for start in 0..cells {
        let mut k = start;
        while terminal[k] == UNSEEN && next[k] != k {
            path.push(k);
            k = next[k];
        }
        let end = if terminal[k] == UNSEEN {
            mode_index[resolve(k)]
        } else {
            terminal[k]
        };
        terminal[k] = end;
        for p in path.drain(..) {
            terminal[p] = end;
        }
    }

    let modes = survivors
        .iter()
        .map(|&k| {
            let (row, col) = (k / res, k % res);
            Mode {
                row,
                col,
                location: Theta::new(cell_centre(prior, res, row), cell_centre(prior, res, col)),
                log_density: v[k],
            }
        })
        .collect();
    Ok(ModeCensus {
        modes,
        basin_labels: terminal,
        resolution: res,
        prior: *prior,
    })
}

/// Mode whose basin contains `theta`, or `None` outside the square.
pub fn assign_basin(theta: &Theta, census: &ModeCensus) -> Option<usize> {
    census
        .cell_of(theta)
        .map(|(r, c)| census.basin_of_cell(r, c))
}

/// Counts a mode as detected when at least `min_particles` particles fall in its basin.
pub fn detection_score(
    particles: &[Theta],
    census: &ModeCensus,
    min_particles: usize,
) -> DetectionScore {
    let mut counts = vec![0usize; census.len()];
    for t in particles {
        if let Some(m) = assign_basin(t, census) {
            counts[m] += 1;
        }
    }
    let threshold = min_particles.max(1);
    let per_mode: Vec<bool> = counts.iter().map(|&c| c >= threshold).collect();
    let detected = per_mode.iter().filter(|&&d| d).count();
    let total = census.len();
    DetectionScore {
        detected,
        total,
        rate: if total == 0 {
            0.0
        } else {
            detected as f64 / total as f64
        },
        per_mode,
    }
}

/// Census of the benchmark posterior for one sample.
pub fn census_for_sample(
    sample: &ObservedSample,
    prior: &PriorSquare,
    resolution: usize,
    min_prominence: f64,
) -> Result<ModeCensus> {
    let grid = grid_log_posterior(sample, prior, resolution)?;
    find_modes(&grid, prior, min_prominence)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeCountStats {
    pub mean: f64,
    pub sd: f64,
    pub samples: usize,
}

/// Mean and sample standard deviation of the number of modes over samples.
/// With `prior = None` each sample uses the square around its own data.
pub fn mode_count_stats(
    samples: &[ObservedSample],
    prior: Option<PriorSquare>,
    resolution: usize,
    min_prominence: f64,
    margin: f64,
) -> Result<ModeCountStats> {
    if samples.len() < 2 {
        return invalid("mode-count statistics need at least two samples");
    }
    let counts = samples
        .iter()
        .map(|s| {
            let sq = match prior {
                Some(p) => p,
                None => PriorSquare::around_data(&s.data, margin)?,
            };
            census_for_sample(s, &sq, resolution, min_prominence).map(|c| c.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ModeCountStats {
        mean: crate::math::mean(&counts),
        sd: crate::math::sample_sd(&counts),
        samples: counts.len(),
    })
}
