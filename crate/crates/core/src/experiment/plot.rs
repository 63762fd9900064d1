use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::aggregate::{CurveTable, Field};
use super::SweepReport;
use crate::error::{invalid, Result};
use crate::pmc::Scheme;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

fn colour(s: Scheme) -> &'static str {
    match s {
        Scheme::Naive => "#2ca02c",
        Scheme::SingleRb => "#1f77b4",
        Scheme::DoubleRb => "#d62728",
    }
}

/// Line chart of capture rate against the table key, one polyline per curve.
/// `n` is drawn on a log scale.
pub fn plot_svg(table: &CurveTable) -> Result<String> {
    if table.keys.is_empty() || table.curves.is_empty() {
        return invalid("nothing to plot");
    }
    let log_x = table.key == Field::N && table.keys.iter().all(|k| *k > 0.0);
    let tx = |k: f64| if log_x { k.ln() } else { k };
    let (x0, x1) = (tx(table.keys[0]), tx(*table.keys.last().unwrap()));
    let span = if x1 > x0 { x1 - x0 } else { 1.0 };
    let px = |k: f64| LEFT + (tx(k) - x0) / span * (W - LEFT - RIGHT);
    let py = |v: f64| TOP + (1.0 - v.clamp(0.0, 1.0)) * (H - TOP - BOTTOM);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let (bx, by) = (H - BOTTOM, W - RIGHT);
    let _ = writeln!(
        s,
        r#"<path d="M{LEFT} {TOP} V{bx} H{by}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let v = i as f64 / 4.0;
        let y = py(v);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{by}" y2="{y:.2}" stroke="#dddddd"/>"##
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"#,
            LEFT - 6.0,
            y + 4.0
        );
    }
    for &k in &table.keys {
        let x = px(k);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{k}</text>"#,
            bx + 18.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (LEFT + by) / 2.0,
        H - 8.0,
        table.key.name()
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" transform="rotate(-90 14 {:.2})" text-anchor="middle">capture rate</text>"#,
        (TOP + bx) / 2.0,
        (TOP + bx) / 2.0
    );

    let last_iteration = table.curves.iter().map(|c| c.iteration).max().unwrap_or(0);
    for (i, c) in table.curves.iter().enumerate() {
        let dash = if c.iteration == last_iteration {
            ""
        } else {
            r#" stroke-dasharray="6 4""#
        };
        let pts: Vec<String> = table
            .keys
            .iter()
            .zip(&c.values)
            .filter(|(_, v)| v.is_finite())
            .map(|(&k, &v)| format!("{:.2},{:.2}", px(k), py(v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="curve" points="{}" fill="none" stroke="{}" stroke-width="2"{dash}/>"#,
            pts.join(" "),
            colour(c.scheme)
        );
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = W - RIGHT + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"{dash}/>"#,
            lx + 24.0,
            colour(c.scheme)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}">{} t={}</text>"#,
            lx + 30.0,
            ly + 4.0,
            c.scheme.name(),
            c.iteration
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Writes `capture_vs_mu2.svg` and `capture_vs_n.svg` into `dir`.
pub fn render_plots(report: &SweepReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let (Some(mu2), Some(n)) = (&report.by_mu2, &report.by_n) else {
        return invalid("report has no marginal curves");
    };
    let files = [
        ("capture_vs_mu2.svg", plot_svg(mu2)?),
        ("capture_vs_n.svg", plot_svg(n)?),
    ];
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        out.push(path);
    }
    Ok(out)
}
