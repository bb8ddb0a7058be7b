//! Deterministic SVG rendering of sweep curves and phase-transition grids.
//! Identical CSV bytes in, identical SVG bytes out — no timestamps, no
//! ambient state.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::harness::gen::{degrees_of_freedom, Problem};
use crate::harness::records::{parse_csv, Algo, TrialRecord};

const W: f64 = 640.0;
const H: f64 = 440.0;
const ML: f64 = 70.0;
const MR: f64 = 70.0;
const MT: f64 = 40.0;
const MB: f64 = 56.0;
const PW: f64 = W - ML - MR;
const PH: f64 = H - MT - MB;

fn color(algo: Algo) -> &'static str {
    match algo {
        Algo::Icra => "#1f77b4",
        Algo::Nnm => "#d62728",
        Algo::Lgd => "#2ca02c",
    }
}

fn fx(v: f64) -> String {
    format!("{v:.2}")
}

fn svg_open(out: &mut String) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\" font-family=\"monospace\" font-size=\"12\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    );
}

fn axes(out: &mut String) {
    let _ = write!(
        out,
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        fx(ML),
        fx(MT),
        fx(PW),
        fx(PH)
    );
}

fn text(out: &mut String, x: f64, y: f64, anchor: &str, s: &str) {
    let _ = write!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"{anchor}\">{s}</text>\n",
        fx(x),
        fx(y)
    );
}

/// Rows describe a phase grid when one instance carries several rows
/// (one per checkpoint); a sweep scores each instance exactly once.
fn is_phase(rows: &[TrialRecord]) -> bool {
    let mut seen = HashSet::new();
    rows.iter()
        .any(|t| !seen.insert((t.spec.problem, t.algo, t.spec.r, t.spec.m, t.spec.seed)))
}

fn render_empty() -> String {
    let mut out = String::new();
    svg_open(&mut out);
    axes(&mut out);
    text(&mut out, W / 2.0, H / 2.0, "middle", "no data");
    out.push_str("</svg>\n");
    out
}

fn render_sweep(problem: Problem, r: usize, rows: &[TrialRecord]) -> String {
    let (n1, n2) = (rows[0].spec.n1, rows[0].spec.n2);
    let d_r = degrees_of_freedom(n1, n2, r) as f64;
    let ms: BTreeSet<usize> = rows.iter().map(|t| t.spec.m).collect();
    let algos: BTreeSet<Algo> = rows.iter().map(|t| t.algo).collect();

    // Per-algo success-rate and mean-iteration points over m/d_r.
    let mut rate_series: BTreeMap<Algo, Vec<(f64, f64)>> = BTreeMap::new();
    let mut iter_series: BTreeMap<Algo, Vec<(f64, f64)>> = BTreeMap::new();
    for &algo in &algos {
        for &m in &ms {
            let cell: Vec<&TrialRecord> = rows
                .iter()
                .filter(|t| t.algo == algo && t.spec.m == m)
                .collect();
            let ratio = m as f64 / d_r;
            let rate =
                cell.iter().filter(|t| t.success).count() as f64 / cell.len().max(1) as f64;
            rate_series.entry(algo).or_default().push((ratio, rate));
            let solved: Vec<f64> = cell
                .iter()
                .filter(|t| t.snr_db.is_finite())
                .map(|t| t.inner_total as f64)
                .collect();
            if !solved.is_empty() {
                let mean = solved.iter().sum::<f64>() / solved.len() as f64;
                iter_series.entry(algo).or_default().push((ratio, mean));
            }
        }
    }

    let x0 = ms.iter().next().map(|&m| m as f64 / d_r).unwrap_or(1.0) - 0.05;
    let x1 = ms.iter().last().map(|&m| m as f64 / d_r).unwrap_or(2.0) + 0.05;
    let span = if x1 > x0 { x1 - x0 } else { 1.0 };
    let iter_max = iter_series
        .values()
        .flatten()
        .map(|p| p.1)
        .fold(5.0, f64::max);
    let iter_max = (iter_max / 5.0).ceil() * 5.0;
    let px = |t: f64| ML + (t - x0) / span * PW;
    let py_rate = |v: f64| MT + (1.0 - v) * PH;
    let py_iter = |v: f64| MT + (1.0 - v / iter_max) * PH;

    let mut out = String::new();
    svg_open(&mut out);
    axes(&mut out);
    text(
        &mut out,
        ML,
        MT - 14.0,
        "start",
        &format!("{} {n1}x{n2} rank {r}: recovery vs measurement budget", problem.label()),
    );

    // x ticks at each measured ratio; y ticks fixed.
    for &m in &ms {
        let t = m as f64 / d_r;
        let x = px(t);
        let _ = write!(
            out,
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n",
            fx(x),
            fx(MT + PH),
            fx(MT + PH + 5.0)
        );
        text(&mut out, x, MT + PH + 20.0, "middle", &fx(t));
    }
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        text(&mut out, ML - 8.0, py_rate(v) + 4.0, "end", &fx(v));
        text(
            &mut out,
            W - MR + 8.0,
            py_iter(v * iter_max) + 4.0,
            "start",
            &fx(v * iter_max),
        );
    }
    text(&mut out, ML + PW / 2.0, H - 16.0, "middle", "m / d_r");
    text(&mut out, ML - 46.0, MT - 8.0, "start", "rate");
    text(&mut out, W - MR + 8.0, MT - 8.0, "start", "iters");

    let polyline = |out: &mut String, pts: &[(f64, f64)], y: &dyn Fn(f64) -> f64, c: &str, dash: &str| {
        if pts.is_empty() {
            return;
        }
        let path: Vec<String> = pts
            .iter()
            .map(|&(t, v)| format!("{},{}", fx(px(t)), fx(y(v))))
            .collect();
        let _ = write!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{c}\"{dash}/>\n",
            path.join(" ")
        );
    };
    let mut legend_x = ML + 8.0;
    for &algo in &algos {
        let c = color(algo);
        if let Some(pts) = rate_series.get(&algo) {
            polyline(&mut out, pts, &py_rate, c, " stroke-width=\"2\"");
            for &(t, v) in pts {
                let _ = write!(
                    out,
                    "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{c}\"/>\n",
                    fx(px(t)),
                    fx(py_rate(v))
                );
            }
        }
        if let Some(pts) = iter_series.get(&algo) {
            polyline(&mut out, pts, &py_iter, c, " stroke-dasharray=\"5,4\"");
        }
        let _ = write!(
            out,
            "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{c}\"/>\n",
            fx(legend_x),
            fx(MT + 6.0)
        );
        text(&mut out, legend_x + 14.0, MT + 15.0, "start", algo.label());
        legend_x += 76.0;
    }
    text(
        &mut out,
        ML + 8.0,
        MT + PH - 8.0,
        "start",
        "solid: success rate, dashed: mean inner iterations",
    );
    out.push_str("</svg>\n");
    out
}

fn render_phase(problem: Problem, cp: usize, rows: &[TrialRecord]) -> String {
    let (n1, n2) = (rows[0].spec.n1, rows[0].spec.n2);
    let ambient = (n1 * n2) as f64;
    // (r, m) → (successes, trials)
    let mut cells: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
    for t in rows {
        let e = cells.entry((t.spec.r, t.spec.m)).or_insert((0, 0));
        e.0 += t.success as usize;
        e.1 += 1;
    }
    let ranks: BTreeSet<usize> = cells.keys().map(|k| k.0).collect();
    let nr = ranks.len() as f64;
    let row_of: BTreeMap<usize, usize> =
        ranks.iter().enumerate().map(|(i, &r)| (r, i)).collect();

    let mut out = String::new();
    svg_open(&mut out);
    text(
        &mut out,
        ML,
        MT - 14.0,
        "start",
        &format!(
            "{} phase grid n={n1}, checkpoint {cp} (white = full recovery)",
            problem.label()
        ),
    );
    let px = |m: f64| ML + m / ambient * PW;
    let band = PH / nr;
    for (&r, &idx) in &row_of {
        // Cell width from this rank's own m spacing.
        let ms: Vec<usize> = cells.keys().filter(|k| k.0 == r).map(|k| k.1).collect();
        let w_m = if ms.len() > 1 {
            ms.windows(2).map(|w| w[1] - w[0]).min().unwrap() as f64
        } else {
            ambient / 20.0
        };
        let y = MT + idx as f64 * band;
        for &m in &ms {
            let (s, t) = cells[&(r, m)];
            let rate = s as f64 / t.max(1) as f64;
            let lum = (rate * 255.0).round() as u8;
            let x_left = (px(m as f64) - w_m / ambient * PW / 2.0).max(ML);
            let w_px = (w_m / ambient * PW).min(W - MR - x_left);
            let _ = write!(
                out,
                "<rect class=\"cell\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" \
                 fill=\"rgb({lum},{lum},{lum})\" stroke=\"#999\" stroke-width=\"0.5\"/>\n",
                fx(x_left),
                fx(y),
                fx(w_px),
                fx(band)
            );
        }
        text(&mut out, ML - 8.0, y + band / 2.0 + 4.0, "end", &r.to_string());
    }
    axes(&mut out);
    for k in 0..=4 {
        let m = ambient * k as f64 / 4.0;
        text(
            &mut out,
            px(m),
            MT + PH + 20.0,
            "middle",
            &format!("{}", m.round() as usize),
        );
    }
    text(&mut out, ML + PW / 2.0, H - 16.0, "middle", "measurements m");
    text(&mut out, ML - 46.0, MT - 8.0, "start", "rank");
    out.push_str("</svg>\n");
    out
}

/// Render every figure the rows support, as `(file name, svg body)` pairs in
/// deterministic order.
pub(crate) fn render_all(rows: &[TrialRecord]) -> Vec<(String, String)> {
    if rows.is_empty() {
        return vec![("empty.svg".into(), render_empty())];
    }
    let mut files = Vec::new();
    if is_phase(rows) {
        let keys: BTreeSet<(Problem, usize)> = rows
            .iter()
            .map(|t| (t.spec.problem, t.checkpoint))
            .collect();
        for (problem, cp) in keys {
            let subset: Vec<TrialRecord> = rows
                .iter()
                .filter(|t| t.spec.problem == problem && t.checkpoint == cp)
                .copied()
                .collect();
            files.push((
                format!("phase_{}_cp{}.svg", problem.label(), cp),
                render_phase(problem, cp, &subset),
            ));
        }
    } else {
        let keys: BTreeSet<(Problem, usize)> =
            rows.iter().map(|t| (t.spec.problem, t.spec.r)).collect();
        for (problem, r) in keys {
            let subset: Vec<TrialRecord> = rows
                .iter()
                .filter(|t| t.spec.problem == problem && t.spec.r == r)
                .copied()
                .collect();
            files.push((
                format!("sweep_{}_r{}.svg", problem.label(), r),
                render_sweep(problem, r, &subset),
            ));
        }
    }
    files
}

/// Parse a results CSV and write one SVG per figure into `out_dir`.
/// Returns the written paths in deterministic order.
pub fn emit_plots(csv_path: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(csv_path)?;
    let rows = parse_csv(&text)?;
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for (name, svg) in render_all(&rows) {
        let path = out_dir.join(name);
        std::fs::write(&path, svg)?;
        written.push(path);
    }
    Ok(written)
}
