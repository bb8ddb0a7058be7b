//! Flat trial records and their CSV persistence. The schema is frozen:
//! renaming or reordering columns breaks downstream parsing on purpose.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::gen::{Problem, ProblemSpec};

/// Algorithm whose output a record scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Icra,
    Nnm,
    Lgd,
}

impl Algo {
    pub fn label(self) -> &'static str {
        match self {
            Algo::Icra => "ICRA",
            Algo::Nnm => "NNM",
            Algo::Lgd => "LGD",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ICRA" | "icra" => Ok(Algo::Icra),
            "NNM" | "nnm" => Ok(Algo::Nnm),
            "LGD" | "lgd" => Ok(Algo::Lgd),
            other => Err(Error::Config(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// One scored solve. In sweep output `checkpoint` is the stage count the
/// estimate was taken at; in phase output it indexes the continuation
/// snapshot (0 = convex initialization).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub spec: ProblemSpec,
    pub algo: Algo,
    pub checkpoint: usize,
    pub snr_db: f64,
    pub success: bool,
    pub outer_iters: usize,
    pub inner_total: usize,
    pub wall_ms: u64,
}

impl TrialRecord {
    /// Deterministic row order: cell-major, trial(seed)-minor, then
    /// algorithm and checkpoint.
    pub fn sort_key(&self) -> (usize, usize, u64, Algo, usize) {
        (self.spec.r, self.spec.m, self.spec.seed, self.algo, self.checkpoint)
    }
}

/// Frozen column schema.
pub const CSV_HEADER: &str =
    "problem,algo,n1,n2,r,m,seed,checkpoint,snr_db,success,outer_iters,inner_total,wall_ms";

/// 17-significant-digit float encoding; round-trips every finite `f64` and
/// spells out the IEEE specials.
fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn parse_f64(s: &str, line: usize, col: &str) -> Result<f64> {
    match s {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        "NaN" => Ok(f64::NAN),
        _ => s.parse().map_err(|_| Error::Parse {
            line,
            msg: format!("column {col}: invalid float {s:?}"),
        }),
    }
}

fn parse_int<T: std::str::FromStr>(s: &str, line: usize, col: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("column {col}: invalid integer {s:?}"),
    })
}

/// Render records to the frozen CSV schema (header + one line per record).
pub fn render_csv(rows: &[TrialRecord]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.spec.problem.label(),
            r.algo.label(),
            r.spec.n1,
            r.spec.n2,
            r.spec.r,
            r.spec.m,
            r.spec.seed,
            r.checkpoint,
            fmt_f64(r.snr_db),
            r.success,
            r.outer_iters,
            r.inner_total,
            r.wall_ms
        );
    }
    out
}

/// Write records to `path` in the frozen CSV schema.
pub fn write_csv(path: &Path, rows: &[TrialRecord]) -> Result<()> {
    std::fs::write(path, render_csv(rows))?;
    Ok(())
}

/// Parse a CSV produced by [`write_csv`], with line/column diagnostics.
pub fn parse_csv(text: &str) -> Result<Vec<TrialRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        Some((_, h)) => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("header mismatch: expected {CSV_HEADER:?}, got {h:?}"),
            });
        }
        None => {
            return Err(Error::Parse {
                line: 1,
                msg: "empty file".into(),
            });
        }
    }
    let mut rows = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.is_empty() {
            continue;
        }
        let f: Vec<&str> = raw.split(',').collect();
        if f.len() != 13 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 13 columns, got {}", f.len()),
            });
        }
        let success = match f[9] {
            "true" => true,
            "false" => false,
            other => {
                return Err(Error::Parse {
                    line,
                    msg: format!("column success: invalid flag {other:?}"),
                });
            }
        };
        rows.push(TrialRecord {
            spec: ProblemSpec {
                problem: Problem::parse(f[0]).map_err(|e| Error::Parse {
                    line,
                    msg: format!("column problem: {e}"),
                })?,
                n1: parse_int(f[2], line, "n1")?,
                n2: parse_int(f[3], line, "n2")?,
                r: parse_int(f[4], line, "r")?,
                m: parse_int(f[5], line, "m")?,
                seed: parse_int(f[6], line, "seed")?,
            },
            algo: Algo::parse(f[1]).map_err(|e| Error::Parse {
                line,
                msg: format!("column algo: {e}"),
            })?,
            checkpoint: parse_int(f[7], line, "checkpoint")?,
            snr_db: parse_f64(f[8], line, "snr_db")?,
            success,
            outer_iters: parse_int(f[10], line, "outer_iters")?,
            inner_total: parse_int(f[11], line, "inner_total")?,
            wall_ms: parse_int(f[12], line, "wall_ms")?,
        });
    }
    Ok(rows)
}

/// Strip the wall-clock column: the canonical form used for determinism
/// comparisons.
pub fn strip_wall_ms(csv: &str) -> String {
    csv.lines()
        .map(|l| match l.rfind(',') {
            Some(i) => &l[..i],
            None => l,
        })
        .collect::<Vec<_>>()
        .join("\n")
}
