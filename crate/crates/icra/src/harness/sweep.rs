//! Measurement sweeps: paired-instance comparison of the solvers over a
//! grid of (rank, measurement-count) cells.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::gen::{self, Problem, ProblemSpec};
use crate::harness::metrics;
use crate::harness::records::{Algo, TrialRecord};
use crate::nnm::SplitSolverConfig;
use crate::seeding;
use crate::solver::{self, IcraConfig};

fn default_threshold() -> f64 {
    60.0
}

fn default_algos() -> Vec<Algo> {
    vec![Algo::Icra, Algo::Nnm, Algo::Lgd]
}

fn default_lgd_alpha() -> f64 {
    solver::DEFAULT_LGD_ALPHA
}

/// Sweep definition. Exactly one of `m_list` / `m_over_dr` selects the
/// measurement grid; ratios are rounded to counts and clamped to
/// `[d_r, n1·n2]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub problem: Problem,
    pub n1: usize,
    pub n2: usize,
    pub r_list: Vec<usize>,
    #[serde(default)]
    pub m_list: Option<Vec<usize>>,
    #[serde(default)]
    pub m_over_dr: Option<Vec<f64>>,
    pub trials: usize,
    #[serde(default = "default_algos")]
    pub algos: Vec<Algo>,
    #[serde(default = "default_threshold")]
    pub success_threshold_db: f64,
    #[serde(default = "default_lgd_alpha")]
    pub lgd_alpha: f64,
    /// Worker cap; `None` inherits the ambient thread pool.
    #[serde(default)]
    pub threads: Option<usize>,
    pub master_seed: u64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("need at least one trial per cell".into()));
        }
        if self.r_list.is_empty() {
            return Err(Error::Config("empty rank list".into()));
        }
        if self.algos.is_empty() {
            return Err(Error::Config("empty algorithm list".into()));
        }
        if !(self.success_threshold_db.is_finite()) {
            return Err(Error::Config("success threshold must be finite".into()));
        }
        match (&self.m_list, &self.m_over_dr) {
            (Some(_), Some(_)) => Err(Error::Config(
                "give either m_list or m_over_dr, not both".into(),
            )),
            (None, None) => Err(Error::Config("give one of m_list or m_over_dr".into())),
            (Some(ms), None) if ms.is_empty() => Err(Error::Config("empty m_list".into())),
            (None, Some(qs)) if qs.is_empty() => Err(Error::Config("empty m_over_dr".into())),
            (None, Some(qs)) if qs.iter().any(|&q| !(q.is_finite() && q >= 1.0)) => Err(
                Error::Config("m/d_r ratios must be finite and ≥ 1".into()),
            ),
            _ => self.cells().map(|_| ()),
        }
    }

    /// Expand the grid into validated `(r, m)` cells, ascending, deduplicated.
    pub fn cells(&self) -> Result<Vec<(usize, usize)>> {
        let mut cells = Vec::new();
        for &r in &self.r_list {
            let d_r = gen::degrees_of_freedom(self.n1, self.n2, r);
            let mut ms: Vec<usize> = match (&self.m_list, &self.m_over_dr) {
                (Some(ms), _) => ms.clone(),
                (_, Some(qs)) => qs
                    .iter()
                    .map(|q| ((q * d_r as f64).round() as usize).clamp(d_r, self.n1 * self.n2))
                    .collect(),
                _ => return Err(Error::Config("no measurement grid".into())),
            };
            ms.sort_unstable();
            ms.dedup();
            for m in ms {
                let spec = ProblemSpec {
                    problem: self.problem,
                    n1: self.n1,
                    n2: self.n2,
                    r,
                    m,
                    seed: 0,
                };
                spec.validate()?;
                cells.push((r, m));
            }
        }
        Ok(cells)
    }
}

/// Per-cell, per-algorithm aggregate.
#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub algo: Algo,
    pub r: usize,
    pub m: usize,
    pub m_over_dr: f64,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Means over trials that produced an estimate (NaN if none did).
    pub mean_snr_db: f64,
    pub mean_outer_iters: f64,
    pub mean_inner_total: f64,
    pub solver_failures: usize,
}

/// Run-level aggregate accompanying the row data.
#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub cells: Vec<CellSummary>,
    /// One tag per trial whose solver errored (the row still exists, scored
    /// as failure).
    pub failures: Vec<String>,
    /// Cells where the success count drops by ≥ 2 trials as m grows — more
    /// than one-trial sampling noise, worth inspecting.
    pub monotonicity_flags: Vec<String>,
}

/// Row data plus aggregates for one sweep.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<TrialRecord>,
    pub summary: SweepSummary,
}

/// Solve one generated instance with one algorithm; solver errors become
/// failure-scored records with a tag, never a panic or abort.
fn run_algo(
    algo: Algo,
    spec: ProblemSpec,
    x_true: &crate::linalg::DenseMatrix,
    op: &crate::operators::MeasurementOperator,
    b: &nalgebra::DVector<f64>,
    threshold_db: f64,
    lgd_alpha: f64,
) -> (TrialRecord, Option<String>) {
    let split = SplitSolverConfig::default();
    let started = Instant::now();
    let solved = match algo {
        Algo::Icra => solver::icra_solve(op, b, &IcraConfig::default()),
        Algo::Nnm => solver::nnm_solve_report(op, b, &split),
        Algo::Lgd => solver::lgd_solve(
            op,
            b,
            lgd_alpha,
            solver::DEFAULT_LGD_TOL,
            solver::DEFAULT_LGD_MAX_ITERS,
            &split,
        ),
    };
    let wall_ms = started.elapsed().as_millis() as u64;
    match solved.and_then(|rep| metrics::snr_rec(x_true, &rep.x_hat).map(|snr| (rep, snr))) {
        Ok((rep, snr_db)) => (
            TrialRecord {
                spec,
                algo,
                checkpoint: rep.outer_iters,
                snr_db,
                success: snr_db >= threshold_db,
                outer_iters: rep.outer_iters,
                inner_total: rep.inner_total(),
                wall_ms,
            },
            None,
        ),
        Err(e) => (
            TrialRecord {
                spec,
                algo,
                checkpoint: 0,
                snr_db: f64::NEG_INFINITY,
                success: false,
                outer_iters: 0,
                inner_total: 0,
                wall_ms,
            },
            Some(format!(
                "{} r={} m={} seed={}: {e}",
                algo.label(),
                spec.r,
                spec.m,
                spec.seed
            )),
        ),
    }
}

/// Generate the shared instance of one trial and score every configured
/// algorithm on it.
fn run_trial(cfg: &SweepConfig, r: usize, m: usize, trial: usize) -> Result<TrialRows> {
    let seed = seeding::child_seed(cfg.master_seed, &[r as u64, m as u64, trial as u64]);
    let x_true = gen::gen_low_rank(cfg.n1, cfg.n2, r, seeding::child_seed(seed, &[0]))?;
    let op = gen::gen_operator(cfg.problem, cfg.n1, cfg.n2, m, seeding::child_seed(seed, &[1]))?;
    let b = op.apply(&x_true)?;
    let spec = ProblemSpec {
        problem: cfg.problem,
        n1: cfg.n1,
        n2: cfg.n2,
        r,
        m,
        seed,
    };
    let mut rows = Vec::with_capacity(cfg.algos.len());
    let mut notes = Vec::new();
    for &algo in &cfg.algos {
        let (row, note) = run_algo(
            algo,
            spec,
            &x_true,
            &op,
            &b,
            cfg.success_threshold_db,
            cfg.lgd_alpha,
        );
        rows.push(row);
        notes.extend(note);
    }
    Ok(TrialRows { rows, notes })
}

struct TrialRows {
    rows: Vec<TrialRecord>,
    notes: Vec<String>,
}

/// Execute the full sweep: every `(cell, trial)` dispatched to the ambient
/// worker pool, rows merged in the canonical deterministic order.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    let cells = cfg.cells()?;
    let jobs: Vec<(usize, usize, usize)> = cells
        .iter()
        .flat_map(|&(r, m)| (0..cfg.trials).map(move |t| (r, m, t)))
        .collect();
    let regions: Vec<TrialRows> = jobs
        .par_iter()
        .map(|&(r, m, t)| run_trial(cfg, r, m, t))
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(regions.iter().map(|g| g.rows.len()).sum());
    let mut failures = Vec::new();
    for g in regions {
        rows.extend(g.rows);
        failures.extend(g.notes);
    }
    rows.sort_by_key(TrialRecord::sort_key);
    failures.sort();

    let summary = summarize(cfg, &cells, &rows, failures);
    Ok(SweepOutcome { rows, summary })
}

fn summarize(
    cfg: &SweepConfig,
    cells: &[(usize, usize)],
    rows: &[TrialRecord],
    failures: Vec<String>,
) -> SweepSummary {
    let mut out = Vec::new();
    for &algo in &cfg.algos {
        for &(r, m) in cells {
            let cell: Vec<&TrialRecord> = rows
                .iter()
                .filter(|t| t.algo == algo && t.spec.r == r && t.spec.m == m)
                .collect();
            let solved: Vec<&&TrialRecord> =
                cell.iter().filter(|t| t.snr_db.is_finite()).collect();
            let successes = cell.iter().filter(|t| t.success).count();
            let mean = |f: &dyn Fn(&TrialRecord) -> f64| {
                if solved.is_empty() {
                    f64::NAN
                } else {
                    solved.iter().map(|t| f(t)).sum::<f64>() / solved.len() as f64
                }
            };
            out.push(CellSummary {
                algo,
                r,
                m,
                m_over_dr: m as f64 / gen::degrees_of_freedom(cfg.n1, cfg.n2, r) as f64,
                trials: cell.len(),
                successes,
                success_rate: successes as f64 / cell.len().max(1) as f64,
                mean_snr_db: mean(&|t| t.snr_db),
                mean_outer_iters: mean(&|t| t.outer_iters as f64),
                mean_inner_total: mean(&|t| t.inner_total as f64),
                solver_failures: cell.len() - solved.len(),
            });
        }
    }
    let mut flags = Vec::new();
    for &algo in &cfg.algos {
        for &r in &cfg.r_list {
            let line: Vec<&CellSummary> = out
                .iter()
                .filter(|c| c.algo == algo && c.r == r)
                .collect();
            for w in line.windows(2) {
                if w[0].successes >= w[1].successes + 2 {
                    flags.push(format!(
                        "{} r={}: success count drops from {} (m={}) to {} (m={})",
                        algo.label(),
                        r,
                        w[0].successes,
                        w[0].m,
                        w[1].successes,
                        w[1].m
                    ));
                }
            }
        }
    }
    SweepSummary {
        cells: out,
        failures,
        monotonicity_flags: flags,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::records;

    fn tiny_cfg() -> SweepConfig {
        SweepConfig {
            problem: Problem::Mc,
            n1: 6,
            n2: 6,
            r_list: vec![1],
            m_list: Some(vec![36]),
            m_over_dr: None,
            trials: 1,
            algos: vec![Algo::Icra],
            success_threshold_db: 60.0,
            lgd_alpha: solver::DEFAULT_LGD_ALPHA,
            threads: None,
            master_seed: 11,
        }
    }

    #[test]
    fn fully_observed_single_trial_succeeds() {
        let out = run_sweep(&tiny_cfg()).unwrap();
        assert_eq!(out.rows.len(), 1);
        assert!(out.rows[0].success);
        assert!(out.rows[0].snr_db >= 60.0);
        assert!(out.summary.failures.is_empty());
        assert_eq!(out.summary.cells.len(), 1);
        assert_eq!(out.summary.cells[0].success_rate, 1.0);
    }

    #[test]
    fn rows_cover_the_grid_and_rates_match_counts() {
        let mut cfg = tiny_cfg();
        cfg.m_list = Some(vec![22, 36]);
        cfg.trials = 3;
        cfg.algos = vec![Algo::Icra, Algo::Nnm];
        let out = run_sweep(&cfg).unwrap();
        assert_eq!(out.rows.len(), 2 * 3 * 2);
        for cell in &out.summary.cells {
            assert_eq!(cell.trials, 3);
            let manual = out
                .rows
                .iter()
                .filter(|t| t.algo == cell.algo && t.spec.m == cell.m && t.success)
                .count();
            assert_eq!(cell.successes, manual);
            assert_eq!(cell.success_rate, manual as f64 / 3.0);
        }
        // Paired instances: same (r, m, trial) seed regardless of algorithm.
        for pair in out.rows.chunks(2) {
            if pair.len() == 2 && pair[0].spec.m == pair[1].spec.m {
                assert_eq!(pair[0].spec.seed, pair[1].spec.seed);
            }
        }
    }

    #[test]
    fn sweep_is_deterministic_modulo_wall_clock() {
        let mut cfg = tiny_cfg();
        cfg.m_list = Some(vec![24, 36]);
        cfg.trials = 2;
        let a = records::render_csv(&run_sweep(&cfg).unwrap().rows);
        let b = records::render_csv(&run_sweep(&cfg).unwrap().rows);
        assert_eq!(records::strip_wall_ms(&a), records::strip_wall_ms(&b));
    }

    #[test]
    fn ratio_grid_respects_the_information_floor() {
        let mut cfg = tiny_cfg();
        cfg.m_list = None;
        cfg.m_over_dr = Some(vec![1.0, 2.0, 4.0]);
        let cells = cfg.cells().unwrap();
        // d_r = 11 for n = 6, r = 1; 4·d_r = 44 clamps to 36.
        assert_eq!(cells, vec![(1, 11), (1, 22), (1, 36)]);
        for &(r, m) in &cells {
            assert!(m >= gen::degrees_of_freedom(6, 6, r));
        }
    }

    #[test]
    fn config_validation_rejects_malformed_grids() {
        let mut cfg = tiny_cfg();
        cfg.trials = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = tiny_cfg();
        cfg.m_over_dr = Some(vec![1.5]);
        assert!(cfg.validate().is_err(), "both grids given");

        let mut cfg = tiny_cfg();
        cfg.m_list = None;
        assert!(cfg.validate().is_err(), "no grid given");

        let mut cfg = tiny_cfg();
        cfg.m_list = Some(vec![5]);
        assert!(cfg.validate().is_err(), "below d_r");

        let mut cfg = tiny_cfg();
        cfg.m_list = None;
        cfg.m_over_dr = Some(vec![0.5]);
        assert!(cfg.validate().is_err(), "ratio below 1");
    }

    #[test]
    fn config_parses_from_toml_with_defaults() {
        let text = r#"
            problem = "mc"
            n1 = 6
            n2 = 6
            r_list = [1, 2]
            m_over_dr = [1.2, 2.0]
            trials = 4
            master_seed = 3
        "#;
        let cfg: SweepConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.algos, vec![Algo::Icra, Algo::Nnm, Algo::Lgd]);
        assert_eq!(cfg.success_threshold_db, 60.0);
        assert!(cfg.validate().is_ok());
        assert!(toml::from_str::<SweepConfig>("problem = \"mc\"").is_err());
    }
}
