//! Experiment harness: instance generation, reconstruction metrics,
//! measurement sweeps, phase-transition grids, CSV persistence, and plot
//! rendering. Every run is a pure function of its config and master seed.

mod gen;
mod metrics;
mod phase;
mod plots;
mod records;
mod sweep;

pub use gen::{degrees_of_freedom, gen_low_rank, gen_operator, Problem, ProblemSpec};
pub use metrics::{snr_rec, SNR_CAP_DB};
pub use phase::{run_phase_transition, PhaseConfig, PhaseOutcome};
pub use plots::emit_plots;
pub use records::{parse_csv, render_csv, strip_wall_ms, write_csv, Algo, TrialRecord, CSV_HEADER};
pub use sweep::{run_sweep, CellSummary, SweepConfig, SweepOutcome, SweepSummary};
