//! Experiment runner behind the `hrf` binary: loads experiment configs, runs
//! the boundary, distance-sweep, min-bits and FIM-validation experiments, and
//! renders their tables as CSV and SVG.

pub mod config;
pub mod error;
pub mod experiments;
pub mod plot;
pub mod table;

use std::path::Path;

use config::{ExperimentConfig, ExperimentKind};
pub use error::{CliError, Result};
use plot::{emit_plot, PlotKind};
use table::ResultTable;

/// Files of one run, in emission order, with the failure counts that decide
/// the exit status.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub files: Vec<(String, String)>,
    pub tables: Vec<ResultTable>,
    /// Rows whose solve did not reach optimality.
    pub solver_failures: usize,
    /// Validation rows that did not pass.
    pub failed_checks: usize,
}

pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput {
        files: Vec::new(),
        tables: Vec::new(),
        solver_failures: 0,
        failed_checks: 0,
    };
    let add = |out: &mut RunOutput, t: ResultTable, plot: Option<PlotKind>| -> Result<()> {
        out.files.push((format!("{}.csv", t.name), t.to_csv_string()));
        if let Some(kind) = plot {
            out.files.push((format!("{}.svg", t.name), emit_plot(&t, kind)?));
        }
        out.tables.push(t);
        Ok(())
    };
    match cfg.kind {
        ExperimentKind::Boundary => {
            let t = experiments::run_boundary(cfg)?;
            out.solver_failures = experiments::solver_failures(&t)?;
            add(&mut out, t, Some(PlotKind::Boundary))?;
        }
        ExperimentKind::DistanceSweep => {
            let t = experiments::run_distance_sweep(cfg)?;
            out.solver_failures = experiments::solver_failures(&t)?;
            add(&mut out, t, Some(PlotKind::DistanceSweep))?;
        }
        ExperimentKind::MinBits => {
            let t = experiments::run_min_bits(cfg)?;
            let steps = experiments::staircase(&t)?;
            add(&mut out, t, Some(PlotKind::MinBits))?;
            add(&mut out, steps, None)?;
        }
        ExperimentKind::ValidateFim => {
            let t = experiments::run_validate_fim(cfg)?;
            out.failed_checks = experiments::failed_checks(&t)?;
            add(&mut out, t, None)?;
        }
    }
    Ok(out)
}

pub fn write_outputs(dir: &Path, run: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, body) in &run.files {
        std::fs::write(dir.join(name), body)?;
    }
    Ok(())
}
