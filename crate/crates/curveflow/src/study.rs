//! Dependence of the dissipation multiplier `lambda0` on the time increment.

use std::fs;
use std::path::PathBuf;
use std::thread;

use curveflow_core::TimeStepping;

use crate::config::{RunConfig, SchemeKind};
use crate::output::fmt_f64;
use crate::runner::{self, RunError};

pub const TABLE_HEADER: &str = "i,dt,max_abs_lambda0,steps,termination";

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub i: u32,
    pub dt: f64,
    pub max_abs_lambda0: f64,
    pub steps: usize,
    pub termination: String,
}

#[derive(Debug, thiserror::Error)]
pub enum StudyError {
    #[error("lambda study needs scheme willmore_tv, got {0}")]
    WrongScheme(SchemeKind),
    #[error("lambda study needs uniform time stepping")]
    NotUniform,
    #[error("run i={i} failed: {source}")]
    Run { i: u32, source: RunError },
    #[error("run i={i} stopped early ({termination})")]
    Incomplete { i: u32, termination: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// `T / (100 * 2^i)`.
pub fn study_dt(t_end: f64, i: u32) -> f64 {
    t_end / (100.0 * 2f64.powi(i as i32))
}

pub fn case_config(base: &RunConfig, i: u32) -> RunConfig {
    RunConfig {
        stepping: TimeStepping::Uniform {
            dt: study_dt(base.t_end, i),
        },
        output_dir: base.output_dir.join(format!("i_{i}")),
        ..base.clone()
    }
}

pub fn table_path(base: &RunConfig) -> PathBuf {
    base.output_dir.join("lambda_study.csv")
}

/// Runs `i = 0..=imax` concurrently, one output subdirectory per case, and
/// writes the table of completed cases. The first failing case, if any, is
/// returned as the error after the partial table is written.
pub fn lambda_study(base: &RunConfig, imax: u32) -> Result<Vec<StudyRow>, StudyError> {
    if base.scheme != SchemeKind::WillmoreTv {
        return Err(StudyError::WrongScheme(base.scheme));
    }
    if !matches!(base.stepping, TimeStepping::Uniform { .. }) {
        return Err(StudyError::NotUniform);
    }
    let results: Vec<Result<StudyRow, StudyError>> = thread::scope(|scope| {
        let handles: Vec<_> = (0..=imax)
            .map(|i| {
                let cfg = case_config(base, i);
                scope.spawn(move || run_case(&cfg, i))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("study case panicked"))
            .collect()
    });

    let mut rows = Vec::new();
    let mut first_error = None;
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    write_table(base, &rows)?;
    match first_error {
        Some(e) => Err(e),
        None => Ok(rows),
    }
}

fn run_case(cfg: &RunConfig, i: u32) -> Result<StudyRow, StudyError> {
    let report = runner::run(cfg).map_err(|source| StudyError::Run { i, source })?;
    let termination = report.summary.termination.clone();
    if report.exit_code() != runner::EXIT_REACHED_END {
        return Err(StudyError::Incomplete { i, termination });
    }
    Ok(StudyRow {
        i,
        dt: study_dt(cfg.t_end, i),
        max_abs_lambda0: report.summary.max_abs_lambda0.unwrap_or(0.0),
        steps: report.state.step,
        termination,
    })
}

fn write_table(base: &RunConfig, rows: &[StudyRow]) -> std::io::Result<()> {
    fs::create_dir_all(&base.output_dir)?;
    let mut text = format!("{TABLE_HEADER}\n");
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            r.i,
            fmt_f64(r.dt),
            fmt_f64(r.max_abs_lambda0),
            r.steps,
            r.termination
        ));
    }
    fs::write(table_path(base), text)
}
