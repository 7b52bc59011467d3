//! Orchestration of one configured run: initial curve, time loop, files.

use std::fs;
use std::io;
use std::path::Path;

use curveflow_core::stepper::{max_abs_lambda0, run_flow_with};
use curveflow_core::{geom, ControlCurve, RunOptions, RunState, SplineSpace, Termination};

use crate::config::{InitialCurve, RunConfig};
use crate::output::{self, FunctionalValues, StepsWriter, Summary};
use crate::presets;

pub const EXIT_REACHED_END: i32 = 0;
pub const EXIT_BREAKDOWN: i32 = 2;
pub const EXIT_STRUCTURE: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("setup failed: {0}")]
    Setup(#[from] curveflow_core::Error),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Setup(_) => EXIT_CONFIG,
            RunError::Io(_) => 1,
        }
    }
}

#[derive(Debug)]
pub struct RunReport {
    pub state: RunState,
    pub summary: Summary,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        exit_code(self.state.termination.as_ref())
    }
}

pub fn exit_code(termination: Option<&Termination>) -> i32 {
    match termination {
        Some(Termination::ReachedEnd) => EXIT_REACHED_END,
        Some(Termination::StructureViolation(_)) => EXIT_STRUCTURE,
        Some(Termination::Breakdown(_)) | None => EXIT_BREAKDOWN,
    }
}

/// The projected initial curve of a configuration.
pub fn initial_curve(cfg: &RunConfig) -> Result<ControlCurve, RunError> {
    let space = SplineSpace::new(cfg.n_basis, cfg.degree, cfg.quad_order)?;
    match &cfg.initial {
        InitialCurve::Preset(name) => {
            let preset = presets::find(name).ok_or_else(|| {
                curveflow_core::Error::InvalidProblem(format!("unknown preset {name}"))
            })?;
            Ok(space.l2_project(|u| preset.eval(u))?)
        }
        InitialCurve::ControlPoints(path) => {
            Ok(ControlCurve::new(space, output::read_control_points(path)?)?)
        }
    }
}

pub fn run_options(cfg: &RunConfig) -> RunOptions {
    RunOptions {
        t_end: cfg.t_end,
        stepping: cfg.stepping,
        newton: cfg.newton.clone(),
        record_wall_time: cfg.log_wall_time,
    }
}

fn values(curve: &ControlCurve, f0: f64) -> FunctionalValues {
    FunctionalValues {
        f0,
        area: geom::area(curve),
        length: geom::length(curve).unwrap_or(f64::NAN),
        bending: geom::bending(curve).unwrap_or(f64::NAN),
    }
}

fn max_drift(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let mut first = None;
    let mut drift: Option<f64> = None;
    for v in values.flatten() {
        let v0 = *first.get_or_insert(v);
        let d = ((v - v0) / v0).abs();
        drift = Some(drift.map_or(d, |m| m.max(d)));
    }
    drift
}

/// Runs the configured flow, writing `steps.csv`, snapshots, optional SVG
/// figures and `summary.json` into the output directory.
pub fn run(cfg: &RunConfig) -> Result<RunReport, RunError> {
    let problem = cfg.problem()?;
    let initial = initial_curve(cfg)?;
    let out = cfg.output_dir.as_path();
    let snap_dir = out.join("snapshots");
    fs::create_dir_all(&snap_dir)?;

    let mut steps = StepsWriter::create(&out.join("steps.csv"))?;
    let mut io_error: Option<io::Error> = None;
    let mut last_snapshot = None;
    let state = run_flow_with(&problem, &initial, &run_options(cfg), |s| {
        if io_error.is_some() {
            return;
        }
        let mut write = || -> io::Result<()> {
            steps.write(s.records.last().expect("records start with the initial state"))?;
            if s.step % cfg.snapshot_stride == 0 {
                write_figures(cfg, &snap_dir, s.step, &s.curve)?;
                last_snapshot = Some(s.step);
            }
            Ok(())
        };
        io_error = write().err();
    })?;
    if let Some(e) = io_error {
        return Err(e.into());
    }
    steps.finish()?;
    if last_snapshot != Some(state.step) {
        write_figures(cfg, &snap_dir, state.step, &state.curve)?;
    }

    let summary = summarize(cfg, &state, &initial);
    output::write_summary(&out.join("summary.json"), &summary)?;
    Ok(RunReport { state, summary })
}

fn write_figures(cfg: &RunConfig, dir: &Path, step: usize, curve: &ControlCurve) -> io::Result<()> {
    output::write_snapshot(&output::snapshot_path(dir, step), curve)?;
    if cfg.svg {
        fs::write(dir.join(format!("step_{step}.svg")), output::render_svg(curve))?;
    }
    Ok(())
}

fn summarize(cfg: &RunConfig, state: &RunState, initial: &ControlCurve) -> Summary {
    let (cause, message) = match &state.termination {
        Some(Termination::Breakdown(e)) | Some(Termination::StructureViolation(e)) => {
            (Some(e.code().to_string()), Some(e.to_string()))
        }
        _ => (None, None),
    };
    let first = &state.records[0];
    let last = state.records.last().unwrap_or(first);
    let tangential = state.records.iter().any(|r| r.lambda0.is_some());
    Summary {
        scheme: cfg.scheme.name().to_string(),
        termination: state
            .termination
            .as_ref()
            .map_or("unfinished", Termination::label)
            .to_string(),
        cause,
        message,
        steps: state.step,
        t_final: state.t,
        initial: values(initial, first.f0),
        last: values(&state.curve, last.f0),
        max_area_drift: max_drift(state.records.iter().map(|r| r.f_area)),
        max_length_drift: max_drift(state.records.iter().map(|r| r.f_length)),
        max_abs_lambda0: tangential.then(|| max_abs_lambda0(state)),
    }
}
