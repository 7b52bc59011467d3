//! Newton solution of each step, adaptive time increments and the outer
//! time loop.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::discgrad::{dissipation_rate, gram, solve_gradient, GramData, PairJet};
use crate::error::{Error, Result};
use crate::geom::jets;
use crate::schemes::{step_energy_report, FlowProblem, StepContext, StepRecord, StepUnknowns};
use crate::spline::{ControlCurve, MassFactor, ScalarField};

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonConfig {
    /// Convergence when `|r|_inf <= residual_tol * max(1, |r_0|_inf)`.
    pub residual_tol: f64,
    pub max_iters: usize,
    /// Relative forward-difference step for Jacobian columns.
    pub jacobian_fd_step: f64,
    /// Halve the time increment after a failed step instead of stopping.
    pub retry_on_failure: bool,
    pub max_retries: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            residual_tol: 1e-11,
            max_iters: 50,
            jacobian_fd_step: 1e-7,
            retry_on_failure: false,
            max_retries: 4,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.residual_tol > 0.0) || self.max_iters == 0 || !(self.jacobian_fd_step > 0.0) {
            return Err(Error::InvalidProblem(format!("invalid Newton settings: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub unknowns: StepUnknowns,
    pub iterations: usize,
    /// Final residual infinity norm.
    pub residual: f64,
}

/// Newton's method with a dense forward-difference Jacobian on a generic
/// residual. Returns the root, the iteration count and the final residual
/// norm.
pub fn newton_dense<F>(
    residual: F,
    mut x: Vec<f64>,
    cfg: &NewtonConfig,
) -> Result<(Vec<f64>, usize, f64)>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = x.len();
    let mut r = residual(&x)?;
    let inf_norm = |r: &[f64]| r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut norm = inf_norm(&r);
    if !norm.is_finite() {
        return Err(Error::NonConvergence {
            iterations: 0,
            residual: norm,
        });
    }
    let tol = cfg.residual_tol * norm.max(1.0);
    let mut jac = DMatrix::<f64>::zeros(r.len(), n);
    for iter in 0..=cfg.max_iters {
        if norm <= tol {
            return Ok((x, iter, norm));
        }
        if iter == cfg.max_iters {
            break;
        }
        for j in 0..n {
            let xj = x[j];
            let h = cfg.jacobian_fd_step * xj.abs().max(1.0);
            x[j] = xj + h;
            let h = x[j] - xj;
            let rp = residual(&x);
            x[j] = xj;
            let rp = rp?;
            for (i, (a, b)) in rp.iter().zip(&r).enumerate() {
                jac[(i, j)] = (a - b) / h;
            }
        }
        let lu = jac.clone().lu();
        let step = lu
            .solve(&DVector::from_column_slice(&r))
            .ok_or(Error::SingularJacobian { iteration: iter })?;
        if step.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularJacobian { iteration: iter });
        }
        for (xi, s) in x.iter_mut().zip(step.iter()) {
            *xi -= s;
        }
        r = residual(&x)?;
        norm = inf_norm(&r);
        if !norm.is_finite() {
            return Err(Error::NonConvergence {
                iterations: iter + 1,
                residual: norm,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: cfg.max_iters,
        residual: norm,
    })
}

/// Solves one step of the flow from `guess`.
pub fn newton_solve(
    problem: &FlowProblem,
    prev: &ControlCurve,
    dt: f64,
    guess: &StepUnknowns,
    cfg: &NewtonConfig,
) -> Result<NewtonOutcome> {
    let ctx = StepContext::new(problem, prev, dt)?;
    let layout = ctx.layout();
    if guess.layout() != layout {
        return Err(Error::DimensionMismatch {
            expected: layout.len(),
            got: guess.layout().len(),
        });
    }
    let (x, iterations, residual) = newton_dense(|x| ctx.residual(x), guess.pack(), cfg)?;
    Ok(NewtonOutcome {
        unknowns: StepUnknowns::unpack(ctx.space(), layout, &x)?,
        iterations,
        residual,
    })
}

/// Discrete gradients of every functional of the problem at `(curve, curve)`.
pub fn gradients_at(problem: &FlowProblem, curve: &ControlCurve) -> Result<Vec<ControlCurve>> {
    let pair = PairJet::new(curve, curve);
    problem
        .functionals()
        .map(|f| solve_gradient(&f.rhs(&pair, curve.space())?, curve))
        .collect()
}

/// Deckelnick-type tangential velocity `W` with
/// `int W phi du = alpha0 int phi_u / |gamma_u| du` for all scalar `phi`.
pub fn tangential_velocity(curve: &ControlCurve, alpha0: f64) -> Result<ScalarField> {
    let space = curve.space();
    let j = jets(curve);
    j.require_regular()?;
    let inv: Vec<f64> = j.nodes.iter().map(|n| alpha0 / n.g).collect();
    let mut load = vec![0.0; space.n_basis()];
    space.accumulate_load_scalar(1, &inv, &mut load);
    let mass = MassFactor::new(space.assemble_weighted_mass(&vec![1.0; space.n_nodes()])?)?;
    ScalarField::new(space.clone(), mass.solve(&load))
}

/// Starting point for Newton: the previous curve, gradients at the
/// coincident pair, the tangential velocity of the previous curve, the
/// continuous-limit constraint multipliers and `lambda0 = 0`.
pub fn initial_guess(problem: &FlowProblem, prev: &ControlCurve, _dt: f64) -> Result<StepUnknowns> {
    let gradients = gradients_at(problem, prev)?;
    let g = gram(&gradients, prev)?;
    let lambdas = dissipation_rate(&g)?.multipliers;
    let w_field = problem
        .alpha0()
        .map(|a| tangential_velocity(prev, a))
        .transpose()?;
    Ok(StepUnknowns {
        gamma_next: prev.clone(),
        gradients,
        w_field,
        lambda0: problem.tangential().then_some(0.0),
        lambdas,
    })
}

/// Gram matrix of the problem's gradients at `(curve, curve)`.
pub fn initial_gram(problem: &FlowProblem, curve: &ControlCurve) -> Result<GramData> {
    gram(&gradients_at(problem, curve)?, curve)
}

/// First time increment: `min(tau, 1 / |rate|)` where `rate` is the exact
/// continuous dissipation rate at the initial curve.
pub fn dt_first(problem: &FlowProblem, initial: &ControlCurve, tau_cap: f64) -> Result<f64> {
    let rate = dissipation_rate(&initial_gram(problem, initial)?)?.rate;
    Ok(clamp_rate(-rate, tau_cap))
}

fn clamp_rate(decay: f64, tau_cap: f64) -> f64 {
    if decay > 0.0 {
        tau_cap.min(1.0 / decay)
    } else {
        tau_cap
    }
}

/// Adaptive time-increment control from the two most recent values of the
/// driving functional.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeController {
    pub tau_cap: f64,
    pub t_end: f64,
    pub last_dt: Option<f64>,
    /// `[F0^{n-2}, F0^{n-1}]` once two values are known.
    pub energy_history: Vec<f64>,
}

impl TimeController {
    pub fn new(tau_cap: f64, t_end: f64) -> Self {
        Self {
            tau_cap,
            t_end,
            last_dt: None,
            energy_history: Vec::new(),
        }
    }

    pub fn record(&mut self, dt: Option<f64>, energy: f64) {
        if dt.is_some() {
            self.last_dt = dt;
        }
        self.energy_history.push(energy);
        if self.energy_history.len() > 2 {
            self.energy_history.remove(0);
        }
    }
}

/// `min(tau, ((F^{n-2} - F^{n-1}) / dt_{n-1})^-1)`, or `tau` when the last
/// step did not decrease the energy.
pub fn dt_next(controller: &TimeController) -> f64 {
    match (controller.energy_history.as_slice(), controller.last_dt) {
        ([older, newer], Some(dt)) => clamp_rate((older - newer) / dt, controller.tau_cap),
        _ => controller.tau_cap,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    ReachedEnd,
    Breakdown(Error),
    StructureViolation(Error),
}

impl Termination {
    pub fn label(&self) -> &'static str {
        match self {
            Termination::ReachedEnd => "reached_end",
            Termination::Breakdown(_) => "breakdown",
            Termination::StructureViolation(_) => "structure_violation",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunState {
    pub step: usize,
    pub t: f64,
    pub curve: ControlCurve,
    /// Initial record first, then one per accepted step.
    pub records: Vec<StepRecord>,
    pub termination: Option<Termination>,
}

/// Time-step selection for a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeStepping {
    /// Adaptive increments capped by `tau_cap`.
    Adaptive { tau_cap: f64 },
    Uniform { dt: f64 },
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub t_end: f64,
    pub stepping: TimeStepping,
    pub newton: NewtonConfig,
    /// Store wall-clock time per step in the records.
    pub record_wall_time: bool,
}

/// Advances the flow until `t_end` or a failure. `on_step` sees the state
/// after every accepted step (and once for the initial state).
pub fn run_flow_with<C>(
    problem: &FlowProblem,
    initial: &ControlCurve,
    opts: &RunOptions,
    mut on_step: C,
) -> Result<RunState>
where
    C: FnMut(&RunState),
{
    opts.newton.validate()?;
    let initial_record = StepRecord::initial(problem, initial)?;
    let mut state = RunState {
        step: 0,
        t: 0.0,
        curve: initial.clone(),
        records: vec![initial_record.clone()],
        termination: None,
    };
    on_step(&state);

    let (tau_cap, uniform) = match opts.stepping {
        TimeStepping::Adaptive { tau_cap } => (tau_cap, None),
        TimeStepping::Uniform { dt } => (dt, Some(dt)),
    };
    if !(tau_cap > 0.0) {
        return Err(Error::InvalidProblem("time increment must be positive".into()));
    }
    let mut controller = TimeController::new(tau_cap, opts.t_end);
    controller.record(None, initial_record.f0);
    let uniform_steps = uniform.map(|dt| (opts.t_end / dt).round() as usize);
    let end_slack = 1e-9 * opts.t_end.abs();

    loop {
        let done = match uniform_steps {
            Some(total) => state.step >= total,
            None => state.t >= opts.t_end - end_slack,
        };
        if done {
            state.termination = Some(Termination::ReachedEnd);
            return Ok(state);
        }

        let mut dt = match uniform {
            Some(dt) => dt,
            None if state.step == 0 => match dt_first(problem, &state.curve, tau_cap) {
                Ok(dt) => dt,
                Err(e) => {
                    state.termination = Some(Termination::Breakdown(e));
                    return Ok(state);
                }
            },
            None => dt_next(&controller),
        };
        if uniform.is_none() {
            dt = dt.min(opts.t_end - state.t);
        }

        let started = Instant::now();
        let mut attempt = 0;
        let outcome = loop {
            let result = initial_guess(problem, &state.curve, dt)
                .and_then(|guess| newton_solve(problem, &state.curve, dt, &guess, &opts.newton));
            match result {
                Ok(out) => break Ok(out),
                Err(_) if opts.newton.retry_on_failure && attempt < opts.newton.max_retries => {
                    attempt += 1;
                    dt *= 0.5;
                }
                Err(e) => break Err(e),
            }
        };
        let outcome = match outcome {
            Ok(o) => o,
            Err(e) => {
                state.termination = Some(Termination::Breakdown(e));
                return Ok(state);
            }
        };

        let mut record = match step_energy_report(problem, &state.curve, &outcome.unknowns, dt) {
            Ok(r) => r,
            Err(e @ Error::StructureViolation(_)) => {
                state.termination = Some(Termination::StructureViolation(e));
                return Ok(state);
            }
            Err(e) => {
                state.termination = Some(Termination::Breakdown(e));
                return Ok(state);
            }
        };
        state.step += 1;
        state.t = match uniform_steps {
            Some(_) => state.step as f64 * dt,
            None => state.t + dt,
        };
        record.n = state.step;
        record.t = state.t;
        record.newton_iters = outcome.iterations;
        record.residual = outcome.residual;
        if opts.record_wall_time {
            record.wall_ms = Some(started.elapsed().as_secs_f64() * 1e3);
        }
        controller.record(Some(dt), record.f0);
        state.curve = outcome.unknowns.gamma_next;
        state.records.push(record);
        on_step(&state);
    }
}

pub fn run_flow(problem: &FlowProblem, initial: &ControlCurve, opts: &RunOptions) -> Result<RunState> {
    run_flow_with(problem, initial, opts, |_| {})
}

/// Largest `|lambda0|` over the accepted steps of a run.
pub fn max_abs_lambda0(state: &RunState) -> f64 {
    state
        .records
        .iter()
        .filter_map(|r| r.lambda0)
        .fold(0.0, |m, l| m.max(l.abs()))
}
