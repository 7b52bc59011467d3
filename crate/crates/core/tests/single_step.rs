use std::f64::consts::PI;

use curveflow_core::geom::{area, elastic_energy, length};
use curveflow_core::schemes::{step_energy_report, StepContext};
use curveflow_core::stepper::{dt_first, initial_guess, newton_solve};
use curveflow_core::{ControlCurve, FlowProblem, NewtonConfig, SplineSpace, Vec2};

fn helfrich_initial() -> ControlCurve {
    let r = |u: f64| {
        let f = 2.0 * PI * u + 0.5 * (4.0 * PI * u).sin();
        (1.5 - 0.5) * (f.cos() + 1.0) / 2.0 + 0.5 + 0.1 * (8.0 * PI * u).sin()
    };
    let theta = |u: f64| (3.0 * PI / 4.0 + PI) * ((2.0 * PI * u).sin() + 1.0) / 2.0 - PI;
    SplineSpace::new(30, 3, 5)
        .unwrap()
        .l2_project(|u| {
            let g = u - (2.0 * PI * u).sin() / (3.0 * PI);
            Vec2::new(r(g) * theta(g).cos(), r(g) * theta(g).sin())
        })
        .unwrap()
}

fn star() -> ControlCurve {
    SplineSpace::new(25, 3, 5)
        .unwrap()
        .l2_project(|u| {
            let f = 2.0 * PI * u + (4.0 * PI * u).sin();
            let r = 1.0 + 0.2 * f.sin() + 0.4 * f.cos();
            let th = -(10.0 / PI) * ((2.0 * PI * u).cos() + (6.0 * PI * u).cos() / 9.0);
            Vec2::new(r * th.cos(), r * th.sin())
        })
        .unwrap()
}

#[test]
fn willmore_step_decreases_energy() {
    let c = star();
    let problems = [
        FlowProblem::willmore(4.0).unwrap(),
        FlowProblem::willmore_tangential(4.0, 10.0).unwrap(),
    ];
    for problem in problems {
        let dt = dt_first(&problem, &c, 1e-4).unwrap();
        let guess = initial_guess(&problem, &c, dt).unwrap();
        let out = newton_solve(&problem, &c, dt, &guess, &NewtonConfig::default()).unwrap();
        let next = &out.unknowns.gamma_next;
        assert!(elastic_energy(next, 4.0).unwrap() < elastic_energy(&c, 4.0).unwrap());
        step_energy_report(&problem, &c, &out.unknowns, dt).unwrap();
    }
}

#[test]
fn converged_residual_is_small() {
    let c = star();
    let problem = FlowProblem::willmore_tangential(4.0, 10.0).unwrap();
    let dt = dt_first(&problem, &c, 1e-4).unwrap();
    let guess = initial_guess(&problem, &c, dt).unwrap();
    let ctx = StepContext::new(&problem, &c, dt).unwrap();
    let scale = ctx
        .residual(&guess.pack())
        .unwrap()
        .iter()
        .fold(1.0_f64, |m, r| m.max(r.abs()));
    let out = newton_solve(&problem, &c, dt, &guess, &NewtonConfig::default()).unwrap();
    let r = ctx.residual(&out.unknowns.pack()).unwrap();
    let norm = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    assert!(norm < 1e-10 * scale, "{norm:e} vs scale {scale:e}");
}

#[test]
fn helfrich_first_step_conserves_area_and_length() {
    let c = helfrich_initial();
    let problem = FlowProblem::helfrich(1.0).unwrap();
    let dt = dt_first(&problem, &c, 2.0 / 2000.0).unwrap();
    let guess = initial_guess(&problem, &c, dt).unwrap();
    let out = newton_solve(&problem, &c, dt, &guess, &NewtonConfig::default()).unwrap();
    assert!(out.iterations <= 10, "{} iterations", out.iterations);

    let next = &out.unknowns.gamma_next;
    let (a0, l0) = (area(&c), length(&c).unwrap());
    assert!(((area(next) - a0) / a0).abs() < 1e-10);
    assert!(((length(next).unwrap() - l0) / l0).abs() < 1e-10);

    // The continuous-limit multiplier is a good predictor of the converged one.
    let (guessed, converged) = (guess.lambdas[0], out.unknowns.lambdas[0]);
    assert!((guessed - converged).abs() <= 0.2 * converged.abs(), "{guessed} vs {converged}");

    let rec = step_energy_report(&problem, &c, &out.unknowns, dt).unwrap();
    assert!(rec.rate.unwrap() <= 0.0);
}
