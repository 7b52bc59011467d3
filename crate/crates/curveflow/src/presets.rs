//! Initial curves and parameter sets of the four reference experiments.

use std::f64::consts::PI;

use curveflow_core::Vec2;

use crate::config::SchemeKind;

/// Default time stepping, expressed relative to the final time so that an
/// overridden `t_end` keeps the preset's ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepDefault {
    /// Adaptive stepping with `tau = t_end / divisor`.
    AdaptiveFraction(f64),
    /// Adaptive stepping with a fixed cap.
    AdaptiveCap(f64),
    /// Uniform stepping with `dt = t_end / divisor`.
    UniformFraction(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub scheme: SchemeKind,
    pub n_basis: usize,
    pub degree: usize,
    pub k0: f64,
    pub alpha0: f64,
    pub t_end: f64,
    pub stepping: StepDefault,
    pub curve: fn(f64) -> Vec2,
}

impl Preset {
    pub fn eval(&self, u: f64) -> Vec2 {
        (self.curve)(u)
    }
}

pub static PRESETS: [Preset; 4] = [
    Preset {
        name: "willmore_star",
        summary: "elastic flow of a star-shaped curve",
        scheme: SchemeKind::WillmoreTv,
        n_basis: 25,
        degree: 3,
        k0: 4.0,
        alpha0: 10.0,
        t_end: 0.1,
        stepping: StepDefault::AdaptiveCap(1e-4),
        curve: star,
    },
    Preset {
        name: "willmore_ellipse",
        summary: "elastic flow of an ellipse with clustered control points",
        scheme: SchemeKind::WillmoreTv,
        n_basis: 20,
        degree: 3,
        k0: 1.0,
        alpha0: 1.0,
        t_end: 4.0,
        stepping: StepDefault::UniformFraction(400.0),
        curve: ellipse,
    },
    Preset {
        name: "apw_star",
        summary: "area-preserving bending flow of a wavy curve",
        scheme: SchemeKind::ApwTv,
        n_basis: 30,
        degree: 3,
        k0: 0.0,
        alpha0: 1.0,
        t_end: 4.0,
        stepping: StepDefault::AdaptiveFraction(1000.0),
        curve: wavy,
    },
    Preset {
        name: "helfrich_star",
        summary: "bending flow at fixed area and length",
        scheme: SchemeKind::HelfrichTv,
        n_basis: 30,
        degree: 3,
        k0: 0.0,
        alpha0: 1.0,
        t_end: 2.0,
        stepping: StepDefault::AdaptiveFraction(2000.0),
        curve: wavy_reparametrized,
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

fn polar(r: f64, theta: f64) -> Vec2 {
    Vec2::new(r * theta.cos(), r * theta.sin())
}

pub fn star(u: f64) -> Vec2 {
    let f = 2.0 * PI * u + (4.0 * PI * u).sin();
    let r = 1.0 + 0.2 * f.sin() + 0.4 * f.cos();
    let theta = -(10.0 / PI) * ((2.0 * PI * u).cos() + (6.0 * PI * u).cos() / 9.0);
    polar(r, theta)
}

pub fn ellipse(u: f64) -> Vec2 {
    let theta = 2.0 * PI * u - 0.4 * (4.0 * PI * u).sin();
    Vec2::new(2.0 * theta.cos(), theta.sin())
}

fn wavy_radius(u: f64) -> f64 {
    let (r0, r1, eps) = (0.5, 1.5, 0.1);
    let f = 2.0 * PI * u + 0.5 * (4.0 * PI * u).sin();
    (r1 - r0) * (f.cos() + 1.0) / 2.0 + r0 + eps * (8.0 * PI * u).sin()
}

fn wavy_angle(u: f64) -> f64 {
    let (theta0, theta1) = (3.0 * PI / 4.0, PI);
    (theta0 + theta1) * ((2.0 * PI * u).sin() + 1.0) / 2.0 - theta1
}

pub fn wavy(u: f64) -> Vec2 {
    polar(wavy_radius(u), wavy_angle(u))
}

pub fn wavy_reparametrized(u: f64) -> Vec2 {
    let g = u - (2.0 * PI * u).sin() / (3.0 * PI);
    polar(wavy_radius(g), wavy_angle(g))
}
