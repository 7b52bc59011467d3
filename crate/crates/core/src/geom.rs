//! Pointwise curve geometry on the quadrature grid and the functionals
//! built from it: enclosed area, length, bending energy, elastic energy.

use crate::error::{Error, Result};
use crate::spline::ControlCurve;
use crate::Vec2;

/// The fixed quarter turn `J = [[0, -1], [1, 0]]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RotationJ;

impl RotationJ {
    #[inline]
    pub fn apply(self, v: Vec2) -> Vec2 {
        rot90(v)
    }
}

#[inline]
pub fn rot90(v: Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

/// `det(a, b) = (J a) . b`.
#[inline]
pub fn det2(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Curve data at one quadrature node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveJet {
    pub gamma: Vec2,
    pub gamma_u: Vec2,
    pub gamma_uu: Vec2,
    /// Local length `|gamma_u|`.
    pub g: f64,
    /// `det(gamma_u, gamma_uu)`.
    pub det_d: f64,
}

impl CurveJet {
    pub fn new(gamma: Vec2, gamma_u: Vec2, gamma_uu: Vec2) -> Self {
        Self {
            gamma,
            gamma_u,
            gamma_uu,
            g: gamma_u.norm(),
            det_d: det2(gamma_u, gamma_uu),
        }
    }

    /// Signed curvature `D / g^3`.
    pub fn curvature(&self) -> f64 {
        self.det_d / self.g.powi(3)
    }

    pub fn tangent(&self) -> Vec2 {
        self.gamma_u / self.g
    }

    /// Inward normal for positively oriented curves.
    pub fn normal(&self) -> Vec2 {
        rot90(self.tangent())
    }
}

/// Jets of a curve at every quadrature node.
#[derive(Debug, Clone)]
pub struct CurveJets {
    pub nodes: Vec<CurveJet>,
}

impl CurveJets {
    pub fn is_regular(&self) -> bool {
        self.first_degenerate().is_none()
    }

    fn first_degenerate(&self) -> Option<(usize, f64)> {
        self.nodes
            .iter()
            .enumerate()
            .find(|(_, j)| !(j.g > 0.0 && j.g.is_finite()))
            .map(|(i, j)| (i, j.g))
    }

    pub fn require_regular(&self) -> Result<()> {
        match self.first_degenerate() {
            Some((node, value)) => Err(Error::NotRegular { node, value }),
            None => Ok(()),
        }
    }

    pub fn speeds(&self) -> Vec<f64> {
        self.nodes.iter().map(|j| j.g).collect()
    }
}

pub fn jets(curve: &ControlCurve) -> CurveJets {
    let space = curve.space();
    let pos = curve.eval_nodes(0);
    let du = curve.eval_nodes(1);
    let duu = if space.degree() >= 2 {
        curve.eval_nodes(2)
    } else {
        vec![Vec2::zeros(); space.n_nodes()]
    };
    CurveJets {
        nodes: pos
            .into_iter()
            .zip(du)
            .zip(duu)
            .map(|((p, d1), d2)| CurveJet::new(p, d1, d2))
            .collect(),
    }
}

/// Signed enclosed area `-1/2 int gamma . J gamma_u du`; positive for
/// counter-clockwise curves.
pub fn area(curve: &ControlCurve) -> f64 {
    area_from_jets(curve, &jets(curve))
}

pub(crate) fn area_from_jets(curve: &ControlCurve, jets: &CurveJets) -> f64 {
    -0.5 * curve
        .space()
        .grid()
        .integrate(jets.nodes.iter().map(|j| j.gamma.dot(&rot90(j.gamma_u))))
}

pub fn length(curve: &ControlCurve) -> Result<f64> {
    let jets = jets(curve);
    jets.require_regular()?;
    Ok(length_from_jets(curve, &jets))
}

pub(crate) fn length_from_jets(curve: &ControlCurve, jets: &CurveJets) -> f64 {
    curve.space().grid().integrate(jets.nodes.iter().map(|j| j.g))
}

/// Bending energy `int D^2 / g^5 du`.
pub fn bending(curve: &ControlCurve) -> Result<f64> {
    let jets = jets(curve);
    jets.require_regular()?;
    Ok(bending_from_jets(curve, &jets))
}

pub(crate) fn bending_from_jets(curve: &ControlCurve, jets: &CurveJets) -> f64 {
    curve
        .space()
        .grid()
        .integrate(jets.nodes.iter().map(|j| j.det_d * j.det_d / j.g.powi(5)))
}

/// `B + k0 L`.
pub fn elastic_energy(curve: &ControlCurve, k0: f64) -> Result<f64> {
    let jets = jets(curve);
    jets.require_regular()?;
    Ok(bending_from_jets(curve, &jets) + k0 * length_from_jets(curve, &jets))
}
