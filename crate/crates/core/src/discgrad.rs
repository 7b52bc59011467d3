//! Discrete gradients of area, length and bending energy.
//!
//! For a pair of curves `(gamma, gamma_bar)` each discrete gradient is the
//! field `f` in the spline space satisfying
//!
//! ```text
//! <f, v>_mid = rhs(v)   for all v,
//! ```
//!
//! where `<., .>_mid` is the L² product over the midpoint curve
//! `(gamma + gamma_bar) / 2` (weight `|gamma_mid_u| du`) and `rhs` is linear
//! in `v` with `rhs(gamma - gamma_bar) = F[gamma] - F[gamma_bar]` exactly.
//! The right-hand sides are assembled here as load vectors (one planar
//! entry per basis function) on the shared quadrature grid.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geom::{jets, rot90, CurveJet, CurveJets};
use crate::spline::{ControlCurve, MassFactor, SplineSpace};
use crate::Vec2;

/// Symmetrized quantities of a curve pair at one quadrature node.
#[derive(Debug, Clone, Copy)]
pub struct PairNode {
    pub first: CurveJet,
    pub second: CurveJet,
    pub mid_u: Vec2,
    pub mid_uu: Vec2,
    pub g_mid: f64,
    /// `(gamma_u + gamma_bar_u) / (g + g_bar)`.
    pub t_hat: Vec2,
    /// Coefficient of `v_u` in the first bending term.
    pub g_vec: Vec2,
    /// `(g^-5 + g_bar^-5) / 2 * (D + D_bar)`.
    pub h_scal: f64,
}

impl PairNode {
    fn new(a: CurveJet, b: CurveJet) -> Self {
        let mid_u = (a.gamma_u + b.gamma_u) * 0.5;
        let mid_uu = (a.gamma_uu + b.gamma_uu) * 0.5;
        let t_hat = (a.gamma_u + b.gamma_u) / (a.g + b.g);
        let d2 = 0.5 * (a.det_d * a.det_d + b.det_d * b.det_d);
        let g_vec = t_hat * (d2 * inverse_power_difference(a.g, b.g));
        let h_scal = 0.5 * (a.g.powi(-5) + b.g.powi(-5)) * (a.det_d + b.det_d);
        Self {
            first: a,
            second: b,
            mid_u,
            mid_uu,
            g_mid: mid_u.norm(),
            t_hat,
            g_vec,
            h_scal,
        }
    }
}

/// `g^-5 g_bar^-5 sum_{l=0}^{4} g^l g_bar^(4-l)`, i.e. the divided difference
/// `-(g^-5 - g_bar^-5) / (g - g_bar)`, evaluated in the ratio of the smaller
/// to the larger length.
fn inverse_power_difference(g: f64, g_bar: f64) -> f64 {
    let (big, small) = if g >= g_bar { (g, g_bar) } else { (g_bar, g) };
    let rho = small / big;
    let poly = 1.0 + rho * (1.0 + rho * (1.0 + rho * (1.0 + rho)));
    poly / (big * small.powi(5))
}

/// Pair data at every quadrature node.
#[derive(Debug, Clone)]
pub struct PairJet {
    pub nodes: Vec<PairNode>,
}

impl PairJet {
    pub fn new(gamma: &ControlCurve, gamma_bar: &ControlCurve) -> Self {
        Self::from_jets(&jets(gamma), &jets(gamma_bar))
    }

    pub fn from_jets(a: &CurveJets, b: &CurveJets) -> Self {
        Self {
            nodes: a
                .nodes
                .iter()
                .zip(&b.nodes)
                .map(|(a, b)| PairNode::new(*a, *b))
                .collect(),
        }
    }

    pub fn mid_speeds(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.g_mid).collect()
    }

    fn require_both_regular(&self) -> Result<()> {
        for (node, n) in self.nodes.iter().enumerate() {
            for g in [n.first.g, n.second.g] {
                if !(g > 0.0 && g.is_finite()) {
                    return Err(Error::NotRegular { node, value: g });
                }
            }
        }
        Ok(())
    }
}

/// Load vector of `v -> -int J mid_u . v du`.
pub fn rhs_area(pair: &PairJet, space: &SplineSpace) -> Vec<Vec2> {
    let mut out = vec![Vec2::zeros(); space.n_basis()];
    let c0: Vec<Vec2> = pair.nodes.iter().map(|n| -rot90(n.mid_u)).collect();
    space.accumulate_load(0, &c0, &mut out);
    out
}

/// Load vector of `v -> int T_hat . v_u du`.
pub fn rhs_length(pair: &PairJet, space: &SplineSpace) -> Result<Vec<Vec2>> {
    for (node, n) in pair.nodes.iter().enumerate() {
        let denom = n.first.g + n.second.g;
        if !(denom > 0.0 && denom.is_finite()) {
            return Err(Error::NotRegular { node, value: denom });
        }
    }
    let mut out = vec![Vec2::zeros(); space.n_basis()];
    let c1: Vec<Vec2> = pair.nodes.iter().map(|n| n.t_hat).collect();
    space.accumulate_load(1, &c1, &mut out);
    Ok(out)
}

/// Load vector of
/// `v -> -int G . v_u + int H J mid_u . v_uu - int H J mid_uu . v_u`.
pub fn rhs_bending(pair: &PairJet, space: &SplineSpace) -> Result<Vec<Vec2>> {
    if space.degree() < 2 {
        return Err(Error::InvalidSpace(
            "bending energy needs degree >= 2".into(),
        ));
    }
    pair.require_both_regular()?;
    let mut out = vec![Vec2::zeros(); space.n_basis()];
    let c1: Vec<Vec2> = pair
        .nodes
        .iter()
        .map(|n| -n.g_vec - rot90(n.mid_uu) * n.h_scal)
        .collect();
    let c2: Vec<Vec2> = pair.nodes.iter().map(|n| rot90(n.mid_u) * n.h_scal).collect();
    space.accumulate_load(1, &c1, &mut out);
    space.accumulate_load(2, &c2, &mut out);
    Ok(out)
}

/// Weighted mass matrix of a curve's own arc-length measure, factored.
pub fn arclength_mass(curve: &ControlCurve) -> Result<MassFactor> {
    let speeds = jets(curve).speeds();
    MassFactor::new(curve.space().assemble_weighted_mass(&speeds)?)
}

/// The field `f` with `<f, v>_midcurve = rhs(v)` for every basis field `v`.
pub fn solve_gradient(rhs: &[Vec2], midcurve: &ControlCurve) -> Result<ControlCurve> {
    let mass = arclength_mass(midcurve)?;
    ControlCurve::new(midcurve.space().clone(), mass.solve_vec2(rhs))
}

/// Symmetric Gram matrix of weighted inner products. Row `i` belongs to the
/// `i`-th field passed in.
#[derive(Debug, Clone, PartialEq)]
pub struct GramData {
    pub matrix: DMatrix<f64>,
}

impl GramData {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Gram matrix of fields already evaluated at the quadrature nodes, with
/// node weight `weight` (the midcurve speed).
pub fn gram_from_nodes(space: &SplineSpace, fields: &[Vec<Vec2>], weight: &[f64]) -> GramData {
    let m = fields.len();
    let w = &space.grid().weights;
    let mut matrix = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v: f64 = (0..w.len())
                .map(|q| w[q] * weight[q] * fields[i][q].dot(&fields[j][q]))
                .sum();
            matrix[(i, j)] = v;
            matrix[(j, i)] = v;
        }
    }
    GramData { matrix }
}

pub fn gram(gradients: &[ControlCurve], midcurve: &ControlCurve) -> Result<GramData> {
    let mid_jets = jets(midcurve);
    mid_jets.require_regular()?;
    let fields: Vec<Vec<Vec2>> = gradients.iter().map(|g| g.eval_nodes(0)).collect();
    Ok(gram_from_nodes(
        midcurve.space(),
        &fields,
        &mid_jets.speeds(),
    ))
}

/// Exact rate target of the driving functional together with the auxiliary
/// constraint multipliers that produce it.
#[derive(Debug, Clone, PartialEq)]
pub struct DissipationTarget {
    pub rate: f64,
    pub multipliers: Vec<f64>,
}

/// Relative pivot threshold below which constraint gradients count as
/// linearly dependent.
pub const DEPENDENCE_THRESHOLD: f64 = 1e-12;

/// Dissipation target `-D(f0, f1..fJ) / D(f1..fJ)` of a full Gram matrix whose
/// first row belongs to the driving gradient and whose trailing `J x J` block
/// is the constraint Gram matrix. Computed by solving the constraint block
/// for the multipliers and evaluating `-|f0|^2 + sum_j lambda_j <f_j, f0>`.
pub fn dissipation_rate(full: &GramData) -> Result<DissipationTarget> {
    let g = &full.matrix;
    let m = g.nrows();
    assert!(m >= 1, "Gram matrix must contain the driving gradient");
    let j = m - 1;
    let block = g.view((1, 1), (j, j)).into_owned();
    let coupling: Vec<f64> = (1..m).map(|i| g[(i, 0)]).collect();
    let multipliers = solve_spd_checked(&block, &coupling)?;
    let rate = -g[(0, 0)]
        + multipliers
            .iter()
            .zip(&coupling)
            .map(|(l, c)| l * c)
            .sum::<f64>();
    Ok(DissipationTarget { rate, multipliers })
}

/// Cholesky solve of a small symmetric system, reporting linear dependence
/// when a pivot falls below `DEPENDENCE_THRESHOLD` times the largest diagonal.
pub fn solve_spd_checked(a: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let scale = (0..n).map(|i| a[(i, i)]).fold(0.0, f64::max);
    let mut l = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let mut d = a[(k, k)];
        for m in 0..k {
            d -= l[(k, m)] * l[(k, m)];
        }
        if !(d >= DEPENDENCE_THRESHOLD * scale) || !(scale > 0.0) {
            return Err(Error::LinearDependence { pivot: d, scale });
        }
        let lkk = d.sqrt();
        l[(k, k)] = lkk;
        for i in (k + 1)..n {
            let mut s = a[(i, k)];
            for m in 0..k {
                s -= l[(i, m)] * l[(k, m)];
            }
            l[(i, k)] = s / lkk;
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|m| l[(i, m)] * y[m]).sum();
        y[i] = (b[i] - s) / l[(i, i)];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = ((i + 1)..n).map(|m| l[(m, i)] * x[m]).sum();
        x[i] = (y[i] - s) / l[(i, i)];
    }
    Ok(x)
}
