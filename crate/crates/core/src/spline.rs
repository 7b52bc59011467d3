//! Periodic uniform B-spline spaces on the unit parameter interval.
//!
//! Basis function `i` is the cardinal B-spline of the given degree shifted to
//! start at the knot `i * h`, wrapped periodically. On the knot span
//! `[k h, (k + 1) h)` the nonzero functions are `k - p, ..., k` (mod `N`).
//!
//! Every integral in the crate goes through the single Gauss–Legendre grid
//! stored in the space, so discrete energy identities hold to round-off.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::Vec2;

/// Highest derivative order ever needed by the schemes.
pub const MAX_DERIV: usize = 2;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Quadrature nodes laid out span by span: node `k * per_span + m` is the
/// `m`-th Gauss point of knot span `k`.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub per_span: usize,
}

impl QuadratureGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Quadrature sum of node values.
    pub fn integrate(&self, values: impl IntoIterator<Item = f64>) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// Values of the `degree + 1` nonzero basis functions at one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisWindow {
    /// Index of the basis function owning `values[0]`; the rest follow with
    /// periodic wrapping.
    pub first: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
struct BasisTable {
    first: Vec<usize>,
    // values[d][node * (p + 1) + j]
    values: [Vec<f64>; MAX_DERIV + 1],
}

#[derive(Debug, Clone)]
pub struct SplineSpace {
    n_basis: usize,
    degree: usize,
    span_width: f64,
    quad_order: usize,
    grid: QuadratureGrid,
    table: BasisTable,
}

impl SplineSpace {
    /// Builds the periodic space with `n_basis` functions of degree `degree`,
    /// integrating with `quad_order` Gauss points per knot span.
    pub fn new(n_basis: usize, degree: usize, quad_order: usize) -> Result<Arc<Self>> {
        if degree < 1 {
            return Err(Error::InvalidSpace("degree must be at least 1".into()));
        }
        if n_basis < 2 * degree + 1 {
            return Err(Error::InvalidSpace(format!(
                "n_basis = {n_basis} must be at least 2 * degree + 1 = {}",
                2 * degree + 1
            )));
        }
        if quad_order < degree + 2 {
            return Err(Error::InvalidSpace(format!(
                "quad_order = {quad_order} must be at least degree + 2 = {}",
                degree + 2
            )));
        }
        let span_width = 1.0 / n_basis as f64;
        let (gauss_x, gauss_w) = gauss_legendre(quad_order);
        let mut nodes = Vec::with_capacity(n_basis * quad_order);
        let mut weights = Vec::with_capacity(n_basis * quad_order);
        for k in 0..n_basis {
            for (x, w) in gauss_x.iter().zip(&gauss_w) {
                nodes.push((k as f64 + 0.5 * (x + 1.0)) * span_width);
                weights.push(0.5 * w * span_width);
            }
        }
        let grid = QuadratureGrid {
            nodes,
            weights,
            per_span: quad_order,
        };

        let width = degree + 1;
        let mut table = BasisTable {
            first: Vec::with_capacity(grid.len()),
            values: Default::default(),
        };
        for d in 0..=MAX_DERIV {
            table.values[d] = vec![0.0; grid.len() * width];
        }
        for (q, &u) in grid.nodes.iter().enumerate() {
            let span = q / quad_order;
            let t = u / span_width - span as f64;
            let local = local_basis(degree, t, span_width);
            table.first.push((span + n_basis - degree) % n_basis);
            for d in 0..=MAX_DERIV.min(degree) {
                table.values[d][q * width..(q + 1) * width].copy_from_slice(&local[d]);
            }
        }

        Ok(Arc::new(Self {
            n_basis,
            degree,
            span_width,
            quad_order,
            grid,
            table,
        }))
    }

    pub fn n_basis(&self) -> usize {
        self.n_basis
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn span_width(&self) -> f64 {
        self.span_width
    }

    pub fn quad_order(&self) -> usize {
        self.quad_order
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn n_nodes(&self) -> usize {
        self.grid.len()
    }

    fn check_deriv(&self, deriv: usize) -> Result<()> {
        if deriv > self.degree || deriv > MAX_DERIV {
            return Err(Error::DerivativeTooHigh {
                deriv,
                degree: self.degree,
            });
        }
        Ok(())
    }

    /// Nonzero basis values (or derivatives) at an arbitrary parameter; `u`
    /// is reduced modulo 1.
    pub fn basis_eval(&self, u: f64, deriv: usize) -> Result<BasisWindow> {
        self.check_deriv(deriv)?;
        let u = u.rem_euclid(1.0);
        let x = u / self.span_width;
        let span = (x.floor() as usize).min(self.n_basis - 1);
        let t = x - span as f64;
        let mut local = local_basis(self.degree, t, self.span_width);
        Ok(BasisWindow {
            first: (span + self.n_basis - self.degree) % self.n_basis,
            values: std::mem::take(&mut local[deriv]),
        })
    }

    /// Basis index and value pairs at quadrature node `q`.
    #[inline]
    fn node_basis(&self, q: usize, deriv: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let width = self.degree + 1;
        let first = self.table.first[q];
        let n = self.n_basis;
        self.table.values[deriv][q * width..(q + 1) * width]
            .iter()
            .enumerate()
            .map(move |(j, &b)| ((first + j) % n, b))
    }

    /// Evaluates a planar spline field at every quadrature node.
    pub fn eval_nodes(&self, coeffs: &[Vec2], deriv: usize) -> Vec<Vec2> {
        debug_assert_eq!(coeffs.len(), self.n_basis);
        (0..self.n_nodes())
            .map(|q| {
                self.node_basis(q, deriv)
                    .fold(Vec2::zeros(), |acc, (i, b)| acc + coeffs[i] * b)
            })
            .collect()
    }

    /// Evaluates a scalar spline field at every quadrature node.
    pub fn eval_nodes_scalar(&self, coeffs: &[f64], deriv: usize) -> Vec<f64> {
        debug_assert_eq!(coeffs.len(), self.n_basis);
        (0..self.n_nodes())
            .map(|q| self.node_basis(q, deriv).map(|(i, b)| coeffs[i] * b).sum())
            .collect()
    }

    /// Adds `sum_q w_q values[q] * d^deriv B_i(u_q)` into `out[i]`.
    pub fn accumulate_load(&self, deriv: usize, values: &[Vec2], out: &mut [Vec2]) {
        debug_assert_eq!(values.len(), self.n_nodes());
        for (q, v) in values.iter().enumerate() {
            let wv = v * self.grid.weights[q];
            for (i, b) in self.node_basis(q, deriv) {
                out[i] += wv * b;
            }
        }
    }

    /// Scalar analogue of [`SplineSpace::accumulate_load`].
    pub fn accumulate_load_scalar(&self, deriv: usize, values: &[f64], out: &mut [f64]) {
        debug_assert_eq!(values.len(), self.n_nodes());
        for (q, v) in values.iter().enumerate() {
            let wv = v * self.grid.weights[q];
            for (i, b) in self.node_basis(q, deriv) {
                out[i] += wv * b;
            }
        }
    }

    /// `M[i][j] = sum_q w_q weight_q B_i(u_q) B_j(u_q)`.
    pub fn assemble_weighted_mass(&self, weight: &[f64]) -> Result<DMatrix<f64>> {
        if weight.len() != self.n_nodes() {
            return Err(Error::DimensionMismatch {
                expected: self.n_nodes(),
                got: weight.len(),
            });
        }
        if let Some((node, &value)) = weight
            .iter()
            .enumerate()
            .find(|(_, w)| !(**w > 0.0 && w.is_finite()))
        {
            return Err(Error::NotRegular { node, value });
        }
        let n = self.n_basis;
        let mut m = DMatrix::zeros(n, n);
        for q in 0..self.n_nodes() {
            let wq = self.grid.weights[q] * weight[q];
            for (i, bi) in self.node_basis(q, 0) {
                for (j, bj) in self.node_basis(q, 0) {
                    m[(i, j)] += wq * (bi * bj);
                }
            }
        }
        Ok(m)
    }

    /// L²(du) projection of a parametric planar curve onto the space.
    pub fn l2_project<F>(self: &Arc<Self>, target: F) -> Result<ControlCurve>
    where
        F: Fn(f64) -> Vec2,
    {
        let ones = vec![1.0; self.n_nodes()];
        let mass = MassFactor::new(self.assemble_weighted_mass(&ones)?)?;
        let values: Vec<Vec2> = self.grid.nodes.iter().map(|&u| target(u)).collect();
        let mut load = vec![Vec2::zeros(); self.n_basis];
        self.accumulate_load(0, &values, &mut load);
        ControlCurve::new(self.clone(), mass.solve_vec2(&load))
    }
}

/// Values and derivatives (up to order 2) of the `degree + 1` cardinal
/// B-splines nonzero on a unit span, at local coordinate `t` in `[0, 1)`.
/// Derivatives are scaled to the parameter `u = h (k + t)`.
fn local_basis(degree: usize, t: f64, h: f64) -> [Vec<f64>; MAX_DERIV + 1] {
    // levels[d] holds the degree-d values (length d + 1).
    let mut levels: Vec<Vec<f64>> = Vec::with_capacity(degree + 1);
    let mut vals = vec![1.0];
    levels.push(vals.clone());
    let mut left = vec![0.0; degree + 1];
    let mut right = vec![0.0; degree + 1];
    for j in 1..=degree {
        // Integer knots with the current span at [0, 1).
        left[j] = t + j as f64 - 1.0;
        right[j] = j as f64 - t;
        let mut next = vec![0.0; j + 1];
        let mut saved = 0.0;
        for r in 0..j {
            let temp = vals[r] / (right[r + 1] + left[j - r]);
            next[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        next[j] = saved;
        vals = next;
        levels.push(vals.clone());
    }

    let mut out: [Vec<f64>; MAX_DERIV + 1] = Default::default();
    out[0] = levels[degree].clone();
    for (d, slot) in out.iter_mut().enumerate().skip(1) {
        if d > degree {
            *slot = vec![0.0; degree + 1];
            continue;
        }
        // d-th derivative of a unit-knot B-spline is the d-th backward
        // difference of the degree-(p - d) values.
        let mut diff = levels[degree - d].clone();
        for _ in 0..d {
            let mut next = vec![0.0; diff.len() + 1];
            for (j, slot) in next.iter_mut().enumerate() {
                let lo = if j >= 1 { diff[j - 1] } else { 0.0 };
                let hi = if j < diff.len() { diff[j] } else { 0.0 };
                *slot = lo - hi;
            }
            diff = next;
        }
        let scale = h.powi(-(d as i32));
        *slot = diff.into_iter().map(|v| v * scale).collect();
    }
    out
}

/// Cholesky factor of a symmetric positive definite mass matrix.
#[derive(Debug, Clone)]
pub struct MassFactor {
    chol: Cholesky<f64, Dyn>,
}

impl MassFactor {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        Cholesky::new(matrix)
            .map(|chol| Self { chol })
            .ok_or_else(|| Error::Factorization("mass matrix is not positive definite".into()))
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        self.chol
            .solve(&DVector::from_column_slice(rhs))
            .iter()
            .copied()
            .collect()
    }

    pub fn solve_vec2(&self, rhs: &[Vec2]) -> Vec<Vec2> {
        let n = rhs.len();
        let mut b = DMatrix::zeros(n, 2);
        for (i, v) in rhs.iter().enumerate() {
            b[(i, 0)] = v.x;
            b[(i, 1)] = v.y;
        }
        let x = self.chol.solve(&b);
        (0..n).map(|i| Vec2::new(x[(i, 0)], x[(i, 1)])).collect()
    }
}

/// A closed B-spline curve: `gamma(u) = sum_i P_i B_i(u)`.
#[derive(Debug, Clone)]
pub struct ControlCurve {
    space: Arc<SplineSpace>,
    points: Vec<Vec2>,
}

impl ControlCurve {
    pub fn new(space: Arc<SplineSpace>, points: Vec<Vec2>) -> Result<Self> {
        if points.len() != space.n_basis() {
            return Err(Error::DimensionMismatch {
                expected: space.n_basis(),
                got: points.len(),
            });
        }
        Ok(Self { space, points })
    }

    pub fn zeros(space: Arc<SplineSpace>) -> Self {
        let n = space.n_basis();
        Self {
            space,
            points: vec![Vec2::zeros(); n],
        }
    }

    pub fn space(&self) -> &Arc<SplineSpace> {
        &self.space
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn points_mut(&mut self) -> &mut [Vec2] {
        &mut self.points
    }

    pub fn into_points(self) -> Vec<Vec2> {
        self.points
    }

    /// `d^deriv gamma / du^deriv` at `u`.
    pub fn eval(&self, u: f64, deriv: usize) -> Result<Vec2> {
        let window = self.space.basis_eval(u, deriv)?;
        let n = self.space.n_basis();
        Ok(window
            .values
            .iter()
            .enumerate()
            .fold(Vec2::zeros(), |acc, (j, b)| {
                acc + self.points[(window.first + j) % n] * *b
            }))
    }

    pub fn eval_nodes(&self, deriv: usize) -> Vec<Vec2> {
        self.space.eval_nodes(&self.points, deriv)
    }

    /// Pointwise `(self + other) / 2` in coefficient space.
    pub fn midpoint(&self, other: &ControlCurve) -> ControlCurve {
        let points = self
            .points
            .iter()
            .zip(&other.points)
            .map(|(a, b)| (a + b) * 0.5)
            .collect();
        ControlCurve {
            space: self.space.clone(),
            points,
        }
    }

    pub fn map_points(&self, f: impl Fn(Vec2) -> Vec2) -> ControlCurve {
        ControlCurve {
            space: self.space.clone(),
            points: self.points.iter().map(|&p| f(p)).collect(),
        }
    }

    /// Coefficient-wise pairing `sum_i a_i . b_i`.
    pub fn dot_coeffs(&self, load: &[Vec2]) -> f64 {
        self.points.iter().zip(load).map(|(a, b)| a.dot(b)).sum()
    }
}

/// A scalar periodic spline field, used for the tangential velocity.
#[derive(Debug, Clone)]
pub struct ScalarField {
    space: Arc<SplineSpace>,
    coeffs: Vec<f64>,
}

impl ScalarField {
    pub fn new(space: Arc<SplineSpace>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.n_basis() {
            return Err(Error::DimensionMismatch {
                expected: space.n_basis(),
                got: coeffs.len(),
            });
        }
        Ok(Self { space, coeffs })
    }

    pub fn space(&self) -> &Arc<SplineSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, u: f64, deriv: usize) -> Result<f64> {
        let window = self.space.basis_eval(u, deriv)?;
        let n = self.space.n_basis();
        Ok(window
            .values
            .iter()
            .enumerate()
            .map(|(j, b)| self.coeffs[(window.first + j) % n] * b)
            .sum())
    }

    pub fn eval_nodes(&self, deriv: usize) -> Vec<f64> {
        self.space.eval_nodes_scalar(&self.coeffs, deriv)
    }
}
