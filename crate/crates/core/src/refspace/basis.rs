//! Nodal Lagrange bases of degree k on the reference triangle and reference edge.
//!
//! Triangle nodes are ordered vertices first, then the k-1 equispaced points of
//! each edge (edge e runs from vertex e+1 to vertex e+2), then interior points.
//! Edge nodes on [0, 1] are ordered 0, 1, then 1/k, ..., (k-1)/k.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const MAX_DEGREE: usize = 3;

pub const REFERENCE_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

pub fn check_degree(k: usize) -> Result<()> {
    if (1..=MAX_DEGREE).contains(&k) {
        Ok(())
    } else {
        Err(Error::UnsupportedDegree(k))
    }
}

pub fn triangle_dim(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

pub fn edge_dim(k: usize) -> usize {
    k + 1
}

fn monomial_exponents(k: usize) -> Vec<(i32, i32)> {
    let mut out = Vec::with_capacity(triangle_dim(k));
    for d in 0..=k as i32 {
        for b in 0..=d {
            out.push((d - b, b));
        }
    }
    out
}

fn ipow(x: f64, e: i32) -> f64 {
    let mut r = 1.0;
    for _ in 0..e {
        r *= x;
    }
    r
}

/// Lagrange points of the reference triangle in the documented order.
pub fn triangle_nodes(k: usize) -> Vec<[f64; 2]> {
    let mut nodes: Vec<[f64; 2]> = REFERENCE_VERTICES.to_vec();
    for e in 0..3 {
        let a = REFERENCE_VERTICES[(e + 1) % 3];
        let b = REFERENCE_VERTICES[(e + 2) % 3];
        for j in 1..k {
            let s = j as f64 / k as f64;
            nodes.push([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
        }
    }
    for j in 1..k {
        for i in 1..k - j {
            nodes.push([i as f64 / k as f64, j as f64 / k as f64]);
        }
    }
    nodes
}

/// Lagrange points on the reference edge [0, 1] in the documented order.
pub fn edge_nodes(k: usize) -> Vec<f64> {
    let mut nodes = alloc::vec![0.0, 1.0];
    nodes.extend((1..k).map(|j| j as f64 / k as f64));
    nodes
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceBasis {
    pub k: usize,
    pub nodes: Vec<[f64; 2]>,
    exponents: Vec<(i32, i32)>,
    /// Column i holds the monomial coefficients of basis function i.
    coefficients: DMatrix<f64>,
}

impl ReferenceBasis {
    pub fn new(k: usize) -> Result<Self> {
        check_degree(k)?;
        let nodes = triangle_nodes(k);
        let exponents = monomial_exponents(k);
        let dim = nodes.len();
        let vandermonde = DMatrix::from_fn(dim, dim, |i, m| {
            let (a, b) = exponents[m];
            ipow(nodes[i][0], a) * ipow(nodes[i][1], b)
        });
        // V C = I: row i of V is the monomials at node i
        let coefficients = vandermonde
            .try_inverse()
            .ok_or(Error::SingularLocal { element: 0, context: "Lagrange Vandermonde matrix" })?;
        Ok(Self { k, nodes, exponents, coefficients })
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    /// Basis values at a reference point.
    pub fn values(&self, p: [f64; 2], out: &mut [f64]) {
        let mono: Vec<f64> = self.exponents.iter().map(|&(a, b)| ipow(p[0], a) * ipow(p[1], b)).collect();
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..mono.len()).map(|m| self.coefficients[(m, i)] * mono[m]).sum();
        }
    }

    /// Reference gradients at a reference point.
    pub fn gradients(&self, p: [f64; 2], out: &mut [[f64; 2]]) {
        let dmono: Vec<[f64; 2]> = self
            .exponents
            .iter()
            .map(|&(a, b)| {
                let dx = if a > 0 { a as f64 * ipow(p[0], a - 1) * ipow(p[1], b) } else { 0.0 };
                let dy = if b > 0 { b as f64 * ipow(p[0], a) * ipow(p[1], b - 1) } else { 0.0 };
                [dx, dy]
            })
            .collect();
        for (i, o) in out.iter_mut().enumerate() {
            let mut g = [0.0; 2];
            for (m, d) in dmono.iter().enumerate() {
                let c = self.coefficients[(m, i)];
                g[0] += c * d[0];
                g[1] += c * d[1];
            }
            *o = g;
        }
    }
}

/// Values and reference gradients of a basis tabulated at a set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisTable {
    pub dim: usize,
    /// `values[q * dim + i]`
    pub values: Vec<f64>,
    pub gradients: Vec<[f64; 2]>,
}

impl BasisTable {
    pub fn value(&self, q: usize, i: usize) -> f64 {
        self.values[q * self.dim + i]
    }

    pub fn values_at(&self, q: usize) -> &[f64] {
        &self.values[q * self.dim..(q + 1) * self.dim]
    }

    pub fn gradients_at(&self, q: usize) -> &[[f64; 2]] {
        &self.gradients[q * self.dim..(q + 1) * self.dim]
    }
}

pub fn eval_basis(k: usize, points: &[[f64; 2]]) -> Result<BasisTable> {
    let basis = ReferenceBasis::new(k)?;
    Ok(basis.tabulate(points))
}

impl ReferenceBasis {
    pub fn tabulate(&self, points: &[[f64; 2]]) -> BasisTable {
        let dim = self.dim();
        let mut values = alloc::vec![0.0; dim * points.len()];
        let mut gradients = alloc::vec![[0.0; 2]; dim * points.len()];
        for (q, &p) in points.iter().enumerate() {
            self.values(p, &mut values[q * dim..(q + 1) * dim]);
            self.gradients(p, &mut gradients[q * dim..(q + 1) * dim]);
        }
        BasisTable { dim, values, gradients }
    }
}

/// Lagrange basis of degree k on [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeBasis {
    pub k: usize,
    pub nodes: Vec<f64>,
}

impl EdgeBasis {
    pub fn new(k: usize) -> Result<Self> {
        check_degree(k)?;
        Ok(Self { k, nodes: edge_nodes(k) })
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn values(&self, t: f64, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let xi = self.nodes[i];
            *o = self
                .nodes
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &xj)| (t - xj) / (xi - xj))
                .product();
        }
    }

    pub fn tabulate(&self, ts: &[f64]) -> Vec<f64> {
        let dim = self.dim();
        let mut out = alloc::vec![0.0; dim * ts.len()];
        for (q, &t) in ts.iter().enumerate() {
            self.values(t, &mut out[q * dim..(q + 1) * dim]);
        }
        out
    }
}

/// Reference-triangle point on local edge `e` at parameter `s` (from vertex e+1 towards e+2).
pub fn edge_to_reference(e: usize, s: f64) -> [f64; 2] {
    let a = REFERENCE_VERTICES[(e + 1) % 3];
    let b = REFERENCE_VERTICES[(e + 2) % 3];
    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
}
