//! Gauss–Legendre rules on [0, 1] and collapsed (Duffy) product rules on the
//! reference triangle {x, y ≥ 0, x + y ≤ 1}.

use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const MAX_TRIANGLE_EXACTNESS: usize = 40;
pub const MAX_EDGE_EXACTNESS: usize = 61;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<const D: usize> {
    pub points: Vec<[f64; D]>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

pub type TriangleRule = QuadratureRule<2>;
pub type EdgeRule = QuadratureRule<1>;

impl<const D: usize> QuadratureRule<D> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, f: impl Fn([f64; D]) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub(crate) fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = alloc::vec![0.0; m];
    let mut w = alloc::vec![0.0; m];
    let pi = core::f64::consts::PI;
    for i in 0..m.div_ceil(2) {
        let mut z = libm::cos(pi * (i as f64 + 0.75) / (m as f64 + 0.5));
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=m {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_m(z), p0 = P_{m-1}(z)
            dp = m as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[m - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[m - 1 - i] = wi;
    }
    if m % 2 == 1 {
        x[m / 2] = 0.0;
    }
    (x, w)
}

/// Gauss–Legendre rule on [0, 1] exact for polynomials of degree `exactness`.
pub fn edge_rule(exactness: usize) -> Result<EdgeRule> {
    if exactness > MAX_EDGE_EXACTNESS {
        return Err(Error::QuadratureTooHigh {
            kind: "edge",
            requested: exactness,
            max: MAX_EDGE_EXACTNESS,
        });
    }
    let m = exactness / 2 + 1;
    let (x, w) = gauss_legendre(m);
    Ok(EdgeRule {
        points: x.iter().map(|&t| [0.5 * (t + 1.0)]).collect(),
        weights: w.iter().map(|&w| 0.5 * w).collect(),
        exactness,
    })
}

/// Collapsed product rule on the reference triangle exact for total degree `exactness`.
pub fn triangle_rule(exactness: usize) -> Result<TriangleRule> {
    if exactness > MAX_TRIANGLE_EXACTNESS {
        return Err(Error::QuadratureTooHigh {
            kind: "triangle",
            requested: exactness,
            max: MAX_TRIANGLE_EXACTNESS,
        });
    }
    // the Jacobian (1 - s) raises the degree in s by one
    let ms = (exactness + 1) / 2 + 1;
    let mt = exactness / 2 + 1;
    let (xs, ws) = gauss_legendre(ms);
    let (xt, wt) = gauss_legendre(mt);
    let mut points = Vec::with_capacity(ms * mt);
    let mut weights = Vec::with_capacity(ms * mt);
    for (&a, &wa) in xs.iter().zip(&ws) {
        let s = 0.5 * (a + 1.0);
        for (&b, &wb) in xt.iter().zip(&wt) {
            let t = 0.5 * (b + 1.0);
            points.push([s, t * (1.0 - s)]);
            weights.push(0.25 * wa * wb * (1.0 - s));
        }
    }
    Ok(TriangleRule { points, weights, exactness })
}
