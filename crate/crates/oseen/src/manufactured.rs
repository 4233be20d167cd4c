//! The smooth test solution used by the convergence studies.
//!
//! `u = (sin²(πx) sin(2πy), −sin(2πx) sin²(πy))`, `p = sin(2πx) sin(2πy)`,
//! divergence free, zero on the boundary of the unit square, `∫p = 0`.

use std::f64::consts::PI;

use oseen_core::forms::ExactSolution;
use oseen_core::mesh::Point;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedCase {
    pub nu: f64,
    pub sigma: f64,
    pub convection: [f64; 2],
}

struct Trig {
    sx: f64,
    cx: f64,
    s2x: f64,
    c2x: f64,
    sy: f64,
    cy: f64,
    s2y: f64,
    c2y: f64,
}

fn trig(x: Point) -> Trig {
    let (sx, cx) = (PI * x[0]).sin_cos();
    let (sy, cy) = (PI * x[1]).sin_cos();
    let (s2x, c2x) = (2.0 * PI * x[0]).sin_cos();
    let (s2y, c2y) = (2.0 * PI * x[1]).sin_cos();
    Trig { sx, cx, s2x, c2x, sy, cy, s2y, c2y }
}

impl ManufacturedCase {
    pub fn new(nu: f64, sigma: f64, convection: [f64; 2]) -> Self {
        Self { nu, sigma, convection }
    }

    pub fn velocity(&self, x: Point) -> [f64; 2] {
        let t = trig(x);
        [t.sx * t.sx * t.s2y, -t.s2x * t.sy * t.sy]
    }

    /// Row c is ∇u_c.
    pub fn velocity_gradient(&self, x: Point) -> [[f64; 2]; 2] {
        let t = trig(x);
        [
            [2.0 * PI * t.sx * t.cx * t.s2y, 2.0 * PI * t.sx * t.sx * t.c2y],
            [-2.0 * PI * t.c2x * t.sy * t.sy, -2.0 * PI * t.s2x * t.sy * t.cy],
        ]
    }

    pub fn velocity_laplacian(&self, x: Point) -> [f64; 2] {
        let t = trig(x);
        let pi2 = PI * PI;
        [
            2.0 * pi2 * t.c2x * t.s2y - 4.0 * pi2 * t.sx * t.sx * t.s2y,
            4.0 * pi2 * t.s2x * t.sy * t.sy - 2.0 * pi2 * t.s2x * t.c2y,
        ]
    }

    pub fn pressure(&self, x: Point) -> f64 {
        let t = trig(x);
        t.s2x * t.s2y
    }

    pub fn pressure_gradient(&self, x: Point) -> [f64; 2] {
        let t = trig(x);
        [2.0 * PI * t.c2x * t.s2y, 2.0 * PI * t.s2x * t.c2y]
    }

    /// `f = −νΔu + (b·∇)u + σu + ∇p`.
    pub fn source(&self, x: Point) -> [f64; 2] {
        let u = self.velocity(x);
        let g = self.velocity_gradient(x);
        let lap = self.velocity_laplacian(x);
        let gp = self.pressure_gradient(x);
        let b = self.convection;
        core::array::from_fn(|c| {
            -self.nu * lap[c] + b[0] * g[c][0] + b[1] * g[c][1] + self.sigma * u[c] + gp[c]
        })
    }
}

impl ExactSolution for ManufacturedCase {
    fn velocity(&self, x: Point) -> [f64; 2] {
        ManufacturedCase::velocity(self, x)
    }

    fn velocity_gradient(&self, x: Point) -> [[f64; 2]; 2] {
        ManufacturedCase::velocity_gradient(self, x)
    }

    fn pressure(&self, x: Point) -> f64 {
        ManufacturedCase::pressure(self, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn case() -> ManufacturedCase {
        ManufacturedCase::new(1.0, 1.0, [1.0, 0.0])
    }

    #[test]
    fn point_values() {
        let c = case();
        assert!((c.velocity([0.5, 0.25])[0] - 1.0).abs() < 1e-15);
        for s in [0.0, 0.3, 1.0] {
            for x in [[0.0, s], [1.0, s], [s, 0.0], [s, 1.0]] {
                let u = c.velocity(x);
                assert!(u[0].abs() < 1e-15 && u[1].abs() < 1e-15);
            }
        }
    }

    #[test]
    fn divergence_free() {
        let c = case();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let x = [rng.gen::<f64>(), rng.gen::<f64>()];
            let g = c.velocity_gradient(x);
            assert!((g[0][0] + g[1][1]).abs() < 1e-13);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let c = ManufacturedCase::new(0.1, 1.0, [1.0, 0.0]);
        let h = 1e-5;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let x = [rng.gen::<f64>(), rng.gen::<f64>()];
            let g = c.velocity_gradient(x);
            let gp = c.pressure_gradient(x);
            for d in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[d] += h;
                xm[d] -= h;
                for comp in 0..2 {
                    let fd = (c.velocity(xp)[comp] - c.velocity(xm)[comp]) / (2.0 * h);
                    assert!((fd - g[comp][d]).abs() < 1e-7);
                }
                assert!(((c.pressure(xp) - c.pressure(xm)) / (2.0 * h) - gp[d]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn source_matches_finite_differences() {
        // second derivatives as central differences of the (separately checked) gradient
        let c = case();
        let x = [0.3, 0.7];
        let h = 1e-5;
        let shift = |d: usize, s: f64| {
            let mut y = x;
            y[d] += s;
            y
        };
        let f = c.source(x);
        for comp in 0..2 {
            let lap: f64 = (0..2)
                .map(|d| (c.velocity_gradient(shift(d, h))[comp][d] - c.velocity_gradient(shift(d, -h))[comp][d]) / (2.0 * h))
                .sum();
            let dudx = (c.velocity(shift(0, h))[comp] - c.velocity(shift(0, -h))[comp]) / (2.0 * h);
            let dp = (c.pressure(shift(comp, h)) - c.pressure(shift(comp, -h))) / (2.0 * h);
            let fd = -lap + dudx + c.velocity(x)[comp] + dp;
            assert!((fd - f[comp]).abs() <= 1e-7, "{comp}: {fd} vs {}", f[comp]);
        }
    }
}
