//! Energy norms, L² errors and observed convergence rates.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::forms::{ExactSolution, LocalQuadrature, OseenConfig};
use crate::mesh::{MeshTopology, Point};
use crate::spaces::{ElementField, SpaceLayout};

/// Pairwise summation; the result only depends on the order of `values`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        values.iter().sum()
    } else {
        let (a, b) = values.split_at(values.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// Squared contributions to the energy norm.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyBreakdown {
    /// ν (Σ‖∇v‖²_K + Σ (η/h_K)‖v̄ − v‖²_{∂K})
    pub viscous: f64,
    /// Σ σ‖v‖²_K
    pub reaction: f64,
    /// ½ Σ ‖|b·n|^{1/2}(v − v̄)‖²_{∂K}
    pub upwind: f64,
    /// Σ (α/ν) h_K ‖q̄ − q‖²_{∂K}
    pub pressure_jump: f64,
    /// γ‖q‖²
    pub pressure_l2: f64,
}

impl EnergyBreakdown {
    /// Square of the natural norm (without the γ term).
    pub fn natural_squared(&self) -> f64 {
        self.viscous + self.reaction + self.upwind + self.pressure_jump
    }

    pub fn squared(&self) -> f64 {
        self.natural_squared() + self.pressure_l2
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.squared())
    }
}

/// Evaluates the energy norm of a discrete pair, or of `exact − discrete` when an
/// exact solution is given (its trace serving as the facet part).
pub fn energy_norm(
    mesh: &MeshTopology,
    layout: &SpaceLayout,
    config: &OseenConfig,
    coefficients: &[f64],
    exact: Option<&dyn ExactSolution>,
) -> Result<EnergyBreakdown> {
    layout.check_mesh(mesh)?;
    if coefficients.len() < layout.multiplier() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "coefficient vector has {} entries, layout expects {}",
            coefficients.len(),
            layout.total()
        )));
    }
    let quad = LocalQuadrature::for_source(layout, config)?;
    let (nb, ne) = (layout.nb(), layout.ne());
    let ne_el = mesh.num_elements();
    let mut parts = [
        alloc::vec![0.0; ne_el],
        alloc::vec![0.0; ne_el],
        alloc::vec![0.0; ne_el],
        alloc::vec![0.0; ne_el],
        alloc::vec![0.0; ne_el],
        alloc::vec![0.0; ne_el],
    ];

    for el in 0..ne_el {
        let geo = mesh.geometry(el);
        let h = config.element_size.of(mesh, el);
        let u_coef = |c: usize, i: usize| coefficients[layout.u_dof(el, c, i)];
        let p_coef = |i: usize| coefficients[layout.p_dof(el, i)];

        let (mut grad_sq, mut mass_sq, mut p_sq) = (0.0, 0.0, 0.0);
        for (q, &xi) in quad.volume_points.iter().enumerate() {
            let x = geo.map(xi);
            let w = quad.volume_weights[q] * geo.det.abs();
            let phi = quad.volume.values_at(q);
            let grads = quad.volume.gradients_at(q);
            let (eu, eg, ep) = match exact {
                Some(s) => (s.velocity(x), s.velocity_gradient(x), s.pressure(x)),
                None => ([0.0; 2], [[0.0; 2]; 2], 0.0),
            };
            for c in 0..2 {
                let mut v = eu[c];
                let mut g = eg[c];
                for i in 0..nb {
                    let gi = geo.gradient(grads[i]);
                    v -= u_coef(c, i) * phi[i];
                    g[0] -= u_coef(c, i) * gi[0];
                    g[1] -= u_coef(c, i) * gi[1];
                }
                mass_sq += w * v * v;
                grad_sq += w * (g[0] * g[0] + g[1] * g[1]);
            }
            let pv = ep - (0..nb).map(|i| p_coef(i) * phi[i]).sum::<f64>();
            p_sq += w * pv * pv;
        }

        let (mut jump_sq, mut upwind_sq, mut pjump_sq) = (0.0, 0.0, 0.0);
        for e in 0..3 {
            let fid = mesh.element_facets[el][e];
            let facet = &mesh.facets[fid];
            let side = facet.sides().find(|s| s.element == el).expect("facet adjacency");
            let agrees = mesh.edge_agrees_with_facet(el, e);
            let table = &quad.edge[e][usize::from(agrees)];
            for (q, &t) in quad.facet_params.iter().enumerate() {
                let x = mesh.facet_point(fid, t);
                let w = quad.facet_weights[q] * facet.length;
                let phi = table.values_at(q);
                let psi = &quad.trace[q * ne..(q + 1) * ne];
                let (eu, ep) = match exact {
                    Some(s) => (s.velocity(x), s.pressure(x)),
                    None => ([0.0; 2], 0.0),
                };
                let bn = {
                    let b = config.convection.eval(x);
                    b[0] * side.normal[0] + b[1] * side.normal[1]
                };
                for c in 0..2 {
                    // (exact − u_h) − (exact − ū_h) = ū_h − u_h
                    let v: f64 = eu[c] - (0..nb).map(|i| u_coef(c, i) * phi[i]).sum::<f64>();
                    let vbar: f64 = eu[c]
                        - (0..ne)
                            .map(|j| layout.ubar_dof(fid, j, c).map_or(0.0, |d| coefficients[d]) * psi[j])
                            .sum::<f64>();
                    let d = vbar - v;
                    jump_sq += w * d * d;
                    upwind_sq += w * bn.abs() * d * d;
                }
                let qv = ep - (0..nb).map(|i| p_coef(i) * phi[i]).sum::<f64>();
                let qbar = ep - (0..ne).map(|j| coefficients[layout.pbar_dof(fid, j)] * psi[j]).sum::<f64>();
                pjump_sq += w * (qbar - qv) * (qbar - qv);
            }
        }

        parts[0][el] = config.nu * grad_sq;
        parts[1][el] = config.nu * config.eta / h * jump_sq;
        parts[2][el] = config.sigma * mass_sq;
        parts[3][el] = 0.5 * upwind_sq;
        parts[4][el] = config.alpha / config.nu * h * pjump_sq;
        parts[5][el] = config.gamma * p_sq;
    }

    Ok(EnergyBreakdown {
        viscous: pairwise_sum(&parts[0]) + pairwise_sum(&parts[1]),
        reaction: pairwise_sum(&parts[2]),
        upwind: pairwise_sum(&parts[3]),
        pressure_jump: pairwise_sum(&parts[4]),
        pressure_l2: pairwise_sum(&parts[5]),
    })
}

/// `½ Σ ‖|b·n|^{1/2}(v − v̄)‖²_{∂K}` of a discrete velocity pair.
pub fn upwind_seminorm_squared(mesh: &MeshTopology, layout: &SpaceLayout, config: &OseenConfig, coefficients: &[f64]) -> Result<f64> {
    Ok(energy_norm(mesh, layout, config, coefficients, None)?.upwind)
}

/// `Σ (α/ν) h_K ‖q̄ − q‖²_{∂K}` of a discrete pressure pair.
pub fn pressure_seminorm_squared(mesh: &MeshTopology, layout: &SpaceLayout, config: &OseenConfig, coefficients: &[f64]) -> Result<f64> {
    Ok(energy_norm(mesh, layout, config, coefficients, None)?.pressure_jump)
}

/// ‖exact − field‖_{L²(Ω)} for an element field; pressure uses slot 0 of `exact`.
pub fn l2_error(
    mesh: &MeshTopology,
    layout: &SpaceLayout,
    coefficients: &[f64],
    field: ElementField,
    exact: &dyn Fn(Point) -> [f64; 2],
    exactness: usize,
) -> Result<f64> {
    layout.check_mesh(mesh)?;
    let quad = LocalQuadrature::new(layout, exactness, 0)?;
    let nb = layout.nb();
    let components = match field {
        ElementField::Velocity => 2,
        ElementField::Pressure => 1,
    };
    let mut per_element = alloc::vec![0.0; mesh.num_elements()];
    for (el, acc) in per_element.iter_mut().enumerate() {
        let geo = mesh.geometry(el);
        for (q, &xi) in quad.volume_points.iter().enumerate() {
            let w = quad.volume_weights[q] * geo.det.abs();
            let phi = quad.volume.values_at(q);
            let ex = exact(geo.map(xi));
            for c in 0..components {
                let dof = |i: usize| match field {
                    ElementField::Velocity => layout.u_dof(el, c, i),
                    ElementField::Pressure => layout.p_dof(el, i),
                };
                let v = ex[c] - (0..nb).map(|i| coefficients[dof(i)] * phi[i]).sum::<f64>();
                *acc += w * v * v;
            }
        }
    }
    Ok(libm::sqrt(pairwise_sum(&per_element)))
}

/// ∫_Ω p_h.
pub fn pressure_mean(mesh: &MeshTopology, layout: &SpaceLayout, coefficients: &[f64]) -> Result<f64> {
    let quad = LocalQuadrature::new(layout, 2 * layout.k, 0)?;
    let weights = crate::forms::pressure_mean_weights(mesh, layout, &quad);
    let values: Vec<f64> = weights.iter().enumerate().map(|(i, w)| w * coefficients[layout.offset_p() + i]).collect();
    Ok(pairwise_sum(&values))
}

/// Errors of one discrete solution against the exact one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub h: f64,
    pub e_u: f64,
    pub e_p: f64,
    pub e_energy: f64,
    pub breakdown: EnergyBreakdown,
}

impl ErrorReport {
    pub fn compute(
        mesh: &MeshTopology,
        layout: &SpaceLayout,
        config: &OseenConfig,
        coefficients: &[f64],
        exact: &dyn ExactSolution,
    ) -> Result<Self> {
        let s = config.quadrature.source;
        let e_u = l2_error(mesh, layout, coefficients, ElementField::Velocity, &|x| exact.velocity(x), s)?;
        let e_p = l2_error(mesh, layout, coefficients, ElementField::Pressure, &|x| [exact.pressure(x), 0.0], s)?;
        let breakdown = energy_norm(mesh, layout, config, coefficients, Some(exact))?;
        Ok(Self { h: mesh.h(), e_u, e_p, e_energy: breakdown.norm(), breakdown })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub r_u: f64,
    pub r_p: f64,
    pub r_dg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub reports: Vec<ErrorReport>,
    /// `rates[i]` compares `reports[i - 1]` with `reports[i]`; the first entry is `None`.
    pub rates: Vec<Option<Rates>>,
}

/// `log(e(h) / e(h/2)) / log 2`.
pub fn observed_rate(coarse: f64, fine: f64) -> f64 {
    libm::log(coarse / fine) / core::f64::consts::LN_2
}

pub fn compute_rates(reports: Vec<ErrorReport>) -> Result<ConvergenceRecord> {
    for r in &reports {
        if !(r.e_u > 0.0 && r.e_p > 0.0 && r.e_energy > 0.0) {
            return Err(Error::InvalidParameter(alloc::format!("non-positive error at h = {}", r.h)));
        }
    }
    for w in reports.windows(2) {
        if (w[0].h / w[1].h - 2.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(alloc::format!(
                "mesh sizes {} and {} are not a halving sequence",
                w[0].h,
                w[1].h
            )));
        }
    }
    let mut rates = alloc::vec![None];
    rates.extend(reports.windows(2).map(|w| {
        Some(Rates {
            r_u: observed_rate(w[0].e_u, w[1].e_u),
            r_p: observed_rate(w[0].e_p, w[1].e_p),
            r_dg: observed_rate(w[0].e_energy, w[1].e_energy),
        })
    }));
    rates.truncate(reports.len().max(1));
    if reports.is_empty() {
        rates.clear();
    }
    Ok(ConvergenceRecord { reports, rates })
}
