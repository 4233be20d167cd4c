//! Elementwise and facetwise L² projections and nodal Lagrange interpolation.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mesh::{MeshTopology, Point};
use crate::refspace::{
    check_degree, edge_dim, edge_nodes, edge_rule, edge_to_reference, triangle_dim, triangle_rule, EdgeBasis,
    ReferenceBasis,
};
use crate::spaces::SpaceLayout;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionTarget {
    ElementL2,
    FacetL2,
    LagrangeNodal,
}

/// Element-broken P_k field with `C` components: `element * C nb + component * nb + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrokenField<const C: usize> {
    pub k: usize,
    pub coefficients: Vec<f64>,
}

/// Facetwise P_k field with `C` components: `facet * C ne + component * ne + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FacetField<const C: usize> {
    pub k: usize,
    pub coefficients: Vec<f64>,
}

impl<const C: usize> BrokenField<C> {
    pub fn eval(&self, basis: &ReferenceBasis, element: usize, xi: [f64; 2]) -> [f64; C] {
        let nb = basis.dim();
        let mut phi = alloc::vec![0.0; nb];
        basis.values(xi, &mut phi);
        let base = element * C * nb;
        core::array::from_fn(|c| phi.iter().enumerate().map(|(i, p)| p * self.coefficients[base + c * nb + i]).sum())
    }
}

impl<const C: usize> FacetField<C> {
    pub fn eval(&self, basis: &EdgeBasis, facet: usize, t: f64) -> [f64; C] {
        let ne = basis.dim();
        let mut psi = alloc::vec![0.0; ne];
        basis.values(t, &mut psi);
        let base = facet * C * ne;
        core::array::from_fn(|c| psi.iter().enumerate().map(|(j, p)| p * self.coefficients[base + c * ne + j]).sum())
    }
}

/// Per-element L² projection onto P_k.
pub fn project_element<const C: usize>(
    mesh: &MeshTopology,
    k: usize,
    exactness: usize,
    f: impl Fn(Point) -> [f64; C],
) -> Result<BrokenField<C>> {
    check_degree(k)?;
    let basis = ReferenceBasis::new(k)?;
    let rule = triangle_rule(exactness.max(2 * k))?;
    let nb = basis.dim();
    let table = basis.tabulate(&rule.points);
    // reference mass matrix; the affine Jacobian is constant so it only rescales
    let mass = DMatrix::from_fn(nb, nb, |i, j| {
        (0..rule.len()).map(|q| rule.weights[q] * table.value(q, i) * table.value(q, j)).sum::<f64>()
    });
    let lu = mass.lu();
    let mut coefficients = alloc::vec![0.0; mesh.num_elements() * C * nb];
    for el in 0..mesh.num_elements() {
        let g = mesh.geometry(el);
        let mut rhs = DMatrix::<f64>::zeros(nb, C);
        for (q, &xi) in rule.points.iter().enumerate() {
            let val = f(g.map(xi));
            for i in 0..nb {
                for c in 0..C {
                    rhs[(i, c)] += rule.weights[q] * table.value(q, i) * val[c];
                }
            }
        }
        let sol = lu.solve(&rhs).ok_or(Error::SingularLocal { element: el, context: "element mass matrix" })?;
        for c in 0..C {
            for i in 0..nb {
                coefficients[el * C * nb + c * nb + i] = sol[(i, c)];
            }
        }
    }
    Ok(BrokenField { k, coefficients })
}

/// Per-facet L² projection onto P_k(F) in the facet's own basis.
pub fn project_facet<const C: usize>(
    mesh: &MeshTopology,
    k: usize,
    exactness: usize,
    f: impl Fn(Point) -> [f64; C],
) -> Result<FacetField<C>> {
    check_degree(k)?;
    let basis = EdgeBasis::new(k)?;
    let rule = edge_rule(exactness.max(2 * k))?;
    let ne = basis.dim();
    let ts: Vec<f64> = rule.points.iter().map(|p| p[0]).collect();
    let table = basis.tabulate(&ts);
    let mass = DMatrix::from_fn(ne, ne, |i, j| {
        (0..rule.len()).map(|q| rule.weights[q] * table[q * ne + i] * table[q * ne + j]).sum::<f64>()
    });
    let lu = mass.lu();
    let mut coefficients = alloc::vec![0.0; mesh.num_facets() * C * ne];
    for fid in 0..mesh.num_facets() {
        let mut rhs = DMatrix::<f64>::zeros(ne, C);
        for (q, &t) in ts.iter().enumerate() {
            let val = f(mesh.facet_point(fid, t));
            for j in 0..ne {
                for c in 0..C {
                    rhs[(j, c)] += rule.weights[q] * table[q * ne + j] * val[c];
                }
            }
        }
        let sol = lu.solve(&rhs).ok_or(Error::SingularLocal { element: fid, context: "facet mass matrix" })?;
        for c in 0..C {
            for j in 0..ne {
                coefficients[fid * C * ne + c * ne + j] = sol[(j, c)];
            }
        }
    }
    Ok(FacetField { k, coefficients })
}

/// Nodal interpolation of a continuous function: element coefficients and the
/// facetwise trace coefficients, which coincide with the element interpolant on each facet.
pub fn lagrange_interpolate<const C: usize>(
    mesh: &MeshTopology,
    k: usize,
    f: impl Fn(Point) -> [f64; C],
) -> Result<(BrokenField<C>, FacetField<C>)> {
    check_degree(k)?;
    let basis = ReferenceBasis::new(k)?;
    let nb = basis.dim();
    let mut element = alloc::vec![0.0; mesh.num_elements() * C * nb];
    for el in 0..mesh.num_elements() {
        let g = mesh.geometry(el);
        for (i, &xi) in basis.nodes.iter().enumerate() {
            let val = f(g.map(xi));
            for c in 0..C {
                element[el * C * nb + c * nb + i] = val[c];
            }
        }
    }
    let ne = edge_dim(k);
    let mut facet = alloc::vec![0.0; mesh.num_facets() * C * ne];
    for fid in 0..mesh.num_facets() {
        for (j, &t) in edge_nodes(k).iter().enumerate() {
            let val = f(mesh.facet_point(fid, t));
            for c in 0..C {
                facet[fid * C * ne + c * ne + j] = val[c];
            }
        }
    }
    Ok((BrokenField { k, coefficients: element }, FacetField { k, coefficients: facet }))
}

/// Global coefficient vector of the nodal interpolant of (u, p) in `layout`,
/// traces included; eliminated boundary trace dofs are dropped and the multiplier is 0.
pub fn interpolate_discrete(
    mesh: &MeshTopology,
    layout: &SpaceLayout,
    u: impl Fn(Point) -> [f64; 2],
    p: impl Fn(Point) -> f64,
) -> Result<Vec<f64>> {
    layout.check_mesh(mesh)?;
    let (ue, uf) = lagrange_interpolate(mesh, layout.k, &u)?;
    let (pe, pf) = lagrange_interpolate(mesh, layout.k, |x| [p(x)])?;
    let mut x = alloc::vec![0.0; layout.total()];
    x[..layout.n_u].copy_from_slice(&ue.coefficients);
    x[layout.n_u..layout.n_u + layout.n_p].copy_from_slice(&pe.coefficients);
    let ne = layout.ne();
    for fid in 0..mesh.num_facets() {
        for j in 0..ne {
            for c in 0..2 {
                if let Some(d) = layout.ubar_dof(fid, j, c) {
                    x[d] = uf.coefficients[fid * 2 * ne + c * ne + j];
                }
            }
            x[layout.pbar_dof(fid, j)] = pf.coefficients[fid * ne + j];
        }
    }
    Ok(x)
}

/// ‖f − g‖_{L²(Ω)} for a broken field g.
pub fn broken_l2_error<const C: usize>(
    mesh: &MeshTopology,
    field: &BrokenField<C>,
    exactness: usize,
    f: impl Fn(Point) -> [f64; C],
) -> Result<f64> {
    let basis = ReferenceBasis::new(field.k)?;
    let rule = triangle_rule(exactness)?;
    let nb = triangle_dim(field.k);
    let table = basis.tabulate(&rule.points);
    let mut total = 0.0;
    for el in 0..mesh.num_elements() {
        let g = mesh.geometry(el);
        for (q, &xi) in rule.points.iter().enumerate() {
            let exact = f(g.map(xi));
            let phi = table.values_at(q);
            for c in 0..C {
                let base = el * C * nb + c * nb;
                let v: f64 = (0..nb).map(|i| phi[i] * field.coefficients[base + i]).sum();
                total += rule.weights[q] * g.det.abs() * (exact[c] - v) * (exact[c] - v);
            }
        }
    }
    Ok(libm::sqrt(total))
}

/// ‖f − g‖_{L²(F)} summed over all facets of the skeleton.
pub fn facet_l2_error<const C: usize>(
    mesh: &MeshTopology,
    field: &FacetField<C>,
    exactness: usize,
    f: impl Fn(Point) -> [f64; C],
) -> Result<f64> {
    let basis = EdgeBasis::new(field.k)?;
    let rule = edge_rule(exactness)?;
    let mut total = 0.0;
    for fid in 0..mesh.num_facets() {
        let len = mesh.facets[fid].length;
        for (q, p) in rule.points.iter().enumerate() {
            let exact = f(mesh.facet_point(fid, p[0]));
            let v = field.eval(&basis, fid, p[0]);
            for c in 0..C {
                total += rule.weights[q] * len * (exact[c] - v[c]) * (exact[c] - v[c]);
            }
        }
    }
    Ok(libm::sqrt(total))
}

/// Σ_K ‖a − b‖²_{∂K} between a broken field's element traces and a facet field.
pub fn element_facet_gap<const C: usize>(
    mesh: &MeshTopology,
    element: &BrokenField<C>,
    facet: &FacetField<C>,
    exactness: usize,
) -> Result<Vec<f64>> {
    let basis = ReferenceBasis::new(element.k)?;
    let ebasis = EdgeBasis::new(facet.k)?;
    let rule = edge_rule(exactness)?;
    let mut out = alloc::vec![0.0; mesh.num_elements()];
    for (el, gap) in out.iter_mut().enumerate() {
        for e in 0..3 {
            let fid = mesh.element_facets[el][e];
            let agrees = mesh.edge_agrees_with_facet(el, e);
            let len = mesh.facets[fid].length;
            for (q, p) in rule.points.iter().enumerate() {
                let t = p[0];
                let s = if agrees { t } else { 1.0 - t };
                let a = element.eval(&basis, el, edge_to_reference(e, s));
                let b = facet.eval(&ebasis, fid, t);
                for c in 0..C {
                    *gap += rule.weights[q] * len * (a[c] - b[c]) * (a[c] - b[c]);
                }
            }
        }
    }
    Ok(out)
}

/// Max over elements and test functions of |(Π_K f − f, φ_i)_K| / ‖f‖_K.
pub fn element_orthogonality_residual<const C: usize>(
    mesh: &MeshTopology,
    field: &BrokenField<C>,
    exactness: usize,
    f: impl Fn(Point) -> [f64; C],
) -> Result<f64> {
    let basis = ReferenceBasis::new(field.k)?;
    let rule = triangle_rule(exactness)?;
    let nb = basis.dim();
    let table = basis.tabulate(&rule.points);
    let mut worst: f64 = 0.0;
    for el in 0..mesh.num_elements() {
        let g = mesh.geometry(el);
        let mut norm = 0.0;
        let mut pairing = alloc::vec![0.0; C * nb];
        for (q, &xi) in rule.points.iter().enumerate() {
            let w = rule.weights[q] * g.det.abs();
            let exact = f(g.map(xi));
            let approx = field.eval(&basis, el, xi);
            for c in 0..C {
                norm += w * exact[c] * exact[c];
                for i in 0..nb {
                    pairing[c * nb + i] += w * (approx[c] - exact[c]) * table.value(q, i);
                }
            }
        }
        let scale = libm::sqrt(norm).max(f64::MIN_POSITIVE);
        for v in pairing {
            worst = worst.max(v.abs() / scale);
        }
    }
    Ok(worst)
}

/// Max over facets and test functions of |(Π_F f − f, ψ_j)_F| / ‖f‖_F.
pub fn facet_orthogonality_residual<const C: usize>(
    mesh: &MeshTopology,
    field: &FacetField<C>,
    exactness: usize,
    f: impl Fn(Point) -> [f64; C],
) -> Result<f64> {
    let basis = EdgeBasis::new(field.k)?;
    let rule = edge_rule(exactness)?;
    let ne = basis.dim();
    let ts: Vec<f64> = rule.points.iter().map(|p| p[0]).collect();
    let table = basis.tabulate(&ts);
    let mut worst: f64 = 0.0;
    for fid in 0..mesh.num_facets() {
        let len = mesh.facets[fid].length;
        let mut norm = 0.0;
        let mut pairing = alloc::vec![0.0; C * ne];
        for (q, &t) in ts.iter().enumerate() {
            let w = rule.weights[q] * len;
            let exact = f(mesh.facet_point(fid, t));
            let approx = field.eval(&basis, fid, t);
            for c in 0..C {
                norm += w * exact[c] * exact[c];
                for j in 0..ne {
                    pairing[c * ne + j] += w * (approx[c] - exact[c]) * table[q * ne + j];
                }
            }
        }
        let scale = libm::sqrt(norm).max(f64::MIN_POSITIVE);
        for v in pairing {
            worst = worst.max(v.abs() / scale);
        }
    }
    Ok(worst)
}
