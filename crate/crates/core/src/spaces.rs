//! Degree-of-freedom layout for the element fields (u, p) and the trace fields
//! (ū, p̄) under the three trace-continuity variants.
//!
//! Global unknown ordering:
//!
//! | block | index |
//! |-------|-------|
//! | u     | `element * 2 nb + component * nb + i` |
//! | p     | `n_u + element * nb + i` |
//! | ū     | `n_u + n_p + 2 * free_node + component` |
//! | p̄     | `n_u + n_p + n_ubar + node` |
//! | mean  | last |
//!
//! Trace nodes are scalar: per facet `k + 1` nodes for discontinuous traces,
//! vertices followed by `k - 1` interior nodes per facet for continuous ones.
//! Facet-local node `j` is `0` at `facet.vertices[0]`, `1` at `facet.vertices[1]`
//! and `j >= 2` at parameter `(j - 1) / k`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mesh::MeshTopology;
use crate::refspace::{check_degree, edge_dim, triangle_dim, EdgeBasis, ReferenceBasis};
use crate::sparse::{CsrMatrix, TripletBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodVariant {
    /// Discontinuous velocity and pressure traces.
    Hdg,
    /// Continuous velocity trace, discontinuous pressure trace.
    Ehdg,
    /// Continuous velocity and pressure traces.
    Edg,
}

impl MethodVariant {
    pub const ALL: [MethodVariant; 3] = [MethodVariant::Hdg, MethodVariant::Ehdg, MethodVariant::Edg];

    pub fn continuous_velocity_trace(self) -> bool {
        !matches!(self, MethodVariant::Hdg)
    }

    pub fn continuous_pressure_trace(self) -> bool {
        matches!(self, MethodVariant::Edg)
    }

    pub fn name(self) -> &'static str {
        match self {
            MethodVariant::Hdg => "HDG",
            MethodVariant::Ehdg => "E-HDG",
            MethodVariant::Edg => "EDG",
        }
    }
}

/// Scalar trace node numbering over the skeleton.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceNodes {
    pub continuous: bool,
    pub count: usize,
    /// `facet * (k + 1) + j` → node.
    pub facet_nodes: Vec<usize>,
}

impl TraceNodes {
    fn new(mesh: &MeshTopology, k: usize, continuous: bool) -> Self {
        let ne = edge_dim(k);
        let mut facet_nodes = Vec::with_capacity(mesh.num_facets() * ne);
        let count = if continuous {
            let nv = mesh.num_vertices();
            for (f, facet) in mesh.facets.iter().enumerate() {
                facet_nodes.push(facet.vertices[0]);
                facet_nodes.push(facet.vertices[1]);
                facet_nodes.extend((0..k - 1).map(|j| nv + f * (k - 1) + j));
            }
            nv + mesh.num_facets() * (k - 1)
        } else {
            facet_nodes.extend(0..mesh.num_facets() * ne);
            mesh.num_facets() * ne
        };
        Self { continuous, count, facet_nodes }
    }

    pub fn node(&self, k: usize, facet: usize, j: usize) -> usize {
        self.facet_nodes[facet * edge_dim(k) + j]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceLayout {
    pub variant: MethodVariant,
    pub k: usize,
    pub n_elements: usize,
    pub n_facets: usize,
    pub mesh_n: usize,
    pub basis: ReferenceBasis,
    pub edge_basis: EdgeBasis,
    pub velocity_trace: TraceNodes,
    pub pressure_trace: TraceNodes,
    /// Velocity trace nodes located on ∂Ω (boundary facets and boundary vertices); both components are eliminated.
    pub velocity_constrained: Vec<bool>,
    velocity_free_index: Vec<Option<usize>>,
    pub n_u: usize,
    pub n_p: usize,
    pub n_ubar: usize,
    pub n_pbar: usize,
}

pub fn build_layout(mesh: &MeshTopology, k: usize, variant: MethodVariant) -> Result<SpaceLayout> {
    check_degree(k)?;
    let nb = triangle_dim(k);
    let velocity_trace = TraceNodes::new(mesh, k, variant.continuous_velocity_trace());
    let pressure_trace = TraceNodes::new(mesh, k, variant.continuous_pressure_trace());

    let mut velocity_constrained = alloc::vec![false; velocity_trace.count];
    for (f, facet) in mesh.facets.iter().enumerate() {
        for j in 0..edge_dim(k) {
            let on_boundary = facet.boundary || (j < 2 && mesh.is_boundary_vertex(facet.vertices[j]));
            if on_boundary {
                velocity_constrained[velocity_trace.node(k, f, j)] = true;
            }
        }
    }
    let mut next = 0;
    let velocity_free_index = velocity_constrained
        .iter()
        .map(|&c| {
            if c {
                None
            } else {
                next += 1;
                Some(next - 1)
            }
        })
        .collect();

    Ok(SpaceLayout {
        variant,
        k,
        n_elements: mesh.num_elements(),
        n_facets: mesh.num_facets(),
        mesh_n: mesh.n,
        basis: ReferenceBasis::new(k)?,
        edge_basis: EdgeBasis::new(k)?,
        n_u: 2 * nb * mesh.num_elements(),
        n_p: nb * mesh.num_elements(),
        n_ubar: 2 * next,
        n_pbar: pressure_trace.count,
        velocity_trace,
        pressure_trace,
        velocity_constrained,
        velocity_free_index,
    })
}

/// Which block of the local element vector an entry belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalBlock {
    Velocity,
    Pressure,
    VelocityTrace,
    PressureTrace,
}

impl SpaceLayout {
    pub fn nb(&self) -> usize {
        triangle_dim(self.k)
    }

    pub fn ne(&self) -> usize {
        edge_dim(self.k)
    }

    pub fn offset_p(&self) -> usize {
        self.n_u
    }

    pub fn offset_ubar(&self) -> usize {
        self.n_u + self.n_p
    }

    pub fn offset_pbar(&self) -> usize {
        self.n_u + self.n_p + self.n_ubar
    }

    pub fn multiplier(&self) -> usize {
        self.n_u + self.n_p + self.n_ubar + self.n_pbar
    }

    /// Unknowns including the mean-pressure multiplier.
    pub fn total(&self) -> usize {
        self.multiplier() + 1
    }

    /// Number of element-interior (u, p) unknowns.
    pub fn n_interior(&self) -> usize {
        self.n_u + self.n_p
    }

    pub fn u_dof(&self, element: usize, component: usize, i: usize) -> usize {
        element * 2 * self.nb() + component * self.nb() + i
    }

    pub fn p_dof(&self, element: usize, i: usize) -> usize {
        self.n_u + element * self.nb() + i
    }

    pub fn ubar_dof(&self, facet: usize, j: usize, component: usize) -> Option<usize> {
        let node = self.velocity_trace.node(self.k, facet, j);
        self.velocity_free_index[node].map(|free| self.offset_ubar() + 2 * free + component)
    }

    pub fn pbar_dof(&self, facet: usize, j: usize) -> usize {
        self.offset_pbar() + self.pressure_trace.node(self.k, facet, j)
    }

    /// Velocity trace unknowns before boundary elimination.
    pub fn n_ubar_unconstrained(&self) -> usize {
        2 * self.velocity_trace.count
    }

    /// Size of the element-local vector: u, p, then ū and p̄ on each local edge.
    pub fn local_size(&self) -> usize {
        3 * self.nb() + 3 * 3 * self.ne()
    }

    pub fn local_u(&self, component: usize, i: usize) -> usize {
        component * self.nb() + i
    }

    pub fn local_p(&self, i: usize) -> usize {
        2 * self.nb() + i
    }

    pub fn local_ubar(&self, edge: usize, component: usize, j: usize) -> usize {
        3 * self.nb() + edge * 2 * self.ne() + component * self.ne() + j
    }

    pub fn local_pbar(&self, edge: usize, j: usize) -> usize {
        3 * self.nb() + 6 * self.ne() + edge * self.ne() + j
    }

    pub fn local_block(&self, local: usize) -> LocalBlock {
        let nb = self.nb();
        if local < 2 * nb {
            LocalBlock::Velocity
        } else if local < 3 * nb {
            LocalBlock::Pressure
        } else if local < 3 * nb + 6 * self.ne() {
            LocalBlock::VelocityTrace
        } else {
            LocalBlock::PressureTrace
        }
    }

    /// Global index for each entry of the element-local vector; `None` for eliminated trace dofs.
    pub fn element_dofs(&self, mesh: &MeshTopology, element: usize) -> Vec<Option<usize>> {
        let mut out = alloc::vec![None; self.local_size()];
        for c in 0..2 {
            for i in 0..self.nb() {
                out[self.local_u(c, i)] = Some(self.u_dof(element, c, i));
            }
        }
        for i in 0..self.nb() {
            out[self.local_p(i)] = Some(self.p_dof(element, i));
        }
        for e in 0..3 {
            let f = mesh.element_facets[element][e];
            for j in 0..self.ne() {
                for c in 0..2 {
                    out[self.local_ubar(e, c, j)] = self.ubar_dof(f, j, c);
                }
                out[self.local_pbar(e, j)] = Some(self.pbar_dof(f, j));
            }
        }
        out
    }

    pub fn check_mesh(&self, mesh: &MeshTopology) -> Result<()> {
        if mesh.n != self.mesh_n || mesh.num_elements() != self.n_elements || mesh.num_facets() != self.n_facets {
            return Err(Error::DimensionMismatch(format!(
                "layout built for n={} but mesh has n={}",
                self.mesh_n, mesh.n
            )));
        }
        Ok(())
    }
}

/// Embedding of a more constrained layout's unknowns into a less constrained one,
/// e.g. EDG or E-HDG into HDG. Element unknowns and the multiplier map identically;
/// each trace unknown is copied to every facet node that shares it.
pub fn trace_prolongation(coarse: &SpaceLayout, fine: &SpaceLayout) -> Result<CsrMatrix> {
    if coarse.mesh_n != fine.mesh_n || coarse.n_facets != fine.n_facets || coarse.k != fine.k {
        return Err(Error::IncompatibleLayouts(format!(
            "coarse (n={}, k={}) vs fine (n={}, k={})",
            coarse.mesh_n, coarse.k, fine.mesh_n, fine.k
        )));
    }
    let velocity_ok = coarse.variant.continuous_velocity_trace() || !fine.variant.continuous_velocity_trace();
    let pressure_ok = coarse.variant.continuous_pressure_trace() || !fine.variant.continuous_pressure_trace();
    if !(velocity_ok && pressure_ok) {
        return Err(Error::IncompatibleLayouts(format!(
            "{} does not embed into {}",
            coarse.variant.name(),
            fine.variant.name()
        )));
    }

    let mut t = TripletBuilder::new(fine.total(), coarse.total());
    for i in 0..coarse.n_interior() {
        t.push(i, i, 1.0);
    }
    let mut seen_u = alloc::vec![false; fine.n_ubar];
    let mut seen_p = alloc::vec![false; fine.n_pbar];
    for f in 0..coarse.n_facets {
        for j in 0..coarse.ne() {
            for c in 0..2 {
                if let (Some(row), Some(col)) = (fine.ubar_dof(f, j, c), coarse.ubar_dof(f, j, c)) {
                    let r = row - fine.offset_ubar();
                    if !seen_u[r] {
                        seen_u[r] = true;
                        t.push(row, col, 1.0);
                    }
                }
            }
            let (row, col) = (fine.pbar_dof(f, j), coarse.pbar_dof(f, j));
            let r = row - fine.offset_pbar();
            if !seen_p[r] {
                seen_p[r] = true;
                t.push(row, col, 1.0);
            }
        }
    }
    t.push(fine.multiplier(), coarse.multiplier(), 1.0);
    Ok(t.build())
}

/// A field stored in the element-broken blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementField {
    Velocity,
    Pressure,
}

/// A field stored on the skeleton.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceField {
    Velocity,
    Pressure,
}

/// Value of an element field at a reference point of `element`; pressure fills slot 0.
pub fn eval_field(
    layout: &SpaceLayout,
    coefficients: &[f64],
    field: ElementField,
    element: usize,
    reference_point: [f64; 2],
) -> Result<[f64; 2]> {
    if coefficients.len() != layout.total() && coefficients.len() != layout.total() - 1 {
        return Err(Error::DimensionMismatch(format!(
            "coefficient vector has {} entries, layout expects {}",
            coefficients.len(),
            layout.total()
        )));
    }
    if element >= layout.n_elements {
        return Err(Error::OutOfRange(format!("element {element} of {}", layout.n_elements)));
    }
    let mut phi = alloc::vec![0.0; layout.nb()];
    layout.basis.values(reference_point, &mut phi);
    Ok(match field {
        ElementField::Velocity => {
            let mut v = [0.0; 2];
            for (c, vc) in v.iter_mut().enumerate() {
                *vc = phi.iter().enumerate().map(|(i, p)| p * coefficients[layout.u_dof(element, c, i)]).sum();
            }
            v
        }
        ElementField::Pressure => {
            [phi.iter().enumerate().map(|(i, p)| p * coefficients[layout.p_dof(element, i)]).sum(), 0.0]
        }
    })
}

/// Value of a trace field at parameter `t` of `facet`; pressure fills slot 0.
pub fn eval_trace(layout: &SpaceLayout, coefficients: &[f64], field: TraceField, facet: usize, t: f64) -> Result<[f64; 2]> {
    if facet >= layout.n_facets {
        return Err(Error::OutOfRange(format!("facet {facet} of {}", layout.n_facets)));
    }
    let mut psi = alloc::vec![0.0; layout.ne()];
    layout.edge_basis.values(t, &mut psi);
    Ok(match field {
        TraceField::Velocity => {
            let mut v = [0.0; 2];
            for (c, vc) in v.iter_mut().enumerate() {
                *vc = psi
                    .iter()
                    .enumerate()
                    .map(|(j, p)| layout.ubar_dof(facet, j, c).map_or(0.0, |d| p * coefficients[d]))
                    .sum();
            }
            v
        }
        TraceField::Pressure => {
            [psi.iter().enumerate().map(|(j, p)| p * coefficients[layout.pbar_dof(facet, j)]).sum(), 0.0]
        }
    })
}
