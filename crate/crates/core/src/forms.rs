//! Element-local bilinear forms and global assembly of the hybridized system.
//!
//! Every form is evaluated through one pointwise kernel: a quadrature point
//! carries a trial state (values, gradients and traces of the trial function)
//! and the kernel adds the weighted test-function contributions to a local row
//! vector. Local matrices are built column by column from unit trial states; the
//! consistency residual feeds the same kernel with the exact solution instead.
//!
//! The assembled operator follows the global form
//! `B_h = a_h + b_h(p, v) + (σu, v) + o_h − b_h(q, u) + c_h`, i.e. the mass
//! equation enters with a negative sign.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mesh::{ElementGeometry, MeshTopology, Point};
use crate::refspace::{edge_rule, edge_to_reference, triangle_rule, BasisTable};
use crate::sparse::{CsrMatrix, TripletBuilder};
use crate::spaces::SpaceLayout;

pub type VectorFn = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;

/// The convective field `b`.
#[derive(Clone)]
pub enum Convection {
    Constant([f64; 2]),
    /// An evaluable field; the flag records whether it is divergence free.
    Field { eval: VectorFn, divergence_free: bool },
}

impl Convection {
    pub fn eval(&self, x: Point) -> [f64; 2] {
        match self {
            Convection::Constant(b) => *b,
            Convection::Field { eval, .. } => eval(x),
        }
    }

    pub fn is_divergence_free(&self) -> bool {
        match self {
            Convection::Constant(_) => true,
            Convection::Field { divergence_free, .. } => *divergence_free,
        }
    }
}

impl fmt::Debug for Convection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Convection::Constant(b) => write!(f, "Constant({b:?})"),
            Convection::Field { divergence_free, .. } => write!(f, "Field {{ divergence_free: {divergence_free} }}"),
        }
    }
}

/// Quadrature exactness degrees; `None` picks `2k + 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureOptions {
    pub volume: Option<usize>,
    pub facet: Option<usize>,
    /// Used for the load vector, errors and residuals against smooth data.
    pub source: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self { volume: None, facet: None, source: 16 }
    }
}

impl QuadratureOptions {
    pub fn volume_for(&self, k: usize) -> usize {
        self.volume.unwrap_or(2 * k + 2)
    }

    pub fn facet_for(&self, k: usize) -> usize {
        self.facet.unwrap_or(2 * k + 2)
    }
}

#[derive(Debug, Clone)]
pub struct OseenConfig {
    pub nu: f64,
    pub sigma: f64,
    pub convection: Convection,
    /// Velocity penalty.
    pub eta: f64,
    /// Pressure penalty.
    pub alpha: f64,
    /// Weight of ‖q‖² in the energy norm; not part of the system.
    pub gamma: f64,
    pub quadrature: QuadratureOptions,
    /// The h_K entering the penalty terms and the energy norm.
    pub element_size: ElementSize,
}

/// Local length scale h_K.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ElementSize {
    /// Longest edge.
    #[default]
    Diameter,
    /// `sqrt(2|K|)`, the leg length `1/n` on the uniform mesh.
    SqrtTwiceArea,
}

impl ElementSize {
    pub fn of(self, mesh: &MeshTopology, element: usize) -> f64 {
        match self {
            ElementSize::Diameter => mesh.element_diameters[element],
            ElementSize::SqrtTwiceArea => libm::sqrt(2.0 * libm::fabs(mesh.signed_area(element))),
        }
    }
}

impl OseenConfig {
    pub fn new(nu: f64, sigma: f64, convection: Convection, eta: f64, alpha: f64, gamma: f64) -> Result<Self> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParameter(what.into()))
            }
        };
        check(nu > 0.0 && nu.is_finite(), "viscosity must be positive")?;
        check(sigma >= 0.0 && sigma.is_finite(), "reaction must be non-negative")?;
        check(eta > 0.0 && eta.is_finite(), "velocity penalty must be positive")?;
        check(alpha > 0.0 && alpha.is_finite(), "pressure penalty must be positive")?;
        check(gamma > 0.0 && gamma.is_finite(), "norm weight gamma must be positive")?;
        Ok(Self {
            nu,
            sigma,
            convection,
            eta,
            alpha,
            gamma,
            quadrature: QuadratureOptions::default(),
            element_size: ElementSize::default(),
        })
    }

    pub fn with_element_size(mut self, element_size: ElementSize) -> Self {
        self.element_size = element_size;
        self
    }

    pub fn with_quadrature(mut self, quadrature: QuadratureOptions) -> Self {
        self.quadrature = quadrature;
        self
    }
}

/// Which forms enter a local matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FormSelection {
    pub diffusion: bool,
    pub pressure_coupling: bool,
    pub convection: bool,
    pub stabilization: bool,
    pub reaction: bool,
}

impl FormSelection {
    pub const ALL: Self = Self { diffusion: true, pressure_coupling: true, convection: true, stabilization: true, reaction: true };
    pub const NONE: Self =
        Self { diffusion: false, pressure_coupling: false, convection: false, stabilization: false, reaction: false };
    pub const DIFFUSION: Self = Self { diffusion: true, ..Self::NONE };
    pub const PRESSURE_COUPLING: Self = Self { pressure_coupling: true, ..Self::NONE };
    pub const CONVECTION: Self = Self { convection: true, ..Self::NONE };
    pub const STABILIZATION: Self = Self { stabilization: true, ..Self::NONE };
    pub const REACTION: Self = Self { reaction: true, ..Self::NONE };
}

/// Trial data at a volume quadrature point; `grad_u[c]` is ∇u_c.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VolumeState {
    pub u: [f64; 2],
    pub grad_u: [[f64; 2]; 2],
    pub p: f64,
}

/// Trial data at a facet quadrature point, seen from one element.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FacetState {
    pub u: [f64; 2],
    /// One-sided normal derivative ∂u_c/∂n.
    pub du_dn: [f64; 2],
    pub ubar: [f64; 2],
    pub p: f64,
    pub pbar: f64,
}

/// Basis tables for one pair of volume/facet rules.
#[derive(Debug, Clone)]
pub struct LocalQuadrature {
    pub volume_points: Vec<[f64; 2]>,
    pub volume_weights: Vec<f64>,
    pub volume: BasisTable,
    pub facet_params: Vec<f64>,
    pub facet_weights: Vec<f64>,
    /// `[edge][agrees]` element basis on the edge quadrature points.
    pub edge: [[BasisTable; 2]; 3],
    /// Facet basis on `facet_params`: `q * ne + j`.
    pub trace: Vec<f64>,
}

impl LocalQuadrature {
    pub fn new(layout: &SpaceLayout, volume_exactness: usize, facet_exactness: usize) -> Result<Self> {
        let vrule = triangle_rule(volume_exactness)?;
        let erule = edge_rule(facet_exactness)?;
        let facet_params: Vec<f64> = erule.points.iter().map(|p| p[0]).collect();
        let edge_table = |e: usize, agrees: bool| {
            let pts: Vec<[f64; 2]> =
                facet_params.iter().map(|&t| edge_to_reference(e, if agrees { t } else { 1.0 - t })).collect();
            layout.basis.tabulate(&pts)
        };
        let edge = core::array::from_fn(|e| [edge_table(e, false), edge_table(e, true)]);
        Ok(Self {
            volume: layout.basis.tabulate(&vrule.points),
            volume_points: vrule.points,
            volume_weights: vrule.weights,
            trace: layout.edge_basis.tabulate(&facet_params),
            facet_params,
            facet_weights: erule.weights,
            edge,
        })
    }

    pub fn for_assembly(layout: &SpaceLayout, config: &OseenConfig) -> Result<Self> {
        Self::new(layout, config.quadrature.volume_for(layout.k), config.quadrature.facet_for(layout.k))
    }

    pub fn for_source(layout: &SpaceLayout, config: &OseenConfig) -> Result<Self> {
        let s = config.quadrature.source;
        Self::new(layout, s, s)
    }
}

/// Geometry of one element side as needed by the facet kernel.
#[derive(Debug, Clone, Copy)]
struct EdgeInfo {
    facet: usize,
    agrees: bool,
    normal: [f64; 2],
    length: f64,
}

fn edge_info(mesh: &MeshTopology, element: usize, e: usize) -> EdgeInfo {
    let facet = mesh.element_facets[element][e];
    let f = &mesh.facets[facet];
    let side = f.sides().find(|s| s.element == element && s.local_edge == e).expect("facet adjacency");
    EdgeInfo { facet, agrees: mesh.edge_agrees_with_facet(element, e), normal: side.normal, length: f.length }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Adds the volume contributions of one quadrature point.
#[allow(clippy::too_many_arguments)]
fn volume_kernel(
    layout: &SpaceLayout,
    config: &OseenConfig,
    forms: FormSelection,
    w: f64,
    b: [f64; 2],
    phi: &[f64],
    grad: &[[f64; 2]],
    s: &VolumeState,
    out: &mut [f64],
) {
    let div_u = s.grad_u[0][0] + s.grad_u[1][1];
    for i in 0..layout.nb() {
        let mut r = [0.0; 2];
        for (c, rc) in r.iter_mut().enumerate() {
            if forms.diffusion {
                *rc += config.nu * dot(s.grad_u[c], grad[i]);
            }
            if forms.reaction {
                *rc += config.sigma * s.u[c] * phi[i];
            }
            if forms.convection {
                *rc -= s.u[c] * dot(b, grad[i]);
            }
            if forms.pressure_coupling {
                *rc -= s.p * grad[i][c];
            }
            out[layout.local_u(c, i)] += w * *rc;
        }
        if forms.pressure_coupling {
            out[layout.local_p(i)] += w * div_u * phi[i];
        }
    }
}

/// Adds the facet contributions of one quadrature point on local edge `e`.
#[allow(clippy::too_many_arguments)]
fn facet_kernel(
    layout: &SpaceLayout,
    config: &OseenConfig,
    forms: FormSelection,
    e: usize,
    w: f64,
    h: f64,
    normal: [f64; 2],
    b: [f64; 2],
    phi: &[f64],
    grad: &[[f64; 2]],
    psi: &[f64],
    s: &FacetState,
    out: &mut [f64],
) {
    let nu = config.nu;
    let penalty = config.eta * nu / h;
    let bn = dot(b, normal);
    let jump = [s.u[0] - s.ubar[0], s.u[1] - s.ubar[1]];
    let pjump = s.p - s.pbar;
    let un = dot(s.u, normal);
    let stab = config.alpha / nu * h;

    for c in 0..2 {
        // coefficient of φ_i, of ∂φ_i/∂n, and of ψ_j for component c
        let mut elem_coef = 0.0;
        let mut dn_coef = 0.0;
        let mut trace_coef = 0.0;
        if forms.diffusion {
            elem_coef += penalty * jump[c] - nu * s.du_dn[c];
            dn_coef -= nu * jump[c];
            trace_coef += -penalty * jump[c] + nu * s.du_dn[c];
        }
        if forms.convection {
            let flux = 0.5 * bn * (s.u[c] + s.ubar[c]) + 0.5 * bn.abs() * jump[c];
            elem_coef += flux;
            trace_coef -= flux;
        }
        if forms.pressure_coupling {
            elem_coef += normal[c] * s.pbar;
        }
        for i in 0..layout.nb() {
            out[layout.local_u(c, i)] += w * (elem_coef * phi[i] + dn_coef * dot(grad[i], normal));
        }
        for (j, &pj) in psi.iter().enumerate() {
            out[layout.local_ubar(e, c, j)] += w * trace_coef * pj;
        }
    }
    if forms.pressure_coupling {
        for (j, &pj) in psi.iter().enumerate() {
            out[layout.local_pbar(e, j)] -= w * un * pj;
        }
    }
    if forms.stabilization {
        for i in 0..layout.nb() {
            out[layout.local_p(i)] += w * stab * pjump * phi[i];
        }
        for (j, &pj) in psi.iter().enumerate() {
            out[layout.local_pbar(e, j)] -= w * stab * pjump * pj;
        }
    }
}

/// Source of trial data for the local kernels.
pub trait TrialFunction {
    fn volume(&self, q: usize, xi: [f64; 2], x: Point) -> VolumeState;
    /// `q` indexes the facet rule; `xi` is on the element's edge `e`.
    fn facet(&self, e: usize, q: usize, xi: [f64; 2], x: Point, normal: [f64; 2]) -> FacetState;
}

/// Applies the selected forms to a trial function on one element, giving the local row vector.
pub fn local_action(
    mesh: &MeshTopology,
    layout: &SpaceLayout,
    config: &OseenConfig,
    quad: &LocalQuadrature,
    forms: FormSelection,
    element: usize,
    trial: &dyn TrialFunction,
) -> Vec<f64> {
    let geo = mesh.geometry(element);
    let h = config.element_size.of(mesh, element);
    let nb = layout.nb();
    let mut out = alloc::vec![0.0; layout.local_size()];
    let mut grad = alloc::vec![[0.0; 2]; nb];

    for (q, &xi) in quad.volume_points.iter().enumerate() {
        let x = geo.map(xi);
        let w = quad.volume_weights[q] * geo.det.abs();
        for (g, r) in grad.iter_mut().zip(quad.volume.gradients_at(q)) {
            *g = geo.gradient(*r);
        }
        let state = trial.volume(q, xi, x);
        volume_kernel(layout, config, forms, w, config.convection.eval(x), quad.volume.values_at(q), &grad, &state, &mut out);
    }

    let ne = layout.ne();
    for e in 0..3 {
        let info = edge_info(mesh, element, e);
        let table = &quad.edge[e][usize::from(info.agrees)];
        for (q, &t) in quad.facet_params.iter().enumerate() {
            let x = mesh.facet_point(info.facet, t);
            let xi = edge_to_reference(e, if info.agrees { t } else { 1.0 - t });
            let w = quad.facet_weights[q] * info.length;
            for (g, r) in grad.iter_mut().zip(table.gradients_at(q)) {
                *g = geo.gradient(*r);
            }
            let state = trial.facet(e, q, xi, x, info.normal);
            facet_kernel(
                layout,
                config,
                forms,
                e,
                w,
                h,
                info.normal,
                config.convection.eval(x),
                table.values_at(q),
                &grad,
                &quad.trace[q * ne..(q + 1) * ne],
                &state,
                &mut out,
            );
        }
    }
    out
}

/// A single local basis function used as trial function.
struct UnitTrial<'a> {
    layout: &'a SpaceLayout,
    quad: &'a LocalQuadrature,
    geo: ElementGeometry,
    agrees: [bool; 3],
    local: usize,
}

impl TrialFunction for UnitTrial<'_> {
    fn volume(&self, q: usize, _xi: [f64; 2], _x: Point) -> VolumeState {
        let l = self.layout;
        let nb = l.nb();
        let mut s = VolumeState::default();
        if self.local < 2 * nb {
            let (c, i) = (self.local / nb, self.local % nb);
            s.u[c] = self.quad.volume.value(q, i);
            s.grad_u[c] = self.geo.gradient(self.quad.volume.gradients_at(q)[i]);
        } else if self.local < 3 * nb {
            s.p = self.quad.volume.value(q, self.local - 2 * nb);
        }
        s
    }

    fn facet(&self, e: usize, q: usize, _xi: [f64; 2], _x: Point, normal: [f64; 2]) -> FacetState {
        let l = self.layout;
        let (nb, ne) = (l.nb(), l.ne());
        let table = &self.quad.edge[e][usize::from(self.agrees[e])];
        let mut s = FacetState::default();
        if self.local < 2 * nb {
            let (c, i) = (self.local / nb, self.local % nb);
            s.u[c] = table.value(q, i);
            s.du_dn[c] = dot(self.geo.gradient(table.gradients_at(q)[i]), normal);
        } else if self.local < 3 * nb {
            s.p = table.value(q, self.local - 2 * nb);
        } else if self.local < 3 * nb + 6 * ne {
            let r = self.local - 3 * nb;
            let (edge, c, j) = (r / (2 * ne), (r % (2 * ne)) / ne, r % ne);
            if edge == e {
                s.ubar[c] = self.quad.trace[q * ne + j];
            }
        } else {
            let r = self.local - 3 * nb - 6 * ne;
            let (edge, j) = (r / ne, r % ne);
            if edge == e {
                s.pbar = self.quad.trace[q * ne + j];
            }
        }
        s
    }
}

/// Dense local matrix (rows: test, columns: trial) of the selected forms.
pub fn local_matrix(
    mesh: &MeshTopology,
    layout: &SpaceLayout,
    config: &OseenConfig,
    quad: &LocalQuadrature,
    forms: FormSelection,
    element: usize,
) -> DMatrix<f64> {
    let n = layout.local_size();
    let geo = mesh.geometry(element);
    let agrees = core::array::from_fn(|e| mesh.edge_agrees_with_facet(element, e));
    let mut m = DMatrix::zeros(n, n);
    for col in 0..n {
        let trial = UnitTrial { layout, quad, geo, agrees, local: col };
        let column = local_action(mesh, layout, config, quad, forms, element, &trial);
        m.set_column(col, &DVector::from_vec(column));
    }
    m
}

/// Per-element blocks of each form plus the load vector.
#[derive(Debug, Clone)]
pub struct LocalBlocks {
    pub diffusion: DMatrix<f64>,
    pub pressure_coupling: DMatrix<f64>,
    pub convection: DMatrix<f64>,
    pub stabilization: DMatrix<f64>,
    pub reaction: DMatrix<f64>,
    pub load: DVector<f64>,
}

impl LocalBlocks {
    pub fn total(&self) -> DMatrix<f64> {
        &self.diffusion + &self.pressure_coupling + &self.convection + &self.stabilization + &self.reaction
    }
}

pub fn local_a(mesh: &MeshTopology, layout: &SpaceLayout, config: &OseenConfig, quad: &LocalQuadrature, element: usize) -> DMatrix<f64> {
    local_matrix(mesh, layout, config, quad, FormSelection::DIFFUSION, element)
}

/// Pressure–velocity coupling: `b_h(p, v)` in the momentum rows and `−b_h(q, u)` in the mass rows.
pub fn local_b(mesh: &MeshTopology, layout: &SpaceLayout, config: &OseenConfig, quad: &LocalQuadrature, element: usize) -> DMatrix<f64> {
    local_matrix(mesh, layout, config, quad, FormSelection::PRESSURE_COUPLING, element)
}

pub fn local_o(mesh: &MeshTopology, layout: &SpaceLayout, config: &OseenConfig, quad: &LocalQuadrature, element: usize) -> DMatrix<f64> {
    local_matrix(mesh, layout, config, quad, FormSelection::CONVECTION, element)
}

pub fn local_c(mesh: &MeshTopology, layout: &SpaceLayout, config: &OseenConfig, quad: &LocalQuadrature, element: usize) -> DMatrix<f64> {
    local_matrix(mesh, layout, config, quad, FormSelection::STABILIZATION, element)
}

/// Reaction mass block `σ(u, v)` and load vector `(f, v)`.
pub fn local_reaction_and_load(
    mesh: &MeshTopology,
    layout: &SpaceLayout,
    config: &OseenConfig,
    quad: &LocalQuadrature,
    source_quad: &LocalQuadrature,
    element: usize,
    f: &dyn Fn(Point) -> [f64; 2],
) -> (DMatrix<f64>, DVector<f64>) {
    let mass = local_matrix(mesh, layout, config, quad, FormSelection::REACTION, element);
    (mass, DVector::from_vec(local_load(mesh, layout, source_quad, element, f)))
}

pub fn local_load(
    mesh: &MeshTopology,
    layout: &SpaceLayout,
    source_quad: &LocalQuadrature,
    element: usize,
    f: &dyn Fn(Point) -> [f64; 2],
) -> Vec<f64> {
    let geo = mesh.geometry(element);
    let mut out = alloc::vec![0.0; layout.local_size()];
    for (q, &xi) in source_quad.volume_points.iter().enumerate() {
        let w = source_quad.volume_weights[q] * geo.det.abs();
        let fx = f(geo.map(xi));
        for (i, &phi) in source_quad.volume.values_at(q).iter().enumerate() {
            for c in 0..2 {
                out[layout.local_u(c, i)] += w * fx[c] * phi;
            }
        }
    }
    out
}

pub fn local_blocks(
    mesh: &MeshTopology,
    layout: &SpaceLayout,
    config: &OseenConfig,
    quad: &LocalQuadrature,
    source_quad: &LocalQuadrature,
    element: usize,
    f: &dyn Fn(Point) -> [f64; 2],
) -> LocalBlocks {
    let (reaction, load) = local_reaction_and_load(mesh, layout, config, quad, source_quad, element, f);
    LocalBlocks {
        diffusion: local_a(mesh, layout, config, quad, element),
        pressure_coupling: local_b(mesh, layout, config, quad, element),
        convection: local_o(mesh, layout, config, quad, element),
        stabilization: local_c(mesh, layout, config, quad, element),
        reaction,
        load,
    }
}

/// `∫_K φ_i` for the pressure basis of every element, in global p numbering.
pub fn pressure_mean_weights(mesh: &MeshTopology, layout: &SpaceLayout, quad: &LocalQuadrature) -> Vec<f64> {
    let nb = layout.nb();
    let reference: Vec<f64> = (0..nb)
        .map(|i| (0..quad.volume_weights.len()).map(|q| quad.volume_weights[q] * quad.volume.value(q, i)).sum())
        .collect();
    let mut out = alloc::vec![0.0; layout.n_p];
    for el in 0..mesh.num_elements() {
        let det = mesh.geometry(el).det.abs();
        for i in 0..nb {
            out[el * nb + i] = reference[i] * det;
        }
    }
    out
}

/// The assembled system over all free unknowns plus the mean-pressure multiplier.
#[derive(Debug, Clone)]
pub struct GlobalSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub layout: SpaceLayout,
}

impl GlobalSystem {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }
}

/// Assembles the selected forms over all free unknowns; the multiplier row and column stay empty.
pub fn assemble_forms(
    mesh: &MeshTopology,
    layout: &SpaceLayout,
    config: &OseenConfig,
    forms: FormSelection,
) -> Result<CsrMatrix> {
    Ok(assemble_triplets(mesh, layout, config, forms, false)?.build())
}

/// Assembles the full operator including the mean-pressure multiplier.
pub fn assemble_matrix(mesh: &MeshTopology, layout: &SpaceLayout, config: &OseenConfig) -> Result<CsrMatrix> {
    Ok(assemble_triplets(mesh, layout, config, FormSelection::ALL, true)?.build())
}

fn assemble_triplets(
    mesh: &MeshTopology,
    layout: &SpaceLayout,
    config: &OseenConfig,
    forms: FormSelection,
    with_multiplier: bool,
) -> Result<TripletBuilder> {
    layout.check_mesh(mesh)?;
    let quad = LocalQuadrature::for_assembly(layout, config)?;
    let n = layout.total();
    let ls = layout.local_size();
    let mut t = TripletBuilder::with_capacity(n, n, mesh.num_elements() * ls * ls + 2 * layout.n_p);
    for el in 0..mesh.num_elements() {
        let local = local_matrix(mesh, layout, config, &quad, forms, el);
        let dofs = layout.element_dofs(mesh, el);
        for (r, gr) in dofs.iter().enumerate() {
            let Some(gr) = *gr else { continue };
            for (c, gc) in dofs.iter().enumerate() {
                if let Some(gc) = *gc {
                    let v = local[(r, c)];
                    if v != 0.0 {
                        t.push(gr, gc, v);
                    }
                }
            }
        }
    }
    if with_multiplier {
        let lambda = layout.multiplier();
        for (i, w) in pressure_mean_weights(mesh, layout, &quad).into_iter().enumerate() {
            t.push(lambda, layout.offset_p() + i, w);
            t.push(layout.offset_p() + i, lambda, w);
        }
    }
    Ok(t)
}

/// Assembles the load vector `(f, v_h)`.
pub fn assemble_load(
    mesh: &MeshTopology,
    layout: &SpaceLayout,
    config: &OseenConfig,
    f: &dyn Fn(Point) -> [f64; 2],
) -> Result<Vec<f64>> {
    layout.check_mesh(mesh)?;
    let quad = LocalQuadrature::for_source(layout, config)?;
    let mut rhs = alloc::vec![0.0; layout.total()];
    for el in 0..mesh.num_elements() {
        let local = local_load(mesh, layout, &quad, el, f);
        for (r, gr) in layout.element_dofs(mesh, el).into_iter().enumerate() {
            if let Some(gr) = gr {
                rhs[gr] += local[r];
            }
        }
    }
    Ok(rhs)
}

pub fn assemble_global(
    mesh: &MeshTopology,
    layout: &SpaceLayout,
    config: &OseenConfig,
    f: &dyn Fn(Point) -> [f64; 2],
) -> Result<GlobalSystem> {
    let matrix = assemble_matrix(mesh, layout, config)?;
    let rhs = assemble_load(mesh, layout, config, f)?;
    if matrix.nrows != rhs.len() {
        return Err(Error::DimensionMismatch(format!("matrix {} vs rhs {}", matrix.nrows, rhs.len())));
    }
    Ok(GlobalSystem { matrix, rhs, layout: layout.clone() })
}

/// `B_h((u, p); (v, q))` for global coefficient vectors (the multiplier entry is ignored).
pub fn global_form(matrix: &CsrMatrix, layout: &SpaceLayout, trial: &[f64], test: &[f64]) -> f64 {
    let lambda = layout.multiplier();
    (0..matrix.nrows)
        .filter(|&i| i != lambda)
        .map(|i| test[i] * matrix.row(i).filter(|&(j, _)| j != lambda).map(|(j, v)| v * trial[j]).sum::<f64>())
        .sum()
}

/// A smooth velocity/pressure pair with analytic first derivatives.
pub trait ExactSolution {
    fn velocity(&self, x: Point) -> [f64; 2];
    /// Row c is ∇u_c.
    fn velocity_gradient(&self, x: Point) -> [[f64; 2]; 2];
    fn pressure(&self, x: Point) -> f64;
}

struct ExactTrial<'a>(&'a dyn ExactSolution);

impl TrialFunction for ExactTrial<'_> {
    fn volume(&self, _q: usize, _xi: [f64; 2], x: Point) -> VolumeState {
        VolumeState { u: self.0.velocity(x), grad_u: self.0.velocity_gradient(x), p: self.0.pressure(x) }
    }

    fn facet(&self, _e: usize, _q: usize, _xi: [f64; 2], x: Point, normal: [f64; 2]) -> FacetState {
        let u = self.0.velocity(x);
        let g = self.0.velocity_gradient(x);
        let p = self.0.pressure(x);
        FacetState { u, du_dn: [dot(g[0], normal), dot(g[1], normal)], ubar: u, p, pbar: p }
    }
}

/// Residual `B_h((u, ζu), (p, ζp); ·) − (f, ·)` of the exact solution tested against
/// every free discrete test function; the multiplier row holds ∫_Ω p.
pub fn consistency_residual(
    mesh: &MeshTopology,
    layout: &SpaceLayout,
    config: &OseenConfig,
    exact: &dyn ExactSolution,
    f: &dyn Fn(Point) -> [f64; 2],
) -> Result<Vec<f64>> {
    layout.check_mesh(mesh)?;
    let quad = LocalQuadrature::for_source(layout, config)?;
    let trial = ExactTrial(exact);
    let mut out = alloc::vec![0.0; layout.total()];
    let mut mean = 0.0;
    for el in 0..mesh.num_elements() {
        let action = local_action(mesh, layout, config, &quad, FormSelection::ALL, el, &trial);
        let load = local_load(mesh, layout, &quad, el, f);
        for (r, gr) in layout.element_dofs(mesh, el).into_iter().enumerate() {
            if let Some(gr) = gr {
                out[gr] += action[r] - load[r];
            }
        }
        let geo = mesh.geometry(el);
        for (q, &xi) in quad.volume_points.iter().enumerate() {
            mean += quad.volume_weights[q] * geo.det.abs() * exact.pressure(geo.map(xi));
        }
    }
    out[layout.multiplier()] = mean;
    Ok(out)
}

#[cfg(test)]
mod tests;
