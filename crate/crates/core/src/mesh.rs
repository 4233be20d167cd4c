//! Structured triangulations of the unit square with two-sided facet adjacency.
//!
//! Vertex `(i, j)` sits at `(i/n, j/n)` and has index `j (n + 1) + i`. Every grid
//! square is cut along the diagonal from its lower-left to its upper-right corner.
//! Local edge `e` of a triangle joins local vertices `e + 1` and `e + 2` (mod 3),
//! i.e. it lies opposite local vertex `e`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// One side of a facet: the adjacent element and the facet's local edge index there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacetSide {
    pub element: usize,
    pub local_edge: usize,
    /// Unit normal pointing out of `element`.
    pub normal: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    /// Endpoints with `vertices[0] < vertices[1]`; the facet parameter runs from the first to the second.
    pub vertices: [usize; 2],
    pub sides: [Option<FacetSide>; 2],
    pub length: f64,
    pub boundary: bool,
}

impl Facet {
    pub fn sides(&self) -> impl Iterator<Item = &FacetSide> {
        self.sides.iter().flatten()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshTopology {
    pub n: usize,
    pub vertices: Vec<Point>,
    /// Counterclockwise vertex triples.
    pub elements: Vec<[usize; 3]>,
    pub facets: Vec<Facet>,
    /// Facet index of each local edge.
    pub element_facets: Vec<[usize; 3]>,
    pub element_diameters: Vec<f64>,
}

/// Triangulates (0,1)² with `n` subdivisions per side.
pub fn build_uniform_mesh(n: usize) -> Result<MeshTopology> {
    if n == 0 {
        return Err(Error::EmptyMesh);
    }
    let h = 1.0 / n as f64;
    let vid = |i: usize, j: usize| j * (n + 1) + i;

    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 * h, j as f64 * h]);
        }
    }

    let mut elements = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (v00, v10, v01, v11) = (vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1));
            elements.push([v00, v10, v11]);
            elements.push([v00, v11, v01]);
        }
    }

    let mut lookup: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut facets: Vec<Facet> = Vec::with_capacity(3 * n * n + 2 * n);
    let mut element_facets = Vec::with_capacity(elements.len());
    let mut element_diameters = Vec::with_capacity(elements.len());

    for (k, tri) in elements.iter().enumerate() {
        let mut local = [0usize; 3];
        let mut diameter: f64 = 0.0;
        for e in 0..3 {
            let a = tri[(e + 1) % 3];
            let b = tri[(e + 2) % 3];
            let (pa, pb) = (vertices[a], vertices[b]);
            let length = libm::hypot(pb[0] - pa[0], pb[1] - pa[1]);
            diameter = diameter.max(length);
            // counterclockwise traversal: outward normal is the tangent rotated clockwise
            let normal = [(pb[1] - pa[1]) / length, -(pb[0] - pa[0]) / length];
            let side = FacetSide { element: k, local_edge: e, normal };
            let key = (a.min(b), a.max(b));
            let id = match lookup.get(&key) {
                Some(&id) => {
                    facets[id].sides[1] = Some(side);
                    id
                }
                None => {
                    let id = facets.len();
                    lookup.insert(key, id);
                    facets.push(Facet {
                        vertices: [key.0, key.1],
                        sides: [Some(side), None],
                        length,
                        boundary: false,
                    });
                    id
                }
            };
            local[e] = id;
        }
        element_facets.push(local);
        element_diameters.push(diameter);
    }
    for f in facets.iter_mut() {
        f.boundary = f.sides[1].is_none();
    }

    Ok(MeshTopology { n, vertices, elements, facets, element_facets, element_diameters })
}

impl MeshTopology {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    /// Mesh size `h = 1/n`.
    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn element_points(&self, k: usize) -> [Point; 3] {
        let t = self.elements[k];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    pub fn signed_area(&self, k: usize) -> f64 {
        let [a, b, c] = self.element_points(k);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn centroid(&self, k: usize) -> Point {
        let [a, b, c] = self.element_points(k);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn geometry(&self, k: usize) -> ElementGeometry {
        ElementGeometry::new(self.element_points(k))
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        let [x, y] = self.vertices[v];
        let eps = 1e-12;
        x < eps || y < eps || x > 1.0 - eps || y > 1.0 - eps
    }

    /// Whether the element's local edge runs in the same direction as the facet parameter.
    pub fn edge_agrees_with_facet(&self, element: usize, local_edge: usize) -> bool {
        let f = &self.facets[self.element_facets[element][local_edge]];
        self.elements[element][(local_edge + 1) % 3] == f.vertices[0]
    }

    /// Physical point at parameter `t` along facet `f`.
    pub fn facet_point(&self, f: usize, t: f64) -> Point {
        let [a, b] = self.facets[f].vertices;
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]
    }
}

/// Affine map `x = origin + J ξ` from the reference triangle onto an element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub origin: Point,
    /// Columns are the edge vectors `v1 - v0` and `v2 - v0`.
    pub jacobian: [[f64; 2]; 2],
    /// `J^{-T}`, maps reference gradients to physical gradients.
    pub inverse_transpose: [[f64; 2]; 2],
    pub det: f64,
}

impl ElementGeometry {
    pub fn new(points: [Point; 3]) -> Self {
        let [a, b, c] = points;
        let j = [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let inverse_transpose = [[j[1][1] / det, -j[1][0] / det], [-j[0][1] / det, j[0][0] / det]];
        Self { origin: a, jacobian: j, inverse_transpose, det }
    }

    pub fn map(&self, xi: [f64; 2]) -> Point {
        let j = &self.jacobian;
        [
            self.origin[0] + j[0][0] * xi[0] + j[0][1] * xi[1],
            self.origin[1] + j[1][0] * xi[0] + j[1][1] * xi[1],
        ]
    }

    pub fn gradient(&self, g: [f64; 2]) -> [f64; 2] {
        let m = &self.inverse_transpose;
        [m[0][0] * g[0] + m[0][1] * g[1], m[1][0] * g[0] + m[1][1] * g[1]]
    }

    pub fn inverse_map(&self, x: Point) -> [f64; 2] {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        let m = &self.inverse_transpose;
        // J^{-1} = (J^{-T})^T
        [m[0][0] * d[0] + m[1][0] * d[1], m[0][1] * d[0] + m[1][1] * d[1]]
    }
}

/// Checks that each interior facet carries opposite normals and every normal
/// points out of its element.
pub fn facet_normal_consistency(mesh: &MeshTopology) -> bool {
    mesh.facets.iter().enumerate().all(|(fid, f)| {
        let outward = f.sides().all(|s| {
            let c = mesh.centroid(s.element);
            let m = mesh.facet_point(fid, 0.5);
            let [a, b] = f.vertices;
            let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
            let tangent = [pb[0] - pa[0], pb[1] - pa[1]];
            let unit = (libm::hypot(s.normal[0], s.normal[1]) - 1.0).abs() < 1e-12;
            let orthogonal = (s.normal[0] * tangent[0] + s.normal[1] * tangent[1]).abs() < 1e-12;
            let out = s.normal[0] * (c[0] - m[0]) + s.normal[1] * (c[1] - m[1]) < 0.0;
            unit && orthogonal && out
        });
        let opposite = match (&f.sides[0], &f.sides[1]) {
            (Some(l), Some(r)) => {
                (l.normal[0] + r.normal[0]).abs() < 1e-12 && (l.normal[1] + r.normal[1]).abs() < 1e-12
            }
            (Some(_), None) => f.boundary,
            _ => false,
        };
        outward && opposite
    })
}
