use super::*;
use crate::analysis::upwind_seminorm_squared;
use crate::mesh::build_uniform_mesh;
use crate::spaces::{build_layout, trace_prolongation, MethodVariant};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(nu: f64, b: [f64; 2]) -> OseenConfig {
    OseenConfig::new(nu, 1.0, Convection::Constant(b), 4.0, 1e-2, 1.0).unwrap()
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

fn setup(n: usize, k: usize, v: MethodVariant) -> (MeshTopology, SpaceLayout) {
    let mesh = build_uniform_mesh(n).unwrap();
    let layout = build_layout(&mesh, k, v).unwrap();
    (mesh, layout)
}

#[test]
fn config_validation() {
    let b = Convection::Constant([1.0, 0.0]);
    assert!(OseenConfig::new(0.0, 1.0, b.clone(), 4.0, 1e-2, 1.0).is_err());
    assert!(OseenConfig::new(1.0, -1.0, b.clone(), 4.0, 1e-2, 1.0).is_err());
    assert!(OseenConfig::new(1.0, 1.0, b.clone(), 0.0, 1e-2, 1.0).is_err());
    assert!(OseenConfig::new(1.0, 1.0, b.clone(), 4.0, 0.0, 1.0).is_err());
    assert!(OseenConfig::new(1.0, 1.0, b.clone(), 4.0, 1e-2, f64::NAN).is_err());
    assert!(OseenConfig::new(1.0, 0.0, b, 4.0, 1e-2, 1.0).is_ok());
}

/// Vector with constant velocity `c` in both element and trace slots of one element.
fn constant_local(layout: &SpaceLayout, c: [f64; 2], p: f64) -> DVector<f64> {
    let mut x = DVector::zeros(layout.local_size());
    for comp in 0..2 {
        for i in 0..layout.nb() {
            x[layout.local_u(comp, i)] = c[comp];
        }
        for e in 0..3 {
            for j in 0..layout.ne() {
                x[layout.local_ubar(e, comp, j)] = c[comp];
            }
        }
    }
    for i in 0..layout.nb() {
        x[layout.local_p(i)] = p;
    }
    for e in 0..3 {
        for j in 0..layout.ne() {
            x[layout.local_pbar(e, j)] = p;
        }
    }
    x
}

#[test]
fn diffusion_annihilates_constants_and_is_symmetric() {
    for k in 1..=3 {
        let (mesh, layout) = setup(3, k, MethodVariant::Hdg);
        let cfg = OseenConfig::new(0.37, 1.0, Convection::Constant([1.0, 0.0]), 40.0 * (k * k) as f64, 1e-2, 1.0).unwrap();
        let quad = LocalQuadrature::for_assembly(&layout, &cfg).unwrap();
        for el in [0, 5, 17] {
            let a = local_a(&mesh, &layout, &cfg, &quad, el);
            let scale = max_abs(&a);
            assert!(max_abs(&(&a - a.transpose())) <= 1e-12 * scale);
            let r = &a * constant_local(&layout, [1.5, -0.25], 0.0);
            assert!(r.amax() <= 1e-12 * scale, "k={k} el={el}: {}", r.amax());
            // positive semi-definite once the penalty dominates the trace inverse inequality
            let eig = a.clone().symmetric_eigen().eigenvalues;
            assert!(eig.min() >= -1e-10 * scale, "k={k} el={el}: {} / {scale}", eig.min());
        }
    }
}

/// Closed-form P1 diffusion block on one element for one velocity component,
/// ordered (u vertices 0..3, then ū per local edge with facet-local nodes).
fn p1_diffusion_oracle(mesh: &MeshTopology, el: usize, nu: f64, eta: f64) -> DMatrix<f64> {
    let pts = mesh.element_points(el);
    let area = mesh.signed_area(el).abs();
    let h = mesh.element_diameters[el];
    // ∇λ_i = rot90(opposite edge) / (2 area)
    let grad: [[f64; 2]; 3] = core::array::from_fn(|i| {
        let a = pts[(i + 1) % 3];
        let b = pts[(i + 2) % 3];
        let s = mesh.signed_area(el).signum();
        [s * (a[1] - b[1]) / (2.0 * area), s * (b[0] - a[0]) / (2.0 * area)]
    });
    let mut m = DMatrix::zeros(9, 9);
    for i in 0..3 {
        for j in 0..3 {
            m[(i, j)] += nu * area * (grad[i][0] * grad[j][0] + grad[i][1] * grad[j][1]);
        }
    }
    let penalty = eta * nu / h;
    for e in 0..3 {
        let fid = mesh.element_facets[el][e];
        let facet = &mesh.facets[fid];
        let side = facet.sides().find(|s| s.element == el).unwrap();
        let n = side.normal;
        let len = facet.length;
        let on_edge = [(e + 1) % 3, (e + 2) % 3];
        // facet-local node of each element vertex on this edge
        let local_of = |v: usize| facet.vertices.iter().position(|&g| g == mesh.elements[el][v]).unwrap();
        let mass = |a: usize, b: usize| if a == b { len / 3.0 } else { len / 6.0 };
        let dn = |j: usize| grad[j][0] * n[0] + grad[j][1] * n[1];
        for &a in &on_edge {
            for &b in &on_edge {
                m[(a, b)] += penalty * mass(a, b);
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let int_i = if on_edge.contains(&i) { len / 2.0 } else { 0.0 };
                let int_j = if on_edge.contains(&j) { len / 2.0 } else { 0.0 };
                m[(i, j)] -= nu * (int_i * dn(j) + dn(i) * int_j);
            }
        }
        for &a in &on_edge {
            let ta = 3 + 2 * e + local_of(a);
            for t in 0..2 {
                let tb = 3 + 2 * e + t;
                let ib = on_edge.iter().copied().find(|&v| local_of(v) == t).unwrap();
                m[(ta, tb)] += penalty * mass(a, ib);
            }
        }
        for i in 0..3 {
            for t in 0..2 {
                let col = 3 + 2 * e + t;
                let vt = on_edge.iter().copied().find(|&v| local_of(v) == t).unwrap();
                let mut v = 0.0;
                if on_edge.contains(&i) {
                    v -= penalty * mass(i, vt);
                }
                v += nu * dn(i) * len / 2.0;
                m[(i, col)] += v;
                m[(col, i)] += v;
            }
        }
    }
    m
}

#[test]
fn diffusion_block_matches_closed_form() {
    for (n, el) in [(1, 0), (1, 1), (3, 7), (4, 20)] {
        let (mesh, layout) = setup(n, 1, MethodVariant::Hdg);
        let (nu, eta) = (1.3, 4.0);
        let cfg = OseenConfig::new(nu, 0.0, Convection::Constant([0.0, 0.0]), eta, 1e-2, 1.0).unwrap();
        let quad = LocalQuadrature::for_assembly(&layout, &cfg).unwrap();
        let a = local_a(&mesh, &layout, &cfg, &quad, el);
        let oracle = p1_diffusion_oracle(&mesh, el, nu, eta);
        for comp in 0..2 {
            let idx: Vec<usize> = (0..3)
                .map(|i| layout.local_u(comp, i))
                .chain((0..3).flat_map(|e| (0..2).map(move |j| (e, j))).map(|(e, j)| layout.local_ubar(e, comp, j)))
                .collect();
            for (r, &ir) in idx.iter().enumerate() {
                for (c, &ic) in idx.iter().enumerate() {
                    assert!(
                        (a[(ir, ic)] - oracle[(r, c)]).abs() < 1e-12,
                        "n={n} el={el} ({r},{c}): {} vs {}",
                        a[(ir, ic)],
                        oracle[(r, c)]
                    );
                }
            }
        }
    }
}

#[test]
fn pressure_coupling_is_skew_and_kills_constants() {
    for k in 1..=3 {
        let (mesh, layout) = setup(2, k, MethodVariant::Hdg);
        let cfg = config(1.0, [1.0, 0.0]);
        let quad = LocalQuadrature::for_assembly(&layout, &cfg).unwrap();
        for el in 0..mesh.num_elements() {
            let b = local_b(&mesh, &layout, &cfg, &quad, el);
            let scale = max_abs(&b);
            assert!(max_abs(&(&b + b.transpose())) <= 1e-12 * scale);
            let r = &b * constant_local(&layout, [0.0, 0.0], 2.0);
            assert!(r.amax() <= 1e-12 * scale);
        }
    }
}

#[test]
fn convection_vanishes_without_wind() {
    let (mesh, layout) = setup(2, 2, MethodVariant::Hdg);
    let cfg = config(1.0, [0.0, 0.0]);
    let quad = LocalQuadrature::for_assembly(&layout, &cfg).unwrap();
    for el in 0..mesh.num_elements() {
        assert_eq!(max_abs(&local_o(&mesh, &layout, &cfg, &quad, el)), 0.0);
    }
}

#[test]
fn convection_energy_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for v in MethodVariant::ALL {
        for k in 1..=2 {
            let (mesh, layout) = setup(3, k, v);
            let cfg = config(0.1, [1.0, 0.5]);
            let o = assemble_forms(&mesh, &layout, &cfg, FormSelection::CONVECTION).unwrap();
            for _ in 0..10 {
                let x: Vec<f64> = (0..layout.total()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let lhs = global_form(&o, &layout, &x, &x);
                let rhs = upwind_seminorm_squared(&mesh, &layout, &cfg, &x).unwrap();
                assert!((lhs - rhs).abs() <= 1e-11 * (1.0 + rhs), "{v:?} k={k}: {lhs} vs {rhs}");
            }
        }
    }
}

#[test]
fn stabilization_is_symmetric_psd_and_kills_matching_traces() {
    for k in 1..=3 {
        let (mesh, layout) = setup(2, k, MethodVariant::Edg);
        let cfg = config(0.1, [1.0, 0.0]);
        let quad = LocalQuadrature::for_assembly(&layout, &cfg).unwrap();
        for el in 0..mesh.num_elements() {
            let c = local_c(&mesh, &layout, &cfg, &quad, el);
            let scale = max_abs(&c);
            assert!(scale > 0.0);
            assert!(max_abs(&(&c - c.transpose())) <= 1e-14 * scale.max(1.0));
            assert!(c.clone().symmetric_eigen().eigenvalues.min() >= -1e-12 * scale);
            let r = &c * constant_local(&layout, [0.0, 0.0], 1.0);
            assert!(r.amax() <= 1e-12 * scale);
        }
    }
}

#[test]
fn p1_mass_entries() {
    let (mesh, layout) = setup(2, 1, MethodVariant::Hdg);
    let cfg = config(1.0, [0.0, 0.0]);
    let quad = LocalQuadrature::for_assembly(&layout, &cfg).unwrap();
    for el in 0..mesh.num_elements() {
        let area = mesh.signed_area(el).abs();
        let m = local_matrix(&mesh, &layout, &cfg, &quad, FormSelection::REACTION, el);
        let block = m.view((0, 0), (3, 3)).into_owned();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { area / 6.0 } else { area / 12.0 };
                assert!((block[(i, j)] - expect).abs() < 1e-15);
            }
        }
        assert!(block.cholesky().is_some());
    }
}

#[test]
fn multiplier_row_integrates_pressure() {
    for v in MethodVariant::ALL {
        let (mesh, layout) = setup(3, 2, v);
        let cfg = config(1.0, [1.0, 0.0]);
        let a = assemble_matrix(&mesh, &layout, &cfg).unwrap();
        let mut x = alloc::vec![0.0; layout.total()];
        for i in 0..layout.n_p {
            x[layout.offset_p() + i] = 1.0;
        }
        let y = a.matvec(&x);
        assert!((y[layout.multiplier()] - 1.0).abs() < 1e-13);
        assert_eq!(a.get(layout.multiplier(), layout.multiplier()), 0.0);
        assert!(a.is_structurally_symmetric());
    }
}

#[test]
fn continuous_variants_are_congruent_to_hdg() {
    for n in [2, 4] {
        for k in 1..=2 {
            let mesh = build_uniform_mesh(n).unwrap();
            let cfg = config(0.1, [1.0, 0.0]);
            let hdg = build_layout(&mesh, k, MethodVariant::Hdg).unwrap();
            let a_hdg = assemble_matrix(&mesh, &hdg, &cfg).unwrap();
            for v in [MethodVariant::Ehdg, MethodVariant::Edg] {
                let layout = build_layout(&mesh, k, v).unwrap();
                let a = assemble_matrix(&mesh, &layout, &cfg).unwrap();
                let c = trace_prolongation(&layout, &hdg).unwrap();
                let reduced = c.transpose().mul(&a_hdg).mul(&c);
                let diff = reduced.to_dense() - a.to_dense();
                assert!(max_abs(&diff) <= 1e-12 * a.max_abs(), "{v:?} n={n} k={k}");
            }
        }
    }
}

/// Stream function `g(x) g(y)` with `g(t) = t²(1 − t)²`, pressure `x − y`.
struct Polynomial;

fn g(t: f64) -> [f64; 4] {
    let s = 1.0 - t;
    [t * t * s * s, 2.0 * t * s * (1.0 - 2.0 * t), 2.0 * (1.0 - 6.0 * t + 6.0 * t * t), 12.0 * (2.0 * t - 1.0)]
}

impl ExactSolution for Polynomial {
    fn velocity(&self, x: Point) -> [f64; 2] {
        let (gx, gy) = (g(x[0]), g(x[1]));
        [gx[0] * gy[1], -gx[1] * gy[0]]
    }
    fn velocity_gradient(&self, x: Point) -> [[f64; 2]; 2] {
        let (gx, gy) = (g(x[0]), g(x[1]));
        [[gx[1] * gy[1], gx[0] * gy[2]], [-gx[2] * gy[0], -gx[1] * gy[1]]]
    }
    fn pressure(&self, x: Point) -> f64 {
        x[0] - x[1]
    }
}

#[test]
fn polynomial_solution_is_consistent() {
    let (nu, sigma) = (0.3, 2.0);
    let f = move |x: Point| {
        let (gx, gy) = (g(x[0]), g(x[1]));
        let u = Polynomial.velocity(x);
        let lap = [gx[2] * gy[1] + gx[0] * gy[3], -gx[3] * gy[0] - gx[1] * gy[2]];
        let conv = [gx[1] * gy[1], -gx[2] * gy[0]];
        [-nu * lap[0] + conv[0] + sigma * u[0] + 1.0, -nu * lap[1] + conv[1] + sigma * u[1] - 1.0]
    };
    for v in MethodVariant::ALL {
        let (mesh, layout) = setup(2, 2, v);
        let cfg = OseenConfig::new(nu, sigma, Convection::Constant([1.0, 0.0]), 4.0, 1e-2, 1.0).unwrap();
        let r = consistency_residual(&mesh, &layout, &cfg, &Polynomial, &f).unwrap();
        let max = r[..layout.multiplier()].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max < 1e-13, "{v:?}: {max}");
        assert!(r[layout.multiplier()].abs() < 1e-14);
    }
}

#[test]
fn blocks_sum_to_full_operator() {
    let (mesh, layout) = setup(2, 1, MethodVariant::Ehdg);
    let cfg = config(0.5, [0.3, -0.7]);
    let quad = LocalQuadrature::for_assembly(&layout, &cfg).unwrap();
    let src = LocalQuadrature::for_source(&layout, &cfg).unwrap();
    let blocks = local_blocks(&mesh, &layout, &cfg, &quad, &src, 3, &|_| [1.0, 0.0]);
    let full = local_matrix(&mesh, &layout, &cfg, &quad, FormSelection::ALL, 3);
    assert!(max_abs(&(blocks.total() - full)) < 1e-14);
    let area = mesh.signed_area(3).abs();
    let sum: f64 = (0..layout.nb()).map(|i| blocks.load[layout.local_u(0, i)]).sum();
    assert!((sum - area).abs() < 1e-15);
}

#[test]
fn element_size_rescales_penalties() {
    let (mesh, layout) = setup(4, 2, MethodVariant::Hdg);
    let r = core::f64::consts::SQRT_2;
    let leg = config(0.7, [1.0, 0.5]).with_element_size(ElementSize::SqrtTwiceArea);
    let diam = OseenConfig::new(0.7, 1.0, Convection::Constant([1.0, 0.5]), 4.0 * r, 1e-2 / r, 1.0).unwrap();
    assert!((ElementSize::SqrtTwiceArea.of(&mesh, 5) - 0.25).abs() < 1e-15);
    let quad = LocalQuadrature::for_assembly(&layout, &leg).unwrap();
    for el in 0..mesh.num_elements() {
        let a = local_matrix(&mesh, &layout, &leg, &quad, FormSelection::ALL, el);
        let b = local_matrix(&mesh, &layout, &diam, &quad, FormSelection::ALL, el);
        assert!(max_abs(&(&a - &b)) <= 1e-12 * max_abs(&b));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn symmetric_part_is_coercive(seed in any::<u64>(), k in 1usize..=2, vi in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mesh, layout) = setup(2, k, MethodVariant::ALL[vi]);
        let cfg = config(0.2, [1.0, 0.0]);
        let a = assemble_forms(&mesh, &layout, &cfg, FormSelection::ALL).unwrap();
        let x: Vec<f64> = (0..layout.total()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // the coupling is skew, so B_h(x, x) = a + σ + o + c ≥ 0
        prop_assert!(global_form(&a, &layout, &x, &x) >= -1e-12);
    }
}
