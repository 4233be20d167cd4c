//! Solving the assembled system, directly or after static condensation of the
//! element unknowns onto the traces and the multiplier.

use alloc::boxed::Box;
use alloc::string::ToString;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, LU};

use crate::error::{Error, Result};
use crate::forms::GlobalSystem;
use crate::mesh::Point;
use crate::sparse::{CsrMatrix, TripletBuilder};
use crate::spaces::{eval_field, ElementField, SpaceLayout};

/// A factored square matrix that can be applied to several right-hand sides.
pub trait Factorization {
    fn solve_multiple(&self, rhs: &[&[f64]]) -> Result<Vec<Vec<f64>>>;

    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.solve_multiple(&[rhs])?.remove(0))
    }
}

/// A factorize-and-solve backend for square sparse systems.
pub trait LinearSolver {
    fn name(&self) -> &'static str;

    fn factorize(&self, matrix: &CsrMatrix) -> Result<Box<dyn Factorization>>;

    fn solve(&self, matrix: &CsrMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.solve_multiple(matrix, &[rhs])?.remove(0))
    }

    /// One factorization, several right-hand sides.
    fn solve_multiple(&self, matrix: &CsrMatrix, rhs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        for b in rhs {
            check_square(matrix, b)?;
        }
        self.factorize(matrix)?.solve_multiple(rhs)
    }
}

/// Dense partial-pivoting LU; only sensible for small systems.
#[derive(Debug, Clone, Copy, Default)]
pub struct DenseLu;

struct DenseFactors(LU<f64, nalgebra::Dyn, nalgebra::Dyn>);

impl Factorization for DenseFactors {
    fn solve_multiple(&self, rhs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        rhs.iter()
            .map(|b| {
                if b.len() != self.0.l().nrows() {
                    return Err(Error::DimensionMismatch(alloc::format!("rhs of length {}", b.len())));
                }
                self.0
                    .solve(&DVector::from_column_slice(b))
                    .map(|x| x.as_slice().to_vec())
                    .ok_or_else(|| Error::Solve("dense LU: matrix is singular".to_string()))
            })
            .collect()
    }
}

impl LinearSolver for DenseLu {
    fn name(&self) -> &'static str {
        "dense-lu"
    }

    fn factorize(&self, matrix: &CsrMatrix) -> Result<Box<dyn Factorization>> {
        if matrix.nrows != matrix.ncols {
            return Err(Error::DimensionMismatch(alloc::format!("{}x{} matrix", matrix.nrows, matrix.ncols)));
        }
        let lu = matrix.to_dense().lu();
        if !lu.is_invertible() {
            return Err(Error::Solve("dense LU: matrix is singular".to_string()));
        }
        Ok(Box::new(DenseFactors(lu)))
    }
}

/// Checks that `matrix` is square and matches `rhs`.
pub fn check_square(matrix: &CsrMatrix, rhs: &[f64]) -> Result<()> {
    if matrix.nrows != matrix.ncols || matrix.nrows != rhs.len() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "{}x{} matrix with rhs of length {}",
            matrix.nrows,
            matrix.ncols,
            rhs.len()
        )));
    }
    Ok(())
}

/// Residual-correction passes after a bordered solve.
pub const REFINEMENT_STEPS: usize = 2;

/// Solves `[[A, w], [vᵀ, d]] [x; λ] = [b; g]` where the last unknown is a scalar
/// multiplier and `A` has a one-dimensional kernel whose vector is nonzero at `pin`
/// (as is row `pin` of a left kernel vector).
///
/// The factored matrix is `A` with row `pin` replaced by the unit row, which is
/// nonsingular under these assumptions and keeps the dense multiplier row and
/// column out of the factorization. Solves for a particular solution, the
/// response to `w` and the kernel vector give `λ` from row `pin` and the kernel
/// coefficient from the last row. The elimination amplifies rounding, so the
/// result is refined against the full system with the same factors.
pub fn solve_bordered(matrix: &CsrMatrix, rhs: &[f64], pin: usize, solver: &dyn LinearSolver) -> Result<Vec<f64>> {
    check_square(matrix, rhs)?;
    let n = matrix.nrows;
    if n < 2 || pin >= n - 1 {
        return Err(Error::OutOfRange(alloc::format!("pin {pin} for a bordered system of size {n}")));
    }
    let m = n - 1;
    let mut pinned = TripletBuilder::with_capacity(m, m, matrix.nnz());
    let mut w = alloc::vec![0.0; m];
    for (i, j, v) in matrix.triplets() {
        if i < m && j < m && i != pin {
            pinned.push(i, j, v);
        } else if i < m && j == m {
            w[i] = v;
        }
    }
    pinned.push(pin, pin, 1.0);
    let factors = solver.factorize(&pinned.build())?;

    let mut w_tilde = w.clone();
    w_tilde[pin] = 0.0;
    let mut e = alloc::vec![0.0; m];
    e[pin] = 1.0;
    let sols = factors.solve_multiple(&[&w_tilde, &e])?;
    let (y2, z) = (&sols[0], &sols[1]);

    let row_dot = |row: usize, y: &[f64]| matrix.row(row).filter(|&(j, _)| j < m).map(|(j, v)| v * y[j]).sum::<f64>();
    let scale = matrix.max_abs().max(f64::MIN_POSITIVE);
    let denom = w[pin] - row_dot(pin, y2);
    if !(denom.abs() > 1e-14 * scale) {
        return Err(Error::Solve(alloc::format!("bordered solve: multiplier is not determined (pin {pin})")));
    }
    let vz = row_dot(m, z);
    if !(vz.abs() > 1e-14 * scale) {
        return Err(Error::Solve(alloc::format!("bordered solve: constraint does not fix the kernel (pin {pin})")));
    }
    let d = matrix.get(m, m);
    let v_y2 = row_dot(m, y2);

    let apply = |r: &[f64]| -> Result<Vec<f64>> {
        let mut b = r[..m].to_vec();
        b[pin] = 0.0;
        let y1 = factors.solve(&b)?;
        let lambda = (r[pin] - row_dot(pin, &y1)) / denom;
        let t = (r[m] - row_dot(m, &y1) + lambda * v_y2 - d * lambda) / vz;
        let mut x: Vec<f64> = (0..m).map(|i| y1[i] - lambda * y2[i] + t * z[i]).collect();
        x.push(lambda);
        Ok(x)
    };

    let residual = |x: &[f64]| -> Vec<f64> { rhs.iter().zip(matrix.matvec(x)).map(|(b, a)| b - a).collect() };
    let mut x = apply(rhs)?;
    let mut r = residual(&x);
    let mut rn = norm(&r);
    for _ in 0..REFINEMENT_STEPS {
        if rn == 0.0 {
            break;
        }
        let dx = apply(&r)?;
        let candidate: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
        let rc = residual(&candidate);
        let rcn = norm(&rc);
        if !(rcn < rn) {
            break;
        }
        (x, r, rn) = (candidate, rc, rcn);
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStrategy {
    Direct,
    Condensed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveDiagnostics {
    pub strategy: SolveStrategy,
    pub solver: &'static str,
    /// Size of the full system.
    pub dimension: usize,
    /// Size of the system handed to the solver.
    pub solved_dimension: usize,
    /// `‖Ax − b‖ / ‖b‖` on the full system (absolute when `b = 0`).
    pub relative_residual: f64,
    /// Filled in by callers that can measure time.
    pub factorization_seconds: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct DiscreteSolution {
    pub coefficients: Vec<f64>,
    pub layout: SpaceLayout,
    pub diagnostics: SolveDiagnostics,
}

impl DiscreteSolution {
    pub fn velocity(&self, element: usize, xi: [f64; 2]) -> Result<[f64; 2]> {
        eval_field(&self.layout, &self.coefficients, ElementField::Velocity, element, xi)
    }

    pub fn pressure(&self, element: usize, xi: [f64; 2]) -> Result<f64> {
        Ok(eval_field(&self.layout, &self.coefficients, ElementField::Pressure, element, xi)?[0])
    }

    pub fn multiplier(&self) -> f64 {
        self.coefficients[self.layout.multiplier()]
    }
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

/// `‖Ax − b‖ / ‖b‖`, or the absolute residual when `b = 0`.
pub fn relative_residual(matrix: &CsrMatrix, x: &[f64], rhs: &[f64]) -> f64 {
    let r: Vec<f64> = matrix.matvec(x).iter().zip(rhs).map(|(a, b)| a - b).collect();
    let nb = norm(rhs);
    if nb > 0.0 {
        norm(&r) / nb
    } else {
        norm(&r)
    }
}

/// Solves the full system; the multiplier is eliminated through [`solve_bordered`]
/// pinned at the first pressure unknown.
pub fn solve_direct(system: &GlobalSystem, solver: &dyn LinearSolver) -> Result<DiscreteSolution> {
    let x = solve_bordered(&system.matrix, &system.rhs, system.layout.p_dof(0, 0), solver)?;
    finish(system, x, SolveStrategy::Direct, solver.name(), system.dim())
}

fn finish(
    system: &GlobalSystem,
    x: Vec<f64>,
    strategy: SolveStrategy,
    solver: &'static str,
    solved_dimension: usize,
) -> Result<DiscreteSolution> {
    if x.len() != system.dim() || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solve(alloc::format!("{solver}: solution is not finite")));
    }
    let relative_residual = relative_residual(&system.matrix, &x, &system.rhs);
    Ok(DiscreteSolution {
        coefficients: x,
        layout: system.layout.clone(),
        diagnostics: SolveDiagnostics {
            strategy,
            solver,
            dimension: system.dim(),
            solved_dimension,
            relative_residual,
            factorization_seconds: None,
        },
    })
}

/// Element block `A_II` (factored) with the trace couplings of one element.
#[derive(Debug, Clone)]
struct ElementBlock {
    interior: Vec<usize>,
    /// Condensed indices coupled to the element through `A_IT`.
    trace_cols: Vec<usize>,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    a_it: DMatrix<f64>,
}

/// Schur complement of the element unknowns; index `t` stands for global `n_interior + t`.
#[derive(Debug, Clone)]
pub struct CondensedSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    blocks: Vec<ElementBlock>,
    n_interior: usize,
}

impl CondensedSystem {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    /// Full coefficient vector from a solution of the condensed system.
    pub fn recover(&self, system: &GlobalSystem, trace: &[f64]) -> Result<Vec<f64>> {
        if trace.len() != self.dim() {
            return Err(Error::DimensionMismatch(alloc::format!("{} trace values for {}", trace.len(), self.dim())));
        }
        let mut x = alloc::vec![0.0; system.dim()];
        x[self.n_interior..].copy_from_slice(trace);
        for (el, b) in self.blocks.iter().enumerate() {
            let xt = DVector::from_iterator(b.trace_cols.len(), b.trace_cols.iter().map(|&t| trace[t]));
            let bi = DVector::from_iterator(b.interior.len(), b.interior.iter().map(|&i| system.rhs[i]));
            let xi = b
                .lu
                .solve(&(bi - &b.a_it * xt))
                .ok_or(Error::SingularLocal { element: el, context: "interior recovery" })?;
            for (k, &i) in b.interior.iter().enumerate() {
                x[i] = xi[k];
            }
        }
        Ok(x)
    }
}

fn interior_dofs(layout: &SpaceLayout, element: usize) -> Vec<usize> {
    let nb = layout.nb();
    (0..2)
        .flat_map(|c| (0..nb).map(move |i| (c, i)))
        .map(|(c, i)| layout.u_dof(element, c, i))
        .chain((0..nb).map(|i| layout.p_dof(element, i)))
        .collect()
}

/// Eliminates `u` and `p` element by element: `S = A_TT − Σ_K A_TI A_II⁻¹ A_IT`.
pub fn condense(system: &GlobalSystem) -> Result<CondensedSystem> {
    let layout = &system.layout;
    let a = &system.matrix;
    let at = a.transpose();
    let ni = layout.n_interior();
    let nt = system.dim() - ni;
    let mut owner = alloc::vec![usize::MAX; ni];
    for el in 0..layout.n_elements {
        for i in interior_dofs(layout, el) {
            owner[i] = el;
        }
    }

    let mut s = TripletBuilder::new(nt, nt);
    for i in ni..system.dim() {
        for (j, v) in a.row(i) {
            if j >= ni {
                s.push(i - ni, j - ni, v);
            }
        }
    }
    let mut rhs: Vec<f64> = system.rhs[ni..].to_vec();
    let mut blocks = Vec::with_capacity(layout.n_elements);

    for el in 0..layout.n_elements {
        let interior = interior_dofs(layout, el);
        let m = interior.len();
        let local = |g: usize| interior.iter().position(|&i| i == g);
        let mut a_ii = DMatrix::zeros(m, m);
        let mut trace_cols: Vec<usize> = Vec::new();
        let mut trace_rows: Vec<usize> = Vec::new();
        for &g in &interior {
            for (j, _) in a.row(g) {
                if j >= ni {
                    trace_cols.push(j - ni);
                } else if owner[j] != el {
                    return Err(Error::Solve(alloc::format!("element {el} couples to interior unknowns of element {}", owner[j])));
                }
            }
            for (j, _) in at.row(g) {
                if j >= ni {
                    trace_rows.push(j - ni);
                }
            }
        }
        trace_cols.sort_unstable();
        trace_cols.dedup();
        trace_rows.sort_unstable();
        trace_rows.dedup();
        let mut a_it = DMatrix::zeros(m, trace_cols.len());
        let mut a_ti = DMatrix::zeros(trace_rows.len(), m);
        for (r, &g) in interior.iter().enumerate() {
            for (j, v) in a.row(g) {
                if j >= ni {
                    a_it[(r, trace_cols.binary_search(&(j - ni)).unwrap())] = v;
                } else {
                    a_ii[(r, local(j).unwrap())] = v;
                }
            }
            for (j, v) in at.row(g) {
                if j >= ni {
                    a_ti[(trace_rows.binary_search(&(j - ni)).unwrap(), r)] = v;
                }
            }
        }
        let lu = a_ii.lu();
        if !lu.is_invertible() {
            return Err(Error::SingularLocal { element: el, context: "element block" });
        }
        let x = lu.solve(&a_it).ok_or(Error::SingularLocal { element: el, context: "element block" })?;
        let update = &a_ti * x;
        for (r, &tr) in trace_rows.iter().enumerate() {
            for (c, &tc) in trace_cols.iter().enumerate() {
                s.push(tr, tc, -update[(r, c)]);
            }
        }
        let bi = DVector::from_iterator(m, interior.iter().map(|&i| system.rhs[i]));
        let y = lu.solve(&bi).ok_or(Error::SingularLocal { element: el, context: "element load" })?;
        let g = &a_ti * y;
        for (r, &tr) in trace_rows.iter().enumerate() {
            rhs[tr] -= g[r];
        }
        blocks.push(ElementBlock { interior, trace_cols, lu, a_it });
    }
    Ok(CondensedSystem { matrix: s.build(), rhs, blocks, n_interior: ni })
}

pub fn condense_and_solve(system: &GlobalSystem, solver: &dyn LinearSolver) -> Result<DiscreteSolution> {
    let condensed = condense(system)?;
    let pin = system.layout.offset_pbar() - system.layout.n_interior();
    let trace = solve_bordered(&condensed.matrix, &condensed.rhs, pin, solver)?;
    let x = condensed.recover(system, &trace)?;
    finish(system, x, SolveStrategy::Condensed, solver.name(), condensed.dim())
}

pub fn solve(system: &GlobalSystem, solver: &dyn LinearSolver, strategy: SolveStrategy) -> Result<DiscreteSolution> {
    match strategy {
        SolveStrategy::Direct => solve_direct(system, solver),
        SolveStrategy::Condensed => condense_and_solve(system, solver),
    }
}

/// Evaluates the discrete velocity at a physical point inside `element`.
pub fn velocity_at(solution: &DiscreteSolution, mesh: &crate::mesh::MeshTopology, element: usize, x: Point) -> Result<[f64; 2]> {
    solution.velocity(element, mesh.geometry(element).inverse_map(x))
}
