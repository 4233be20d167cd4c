//! Sparse LU backend and timed solves.

use std::time::Instant;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use oseen_core::forms::GlobalSystem;
use oseen_core::linsys::{self, DiscreteSolution, Factorization, LinearSolver, SolveStrategy};
use oseen_core::sparse::CsrMatrix;
use oseen_core::{Error, Result};

/// Sparse LU with partial pivoting from `faer`.
///
/// Factorization threading follows faer's global parallelism setting; with
/// `faer::Par::Seq` repeated solves are bitwise identical.
#[derive(Debug, Clone, Copy, Default)]
pub struct SparseLu;

fn solve_error(what: &str, e: impl std::fmt::Debug) -> Error {
    Error::Solve(format!("sparse LU {what}: {e:?}"))
}

struct SparseFactors {
    lu: Lu<usize, f64>,
    n: usize,
}

impl Factorization for SparseFactors {
    fn solve_multiple(&self, rhs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        if let Some(b) = rhs.iter().find(|b| b.len() != self.n) {
            return Err(Error::DimensionMismatch(format!("rhs of length {} for a system of size {}", b.len(), self.n)));
        }
        let b = Mat::from_fn(self.n, rhs.len(), |i, j| rhs[j][i]);
        let x = self.lu.solve(&b);
        let out: Vec<Vec<f64>> = (0..rhs.len()).map(|j| (0..self.n).map(|i| x[(i, j)]).collect()).collect();
        if out.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Solve("sparse LU: matrix is numerically singular".into()));
        }
        Ok(out)
    }
}

impl LinearSolver for SparseLu {
    fn name(&self) -> &'static str {
        "faer-sparse-lu"
    }

    fn factorize(&self, matrix: &CsrMatrix) -> Result<Box<dyn Factorization>> {
        let n = matrix.nrows;
        if matrix.ncols != n {
            return Err(Error::DimensionMismatch(format!("{}x{} matrix", n, matrix.ncols)));
        }
        let triplets: Vec<Triplet<usize, usize, f64>> = matrix.triplets().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets).map_err(|e| solve_error("input", e))?;
        let lu = a.sp_lu().map_err(|e| solve_error("factorization", e))?;
        Ok(Box::new(SparseFactors { lu, n }))
    }
}

/// Makes every factorization single-threaded so results do not depend on scheduling;
/// studies parallelize over meshes instead.
pub fn use_sequential_factorization() {
    faer::set_global_parallelism(faer::Par::Seq);
}

/// Solves with [`SparseLu`] and records the wall time of factorization and solve.
pub fn solve_timed(system: &GlobalSystem, strategy: SolveStrategy) -> Result<DiscreteSolution> {
    let start = Instant::now();
    let mut solution = linsys::solve(system, &SparseLu, strategy)?;
    solution.diagnostics.factorization_seconds = Some(start.elapsed().as_secs_f64());
    Ok(solution)
}
