use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use super::SolverError;
use crate::sparse::CsrMatrix;

/// Growth of the probe solution beyond which the equilibrated matrix is treated as singular.
pub const SINGULARITY_THRESHOLD: f64 = 1e14;

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Solves `a x = b` by sparse LU with partial pivoting after row and column
/// equilibration. Rank deficiency is detected by a probe solve.
pub fn solve_sparse(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>, SolverError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(SolverError::NonSquareSystem { rows: n, cols: a.ncols() });
    }
    if b.len() != n {
        return Err(SolverError::InvalidConfig(format!("right-hand side has {} entries for {n} rows", b.len())));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut row_scale = vec![0.0; n];
    for (i, s) in row_scale.iter_mut().enumerate() {
        let m = max_abs(a.row(i).1);
        if !(m > 0.0) || !m.is_finite() {
            return Err(SolverError::SingularMatrix { detail: format!("row {i} is zero or non-finite") });
        }
        *s = 1.0 / m;
    }
    let mut col_max = vec![0.0_f64; n];
    for i in 0..n {
        let (cols, vals) = a.row(i);
        for (j, v) in cols.iter().zip(vals) {
            col_max[*j] = col_max[*j].max((v * row_scale[i]).abs());
        }
    }
    if let Some(j) = col_max.iter().position(|&m| !(m > 0.0)) {
        return Err(SolverError::SingularMatrix { detail: format!("column {j} is zero") });
    }
    let col_scale: Vec<f64> = col_max.iter().map(|m| 1.0 / m).collect();

    let mut trip = Vec::with_capacity(a.nnz());
    for i in 0..n {
        let (cols, vals) = a.row(i);
        for (j, v) in cols.iter().zip(vals) {
            trip.push(Triplet::new(i, *j, v * row_scale[i] * col_scale[*j]));
        }
    }
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
        .map_err(|e| SolverError::SingularMatrix { detail: format!("matrix assembly failed: {e:?}") })?;
    let lu = mat.sp_lu().map_err(|e| SolverError::SingularMatrix { detail: format!("{e:?}") })?;

    let probe: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.7548776662).sin()).collect();
    let rhs = Mat::from_fn(n, 2, |i, k| if k == 0 { b[i] * row_scale[i] } else { probe[i] });
    let sol = lu.solve(&rhs);
    let growth = (0..n).fold(0.0_f64, |m, i| m.max(sol[(i, 1)].abs()));
    if !growth.is_finite() || growth > SINGULARITY_THRESHOLD {
        return Err(SolverError::SingularMatrix { detail: format!("probe growth {growth:.3e}") });
    }
    let x: Vec<f64> = (0..n).map(|i| sol[(i, 0)] * col_scale[i]).collect();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::SingularMatrix { detail: "non-finite solution".into() });
    }
    Ok(x)
}
