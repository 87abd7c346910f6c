//! Dense Gaussian elimination for the small systems built from reception times.

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("singular system: pivot {pivot} in column {column} below tolerance")]
    Singular { column: usize, pivot: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Solves the square system `a · x = b` with partial pivoting.
pub fn solve_square<S: Scalar>(mut a: Vec<Vec<S>>, mut b: Vec<S>, pivot_tol: S) -> Result<Vec<S>, LinalgError> {
    let n = a.len();
    if b.len() != n || a.iter().any(|r| r.len() != n) {
        return Err(LinalgError::Dimension(format!("expected {n}x{n} matrix and {n} right-hand sides")));
    }
    for col in 0..n {
        let (p, pivot) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap_or(std::cmp::Ordering::Equal))
            .expect("non-empty pivot range");
        if !(pivot >= pivot_tol) {
            return Err(LinalgError::Singular { column: col, pivot: pivot.to_f64_lossy() });
        }
        a.swap(col, p);
        b.swap(col, p);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f == S::zero() {
                continue;
            }
            for k in col..n {
                let v = a[col][k];
                a[r][k] -= f * v;
            }
            let v = b[col];
            b[r] -= f * v;
        }
    }
    let mut x = vec![S::zero(); n];
    for r in (0..n).rev() {
        let mut acc = b[r];
        for k in r + 1..n {
            acc -= a[r][k] * x[k];
        }
        x[r] = acc / a[r][r];
    }
    Ok(x)
}

/// Greedily picks rows, in order, that are linearly independent of the rows
/// already picked. Stops once `want` rows are found.
pub fn independent_rows<S: Scalar>(rows: &[Vec<S>], want: usize, tol: S) -> Vec<usize> {
    let mut basis: Vec<(usize, Vec<S>)> = Vec::new();
    let mut picked = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        if picked.len() == want {
            break;
        }
        let mut v = row.clone();
        for (pc, b) in &basis {
            let f = v[*pc] / b[*pc];
            if f != S::zero() {
                for (vk, bk) in v.iter_mut().zip(b) {
                    *vk -= f * *bk;
                }
            }
        }
        let lead =
            v.iter().enumerate().max_by(|x, y| x.1.abs().partial_cmp(&y.1.abs()).unwrap_or(std::cmp::Ordering::Equal));
        if let Some((pc, m)) = lead {
            if m.abs() > tol {
                basis.push((pc, v));
                picked.push(i);
            }
        }
    }
    picked
}

/// Numerical rank.
pub fn rank<S: Scalar>(rows: &[Vec<S>], tol: S) -> usize {
    independent_rows(rows, usize::MAX, tol).len()
}
