//! Small dense helpers shared by the learners and the regret accounting.

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;

/// Cholesky factor of a symmetric positive definite matrix.
pub(crate) fn cholesky(m: &Mat, context: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone()).ok_or_else(|| {
        Error::Conditioning(format!(
            "{context}: {}x{} matrix is not numerically positive definite",
            m.nrows(),
            m.ncols()
        ))
    })
}

/// Solves `a * x = rhs` for SPD `a`.
pub fn spd_solve(a: &Mat, rhs: &Mat) -> Result<Mat> {
    Ok(cholesky(a, "spd_solve")?.solve(rhs))
}

pub fn spd_inverse(a: &Mat) -> Result<Mat> {
    let mut inv = cholesky(a, "spd_inverse")?.inverse();
    symmetrize(&mut inv);
    Ok(inv)
}

/// Replaces `m` with `(m + m^T) / 2`.
pub fn symmetrize(m: &mut Mat) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Horizontal concatenation `[left | right]`.
pub fn hstack(left: &Mat, right: &Mat) -> Mat {
    debug_assert_eq!(left.nrows(), right.nrows());
    let rows = left.nrows();
    let (lc, rc) = (left.ncols(), right.ncols());
    Mat::from_fn(rows, lc + rc, |i, j| {
        if j < lc {
            left[(i, j)]
        } else {
            right[(i, j - lc)]
        }
    })
}

/// Vertical concatenation of equally wide blocks.
pub fn vstack<'a>(blocks: impl IntoIterator<Item = &'a Mat>, cols: usize) -> Mat {
    let blocks: Vec<&Mat> = blocks.into_iter().collect();
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut offset = 0;
    for b in blocks {
        out.view_mut((offset, 0), (b.nrows(), cols)).copy_from(b);
        offset += b.nrows();
    }
    out
}

/// `||a - b||_F / max(||b||_F, tiny)`.
pub fn rel_frobenius(a: &Mat, b: &Mat) -> f64 {
    let denom = b.norm().max(f64::MIN_POSITIVE);
    (a - b).norm() / denom
}

/// Largest absolute entry; zero for an empty matrix.
pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Plain matrix record used by snapshot files: row-major, 8-byte floats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&Mat> for MatrixRecord {
    fn from(m: &Mat) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        MatrixRecord {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }
}

impl MatrixRecord {
    pub fn to_matrix(&self) -> Result<Mat> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::shape(
                "matrix record",
                self.rows * self.cols,
                self.data.len(),
            ));
        }
        Ok(Mat::from_row_slice(self.rows, self.cols, &self.data))
    }
}
