//! Dense vector and matrix helpers.
//!
//! Just the products the estimators need: inner products, norms, and a
//! row-major `D x d` matrix with forward (`theta * v`) and transpose
//! (`theta^T * w`) application. Nothing here is tuned beyond contiguous
//! traversal; dimensions in the shipped experiments stay in the thousands.

use crate::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += c * x`
pub fn axpy(y: &mut [f64], c: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += c * xi;
    }
}

pub fn scale(a: &mut [f64], c: f64) {
    for x in a.iter_mut() {
        *x *= c;
    }
}

/// Rescale `w` onto the ball of radius `r` when it lies outside.
pub fn project_ball(w: &mut [f64], r: f64) {
    let n = norm(w);
    if n > r {
        scale(w, r / n);
    }
}

/// Row-major dense matrix with `rows x cols` entries (`rows = D`, `cols = d`).
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `theta^T w`: length-`cols` vector from a length-`rows` input.
    pub fn t_apply(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.rows {
            return Err(Error::ShapeMismatch(format!(
                "t_apply: vector length {} != matrix rows {}",
                w.len(),
                self.rows
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &wi) in w.iter().enumerate() {
            if wi != 0.0 {
                axpy(&mut out, wi, self.row(i));
            }
        }
        Ok(out)
    }

    /// `theta v`: length-`rows` vector from a length-`cols` input.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::ShapeMismatch(format!(
                "apply: vector length {} != matrix cols {}",
                v.len(),
                self.cols
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    /// Max-abs entry of `theta^T theta - I`; zero for orthonormal columns.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..self.cols {
            for b in a..self.cols {
                let mut s = 0.0;
                for i in 0..self.rows {
                    s += self.get(i, a) * self.get(i, b);
                }
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((s - target).abs());
            }
        }
        worst
    }

    /// Orthonormalize columns in place (modified Gram-Schmidt, two passes).
    /// The normalization leaves each pivot positive, which fixes the sign
    /// ambiguity of the factorization.
    pub(crate) fn orthonormalize_columns(&mut self) -> Result<()> {
        let (rows, cols) = (self.rows, self.cols);
        let col = |m: &Matrix, j: usize| -> Vec<f64> { (0..rows).map(|i| m.get(i, j)).collect() };
        for j in 0..cols {
            let mut v = col(self, j);
            for _pass in 0..2 {
                for k in 0..j {
                    let qk = col(self, k);
                    let c = dot(&qk, &v);
                    axpy(&mut v, -c, &qk);
                }
            }
            let nv = norm(&v);
            if nv < 1e-300 {
                return Err(Error::Numerical(
                    "rank-deficient matrix in orthonormalization".into(),
                ));
            }
            scale(&mut v, 1.0 / nv);
            for (i, vi) in v.iter().enumerate() {
                self.row_mut(i)[j] = *vi;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apply_and_t_apply_agree_with_direct_sums() {
        let m = Matrix::from_fn(3, 2, |i, j| (i * 2 + j) as f64);
        let w = vec![1.0, -1.0, 2.0];
        let u = m.t_apply(&w).unwrap();
        assert_eq!(u, vec![1.0 * 0.0 - 1.0 * 2.0 + 2.0 * 4.0, 1.0 - 3.0 + 2.0 * 5.0]);
        let v = m.apply(&[1.0, 2.0]).unwrap();
        assert_eq!(v, vec![2.0, 2.0 + 6.0, 4.0 + 10.0]);
    }

    #[test]
    fn shape_errors() {
        let m = Matrix::identity(3);
        assert!(m.t_apply(&[1.0]).is_err());
        assert!(m.apply(&[1.0, 2.0, 3.0, 4.0]).is_err());
    }

    #[test]
    fn project_ball_clips_radially() {
        let mut w = vec![3.0, 4.0];
        project_ball(&mut w, 1.0);
        assert!((norm(&w) - 1.0).abs() < 1e-12);
        assert!((w[0] / w[1] - 0.75).abs() < 1e-12);
        let mut inside = vec![0.1, 0.1];
        project_ball(&mut inside, 1.0);
        assert_eq!(inside, vec![0.1, 0.1]);
    }
}
