//! Small dense square matrices over `f64`.
//!
//! Everything in this crate works in dimensions 2 through 8, so the matrix
//! type is deliberately simple: a flat column-major buffer with the handful
//! of operations the lattice code needs (products, LU determinant/inverse,
//! thin QR). Basis vectors are stored as *columns*, which makes a column
//! borrowable as a contiguous slice.

use serde::{Deserialize, Serialize};

/// Dense `d x d` matrix, column-major: entry `(i, j)` lives at `a[j*d + i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    d: usize,
    a: Vec<f64>,
}

impl Matrix {
    pub fn zeros(d: usize) -> Matrix {
        Matrix { d, a: vec![0.0; d * d] }
    }

    pub fn identity(d: usize) -> Matrix {
        let mut m = Matrix::zeros(d);
        for i in 0..d {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Build from column vectors. Panics if the columns are not `d` vectors
    /// of length `d` with `d >= 1`.
    pub fn from_cols(cols: &[Vec<f64>]) -> Matrix {
        let d = cols.len();
        assert!(d >= 1, "matrix needs at least one column");
        let mut m = Matrix::zeros(d);
        for (j, c) in cols.iter().enumerate() {
            assert_eq!(c.len(), d, "column {} has length {}, want {}", j, c.len(), d);
            m.a[j * d..(j + 1) * d].copy_from_slice(c);
        }
        m
    }

    /// Build from row vectors (the wire format for basis files).
    pub fn from_rows(rows: &[Vec<f64>]) -> Matrix {
        let d = rows.len();
        assert!(d >= 1, "matrix needs at least one row");
        let mut m = Matrix::zeros(d);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), d, "row {} has length {}, want {}", i, r.len(), d);
            for j in 0..d {
                m.set(i, j, r[j]);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[j * self.d + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[j * self.d + i] = v;
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.a[j * self.d..(j + 1) * self.d]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.a[j * self.d..(j + 1) * self.d]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.d)
            .map(|i| (0..self.d).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.d);
        for i in 0..self.d {
            for j in 0..self.d {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn mul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.d, rhs.d, "dimension mismatch in matrix product");
        let d = self.d;
        let mut out = Matrix::zeros(d);
        for j in 0..d {
            let rcol = rhs.col(j);
            let ocol = out.col_mut(j);
            for (k, &r) in rcol.iter().enumerate() {
                if r != 0.0 {
                    let scol = &self.a[k * d..(k + 1) * d];
                    for i in 0..d {
                        ocol[i] += scol[i] * r;
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.d, x.len(), "dimension mismatch in matrix-vector product");
        let d = self.d;
        let mut out = vec![0.0; d];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                let c = self.col(j);
                for i in 0..d {
                    out[i] += c[i] * xj;
                }
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix { d: self.d, a: self.a.iter().map(|v| v * s).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Determinant via LU with partial pivoting.
    pub fn det(&self) -> f64 {
        let d = self.d;
        let mut lu = self.a.clone();
        let mut det = 1.0;
        for k in 0..d {
            let mut piv = k;
            let mut best = lu[k * d + k].abs();
            for i in (k + 1)..d {
                let v = lu[k * d + i].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best == 0.0 {
                return 0.0;
            }
            if piv != k {
                for j in 0..d {
                    lu.swap(j * d + k, j * d + piv);
                }
                det = -det;
            }
            let pivot = lu[k * d + k];
            det *= pivot;
            for i in (k + 1)..d {
                let f = lu[k * d + i] / pivot;
                lu[k * d + i] = f;
                for j in (k + 1)..d {
                    lu[j * d + i] -= f * lu[j * d + k];
                }
            }
        }
        det
    }

    /// Inverse via LU with partial pivoting; `None` if singular to working
    /// precision.
    pub fn inverse(&self) -> Option<Matrix> {
        let d = self.d;
        let mut lu = self.a.clone();
        let mut perm: Vec<usize> = (0..d).collect();
        for k in 0..d {
            let mut piv = k;
            let mut best = lu[k * d + k].abs();
            for i in (k + 1)..d {
                let v = lu[k * d + i].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best < f64::MIN_POSITIVE {
                return None;
            }
            if piv != k {
                for j in 0..d {
                    lu.swap(j * d + k, j * d + piv);
                }
                perm.swap(k, piv);
            }
            let pivot = lu[k * d + k];
            for i in (k + 1)..d {
                let f = lu[k * d + i] / pivot;
                lu[k * d + i] = f;
                for j in (k + 1)..d {
                    lu[j * d + i] -= f * lu[j * d + k];
                }
            }
        }
        let mut inv = Matrix::zeros(d);
        let mut col = vec![0.0; d];
        for e in 0..d {
            for i in 0..d {
                col[i] = if perm[i] == e { 1.0 } else { 0.0 };
            }
            // Forward substitution (unit lower factor), then back substitution.
            for i in 1..d {
                for j in 0..i {
                    col[i] -= lu[j * d + i] * col[j];
                }
            }
            for i in (0..d).rev() {
                for j in (i + 1)..d {
                    col[i] -= lu[j * d + i] * col[j];
                }
                col[i] /= lu[i * d + i];
            }
            inv.col_mut(e).copy_from_slice(&col);
        }
        Some(inv)
    }

    /// Thin QR factorization `self = Q R` with `R` upper triangular and
    /// positive diagonal, via modified Gram-Schmidt. `None` if a pivot
    /// degenerates below `1e-12` times the largest column norm.
    pub fn qr(&self) -> Option<(Matrix, Matrix)> {
        let d = self.d;
        let mut q = self.clone();
        let mut r = Matrix::zeros(d);
        let scale = (0..d)
            .map(|j| norm(self.col(j)))
            .fold(0.0_f64, f64::max)
            .max(f64::MIN_POSITIVE);
        for j in 0..d {
            for i in 0..j {
                let qi: Vec<f64> = q.col(i).to_vec();
                let rij = dot(&qi, q.col(j));
                r.set(i, j, rij);
                let cj = q.col_mut(j);
                for (k, &qik) in qi.iter().enumerate() {
                    cj[k] -= rij * qik;
                }
            }
            let njj = norm(q.col(j));
            if njj < 1e-12 * scale {
                return None;
            }
            r.set(j, j, njj);
            for v in q.col_mut(j) {
                *v /= njj;
            }
        }
        Some((q, r))
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn det_and_inverse_roundtrip() {
        let m = Matrix::from_rows(&[
            vec![2.0, 1.0, 0.5],
            vec![-1.0, 3.0, 2.0],
            vec![0.0, 1.0, 1.5],
        ]);
        let inv = m.inverse().unwrap();
        let prod = m.mul(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(prod.get(i, j), want, epsilon = 1e-12);
            }
        }
        assert_abs_diff_eq!(m.det() * inv.det(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn det_matches_cofactor_expansion_2d() {
        let m = Matrix::from_rows(&[vec![3.0, 7.0], vec![2.0, -5.0]]);
        assert_abs_diff_eq!(m.det(), 3.0 * -5.0 - 7.0 * 2.0, epsilon = 1e-14);
    }

    #[test]
    fn singular_matrix_has_no_inverse() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(m.inverse().is_none());
        assert_eq!(m.det(), 0.0);
    }

    #[test]
    fn qr_reconstructs_and_orthonormalizes() {
        let m = Matrix::from_rows(&[
            vec![1.0, 2.0, 0.0],
            vec![0.5, -1.0, 1.0],
            vec![0.0, 3.0, 2.0],
        ]);
        let (q, r) = m.qr().unwrap();
        let qtq = q.transpose().mul(&q);
        let qr = q.mul(&r);
        for i in 0..3 {
            for j in 0..3 {
                let id = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(qtq.get(i, j), id, epsilon = 1e-9);
                assert_abs_diff_eq!(qr.get(i, j), m.get(i, j), epsilon = 1e-9);
                if i > j {
                    assert_eq!(r.get(i, j), 0.0);
                }
            }
            assert!(r.get(i, i) > 0.0);
        }
    }

    #[test]
    fn row_and_column_constructors_agree() {
        let rows = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let m = Matrix::from_rows(&rows);
        assert_eq!(m.to_rows(), rows);
        let cols = vec![vec![1.0, 3.0], vec![2.0, 4.0]];
        assert_eq!(Matrix::from_cols(&cols), m);
        assert_eq!(m.col(0), &[1.0, 3.0]);
    }
}
