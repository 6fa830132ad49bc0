//! Dense linear algebra for the tiny systems that show up around an LP basis.
//!
//! Everything here works on row-major `f64` matrices of dimension at most a
//! few dozen, so the algorithms favour robustness over speed: Gauss-Jordan
//! with partial pivoting for solves and inverses, and cyclic Jacobi rotations
//! for symmetric eigenvalues.

use std::fmt;

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from a slice of equally sized rows.
    ///
    /// Panics if the rows are ragged.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Solves `self * x = rhs`; `None` when a pivot falls below `1e-12`
    /// relative to the largest entry.
    pub fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        assert!(self.is_square(), "solve needs a square matrix");
        assert_eq!(rhs.len(), self.rows);
        let n = self.rows;
        let mut a = self.clone();
        let mut b = rhs.to_vec();
        let scale = a.max_abs().max(1.0);
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs()))
                .expect("non-empty range");
            if a[(pivot, col)].abs() <= 1e-12 * scale {
                return None;
            }
            if pivot != col {
                a.swap_rows(pivot, col);
                b.swap(pivot, col);
            }
            for i in col + 1..n {
                let f = a[(i, col)] / a[(col, col)];
                if f == 0.0 {
                    continue;
                }
                for j in col..n {
                    let v = a[(col, j)];
                    a[(i, j)] -= f * v;
                }
                b[i] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| a[(i, j)] * x[j]).sum();
            x[i] = (b[i] - s) / a[(i, i)];
        }
        Some(x)
    }

    /// Inverse via column-by-column solves.
    pub fn inverse(&self) -> Option<Matrix> {
        let n = self.rows;
        let mut inv = Matrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = self.solve(&e)?;
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        Some(inv)
    }

    pub fn determinant(&self) -> f64 {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.clone();
        let mut det = 1.0;
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs()))
                .expect("non-empty range");
            if a[(pivot, col)] == 0.0 {
                return 0.0;
            }
            if pivot != col {
                a.swap_rows(pivot, col);
                det = -det;
            }
            det *= a[(col, col)];
            for i in col + 1..n {
                let f = a[(i, col)] / a[(col, col)];
                for j in col..n {
                    let v = a[(col, j)];
                    a[(i, j)] -= f * v;
                }
            }
        }
        det
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.to_rows()).finish()
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(m: &Matrix) -> Vec<f64> {
    assert!(m.is_square(), "eigenvalues need a square matrix");
    let n = m.rows();
    let mut a = m.clone();
    let scale = a.max_abs();
    if scale == 0.0 {
        return vec![0.0; n];
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(f64::total_cmp);
    eig
}

/// Singular values of `m`, ascending, from the eigenvalues of `mᵀm`.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    let gram = m.transpose().mul(m);
    symmetric_eigenvalues(&gram)
        .into_iter()
        .map(|l| l.max(0.0).sqrt())
        .collect()
}

/// Smallest singular value of a square matrix.
pub fn smallest_singular_value(m: &Matrix) -> f64 {
    assert!(
        m.is_square(),
        "smallest_singular_value needs a square matrix"
    );
    if m.rows() == 0 {
        return 0.0;
    }
    singular_values(m)[0]
}
