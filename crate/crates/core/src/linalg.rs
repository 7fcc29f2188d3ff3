//! Small dense linear algebra: a row-major matrix, Gram–Schmidt under an
//! arbitrary inner product, a one-sided Jacobi SVD and an LU determinant.

use std::ops::{Index, IndexMut};

use crate::scalar::{dot, Real};

#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Mat { rows, cols, data }
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<T>]) -> Self {
        let rows = columns.first().map_or(0, Vec::len);
        Self::from_fn(rows, columns.len(), |r, c| columns[c][r])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<T> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn matmul(&self, other: &Mat<T>) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == T::zero() {
                    continue;
                }
                for c in 0..other.cols {
                    out[(r, c)] = out[(r, c)] + a * other[(k, c)];
                }
            }
        }
        out
    }

    pub fn sub(&self, other: &Mat<T>) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    /// Spectral norm (largest singular value).
    pub fn op_norm(&self) -> T {
        jacobi_svd(self)
            .singular_values
            .first()
            .copied()
            .unwrap_or_else(T::zero)
    }

    /// Determinant of a square matrix by LU with partial pivoting.
    pub fn determinant(&self) -> T {
        assert_eq!(self.rows, self.cols, "determinant of a non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut det = T::one();
        for k in 0..n {
            let (piv, pmax) =
                (k..n)
                    .map(|r| (r, a[(r, k)].abs()))
                    .fold((k, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax == T::zero() {
                return T::zero();
            }
            if piv != k {
                for c in 0..n {
                    a.data.swap(k * n + c, piv * n + c);
                }
                det = -det;
            }
            let d = a[(k, k)];
            det = det * d;
            for r in k + 1..n {
                let f = a[(r, k)] / d;
                if f == T::zero() {
                    continue;
                }
                for c in k..n {
                    let v = a[(k, c)];
                    a[(r, c)] = a[(r, c)] - f * v;
                }
            }
        }
        det
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}

/// Modified Gram–Schmidt with one re-orthogonalisation pass.
///
/// Candidates whose residual after projection is below `1e-10` of their own
/// norm are skipped; at most `limit` vectors are returned.
pub fn gram_schmidt<T: Real, I, F>(candidates: I, limit: usize, inner: F) -> Vec<Vec<T>>
where
    I: IntoIterator<Item = Vec<T>>,
    F: Fn(&[T], &[T]) -> T,
{
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(limit);
    let drop_tol = T::lit(1e-10);
    for mut v in candidates {
        if basis.len() >= limit {
            break;
        }
        let start = inner(&v, &v).sqrt();
        if start == T::zero() {
            continue;
        }
        for _ in 0..2 {
            for b in &basis {
                let c = inner(&v, b);
                v.iter_mut().zip(b).for_each(|(x, &y)| *x = *x - c * y);
            }
        }
        let len = inner(&v, &v).sqrt();
        if len <= drop_tol * start {
            continue;
        }
        v.iter_mut().for_each(|x| *x = *x / len);
        basis.push(v);
    }
    basis
}

/// Singular values (descending) and right singular vectors of a matrix.
#[derive(Clone, Debug)]
pub struct Svd<T> {
    pub singular_values: Vec<T>,
    /// `n × n`; column `k` is the right singular vector for `singular_values[k]`.
    pub v: Mat<T>,
}

/// One-sided (Hestenes) Jacobi SVD of an `m × n` matrix.
///
/// Always returns `n` singular values, zeros included, so the nullity of a
/// wide matrix is visible directly in the spectrum.
pub fn jacobi_svd<T: Real>(a: &Mat<T>) -> Svd<T> {
    let (m, n) = (a.rows(), a.cols());
    let mut cols: Vec<Vec<T>> = (0..n).map(|c| a.column(c)).collect();
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|c| {
            let mut e = vec![T::zero(); n];
            e[c] = T::one();
            e
        })
        .collect();
    let eps = T::epsilon();
    let tiny = T::min_positive_value();

    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                if alpha <= tiny || beta <= tiny {
                    continue;
                }
                let gamma = dot(&cols[p], &cols[q]);
                if gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = (T::one() + t * t).sqrt().recip();
                let s = c * t;
                rotate(&mut cols, p, q, c, s, m);
                rotate(&mut v, p, q, c, s, n);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(T, usize)> = cols
        .iter()
        .enumerate()
        .map(|(k, col)| (dot(col, col).sqrt(), k))
        .collect();
    order.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
    });
    let singular_values = order.iter().map(|&(s, _)| s).collect();
    let v = Mat::from_fn(n, n, |r, c| v[order[c].1][r]);
    Svd { singular_values, v }
}

fn rotate<T: Real>(cols: &mut [Vec<T>], p: usize, q: usize, c: T, s: T, len: usize) {
    let (left, right) = cols.split_at_mut(q);
    let (cp, cq) = (&mut left[p], &mut right[0]);
    for k in 0..len {
        let x = cp[k];
        let y = cq[k];
        cp[k] = c * x - s * y;
        cq[k] = s * x + c * y;
    }
}
