//! Small dense linear algebra: Householder QR, least squares, Cholesky and
//! random orthogonal matrices.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is rank deficient")]
    RankDeficient,
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
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

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(LinalgError::Dimension("ragged rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
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

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}

/// Compact Householder QR of an `m x n` matrix with `m >= n`.
#[derive(Debug, Clone)]
pub struct Qr<T> {
    /// R in the upper triangle; reflectors are kept separately.
    r: Matrix<T>,
    reflectors: Vec<Vec<T>>,
}

impl<T: Scalar> Qr<T> {
    pub fn new(a: &Matrix<T>) -> Result<Self, LinalgError> {
        let (m, n) = (a.rows, a.cols);
        if m < n {
            return Err(LinalgError::Dimension(format!("QR needs rows >= cols, got {m}x{n}")));
        }
        let mut r = a.clone();
        let mut reflectors = Vec::with_capacity(n);
        for k in 0..n {
            let norm = (k..m).map(|i| r[(i, k)] * r[(i, k)]).sum::<T>().sqrt();
            let mut v: Vec<T> = (k..m).map(|i| r[(i, k)]).collect();
            if norm == T::zero() {
                reflectors.push(vec![T::zero(); m - k]);
                continue;
            }
            let alpha = if v[0] >= T::zero() { -norm } else { norm };
            v[0] -= alpha;
            let vnorm = v.iter().map(|&x| x * x).sum::<T>().sqrt();
            if vnorm == T::zero() {
                reflectors.push(vec![T::zero(); m - k]);
                continue;
            }
            for x in v.iter_mut() {
                *x /= vnorm;
            }
            for j in k..n {
                let dot: T = (k..m).map(|i| v[i - k] * r[(i, j)]).sum();
                for i in k..m {
                    r[(i, j)] -= T::of(2.0) * v[i - k] * dot;
                }
            }
            reflectors.push(v);
        }
        Ok(Self { r, reflectors })
    }

    fn apply_qt(&self, b: &mut [T]) {
        for (k, v) in self.reflectors.iter().enumerate() {
            let dot: T = v.iter().zip(&b[k..]).map(|(&a, &c)| a * c).sum();
            for (x, &vi) in b[k..].iter_mut().zip(v) {
                *x -= T::of(2.0) * vi * dot;
            }
        }
    }

    fn apply_q(&self, b: &mut [T]) {
        for (k, v) in self.reflectors.iter().enumerate().rev() {
            let dot: T = v.iter().zip(&b[k..]).map(|(&a, &c)| a * c).sum();
            for (x, &vi) in b[k..].iter_mut().zip(v) {
                *x -= T::of(2.0) * vi * dot;
            }
        }
    }

    pub fn r_diag(&self) -> Vec<T> {
        (0..self.r.cols).map(|i| self.r[(i, i)]).collect()
    }

    /// Numerical rank decision on the diagonal of R.
    pub fn is_rank_deficient(&self) -> bool {
        let d = self.r_diag();
        let max = d.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
        if max == T::zero() {
            return true;
        }
        let tol = max * T::epsilon() * T::of_usize(self.r.rows.max(self.r.cols)) * T::of(10.0);
        d.iter().any(|&x| x.abs() <= tol)
    }

    /// Explicit `m x m` orthogonal factor.
    pub fn q(&self) -> Matrix<T> {
        let m = self.r.rows;
        let mut q = Matrix::zeros(m, m);
        for c in 0..m {
            let mut e = vec![T::zero(); m];
            e[c] = T::one();
            self.apply_q(&mut e);
            for r in 0..m {
                q[(r, c)] = e[r];
            }
        }
        q
    }
}

/// Least-squares solution of `A x = b`. Overdetermined systems get the
/// residual minimizer, underdetermined ones the minimum-norm solution.
pub fn lstsq<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Result<Vec<T>, LinalgError> {
    if b.len() != a.rows {
        return Err(LinalgError::Dimension(format!(
            "rhs has {} entries for {} rows",
            b.len(),
            a.rows
        )));
    }
    let n = a.cols;
    if a.rows >= n {
        let qr = Qr::new(a)?;
        if qr.is_rank_deficient() {
            return Err(LinalgError::RankDeficient);
        }
        let mut y = b.to_vec();
        qr.apply_qt(&mut y);
        let mut x = vec![T::zero(); n];
        for i in (0..n).rev() {
            let s: T = (i + 1..n).map(|j| qr.r[(i, j)] * x[j]).sum();
            x[i] = (y[i] - s) / qr.r[(i, i)];
        }
        Ok(x)
    } else {
        // A^T = Q R, so A = R^T Q^T and x = Q [R^-T b; 0].
        let m = a.rows;
        let qr = Qr::new(&a.transpose())?;
        if qr.is_rank_deficient() {
            return Err(LinalgError::RankDeficient);
        }
        let mut z = vec![T::zero(); n];
        for i in 0..m {
            let s: T = (0..i).map(|j| qr.r[(j, i)] * z[j]).sum();
            z[i] = (b[i] - s) / qr.r[(i, i)];
        }
        qr.apply_q(&mut z);
        Ok(z)
    }
}

/// Solves `M x = b` for symmetric positive definite `M`.
pub fn cholesky_solve<T: Scalar>(m: &Matrix<T>, b: &[T]) -> Result<Vec<T>, LinalgError> {
    let n = m.rows;
    if m.cols != n || b.len() != n {
        return Err(LinalgError::Dimension("cholesky needs a square system".into()));
    }
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let d = m[(j, j)] - (0..j).map(|k| l[(j, k)] * l[(j, k)]).sum::<T>();
        if !(d > T::zero()) {
            return Err(LinalgError::NotPositiveDefinite);
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let s: T = (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum();
            l[(i, j)] = (m[(i, j)] - s) / d;
        }
    }
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let s: T = (0..i).map(|k| l[(i, k)] * y[k]).sum();
        y[i] = (b[i] - s) / l[(i, i)];
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let s: T = (i + 1..n).map(|k| l[(k, i)] * x[k]).sum();
        x[i] = (y[i] - s) / l[(i, i)];
    }
    Ok(x)
}

/// Ridge solution `(A^T A + lambda I)^-1 A^T b`.
pub fn ridge_solve<T: Scalar>(a: &Matrix<T>, b: &[T], lambda: T) -> Result<Vec<T>, LinalgError> {
    if b.len() != a.rows {
        return Err(LinalgError::Dimension("rhs length".into()));
    }
    let at = a.transpose();
    let mut ata = at.matmul(a);
    for i in 0..ata.rows {
        ata[(i, i)] += lambda;
    }
    cholesky_solve(&ata, &at.matvec(b))
}

/// Haar-distributed orthogonal matrix from the QR of a Gaussian matrix.
pub fn random_orthogonal<T: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Matrix<T> {
    loop {
        let g = Matrix::from_fn(n, n, |_, _| T::of(rng.sample::<f64, _>(StandardNormal)));
        let qr = Qr::new(&g).expect("square");
        if qr.is_rank_deficient() {
            continue;
        }
        let mut q = qr.q();
        // Fix column signs so the factorization is unique.
        for (c, d) in qr.r_diag().into_iter().enumerate() {
            if d < T::zero() {
                for r in 0..n {
                    q[(r, c)] = -q[(r, c)];
                }
            }
        }
        return q;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn overdetermined_matches_normal_equations() {
        let a = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0], vec![1.0, 3.0]]).unwrap();
        let b = [1.0, 3.0, 4.0, 8.0];
        let x: Vec<f64> = lstsq(&a, &b).unwrap();
        // closed-form line fit
        assert!((x[0] - 0.7).abs() < 1e-12);
        assert!((x[1] - 2.2).abs() < 1e-12);
        let r: Vec<f64> = ridge_solve(&a, &b, 0.0).unwrap();
        assert!((r[0] - x[0]).abs() < 1e-10 && (r[1] - x[1]).abs() < 1e-10);
    }

    #[test]
    fn underdetermined_min_norm() {
        let a = Matrix::from_rows(&[vec![1.0, 1.0, 0.0]]).unwrap();
        let x: Vec<f64> = lstsq(&a, &[2.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 1.0).abs() < 1e-12);
        assert!(x[2].abs() < 1e-12);
    }

    #[test]
    fn rank_deficiency_detected() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]]).unwrap();
        assert_eq!(lstsq(&a, &[1.0, 2.0, 3.0]), Err(LinalgError::RankDeficient));
        assert!(ridge_solve(&a, &[1.0, 2.0, 3.0], 1e-8).is_ok());
    }

    #[test]
    fn orthogonal_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [1, 2, 5, 20] {
            let q: Matrix<f64> = random_orthogonal(n, &mut rng);
            let p = q.transpose().matmul(&q);
            for i in 0..n {
                for j in 0..n {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((p[(i, j)] - e).abs() < 1e-12);
                }
            }
        }
    }
}
