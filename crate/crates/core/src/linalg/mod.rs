//! Small dense complex linear algebra used by the eigensolvers and the
//! Toeplitz layer. Matrices here are at most a few thousand on a side.

mod hermitian;
mod tridiag;

pub use hermitian::{dense_eig, HermitianEigen, DENSE_EIG_CAP};
pub use tridiag::{tridiagonal_eigen, TridiagEigen};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::{czero, Cx, Real};

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T: Real> {
    rows: usize,
    cols: usize,
    data: Vec<Cx<T>>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![czero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Cx::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Cx<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Cx<T>>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major buffer size");
        Self { rows, cols, data }
    }

    pub fn from_diagonal(diag: &[Cx<T>]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(rows: usize, columns: &[Vec<Cx<T>>]) -> Self {
        let mut m = Self::zeros(rows, columns.len());
        for (j, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), rows);
            for i in 0..rows {
                m[(i, j)] = col[i];
            }
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Cx<T>] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Cx<T>] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Cx<T>> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, col: &[Cx<T>]) {
        for (i, &v) in col.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: Cx<T>) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| v * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self^* · other` without forming the adjoint.
    pub fn adjoint_matmul(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows, "row dimensions");
        let mut out = Self::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let a_row = self.row(k);
            let b_row = other.row(k);
            for (i, &a) in a_row.iter().enumerate() {
                let ac = a.conj();
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += ac * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[Cx<T>]) -> Vec<Cx<T>> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).fold(czero(), |acc, (&a, &b)| acc + a * b))
            .collect()
    }

    pub fn adjoint_matvec(&self, x: &[Cx<T>]) -> Vec<Cx<T>> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![czero(); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a.conj() * xi;
            }
        }
        out
    }

    pub fn trace(&self) -> Cx<T> {
        (0..self.rows.min(self.cols)).fold(czero(), |acc, i| acc + self[(i, i)])
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|v| v.norm_sqr()).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().map(|v| v.norm()).fold(T::zero(), T::max)
    }

    /// Largest entrywise deviation from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> T {
        assert!(self.is_square());
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in 0..=i {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Replaces the matrix with its Hermitian part `(A + A^*)/2`.
    pub fn symmetrize(&mut self) {
        let half = T::lit(0.5);
        for i in 0..self.rows {
            for j in 0..i {
                let avg = (self[(i, j)] + self[(j, i)].conj()) * half;
                self[(i, j)] = avg;
                self[(j, i)] = avg.conj();
            }
            let d = self[(i, i)].re;
            self[(i, i)] = Cx::new(d, T::zero());
        }
    }

    pub fn map<U: Real>(&self, f: impl Fn(Cx<T>) -> Cx<U>) -> DenseMatrix<U> {
        DenseMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }
}

impl<T: Real> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = Cx<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Cx<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T: Real> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Cx<T> {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Real>(a: &[Cx<T>], b: &[Cx<T>]) -> Cx<T> {
    // conjugate-linear in the first argument
    a.iter().zip(b).fold(czero(), |acc, (&x, &y)| acc + x.conj() * y)
}

#[inline]
pub fn norm<T: Real>(a: &[Cx<T>]) -> T {
    a.iter().map(|v| v.norm_sqr()).sum::<T>().sqrt()
}

#[inline]
pub fn axpy<T: Real>(alpha: Cx<T>, x: &[Cx<T>], y: &mut [Cx<T>]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Thin QR by classical Gram-Schmidt with one reorthogonalization pass.
/// Returns `(Q, R)` with `Q` of size rows×cols and `R` upper triangular.
/// Rank-deficient columns produce zero columns in `Q` and zero diagonal in `R`.
pub fn thin_qr<T: Real>(a: &DenseMatrix<T>) -> (DenseMatrix<T>, DenseMatrix<T>) {
    let (n, k) = (a.rows(), a.cols());
    let mut q_cols: Vec<Vec<Cx<T>>> = Vec::with_capacity(k);
    let mut r = DenseMatrix::zeros(k, k);
    let scale = a.max_abs().max(T::min_positive_value());
    for j in 0..k {
        let mut v = a.column(j);
        for _pass in 0..2 {
            for (i, qi) in q_cols.iter().enumerate() {
                let c = dot(qi, &v);
                r[(i, j)] += c;
                axpy(-c, qi, &mut v);
            }
        }
        let nv = norm(&v);
        if nv <= T::epsilon() * scale * T::from_usize_lossy(n.max(1)) {
            r[(j, j)] = czero();
            q_cols.push(vec![czero(); n]);
        } else {
            r[(j, j)] = Cx::new(nv, T::zero());
            let inv = T::one() / nv;
            v.iter_mut().for_each(|x| *x = *x * inv);
            q_cols.push(v);
        }
    }
    (DenseMatrix::from_columns(n, &q_cols), r)
}

const POWER_MAX_ITERS: usize = 500;

/// Spectral norm (largest singular value).
///
/// Power iteration on `A^*A` from a fixed pseudo-random start, stopping when
/// the Rayleigh quotient changes by at most `1e-10` relative and the
/// eigen-residual is small. If the top singular values are too clustered for
/// that within the iteration budget, falls back to a dense Hermitian
/// eigendecomposition of `A^*A`.
pub fn op_norm<T: Real>(a: &DenseMatrix<T>) -> T {
    let k = a.cols();
    if k == 0 || a.rows() == 0 {
        return T::zero();
    }
    let scale = a.max_abs();
    if scale == T::zero() {
        return T::zero();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f_0b_5e55);
    let mut v: Vec<Cx<T>> = (0..k)
        .map(|_| Cx::new(T::lit(rng.gen_range(-1.0..1.0)), T::lit(rng.gen_range(-1.0..1.0))))
        .collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x = *x / nv);
    let tol = T::lit(1e-10);
    let mut lambda = T::zero();
    for _ in 0..POWER_MAX_ITERS {
        let w = a.adjoint_matvec(&a.matvec(&v));
        let new_lambda = dot(&v, &w).re;
        let nw = norm(&w);
        if nw == T::zero() {
            break;
        }
        let resid: T = w
            .iter()
            .zip(&v)
            .map(|(&wi, &vi)| (wi - vi * new_lambda).norm_sqr())
            .sum::<T>()
            .sqrt();
        let converged = (new_lambda - lambda).abs() <= tol * new_lambda.abs()
            && resid <= T::lit(1e-6) * new_lambda.abs();
        lambda = new_lambda;
        v = w.iter().map(|&x| x / nw).collect();
        if converged {
            return lambda.max(T::zero()).sqrt();
        }
    }
    let gram = a.adjoint_matmul(a);
    match dense_eig(&gram) {
        Ok(eig) => eig.values.last().copied().unwrap_or(T::zero()).max(T::zero()).sqrt(),
        Err(_) => lambda.max(T::zero()).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;

    #[test]
    fn qr_reconstructs() {
        let a = DenseMatrix::<f64>::from_fn(6, 3, |i, j| cx(((i * 3 + j) as f64).cos() + 1.0 / (1.0 + (i + j) as f64), (j * j) as f64 - i as f64 * 0.3));
        let (q, r) = thin_qr(&a);
        let back = q.matmul(&r);
        assert!(back.sub(&a).max_abs() < 1e-13);
        let qtq = q.adjoint_matmul(&q);
        assert!(qtq.sub(&DenseMatrix::identity(3)).max_abs() < 1e-13);
    }

    #[test]
    fn op_norm_identity_and_rank_one() {
        assert!((op_norm(&DenseMatrix::<f64>::identity(7)) - 1.0).abs() < 1e-12);
        let u: Vec<Cx<f64>> = (0..5).map(|i| cx(i as f64 + 1.0, 0.5)).collect();
        let v: Vec<Cx<f64>> = (0..4).map(|i| cx(1.0, -(i as f64))).collect();
        let m = DenseMatrix::from_fn(5, 4, |i, j| u[i] * v[j]);
        assert!((op_norm(&m) - norm(&u) * norm(&v)).abs() < 1e-9);
    }

    #[test]
    fn op_norm_degenerate_top_uses_fallback() {
        // unitary-like: all singular values equal
        let m = DenseMatrix::<f64>::from_fn(4, 4, |i, j| if (i + 1) % 4 == j { cx(0.0, 2.0) } else { cx(0.0, 0.0) });
        assert!((op_norm(&m) - 2.0).abs() < 1e-10);
    }

    #[test]
    fn op_norm_in_f32() {
        let m = DenseMatrix::<f32>::from_diagonal(&[cx(1.0, 0.0), cx(-3.0, 0.0), cx(0.0, 2.0)]);
        assert!((op_norm(&m) - 3.0).abs() < 1e-4);
    }
}
