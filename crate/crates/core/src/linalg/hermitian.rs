//! Dense Hermitian eigensolver: Householder reduction to real symmetric
//! tridiagonal form followed by implicit-shift QL.

use super::tridiag::tridiagonal_eigen;
use super::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::{cone, czero, Cx, Real};

/// Size cap for the dense path.
pub const DENSE_EIG_CAP: usize = 4096;

#[derive(Clone, Debug)]
pub struct HermitianEigen<T: Real> {
    /// Ascending eigenvalues.
    pub values: Vec<T>,
    /// Orthonormal eigenvectors as columns, in the order of `values`.
    pub vectors: DenseMatrix<T>,
}

struct Reflector<T: Real> {
    start: usize,
    v: Vec<Cx<T>>,
    tau: T,
}

/// Full eigendecomposition of a Hermitian matrix. Only the lower triangle is
/// read; the upper triangle is assumed to be its conjugate.
pub fn dense_eig<T: Real>(a: &DenseMatrix<T>) -> Result<HermitianEigen<T>> {
    let n = a.rows();
    if !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.rows(), got: a.cols() });
    }
    if n > DENSE_EIG_CAP {
        return Err(Error::TooLarge { n, cap: DENSE_EIG_CAP });
    }
    if n == 0 {
        return Ok(HermitianEigen { values: vec![], vectors: DenseMatrix::zeros(0, 0) });
    }

    // working copy, full Hermitian from the lower triangle
    let mut w = DenseMatrix::from_fn(n, n, |i, j| if i >= j { a[(i, j)] } else { a[(j, i)].conj() });
    let mut reflectors: Vec<Reflector<T>> = Vec::new();
    let two = T::lit(2.0);

    for k in 0..n.saturating_sub(2) {
        let s = k + 1;
        let x: Vec<Cx<T>> = (s..n).map(|i| w[(i, k)]).collect();
        let tail: T = x[1..].iter().map(|v| v.norm_sqr()).sum();
        if tail == T::zero() {
            continue;
        }
        let alpha = (x[0].norm_sqr() + tail).sqrt();
        let phase = if x[0].norm() > T::zero() { x[0] / x[0].norm() } else { cone() };
        let mut v = x;
        v[0] += phase * alpha;
        let vnorm2: T = v.iter().map(|c| c.norm_sqr()).sum();
        let tau = two / vnorm2;

        // column k below the diagonal becomes -phase*alpha e1
        let beta = -(phase * alpha);
        w[(s, k)] = beta;
        w[(k, s)] = beta.conj();
        for i in s + 1..n {
            w[(i, k)] = czero();
            w[(k, i)] = czero();
        }

        // trailing block S <- H S H, H = I - tau v v^*
        let m = n - s;
        let mut p = vec![czero(); m];
        for i in 0..m {
            let mut acc = czero();
            for j in 0..m {
                acc += w[(s + i, s + j)] * v[j];
            }
            p[i] = acc * tau;
        }
        let vp = v.iter().zip(&p).fold(czero(), |acc, (&vi, &pi)| acc + vi.conj() * pi);
        let kfac = vp * (tau / two);
        let q: Vec<Cx<T>> = p.iter().zip(&v).map(|(&pi, &vi)| pi - kfac * vi).collect();
        for i in 0..m {
            for j in 0..m {
                let upd = v[i] * q[j].conj() + q[i] * v[j].conj();
                w[(s + i, s + j)] -= upd;
            }
        }
        reflectors.push(Reflector { start: s, v, tau });
    }

    // Hermitian tridiagonal -> real symmetric via diagonal phases
    let diag: Vec<T> = (0..n).map(|i| w[(i, i)].re).collect();
    let mut off = vec![T::zero(); n.saturating_sub(1)];
    let mut phases = vec![cone::<T>(); n];
    for k in 0..n.saturating_sub(1) {
        let c = w[(k + 1, k)];
        let mag = c.norm();
        off[k] = mag;
        phases[k + 1] = if mag > T::zero() { phases[k] * (c / mag) } else { phases[k] };
    }

    let tri = tridiagonal_eigen(&diag, &off, None)?;

    // eigenvectors: Q · D · Z
    let mut vecs = DenseMatrix::from_fn(n, n, |i, j| phases[i] * Cx::new(tri.component(i, j), T::zero()));
    for refl in reflectors.iter().rev() {
        let s = refl.start;
        for j in 0..n {
            let mut proj = czero();
            for (t, &vt) in refl.v.iter().enumerate() {
                proj += vt.conj() * vecs[(s + t, j)];
            }
            proj = proj * refl.tau;
            for (t, &vt) in refl.v.iter().enumerate() {
                vecs[(s + t, j)] -= vt * proj;
            }
        }
    }

    Ok(HermitianEigen { values: tri.values, vectors: vecs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;

    #[test]
    fn pauli_x() {
        let a = DenseMatrix::<f64>::from_row_major(2, 2, vec![cx(0.0, 0.0), cx(1.0, 0.0), cx(1.0, 0.0), cx(0.0, 0.0)]);
        let eig = dense_eig(&a).unwrap();
        assert!((eig.values[0] + 1.0).abs() < 1e-15);
        assert!((eig.values[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn complex_tridiagonal_input_reconstructs() {
        let n = 9;
        let a = DenseMatrix::<f64>::from_fn(n, n, |i, j| {
            if i == j {
                cx(i as f64 - 3.0, 0.0)
            } else if i == j + 1 {
                cx(0.3 * i as f64, -0.7)
            } else if j == i + 1 {
                cx(0.3 * j as f64, 0.7)
            } else {
                cx(0.0, 0.0)
            }
        });
        let eig = dense_eig(&a).unwrap();
        let lam = DenseMatrix::from_diagonal(&eig.values.iter().map(|&l| cx(l, 0.0)).collect::<Vec<_>>());
        let back = eig.vectors.matmul(&lam).matmul(&eig.vectors.adjoint());
        assert!(back.sub(&a).max_abs() < 1e-12);
    }

    #[test]
    fn rejects_oversized() {
        let a = DenseMatrix::<f64>::zeros(DENSE_EIG_CAP + 1, DENSE_EIG_CAP + 1);
        assert!(matches!(dense_eig(&a), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn f32_small() {
        let a = DenseMatrix::<f32>::from_row_major(2, 2, vec![cx(2.0, 0.0), cx(0.0, 1.0), cx(0.0, -1.0), cx(2.0, 0.0)]);
        let eig = dense_eig(&a).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-5 && (eig.values[1] - 3.0).abs() < 1e-5);
    }
}
