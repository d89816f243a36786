//! Symmetric tridiagonal eigenproblem by implicit-shift QL.

use crate::error::{Error, Result};
use crate::scalar::Real;

const MAX_SWEEPS: usize = 60;

#[derive(Clone, Debug)]
pub struct TridiagEigen<T: Real> {
    /// Ascending eigenvalues.
    pub values: Vec<T>,
    /// Row-major `rows × n` block of the eigenvector matrix: the rows of the
    /// identity selected by the caller, transformed. Column `j` belongs to
    /// `values[j]`.
    pub vectors: Vec<T>,
    pub rows: usize,
}

impl<T: Real> TridiagEigen<T> {
    #[inline]
    pub fn component(&self, row: usize, col: usize) -> T {
        self.vectors[row * self.values.len() + col]
    }
}

/// Eigen-decomposition of the real symmetric tridiagonal matrix with
/// diagonal `diag` and off-diagonal `off` (`off[i]` couples `i` and `i+1`).
///
/// `rows` selects which rows of the eigenvector matrix are accumulated:
/// `None` gives all of them, `Some(&[n-1])` gives only the last components
/// (what Lanczos needs for residual estimates) at `O(n^2)` total cost.
pub fn tridiagonal_eigen<T: Real>(diag: &[T], off: &[T], rows: Option<&[usize]>) -> Result<TridiagEigen<T>> {
    let n = diag.len();
    assert!(off.len() + 1 >= n, "off-diagonal length");
    let mut d = diag.to_vec();
    let mut e = vec![T::zero(); n];
    e[..n.saturating_sub(1)].copy_from_slice(&off[..n.saturating_sub(1)]);

    let selected: Vec<usize> = match rows {
        Some(r) => r.to_vec(),
        None => (0..n).collect(),
    };
    let zr = selected.len();
    let mut z = vec![T::zero(); zr * n];
    for (r, &row) in selected.iter().enumerate() {
        z[r * n + row] = T::one();
    }

    let two = T::lit(2.0);
    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= T::epsilon() * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_SWEEPS {
                return Err(Error::NotConverged(format!("tridiagonal QL: index {l} after {MAX_SWEEPS} sweeps")));
            }
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for row in 0..zr {
                    let base = row * n;
                    let zf = z[base + i + 1];
                    let zi = z[base + i];
                    z[base + i + 1] = s * zi + c * zf;
                    z[base + i] = c * zi - s * zf;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&k| d[k]).collect();
    let mut vectors = vec![T::zero(); zr * n];
    for row in 0..zr {
        for (new, &old) in order.iter().enumerate() {
            vectors[row * n + new] = z[row * n + old];
        }
    }
    Ok(TridiagEigen { values, vectors, rows: zr })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_graph_laplacian_spectrum() {
        // Dirichlet second difference: eigenvalues 2 - 2cos(kπ/(n+1))
        let n = 12;
        let d = vec![2.0f64; n];
        let e = vec![-1.0f64; n - 1];
        let eig = tridiagonal_eigen(&d, &e, None).unwrap();
        for (k, &lam) in eig.values.iter().enumerate() {
            let exact = 2.0 - 2.0 * (std::f64::consts::PI * (k + 1) as f64 / (n + 1) as f64).cos();
            assert!((lam - exact).abs() < 1e-13, "{k}: {lam} vs {exact}");
        }
        // eigenvector check
        for j in 0..n {
            for i in 0..n {
                let mut tv = d[i] * eig.component(i, j);
                if i > 0 {
                    tv += e[i - 1] * eig.component(i - 1, j);
                }
                if i + 1 < n {
                    tv += e[i] * eig.component(i + 1, j);
                }
                assert!((tv - eig.values[j] * eig.component(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn last_row_only_matches_full() {
        let d = [4.0f64, 1.0, -2.0, 3.5, 0.25];
        let e = [0.5, -1.0, 2.0, 0.1];
        let full = tridiagonal_eigen(&d, &e, None).unwrap();
        let last = tridiagonal_eigen(&d, &e, Some(&[4])).unwrap();
        for j in 0..5 {
            assert!((full.component(4, j).abs() - last.component(0, j).abs()).abs() < 1e-13);
        }
    }

    #[test]
    fn single_element() {
        let eig = tridiagonal_eigen(&[3.0f32], &[], None).unwrap();
        assert_eq!(eig.values, vec![3.0]);
    }
}
