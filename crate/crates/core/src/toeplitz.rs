//! Toeplitz operators `T_f = P f P` on a computed quantum space, their norms
//! and the defects of the semiclassical composition laws.

use std::io::Write;

use sha2::{Digest, Sha256};

use crate::bergman::GridKernel;
use crate::eigensolve::SpectralSubspace;
use crate::error::{Error, Result};
use crate::linalg::{thin_qr, DenseMatrix};
use crate::scalar::{cx, czero, Cx, Real};
use crate::symbol::{Point, Symbol};

pub use crate::linalg::op_norm;

/// Largest exponent accepted in a weight `e^{α d}`.
pub const WEIGHT_EXPONENT_CAP: f64 = 700.0;
/// Smallest projector diagonal accepted by [`symbol_recover`].
pub const DIAGONAL_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct ToeplitzMatrix<T: Real> {
    /// Coefficients in the basis of the subspace.
    pub matrix: DenseMatrix<T>,
    pub symbol_id: String,
    pub p: u32,
    /// Hash of the subspace the matrix was compressed to.
    pub provenance: String,
}

impl<T: Real> ToeplitzMatrix<T> {
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn norm(&self) -> T {
        op_norm(&self.matrix)
    }

    /// CSV with columns `row,col,re,im`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "row,col,re,im")?;
        for i in 0..self.matrix.rows() {
            for j in 0..self.matrix.cols() {
                let v = self.matrix[(i, j)];
                writeln!(out, "{i},{j},{:.17e},{:.17e}", v.re.as_f64(), v.im.as_f64())?;
            }
        }
        Ok(())
    }
}

/// Short content hash of a subspace (dimensions, eigenvalues, basis bits).
pub fn subspace_hash<T: Real>(s: &SpectralSubspace<T>) -> String {
    let mut h = Sha256::new();
    h.update((s.n() as u64).to_le_bytes());
    h.update((s.dim() as u64).to_le_bytes());
    for v in &s.eigenvalues {
        h.update(v.as_f64().to_le_bytes());
    }
    for v in s.basis.as_slice() {
        h.update(v.re.as_f64().to_le_bytes());
        h.update(v.im.as_f64().to_le_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

/// Applies pointwise multiplication by `f` to the columns of the basis. The
/// basis rows are laid out component-major over `points`; a scalar symbol
/// acts diagonally on every component.
fn multiply_basis<T: Real>(s: &SpectralSubspace<T>, points: &[Point<T>], f: &Symbol<T>) -> Result<DenseMatrix<T>> {
    let nodes = points.len();
    if nodes == 0 || s.n() % nodes != 0 {
        return Err(Error::DimensionMismatch { expected: nodes, got: s.n() });
    }
    let r = s.n() / nodes;
    if !f.is_scalar() && f.rank() != r {
        return Err(Error::RankMismatch { symbol: f.rank(), bundle: r });
    }
    let d = s.dim();
    let mut out = DenseMatrix::zeros(s.n(), d);
    for (x, &pt) in points.iter().enumerate() {
        let vals = f.eval(pt);
        for c in 0..r {
            let row = c * nodes + x;
            if f.is_scalar() {
                for k in 0..d {
                    out[(row, k)] = vals[0] * s.basis[(row, k)];
                }
            } else {
                for c2 in 0..r {
                    let fc = vals[c * r + c2];
                    if fc == czero() {
                        continue;
                    }
                    let src = c2 * nodes + x;
                    for k in 0..d {
                        out[(row, k)] += fc * s.basis[(src, k)];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `T = V* F V` in the weighted product, for a basis sampled at `points`.
pub fn toeplitz_assemble<T: Real>(
    s: &SpectralSubspace<T>,
    points: &[Point<T>],
    f: &Symbol<T>,
    p: u32,
) -> Result<ToeplitzMatrix<T>> {
    let fv = multiply_basis(s, points, f)?;
    let matrix = s.basis.adjoint_matmul(&fv).scale(cx(s.cell_volume, T::zero()));
    Ok(ToeplitzMatrix { matrix, symbol_id: f.id().to_string(), p, provenance: subspace_hash(s) })
}

/// Distances `d(x_i, y)` for every row of a component-major basis.
pub fn row_distances<T: Real>(node_distances: &[T], rank: usize) -> Vec<T> {
    (0..rank).flat_map(|_| node_distances.iter().copied()).collect()
}

fn weights<T: Real>(distances: &[T], alpha: T) -> Result<Vec<T>> {
    let worst = distances.iter().fold(T::zero(), |m, &d| m.max((alpha * d).abs()));
    if worst.as_f64() > WEIGHT_EXPONENT_CAP {
        return Err(Error::WeightOverflow { exponent: worst.as_f64() });
    }
    Ok(distances.iter().map(|&d| (alpha * d).exp()).collect())
}

/// `‖D A D⁻¹‖` for `A = V C V*` (weighted-orthonormal `V`), `D = diag(e^{α d_i})`.
///
/// With `V_e = √w V`, `D A D⁻¹ = (D V_e) C (D⁻¹ V_e)*`; after thin QR of both
/// outer factors only the small core `R_X C R_Y*` remains.
pub fn weighted_norm_factored<T: Real>(s: &SpectralSubspace<T>, core: &DenseMatrix<T>, distances: &[T], alpha: T) -> Result<T> {
    if distances.len() != s.n() {
        return Err(Error::DimensionMismatch { expected: s.n(), got: distances.len() });
    }
    let w = weights(distances, alpha)?;
    let sw = s.cell_volume.sqrt();
    let x = DenseMatrix::from_fn(s.n(), s.dim(), |i, k| s.basis[(i, k)] * (w[i] * sw));
    let y = DenseMatrix::from_fn(s.n(), s.dim(), |i, k| s.basis[(i, k)] * (sw / w[i]));
    let (_, rx) = thin_qr(&x);
    let (_, ry) = thin_qr(&y);
    Ok(op_norm(&rx.matmul(core).matmul(&ry.adjoint())))
}

/// `‖D A D⁻¹‖` for an explicit matrix acting on Euclidean coefficient vectors.
pub fn weighted_norm_dense<T: Real>(a: &DenseMatrix<T>, distances: &[T], alpha: T) -> Result<T> {
    if distances.len() != a.rows() || !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.rows(), got: distances.len() });
    }
    let w = weights(distances, alpha)?;
    Ok(op_norm(&DenseMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)] * (w[i] / w[j]))))
}

/// `max(sup_x h²Σ|K(x,·)|, sup_x' h²Σ|K(·,x')|)`, an upper bound for the
/// operator norm.
pub fn schur_bound<T: Real, K: GridKernel<T>>(kernel: &K) -> T {
    use rayon::prelude::*;
    let n = kernel.n();
    let w = kernel.cell_volume();
    const CHUNK: usize = 128;
    let mut cols = vec![T::zero(); n];
    let mut best_row = T::zero();
    for start in (0..n).step_by(CHUNK) {
        let rows: Vec<Vec<T>> = (start..(start + CHUNK).min(n))
            .into_par_iter()
            .map(|i| kernel.row(i).iter().map(|v| v.norm()).collect())
            .collect();
        for r in rows {
            best_row = best_row.max(r.iter().copied().sum::<T>() * w);
            cols.iter_mut().zip(&r).for_each(|(c, &v)| *c += v);
        }
    }
    cols.into_iter().fold(best_row, |m, c| m.max(c * w))
}

/// `‖T_f T_g − T_{fg}‖`
pub fn product_defect<T: Real>(s: &SpectralSubspace<T>, points: &[Point<T>], f: &Symbol<T>, g: &Symbol<T>, p: u32) -> Result<T> {
    let tf = toeplitz_assemble(s, points, f, p)?;
    let tg = toeplitz_assemble(s, points, g, p)?;
    let tfg = toeplitz_assemble(s, points, &f.mul(g), p)?;
    Ok(op_norm(&tf.matrix.matmul(&tg.matrix).sub(&tfg.matrix)))
}

/// `‖[T_f, T_g] − i p⁻¹ T_{bracket}‖`
pub fn commutator_defect<T: Real>(
    s: &SpectralSubspace<T>,
    points: &[Point<T>],
    f: &Symbol<T>,
    g: &Symbol<T>,
    bracket: &Symbol<T>,
    p: u32,
) -> Result<T> {
    let tf = toeplitz_assemble(s, points, f, p)?.matrix;
    let tg = toeplitz_assemble(s, points, g, p)?.matrix;
    let tb = toeplitz_assemble(s, points, bracket, p)?.matrix;
    let comm = tf.matmul(&tg).sub(&tg.matmul(&tf));
    let ip = cx(T::zero(), T::one() / T::from_usize_lossy(p as usize));
    Ok(op_norm(&comm.sub(&tb.scale(ip))))
}

/// Leading-symbol estimate `K_T(x,x) / K_P(x,x)` at every basis row.
pub fn symbol_recover<T: Real>(t: &ToeplitzMatrix<T>, s: &SpectralSubspace<T>) -> Result<Vec<Cx<T>>> {
    if t.dim() != s.dim() {
        return Err(Error::DimensionMismatch { expected: s.dim(), got: t.dim() });
    }
    let vt = s.basis.matmul(&t.matrix);
    (0..s.n())
        .map(|x| {
            let row = s.basis.row(x);
            let kp: T = row.iter().map(|v| v.norm_sqr()).sum();
            if kp.as_f64() < DIAGONAL_FLOOR {
                return Err(Error::DegenerateDiagonal { node: x, value: kp.as_f64() });
            }
            let kt = vt.row(x).iter().zip(row).fold(czero(), |acc, (&a, &b)| acc + a * b.conj());
            Ok(kt / kp)
        })
        .collect()
}

/// `max_{α, y} ‖D_{α,y} p^{K+1}(T_p − Σ_l p^{-l} T_{g_l}) D_{α,y}⁻¹‖` with
/// `K + 1 = g.len()`; `distances[y]` holds the row distances to each `y`.
pub fn series_defect<T: Real>(
    s: &SpectralSubspace<T>,
    points: &[Point<T>],
    t_p: &DenseMatrix<T>,
    g: &[Symbol<T>],
    p: u32,
    alphas: &[T],
    distances: &[Vec<T>],
) -> Result<T> {
    let pt = T::from_usize_lossy(p as usize);
    let mut core = t_p.clone();
    for (l, gl) in g.iter().enumerate() {
        let tl = toeplitz_assemble(s, points, gl, p)?.matrix;
        core = core.sub(&tl.scale(cx(pt.powi(-(l as i32)), T::zero())));
    }
    let core = core.scale(cx(pt.powi(g.len() as i32), T::zero()));
    let mut worst = T::zero();
    for dy in distances {
        for &a in alphas {
            worst = worst.max(weighted_norm_factored(s, &core, dy, a)?);
        }
    }
    Ok(worst)
}
