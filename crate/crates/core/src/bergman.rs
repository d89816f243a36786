//! Kernel-level diagnostics: the model Bergman kernel, projector kernels in
//! normal coordinates, the expansion residual, and off-diagonal decay.
//!
//! Kernel convention: a matrix `A` on grid functions represents the integral
//! kernel `K(x_i, x_j) = A_ij / h²`. With a weighted-orthonormal basis `ψ_k`
//! of `H_p` the projector kernel is `Σ_k ψ_k(x) ψ̄_k(x')`.

use std::io::Write;

use rayon::prelude::*;

use crate::eigensolve::SpectralSubspace;
use crate::error::{Error, Result};
use crate::fit::Accumulator;
use crate::fock::FockTruncation;
use crate::geometry::SymplecticModel;
use crate::lattice::LatticeBundle;
use crate::linalg::DenseMatrix;
use crate::scalar::{cis, cx, czero, Cx, Real};
use crate::symbol::Point;

/// Values below this are excluded from decay fits.
pub const NOISE_FLOOR: f64 = 1e-13;

#[derive(Clone, Debug)]
pub struct ModelKernelParams<T> {
    pub a: Vec<T>,
}

impl<T: Real> ModelKernelParams<T> {
    /// `a_j ≥ μ0` is enforced (with a relative slack of `1e-12`).
    pub fn new(a: Vec<T>, mu0: T) -> Result<Self> {
        if a.is_empty() || a.iter().any(|&aj| aj < mu0 * (T::one() - T::lit(1e-12))) {
            return Err(Error::InvalidConfig(format!("model frequencies {a:?} must all be >= mu0 = {mu0}")));
        }
        Ok(Self { a })
    }

    /// Frequencies at `x0`: `a = τ(x0)` in real dimension two.
    pub fn at(model: &SymplecticModel<T>, x0: Point<T>) -> Self {
        Self { a: vec![model.tau(x0)] }
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }
}

/// `(2π)^{-n} Πa_j · exp(−¼ Σ a_k(|z_k|² + |z'_k|² − 2 z_k z̄'_k))`,
/// with `z_k = Z_{2k-1} + i Z_{2k}`.
pub fn model_kernel<T: Real>(params: &ModelKernelParams<T>, z: &[T], zp: &[T]) -> Cx<T> {
    let two_pi = T::PI() + T::PI();
    let mut pref = T::one();
    let mut expo = czero::<T>();
    for (k, &a) in params.a.iter().enumerate() {
        let zk = cx(z[2 * k], z[2 * k + 1]);
        let wk = cx(zp[2 * k], zp[2 * k + 1]);
        pref = pref * a / two_pi;
        let inner = cx(zk.norm_sqr() + wk.norm_sqr(), T::zero()) - zk * wk.conj() * T::lit(2.0);
        expo -= inner * (a / T::lit(4.0));
    }
    expo.exp() * pref
}

/// Polynomial in `(Z1, Z2, Z1', Z2')` as a coefficient table.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly<T> {
    pub terms: Vec<([u32; 4], T)>,
}

impl<T: Real> Poly<T> {
    pub fn one() -> Self {
        Self { terms: vec![([0; 4], T::one())] }
    }

    pub fn eval(&self, z: Point<T>, zp: Point<T>) -> T {
        let vars = [z[0], z[1], zp[0], zp[1]];
        self.terms
            .iter()
            .map(|(e, c)| *c * (0..4).map(|i| vars[i].powi(e[i] as i32)).fold(T::one(), |a, b| a * b))
            .sum()
    }
}

/// Kernel values on pairs of offsets from a base point, in the radial
/// trivialization at that point.
#[derive(Clone, Debug)]
pub struct KernelField<T: Real> {
    pub base: Point<T>,
    pub offsets: Vec<Point<T>>,
    /// `values[(a, b)] = K(Z_a, Z_b)`
    pub values: DenseMatrix<T>,
    pub h: T,
    pub p: u32,
    /// Model frequency `τ(x0)`.
    pub a: T,
}

impl<T: Real> KernelField<T> {
    pub fn conjugate_symmetry_defect(&self) -> T {
        self.values.hermitian_defect()
    }

    /// CSV with columns `Z1,Z2,Z1p,Z2p,re,im`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "Z1,Z2,Z1p,Z2p,re,im")?;
        for (a, za) in self.offsets.iter().enumerate() {
            for (b, zb) in self.offsets.iter().enumerate() {
                let v = self.values[(a, b)];
                writeln!(out, "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}", za[0].as_f64(), za[1].as_f64(), zb[0].as_f64(), zb[1].as_f64(), v.re.as_f64(), v.im.as_f64())?;
            }
        }
        Ok(())
    }
}

/// Signed integral of `B` over the triangle `(0,0), (Zx,0), (Zx,Zy)` placed
/// at `x0`; this is the flux between the horizontal-then-vertical path and
/// the straight segment from `x0` to `x0 + Z`.
pub fn triangle_flux<T: Real>(model: &SymplecticModel<T>, x0: Point<T>, z: Point<T>) -> T {
    let (zx, zy) = (z[0], z[1]);
    if zx == T::zero() || zy == T::zero() {
        return T::zero();
    }
    let k = T::PI() + T::PI();
    let c = x0[0];
    // ∫₀^{Zx} s cos(k(c+s)) ds
    let trig = zx * (k * (c + zx)).sin() / k + ((k * (c + zx)).cos() - (k * c).cos()) / (k * k);
    zy / zx * (model.b0() * zx * zx / T::lit(2.0) + model.b1() * trig)
}

/// Lattice transport phase `Σθ` from node `(i0, j0)` along `+x`/`−x` steps
/// first, then `+y`/`−y` steps.
pub fn grid_path_phase<T: Real>(bundle: &LatticeBundle<T>, i0: usize, j0: usize, di: i64, dj: i64) -> T {
    let m = bundle.m() as i64;
    let wrap = |v: i64| v.rem_euclid(m) as usize;
    let mut phase = T::zero();
    let (mut i, mut j) = (i0 as i64, j0 as i64);
    for _ in 0..di.abs() {
        if di > 0 {
            phase += bundle.theta_x(wrap(i), wrap(j));
            i += 1;
        } else {
            phase -= bundle.theta_x(wrap(i - 1), wrap(j));
            i -= 1;
        }
    }
    for _ in 0..dj.abs() {
        if dj > 0 {
            phase += bundle.theta_y(wrap(i), wrap(j));
            j += 1;
        } else {
            phase -= bundle.theta_y(wrap(i), wrap(j - 1));
            j -= 1;
        }
    }
    phase
}

/// Projector kernel around grid node `x0` on all offsets with `|Z| ≤ radius`,
/// in the radial trivialization: grid transport plus the exact triangle-flux
/// correction.
pub fn projector_kernel<T: Real>(
    s: &SpectralSubspace<T>,
    bundle: &LatticeBundle<T>,
    model: &SymplecticModel<T>,
    x0: usize,
    radius: T,
) -> Result<KernelField<T>> {
    let limit = model.injectivity_radius();
    if radius > limit {
        return Err(Error::RadiusTooLarge { radius: radius.as_f64(), limit: limit.as_f64() });
    }
    if s.n() != bundle.nodes() {
        return Err(Error::DimensionMismatch { expected: bundle.nodes(), got: s.n() });
    }
    let m = bundle.m();
    let h = bundle.h();
    let (i0, j0) = (x0 % m, x0 / m);
    let base = bundle.point(x0);
    let reach = (radius / h).floor().to_i64().unwrap_or(0);
    let pt = T::from_usize_lossy(bundle.p() as usize);
    let mut offsets = Vec::new();
    let mut rows = Vec::new();
    let mut gauge = Vec::new();
    for dj in -reach..=reach {
        for di in -reach..=reach {
            let z = [T::lit(di as f64) * h, T::lit(dj as f64) * h];
            if (z[0] * z[0] + z[1] * z[1]).sqrt() > radius {
                continue;
            }
            let node = bundle.node((i0 as i64 + di).rem_euclid(m as i64) as usize, (j0 as i64 + dj).rem_euclid(m as i64) as usize);
            let phase = grid_path_phase(bundle, i0, j0, di, dj) + pt * triangle_flux(model, base, z);
            offsets.push(z);
            rows.push(node);
            gauge.push(cis(phase));
        }
    }
    let d = s.dim();
    let w = DenseMatrix::from_fn(rows.len(), d, |a, k| s.basis[(rows[a], k)] * gauge[a]);
    let values = w.matmul(&w.adjoint());
    Ok(KernelField { base, offsets, values, h, p: bundle.p(), a: model.tau(base) })
}

/// Plane kernel from the truncated Fock series (an independent route to the
/// closed form), on a square lattice of offsets of spacing `h`.
pub fn fock_kernel_field<T: Real>(t: &FockTruncation<T>, radius: T, h: T) -> Result<KernelField<T>> {
    let reach = (radius / h).floor().to_i64().unwrap_or(0);
    let mut offsets = Vec::new();
    for dj in -reach..=reach {
        for di in -reach..=reach {
            let z = [T::lit(di as f64) * h, T::lit(dj as f64) * h];
            if (z[0] * z[0] + z[1] * z[1]).sqrt() <= radius {
                offsets.push(z);
            }
        }
    }
    let k = offsets.len();
    let mut values = DenseMatrix::zeros(k, k);
    for a in 0..k {
        for b in 0..k {
            let za = cx(offsets[a][0], offsets[a][1]);
            let zb = cx(offsets[b][0], offsets[b][1]);
            values[(a, b)] = t.bergman_series(za, zb)?;
        }
    }
    Ok(KernelField { base: [T::zero(), T::zero()], offsets, values, h, p: t.p, a: t.b0 })
}

#[derive(Clone, Copy, Debug)]
pub struct ResidualOptions<T> {
    /// Order `k` of the expansion (uses `Q_0..=Q_k`).
    pub order: usize,
    pub c0: T,
    pub m_growth: i32,
    /// Sample only `|Z|, |Z'| ≤ window`.
    pub window: T,
}

impl<T: Real> ResidualOptions<T> {
    /// `C0 = 0.2√μ0`, `M = 4`, window `4/√(pμ0)`.
    pub fn defaults(p: u32, mu0: T) -> Self {
        let pt = T::from_usize_lossy(p as usize);
        Self { order: 0, c0: T::lit(0.2) * mu0.sqrt(), m_growth: 4, window: T::lit(4.0) / (pt * mu0).sqrt() }
    }
}

fn residual_impl<T: Real>(k: &KernelField<T>, q: &[Poly<T>], opts: &ResidualOptions<T>, diagonal_only: bool) -> T {
    let pt = T::from_usize_lossy(k.p as usize);
    let sp = pt.sqrt();
    let params = ModelKernelParams { a: vec![k.a] };
    let norm = |z: &Point<T>| (z[0] * z[0] + z[1] * z[1]).sqrt();
    let inside: Vec<usize> = (0..k.offsets.len()).filter(|&a| norm(&k.offsets[a]) <= opts.window).collect();
    let mut sup = T::zero();
    for &a in &inside {
        for &b in &inside {
            if diagonal_only && a != b {
                continue;
            }
            let (za, zb) = (k.offsets[a], k.offsets[b]);
            let sa = [za[0] * sp, za[1] * sp];
            let sb = [zb[0] * sp, zb[1] * sp];
            let pm = model_kernel(&params, &sa, &sb);
            let mut approx = czero();
            for (r, qr) in q.iter().take(opts.order + 1).enumerate() {
                approx += pm * (qr.eval(sa, sb) / sp.powi(r as i32));
            }
            let diff = (k.values[(a, b)] / pt - approx).norm();
            let dz = [za[0] - zb[0], za[1] - zb[1]];
            let weight = (T::one() + sp * norm(&za) + sp * norm(&zb)).powi(opts.m_growth)
                * (-opts.c0 * sp * norm(&dz)).exp();
            sup = sup.max(diff / weight);
        }
    }
    sup
}

/// Weighted sup of `|p⁻¹K̃ − Σ_r (Q_r P)(√pZ, √pZ') p^{-r/2}|` over sampled
/// pairs, divided by `(1+√p|Z|+√p|Z'|)^M e^{−C0√p|Z−Z'|}` (flat `κ ≡ 1`).
pub fn expansion_residual<T: Real>(k: &KernelField<T>, q: &[Poly<T>], opts: &ResidualOptions<T>) -> T {
    residual_impl(k, q, opts, false)
}

/// The same residual restricted to `Z = Z'`.
pub fn diagonal_residual<T: Real>(k: &KernelField<T>, q: &[Poly<T>], opts: &ResidualOptions<T>) -> T {
    residual_impl(k, q, opts, true)
}

/// `M×M` periodic grid geometry on the unit torus.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TorusGrid {
    pub m: usize,
}

impl TorusGrid {
    pub fn nodes(&self) -> usize {
        self.m * self.m
    }

    /// Minimal-image integer offset from node `a` to node `b`.
    pub fn offset(&self, a: usize, b: usize) -> (i64, i64) {
        let m = self.m as i64;
        let half = |v: i64| {
            let v = v.rem_euclid(m);
            if v > m / 2 {
                v - m
            } else {
                v
            }
        };
        let (ia, ja) = ((a % self.m) as i64, (a / self.m) as i64);
        let (ib, jb) = ((b % self.m) as i64, (b / self.m) as i64);
        (half(ib - ia), half(jb - ja))
    }

    pub fn distance<T: Real>(&self, a: usize, b: usize) -> T {
        let (di, dj) = self.offset(a, b);
        T::lit(((di * di + dj * dj) as f64).sqrt() / self.m as f64)
    }
}

/// An operator on grid functions given row by row through its kernel.
pub trait GridKernel<T: Real>: Sync {
    fn n(&self) -> usize;
    fn cell_volume(&self) -> T;
    /// `K(x_i, ·)`
    fn row(&self, i: usize) -> Vec<Cx<T>>;
    /// `K(x_i, x_i)`
    fn diagonal(&self, i: usize) -> Cx<T> {
        self.row(i)[i]
    }
}

/// `K = V C V*` for a weighted-orthonormal `V` (`C = I` is the projector).
pub struct FactoredKernel<'a, T: Real> {
    pub basis: &'a DenseMatrix<T>,
    pub core: Option<&'a DenseMatrix<T>>,
    pub cell_volume: T,
}

impl<'a, T: Real> FactoredKernel<'a, T> {
    pub fn projector(s: &'a SpectralSubspace<T>) -> Self {
        Self { basis: &s.basis, core: None, cell_volume: s.cell_volume }
    }

    pub fn with_core(s: &'a SpectralSubspace<T>, core: &'a DenseMatrix<T>) -> Self {
        Self { basis: &s.basis, core: Some(core), cell_volume: s.cell_volume }
    }

    fn left(&self, i: usize) -> Vec<Cx<T>> {
        let r = self.basis.row(i);
        match self.core {
            None => r.to_vec(),
            Some(c) => (0..c.cols()).map(|l| r.iter().enumerate().fold(czero(), |acc, (k, &v)| acc + v * c[(k, l)])).collect(),
        }
    }
}

impl<T: Real> GridKernel<T> for FactoredKernel<'_, T> {
    fn n(&self) -> usize {
        self.basis.rows()
    }

    fn cell_volume(&self) -> T {
        self.cell_volume
    }

    fn row(&self, i: usize) -> Vec<Cx<T>> {
        let u = self.left(i);
        (0..self.n()).map(|j| u.iter().zip(self.basis.row(j)).fold(czero(), |acc, (&a, &b)| acc + a * b.conj())).collect()
    }

    fn diagonal(&self, i: usize) -> Cx<T> {
        let u = self.left(i);
        u.iter().zip(self.basis.row(i)).fold(czero(), |acc, (&a, &b)| acc + a * b.conj())
    }
}

/// Explicit `n×n` kernel.
pub struct DenseKernel<T: Real> {
    pub values: DenseMatrix<T>,
    pub cell_volume: T,
}

impl<T: Real> GridKernel<T> for DenseKernel<T> {
    fn n(&self) -> usize {
        self.values.rows()
    }

    fn cell_volume(&self) -> T {
        self.cell_volume
    }

    fn row(&self, i: usize) -> Vec<Cx<T>> {
        self.values.row(i).to_vec()
    }

    fn diagonal(&self, i: usize) -> Cx<T> {
        self.values[(i, i)]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DecayFit {
    pub mu_hat: f64,
    pub c_hat: f64,
    pub r2: f64,
    pub samples: usize,
}

/// Least squares of `log|K(x,x')|` against `−√p·d(x,x')` over all pairs with
/// `eps0 < d ≤ d_max` and `|K| ≥` [`NOISE_FLOOR`].
pub fn decay_fit<T: Real, K: GridKernel<T>>(
    kernel: &K,
    grid: TorusGrid,
    p: u32,
    eps0: T,
    d_max: Option<T>,
) -> Result<DecayFit> {
    if kernel.n() != grid.nodes() {
        return Err(Error::DimensionMismatch { expected: grid.nodes(), got: kernel.n() });
    }
    let sp = (p as f64).sqrt();
    let eps0 = eps0.as_f64();
    let d_max = d_max.map_or(f64::INFINITY, |d| d.as_f64());
    let per_row: Vec<Accumulator> = (0..kernel.n())
        .into_par_iter()
        .map(|i| {
            let row = kernel.row(i);
            let mut acc = Accumulator::default();
            for (j, v) in row.iter().enumerate() {
                let d: f64 = grid.distance(i, j);
                let mag = v.norm().as_f64();
                if d > eps0 && d <= d_max && mag >= NOISE_FLOOR {
                    acc.push(-sp * d, mag.ln());
                }
            }
            acc
        })
        .collect();
    let acc = per_row.into_iter().fold(Accumulator::default(), Accumulator::merge);
    if acc.len() < 3 {
        return Err(Error::InsufficientSamples(acc.len()));
    }
    let fit = acc.fit()?;
    Ok(DecayFit { mu_hat: fit.slope, c_hat: fit.intercept.exp(), r2: fit.r2, samples: fit.samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolve::{lowest_cluster, SolverOptions};
    use crate::lattice::{build_links, renormalized_laplacian};
    use proptest::prelude::*;

    const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

    #[test]
    fn model_kernel_origin() {
        let p = ModelKernelParams::new(vec![TWO_PI], TWO_PI).unwrap();
        assert!((model_kernel(&p, &[0.0, 0.0], &[0.0, 0.0]) - cx(1.0, 0.0)).norm() < 1e-15);
        assert!(ModelKernelParams::new(vec![1.0], 2.0).is_err());
    }

    proptest! {
        #[test]
        fn model_kernel_structure(a in 0.5f64..20.0, z in prop::array::uniform2(-1.0f64..1.0), w in prop::array::uniform2(-1.0f64..1.0)) {
            let p = ModelKernelParams { a: vec![a] };
            let kzw = model_kernel(&p, &z, &w);
            let kwz = model_kernel(&p, &w, &z);
            prop_assert!((kzw - kwz.conj()).norm() < 1e-12 * kzw.norm().max(1e-300));
            let diag = model_kernel(&p, &z, &z);
            prop_assert!((diag.re - a / TWO_PI).abs() < 1e-12 * a && diag.im.abs() < 1e-12 * a);
            let d2 = (z[0] - w[0]).powi(2) + (z[1] - w[1]).powi(2);
            prop_assert!((kzw.norm() - a / TWO_PI * (-a * d2 / 4.0).exp()).abs() < 1e-12 * a);
        }
    }

    #[test]
    fn model_kernel_reproduces() {
        // ∫ P(Z,W) P(W,Z') dW by a tensor grid over |W| ≤ 6/√a
        let a: f64 = 3.0;
        let p = ModelKernelParams { a: vec![a] };
        let r = 6.0 / a.sqrt();
        let n = 240;
        let step = 2.0 * r / n as f64;
        let z = [0.2, -0.1];
        let zp = [-0.3, 0.25];
        let mut acc = cx(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let w = [-r + (i as f64 + 0.5) * step, -r + (j as f64 + 0.5) * step];
                if w[0] * w[0] + w[1] * w[1] <= r * r {
                    acc += model_kernel(&p, &z, &w) * model_kernel(&p, &w, &zp) * (step * step);
                }
            }
        }
        assert!((acc - model_kernel(&p, &z, &zp)).norm() < 1e-6);
    }

    #[test]
    fn triangle_flux_constant_field() {
        let m = SymplecticModel::<f64>::torus(1, 0.0).unwrap();
        let f = triangle_flux(&m, [0.3, 0.1], [0.2, 0.1]);
        assert!((f - TWO_PI * 0.5 * 0.2 * 0.1).abs() < 1e-14);
        let g = triangle_flux(&m, [0.3, 0.1], [-0.2, 0.1]);
        assert!((g + TWO_PI * 0.01).abs() < 1e-14);
    }

    #[test]
    fn triangle_flux_quadrature() {
        let m = SymplecticModel::<f64>::torus(1, 2.5).unwrap();
        let (x0, z) = ([0.37, 0.0], [0.23, -0.17]);
        let n = 4000;
        let mut acc = 0.0;
        for k in 0..n {
            let s = (k as f64 + 0.5) / n as f64 * z[0];
            acc += m.field([x0[0] + s, 0.0]) * (z[1] / z[0]) * s * z[0] / n as f64;
        }
        assert!((triangle_flux(&m, x0, z) - acc).abs() < 1e-6);
    }

    fn solve(n_flux: i64, b1: f64, p: u32, m: usize) -> (SymplecticModel<f64>, LatticeBundle<f64>, SpectralSubspace<f64>) {
        let model = SymplecticModel::<f64>::torus(n_flux, b1).unwrap();
        let b = build_links(&model, p, m, 1).unwrap();
        let a = renormalized_laplacian(&b, &model);
        let s = lowest_cluster(&a, &SolverOptions { expected_dim: Some(p as usize * n_flux as usize), ..Default::default() }).unwrap();
        (model, b, s)
    }

    #[test]
    fn projector_trace_and_idempotence() {
        let (_, b, s) = solve(1, 2.0, 4, 16);
        let k = FactoredKernel::projector(&s);
        let h2 = b.cell_volume();
        let tr: f64 = (0..k.n()).map(|i| k.diagonal(i).re).sum::<f64>() * h2;
        assert!((tr - s.dim() as f64).abs() < 1e-8);
        for &(x, y) in &[(0usize, 5usize), (17, 200), (33, 33)] {
            let rx = k.row(x);
            let ry = k.row(y);
            let kk: Cx<f64> = rx.iter().zip(&ry).map(|(a, b)| a * b.conj()).sum::<Cx<f64>>() * h2;
            assert!((kk - rx[y]).norm() < 1e-8 * rx[x].norm());
        }
    }

    #[test]
    fn trivialized_kernel_matches_model_to_leading_order() {
        let (model, b, s) = solve(1, 0.0, 8, 32);
        let field = projector_kernel(&s, &b, &model, b.node(5, 9), 0.3).unwrap();
        assert!(field.conjugate_symmetry_defect() < 1e-10);
        let opts = ResidualOptions::defaults(8, model.mu0());
        let res = expansion_residual(&field, &[Poly::one()], &opts);
        // the conjugate phase convention would leave an O(1) residual
        let mut flipped = field.clone();
        flipped.values = field.values.map(|v| v.conj());
        let wrong = expansion_residual(&flipped, &[Poly::one()], &opts);
        assert!(res < 0.2 * wrong, "{res} vs {wrong}");
        assert!(matches!(projector_kernel(&s, &b, &model, 0, 0.6), Err(Error::RadiusTooLarge { .. })));
    }

    #[test]
    fn plane_kernel_is_the_model_kernel() {
        for p in [1u32, 4, 9] {
            let t = FockTruncation::new(p, TWO_PI, 200).unwrap();
            let radius = 3.0 / ((p as f64) * TWO_PI).sqrt();
            let field = fock_kernel_field(&t, radius, radius / 6.0).unwrap();
            let opts = ResidualOptions::defaults(p, TWO_PI);
            assert!(expansion_residual(&field, &[Poly::one()], &opts) < 1e-10);
        }
    }

    #[test]
    fn synthetic_decay() {
        let grid = TorusGrid { m: 16 };
        let p = 9u32;
        let n = grid.nodes();
        let values = DenseMatrix::from_fn(n, n, |i, j| cx(2.0 * (-3.0 * 3.0 * grid.distance::<f64>(i, j)).exp(), 0.0));
        let fit = decay_fit(&DenseKernel { values, cell_volume: 1.0 / 256.0 }, grid, p, 0.1, None).unwrap();
        assert!((fit.mu_hat - 3.0).abs() < 1e-6);
        assert!((fit.c_hat - 2.0).abs() < 1e-6);
        let few = DenseKernel { values: DenseMatrix::identity(n), cell_volume: 1.0 };
        assert!(matches!(decay_fit(&few, grid, p, 0.1, None), Err(Error::InsufficientSamples(_))));
    }

    #[test]
    fn grid_offsets() {
        let g = TorusGrid { m: 8 };
        assert_eq!(g.offset(0, 7), (-1, 0));
        assert_eq!(g.offset(7, 0), (1, 0));
        assert_eq!(g.offset(0, 8 * 7), (0, -1));
        assert!((g.distance::<f64>(0, 9) - 2f64.sqrt() / 8.0).abs() < 1e-15);
    }
}
