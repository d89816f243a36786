//! U(1) lattice discretization of `L^p ⊗ E` on the torus and the
//! renormalized magnetic Laplacian.
//!
//! Nodes `x_ij = (i/M, j/M)`, node index `j·M + i`; for rank `r` the vector
//! index is `c·M² + node` (component-major), so the rank-`r` operator is a
//! block-diagonal replication of the scalar one.
//!
//! Gauge: `θ_y(i, j) = -p·h·a(x_i)` with `a` the primitive of `B`, and
//! `θ_x = 0` except on the wrap column `i = M-1`, where
//! `θ_x(M-1, j) = 2π·((pN·j) mod M)/M` absorbs the jump of `a` across `x = 1`.

use crate::error::{Error, Result};
use crate::geometry::SymplecticModel;
use crate::scalar::{cis, Cx, Real};
use crate::sparse::SparseHermitian;
use crate::symbol::Point;

/// Default plaquette-flux cap (radians).
pub const PHI_MAX: f64 = 0.2;

/// Grid-size rule: the smallest multiple of `multiple`, at least `min_m`,
/// whose largest plaquette flux `p·max B·h²` stays below `phi_max`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridPolicy {
    pub phi_max: f64,
    pub multiple: usize,
    pub min_m: usize,
}

impl Default for GridPolicy {
    fn default() -> Self {
        Self { phi_max: PHI_MAX, multiple: 8, min_m: 8 }
    }
}

impl GridPolicy {
    pub fn grid_size<T: Real>(&self, model: &SymplecticModel<T>, p: u32) -> usize {
        let flux_density = p as f64 * model.field_max().as_f64();
        let mut m = self.min_m.max(self.multiple);
        m = m.div_ceil(self.multiple) * self.multiple;
        while flux_density / (m * m) as f64 > self.phi_max {
            m += self.multiple;
        }
        m
    }
}

#[derive(Clone, Debug)]
pub struct LatticeBundle<T: Real> {
    m: usize,
    p: u32,
    r: usize,
    h: T,
    theta_x: Vec<T>,
    theta_y: Vec<T>,
    plaquette_flux: Vec<T>,
}

impl<T: Real> LatticeBundle<T> {
    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        (j % self.m) * self.m + (i % self.m)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn rank(&self) -> usize {
        self.r
    }

    pub fn h(&self) -> T {
        self.h
    }

    pub fn nodes(&self) -> usize {
        self.m * self.m
    }

    pub fn dim(&self) -> usize {
        self.r * self.m * self.m
    }

    pub fn cell_volume(&self) -> T {
        self.h * self.h
    }

    pub fn point(&self, node: usize) -> Point<T> {
        let (i, j) = (node % self.m, node / self.m);
        [T::from_usize_lossy(i) * self.h, T::from_usize_lossy(j) * self.h]
    }

    pub fn theta_x(&self, i: usize, j: usize) -> T {
        self.theta_x[self.node(i, j)]
    }

    pub fn theta_y(&self, i: usize, j: usize) -> T {
        self.theta_y[self.node(i, j)]
    }

    pub fn plaquette_flux(&self, i: usize, j: usize) -> T {
        self.plaquette_flux[self.node(i, j)]
    }

    pub fn max_plaquette_flux(&self) -> T {
        self.plaquette_flux.iter().fold(T::zero(), |a, &b| a.max(b.abs()))
    }

    pub fn total_flux(&self) -> T {
        self.plaquette_flux.iter().copied().sum()
    }

    /// Holonomy phase `θ_x(i,j) + θ_y(i+1,j) − θ_x(i,j+1) − θ_y(i,j)`.
    pub fn holonomy(&self, i: usize, j: usize) -> T {
        self.theta_x(i, j) + self.theta_y(i + 1, j) - self.theta_x(i, j + 1) - self.theta_y(i, j)
    }

    /// Links after the node gauge change `u → e^{iχ}u`:
    /// `θ'_{v→w} = θ_{v→w} + χ_w − χ_v`.
    pub fn gauge_transform(&self, chi: &[T]) -> Result<Self> {
        if chi.len() != self.nodes() {
            return Err(Error::DimensionMismatch { expected: self.nodes(), got: chi.len() });
        }
        let mut out = self.clone();
        for j in 0..self.m {
            for i in 0..self.m {
                let v = self.node(i, j);
                out.theta_x[v] = self.theta_x[v] + chi[self.node(i + 1, j)] - chi[v];
                out.theta_y[v] = self.theta_y[v] + chi[self.node(i, j + 1)] - chi[v];
            }
        }
        Ok(out)
    }

    /// Same links with a different auxiliary rank.
    pub fn with_rank(&self, r: usize) -> Self {
        Self { r: r.max(1), ..self.clone() }
    }
}

/// Builds the link phases for `L^p` on an `M×M` grid with `phi_max` as the
/// resolution guard. `p = 0` yields the trivial bundle.
pub fn build_links<T: Real>(model: &SymplecticModel<T>, p: u32, m: usize, r: usize) -> Result<LatticeBundle<T>> {
    build_links_with(model, p, m, r, PHI_MAX)
}

pub fn build_links_with<T: Real>(
    model: &SymplecticModel<T>,
    p: u32,
    m: usize,
    r: usize,
    phi_max: f64,
) -> Result<LatticeBundle<T>> {
    if !model.is_torus() {
        return Err(Error::InvalidConfig("the lattice bundle lives on the torus".into()));
    }
    let n_flux = model.check_quantizable()?;
    if m < 3 || r == 0 {
        return Err(Error::InvalidConfig(format!("need M >= 3 and r >= 1, got M = {m}, r = {r}")));
    }
    let h = T::one() / T::from_usize_lossy(m);
    let pt = T::from_usize_lossy(p as usize);
    let a: Vec<T> = (0..=m).map(|i| model.field_primitive(T::from_usize_lossy(i) * h)).collect();
    let mut theta_x = vec![T::zero(); m * m];
    let mut theta_y = vec![T::zero(); m * m];
    let mut flux = vec![T::zero(); m * m];
    let wrap_step = (p as i64 * n_flux).rem_euclid(m as i64) as usize;
    let two_pi = T::PI() + T::PI();
    for j in 0..m {
        for i in 0..m {
            let v = j * m + i;
            theta_y[v] = -pt * h * a[i];
            flux[v] = pt * h * (a[i + 1] - a[i]);
            if i == m - 1 {
                let k = (wrap_step * j) % m;
                theta_x[v] = two_pi * T::from_usize_lossy(k) / T::from_usize_lossy(m);
            }
        }
    }
    let bundle = LatticeBundle { m, p, r, h, theta_x, theta_y, plaquette_flux: flux };
    let phi = bundle.max_plaquette_flux().as_f64();
    if phi > phi_max {
        return Err(Error::ResolutionTooCoarse { max_flux: phi, phi_max, m });
    }
    Ok(bundle)
}

/// `(Δ_p u)(v) = h⁻² Σ_{v→w} (u(v) − U_e u(w)) − p·τ(x_v)·u(v)` on each of the
/// `r` components.
pub fn renormalized_laplacian<T: Real>(bundle: &LatticeBundle<T>, model: &SymplecticModel<T>) -> SparseHermitian<T> {
    let m = bundle.m;
    let nodes = m * m;
    let inv_h2 = T::one() / (bundle.h * bundle.h);
    let pt = T::from_usize_lossy(bundle.p as usize);
    let mut trip = Vec::with_capacity(5 * nodes * bundle.r);
    let hop = |theta: T| -> Cx<T> { -cis(theta) * inv_h2 };
    for c in 0..bundle.r {
        let off = c * nodes;
        for j in 0..m {
            for i in 0..m {
                let v = bundle.node(i, j);
                let diag = T::lit(4.0) * inv_h2 - pt * model.tau(bundle.point(v));
                trip.push((off + v, off + v, Cx::new(diag, T::zero())));
                let tx = bundle.theta_x[v];
                let ty = bundle.theta_y[v];
                let east = bundle.node(i + 1, j);
                let north = bundle.node(i, j + 1);
                trip.push((off + v, off + east, hop(tx)));
                trip.push((off + east, off + v, hop(-tx)));
                trip.push((off + v, off + north, hop(ty)));
                trip.push((off + north, off + v, hop(-ty)));
            }
        }
    }
    SparseHermitian::from_triplets(bundle.dim(), trip, bundle.cell_volume())
}

/// Lower bound `−p·max τ` on the spectrum of [`renormalized_laplacian`].
pub fn spectral_floor<T: Real>(bundle: &LatticeBundle<T>, model: &SymplecticModel<T>) -> T {
    -T::from_usize_lossy(bundle.p as usize) * model.field_max()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense_eig;
    use crate::scalar::cx;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const TAU: f64 = 2.0 * std::f64::consts::PI;

    fn wrap_angle(a: f64) -> f64 {
        (a + std::f64::consts::PI).rem_euclid(TAU) - std::f64::consts::PI
    }

    #[test]
    fn constant_field_fluxes() {
        let model = SymplecticModel::<f64>::torus(1, 0.0).unwrap();
        let b = build_links(&model, 1, 16, 1).unwrap();
        for j in 0..16 {
            for i in 0..16 {
                assert!((b.plaquette_flux(i, j) - TAU / 256.0).abs() < 1e-14);
                assert!(wrap_angle(b.holonomy(i, j) + b.plaquette_flux(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn variable_field_total_flux() {
        let model = SymplecticModel::<f64>::torus_from_b0(4.0 * std::f64::consts::PI, std::f64::consts::PI).unwrap();
        let b = build_links(&model, 2, 32, 1).unwrap();
        assert!((b.total_flux() - TAU * 4.0).abs() < 1e-10);
        for j in 0..32 {
            for i in 0..32 {
                assert!(wrap_angle(b.holonomy(i, j) + b.plaquette_flux(i, j)).abs() < 1e-12, "({i},{j})");
            }
        }
    }

    #[test]
    fn resolution_guard() {
        let model = SymplecticModel::<f64>::torus(1, 0.0).unwrap();
        assert!(matches!(build_links(&model, 8, 8, 1), Err(Error::ResolutionTooCoarse { .. })));
        let policy = GridPolicy::default();
        let m = policy.grid_size(&model, 8);
        assert_eq!(m % 8, 0);
        assert!(build_links(&model, 8, m, 1).is_ok());
        assert!(build_links(&model, 8, m - 8, 1).is_err());
    }

    #[test]
    fn trivial_bundle_has_constant_ground_state() {
        let model = SymplecticModel::<f64>::torus(1, 0.0).unwrap();
        let b = build_links(&model, 0, 8, 1).unwrap();
        let a = renormalized_laplacian(&b, &model);
        let eig = dense_eig(&a.to_dense()).unwrap();
        assert!(eig.values[0].abs() < 1e-10);
        let v = eig.vectors.column(0);
        let phase = v[0] / v[0].norm();
        for x in &v {
            assert!((x / phase - cx(1.0 / 8.0, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn dense_oracle_and_symmetry() {
        let model = SymplecticModel::<f64>::torus(1, 2.0).unwrap();
        let b = build_links(&model, 1, 8, 1).unwrap();
        let a = renormalized_laplacian(&b, &model);
        assert!(a.is_hermitian());
        assert!(a.nnz() <= 5 * a.dim());
        let dense = a.to_dense();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let u: Vec<Cx<f64>> = (0..a.dim()).map(|_| cx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let v: Vec<Cx<f64>> = (0..a.dim()).map(|_| cx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let au = a.multiply(&u).unwrap();
            let av = a.multiply(&v).unwrap();
            let du = dense.matvec(&u);
            let scale = crate::linalg::norm(&au);
            assert!(au.iter().zip(&du).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) < 1e-13 * scale);
            let lhs = crate::linalg::dot(&v, &au);
            let rhs = crate::linalg::dot(&av, &u);
            assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0));
        }
    }

    #[test]
    fn rank_r_is_block_replication() {
        let model = SymplecticModel::<f64>::torus(1, 1.0).unwrap();
        let b1 = build_links(&model, 2, 16, 1).unwrap();
        let a1 = renormalized_laplacian(&b1, &model);
        let a3 = renormalized_laplacian(&b1.with_rank(3), &model);
        let n = a1.dim();
        assert_eq!(a3.dim(), 3 * n);
        for c in 0..3 {
            for row in 0..n {
                let lhs: Vec<_> = a3.row_entries(c * n + row).map(|(k, v)| (k - c * n, v)).collect();
                let rhs: Vec<_> = a1.row_entries(row).collect();
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn gershgorin_floor() {
        let model = SymplecticModel::<f64>::torus(1, 3.0).unwrap();
        let b = build_links(&model, 3, 24, 1).unwrap();
        let a = renormalized_laplacian(&b, &model);
        assert!(a.gershgorin_lower() >= spectral_floor(&b, &model) - 1e-9);
    }

    #[test]
    fn gauge_spectrum_invariance() {
        let model = SymplecticModel::<f64>::torus(1, 2.0).unwrap();
        let b = build_links(&model, 1, 8, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let chi: Vec<f64> = (0..b.nodes()).map(|_| rng.gen_range(0.0..TAU)).collect();
        let b2 = b.gauge_transform(&chi).unwrap();
        let e1 = dense_eig(&renormalized_laplacian(&b, &model).to_dense()).unwrap().values;
        let e2 = dense_eig(&renormalized_laplacian(&b2, &model).to_dense()).unwrap().values;
        for (x, y) in e1.iter().zip(&e2) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn gauge_covariance(seed in any::<u64>(), b1 in 0.0f64..5.0, p in 1u32..4) {
            let model = SymplecticModel::<f64>::torus(1, b1).unwrap();
            let m = GridPolicy::default().grid_size(&model, p);
            let b = build_links(&model, p, m, 1).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let chi: Vec<f64> = (0..b.nodes()).map(|_| rng.gen_range(0.0..TAU)).collect();
            let a = renormalized_laplacian(&b, &model);
            let a2 = renormalized_laplacian(&b.gauge_transform(&chi).unwrap(), &model);
            // D* A D with D = diag(e^{iχ})
            for row in 0..a.dim() {
                for (col, val) in a.row_entries(row) {
                    let conj = val * cis(chi[col] - chi[row]);
                    prop_assert!((conj - a2.get(row, col)).norm() < 1e-12 * val.norm().max(1.0));
                }
            }
            for j in 0..m {
                for i in 0..m {
                    prop_assert!(wrap_angle(b.holonomy(i, j) + b.plaquette_flux(i, j)).abs() < 1e-12);
                }
            }
        }
    }
}
