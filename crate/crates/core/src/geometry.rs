//! The symplectic model: the unit torus with a periodic magnetic field
//! `B(x) = B0 + B1·cos(2πx)`, or the plane with constant field `B0`.

use crate::error::{Error, Result};
use crate::scalar::{cx, Cx, Real};
use crate::symbol::{Expr, Point, Symbol};

/// Tolerance for `B0/(2π)` to count as an integer.
pub const QUANTIZATION_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ModelKind {
    Torus2,
    FockPlane,
}

#[derive(Clone, Debug)]
pub struct SymplecticModel<T: Real> {
    kind: ModelKind,
    b0: T,
    b1: T,
    flux: i64,
}

impl<T: Real> SymplecticModel<T> {
    /// Torus with `B0 = 2πN` and modulation `B1`.
    pub fn torus(n: i64, b1: T) -> Result<Self> {
        Self::torus_from_b0(T::lit(2.0 * std::f64::consts::PI * n as f64), b1)
    }

    /// Torus from a raw mean field; rejects non-integral flux.
    pub fn torus_from_b0(b0: T, b1: T) -> Result<Self> {
        let flux = b0 / (T::PI() + T::PI());
        let rounded = flux.round();
        if (flux - rounded).abs() > T::lit(QUANTIZATION_TOL).max(T::epsilon() * T::lit(64.0)) * flux.abs().max(T::one())
            || rounded < T::one()
        {
            return Err(Error::NonIntegralFlux { flux: flux.as_f64() });
        }
        Self::checked(ModelKind::Torus2, b0, b1, rounded.to_i64().unwrap_or(0))
    }

    pub fn plane(b0: T) -> Result<Self> {
        Self::checked(ModelKind::FockPlane, b0, T::zero(), 0)
    }

    fn checked(kind: ModelKind, b0: T, b1: T, flux: i64) -> Result<Self> {
        if !(b0 > T::zero()) {
            return Err(Error::InvalidConfig(format!("mean field must be positive, got {b0}")));
        }
        if b1 < T::zero() || b1 >= b0 {
            return Err(Error::InvalidConfig(format!("need 0 <= B1 < B0, got B1 = {b1}, B0 = {b0}")));
        }
        Ok(Self { kind, b0, b1, flux })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn b0(&self) -> T {
        self.b0
    }

    pub fn b1(&self) -> T {
        self.b1
    }

    /// Integer flux `N` (zero on the plane).
    pub fn flux(&self) -> i64 {
        self.flux
    }

    pub fn is_torus(&self) -> bool {
        self.kind == ModelKind::Torus2
    }

    pub fn is_constant_field(&self) -> bool {
        self.b1 == T::zero()
    }

    pub fn field(&self, p: Point<T>) -> T {
        self.b0 + self.b1 * ((T::PI() + T::PI()) * p[0]).cos()
    }

    /// `a(x) = ∫₀ˣ B(s, ·) ds`
    pub fn field_primitive(&self, x: T) -> T {
        let two_pi = T::PI() + T::PI();
        self.b0 * x + self.b1 * (two_pi * x).sin() / two_pi
    }

    pub fn field_max(&self) -> T {
        self.b0 + self.b1
    }

    pub fn field_expr(&self) -> Expr<T> {
        if self.b1 == T::zero() {
            Expr::constant(self.b0)
        } else {
            Expr::sum(vec![Expr::constant(self.b0), Expr::Cos { kx: 1, ky: 0 }.scaled(cx(self.b1, T::zero()))])
        }
    }

    /// The skew operator `B_x` with `ω(u, v) = ⟨B_x u, v⟩`.
    pub fn skew_operator(&self, p: Point<T>) -> [[T; 2]; 2] {
        let b = self.field(p);
        [[T::zero(), -b], [b, T::zero()]]
    }

    /// `τ(x) = ½ Tr (B_x* B_x)^{1/2}`, via the 2×2 trace-norm identity
    /// `(σ₁ + σ₂)² = ‖M‖²_F + 2|det M|`.
    pub fn tau(&self, p: Point<T>) -> T {
        let m = self.skew_operator(p);
        let fro2 = m[0][0] * m[0][0] + m[0][1] * m[0][1] + m[1][0] * m[1][0] + m[1][1] * m[1][1];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        (fro2 + det.abs() + det.abs()).sqrt() / T::lit(2.0)
    }

    /// `μ₀ = min τ = B0 - B1`.
    pub fn mu0(&self) -> T {
        self.b0 - self.b1
    }

    pub fn check_quantizable(&self) -> Result<i64> {
        match self.kind {
            ModelKind::FockPlane => Ok(0),
            ModelKind::Torus2 => {
                let flux = self.b0 / (T::PI() + T::PI());
                if (flux - flux.round()).abs() > T::lit(QUANTIZATION_TOL) * flux.abs().max(T::one()) {
                    Err(Error::NonIntegralFlux { flux: flux.as_f64() })
                } else {
                    Ok(self.flux)
                }
            }
        }
    }

    /// Reduces a point into the fundamental domain (identity on the plane).
    pub fn wrap(&self, p: Point<T>) -> Point<T> {
        match self.kind {
            ModelKind::FockPlane => p,
            ModelKind::Torus2 => [p[0] - p[0].floor(), p[1] - p[1].floor()],
        }
    }

    /// Flat distance; on the torus the minimum over the nine nearest images.
    pub fn geodesic_distance(&self, a: Point<T>, b: Point<T>) -> T {
        let dx = a[0] - b[0];
        let dy = a[1] - b[1];
        match self.kind {
            ModelKind::FockPlane => (dx * dx + dy * dy).sqrt(),
            ModelKind::Torus2 => {
                let (a, b) = (self.wrap(a), self.wrap(b));
                let mut best = T::infinity();
                for sx in -1..=1 {
                    for sy in -1..=1 {
                        let ex = a[0] - b[0] + T::lit(sx as f64);
                        let ey = a[1] - b[1] + T::lit(sy as f64);
                        best = best.min((ex * ex + ey * ey).sqrt());
                    }
                }
                best
            }
        }
    }

    /// Minimal-image displacement `b - a`.
    pub fn displacement(&self, a: Point<T>, b: Point<T>) -> Point<T> {
        let mut d = [b[0] - a[0], b[1] - a[1]];
        if self.is_torus() {
            for c in &mut d {
                *c = *c - c.round();
            }
        }
        d
    }

    pub fn injectivity_radius(&self) -> T {
        match self.kind {
            ModelKind::FockPlane => T::infinity(),
            ModelKind::Torus2 => T::lit(0.5),
        }
    }

    /// Poisson bracket of two scalar symbols at a point, in the convention
    /// fixed by [`crate::fock::calibrated_poisson_sign`].
    pub fn poisson_bracket(&self, f: &Symbol<T>, g: &Symbol<T>, p: Point<T>) -> Result<Cx<T>> {
        let s = T::lit(crate::fock::calibrated_poisson_sign() as f64);
        let (fx, fy) = (f.derivative(0)?, f.derivative(1)?);
        let (gx, gy) = (g.derivative(0)?, g.derivative(1)?);
        if !(f.is_scalar() && g.is_scalar()) {
            return Err(Error::InvalidConfig("pointwise bracket needs scalar symbols; use poisson_symbol".into()));
        }
        let val = fy.eval_scalar(p) * gx.eval_scalar(p) - fx.eval_scalar(p) * gy.eval_scalar(p);
        Ok(val * cx(s / self.field(p), T::zero()))
    }

    /// `{f, g}` as a symbol; for matrix symbols the entries are
    /// `Σ_k {f_ik, g_kj}` (order preserved).
    pub fn poisson_symbol(&self, f: &Symbol<T>, g: &Symbol<T>) -> Result<Symbol<T>> {
        let s = T::lit(crate::fock::calibrated_poisson_sign() as f64);
        let (fx, fy) = (f.derivative(0)?, f.derivative(1)?);
        let (gx, gy) = (g.derivative(0)?, g.derivative(1)?);
        let diff = fy.mul(&gx).add(&fx.mul(&gy).scale(cx(-T::one(), T::zero())));
        let inv_b = Symbol::scalar(Expr::Recip(Box::new(self.field_expr())));
        Ok(diff.mul(&inv_b).scale(cx(s, T::zero())).with_id(format!("{{{},{}}}", f.id(), g.id())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_non_integral_flux() {
        assert!(matches!(SymplecticModel::<f64>::torus_from_b0(7.0, 0.0), Err(Error::NonIntegralFlux { .. })));
        let m = SymplecticModel::<f64>::torus_from_b0(4.0 * std::f64::consts::PI, 1.0).unwrap();
        assert_eq!(m.check_quantizable().unwrap(), 2);
    }

    #[test]
    fn rejects_vanishing_field() {
        assert!(SymplecticModel::<f64>::torus(1, 7.0).is_err());
        assert!(SymplecticModel::<f64>::plane(-1.0).is_err());
    }

    #[test]
    fn tau_matches_eigen_oracle() {
        // independent route: τ = ½ Σ sqrt(eig(MᵀM))
        let m = SymplecticModel::<f64>::torus(1, 0.3 * 2.0 * std::f64::consts::PI).unwrap();
        for i in 0..16 {
            let p = [i as f64 / 16.0, 0.37];
            let b = m.skew_operator(p);
            let bm = nalgebra::Matrix2::new(b[0][0], b[0][1], b[1][0], b[1][1]);
            let eig = (bm.transpose() * bm).symmetric_eigen();
            let tau = 0.5 * eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum::<f64>();
            assert!((m.tau(p) - tau).abs() < 1e-12);
        }
    }

    #[test]
    fn mu0_matches_grid_minimum() {
        let m = SymplecticModel::<f64>::torus(1, 2.0).unwrap();
        let grid_min = (0..4096).map(|i| m.tau([i as f64 / 4096.0, 0.0])).fold(f64::INFINITY, f64::min);
        assert!((grid_min - m.mu0()).abs() < 1e-9);
    }

    #[test]
    fn primitive_of_field() {
        let m = SymplecticModel::<f64>::torus(3, 5.0).unwrap();
        assert!((m.field_primitive(1.0) - m.b0()).abs() < 1e-12);
        let h = 1e-6;
        let x = 0.31;
        let d = (m.field_primitive(x + h) - m.field_primitive(x - h)) / (2.0 * h);
        assert!((d - m.field([x, 0.0])).abs() < 1e-6);
    }

    #[test]
    fn coordinate_bracket() {
        let m = SymplecticModel::<f64>::plane(3.0).unwrap();
        let b = m.poisson_bracket(&Symbol::coord_x(), &Symbol::coord_y(), [0.2, 0.1]).unwrap();
        assert!((b.re + 1.0 / 3.0).abs() < 1e-14 && b.im == 0.0);
    }

    #[test]
    fn geodesic_wraps() {
        let m = SymplecticModel::<f64>::torus(1, 0.0).unwrap();
        assert!((m.geodesic_distance([0.05, 0.5], [0.95, 0.5]) - 0.1).abs() < 1e-14);
        assert!((m.geodesic_distance([0.05, 0.05], [0.95, 0.95]) - 0.1 * 2f64.sqrt()).abs() < 1e-14);
    }

    fn trig_symbol() -> impl Strategy<Value = Symbol<f64>> {
        (-2i32..=2, -2i32..=2, any::<bool>(), -2.0f64..2.0).prop_map(|(kx, ky, c, a)| {
            let base = if c { Symbol::cos_mode(kx, ky) } else { Symbol::sin_mode(kx, ky) };
            base.scale(cx(a, 0.0))
        })
    }

    proptest! {
        #[test]
        fn bracket_antisymmetric_and_leibniz(f in trig_symbol(), g in trig_symbol(), h in trig_symbol(),
                                             x in 0.0f64..1.0, y in 0.0f64..1.0) {
            let m = SymplecticModel::<f64>::torus(1, 2.5).unwrap();
            let p = [x, y];
            let fg = m.poisson_bracket(&f, &g, p).unwrap();
            let gf = m.poisson_bracket(&g, &f, p).unwrap();
            prop_assert!((fg + gf).norm() < 1e-10);
            let lhs = m.poisson_bracket(&f, &g.mul(&h), p).unwrap();
            let rhs = m.poisson_bracket(&f, &g, p).unwrap() * h.eval_scalar(p)
                + g.eval_scalar(p) * m.poisson_bracket(&f, &h, p).unwrap();
            prop_assert!((lhs - rhs).norm() < 1e-9 * (1.0 + lhs.norm()));
            let sym = m.poisson_symbol(&f, &g).unwrap().eval_scalar(p);
            prop_assert!((sym - fg).norm() < 1e-10 * (1.0 + fg.norm()));
        }

        #[test]
        fn distance_is_a_metric(a in prop::array::uniform2(-2.0f64..2.0), b in prop::array::uniform2(-2.0f64..2.0),
                                c in prop::array::uniform2(-2.0f64..2.0)) {
            let m = SymplecticModel::<f64>::torus(1, 0.0).unwrap();
            let (ab, ba) = (m.geodesic_distance(a, b), m.geodesic_distance(b, a));
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!(ab <= 0.5f64.sqrt() + 1e-12);
            prop_assert!(ab <= m.geodesic_distance(a, c) + m.geodesic_distance(c, b) + 1e-12);
            let shifted = [a[0] + 1.0, a[1] - 1.0];
            prop_assert!(m.geodesic_distance(shifted, a) < 1e-12);
        }
    }
}
