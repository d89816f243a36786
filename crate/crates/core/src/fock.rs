//! Exact Toeplitz matrices and Bergman kernel on the truncated Fock space of
//! the plane with constant field `B0`.
//!
//! Basis `e_k = z^k / ‖z^k‖`, `k = 0..=k_max`, orthonormal for the weight
//! `exp(-β|z|²)` with `β = pB0/2`, so `‖z^k‖² = π k! / β^{k+1}`.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::linalg::{tridiagonal_eigen, DenseMatrix};
use crate::scalar::{cx, czero, Cx, Real};
use crate::symbol::Symbol;

/// Relative tolerance for the Bergman-series tail.
pub const SERIES_TAIL_TOL: f64 = 1e-12;
/// Successive quadrature orders must agree to this.
pub const QUADRATURE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug)]
pub struct FockTruncation<T: Real> {
    pub p: u32,
    pub b0: T,
    pub k_max: usize,
}

/// Symbols with closed-form Fock matrices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FockSymbol<T> {
    One,
    Z,
    Zbar,
    AbsZ2,
    X,
    Y,
    Gauss(T),
}

impl<T: Real> FockSymbol<T> {
    /// The same function as a general symbol (for the quadrature route).
    pub fn to_symbol(self) -> Symbol<T> {
        match self {
            FockSymbol::One => Symbol::constant(T::one()),
            FockSymbol::Z => Symbol::z(),
            FockSymbol::Zbar => Symbol::zbar(),
            FockSymbol::AbsZ2 => Symbol::abs_z2(),
            FockSymbol::X => Symbol::coord_x(),
            FockSymbol::Y => Symbol::coord_y(),
            FockSymbol::Gauss(c) => Symbol::gauss(c),
        }
    }

    pub fn degree(self) -> usize {
        match self {
            FockSymbol::One | FockSymbol::Gauss(_) => 0,
            FockSymbol::AbsZ2 => 2,
            _ => 1,
        }
    }
}

fn ln_factorial(k: usize) -> f64 {
    (1..=k).map(|j| (j as f64).ln()).sum()
}

impl<T: Real> FockTruncation<T> {
    pub fn new(p: u32, b0: T, k_max: usize) -> Result<Self> {
        if p == 0 || !(b0 > T::zero()) || k_max == 0 {
            return Err(Error::InvalidConfig(format!("bad Fock truncation p={p}, B0={b0}, K_max={k_max}")));
        }
        Ok(Self { p, b0, k_max })
    }

    pub fn dim(&self) -> usize {
        self.k_max + 1
    }

    /// `β = pB0/2`
    pub fn beta(&self) -> T {
        T::from_usize_lossy(self.p as usize) * self.b0 / T::lit(2.0)
    }

    /// `‖z^k‖²` in the weighted `L²` norm.
    pub fn norm_sq(&self, k: usize) -> T {
        let ln = ln_factorial(k) + T::PI().as_f64().ln() - (k as f64 + 1.0) * self.beta().as_f64().ln();
        T::lit(ln.exp())
    }

    pub fn exact(&self, sym: FockSymbol<T>) -> DenseMatrix<T> {
        let n = self.dim();
        let beta = self.beta();
        let shift = |k: usize| (T::from_usize_lossy(k + 1) / beta).sqrt();
        match sym {
            FockSymbol::One => DenseMatrix::identity(n),
            FockSymbol::Z => DenseMatrix::from_fn(n, n, |i, j| if i == j + 1 { cx(shift(j), T::zero()) } else { czero() }),
            FockSymbol::Zbar => {
                DenseMatrix::from_fn(n, n, |i, j| if j == i + 1 { cx(shift(i), T::zero()) } else { czero() })
            }
            FockSymbol::AbsZ2 => DenseMatrix::from_diagonal(
                &(0..n).map(|k| cx(T::from_usize_lossy(k + 1) / beta, T::zero())).collect::<Vec<_>>(),
            ),
            FockSymbol::X => {
                self.exact(FockSymbol::Z).add(&self.exact(FockSymbol::Zbar)).scale(cx(T::lit(0.5), T::zero()))
            }
            FockSymbol::Y => {
                self.exact(FockSymbol::Z).sub(&self.exact(FockSymbol::Zbar)).scale(cx(T::zero(), -T::lit(0.5)))
            }
            FockSymbol::Gauss(c) => {
                let r = beta / (beta + c);
                DenseMatrix::from_diagonal(&(0..n).map(|k| cx(r.powi(k as i32 + 1), T::zero())).collect::<Vec<_>>())
            }
        }
    }

    /// Gauss–Laguerre radial × trapezoidal angular quadrature of
    /// `⟨f e_k, e_l⟩ = (1/2π)∬ f(√(t/β)e^{iθ}) t^{(k+l)/2}/√(k!l!) e^{i(k-l)θ} e^{-t} dt dθ`,
    /// doubling both orders until successive results agree.
    pub fn quadrature(&self, f: &Symbol<T>) -> Result<DenseMatrix<T>> {
        if !f.is_scalar() {
            return Err(Error::RankMismatch { symbol: f.rank(), bundle: 1 });
        }
        let mut prev: Option<DenseMatrix<T>> = None;
        let mut last_diff = f64::INFINITY;
        let base = 2 * self.dim() + 16;
        for level in 0..4 {
            let nt = base << level;
            let na = (4 * self.dim() + 32) << level;
            let m = self.quadrature_at(f, nt, na)?;
            if let Some(prev) = &prev {
                let scale = m.max_abs().max(T::one());
                last_diff = (m.sub(prev).max_abs() / scale).as_f64();
                if last_diff <= QUADRATURE_TOL {
                    return Ok(m);
                }
            }
            prev = Some(m);
        }
        Err(Error::QuadratureNotConverged(last_diff))
    }

    fn quadrature_at(&self, f: &Symbol<T>, nt: usize, na: usize) -> Result<DenseMatrix<T>> {
        let (nodes, weights) = gauss_laguerre(nt)?;
        let n = self.dim();
        let beta = self.beta().as_f64();
        let two_pi = 2.0 * std::f64::consts::PI;
        // fourier[i][m] = (1/2π)∫ f(r_i e^{iθ}) e^{i m θ} dθ for m = k - l in -(n-1)..=(n-1)
        let nm = 2 * n - 1;
        let mut fourier = vec![Cx::<f64>::new(0.0, 0.0); nt * nm];
        for (i, &t) in nodes.iter().enumerate() {
            let r = (t / beta).sqrt();
            for a in 0..na {
                let th = two_pi * a as f64 / na as f64;
                let v = f.eval_scalar([T::lit(r * th.cos()), T::lit(r * th.sin())]);
                let v = Cx::new(v.re.as_f64(), v.im.as_f64());
                for mi in 0..nm {
                    let m = mi as f64 - (n as f64 - 1.0);
                    fourier[i * nm + mi] += v * Cx::from_polar(1.0 / na as f64, m * th);
                }
            }
        }
        let ln_fact: Vec<f64> = (0..n).map(ln_factorial).collect();
        let out = DenseMatrix::from_fn(n, n, |l, k| {
            let mi = k + n - 1 - l;
            let mut acc = Cx::<f64>::new(0.0, 0.0);
            for (i, (&t, &w)) in nodes.iter().zip(&weights).enumerate() {
                if w <= 0.0 {
                    continue;
                }
                let ln = w.ln() + 0.5 * (k + l) as f64 * t.ln() - 0.5 * (ln_fact[k] + ln_fact[l]);
                acc += fourier[i * nm + mi] * ln.exp();
            }
            cx(T::lit(acc.re), T::lit(acc.im))
        });
        Ok(out)
    }

    /// Weighted Bergman kernel, closed form:
    /// `(pB0/2π)·exp(pB0(z z̄'/2 − |z|²/4 − |z'|²/4))`.
    pub fn bergman_closed(&self, z: Cx<T>, w: Cx<T>) -> Cx<T> {
        let pb = T::from_usize_lossy(self.p as usize) * self.b0;
        let quarter = T::lit(0.25);
        let expo = (z * w.conj()).scale(pb / T::lit(2.0)) - cx(pb * quarter * (z.norm_sqr() + w.norm_sqr()), T::zero());
        expo.exp().scale(pb / (T::PI() + T::PI()))
    }

    /// Truncated series `Σ_k e_k(z) ē_k(w) e^{-β(|z|²+|w|²)/2}` with a
    /// geometric tail bound checked against [`SERIES_TAIL_TOL`].
    pub fn bergman_series(&self, z: Cx<T>, w: Cx<T>) -> Result<Cx<T>> {
        let beta = self.beta();
        let u = (z * w.conj()).scale(beta);
        let mut term = cx(T::one(), T::zero());
        let mut sum = term;
        for k in 1..=self.k_max {
            term = term * u / T::from_usize_lossy(k);
            sum += term;
        }
        let next = term.norm() * u.norm() / T::from_usize_lossy(self.k_max + 1);
        let ratio = u.norm() / T::from_usize_lossy(self.k_max + 2);
        let tail = if ratio < T::one() { next / (T::one() - ratio) } else { T::infinity() };
        let scale = sum.norm().max(T::min_positive_value());
        if !(tail / scale <= T::lit(SERIES_TAIL_TOL)) {
            return Err(Error::TruncationInsufficient { k_max: self.k_max, tail: (tail / scale).as_f64() });
        }
        let damp = (-(beta * (z.norm_sqr() + w.norm_sqr())) / T::lit(2.0)).exp();
        Ok(sum.scale(damp * beta / T::PI()))
    }
}

/// Gauss–Laguerre nodes and weights (weight `e^{-t}` on `[0, ∞)`) from the
/// Jacobi matrix with diagonal `2i+1` and off-diagonal `i`.
pub fn gauss_laguerre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let diag: Vec<f64> = (0..n).map(|i| 2.0 * i as f64 + 1.0).collect();
    let off: Vec<f64> = (1..n).map(|i| i as f64).collect();
    let eig = tridiagonal_eigen(&diag, &off, Some(&[0]))?;
    let weights = (0..n).map(|j| eig.component(0, j).powi(2)).collect();
    Ok((eig.values, weights))
}

/// `[A, B] = AB − BA`
pub fn commutator<T: Real>(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> DenseMatrix<T> {
    a.matmul(b).sub(&b.matmul(a))
}

/// Largest entrywise deviation restricted to indices `< interior`.
pub fn interior_max_abs<T: Real>(m: &DenseMatrix<T>, interior: usize) -> T {
    let mut best = T::zero();
    for i in 0..interior {
        for j in 0..interior {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

/// Which global sign makes `[T_x, T_y] = i p⁻¹ T_{{x,y}}` with
/// `{x, y} = ∓1/B0`? Compared on interior indices only.
pub fn calibrate_poisson_sign<T: Real>(t: &FockTruncation<T>) -> Result<i8> {
    if t.k_max < 16 {
        return Err(Error::InvalidConfig("sign calibration needs K_max >= 16".into()));
    }
    let c = commutator(&t.exact(FockSymbol::X), &t.exact(FockSymbol::Y));
    let interior = t.k_max - 1;
    let p = T::from_usize_lossy(t.p as usize);
    let defect = |s: T| {
        // base bracket {x, y} = -(1/B0); the sign multiplies it
        let target = DenseMatrix::<T>::identity(t.dim()).scale(cx(T::zero(), -s / (p * t.b0)));
        interior_max_abs(&c.sub(&target), interior)
    };
    let (plus, minus) = (defect(T::one()), defect(-T::one()));
    let (lo, hi) = if plus < minus { (plus, minus) } else { (minus, plus) };
    if hi <= lo * T::lit(2.0) {
        return Err(Error::AmbiguousSign { plus: plus.as_f64(), minus: minus.as_f64() });
    }
    Ok(if plus < minus { 1 } else { -1 })
}

static POISSON_SIGN: OnceLock<i8> = OnceLock::new();

/// Global Poisson sign, computed once from the Fock commutator.
pub fn calibrated_poisson_sign() -> i8 {
    *POISSON_SIGN.get_or_init(|| {
        let t = FockTruncation::<f64>::new(1, 1.0, 24).expect("valid truncation");
        let s = calibrate_poisson_sign(&t).expect("calibration is unambiguous on the exact ladder algebra");
        log::debug!("calibrated Poisson sign {s:+}");
        s
    })
}
