//! Low-lying spectral cluster of the renormalized Laplacian.
//!
//! The solver is a block method: Chebyshev-filtered subspace iteration with
//! fully reorthogonalized blocks and a Rayleigh–Ritz step each sweep. A block
//! (rather than single-vector Krylov) start is needed because constant-field
//! Landau levels are exactly `pN`-fold degenerate on the lattice.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dense_eig, dot, norm, op_norm, DenseMatrix};
use crate::scalar::{cx, czero, Cx, Real};
use crate::sparse::SparseHermitian;

/// Minimum relative gap that separates the cluster from the rest.
pub const GAP_FACTOR: f64 = 10.0;
/// Residual target `‖Av − λv‖ ≤ RESIDUAL_TOL·(1 + |λ|)`.
pub const RESIDUAL_TOL: f64 = 1e-9;

const FILTER_DEGREE: usize = 40;
const MAX_SWEEPS: usize = 400;
const MAX_CANDIDATES: usize = 512;
const STALL_WINDOW: usize = 25;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Window<T> {
    /// Largest relative gap among the candidate Ritz values.
    Auto,
    /// Everything at or below `C_L`.
    Fixed(T),
}

#[derive(Clone, Debug)]
pub struct SolverOptions<T> {
    pub expected_dim: Option<usize>,
    pub window: Window<T>,
    pub seed: u64,
}

impl<T> Default for SolverOptions<T> {
    fn default() -> Self {
        Self { expected_dim: None, window: Window::Auto, seed: 0x5eed }
    }
}

#[derive(Clone, Debug)]
pub struct SpectralSubspace<T: Real> {
    pub eigenvalues: Vec<T>,
    /// `n×d`, orthonormal in `⟨u, v⟩ = w Σ ū v` with `w = cell_volume`.
    pub basis: DenseMatrix<T>,
    pub residuals: Vec<T>,
    pub gap_edge: T,
    /// `[-C_L, C_L]`
    pub window: (T, T),
    pub cell_volume: T,
    /// Every converged candidate value examined for the window.
    pub candidates: Vec<T>,
    pub sweeps: usize,
}

impl<T: Real> SpectralSubspace<T> {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n(&self) -> usize {
        self.basis.rows()
    }

    pub fn c_l(&self) -> T {
        self.window.1
    }

    /// `P u = V (V* u)` in the weighted product.
    pub fn apply_projector(&self, u: &[Cx<T>]) -> Result<Vec<Cx<T>>> {
        if u.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: u.len() });
        }
        let coeffs: Vec<Cx<T>> = self.basis.adjoint_matvec(u).into_iter().map(|c| c * self.cell_volume).collect();
        Ok(self.basis.matvec(&coeffs))
    }

    /// Basis orthonormal in the plain Euclidean product.
    pub fn euclidean_basis(&self) -> DenseMatrix<T> {
        self.basis.scale(cx(self.cell_volume.sqrt(), T::zero()))
    }

    /// Largest principal angle between the two subspaces (radians), computed
    /// from `‖(I − P₁)V₂‖` so that small angles keep full precision.
    pub fn max_principal_angle(&self, other: &SpectralSubspace<T>) -> Result<T> {
        if self.n() != other.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: other.n() });
        }
        if self.dim() != other.dim() {
            return Ok(T::FRAC_PI_2());
        }
        let v1 = self.euclidean_basis();
        let v2 = other.euclidean_basis();
        let resid = v2.sub(&v1.matmul(&v1.adjoint_matmul(&v2)));
        Ok(op_norm(&resid).min(T::one()).asin())
    }

    /// Same eigenpairs for `E = ℂ^r` with component-major layout.
    pub fn replicate(&self, r: usize) -> SpectralSubspace<T> {
        let (n, d) = (self.n(), self.dim());
        let basis = DenseMatrix::from_fn(n * r, d * r, |row, col| {
            let (rc, rn) = (row / n, row % n);
            let (cc, cd) = (col / d, col % d);
            if rc == cc {
                self.basis[(rn, cd)]
            } else {
                czero()
            }
        });
        let rep = |v: &[T]| (0..r).flat_map(|_| v.iter().copied()).collect::<Vec<_>>();
        SpectralSubspace {
            eigenvalues: rep(&self.eigenvalues),
            basis,
            residuals: rep(&self.residuals),
            gap_edge: self.gap_edge,
            window: self.window,
            cell_volume: self.cell_volume,
            candidates: self.candidates.clone(),
            sweeps: self.sweeps,
        }
    }
}

/// Places the window: returns `(d, gap_edge, C_L)` from ascending values.
///
/// The relative gap after index `k` is `(λ_{k+1} − λ_k) / max(λ_k − λ_1, 1)`:
/// the jump measured against the spread of the candidate cluster, with a unit
/// floor so that an isolated ground state is not mistaken for a cluster.
pub fn detect_window<T: Real>(values: &[T], window: Window<T>) -> Result<(usize, T, T)> {
    match window {
        Window::Fixed(c) => {
            let d = values.iter().take_while(|&&v| v <= c).count();
            if d == values.len() {
                return Err(Error::NoGapDetected { threshold: c.as_f64(), candidates: values.len() });
            }
            Ok((d, values[d], c))
        }
        Window::Auto => {
            let mut best: Option<(usize, T)> = None;
            for k in 0..values.len().saturating_sub(1) {
                let denom = (values[k] - values[0]).max(T::one());
                let g = (values[k + 1] - values[k]) / denom;
                if best.map_or(true, |(_, b)| g > b) {
                    best = Some((k + 1, g));
                }
            }
            match best {
                Some((d, g)) if g >= T::lit(GAP_FACTOR) => {
                    let edge = values[d];
                    let c_l = ((values[d - 1] + edge) / T::lit(2.0)).max(values[0].abs());
                    if c_l >= edge {
                        return Err(Error::NoGapDetected { threshold: GAP_FACTOR, candidates: values.len() });
                    }
                    Ok((d, edge, c_l))
                }
                _ => Err(Error::NoGapDetected { threshold: GAP_FACTOR, candidates: values.len() }),
            }
        }
    }
}

type Block<T> = Vec<Vec<Cx<T>>>;

fn random_vector<T: Real>(n: usize, rng: &mut ChaCha8Rng) -> Vec<Cx<T>> {
    (0..n).map(|_| cx(T::lit(rng.gen_range(-1.0..1.0)), T::lit(rng.gen_range(-1.0..1.0)))).collect()
}

/// In-place CGS2 orthonormalization; columns that collapse are replaced by
/// fresh random vectors.
fn orthonormalize<T: Real>(x: &mut Block<T>, rng: &mut ChaCha8Rng) {
    let n = x.first().map_or(0, Vec::len);
    for j in 0..x.len() {
        for attempt in 0..4 {
            let before = norm(&x[j]);
            for _ in 0..2 {
                for i in 0..j {
                    let c = dot(&x[i], &x[j]);
                    let (head, tail) = x.split_at_mut(j);
                    axpy(-c, &head[i], &mut tail[0]);
                }
            }
            let after = norm(&x[j]);
            if after > T::lit(1e-10) * before.max(T::min_positive_value()) && after > T::zero() {
                let inv = T::one() / after;
                x[j].iter_mut().for_each(|v| *v = *v * inv);
                break;
            }
            assert!(attempt < 3, "could not complete an orthonormal block");
            x[j] = random_vector(n, rng);
        }
    }
}

fn apply_block<T: Real>(a: &SparseHermitian<T>, x: &Block<T>) -> Result<Block<T>> {
    x.iter().map(|c| a.multiply(c)).collect()
}

/// Zhou–Saad scaled Chebyshev filter damping `[lo_cut, hi]`, normalized at `lo`.
fn chebyshev_filter<T: Real>(
    a: &SparseHermitian<T>,
    x: &Block<T>,
    degree: usize,
    lo: T,
    lo_cut: T,
    hi: T,
) -> Result<Block<T>> {
    let e = (hi - lo_cut) / T::lit(2.0);
    let c = (hi + lo_cut) / T::lit(2.0);
    let mut sigma = e / (lo - c);
    let tau = T::lit(2.0) / sigma;
    let mut out = Vec::with_capacity(x.len());
    for col in x {
        let mut prev = col.clone();
        let ay = a.multiply(&prev)?;
        let mut cur: Vec<Cx<T>> = ay.iter().zip(&prev).map(|(&av, &v)| (av - v * c) * (sigma / e)).collect();
        let mut s = sigma;
        for _ in 1..degree {
            let s2 = T::one() / (tau - s);
            let ay = a.multiply(&cur)?;
            let next: Vec<Cx<T>> = ay
                .iter()
                .zip(&cur)
                .zip(&prev)
                .map(|((&av, &v), &pv)| (av - v * c) * (T::lit(2.0) * s2 / e) - pv * (s * s2))
                .collect();
            prev = cur;
            cur = next;
            s = s2;
        }
        out.push(cur);
        sigma = e / (lo - c);
    }
    let _ = sigma;
    Ok(out)
}

struct RitzState<T: Real> {
    x: Block<T>,
    ax: Block<T>,
    values: Vec<T>,
}

fn rayleigh_ritz<T: Real>(a: &SparseHermitian<T>, x: &Block<T>) -> Result<RitzState<T>> {
    let ax = apply_block(a, x)?;
    let k = x.len();
    let mut h = DenseMatrix::<T>::from_fn(k, k, |i, j| dot(&x[i], &ax[j]));
    h.symmetrize();
    let eig = dense_eig(&h)?;
    let n = x.first().map_or(0, Vec::len);
    let combine = |src: &Block<T>| -> Block<T> {
        (0..k)
            .map(|j| {
                let mut v = vec![czero(); n];
                for i in 0..k {
                    axpy(eig.vectors[(i, j)], &src[i], &mut v);
                }
                v
            })
            .collect()
    };
    Ok(RitzState { x: combine(x), ax: combine(&ax), values: eig.values })
}

fn residual<T: Real>(s: &RitzState<T>, j: usize) -> T {
    let th = s.values[j];
    s.ax[j].iter().zip(&s.x[j]).map(|(&av, &v)| (av - v * th).norm_sqr()).sum::<T>().sqrt()
}

fn tol_for<T: Real>(lambda: T, tol: T) -> T {
    tol * (T::one() + lambda.abs())
}

/// Lowest `want` eigenpairs to the residual tolerance, with a block of
/// `want + buffer` columns.
fn subspace_iteration<T: Real>(
    a: &SparseHermitian<T>,
    want: usize,
    k: usize,
    strict: usize,
    tol: T,
    loose: T,
    rng: &mut ChaCha8Rng,
    start: Option<Block<T>>,
) -> Result<Option<(RitzState<T>, usize)>> {
    let n = a.dim();
    let k = k.clamp(want.min(n), n);
    let mut x: Block<T> = start.unwrap_or_default();
    x.truncate(k);
    while x.len() < k {
        x.push(random_vector(n, rng));
    }
    orthonormalize(&mut x, rng);
    let hi = a.gershgorin_upper();
    let mut state = rayleigh_ritz(a, &x)?;
    let want = want.min(k);
    let strict = strict.min(want);
    let mut checkpoint = T::infinity();
    for sweep in 0..MAX_SWEEPS {
        let mut worst_ratio = T::zero();
        for j in 0..want {
            let t = if j < strict { tol } else { loose };
            worst_ratio = worst_ratio.max(residual(&state, j) / tol_for(state.values[j], t));
        }
        if worst_ratio <= T::one() {
            return Ok(Some((state, sweep)));
        }
        if sweep == 2 && state.values[k - 1] - state.values[want - 1] <= T::lit(1e-6) * (T::one() + state.values[k - 1].abs()) {
            // wanted values share a level with the block edge
            return Ok(None);
        }
        if sweep > 0 && sweep % STALL_WINDOW == 0 {
            // a block edge inside a degenerate level cannot separate it
            if worst_ratio > checkpoint / T::lit(2.0) {
                log::debug!("block of {k} stalled at sweep {sweep} (residual ratio {worst_ratio})");
                return Ok(None);
            }
            checkpoint = worst_ratio;
        }
        let lo = state.values[0];
        let cut = state.values[k - 1];
        if !(cut < hi) || k == n {
            // whole space in the block: Rayleigh–Ritz is already exact
            let mut h = a.to_dense();
            h.symmetrize();
            let eig = dense_eig(&h)?;
            let x: Block<T> = (0..n).map(|j| eig.vectors.column(j)).collect();
            return Ok(Some((rayleigh_ritz(a, &x)?, sweep)));
        }
        let mut y = chebyshev_filter(a, &state.x, FILTER_DEGREE, lo, cut, hi)?;
        orthonormalize(&mut y, rng);
        state = rayleigh_ritz(a, &y)?;
    }
    let worst = (0..want).map(|j| residual(&state, j)).fold(T::zero(), T::max);
    log::debug!("block of {k} hit {MAX_SWEEPS} sweeps, worst residual {}", worst.as_f64());
    Ok(None)
}

/// Lowest spectral cluster of `a` below the detected (or fixed) window.
pub fn lowest_cluster<T: Real>(a: &SparseHermitian<T>, opts: &SolverOptions<T>) -> Result<SpectralSubspace<T>> {
    let n = a.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let tol = T::lit(RESIDUAL_TOL);
    let loose = T::lit(1e-4);
    let mut want = match opts.expected_dim {
        Some(e) => 2 * e + 8,
        None => 16,
    }
    .min(n);
    let mut start: Option<Block<T>> = None;
    let mut sweeps_total = 0;
    let cap = n.min(MAX_CANDIDATES);
    let block_for = |want: usize| (want + (want / 4).max(8)).min(n);
    let mut k = block_for(want);
    // `strict == 0` while locating the window, `d + 1` once it is known
    let mut strict = 0;
    loop {
        let Some((state, sweeps)) = subspace_iteration(a, want, k, strict, tol, loose, &mut rng, start.take())? else {
            // the block edge sits inside a (near-)degenerate level; widen the block
            if k >= n {
                return Err(Error::NotConverged(format!("block of {k} for {want} candidates did not converge")));
            }
            k = (2 * k).min(n);
            log::debug!("widening block to {k}");
            continue;
        };
        sweeps_total += sweeps;
        let cands = state.values[..want.min(state.values.len())].to_vec();
        match detect_window(&cands, opts.window) {
            Ok((d, gap_edge, c_l)) if d < cands.len() => {
                if strict > d {
                    return Ok(finish(a, &state, d, gap_edge, c_l, cands, sweeps_total));
                }
                strict = d + 1;
                start = Some(state.x);
            }
            Ok(_) | Err(Error::NoGapDetected { .. }) if want < cap => {
                want = (want * 2).min(cap);
                k = k.max(block_for(want));
                strict = 0;
                start = Some(state.x);
                log::debug!("no window among {} candidates, widening to {want}", cands.len());
            }
            Ok(_) => {
                return Err(Error::NoGapDetected { threshold: GAP_FACTOR, candidates: cands.len() });
            }
            Err(e) => return Err(e),
        }
    }
}

fn finish<T: Real>(
    a: &SparseHermitian<T>,
    state: &RitzState<T>,
    d: usize,
    gap_edge: T,
    c_l: T,
    candidates: Vec<T>,
    sweeps: usize,
) -> SpectralSubspace<T> {
    let n = a.dim();
    let w = a.cell_volume();
    let inv = T::one() / w.sqrt();
    let cols: Vec<Vec<Cx<T>>> = state.x[..d].iter().map(|c| c.iter().map(|&v| v * inv).collect()).collect();
    SpectralSubspace {
        eigenvalues: state.values[..d].to_vec(),
        basis: DenseMatrix::from_columns(n, &cols),
        residuals: (0..d).map(|j| residual(state, j)).collect(),
        gap_edge,
        window: (-c_l, c_l),
        cell_volume: w,
        candidates,
        sweeps,
    }
}

/// Dense oracle: same window logic on the full spectrum.
pub fn lowest_cluster_dense<T: Real>(a: &SparseHermitian<T>, window: Window<T>) -> Result<SpectralSubspace<T>> {
    let mut h = a.to_dense();
    h.symmetrize();
    let eig = dense_eig(&h)?;
    let n = a.dim();
    let cands: Vec<T> = eig.values.iter().copied().take(MAX_CANDIDATES.min(n)).collect();
    let (d, gap_edge, c_l) = detect_window(&cands, window)?;
    let x: Block<T> = (0..n).map(|j| eig.vectors.column(j)).collect();
    let ax = apply_block(a, &x)?;
    let state = RitzState { x, ax, values: eig.values };
    Ok(finish(a, &state, d, gap_edge, c_l, cands, 0))
}
