//! p-sweeps over the lattice models, rate fits and verdicts for each
//! semiclassical law.
//!
//! Studies run on a [`Sweep`], one solved quantum space per `p`, so several
//! studies can share the expensive eigensolves. Everything here is concrete
//! `f64`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bergman::{
    decay_fit, diagonal_residual, expansion_residual, fock_kernel_field, model_kernel, projector_kernel, FactoredKernel,
    ModelKernelParams, Poly, ResidualOptions, TorusGrid,
};
use crate::eigensolve::{lowest_cluster, lowest_cluster_dense, SolverOptions, SpectralSubspace, Window};
use crate::error::{Error, Result};
use crate::fit::{linear_fit, rate_fit, LinearFit};
use crate::fock::{calibrated_poisson_sign, commutator, interior_max_abs, FockSymbol, FockTruncation};
use crate::geometry::{ModelKind, SymplecticModel};
use crate::lattice::{build_links, renormalized_laplacian, GridPolicy, LatticeBundle};
use crate::linalg::{op_norm, DenseMatrix};
use crate::scalar::cx;
use crate::symbol::{Point, Symbol};
use crate::toeplitz::{
    commutator_defect, product_defect, symbol_recover, toeplitz_assemble, weighted_norm_factored,
};

type Model = SymplecticModel<f64>;
type Subspace = SpectralSubspace<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
    ExactVanishing,
    /// Descriptive studies with no pass/fail content.
    Recorded,
}

impl Verdict {
    pub fn is_ok(self) -> bool {
        matches!(self, Verdict::Pass | Verdict::ExactVanishing | Verdict::Recorded)
    }

    fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            (ExactVanishing, ExactVanishing) => ExactVanishing,
            _ => Pass,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
    /// Non-binding checks are recorded but do not enter the verdict.
    pub binding: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub study: String,
    pub model_hash: String,
    pub symbols: Vec<String>,
    pub p: Vec<u32>,
    pub grid: Vec<usize>,
    pub dim: Vec<usize>,
    /// Named metric columns, one value per `p`.
    pub columns: BTreeMap<String, Vec<f64>>,
    pub fit: Option<LinearFit>,
    /// `p` values dropped from the fit as exact zeros.
    pub dropped: Vec<f64>,
    pub band: Option<(f64, f64)>,
    pub checks: Vec<Check>,
    pub poisson_sign: i8,
    pub verdict: Verdict,
}

impl ConvergenceReport {
    fn new(study: &str, model: &Model, sweep_p: &[u32]) -> Self {
        Self {
            study: study.into(),
            model_hash: model_hash(model),
            symbols: vec![],
            p: sweep_p.to_vec(),
            grid: vec![],
            dim: vec![],
            columns: BTreeMap::new(),
            fit: None,
            dropped: vec![],
            band: None,
            checks: vec![],
            poisson_sign: calibrated_poisson_sign(),
            verdict: Verdict::Pass,
        }
    }

    fn check(&mut self, name: impl Into<String>, value: f64, bound: f64, pass: bool, binding: bool) -> bool {
        self.checks.push(Check { name: name.into(), value, bound, pass, binding });
        pass
    }

    fn binding_checks_pass(&self) -> bool {
        self.checks.iter().filter(|c| c.binding).all(|c| c.pass)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.get(name).map(|v| v.as_slice())
    }

    pub fn find_check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// One row per `p`: `p,M,d,<columns...>`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("p,M,d");
        for k in self.columns.keys() {
            out.push(',');
            out.push_str(k);
        }
        out.push('\n');
        for (i, p) in self.p.iter().enumerate() {
            out.push_str(&format!("{p},{},{}", self.grid.get(i).copied().unwrap_or(0), self.dim.get(i).copied().unwrap_or(0)));
            for v in self.columns.values() {
                out.push_str(&format!(",{:.17e}", v[i]));
            }
            out.push('\n');
        }
        out
    }
}

/// Verdict bands and thresholds; defaults follow the documented study design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub min_r2: f64,
    pub product_band: (f64, f64),
    pub commutator_band: (f64, f64),
    pub ordering_band: (f64, f64),
    pub kernel_slope: f64,
    pub diagonal_slope: f64,
    pub symbol_slope: f64,
    pub gap_rel: f64,
    pub width_slope: f64,
    pub density: f64,
    pub decay_r2: f64,
    pub decay_spread: f64,
    pub weighted_factor: f64,
    pub refinement: f64,
    pub plane_kernel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            min_r2: 0.8,
            product_band: (-1.2, -0.8),
            commutator_band: (-2.3, -1.7),
            ordering_band: (-1.3, -0.7),
            kernel_slope: -0.4,
            diagonal_slope: -0.9,
            symbol_slope: -0.4,
            gap_rel: 0.1,
            width_slope: 0.1,
            density: 0.05,
            decay_r2: 0.9,
            decay_spread: 0.25,
            weighted_factor: 2.0,
            refinement: 0.1,
            plane_kernel: 1e-10,
        }
    }
}

pub fn model_hash(model: &Model) -> String {
    let text = format!("{:?}|{:e}|{:e}|{}", model.kind(), model.b0(), model.b1(), model.flux());
    hex::encode(&Sha256::digest(text.as_bytes())[..8])
}

/// Where quantum spaces come from; the runner plugs in a cache here.
pub trait SubspaceSource: Sync {
    fn solve(&self, model: &Model, bundle: &LatticeBundle<f64>, opts: &SolverOptions<f64>) -> Result<Subspace>;
}

pub struct DirectSolve;

impl SubspaceSource for DirectSolve {
    fn solve(&self, model: &Model, bundle: &LatticeBundle<f64>, opts: &SolverOptions<f64>) -> Result<Subspace> {
        lowest_cluster(&renormalized_laplacian(bundle, model), opts)
    }
}

#[derive(Clone)]
pub struct SweepPoint {
    pub p: u32,
    pub bundle: LatticeBundle<f64>,
    pub subspace: Subspace,
    pub points: Vec<Point<f64>>,
}

impl SweepPoint {
    pub fn m(&self) -> usize {
        self.bundle.m()
    }

    pub fn solve(model: &Model, p: u32, m: usize, seed: u64, source: &dyn SubspaceSource) -> Result<Self> {
        let bundle = build_links(model, p, m, 1)?;
        let opts = SolverOptions { expected_dim: Some(p as usize * model.flux().max(1) as usize), window: Window::Auto, seed };
        let subspace = source.solve(model, &bundle, &opts)?;
        let points = (0..bundle.nodes()).map(|x| bundle.point(x)).collect();
        Ok(Self { p, bundle, subspace, points })
    }
}

pub struct Sweep {
    pub model: Model,
    pub policy: GridPolicy,
    pub seed: u64,
    pub points: Vec<SweepPoint>,
}

impl Sweep {
    /// Solves every `p` (in parallel) on the policy grid.
    pub fn build(model: &Model, ps: &[u32], policy: GridPolicy, seed: u64, source: &dyn SubspaceSource) -> Result<Self> {
        if model.kind() != ModelKind::Torus2 {
            return Err(Error::InvalidConfig("lattice sweeps need the torus model".into()));
        }
        check_p_list(ps, 1)?;
        let points = ps
            .par_iter()
            .map(|&p| {
                let m = policy.grid_size(model, p);
                log::info!("solving p={p} on M={m}");
                SweepPoint::solve(model, p, m, seed, source)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { model: model.clone(), policy, seed, points })
    }

    /// The points whose `p` is in `ps`, in sweep order.
    pub fn subset(&self, ps: &[u32]) -> Result<Sweep> {
        let points: Vec<SweepPoint> = self.points.iter().filter(|s| ps.contains(&s.p)).cloned().collect();
        if points.len() != ps.len() {
            return Err(Error::InvalidConfig(format!("p list {ps:?} is not part of the sweep {:?}", self.ps())));
        }
        Ok(Sweep { model: self.model.clone(), policy: self.policy, seed: self.seed, points })
    }

    pub fn ps(&self) -> Vec<u32> {
        self.points.iter().map(|s| s.p).collect()
    }

    fn report(&self, study: &str) -> ConvergenceReport {
        let mut r = ConvergenceReport::new(study, &self.model, &self.ps());
        r.grid = self.points.iter().map(|s| s.m()).collect();
        r.dim = self.points.iter().map(|s| s.subspace.dim()).collect();
        r
    }

    /// Same `p` as the first point, on a grid twice as fine.
    fn refined_first(&self, source: &dyn SubspaceSource) -> Result<SweepPoint> {
        let first = &self.points[0];
        SweepPoint::solve(&self.model, first.p, 2 * first.m(), self.seed, source)
    }
}

fn check_p_list(ps: &[u32], min_len: usize) -> Result<()> {
    if ps.len() < min_len || ps.windows(2).any(|w| w[0] >= w[1]) || ps.first() == Some(&0) {
        return Err(Error::InvalidConfig(format!("p list {ps:?} must be strictly increasing, positive, length >= {min_len}")));
    }
    Ok(())
}

/// Rate fit of `values` against `p` with the `R²` gate.
fn rate_verdict(r: &mut ConvergenceReport, values: &[f64], accept: impl Fn(f64) -> bool, tol: &Tolerances) -> Result<Verdict> {
    let pts: Vec<(f64, f64)> = r.p.iter().zip(values).map(|(&p, &v)| (p as f64, v)).collect();
    match rate_fit(&pts) {
        Err(Error::AllZero { .. }) => Ok(Verdict::ExactVanishing),
        Err(Error::InsufficientSamples(_)) => Ok(Verdict::Inconclusive),
        Err(e) => Err(e),
        Ok(fit) => {
            r.fit = Some(fit.fit);
            r.dropped = fit.dropped;
            if fit.fit.r2 < tol.min_r2 {
                Ok(Verdict::Inconclusive)
            } else if accept(fit.fit.slope) {
                Ok(Verdict::Pass)
            } else {
                Ok(Verdict::Fail)
            }
        }
    }
}

fn finish(mut r: ConvergenceReport, base: Verdict) -> ConvergenceReport {
    r.verdict = if r.binding_checks_pass() { base } else { base.and(Verdict::Fail) };
    r
}

fn refinement_check(
    r: &mut ConvergenceReport,
    sweep: &Sweep,
    source: &dyn SubspaceSource,
    coarse: f64,
    metric: impl Fn(&SweepPoint) -> Result<f64>,
    tol: &Tolerances,
) -> Result<()> {
    let fine = sweep.refined_first(source)?;
    let v = metric(&fine)?;
    let scale = coarse.abs().max(1e-12);
    let rel = (v - coarse).abs() / scale;
    // both tiny: nothing to compare
    let ok = rel < tol.refinement || (coarse.abs() < 1e-12 && v.abs() < 1e-12);
    r.check(format!("refinement_p{}_M{}", sweep.points[0].p, fine.m()), rel, tol.refinement, ok, true);
    Ok(())
}

pub fn gap_study(sweep: &Sweep, tol: &Tolerances) -> Result<ConvergenceReport> {
    check_p_list(&sweep.ps(), 3)?;
    let model = &sweep.model;
    let mut r = sweep.report("gap");
    let width: Vec<f64> = sweep.points.iter().map(|s| s.subspace.eigenvalues.last().unwrap() - s.subspace.eigenvalues[0]).collect();
    let edge: Vec<f64> = sweep.points.iter().map(|s| s.subspace.gap_edge).collect();
    r.columns.insert("cluster_width".into(), width.clone());
    r.columns.insert("gap_edge".into(), edge.clone());
    r.columns.insert("c_l".into(), sweep.points.iter().map(|s| s.subspace.c_l()).collect());

    let n = model.flux();
    for s in &sweep.points {
        let expect = (s.p as i64 * n) as f64;
        r.check(format!("dim_p{}", s.p), s.subspace.dim() as f64, expect, s.subspace.dim() as f64 == expect, true);
    }
    let first = &sweep.points[0];
    if first.bundle.nodes() <= 1600 {
        let dense = lowest_cluster_dense(&renormalized_laplacian(&first.bundle, model), Window::Auto)?;
        let same = dense.dim() == first.subspace.dim();
        let diff = if same {
            dense.eigenvalues.iter().zip(&first.subspace.eigenvalues).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        } else {
            f64::INFINITY
        };
        r.check(format!("dense_oracle_p{}", first.p), diff, 1e-8, diff <= 1e-8, true);
    }

    let ps: Vec<f64> = sweep.ps().iter().map(|&p| p as f64).collect();
    let width_fit = linear_fit(&ps.iter().copied().zip(width.iter().copied()).collect::<Vec<_>>())?;
    r.check("width_slope", width_fit.slope, tol.width_slope, width_fit.slope <= tol.width_slope, true);
    let c_l = width.iter().copied().fold(0.0, f64::max);
    let mu0 = model.mu0();
    let mut verdict = Verdict::Pass;
    if model.is_constant_field() {
        let fit = linear_fit(&ps.iter().copied().zip(edge.iter().copied()).collect::<Vec<_>>())?;
        r.fit = Some(fit);
        let target = 2.0 * mu0;
        r.band = Some((target * (1.0 - tol.gap_rel), target * (1.0 + tol.gap_rel)));
        verdict = if fit.r2 < tol.min_r2 {
            Verdict::Inconclusive
        } else if (fit.slope - target).abs() <= tol.gap_rel * target {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
    } else {
        for (s, &e) in sweep.points.iter().zip(&edge) {
            let bound = 2.0 * s.p as f64 * mu0 - c_l;
            r.check(format!("gap_bound_p{}", s.p), e, bound, e >= bound, true);
        }
    }
    Ok(finish(r, verdict))
}

pub fn product_study(sweep: &Sweep, f: &Symbol<f64>, g: &Symbol<f64>, source: &dyn SubspaceSource, tol: &Tolerances) -> Result<ConvergenceReport> {
    check_p_list(&sweep.ps(), 3)?;
    let mut r = sweep.report("product");
    r.symbols = vec![f.id().into(), g.id().into()];
    let metric = |s: &SweepPoint| product_defect(&s.subspace, &s.points, f, g, s.p);
    let vals = sweep.points.par_iter().map(metric).collect::<Result<Vec<_>>>()?;
    r.columns.insert("product_defect".into(), vals.clone());
    r.band = Some(tol.product_band);
    let (lo, hi) = tol.product_band;
    let v = rate_verdict(&mut r, &vals, |s| (lo..=hi).contains(&s), tol)?;
    if v != Verdict::ExactVanishing {
        refinement_check(&mut r, sweep, source, vals[0], metric, tol)?;
    }
    Ok(finish(r, v))
}

pub fn commutator_study(sweep: &Sweep, f: &Symbol<f64>, g: &Symbol<f64>, source: &dyn SubspaceSource, tol: &Tolerances) -> Result<ConvergenceReport> {
    check_p_list(&sweep.ps(), 3)?;
    if !f.is_scalar() || !g.is_scalar() {
        return Err(Error::InvalidConfig("commutator study needs scalar symbols".into()));
    }
    let bracket = sweep.model.poisson_symbol(f, g)?;
    let mut r = sweep.report("commutator");
    r.symbols = vec![f.id().into(), g.id().into(), bracket.id().into()];
    let metric = |s: &SweepPoint| commutator_defect(&s.subspace, &s.points, f, g, &bracket, s.p);
    let vals = sweep.points.par_iter().map(metric).collect::<Result<Vec<_>>>()?;
    r.columns.insert("commutator_defect".into(), vals.clone());
    r.band = Some(tol.commutator_band);
    let (lo, hi) = tol.commutator_band;
    let v = rate_verdict(&mut r, &vals, |s| (lo..=hi).contains(&s), tol)?;
    if v != Verdict::ExactVanishing {
        refinement_check(&mut r, sweep, source, vals[0], metric, tol)?;
    }
    Ok(finish(r, v))
}

/// Sampling radius for kernel comparisons: a few model-kernel widths, kept
/// inside the injectivity radius.
pub fn kernel_window(p: u32, mu0: f64) -> f64 {
    (4.0 / (p as f64 * mu0).sqrt()).min(0.45)
}

pub fn kernel_study(sweep: &Sweep, tol: &Tolerances) -> Result<ConvergenceReport> {
    check_p_list(&sweep.ps(), 3)?;
    let model = &sweep.model;
    let mut r = sweep.report("kernel");
    let mu0 = model.mu0();
    let rows = sweep
        .points
        .par_iter()
        .map(|s| {
            let mut opts = ResidualOptions::defaults(s.p, mu0);
            opts.window = kernel_window(s.p, mu0);
            let m = s.m();
            let x0 = s.bundle.node(m / 4, m / 3);
            let field = projector_kernel(&s.subspace, &s.bundle, model, x0, opts.window)?;
            let q = [Poly::one()];
            Ok((expansion_residual(&field, &q, &opts), diagonal_residual(&field, &q, &opts), field.conjugate_symmetry_defect()))
        })
        .collect::<Result<Vec<_>>>()?;
    let res: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let diag: Vec<f64> = rows.iter().map(|r| r.1).collect();
    r.columns.insert("residual".into(), res.clone());
    r.columns.insert("diagonal_residual".into(), diag.clone());
    r.columns.insert("hermitian_defect".into(), rows.iter().map(|r| r.2).collect());
    for (s, row) in sweep.points.iter().zip(&rows) {
        r.check(format!("conjugate_symmetry_p{}", s.p), row.2, 1e-10, row.2 <= 1e-10, true);
    }
    r.band = Some((f64::NEG_INFINITY, tol.kernel_slope));
    let v = rate_verdict(&mut r, &res, |s| s <= tol.kernel_slope, tol)?;
    let main_fit = r.fit;
    let mut dr = r.clone();
    let dv = rate_verdict(&mut dr, &diag, |s| s <= tol.diagonal_slope, tol)?;
    let dslope = dr.fit.map_or(f64::NEG_INFINITY, |f| f.slope);
    r.check("diagonal_slope", dslope, tol.diagonal_slope, dv.is_ok(), true);
    if let Some(f) = dr.fit {
        r.check("diagonal_r2", f.r2, tol.min_r2, f.r2 >= tol.min_r2, false);
    }
    r.fit = main_fit;
    Ok(finish(r, v))
}

/// The plane: Fock-series kernel against the model kernel.
pub fn plane_kernel_study(model: &Model, ps: &[u32], tol: &Tolerances) -> Result<ConvergenceReport> {
    check_p_list(ps, 1)?;
    let mut r = ConvergenceReport::new("kernel", model, ps);
    let b0 = model.b0();
    let vals = ps
        .par_iter()
        .map(|&p| {
            let t = FockTruncation::new(p, b0, 200)?;
            let w = kernel_window(p, b0);
            let field = fock_kernel_field(&t, w, w / 6.0)?;
            let mut opts = ResidualOptions::defaults(p, b0);
            opts.window = w;
            Ok(expansion_residual(&field, &[Poly::one()], &opts))
        })
        .collect::<Result<Vec<_>>>()?;
    r.columns.insert("residual".into(), vals.clone());
    let worst = vals.iter().copied().fold(0.0, f64::max);
    r.check("plane_residual", worst, tol.plane_kernel, worst <= tol.plane_kernel, true);
    Ok(finish(r, Verdict::ExactVanishing))
}

pub fn symbol_study(sweep: &Sweep, f: &Symbol<f64>, source: &dyn SubspaceSource, tol: &Tolerances) -> Result<ConvergenceReport> {
    check_p_list(&sweep.ps(), 3)?;
    let mut r = sweep.report("symbol");
    r.symbols = vec![f.id().into()];
    let sup_f = f.norm_estimate(0.0, 1.0, 64)?.0;
    let metric = |s: &SweepPoint| -> Result<f64> {
        let t = toeplitz_assemble(&s.subspace, &s.points, f, s.p)?;
        let g0 = symbol_recover(&t, &s.subspace)?;
        Ok(g0.iter().zip(&s.points).map(|(g, &x)| (g - f.eval_scalar(x)).norm()).fold(0.0, f64::max))
    };
    let vals = sweep.points.par_iter().map(metric).collect::<Result<Vec<_>>>()?;
    r.columns.insert("recovery_error".into(), vals.clone());
    r.columns.insert("relative_error".into(), vals.iter().map(|v| v / sup_f.max(1e-300)).collect());
    r.band = Some((f64::NEG_INFINITY, tol.symbol_slope));
    let v = rate_verdict(&mut r, &vals, |s| s <= tol.symbol_slope, tol)?;
    if v != Verdict::ExactVanishing {
        refinement_check(&mut r, sweep, source, vals[0], metric, tol)?;
    }
    Ok(finish(r, v))
}

/// `sup_x |p⁻¹P(x,x) − τ(x)/2π|` relative to `B0/2π`, checked at the largest `p`.
pub fn density_study(sweep: &Sweep, tol: &Tolerances) -> Result<ConvergenceReport> {
    let model = &sweep.model;
    let mut r = sweep.report("density");
    let two_pi = 2.0 * std::f64::consts::PI;
    let scale = model.b0() / two_pi;
    let vals: Vec<f64> = sweep
        .points
        .iter()
        .map(|s| {
            (0..s.bundle.nodes())
                .map(|x| {
                    let k: f64 = s.subspace.basis.row(x).iter().map(|v| v.norm_sqr()).sum();
                    (k / s.p as f64 - model.tau(s.points[x]) / two_pi).abs() / scale
                })
                .fold(0.0, f64::max)
        })
        .collect();
    r.columns.insert("density_error".into(), vals.clone());
    let last = *vals.last().ok_or(Error::InsufficientSamples(0))?;
    let p_last = *r.p.last().unwrap();
    r.check(format!("density_p{p_last}"), last, tol.density, last <= tol.density, true);
    if vals.len() >= 2 {
        if let Ok(f) = rate_fit(&r.p.iter().zip(&vals).map(|(&p, &v)| (p as f64, v)).collect::<Vec<_>>()) {
            r.fit = Some(f.fit);
        }
    }
    Ok(finish(r, Verdict::Pass))
}

/// Off-diagonal decay of the projector kernel, fitted in scaled distance
/// `√p·d ∈ (1, 2]`.
pub fn decay_study(sweep: &Sweep, tol: &Tolerances) -> Result<ConvergenceReport> {
    let mut r = sweep.report("decay");
    let fits = sweep
        .points
        .iter()
        .map(|s| {
            let sp = (s.p as f64).sqrt();
            decay_fit(&FactoredKernel::projector(&s.subspace), TorusGrid { m: s.m() }, s.p, 1.0 / sp, Some(2.0 / sp))
        })
        .collect::<Result<Vec<_>>>()?;
    r.columns.insert("mu_hat".into(), fits.iter().map(|f| f.mu_hat).collect());
    r.columns.insert("c_hat".into(), fits.iter().map(|f| f.c_hat).collect());
    r.columns.insert("r2".into(), fits.iter().map(|f| f.r2).collect());
    r.columns.insert("samples".into(), fits.iter().map(|f| f.samples as f64).collect());
    for (s, f) in sweep.points.iter().zip(&fits) {
        r.check(format!("mu_positive_p{}", s.p), f.mu_hat, 0.0, f.mu_hat > 0.0, true);
        r.check(format!("r2_p{}", s.p), f.r2, tol.decay_r2, f.r2 >= tol.decay_r2, true);
    }
    let lo = fits.iter().map(|f| f.mu_hat).fold(f64::INFINITY, f64::min);
    let hi = fits.iter().map(|f| f.mu_hat).fold(f64::NEG_INFINITY, f64::max);
    let spread = (hi - lo) / lo.abs().max(1e-300);
    r.check("mu_spread", spread, tol.decay_spread, spread <= tol.decay_spread, true);
    Ok(finish(r, Verdict::Pass))
}

/// `3×3` base points spread over the torus.
pub fn base_point_set(m: usize) -> Vec<(usize, usize)> {
    let s = [0, m / 3, 2 * m / 3];
    s.iter().flat_map(|&j| s.iter().map(move |&i| (i, j))).collect()
}

/// Weighted norms of `T_f` over `|α| ≤ 0.5√(μ0 p)` and a 9-point base set.
pub fn weighted_study(sweep: &Sweep, f: &Symbol<f64>, alphas_per_side: usize, tol: &Tolerances) -> Result<ConvergenceReport> {
    let model = &sweep.model;
    let mut r = sweep.report("weighted");
    r.symbols = vec![f.id().into()];
    let sup_f = f.norm_estimate(0.0, 1.0, 64)?.0;
    let rows = sweep
        .points
        .par_iter()
        .map(|s| {
            let t = toeplitz_assemble(&s.subspace, &s.points, f, s.p)?;
            let plain = op_norm(&t.matrix);
            let a_max = 0.5 * (model.mu0() * s.p as f64).sqrt();
            let k = alphas_per_side.max(1) as i64;
            let alphas: Vec<f64> = (-k..=k).map(|i| a_max * i as f64 / k as f64).collect();
            let mut worst: f64 = 0.0;
            for (i, j) in base_point_set(s.m()) {
                let y = s.points[s.bundle.node(i, j)];
                let dist: Vec<f64> = s.points.iter().map(|&x| model.geodesic_distance(x, y)).collect();
                for &a in &alphas {
                    worst = worst.max(weighted_norm_factored(&s.subspace, &t.matrix, &dist, a)?);
                }
            }
            Ok((plain, worst, a_max))
        })
        .collect::<Result<Vec<_>>>()?;
    let ratio: Vec<f64> = rows.iter().map(|r| r.1 / r.0).collect();
    r.columns.insert("norm".into(), rows.iter().map(|r| r.0).collect());
    r.columns.insert("weighted_norm".into(), rows.iter().map(|r| r.1).collect());
    r.columns.insert("alpha_max".into(), rows.iter().map(|r| r.2).collect());
    r.columns.insert("ratio".into(), ratio.clone());
    let (first, last) = (ratio[0], *ratio.last().unwrap());
    let q = (last / first).max(first / last);
    r.check("ratio_stability", q, tol.weighted_factor, q <= tol.weighted_factor, true);
    let worst = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    r.check("weighted_below_2sup", worst, 2.0 * sup_f, worst <= 2.0 * sup_f, false);
    Ok(finish(r, Verdict::Pass))
}

/// `sup_x ‖f(x)g(x) − g(x)f(x)‖` over a sample grid (matrix symbols).
pub fn commutator_sup(f: &Symbol<f64>, g: &Symbol<f64>, samples: usize) -> f64 {
    let c = f.mul(g).add(&g.mul(f).scale(cx(-1.0, 0.0)));
    let r = c.rank();
    let mut best: f64 = 0.0;
    for j in 0..samples {
        for i in 0..samples {
            let v = c.eval([i as f64 / samples as f64, j as f64 / samples as f64]);
            let m = DenseMatrix::from_row_major(r, r, v);
            best = best.max(op_norm(&m));
        }
    }
    best
}

/// Rank-2 matrix symbols: both product orders decay while `T_{fg} − T_{gf}`
/// stays away from zero.
pub fn ordering_study(sweep: &Sweep, f: &Symbol<f64>, g: &Symbol<f64>, tol: &Tolerances) -> Result<ConvergenceReport> {
    check_p_list(&sweep.ps(), 3)?;
    let rank = f.rank();
    if g.rank() != rank || rank < 2 {
        return Err(Error::RankMismatch { symbol: g.rank(), bundle: rank });
    }
    let mut r = sweep.report("ordering");
    r.symbols = vec![f.id().into(), g.id().into()];
    let rows = sweep
        .points
        .par_iter()
        .map(|s| {
            let sub = s.subspace.replicate(rank);
            let fg = product_defect(&sub, &s.points, f, g, s.p)?;
            let gf = product_defect(&sub, &s.points, g, f, s.p)?;
            let a = toeplitz_assemble(&sub, &s.points, &f.mul(g), s.p)?.matrix;
            let b = toeplitz_assemble(&sub, &s.points, &g.mul(f), s.p)?.matrix;
            Ok((fg, gf, op_norm(&a.sub(&b))))
        })
        .collect::<Result<Vec<_>>>()?;
    let fg: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let gf: Vec<f64> = rows.iter().map(|r| r.1).collect();
    r.columns.insert("defect_fg".into(), fg.clone());
    r.columns.insert("defect_gf".into(), gf.clone());
    r.columns.insert("ordering_gap".into(), rows.iter().map(|r| r.2).collect());
    r.band = Some(tol.ordering_band);
    let (lo, hi) = tol.ordering_band;
    let v1 = rate_verdict(&mut r, &fg, |s| (lo..=hi).contains(&s), tol)?;
    let fit_fg = r.fit;
    let v2 = rate_verdict(&mut r, &gf, |s| (lo..=hi).contains(&s), tol)?;
    if let Some(f2) = r.fit {
        r.check("slope_gf", f2.slope, hi, v2.is_ok(), false);
    }
    r.fit = fit_fg;
    let floor = 0.5 * commutator_sup(f, g, 64);
    let last = rows.last().unwrap().2;
    r.check("ordering_floor", last, floor, last >= floor && floor > 0.0, true);
    Ok(finish(r, v1.and(v2)))
}

/// Product-defect constants `median_p(p·defect)` for `cos(2πλx)` against `g`.
pub fn constants_study(sweep: &Sweep, lambdas: &[i32], g: &Symbol<f64>) -> Result<ConvergenceReport> {
    let mut r = sweep.report("constants");
    r.symbols = vec![g.id().into()];
    let mut c_hat = Vec::new();
    for &l in lambdas {
        let f = Symbol::cos_mode(l, 0).with_id(format!("cos(2pi*{l}x)"));
        let vals = sweep.points.par_iter().map(|s| product_defect(&s.subspace, &s.points, &f, g, s.p)).collect::<Result<Vec<_>>>()?;
        let mut scaled: Vec<f64> = sweep.points.iter().zip(&vals).map(|(s, v)| s.p as f64 * v).collect();
        scaled.sort_by(|a, b| a.total_cmp(b));
        let median = scaled[scaled.len() / 2];
        c_hat.push(median);
        r.columns.insert(format!("defect_lambda{l}"), vals.clone());
        if let Ok(fit) = rate_fit(&sweep.ps().iter().zip(&vals).map(|(&p, &v)| (p as f64, v)).collect::<Vec<_>>()) {
            r.check(format!("slope_lambda{l}"), fit.fit.slope, -1.0, (fit.fit.slope + 1.0).abs() <= 0.3, false);
        }
        r.check(format!("c_hat_lambda{l}"), median, 0.0, true, false);
    }
    let monotone = c_hat.windows(2).all(|w| w[1] >= w[0]);
    r.check("c_hat_nondecreasing", monotone as u8 as f64, 1.0, monotone, false);
    r.verdict = Verdict::Recorded;
    Ok(r)
}

/// Closed-form, quadrature and series routes through the Fock oracle.
pub fn fock_verify(ps: &[u32], b0: f64, k_max: usize) -> Result<ConvergenceReport> {
    let model = SymplecticModel::plane(b0)?;
    let mut r = ConvergenceReport::new("fock-verify", &model, ps);
    let lib = [FockSymbol::One, FockSymbol::Z, FockSymbol::Zbar, FockSymbol::AbsZ2, FockSymbol::X, FockSymbol::Y, FockSymbol::Gauss(0.7)];
    let rows = ps
        .par_iter()
        .map(|&p| {
            let t = FockTruncation::new(p, b0, k_max)?;
            let mut quad: f64 = 0.0;
            for sym in lib {
                let interior = t.dim() - sym.degree();
                let diff = t.quadrature(&sym.to_symbol())?.sub(&t.exact(sym));
                quad = quad.max(interior_max_abs(&diff, interior));
            }
            let scale = (p as f64 * b0).sqrt();
            let params = ModelKernelParams::new(vec![b0], b0)?;
            let (mut series, mut model_gap): (f64, f64) = (0.0, 0.0);
            for i in 0..5 {
                for j in 0..5 {
                    let z = cx((i as f64 - 2.0) * 0.5 / scale, (j as f64 - 1.0) * 0.4 / scale);
                    let w = cx((j as f64 - 2.0) * 0.45 / scale, (i as f64 - 3.0) * 0.3 / scale);
                    let closed = t.bergman_closed(z, w);
                    series = series.max((t.bergman_series(z, w)? - closed).norm() / closed.norm().max(1e-300) * (p as f64 * b0));
                    let sp = (p as f64).sqrt();
                    let pm = model_kernel(&params, &[z.re * sp, z.im * sp], &[w.re * sp, w.im * sp]);
                    model_gap = model_gap.max((closed / p as f64 - pm).norm());
                }
            }
            let c = commutator(&t.exact(FockSymbol::X), &t.exact(FockSymbol::Y));
            let bracket = -(calibrated_poisson_sign() as f64) / b0;
            let target = DenseMatrix::identity(t.dim()).scale(cx(0.0, bracket / p as f64));
            let comm = interior_max_abs(&c.sub(&target), t.dim() - 1);
            Ok((quad, series, model_gap, comm))
        })
        .collect::<Result<Vec<_>>>()?;
    let cols = [("quadrature_vs_closed", 1e-10), ("series_vs_closed", 1e-10), ("fock_vs_model_kernel", 1e-12), ("interior_commutator", 1e-12)];
    for (k, (name, bound)) in cols.iter().enumerate() {
        let v: Vec<f64> = rows.iter().map(|r| [r.0, r.1, r.2, r.3][k]).collect();
        let worst = v.iter().copied().fold(0.0, f64::max);
        r.check(*name, worst, *bound, worst <= *bound, true);
        r.columns.insert(name.to_string(), v);
    }
    Ok(finish(r, Verdict::ExactVanishing))
}

/// Convenience entry points that build their own sweep.
pub fn run_gap_study(model: &Model, ps: &[u32]) -> Result<ConvergenceReport> {
    gap_study(&Sweep::build(model, ps, GridPolicy::default(), 0x5eed, &DirectSolve)?, &Tolerances::default())
}

pub fn run_product_study(model: &Model, f: &Symbol<f64>, g: &Symbol<f64>, ps: &[u32]) -> Result<ConvergenceReport> {
    let sweep = Sweep::build(model, ps, GridPolicy::default(), 0x5eed, &DirectSolve)?;
    product_study(&sweep, f, g, &DirectSolve, &Tolerances::default())
}

pub fn run_commutator_study(model: &Model, f: &Symbol<f64>, g: &Symbol<f64>, ps: &[u32]) -> Result<ConvergenceReport> {
    let sweep = Sweep::build(model, ps, GridPolicy::default(), 0x5eed, &DirectSolve)?;
    commutator_study(&sweep, f, g, &DirectSolve, &Tolerances::default())
}

pub fn run_kernel_study(model: &Model, ps: &[u32]) -> Result<ConvergenceReport> {
    match model.kind() {
        ModelKind::FockPlane => plane_kernel_study(model, ps, &Tolerances::default()),
        ModelKind::Torus2 => kernel_study(&Sweep::build(model, ps, GridPolicy::default(), 0x5eed, &DirectSolve)?, &Tolerances::default()),
    }
}

pub fn run_symbol_study(model: &Model, f: &Symbol<f64>, ps: &[u32]) -> Result<ConvergenceReport> {
    let sweep = Sweep::build(model, ps, GridPolicy::default(), 0x5eed, &DirectSolve)?;
    symbol_study(&sweep, f, &DirectSolve, &Tolerances::default())
}
