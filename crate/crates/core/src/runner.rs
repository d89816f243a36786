//! Study orchestration and report files.
//!
//! Each study writes `<study>.csv` (one row per `p`) and `<study>.json`
//! (the full report plus the config hash). The wall-clock time lives only in
//! the `timestamp` key, so summaries from repeated runs of one config are
//! otherwise byte-identical.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::cache::CachedSolve;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::geometry::ModelKind;
use crate::semiclassics::{
    commutator_study, constants_study, decay_study, density_study, fock_verify, gap_study, kernel_study, ordering_study,
    plane_kernel_study, product_study, symbol_study, weighted_study, ConvergenceReport, DirectSolve, SubspaceSource, Sweep,
    Verdict,
};

pub const STUDIES: &[&str] =
    &["gap", "product", "commutator", "kernel", "symbol", "density", "decay", "weighted", "ordering", "constants", "fock-verify"];

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;

/// Expands `all` and rejects unknown names; order follows [`STUDIES`].
pub fn expand_studies(names: &[String]) -> Result<Vec<String>> {
    let mut want = Vec::new();
    for n in names {
        if n == "all" {
            want.extend(STUDIES.iter().map(|s| s.to_string()));
        } else if STUDIES.contains(&n.as_str()) {
            want.push(n.clone());
        } else {
            return Err(Error::InvalidConfig(format!("unknown study {n:?}; expected one of {STUDIES:?} or all")));
        }
    }
    if want.is_empty() {
        return Err(Error::InvalidConfig("no studies selected".into()));
    }
    Ok(STUDIES.iter().filter(|s| want.iter().any(|w| w == *s)).map(|s| s.to_string()).collect())
}

/// 0 when every verdict passes (or vanishes exactly), 2 when something is
/// inconclusive and nothing failed, 1 on any failure.
pub fn exit_code(reports: &[ConvergenceReport]) -> i32 {
    if reports.iter().any(|r| r.verdict == Verdict::Fail) {
        EXIT_ERROR
    } else if reports.iter().any(|r| r.verdict == Verdict::Inconclusive) {
        EXIT_INCONCLUSIVE
    } else {
        EXIT_OK
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    config_hash: &'a str,
    report: &'a ConvergenceReport,
    timestamp: String,
}

#[derive(Serialize)]
struct RunSummary<'a> {
    config_hash: &'a str,
    studies: Vec<(&'a str, Verdict)>,
    exit_code: i32,
    timestamp: String,
}

fn timestamp() -> String {
    let t = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
    format!("unix:{}.{:03}", t.as_secs(), t.subsec_millis())
}

pub struct RunOutcome {
    pub reports: Vec<ConvergenceReport>,
    pub exit_code: i32,
    pub out: PathBuf,
}

fn needs_sweep(study: &str) -> bool {
    !matches!(study, "fock-verify")
}

fn run_one(cfg: &RunConfig, study: &str, sweep: Option<&Sweep>, source: &dyn SubspaceSource) -> Result<ConvergenceReport> {
    let tol = &cfg.tolerances;
    let model = cfg.model.build()?;
    if study == "fock-verify" {
        return fock_verify(&cfg.fock_p, if model.kind() == ModelKind::FockPlane { model.b0() } else { 1.0 }, cfg.fock_k_max);
    }
    if model.kind() == ModelKind::FockPlane {
        return match study {
            "kernel" => plane_kernel_study(&model, &cfg.p, tol),
            _ => Err(Error::InvalidConfig(format!("study {study} needs the torus model"))),
        };
    }
    let sweep = sweep.expect("torus studies get a sweep");
    match study {
        "gap" => gap_study(sweep, tol),
        "product" => product_study(sweep, &cfg.symbol(&cfg.f)?, &cfg.symbol(&cfg.g)?, source, tol),
        "commutator" => commutator_study(sweep, &cfg.symbol(&cfg.f)?, &cfg.symbol(&cfg.g)?, source, tol),
        "kernel" => kernel_study(sweep, tol),
        "symbol" => symbol_study(sweep, &cfg.symbol(&cfg.f)?, source, tol),
        "density" => density_study(sweep, tol),
        "decay" => decay_study(sweep, tol),
        "weighted" => weighted_study(sweep, &cfg.symbol(&cfg.f)?, cfg.alphas_per_side, tol),
        "ordering" => ordering_study(sweep, &cfg.symbol(&cfg.matrix_f)?, &cfg.symbol(&cfg.matrix_g)?, tol),
        "constants" => constants_study(sweep, &cfg.lambdas, &cfg.symbol(&cfg.g)?),
        other => Err(Error::InvalidConfig(format!("unknown study {other}"))),
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; all cores when unset.
    pub jobs: Option<usize>,
    /// Cache root from the command line; beats `BTQ_CACHE` and the config.
    pub cache: Option<PathBuf>,
}

/// Runs the studies and writes their files under `cfg.out`.
pub fn run(cfg: &RunConfig, studies: &[String], opts: &RunOptions) -> Result<RunOutcome> {
    let studies = expand_studies(studies)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| run_inner(cfg, &studies, opts))
}

fn run_inner(cfg: &RunConfig, studies: &[String], opts: &RunOptions) -> Result<RunOutcome> {
    let hash = cfg.hash();
    let model = cfg.model.build()?;
    fs::create_dir_all(&cfg.out)?;
    let cached;
    let source: &dyn SubspaceSource = match CachedSolve::resolve_root(opts.cache.as_deref(), cfg.cache.as_deref()) {
        Some(root) => {
            cached = CachedSolve::new(root)?;
            &cached
        }
        None => &DirectSolve,
    };
    log::info!("config {hash}: studies {studies:?}, p = {:?}", cfg.p);
    let sweep = if model.kind() == ModelKind::Torus2 && studies.iter().any(|s| needs_sweep(s)) {
        Some(Sweep::build(&model, &cfg.p, cfg.policy, cfg.seed, source)?)
    } else {
        None
    };
    let mut reports = Vec::new();
    for study in studies {
        log::info!("running {study}");
        let report = run_one(cfg, study, sweep.as_ref(), source)?;
        log::info!("{study}: {:?}", report.verdict);
        write_report(&cfg.out, &hash, &report)?;
        reports.push(report);
    }
    let code = exit_code(&reports);
    let summary = RunSummary {
        config_hash: &hash,
        studies: reports.iter().map(|r| (r.study.as_str(), r.verdict)).collect(),
        exit_code: code,
        timestamp: timestamp(),
    };
    fs::write(cfg.out.join("summary.json"), serde_json::to_string_pretty(&summary).map_err(|e| Error::Cache(e.to_string()))? + "\n")?;
    fs::write(cfg.out.join("config.txt"), cfg.to_text())?;
    Ok(RunOutcome { reports, exit_code: code, out: cfg.out.clone() })
}

fn write_report(out: &Path, hash: &str, report: &ConvergenceReport) -> Result<()> {
    let json = serde_json::to_string_pretty(&Summary { config_hash: hash, report, timestamp: timestamp() })
        .map_err(|e| Error::Cache(e.to_string()))?;
    fs::write(out.join(format!("{}.json", report.study)), json + "\n")?;
    fs::write(out.join(format!("{}.csv", report.study)), report.to_csv())?;
    Ok(())
}

/// Drops the `timestamp` key so two summaries can be compared.
pub fn strip_timestamp(json: &str) -> String {
    json.lines().filter(|l| !l.trim_start().starts_with("\"timestamp\"")).collect::<Vec<_>>().join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_str;

    #[test]
    fn study_names() {
        let all = expand_studies(&["all".into()]).unwrap();
        assert_eq!(all.len(), STUDIES.len());
        let two = expand_studies(&["kernel".into(), "gap".into(), "gap".into()]).unwrap();
        assert_eq!(two, vec!["gap", "kernel"]);
        assert!(expand_studies(&["nope".into()]).is_err());
        assert!(expand_studies(&[]).is_err());
    }

    #[test]
    fn exit_codes() {
        let model = crate::geometry::SymplecticModel::plane(1.0).unwrap();
        let mut r = crate::semiclassics::plane_kernel_study(&model, &[1], &Default::default()).unwrap();
        assert_eq!(exit_code(std::slice::from_ref(&r)), EXIT_OK);
        r.verdict = Verdict::Inconclusive;
        assert_eq!(exit_code(std::slice::from_ref(&r)), EXIT_INCONCLUSIVE);
        let mut f = r.clone();
        f.verdict = Verdict::Fail;
        assert_eq!(exit_code(&[r, f]), EXIT_ERROR);
    }

    #[test]
    fn repeated_runs_match() {
        let dir = tempfile::tempdir().unwrap();
        let text = |sub: &str| format!("[model]\nkind=torus2\nN=1\n[sweep]\np=2,3,4\n[output]\nout={}\n", dir.path().join(sub).display());
        let a = parse_config_str(&text("a")).unwrap();
        let b = parse_config_str(&text("b")).unwrap();
        let studies = vec!["gap".to_string(), "density".to_string()];
        let ra = run(&a, &studies, &RunOptions { jobs: Some(1), cache: None }).unwrap();
        let cache = dir.path().join("cache");
        let rb = run(&b, &studies, &RunOptions { jobs: Some(3), cache: Some(cache.clone()) }).unwrap();
        assert!(fs::read_dir(&cache).unwrap().count() >= 3);
        assert_eq!(ra.exit_code, rb.exit_code);
        for f in ["gap.json", "density.json", "summary.json", "gap.csv"] {
            let x = fs::read_to_string(ra.out.join(f)).unwrap();
            let y = fs::read_to_string(rb.out.join(f)).unwrap();
            assert_eq!(strip_timestamp(&x), strip_timestamp(&y), "{f}");
        }
    }
}
