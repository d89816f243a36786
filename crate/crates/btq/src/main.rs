use std::path::PathBuf;
use std::process::ExitCode;

use btq_core::config::parse_config;
use btq_core::runner::{run, RunOptions, EXIT_ERROR, STUDIES};
use clap::Parser;

/// Run semiclassical studies on magnetic lattice models.
#[derive(Parser, Debug)]
#[command(name = "btq", version, about)]
struct Cli {
    /// Studies to run (`all` for every study).
    #[arg(required = true, value_name = "STUDY")]
    studies: Vec<String>,
    /// Sectioned key=value configuration file.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Subspace cache directory (overrides BTQ_CACHE and the config).
    #[arg(long, value_name = "DIR")]
    cache: Option<PathBuf>,
    /// Eigensolver seed.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Comma-separated p values, e.g. 4,8,16.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    p: Option<Vec<u32>>,
    /// Worker threads.
    #[arg(long, value_name = "K")]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).format_timestamp_millis().init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            log::error!("{e}");
            eprintln!("btq: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}

fn execute(cli: &Cli) -> btq_core::Result<i32> {
    let mut cfg = parse_config(&cli.config)?;
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(p) = &cli.p {
        cfg.p = p.clone();
    }
    if cli.studies.iter().any(|s| s != "all" && !STUDIES.contains(&s.as_str())) {
        return Err(btq_core::Error::InvalidConfig(format!("unknown study in {:?}; expected {STUDIES:?} or all", cli.studies)));
    }
    let outcome = run(&cfg, &cli.studies, &RunOptions { jobs: cli.jobs, cache: cli.cache.clone() })?;
    for r in &outcome.reports {
        let slope = r.fit.map(|f| format!(" slope={:.3} r2={:.3}", f.slope, f.r2)).unwrap_or_default();
        println!("{:<12} {:?}{slope}", r.study, r.verdict);
    }
    println!("wrote {}", outcome.out.display());
    Ok(outcome.exit_code)
}
