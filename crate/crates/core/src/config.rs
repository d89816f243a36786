//! Sectioned `key = value` run configuration.
//!
//! ```text
//! [model]
//! kind = torus2
//! N = 1
//! B1 = 0
//!
//! [sweep]
//! p = 4, 8, 16
//! ```
//!
//! `#` starts a comment. Unknown sections or keys are errors. The canonical
//! serialization ([`RunConfig::to_text`]) is what gets hashed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{ModelKind, SymplecticModel};
use crate::lattice::{GridPolicy, PHI_MAX};
use crate::semiclassics::Tolerances;
use crate::symbol::{parse_symbol, Symbol};

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub n: Option<i64>,
    pub b0: Option<f64>,
    pub b1: f64,
}

impl ModelConfig {
    pub fn build(&self) -> Result<SymplecticModel<f64>> {
        match self.kind {
            ModelKind::Torus2 => match (self.n, self.b0) {
                (Some(n), None) => SymplecticModel::torus(n, self.b1),
                (None, Some(b0)) => SymplecticModel::torus_from_b0(b0, self.b1),
                (None, None) => SymplecticModel::torus(1, self.b1),
                (Some(n), Some(b0)) => {
                    let m = SymplecticModel::torus(n, self.b1)?;
                    if (m.b0() - b0).abs() > 1e-9 * b0.abs().max(1.0) {
                        return Err(Error::InvalidConfig(format!("B0 = {b0} disagrees with N = {n}")));
                    }
                    Ok(m)
                }
            },
            ModelKind::FockPlane => {
                if self.n.is_some() {
                    return Err(Error::InvalidConfig("N applies to the torus only".into()));
                }
                SymplecticModel::plane(self.b0.unwrap_or(1.0))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub p: Vec<u32>,
    pub seed: u64,
    pub policy: GridPolicy,
    pub f: String,
    pub g: String,
    pub matrix_f: String,
    pub matrix_g: String,
    pub lambdas: Vec<i32>,
    pub alphas_per_side: usize,
    pub fock_p: Vec<u32>,
    pub fock_k_max: usize,
    pub studies: Vec<String>,
    pub out: PathBuf,
    pub cache: Option<PathBuf>,
    pub tolerances: Tolerances,
}

impl RunConfig {
    pub fn with_model(model: ModelConfig) -> Self {
        Self {
            model,
            p: vec![8, 12, 16, 24, 32],
            seed: 0x5eed,
            policy: GridPolicy::default(),
            f: "cos(1,0)".into(),
            g: "sin(0,1)".into(),
            matrix_f: "sx*cos(1,0) + sz*cos(0,1)".into(),
            matrix_g: "sy*sin(0,1) + sz*sin(1,0)".into(),
            lambdas: vec![1, 2, 4, 8],
            alphas_per_side: 4,
            fock_p: vec![1, 2, 4, 8],
            fock_k_max: 40,
            studies: vec![],
            out: PathBuf::from("out"),
            cache: None,
            tolerances: Tolerances::default(),
        }
    }

    pub fn symbol(&self, text: &str) -> Result<Symbol<f64>> {
        Ok(parse_symbol::<f64>(text)?.with_id(text))
    }

    /// Canonical text form; parsing it gives back an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let t = &self.tolerances;
        let list = |v: &[u32]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let _ = writeln!(s, "[model]");
        let _ = writeln!(s, "kind = {}", kind_name(self.model.kind));
        if let Some(n) = self.model.n {
            let _ = writeln!(s, "N = {n}");
        }
        if let Some(b0) = self.model.b0 {
            let _ = writeln!(s, "B0 = {b0:?}");
        }
        let _ = writeln!(s, "B1 = {:?}", self.model.b1);
        let _ = writeln!(s, "\n[sweep]");
        let _ = writeln!(s, "p = {}", list(&self.p));
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "phi_max = {:?}", self.policy.phi_max);
        let _ = writeln!(s, "grid_multiple = {}", self.policy.multiple);
        let _ = writeln!(s, "grid_min = {}", self.policy.min_m);
        let _ = writeln!(s, "\n[symbols]");
        let _ = writeln!(s, "f = {}", self.f);
        let _ = writeln!(s, "g = {}", self.g);
        let _ = writeln!(s, "matrix_f = {}", self.matrix_f);
        let _ = writeln!(s, "matrix_g = {}", self.matrix_g);
        let _ = writeln!(s, "lambdas = {}", self.lambdas.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", "));
        let _ = writeln!(s, "alphas_per_side = {}", self.alphas_per_side);
        let _ = writeln!(s, "\n[fock]");
        let _ = writeln!(s, "p = {}", list(&self.fock_p));
        let _ = writeln!(s, "k_max = {}", self.fock_k_max);
        let _ = writeln!(s, "\n[studies]");
        let _ = writeln!(s, "run = {}", self.studies.join(", "));
        let _ = writeln!(s, "\n[output]");
        let _ = writeln!(s, "out = {}", self.out.display());
        if let Some(c) = &self.cache {
            let _ = writeln!(s, "cache = {}", c.display());
        }
        let _ = writeln!(s, "\n[tolerances]");
        let pair = |p: (f64, f64)| format!("{:?}, {:?}", p.0, p.1);
        let _ = writeln!(s, "min_r2 = {:?}", t.min_r2);
        let _ = writeln!(s, "product_band = {}", pair(t.product_band));
        let _ = writeln!(s, "commutator_band = {}", pair(t.commutator_band));
        let _ = writeln!(s, "ordering_band = {}", pair(t.ordering_band));
        let _ = writeln!(s, "kernel_slope = {:?}", t.kernel_slope);
        let _ = writeln!(s, "diagonal_slope = {:?}", t.diagonal_slope);
        let _ = writeln!(s, "symbol_slope = {:?}", t.symbol_slope);
        let _ = writeln!(s, "gap_rel = {:?}", t.gap_rel);
        let _ = writeln!(s, "width_slope = {:?}", t.width_slope);
        let _ = writeln!(s, "density = {:?}", t.density);
        let _ = writeln!(s, "decay_r2 = {:?}", t.decay_r2);
        let _ = writeln!(s, "decay_spread = {:?}", t.decay_spread);
        let _ = writeln!(s, "weighted_factor = {:?}", t.weighted_factor);
        let _ = writeln!(s, "refinement = {:?}", t.refinement);
        let _ = writeln!(s, "plane_kernel = {:?}", t.plane_kernel);
        s
    }

    /// Hash of the canonical form, excluding output locations.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        c.cache = None;
        hex::encode(&Sha256::digest(c.to_text().as_bytes())[..16])
    }
}

fn kind_name(k: ModelKind) -> &'static str {
    match k {
        ModelKind::Torus2 => "torus2",
        ModelKind::FockPlane => "plane",
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Parse { line, message: format!("bad value for {key}: {v:?}") })
}

fn parse_list<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_num(line, key, s)).collect()
}

fn parse_pair(line: usize, key: &str, v: &str) -> Result<(f64, f64)> {
    match parse_list::<f64>(line, key, v)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(Error::Parse { line, message: format!("{key} needs two values") }),
    }
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::with_model(ModelConfig { kind: ModelKind::Torus2, n: None, b0: None, b1: 0.0 });
    let mut kind_seen = false;
    let mut section = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(name) = body.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or(Error::Parse { line, message: "unterminated section".into() })?;
            section = name.trim().to_string();
            if !["model", "sweep", "symbols", "fock", "studies", "output", "tolerances"].contains(&section.as_str()) {
                return Err(Error::UnknownKey { line, key: format!("[{section}]") });
            }
            continue;
        }
        let (key, value) = body.split_once('=').ok_or(Error::Parse { line, message: format!("expected key = value, got {body:?}") })?;
        let (key, value) = (key.trim(), value.trim());
        let t = &mut cfg.tolerances;
        match (section.as_str(), key) {
            ("model", "kind") => {
                cfg.model.kind = match value {
                    "torus2" | "torus" => ModelKind::Torus2,
                    "plane" | "fock" | "fockplane" => ModelKind::FockPlane,
                    _ => return Err(Error::Parse { line, message: format!("unknown model kind {value:?}") }),
                };
                kind_seen = true;
            }
            ("model", "N") => cfg.model.n = Some(parse_num(line, key, value)?),
            ("model", "B0") => cfg.model.b0 = Some(parse_num(line, key, value)?),
            ("model", "B1") => cfg.model.b1 = parse_num(line, key, value)?,
            ("sweep", "p") => cfg.p = parse_list(line, key, value)?,
            ("sweep", "seed") => cfg.seed = parse_num(line, key, value)?,
            ("sweep", "phi_max") => cfg.policy.phi_max = parse_num(line, key, value)?,
            ("sweep", "grid_multiple") => cfg.policy.multiple = parse_num(line, key, value)?,
            ("sweep", "grid_min") => cfg.policy.min_m = parse_num(line, key, value)?,
            ("symbols", "f") => cfg.f = value.into(),
            ("symbols", "g") => cfg.g = value.into(),
            ("symbols", "matrix_f") => cfg.matrix_f = value.into(),
            ("symbols", "matrix_g") => cfg.matrix_g = value.into(),
            ("symbols", "lambdas") => cfg.lambdas = parse_list(line, key, value)?,
            ("symbols", "alphas_per_side") => cfg.alphas_per_side = parse_num(line, key, value)?,
            ("fock", "p") => cfg.fock_p = parse_list(line, key, value)?,
            ("fock", "k_max") => cfg.fock_k_max = parse_num(line, key, value)?,
            ("studies", "run") => cfg.studies = value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
            ("output", "out") => cfg.out = PathBuf::from(value),
            ("output", "cache") => cfg.cache = Some(PathBuf::from(value)),
            ("tolerances", "min_r2") => t.min_r2 = parse_num(line, key, value)?,
            ("tolerances", "product_band") => t.product_band = parse_pair(line, key, value)?,
            ("tolerances", "commutator_band") => t.commutator_band = parse_pair(line, key, value)?,
            ("tolerances", "ordering_band") => t.ordering_band = parse_pair(line, key, value)?,
            ("tolerances", "kernel_slope") => t.kernel_slope = parse_num(line, key, value)?,
            ("tolerances", "diagonal_slope") => t.diagonal_slope = parse_num(line, key, value)?,
            ("tolerances", "symbol_slope") => t.symbol_slope = parse_num(line, key, value)?,
            ("tolerances", "gap_rel") => t.gap_rel = parse_num(line, key, value)?,
            ("tolerances", "width_slope") => t.width_slope = parse_num(line, key, value)?,
            ("tolerances", "density") => t.density = parse_num(line, key, value)?,
            ("tolerances", "decay_r2") => t.decay_r2 = parse_num(line, key, value)?,
            ("tolerances", "decay_spread") => t.decay_spread = parse_num(line, key, value)?,
            ("tolerances", "weighted_factor") => t.weighted_factor = parse_num(line, key, value)?,
            ("tolerances", "refinement") => t.refinement = parse_num(line, key, value)?,
            ("tolerances", "plane_kernel") => t.plane_kernel = parse_num(line, key, value)?,
            ("", _) => return Err(Error::Parse { line, message: format!("{key} outside any section") }),
            _ => return Err(Error::UnknownKey { line, key: format!("{section}.{key}") }),
        }
    }
    if !kind_seen {
        return Err(Error::InvalidConfig("[model] kind is required".into()));
    }
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig) -> Result<()> {
    cfg.model.build()?;
    if cfg.policy.phi_max <= 0.0 || cfg.policy.phi_max > PHI_MAX * 5.0 || cfg.policy.multiple == 0 {
        return Err(Error::InvalidConfig(format!("grid policy out of range: {:?}", cfg.policy)));
    }
    for text in [&cfg.f, &cfg.g, &cfg.matrix_f, &cfg.matrix_g] {
        parse_symbol::<f64>(text)?;
    }
    Ok(())
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    parse_config_str(&std::fs::read_to_string(path)?)
}
