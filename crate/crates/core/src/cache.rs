//! On-disk cache of solved quantum spaces.
//!
//! File layout (little endian): magic `BTQS`, format version `u32`, SHA-256 of
//! the payload (32 bytes), payload. The payload stores dimensions, spectral
//! data and the basis as raw `f64`. Stale versions and checksum failures are
//! reported as misses and the entry is recomputed; nothing is ever evicted.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::eigensolve::{SolverOptions, SpectralSubspace};
use crate::error::{Error, Result};
use crate::geometry::SymplecticModel;
use crate::lattice::LatticeBundle;
use crate::linalg::DenseMatrix;
use crate::scalar::cx;
use crate::semiclassics::{model_hash, DirectSolve, SubspaceSource};

pub const MAGIC: &[u8; 4] = b"BTQS";
pub const FORMAT_VERSION: u32 = 1;
/// Environment variable naming the cache root (a flag overrides it).
pub const CACHE_ENV: &str = "BTQ_CACHE";

#[derive(Debug, PartialEq, Eq)]
pub enum Lookup {
    Hit,
    Miss,
    Stale,
    Corrupt,
}

pub fn encode(s: &SpectralSubspace<f64>) -> Vec<u8> {
    let mut payload = Vec::with_capacity(16 * s.basis.as_slice().len() + 256);
    let put_u64 = |v: u64, out: &mut Vec<u8>| out.extend_from_slice(&v.to_le_bytes());
    put_u64(s.n() as u64, &mut payload);
    put_u64(s.dim() as u64, &mut payload);
    put_u64(s.candidates.len() as u64, &mut payload);
    put_u64(s.sweeps as u64, &mut payload);
    let mut put = |v: f64| payload.extend_from_slice(&v.to_le_bytes());
    put(s.gap_edge);
    put(s.window.0);
    put(s.window.1);
    put(s.cell_volume);
    s.eigenvalues.iter().chain(&s.residuals).chain(&s.candidates).for_each(|&v| put(v));
    for v in s.basis.as_slice() {
        put(v.re);
        put(v.im);
    }
    let mut out = Vec::with_capacity(payload.len() + 40);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&Sha256::digest(&payload));
    out.extend_from_slice(&payload);
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| Error::Cache("truncated entry".into()))?;
        let s = &self.buf[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
}

/// Decodes an entry, distinguishing stale formats from corruption.
pub fn decode(bytes: &[u8]) -> std::result::Result<SpectralSubspace<f64>, Lookup> {
    if bytes.len() < 40 || &bytes[..4] != MAGIC {
        return Err(Lookup::Corrupt);
    }
    if u32::from_le_bytes(bytes[4..8].try_into().unwrap()) != FORMAT_VERSION {
        return Err(Lookup::Stale);
    }
    let payload = &bytes[40..];
    if Sha256::digest(payload).as_slice() != &bytes[8..40] {
        return Err(Lookup::Corrupt);
    }
    let parse = || -> Result<SpectralSubspace<f64>> {
        let mut r = Reader { buf: payload, at: 0 };
        let (n, d, nc, sweeps) = (r.u64()? as usize, r.u64()? as usize, r.u64()? as usize, r.u64()? as usize);
        let gap_edge = r.f64()?;
        let window = (r.f64()?, r.f64()?);
        let cell_volume = r.f64()?;
        let eigenvalues = r.f64s(d)?;
        let residuals = r.f64s(d)?;
        let candidates = r.f64s(nc)?;
        let raw = r.f64s(2 * n * d)?;
        let data = raw.chunks_exact(2).map(|c| cx(c[0], c[1])).collect();
        Ok(SpectralSubspace { eigenvalues, basis: DenseMatrix::from_row_major(n, d, data), residuals, gap_edge, window, cell_volume, candidates, sweeps })
    };
    parse().map_err(|_| Lookup::Corrupt)
}

/// Subspace source that reads and fills a cache directory.
pub struct CachedSolve {
    pub root: PathBuf,
}

impl CachedSolve {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    /// The flag if given, else `BTQ_CACHE`, else none.
    pub fn resolve_root(flag: Option<&Path>, config: Option<&Path>) -> Option<PathBuf> {
        flag.map(Path::to_path_buf)
            .or_else(|| std::env::var_os(CACHE_ENV).map(PathBuf::from))
            .or_else(|| config.map(Path::to_path_buf))
    }

    pub fn key(model: &SymplecticModel<f64>, bundle: &LatticeBundle<f64>, opts: &SolverOptions<f64>) -> String {
        let text = format!("v{FORMAT_VERSION}|{}|p{}|M{}|r{}|seed{}|{:?}", model_hash(model), bundle.p(), bundle.m(), bundle.rank(), opts.seed, opts.window);
        hex::encode(&Sha256::digest(text.as_bytes())[..16])
    }

    pub fn path(&self, key: &str) -> PathBuf {
        self.root.join(format!("{key}.btqs"))
    }

    pub fn lookup(&self, key: &str) -> (Lookup, Option<SpectralSubspace<f64>>) {
        match fs::read(self.path(key)) {
            Err(_) => (Lookup::Miss, None),
            Ok(bytes) => match decode(&bytes) {
                Ok(s) => (Lookup::Hit, Some(s)),
                Err(why) => (why, None),
            },
        }
    }

    pub fn store(&self, key: &str, s: &SpectralSubspace<f64>) -> Result<()> {
        // write then rename so readers never see a partial file
        let tmp = self.root.join(format!("{key}.tmp{}", std::process::id()));
        fs::write(&tmp, encode(s))?;
        fs::rename(&tmp, self.path(key))?;
        Ok(())
    }
}

impl SubspaceSource for CachedSolve {
    fn solve(&self, model: &SymplecticModel<f64>, bundle: &LatticeBundle<f64>, opts: &SolverOptions<f64>) -> Result<SpectralSubspace<f64>> {
        let key = Self::key(model, bundle, opts);
        match self.lookup(&key) {
            (Lookup::Hit, Some(s)) if s.n() == bundle.dim() => {
                log::debug!("cache hit {key}");
                return Ok(s);
            }
            (Lookup::Corrupt, _) => log::warn!("cache entry {key} failed its checksum; recomputing"),
            (Lookup::Stale, _) => log::warn!("cache entry {key} has an old format; recomputing"),
            _ => {}
        }
        let s = DirectSolve.solve(model, bundle, opts)?;
        if let Err(e) = self.store(&key, &s) {
            log::warn!("could not write cache entry {key}: {e}");
        }
        Ok(s)
    }
}
