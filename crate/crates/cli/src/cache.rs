//! On-disk cache of solved spectra.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

use poincare_sobol::spectral::{default_basis, GridKind};
use poincare_sobol::{Distribution1D, SpectralBasis, Weight};

#[derive(Serialize)]
struct CacheKey<'a> {
    version: u32,
    distribution: &'a Distribution1D,
    k: usize,
    grid: usize,
    grid_kind: GridKind,
    weight: &'a Weight,
}

pub struct SpectrumCache {
    dir: Option<PathBuf>,
}

impl SpectrumCache {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self { dir }
    }

    pub fn disabled() -> Self {
        Self { dir: None }
    }

    fn path(dir: &Path, key: &CacheKey<'_>) -> PathBuf {
        let bytes = serde_json::to_vec(key).expect("cache key serializes");
        let digest = Sha256::digest(&bytes);
        dir.join(format!("{digest:x}.json"))
    }

    /// Basis for `dist` (see [`default_basis`]), read from or written to the
    /// cache. Cache failures fall back to solving.
    pub fn basis(
        &self,
        dist: &Distribution1D,
        k: usize,
        grid: usize,
        grid_kind: GridKind,
        weight: &Weight,
    ) -> poincare_sobol::Result<(Distribution1D, SpectralBasis)> {
        let key = CacheKey {
            version: 1,
            distribution: dist,
            k,
            grid,
            grid_kind,
            weight,
        };
        let path = self.dir.as_ref().map(|d| Self::path(d, &key));
        if let Some(p) = &path {
            if let Ok(text) = std::fs::read_to_string(p) {
                if let Ok(b) = SpectralBasis::from_json(&text) {
                    return Ok((*b.distribution(), b));
                }
            }
        }
        let (law, basis) = default_basis(dist, k, grid, weight, grid_kind)?;
        if let (Some(p), Some(dir)) = (&path, &self.dir) {
            let write = std::fs::create_dir_all(dir).and_then(|_| {
                // Write then rename so concurrent runs never read a torn file.
                let tmp = p.with_extension(format!("tmp{}", std::process::id()));
                std::fs::write(&tmp, basis.to_json().unwrap_or_default())?;
                std::fs::rename(&tmp, p)
            });
            if let Err(e) = write {
                eprintln!("warning: spectrum cache not written: {e}");
            }
        }
        Ok((law, basis))
    }
}
