//! On-disk cache of per-sector eigensystems.
//!
//! File layout: one line of JSON header, then little-endian `f64` payload.
//! For each sector in order: its eigenvalues, then its eigenvector matrix
//! row-major (row = sector basis state, column = eigenvector).

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{diagonalize_with, SpectralDecomposition};
use crate::error::{Error, Result};
use crate::model::{sector_states, Alpha, RingSpec, Variant};

const FORMAT: &str = "lrring-decomposition";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct Header {
    format: String,
    version: u32,
    n_sites: usize,
    alpha: Alpha,
    variant: Variant,
    tolerance: f64,
    sector_sizes: Vec<usize>,
}

/// Directory-backed cache keyed by `(N, α, variant, tolerance)`.
#[derive(Debug, Clone)]
pub struct DecompositionCache {
    dir: PathBuf,
}

impl DecompositionCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, spec: &RingSpec, tolerance: f64) -> PathBuf {
        let alpha = match spec.alpha() {
            Alpha::Finite(a) => format!("{:016x}", a.to_bits()),
            Alpha::Infinity => "inf".to_string(),
        };
        self.dir.join(format!(
            "n{}_a{}_{}_t{:016x}.bin",
            spec.n_sites(),
            alpha,
            spec.variant(),
            tolerance.to_bits()
        ))
    }

    /// Load the decomposition if cached, otherwise compute and store it.
    pub fn get_or_compute(&self, spec: &RingSpec, tolerance: f64) -> Result<SpectralDecomposition> {
        let path = self.path_for(spec, tolerance);
        if path.exists() {
            match read(&path, spec, tolerance) {
                Ok(dec) => return Ok(dec),
                Err(e) => log::warn!("ignoring unreadable cache entry {}: {e}", path.display()),
            }
        }
        let dec = diagonalize_with(spec, tolerance)?;
        write(&path, &dec)?;
        Ok(dec)
    }
}

fn write(path: &Path, dec: &SpectralDecomposition) -> Result<()> {
    let spec = dec.spec();
    let header = Header {
        format: FORMAT.into(),
        version: VERSION,
        n_sites: spec.n_sites(),
        alpha: spec.alpha(),
        variant: spec.variant(),
        tolerance: dec.tolerance(),
        sector_sizes: dec.sector_matrices().iter().map(|m| m.nrows()).collect(),
    };
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = std::io::BufWriter::new(tmp.as_file_mut());
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for (vals, vecs) in dec.sector_eigenvalues().iter().zip(dec.sector_matrices()) {
            for v in vals {
                w.write_all(&v.to_le_bytes())?;
            }
            for r in 0..vecs.nrows() {
                for c in 0..vecs.ncols() {
                    w.write_all(&vecs[(r, c)].to_le_bytes())?;
                }
            }
        }
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect())
}

fn read(path: &Path, spec: &RingSpec, tolerance: f64) -> Result<SpectralDecomposition> {
    let mut r = BufReader::new(fs::File::open(path)?);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: Header = serde_json::from_str(&line)?;
    let n = spec.n_sites();
    let expected_sizes: Vec<usize> = (0..=n).map(|s| sector_states(n, s).len()).collect();
    if header.format != FORMAT
        || header.version != VERSION
        || header.n_sites != n
        || header.alpha != spec.alpha()
        || header.variant != spec.variant()
        || header.tolerance.to_bits() != tolerance.to_bits()
        || header.sector_sizes != expected_sizes
    {
        return Err(Error::InvalidArgument(
            "cache header does not match the requested key".into(),
        ));
    }
    let mut index_maps = Vec::new();
    let mut values = Vec::new();
    let mut vectors = Vec::new();
    for (s, &size) in header.sector_sizes.iter().enumerate() {
        values.push(read_f64s(&mut r, size)?);
        let flat = read_f64s(&mut r, size * size)?;
        vectors.push(DMatrix::from_row_slice(size, size, &flat));
        index_maps.push(sector_states(n, s));
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::InvalidArgument(
            "trailing bytes in cache entry".into(),
        ));
    }
    Ok(SpectralDecomposition::assemble(
        *spec, tolerance, index_maps, values, vectors,
    ))
}
