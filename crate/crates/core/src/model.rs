//! Ring geometry, pair couplings and Hamiltonian matrices.
//!
//! Basis states are `N`-bit integers: bit `n` set means site `n + 1` is in
//! the `+` state (site 1 lives in the least significant bit). Every matrix
//! is generated from the transposition structure of `σ_j·σ_k = 2Π_jk − 1`
//! so that symmetry and magnetization block sparsity hold exactly.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default largest ring size accepted by [`RingSpec::new`].
pub const DEFAULT_SITE_CAP: usize = 14;

/// Interaction-range exponent. `Infinity` is the nearest-neighbor model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alpha {
    Finite(f64),
    Infinity,
}

impl Alpha {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Alpha::Infinity)
    }

    /// Numeric value, `f64::INFINITY` for the nearest-neighbor model.
    pub fn value(&self) -> f64 {
        match *self {
            Alpha::Finite(a) => a,
            Alpha::Infinity => f64::INFINITY,
        }
    }

    pub fn from_value(value: f64) -> Self {
        if value.is_infinite() {
            Alpha::Infinity
        } else {
            Alpha::Finite(value)
        }
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alpha::Finite(a) => write!(f, "{a}"),
            Alpha::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for Alpha {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(Alpha::Infinity);
        }
        let a: f64 = t
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("cannot parse alpha from {s:?}")))?;
        if !(a >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must be non-negative, got {a}"
            )));
        }
        Ok(Alpha::from_value(a))
    }
}

impl Serialize for Alpha {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Alpha::Finite(a) => s.serialize_f64(*a),
            Alpha::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Alpha {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(a) => Ok(Alpha::from_value(a)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Which operator is built from the ring couplings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// `H = Σ w_jk σ_j·σ_k`
    #[default]
    Standard,
    /// `H̃ = ½ Σ w_jk (Π_jk − 1) = (H − W)/4`
    Shifted,
    /// `−H`
    Ferromagnetic,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Standard => "standard",
            Variant::Shifted => "shifted",
            Variant::Ferromagnetic => "ferromagnetic",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "standard" | "h" => Ok(Variant::Standard),
            "shifted" => Ok(Variant::Shifted),
            "ferromagnetic" | "ferro" => Ok(Variant::Ferromagnetic),
            other => Err(Error::InvalidArgument(format!("unknown variant {other:?}"))),
        }
    }
}

/// A physical ring instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingSpec {
    n_sites: usize,
    alpha: Alpha,
    variant: Variant,
}

impl RingSpec {
    pub fn new(n_sites: usize, alpha: Alpha, variant: Variant) -> Result<Self> {
        Self::with_cap(n_sites, alpha, variant, DEFAULT_SITE_CAP)
    }

    pub fn with_cap(n_sites: usize, alpha: Alpha, variant: Variant, cap: usize) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::InvalidArgument(format!(
                "a ring needs at least 2 sites, got {n_sites}"
            )));
        }
        if n_sites > cap {
            return Err(Error::ResourceLimit { n_sites, cap });
        }
        if let Alpha::Finite(a) = alpha {
            if !(a >= 0.0) || !a.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "alpha must be non-negative, got {a}"
                )));
            }
        }
        Ok(Self {
            n_sites,
            alpha,
            variant,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn alpha(&self) -> Alpha {
        self.alpha
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Hilbert space dimension `2^N`.
    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    pub fn with_alpha(&self, alpha: Alpha) -> Self {
        Self { alpha, ..*self }
    }

    pub fn with_variant(&self, variant: Variant) -> Self {
        Self { variant, ..*self }
    }

    pub fn couplings(&self) -> CouplingTable {
        CouplingTable::new(self.n_sites, self.alpha)
    }
}

/// Ring separation `min(d, N − d)` of two sites.
pub fn ring_separation(n_sites: usize, j: usize, k: usize) -> usize {
    let d = j.abs_diff(k) % n_sites;
    d.min(n_sites - d)
}

/// Chord distance between sites `separation` apart, normalized so that
/// nearest neighbors are at distance one.
pub fn chord_distance(n_sites: usize, separation: usize) -> Result<f64> {
    if separation == 0 || separation >= n_sites {
        return Err(Error::InvalidArgument(format!(
            "separation must lie in 1..{n_sites}, got {separation}"
        )));
    }
    let d = separation.min(n_sites - separation);
    if d == 1 {
        return Ok(1.0);
    }
    let n = n_sites as f64;
    Ok((PI * d as f64 / n).sin() / (PI / n).sin())
}

/// Pair weights `(1/r_jk)^α`, indexed by ring separation.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingTable {
    n_sites: usize,
    /// `by_separation[d - 1]` is the weight of every pair at separation `d`.
    by_separation: Vec<f64>,
}

impl CouplingTable {
    pub fn new(n_sites: usize, alpha: Alpha) -> Self {
        let by_separation = (1..=n_sites / 2)
            .map(|d| match alpha {
                Alpha::Infinity => {
                    if d == 1 {
                        1.0
                    } else {
                        0.0
                    }
                }
                Alpha::Finite(a) => {
                    let r = chord_distance(n_sites, d).expect("separation in range");
                    r.recip().powf(a)
                }
            })
            .collect();
        Self {
            n_sites,
            by_separation,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Number of distinct ring distances, `⌊N/2⌋`.
    pub fn distinct_distances(&self) -> usize {
        self.by_separation.len()
    }

    pub fn by_separation(&self) -> &[f64] {
        &self.by_separation
    }

    /// Weight of the pair of (zero-based) sites `j`, `k`.
    pub fn weight(&self, j: usize, k: usize) -> f64 {
        self.by_separation[ring_separation(self.n_sites, j, k) - 1]
    }

    /// All pairs `j < k` (zero-based) with their weights, zero weights skipped.
    pub fn pairs(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n_sites;
        let mut out = Vec::with_capacity(n * (n - 1) / 2);
        for j in 0..n {
            for k in j + 1..n {
                let w = self.weight(j, k);
                if w != 0.0 {
                    out.push((j, k, w));
                }
            }
        }
        out
    }

    /// `W = Σ_{j<k} w_jk`, the offset between the standard and shifted operators.
    pub fn total_weight(&self) -> f64 {
        self.pairs().iter().map(|p| p.2).sum()
    }
}

/// Diagonal and off-diagonal contributions of one pair term for each variant.
///
/// Returns `(aligned_diag, anti_diag, offdiag)` for a pair of weight `w`.
fn pair_elements(variant: Variant, w: f64) -> (f64, f64, f64) {
    match variant {
        Variant::Standard => (w, -w, 2.0 * w),
        Variant::Ferromagnetic => (-w, w, -2.0 * w),
        Variant::Shifted => (0.0, -0.5 * w, 0.5 * w),
    }
}

/// Dense matrix of the Hamiltonian in the full product basis.
#[derive(Debug, Clone)]
pub struct HamiltonianMatrix {
    spec: RingSpec,
    matrix: DMatrix<f64>,
}

impl HamiltonianMatrix {
    pub fn spec(&self) -> &RingSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }
}

/// Fill `block` (indexed through `position`) with the action of the Hamiltonian
/// on the basis states `states`.
fn fill_rows(
    variant: Variant,
    pairs: &[(usize, usize, f64)],
    states: &[usize],
    position: impl Fn(usize) -> usize,
    block: &mut DMatrix<f64>,
) {
    for (row, &x) in states.iter().enumerate() {
        let mut diag = 0.0;
        for &(j, k, w) in pairs {
            let (aligned, anti, off) = pair_elements(variant, w);
            let bj = (x >> j) & 1;
            let bk = (x >> k) & 1;
            if bj == bk {
                diag += aligned;
            } else {
                diag += anti;
                let y = x ^ ((1 << j) | (1 << k));
                // Each unordered (x, y) pair is visited from both rows with the
                // same `off`, so the matrix is exactly symmetric.
                block[(row, position(y))] += off;
            }
        }
        block[(row, row)] += diag;
    }
}

/// Dense Hamiltonian for `spec` in the full `2^N` product basis.
pub fn build_hamiltonian(spec: &RingSpec) -> HamiltonianMatrix {
    let dim = spec.dim();
    let pairs = spec.couplings().pairs();
    let states: Vec<usize> = (0..dim).collect();
    let mut matrix = DMatrix::zeros(dim, dim);
    fill_rows(spec.variant, &pairs, &states, |y| y, &mut matrix);
    HamiltonianMatrix {
        spec: *spec,
        matrix,
    }
}

/// One fixed-magnetization block of the Hamiltonian.
#[derive(Debug, Clone)]
pub struct SectorBlock {
    /// Number of `+` spins.
    pub sector: usize,
    /// Basis integers with popcount `sector`, ascending.
    pub index_map: Vec<usize>,
    pub block: DMatrix<f64>,
}

/// Basis integers with exactly `sector` bits set, ascending.
pub fn sector_states(n_sites: usize, sector: usize) -> Vec<usize> {
    (0..1usize << n_sites)
        .filter(|x| x.count_ones() as usize == sector)
        .collect()
}

/// Position of every basis integer inside its own magnetization sector.
pub fn sector_positions(n_sites: usize) -> Vec<usize> {
    let mut counters = vec![0usize; n_sites + 1];
    (0..1usize << n_sites)
        .map(|x| {
            let s = x.count_ones() as usize;
            let p = counters[s];
            counters[s] += 1;
            p
        })
        .collect()
}

/// Magnetization-sector blocks `s = 0..=N` of the Hamiltonian.
pub fn build_sector_blocks(spec: &RingSpec) -> Vec<SectorBlock> {
    let n = spec.n_sites;
    let pairs = spec.couplings().pairs();
    let positions = sector_positions(n);
    (0..=n)
        .map(|sector| {
            let index_map = sector_states(n, sector);
            let size = index_map.len();
            let mut block = DMatrix::zeros(size, size);
            fill_rows(
                spec.variant,
                &pairs,
                &index_map,
                |y| positions[y],
                &mut block,
            );
            SectorBlock {
                sector,
                index_map,
                block,
            }
        })
        .collect()
}

/// The `N + 1` normalized symmetric (Dicke) vectors, ordered by sector.
/// They span the zero-energy top eigenspace of the shifted operator.
pub fn top_eigenspace_basis(n_sites: usize) -> Vec<DVector<f64>> {
    let dim = 1usize << n_sites;
    (0..=n_sites)
        .map(|s| {
            let members = sector_states(n_sites, s);
            let amp = (members.len() as f64).sqrt().recip();
            let mut v = DVector::zeros(dim);
            for x in members {
                v[x] = amp;
            }
            v
        })
        .collect()
}

/// Global spin flip: complement of all `N` bits.
pub fn spin_flip(n_sites: usize, x: usize) -> usize {
    x ^ ((1 << n_sites) - 1)
}

/// Cyclic shift moving the state of site `n` to site `n + 1`.
pub fn cyclic_shift(n_sites: usize, x: usize) -> usize {
    let mask = (1 << n_sites) - 1;
    ((x << 1) | (x >> (n_sites - 1))) & mask
}
