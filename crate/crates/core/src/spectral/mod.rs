//! Eigen-decomposition of ring Hamiltonians into degenerate levels.
//!
//! Every eigenvector of the model lives in a single magnetization sector, so
//! eigenvectors are stored as coefficient columns of per-sector matrices and
//! only expanded to the full `2^N` basis on demand.

mod cache;
mod tracking;

pub use cache::DecompositionCache;
pub(crate) use tracking::LevelSignature;
pub use tracking::{
    match_levels, overlap_matrix, CurveTracker, LevelCurve, LevelPairing, MatchedPair,
    AMBIGUITY_MARGIN, DEFAULT_OVERLAP_THRESHOLD,
};

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_sector_blocks, sector_positions, HamiltonianMatrix, RingSpec};

/// Default relative tolerance for merging eigenvalues into one level.
pub const DEFAULT_CLUSTER_TOLERANCE: f64 = 1e-9;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

/// A degenerate eigen-level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    /// Mean of the clustered eigenvalues.
    pub energy: f64,
    pub multiplicity: usize,
    /// Indices into the ascending eigenvalue list.
    pub member_indices: Vec<usize>,
}

/// Emitted when a cluster is wider than half the merge tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterWarning {
    pub level: usize,
    pub spread: f64,
    pub tolerance: f64,
}

/// Greedy gap clustering of an ascending spectrum.
///
/// Consecutive eigenvalues belong to the same level iff their gap is below
/// `tolerance · max(1, spectral_range)`.
pub fn cluster_levels(eigenvalues: &[f64], tolerance: f64) -> (Vec<Level>, Vec<ClusterWarning>) {
    let Some((&first, &last)) = eigenvalues.first().zip(eigenvalues.last()) else {
        return (Vec::new(), Vec::new());
    };
    let scale = tolerance * (last - first).max(1.0);

    let mut groups: Vec<Vec<usize>> = vec![vec![0]];
    for i in 1..eigenvalues.len() {
        if eigenvalues[i] - eigenvalues[i - 1] < scale {
            groups.last_mut().unwrap().push(i);
        } else {
            groups.push(vec![i]);
        }
    }

    let mut warnings = Vec::new();
    let levels = groups
        .into_iter()
        .enumerate()
        .map(|(li, members)| {
            let lo = eigenvalues[members[0]];
            let hi = eigenvalues[*members.last().unwrap()];
            let spread = hi - lo;
            if spread > scale / 2.0 {
                warnings.push(ClusterWarning {
                    level: li,
                    spread,
                    tolerance: scale,
                });
            }
            let energy =
                members.iter().map(|&i| eigenvalues[i]).sum::<f64>() / members.len() as f64;
            Level {
                energy,
                multiplicity: members.len(),
                member_indices: members,
            }
        })
        .collect();
    (levels, warnings)
}

/// Full eigensystem of one ring Hamiltonian, assembled from sector blocks.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    spec: RingSpec,
    tolerance: f64,
    eigenvalues: Vec<f64>,
    /// `(sector, column)` of each ascending eigenvalue.
    locations: Vec<(usize, usize)>,
    /// Per-sector basis integers.
    index_maps: Vec<Vec<usize>>,
    /// Per-sector eigenvector columns in the sector basis.
    sector_vectors: Vec<DMatrix<f64>>,
    /// Per-sector eigenvalues matching `sector_vectors` columns.
    sector_values: Vec<Vec<f64>>,
    positions: Vec<usize>,
    levels: Vec<Level>,
    warnings: Vec<ClusterWarning>,
}

/// Make the largest-magnitude component (first one on ties) positive.
fn fix_sign(column: &mut [f64]) {
    let mut best = 0;
    for (i, c) in column.iter().enumerate() {
        if c.abs() > column[best].abs() {
            best = i;
        }
    }
    if column[best] < 0.0 {
        column.iter_mut().for_each(|c| *c = -*c);
    }
}

fn solve_sector(sector: usize, block: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let size = block.nrows();
    let eig = SymmetricEigen::try_new(block, EIGEN_EPS, EIGEN_MAX_ITER).ok_or_else(|| {
        Error::NumericalFailure {
            sector,
            reason: "symmetric QR iteration did not converge".into(),
        }
    })?;
    if eig.eigenvalues.iter().any(|e| !e.is_finite()) {
        return Err(Error::NumericalFailure {
            sector,
            reason: "non-finite eigenvalue".into(),
        });
    }
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .total_cmp(&eig.eigenvalues[b])
            .then(a.cmp(&b))
    });

    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(size, size);
    for (dst, &src) in order.iter().enumerate() {
        let mut col: Vec<f64> = eig.eigenvectors.column(src).iter().copied().collect();
        fix_sign(&mut col);
        vectors.set_column(dst, &DVector::from_vec(col));
    }
    Ok((values, vectors))
}

/// Diagonalize with the default cluster tolerance.
pub fn diagonalize(spec: &RingSpec) -> Result<SpectralDecomposition> {
    diagonalize_with(spec, DEFAULT_CLUSTER_TOLERANCE)
}

/// Diagonalize every magnetization block and merge into one ascending spectrum.
pub fn diagonalize_with(spec: &RingSpec, tolerance: f64) -> Result<SpectralDecomposition> {
    if !(tolerance > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "cluster tolerance must be positive, got {tolerance}"
        )));
    }
    let blocks = build_sector_blocks(spec);
    let mut index_maps = Vec::with_capacity(blocks.len());
    let mut sector_vectors = Vec::with_capacity(blocks.len());
    let mut sector_values = Vec::with_capacity(blocks.len());
    for b in blocks {
        let (values, vectors) = solve_sector(b.sector, b.block)?;
        index_maps.push(b.index_map);
        sector_values.push(values);
        sector_vectors.push(vectors);
    }
    Ok(SpectralDecomposition::assemble(
        *spec,
        tolerance,
        index_maps,
        sector_values,
        sector_vectors,
    ))
}

impl SpectralDecomposition {
    fn assemble(
        spec: RingSpec,
        tolerance: f64,
        index_maps: Vec<Vec<usize>>,
        sector_values: Vec<Vec<f64>>,
        sector_vectors: Vec<DMatrix<f64>>,
    ) -> Self {
        let mut locations: Vec<(usize, usize)> = sector_values
            .iter()
            .enumerate()
            .flat_map(|(s, vals)| (0..vals.len()).map(move |c| (s, c)))
            .collect();
        // stable tie-break: sector, then column
        locations.sort_by(|&(sa, ca), &(sb, cb)| {
            sector_values[sa][ca]
                .total_cmp(&sector_values[sb][cb])
                .then(sa.cmp(&sb))
                .then(ca.cmp(&cb))
        });
        let eigenvalues: Vec<f64> = locations
            .iter()
            .map(|&(s, c)| sector_values[s][c])
            .collect();
        let (levels, warnings) = cluster_levels(&eigenvalues, tolerance);
        for w in &warnings {
            warn!(
                "marginal cluster at level {} (spread {:e}, tolerance {:e}) for N={} alpha={}",
                w.level,
                w.spread,
                w.tolerance,
                spec.n_sites(),
                spec.alpha()
            );
        }
        let positions = sector_positions(spec.n_sites());
        Self {
            spec,
            tolerance,
            eigenvalues,
            locations,
            index_maps,
            sector_vectors,
            sector_values,
            positions,
            levels,
            warnings,
        }
    }

    pub fn spec(&self) -> &RingSpec {
        &self.spec
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// All eigenvalues, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn level(&self, index: usize) -> &Level {
        &self.levels[index]
    }

    pub fn warnings(&self) -> &[ClusterWarning] {
        &self.warnings
    }

    pub fn spectral_range(&self) -> f64 {
        match (self.eigenvalues.first(), self.eigenvalues.last()) {
            (Some(lo), Some(hi)) => hi - lo,
            _ => 0.0,
        }
    }

    /// Magnetization sector and in-sector coefficients of eigenvector `i`.
    pub fn sector_vector(&self, i: usize) -> (usize, nalgebra::DVectorView<'_, f64>) {
        let (s, c) = self.locations[i];
        (s, self.sector_vectors[s].column(c))
    }

    /// Basis integers spanning sector `s`.
    pub fn index_map(&self, s: usize) -> &[usize] {
        &self.index_maps[s]
    }

    /// Position of basis integer `x` within its sector.
    pub fn position(&self, x: usize) -> usize {
        self.positions[x]
    }

    pub(crate) fn locations(&self) -> &[(usize, usize)] {
        &self.locations
    }

    pub(crate) fn sector_matrices(&self) -> &[DMatrix<f64>] {
        &self.sector_vectors
    }

    pub(crate) fn sector_eigenvalues(&self) -> &[Vec<f64>] {
        &self.sector_values
    }

    /// Eigenvector `i` in the full `2^N` basis.
    pub fn eigenvector(&self, i: usize) -> DVector<f64> {
        let (s, v) = self.sector_vector(i);
        let mut out = DVector::zeros(self.dim());
        for (coef, &x) in v.iter().zip(&self.index_maps[s]) {
            out[x] = *coef;
        }
        out
    }

    /// All eigenvectors as columns of a `2^N × 2^N` matrix, ascending order.
    pub fn eigenvector_matrix(&self) -> DMatrix<f64> {
        let dim = self.dim();
        let mut q = DMatrix::zeros(dim, dim);
        for (i, &(s, c)) in self.locations.iter().enumerate() {
            for (r, &x) in self.index_maps[s].iter().enumerate() {
                q[(x, i)] = self.sector_vectors[s][(r, c)];
            }
        }
        q
    }

    /// Orthoprojector onto level `index`.
    pub fn projector(&self, index: usize) -> DMatrix<f64> {
        projector(&self.levels[index], self)
    }

    /// Uniform mixture over the eigenspace of level `index`.
    pub fn uniform_state(&self, index: usize) -> UniformEigenstate {
        UniformEigenstate::new(self, index)
    }

    /// Index of the level containing energy `e`, if any lies within the
    /// clustering tolerance.
    pub fn find_level(&self, e: f64) -> Option<usize> {
        let scale = self.tolerance * self.spectral_range().max(1.0);
        self.levels
            .iter()
            .position(|l| (l.energy - e).abs() < scale)
    }
}

/// `P_E = Σ v_i v_iᵀ` over the eigenvectors of `level`.
pub fn projector(level: &Level, decomposition: &SpectralDecomposition) -> DMatrix<f64> {
    let dim = decomposition.dim();
    let mut p = DMatrix::zeros(dim, dim);
    for &i in &level.member_indices {
        let (s, v) = decomposition.sector_vector(i);
        let map = decomposition.index_map(s);
        for (a, &x) in map.iter().enumerate() {
            let va = v[a];
            if va == 0.0 {
                continue;
            }
            for (b, &y) in map.iter().enumerate() {
                p[(x, y)] += va * v[b];
            }
        }
    }
    p
}

/// Projector onto the eigenspace of `target` built as the operator product
/// `Π_{E'≠E} (H − E')/(E − E')` over the supplied distinct energies.
pub fn lagrange_projector(
    hamiltonian: &HamiltonianMatrix,
    distinct_energies: &[f64],
    target: f64,
) -> Result<DMatrix<f64>> {
    let (lo, hi) = distinct_energies
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| {
            (lo.min(e), hi.max(e))
        });
    let min_sep = 1e-6 * (hi - lo).max(f64::MIN_POSITIVE);

    let mut sorted = distinct_energies.to_vec();
    sorted.sort_by(f64::total_cmp);
    for w in sorted.windows(2) {
        if w[1] - w[0] <= min_sep {
            return Err(Error::IllConditioned(w[0], w[1]));
        }
    }
    let Some(target_pos) = distinct_energies
        .iter()
        .position(|&e| (e - target).abs() <= min_sep)
    else {
        return Err(Error::InvalidArgument(format!(
            "target energy {target} is not among the supplied levels"
        )));
    };
    let target = distinct_energies[target_pos];

    let h = hamiltonian.matrix();
    let dim = h.nrows();
    let mut p = DMatrix::identity(dim, dim);
    for (i, &e) in distinct_energies.iter().enumerate() {
        if i == target_pos {
            continue;
        }
        let mut factor = h.clone();
        for d in 0..dim {
            factor[(d, d)] -= e;
        }
        factor /= target - e;
        p = factor * p;
    }
    // symmetrize the rounding noise of the product ordering
    Ok((&p + p.transpose()) * 0.5)
}

/// The mixed state `ρ(E) = P_E / tr(P_E)`.
#[derive(Debug, Clone)]
pub struct UniformEigenstate {
    pub level_index: usize,
    pub energy: f64,
    pub multiplicity: usize,
    n_sites: usize,
    rho: DMatrix<f64>,
}

impl UniformEigenstate {
    pub fn new(decomposition: &SpectralDecomposition, level_index: usize) -> Self {
        let level = decomposition.level(level_index);
        let rho = projector(level, decomposition) / level.multiplicity as f64;
        Self {
            level_index,
            energy: level.energy,
            multiplicity: level.multiplicity,
            n_sites: decomposition.spec().n_sites(),
            rho,
        }
    }

    /// Arbitrary density matrix on `n_sites` spins, for feeding external states
    /// through the same reductions.
    pub fn from_density(n_sites: usize, rho: DMatrix<f64>) -> Result<Self> {
        let dim = 1usize << n_sites;
        if rho.nrows() != dim || rho.ncols() != dim {
            return Err(Error::InvalidArgument(format!(
                "density matrix must be {dim}x{dim}, got {}x{}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        Ok(Self {
            level_index: 0,
            energy: f64::NAN,
            multiplicity: 1,
            n_sites,
            rho,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn rho(&self) -> &DMatrix<f64> {
        &self.rho
    }
}
