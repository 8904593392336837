//! Level matching between decompositions at neighboring α values.
//!
//! Overlaps are `tr(P_i P_j) / max(m_i, m_j)`. Because eigenvectors live in
//! single magnetization sectors, the trace splits into per-sector Gram
//! matrices.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::SpectralDecomposition;

/// Default minimum normalized overlap for two levels to be identified.
pub const DEFAULT_OVERLAP_THRESHOLD: f64 = 0.5;

/// Overlaps closer than this to the chosen one make a pairing ambiguous.
pub const AMBIGUITY_MARGIN: f64 = 0.05;

/// For each sector, the level index of every eigenvector column.
fn column_levels(dec: &SpectralDecomposition) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = dec
        .sector_matrices()
        .iter()
        .map(|m| vec![usize::MAX; m.ncols()])
        .collect();
    for (li, level) in dec.levels().iter().enumerate() {
        for &i in &level.member_indices {
            let (s, c) = dec.locations()[i];
            out[s][c] = li;
        }
    }
    out
}

/// Raw `tr(P_i P_j)` between all levels of two decompositions of the same ring size.
fn raw_overlaps(a: &SpectralDecomposition, b: &SpectralDecomposition) -> DMatrix<f64> {
    assert_eq!(
        a.spec().n_sites(),
        b.spec().n_sites(),
        "decompositions of different ring sizes"
    );
    let la = column_levels(a);
    let lb = column_levels(b);
    let mut out = DMatrix::zeros(a.levels().len(), b.levels().len());
    for (s, (ma, mb)) in a
        .sector_matrices()
        .iter()
        .zip(b.sector_matrices())
        .enumerate()
    {
        let gram = ma.transpose() * mb;
        for ca in 0..gram.nrows() {
            for cb in 0..gram.ncols() {
                let g = gram[(ca, cb)];
                out[(la[s][ca], lb[s][cb])] += g * g;
            }
        }
    }
    out
}

/// Normalized overlap matrix `O_ij = tr(P_i P_j) / max(m_i, m_j)`.
pub fn overlap_matrix(a: &SpectralDecomposition, b: &SpectralDecomposition) -> DMatrix<f64> {
    let mut o = raw_overlaps(a, b);
    for (i, li) in a.levels().iter().enumerate() {
        for (j, lj) in b.levels().iter().enumerate() {
            o[(i, j)] /= li.multiplicity.max(lj.multiplicity) as f64;
        }
    }
    o
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchedPair {
    pub a: usize,
    pub b: usize,
    pub overlap: f64,
    /// Another candidate came within [`AMBIGUITY_MARGIN`] of this overlap.
    pub ambiguous: bool,
}

/// Result of matching the levels of two decompositions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelPairing {
    pub pairs: Vec<MatchedPair>,
    /// Crossing candidates on either side.
    pub unmatched_a: Vec<usize>,
    pub unmatched_b: Vec<usize>,
}

impl LevelPairing {
    pub fn partner_of(&self, a: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.a == a).map(|p| p.b)
    }

    pub fn is_identity(&self) -> bool {
        self.unmatched_a.is_empty()
            && self.unmatched_b.is_empty()
            && self.pairs.iter().all(|p| p.a == p.b)
    }
}

/// Greedy one-to-one assignment in descending overlap order.
///
/// `allowed(i, j)` can veto candidate pairs.
fn greedy_assign(
    o: &DMatrix<f64>,
    threshold: f64,
    allowed: impl Fn(usize, usize) -> bool,
) -> LevelPairing {
    let (rows, cols) = o.shape();
    let mut candidates: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..rows {
        for j in 0..cols {
            let v = o[(i, j)];
            if v > threshold && allowed(i, j) {
                candidates.push((i, j, v));
            }
        }
    }
    candidates.sort_by(|x, y| y.2.total_cmp(&x.2).then(x.0.cmp(&y.0)).then(x.1.cmp(&y.1)));

    let mut used_a = vec![false; rows];
    let mut used_b = vec![false; cols];
    let mut pairs = Vec::new();
    for (i, j, v) in candidates {
        if used_a[i] || used_b[j] {
            continue;
        }
        used_a[i] = true;
        used_b[j] = true;
        let rival_row = (0..cols).any(|jj| jj != j && o[(i, jj)] > v - AMBIGUITY_MARGIN);
        let rival_col = (0..rows).any(|ii| ii != i && o[(ii, j)] > v - AMBIGUITY_MARGIN);
        pairs.push(MatchedPair {
            a: i,
            b: j,
            overlap: v,
            ambiguous: rival_row || rival_col,
        });
    }
    pairs.sort_by_key(|p| p.a);
    LevelPairing {
        pairs,
        unmatched_a: (0..rows).filter(|&i| !used_a[i]).collect(),
        unmatched_b: (0..cols).filter(|&j| !used_b[j]).collect(),
    }
}

/// Pair the levels of `a` with those of `b` by maximum projector overlap.
pub fn match_levels(
    a: &SpectralDecomposition,
    b: &SpectralDecomposition,
    threshold: f64,
) -> LevelPairing {
    greedy_assign(&overlap_matrix(a, b), threshold, |_, _| true)
}

/// Eigenvectors of one level, kept so that a curve can be re-identified at
/// later α values without keeping the whole decomposition alive.
#[derive(Debug, Clone)]
pub(crate) struct LevelSignature {
    vectors: Vec<(usize, DVector<f64>)>,
    multiplicity: usize,
}

impl LevelSignature {
    pub(crate) fn of(dec: &SpectralDecomposition, level: usize) -> Self {
        let l = dec.level(level);
        let vectors = l
            .member_indices
            .iter()
            .map(|&i| {
                let (s, v) = dec.sector_vector(i);
                (s, v.into_owned())
            })
            .collect();
        Self {
            vectors,
            multiplicity: l.multiplicity,
        }
    }

    /// `tr(P_sig P_j)` for every level `j` of `dec`.
    pub(crate) fn raw_overlaps(
        &self,
        dec: &SpectralDecomposition,
        col_levels: &[Vec<usize>],
    ) -> Vec<f64> {
        let mut out = vec![0.0; dec.levels().len()];
        for (s, u) in &self.vectors {
            let g = dec.sector_matrices()[*s].tr_mul(u);
            for (c, gc) in g.iter().enumerate() {
                out[col_levels[*s][c]] += gc * gc;
            }
        }
        out
    }

    /// Best match in `dec` among levels of the same multiplicity, as
    /// `(level, normalized overlap)`.
    pub(crate) fn best_match(&self, dec: &SpectralDecomposition) -> Option<(usize, f64)> {
        let cols = column_levels(dec);
        let raw = self.raw_overlaps(dec, &cols);
        raw.iter()
            .enumerate()
            .filter(|(j, _)| dec.level(*j).multiplicity == self.multiplicity)
            .map(|(j, &r)| (j, r / self.multiplicity as f64))
            .max_by(|x, y| x.1.total_cmp(&y.1).then(y.0.cmp(&x.0)))
    }
}

/// An α-parametrized family of levels followed by projector continuity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelCurve {
    pub id: usize,
    pub multiplicity: usize,
    pub alpha_grid: Vec<f64>,
    /// Matched level index at each grid point; `None` where the curve is
    /// undefined (before its start or through an exact crossing).
    pub levels: Vec<Option<usize>>,
    pub energies: Vec<Option<f64>>,
    /// Grid indices where the match was ambiguous or the curve was lost
    /// after having started.
    pub flagged: Vec<usize>,
}

impl LevelCurve {
    pub fn valid_points(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.levels
            .iter()
            .enumerate()
            .filter_map(|(t, l)| l.map(|l| (t, l)))
    }

    pub fn n_valid(&self) -> usize {
        self.levels.iter().filter(|l| l.is_some()).count()
    }

    pub fn level_at(&self, t: usize) -> Option<usize> {
        self.levels.get(t).copied().flatten()
    }
}

struct Tracked {
    curve: LevelCurve,
    anchor: LevelSignature,
}

/// Threads level curves through a sequence of decompositions, one grid
/// point at a time.
///
/// Levels keep their curve while the best same-multiplicity overlap with the
/// curve's last valid projector exceeds the threshold. A level that no curve
/// claims starts a new curve.
pub struct CurveTracker {
    threshold: f64,
    alphas: Vec<f64>,
    curves: Vec<Tracked>,
}

impl CurveTracker {
    pub fn new(threshold: f64) -> Self {
        Self {
            threshold,
            alphas: Vec::new(),
            curves: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// Add the decomposition at the next grid point. Returns, for every level
    /// of `dec`, the id of the curve it was assigned to.
    pub fn push(&mut self, alpha: f64, dec: &SpectralDecomposition) -> Vec<usize> {
        let t = self.alphas.len();
        self.alphas.push(alpha);
        for tr in &mut self.curves {
            tr.curve.levels.push(None);
            tr.curve.energies.push(None);
        }

        let cols = column_levels(dec);
        let n_levels = dec.levels().len();
        let mut o = DMatrix::zeros(self.curves.len(), n_levels);
        for (ci, tr) in self.curves.iter().enumerate() {
            let raw = tr.anchor.raw_overlaps(dec, &cols);
            for (j, r) in raw.into_iter().enumerate() {
                o[(ci, j)] = r / tr.curve.multiplicity.max(dec.level(j).multiplicity) as f64;
            }
        }
        let pairing = greedy_assign(&o, self.threshold, |ci, j| {
            self.curves[ci].curve.multiplicity == dec.level(j).multiplicity
        });

        let mut owner = vec![usize::MAX; n_levels];
        for p in &pairing.pairs {
            let tr = &mut self.curves[p.a];
            tr.curve.levels[t] = Some(p.b);
            tr.curve.energies[t] = Some(dec.level(p.b).energy);
            if p.ambiguous {
                tr.curve.flagged.push(t);
            }
            tr.anchor = LevelSignature::of(dec, p.b);
            owner[p.b] = p.a;
        }
        for &ci in &pairing.unmatched_a {
            let c = &mut self.curves[ci].curve;
            if c.levels.iter().any(Option::is_some) {
                c.flagged.push(t);
            }
        }
        for &j in &pairing.unmatched_b {
            let id = self.curves.len();
            let mut levels = vec![None; t + 1];
            let mut energies = vec![None; t + 1];
            levels[t] = Some(j);
            energies[t] = Some(dec.level(j).energy);
            self.curves.push(Tracked {
                curve: LevelCurve {
                    id,
                    multiplicity: dec.level(j).multiplicity,
                    alpha_grid: Vec::new(),
                    levels,
                    energies,
                    flagged: Vec::new(),
                },
                anchor: LevelSignature::of(dec, j),
            });
            owner[j] = id;
        }
        owner
    }

    pub fn finish(self) -> Vec<LevelCurve> {
        let alphas = self.alphas;
        self.curves
            .into_iter()
            .map(|tr| {
                let mut c = tr.curve;
                c.alpha_grid = alphas.clone();
                c
            })
            .collect()
    }
}
