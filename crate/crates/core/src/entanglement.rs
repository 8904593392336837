//! Site reductions of uniform eigenstates and the entanglement measures
//! evaluated on them.
//!
//! Sites are numbered `1..=N` and site `n` is bit `n − 1` of a basis
//! integer. Two-site matrices use the ordered basis
//! `{|++⟩, |+−⟩, |−+⟩, |−−⟩}` of the pair `(j, k)`.

use nalgebra::{Matrix2, Matrix4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Alpha;
use crate::spectral::{SpectralDecomposition, UniformEigenstate};

/// Default bound on the off-structure entries of a reduced pair matrix.
pub const DEFAULT_STRUCTURE_TOLERANCE: f64 = 1e-10;

/// Concurrence above this counts as entanglement.
pub const DEFAULT_CONCURRENCE_THRESHOLD: f64 = 1e-10;

fn check_site(n_sites: usize, j: usize) -> Result<()> {
    if j == 0 || j > n_sites {
        return Err(Error::InvalidArgument(format!(
            "site {j} outside 1..={n_sites}"
        )));
    }
    Ok(())
}

fn check_pair(n_sites: usize, j: usize, k: usize) -> Result<()> {
    check_site(n_sites, j)?;
    check_site(n_sites, k)?;
    if j == k {
        return Err(Error::InvalidArgument(format!(
            "pair reduction needs two distinct sites, got ({j}, {k})"
        )));
    }
    Ok(())
}

/// Index of the pair state of bits `(bj, bk)` in `{|++⟩, |+−⟩, |−+⟩, |−−⟩}`.
#[inline]
fn pair_state(bj: usize, bk: usize) -> usize {
    2 * (1 - bj) + (1 - bk)
}

/// Bits `(bj, bk)` of pair state `p`.
#[inline]
fn pair_bits(p: usize) -> (usize, usize) {
    (1 - p / 2, 1 - p % 2)
}

/// Partial trace of a dense `2^N` density matrix onto sites `(j, k)`.
pub fn reduce_two_sites(rho: &UniformEigenstate, j: usize, k: usize) -> Result<Matrix4<f64>> {
    let n = rho.n_sites();
    check_pair(n, j, k)?;
    let (sj, sk) = (j - 1, k - 1);
    let mask = (1usize << sj) | (1usize << sk);
    let m = rho.rho();
    let mut out = Matrix4::<f64>::zeros();
    for rest in (0..1usize << n).filter(|x| x & mask == 0) {
        for p in 0..4 {
            let (pj, pk) = pair_bits(p);
            let x = rest | (pj << sj) | (pk << sk);
            for q in 0..4 {
                let (qj, qk) = pair_bits(q);
                let y = rest | (qj << sj) | (qk << sk);
                out[(p, q)] += m[(x, y)];
            }
        }
    }
    Ok(out)
}

/// Partial trace of a dense density matrix onto site `j`, basis `{|+⟩, |−⟩}`.
pub fn reduce_one_site(rho: &UniformEigenstate, j: usize) -> Result<Matrix2<f64>> {
    let n = rho.n_sites();
    check_site(n, j)?;
    let bit = 1usize << (j - 1);
    let m = rho.rho();
    let mut out = Matrix2::<f64>::zeros();
    for rest in (0..1usize << n).filter(|x| x & bit == 0) {
        let up = rest | bit;
        out[(0, 0)] += m[(up, up)];
        out[(0, 1)] += m[(up, rest)];
        out[(1, 0)] += m[(rest, up)];
        out[(1, 1)] += m[(rest, rest)];
    }
    Ok(out)
}

/// Pair reduction of `ρ(E)` for level `level`, computed from its eigenvectors
/// without materializing the `2^N` projector.
pub fn level_pair_reduction(
    dec: &SpectralDecomposition,
    level: usize,
    j: usize,
    k: usize,
) -> Result<Matrix4<f64>> {
    let n = dec.spec().n_sites();
    check_pair(n, j, k)?;
    let (sj, sk) = (j - 1, k - 1);
    let mask = (1usize << sj) | (1usize << sk);
    let lv = dec.level(level);
    let mut out = Matrix4::<f64>::zeros();
    for &i in &lv.member_indices {
        let (s, v) = dec.sector_vector(i);
        for (a, &x) in dec.index_map(s).iter().enumerate() {
            let va = v[a];
            if va == 0.0 {
                continue;
            }
            let p = pair_state((x >> sj) & 1, (x >> sk) & 1);
            let rest = x & !mask;
            for q in 0..4 {
                let (qj, qk) = pair_bits(q);
                let y = rest | (qj << sj) | (qk << sk);
                // outside the sector the coefficient is zero
                if y.count_ones() as usize != s {
                    continue;
                }
                out[(p, q)] += va * v[dec.position(y)];
            }
        }
    }
    // tr = multiplicity analytically; the computed trace keeps unit trace
    // exact to rounding
    let tr = out.trace();
    Ok(out / tr)
}

/// Single-site reduction of `ρ(E)` for level `level` from its eigenvectors.
pub fn level_site_reduction(
    dec: &SpectralDecomposition,
    level: usize,
    j: usize,
) -> Result<Matrix2<f64>> {
    check_site(dec.spec().n_sites(), j)?;
    let bit = 1usize << (j - 1);
    let lv = dec.level(level);
    let mut out = Matrix2::<f64>::zeros();
    for &i in &lv.member_indices {
        let (s, v) = dec.sector_vector(i);
        for (a, &x) in dec.index_map(s).iter().enumerate() {
            let idx = if x & bit != 0 { 0 } else { 1 };
            out[(idx, idx)] += v[a] * v[a];
            // off-diagonal entries connect different sectors and vanish
        }
    }
    // tr = multiplicity analytically; the computed trace keeps unit trace
    // exact to rounding
    let tr = out.trace();
    Ok(out / tr)
}

/// The `(a, b, c)` parametrization of a reduced pair matrix
/// `diag(a, b, b, a)` with `c` on the middle antidiagonal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSpinState {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Largest deviation of the source matrix from the structured one.
    pub structure_residual: f64,
    pub site_pair: Option<(usize, usize)>,
    pub source_level: Option<usize>,
}

impl TwoSpinState {
    pub fn structured(a: f64, b: f64, c: f64) -> Self {
        Self {
            a,
            b,
            c,
            structure_residual: 0.0,
            site_pair: None,
            source_level: None,
        }
    }

    pub fn matrix(&self) -> Matrix4<f64> {
        let (a, b, c) = (self.a, self.b, self.c);
        Matrix4::new(
            a, 0.0, 0.0, 0.0, 0.0, b, c, 0.0, 0.0, c, b, 0.0, 0.0, 0.0, 0.0, a,
        )
    }

    /// Checked invariants `a + b = 1/2` and `|c| ≤ b`, reported instead of
    /// clamped.
    pub fn invariant_violations(&self, tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        if (self.a + self.b - 0.5).abs() > tol {
            out.push(format!("a + b = {} differs from 1/2", self.a + self.b));
        }
        if self.c.abs() > self.b + tol {
            out.push(format!("|c| = {} exceeds b = {}", self.c.abs(), self.b));
        }
        if self.a < -tol || self.b < -tol {
            out.push(format!(
                "negative populations a = {}, b = {}",
                self.a, self.b
            ));
        }
        out
    }
}

/// Fit the `(a, b, c)` structure to a reduced pair matrix.
pub fn extract_abc(rho_pair: &Matrix4<f64>, structure_tolerance: f64) -> Result<TwoSpinState> {
    let a = 0.5 * (rho_pair[(0, 0)] + rho_pair[(3, 3)]);
    let b = 0.5 * (rho_pair[(1, 1)] + rho_pair[(2, 2)]);
    let c = 0.5 * (rho_pair[(1, 2)] + rho_pair[(2, 1)]);
    let mut state = TwoSpinState::structured(a, b, c);
    state.structure_residual = (rho_pair - state.matrix()).amax();
    if !(state.structure_residual < structure_tolerance) {
        return Err(Error::StructureViolation {
            residual: state.structure_residual,
            tolerance: structure_tolerance,
        });
    }
    Ok(state)
}

/// `max{2(|c| − a), 0}`.
pub fn concurrence_structured(state: &TwoSpinState) -> f64 {
    (2.0 * (state.c.abs() - state.a)).max(0.0)
}

/// Closed-form Wootters concurrence of a real X-form two-qubit matrix.
pub fn concurrence_xstate_oracle(rho_pair: &Matrix4<f64>, structure_tolerance: f64) -> Result<f64> {
    for r in 0..4 {
        for c in 0..4 {
            let on_x = r == c || r + c == 3;
            if !on_x && rho_pair[(r, c)].abs() >= structure_tolerance {
                return Err(Error::InvalidArgument(format!(
                    "matrix is not X-form: entry ({}, {}) = {:e}",
                    r + 1,
                    c + 1,
                    rho_pair[(r, c)]
                )));
            }
        }
    }
    let m = rho_pair;
    let outer = m[(0, 3)].abs() - (m[(1, 1)] * m[(2, 2)]).max(0.0).sqrt();
    let inner = m[(1, 2)].abs() - (m[(0, 0)] * m[(3, 3)]).max(0.0).sqrt();
    Ok(2.0 * outer.max(inner).max(0.0))
}

/// `2 − (2/N) Σ_j tr(ρ_j²)` from single-site reductions.
pub fn meyer_wallach_from_sites(sites: &[Matrix2<f64>]) -> f64 {
    let n = sites.len() as f64;
    let purity: f64 = sites.iter().map(|r| (r * r).trace()).sum();
    2.0 - 2.0 / n * purity
}

pub fn meyer_wallach(rho: &UniformEigenstate) -> Result<f64> {
    let sites = (1..=rho.n_sites())
        .map(|j| reduce_one_site(rho, j))
        .collect::<Result<Vec<_>>>()?;
    Ok(meyer_wallach_from_sites(&sites))
}

/// Inner normalization of the pair-purity global measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OliveiraNormalization {
    /// `1/(N−1)` in front of the sum over `N` sites.
    #[default]
    AsPrinted,
    /// `1/N`, i.e. a plain mean over sites.
    OverN,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OliveiraValue {
    pub value: f64,
    pub domain_warning: Option<String>,
}

/// `E = (4/3)(1/(N−1)) Σ_{j=1}^{N−1} (1 − κ Σ_{k=1}^{N} tr(ρ_{k,k+j}²))`,
/// with `κ` chosen by `normalization` and `k + j` taken cyclically.
///
/// `pair_purity(k, l)` returns `tr(ρ_{k,l}²)` for one-based sites.
pub fn oliveira_from_pair_purity(
    n_sites: usize,
    normalization: OliveiraNormalization,
    mut pair_purity: impl FnMut(usize, usize) -> Result<f64>,
) -> Result<OliveiraValue> {
    let n = n_sites;
    let kappa = match normalization {
        OliveiraNormalization::AsPrinted => 1.0 / (n as f64 - 1.0),
        OliveiraNormalization::OverN => 1.0 / n as f64,
    };
    let mut total = 0.0;
    for j in 1..n {
        let mut s = 0.0;
        for k in 1..=n {
            let l = (k - 1 + j) % n + 1;
            s += pair_purity(k, l)?;
        }
        total += 1.0 - kappa * s;
    }
    let domain_warning = (n < 3 && normalization == OliveiraNormalization::AsPrinted)
        .then(|| format!("as-printed normalization is not meaningful for N = {n}"));
    Ok(OliveiraValue {
        value: 4.0 / 3.0 / (n as f64 - 1.0) * total,
        domain_warning,
    })
}

/// The global pair-purity measure evaluated on a dense density matrix.
pub fn oliveira_global(
    rho: &UniformEigenstate,
    normalization: OliveiraNormalization,
) -> Result<OliveiraValue> {
    oliveira_from_pair_purity(rho.n_sites(), normalization, |k, l| {
        let r = reduce_two_sites(rho, k, l)?;
        Ok((r * r).trace())
    })
}

/// Same measure evaluated from the level's eigenvectors.
pub fn level_oliveira(
    dec: &SpectralDecomposition,
    level: usize,
    normalization: OliveiraNormalization,
) -> Result<OliveiraValue> {
    oliveira_from_pair_purity(dec.spec().n_sites(), normalization, |k, l| {
        let r = level_pair_reduction(dec, level, k, l)?;
        Ok((r * r).trace())
    })
}

/// Meyer-Wallach value of a level from its eigenvectors.
pub fn level_meyer_wallach(dec: &SpectralDecomposition, level: usize) -> Result<f64> {
    let sites = (1..=dec.spec().n_sites())
        .map(|j| level_site_reduction(dec, level, j))
        .collect::<Result<Vec<_>>>()?;
    Ok(meyer_wallach_from_sites(&sites))
}

/// Concurrence of one level at one ring separation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcurrenceRecord {
    pub alpha: Alpha,
    pub level_energy: f64,
    pub level_index: usize,
    pub multiplicity: usize,
    pub separation: usize,
    pub concurrence: f64,
    pub state: TwoSpinState,
}

/// Two-site states of level `level` for separations `1..=⌊N/2⌋`, from the
/// representative pairs `(1, 1 + d)`.
///
/// With `verify_translates`, every translate `(k, k + d)` is reduced as well
/// and must agree with the representative within `structure_tolerance`.
pub fn level_two_spin_states(
    dec: &SpectralDecomposition,
    level: usize,
    structure_tolerance: f64,
    verify_translates: bool,
) -> Result<Vec<TwoSpinState>> {
    let n = dec.spec().n_sites();
    (1..=n / 2)
        .map(|d| {
            let rep = level_pair_reduction(dec, level, 1, 1 + d)?;
            if verify_translates {
                for k in 2..=n {
                    let l = (k - 1 + d) % n + 1;
                    let other = level_pair_reduction(dec, level, k, l)?;
                    let dev = (other - rep).amax();
                    if !(dev < structure_tolerance) {
                        return Err(Error::StructureViolation {
                            residual: dev,
                            tolerance: structure_tolerance,
                        });
                    }
                }
            }
            let mut st = extract_abc(&rep, structure_tolerance)?;
            st.site_pair = Some((1, 1 + d));
            st.source_level = Some(level);
            Ok(st)
        })
        .collect()
}

/// Concurrence records for every level and separation, level-major.
pub fn concurrence_table(
    dec: &SpectralDecomposition,
    structure_tolerance: f64,
    verify_translates: bool,
) -> Result<Vec<ConcurrenceRecord>> {
    let alpha = dec.spec().alpha();
    let mut out = Vec::new();
    for (li, level) in dec.levels().iter().enumerate() {
        for (di, st) in level_two_spin_states(dec, li, structure_tolerance, verify_translates)?
            .into_iter()
            .enumerate()
        {
            out.push(ConcurrenceRecord {
                alpha,
                level_energy: level.energy,
                level_index: li,
                multiplicity: level.multiplicity,
                separation: di + 1,
                concurrence: concurrence_structured(&st),
                state: st,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{RingSpec, Variant};
    use crate::spectral::diagonalize;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn dec(n: usize, a: Alpha) -> SpectralDecomposition {
        diagonalize(&RingSpec::new(n, a, Variant::Standard).unwrap()).unwrap()
    }

    fn singlet_reduction() -> Matrix4<f64> {
        Matrix4::new(
            0.0, 0.0, 0.0, 0.0, 0.0, 0.5, -0.5, 0.0, 0.0, -0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0,
        )
    }

    #[test]
    fn singlet_reductions() {
        let d = dec(2, Alpha::Finite(1.0));
        let st = d.uniform_state(0);
        let r = reduce_two_sites(&st, 1, 2).unwrap();
        assert!((r - singlet_reduction()).amax() < 1e-12);
        let r1 = reduce_one_site(&st, 1).unwrap();
        assert!((r1 - Matrix2::identity() * 0.5).amax() < 1e-12);

        let abc = extract_abc(&r, DEFAULT_STRUCTURE_TOLERANCE).unwrap();
        assert_abs_diff_eq!(abc.a, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(abc.b, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(abc.c, -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(concurrence_structured(&abc), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            concurrence_xstate_oracle(&r, 1e-10).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn pair_reduction_rejects_equal_sites() {
        let d = dec(3, Alpha::Finite(1.0));
        let st = d.uniform_state(0);
        assert!(matches!(
            reduce_two_sites(&st, 2, 2),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            reduce_two_sites(&st, 0, 2),
            Err(Error::InvalidArgument(_))
        ));
        assert!(level_pair_reduction(&d, 0, 4, 1).is_err());
    }

    #[test]
    fn maximally_mixed_and_hand_cases() {
        let mixed = Matrix4::identity() * 0.25;
        let st = extract_abc(&mixed, 1e-10).unwrap();
        assert_eq!(
            (st.a, st.b, st.c, st.structure_residual),
            (0.25, 0.25, 0.0, 0.0)
        );
        assert_eq!(concurrence_structured(&st), 0.0);

        let s = TwoSpinState::structured(0.1, 0.4, 0.35);
        assert_abs_diff_eq!(concurrence_structured(&s), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(
            concurrence_xstate_oracle(&s.matrix(), 1e-10).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        let s = TwoSpinState::structured(0.3, 0.2, 0.15);
        assert_eq!(concurrence_structured(&s), 0.0);
        assert_eq!(concurrence_xstate_oracle(&s.matrix(), 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn off_structure_entries_are_rejected() {
        let mut m = Matrix4::identity() * 0.25;
        m[(0, 3)] = 0.01;
        m[(3, 0)] = 0.01;
        assert!(matches!(
            extract_abc(&m, 1e-10),
            Err(Error::StructureViolation { .. })
        ));
        let mut m = Matrix4::identity() * 0.25;
        m[(0, 1)] = 0.01;
        assert!(matches!(
            concurrence_xstate_oracle(&m, 1e-10),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn vector_and_dense_routes_agree() {
        let d = dec(6, Alpha::Finite(1.3));
        for li in [0, 3, d.levels().len() - 1] {
            let st = d.uniform_state(li);
            for (j, k) in [(1, 2), (1, 4), (3, 5), (6, 2)] {
                let dense = reduce_two_sites(&st, j, k).unwrap();
                let fast = level_pair_reduction(&d, li, j, k).unwrap();
                assert!((dense - fast).amax() < 1e-13);
            }
            for j in 1..=6 {
                let dense = reduce_one_site(&st, j).unwrap();
                let fast = level_site_reduction(&d, li, j).unwrap();
                assert!((dense - fast).amax() < 1e-13);
            }
        }
    }

    #[test]
    fn single_sites_are_maximally_mixed() {
        let d = dec(5, Alpha::Finite(3.3));
        for li in 0..d.levels().len() {
            for j in 1..=5 {
                let r = level_site_reduction(&d, li, j).unwrap();
                assert!((r - Matrix2::identity() * 0.5).amax() < 1e-12);
            }
            assert_abs_diff_eq!(level_meyer_wallach(&d, li).unwrap(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn meyer_wallach_extremes() {
        // |++…+⟩ is a product state
        let mut rho = DMatrix::zeros(8, 8);
        rho[(7, 7)] = 1.0;
        let st = UniformEigenstate::from_density(3, rho).unwrap();
        assert_abs_diff_eq!(meyer_wallach(&st).unwrap(), 0.0, epsilon = 1e-15);
        let half = Matrix2::identity() * 0.5;
        assert_abs_diff_eq!(meyer_wallach_from_sites(&[half; 4]), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn oliveira_with_uniform_pair_purity() {
        for n in [3usize, 5, 8] {
            let p = 0.37;
            let v = oliveira_from_pair_purity(n, OliveiraNormalization::AsPrinted, |_, _| Ok(p))
                .unwrap();
            let nf = n as f64;
            assert_abs_diff_eq!(
                v.value,
                4.0 / 3.0 * (1.0 - p * nf / (nf - 1.0)),
                epsilon = 1e-14
            );
            assert!(v.domain_warning.is_none());
            let v =
                oliveira_from_pair_purity(n, OliveiraNormalization::OverN, |_, _| Ok(p)).unwrap();
            assert_abs_diff_eq!(v.value, 4.0 / 3.0 * (1.0 - p), epsilon = 1e-14);
        }
        let v =
            oliveira_from_pair_purity(2, OliveiraNormalization::AsPrinted, |_, _| Ok(0.5)).unwrap();
        assert!(v.domain_warning.is_some());
    }

    #[test]
    fn oliveira_routes_agree() {
        let d = dec(6, Alpha::Finite(0.8));
        for li in 0..d.levels().len() {
            let dense =
                oliveira_global(&d.uniform_state(li), OliveiraNormalization::AsPrinted).unwrap();
            let fast = level_oliveira(&d, li, OliveiraNormalization::AsPrinted).unwrap();
            assert_abs_diff_eq!(dense.value, fast.value, epsilon = 1e-12);
        }
    }

    #[test]
    fn concurrence_table_layout() {
        let d = dec(6, Alpha::Finite(1.0));
        let table = concurrence_table(&d, DEFAULT_STRUCTURE_TOLERANCE, true).unwrap();
        assert_eq!(table.len(), d.levels().len() * 3);
        for (i, r) in table.iter().enumerate() {
            assert_eq!(r.level_index, i / 3);
            assert_eq!(r.separation, i % 3 + 1);
            assert!(r.state.invariant_violations(1e-10).is_empty());
        }
    }
}
