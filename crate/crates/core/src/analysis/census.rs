//! Level and projector censuses and the qualitative invariants of the
//! concurrence landscape.

use std::collections::BTreeMap;

use serde::Serialize;

use super::sweep::{PointData, SweepResult};
use super::Analyzer;
use crate::entanglement::concurrence_table;
use crate::error::Result;
use crate::model::{Alpha, Variant};

/// Separation → number of levels with concurrence above the threshold.
pub fn entangled_level_census(an: &Analyzer, alpha: Alpha) -> Result<BTreeMap<usize, usize>> {
    Ok(an.point(alpha)?.census(an.config().concurrence_threshold))
}

/// Multiplicity → number of levels.
pub fn projector_dimension_histogram(
    an: &Analyzer,
    alpha: Alpha,
) -> Result<BTreeMap<usize, usize>> {
    Ok(an
        .decompose(alpha)?
        .levels()
        .iter()
        .fold(BTreeMap::new(), |mut h, l| {
            *h.entry(l.multiplicity).or_insert(0) += 1;
            h
        }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectivityViolation {
    pub level: usize,
    pub energy: f64,
    pub separations: Vec<usize>,
}

/// Levels entangled at separation 1 or 2 that are also entangled at some
/// other separation.
pub fn distance_selectivity_check(
    an: &Analyzer,
    alpha: Alpha,
) -> Result<Vec<SelectivityViolation>> {
    let p = an.point(alpha)?;
    Ok(selectivity_violations(
        &p,
        an.config().concurrence_threshold,
    ))
}

pub fn selectivity_violations(p: &PointData, threshold: f64) -> Vec<SelectivityViolation> {
    (0..p.n_levels())
        .filter_map(|l| {
            let seps = p.entangled_separations(l, threshold);
            let short = seps.iter().any(|&d| d == 1 || d == 2);
            (short && seps.len() > 1).then(|| SelectivityViolation {
                level: l,
                energy: p.levels[l].energy,
                separations: seps,
            })
        })
        .collect()
}

/// Where a branch is entangled at one separation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationSpan {
    pub separation: usize,
    pub first_alpha: f64,
    pub last_alpha: f64,
    /// Positive at every grid point of the branch.
    pub whole_branch: bool,
}

/// A maximal run of curve-grid points along one curve at which the curve
/// carries two-site entanglement at some separation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Branch {
    pub curve: usize,
    pub multiplicity: usize,
    pub first_alpha: f64,
    pub last_alpha: f64,
    /// The branch covers the curve's whole grid range.
    pub spans_curve: bool,
    pub separations: Vec<SeparationSpan>,
}

impl Branch {
    pub fn distance_set(&self) -> Vec<usize> {
        self.separations.iter().map(|s| s.separation).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveEntanglement {
    pub curve: usize,
    pub multiplicity: usize,
    /// Every separation at which the curve is ever entangled.
    pub separations: Vec<usize>,
    /// Largest number of separations entangled at one grid point.
    pub max_simultaneous: usize,
    pub branches: usize,
}

/// Classification of tracked curves by the two-site entanglement they
/// carry, in two units: whole curves and entangled branches.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectorCensus {
    pub total_curves: usize,
    pub one_dimensional_curves: usize,
    pub entangled_curves: usize,
    /// Curves entangled at exactly one separation over the whole grid.
    pub single_distance_curves: usize,
    pub one_dimensional_entangled_curves: usize,
    pub entangled_branches: usize,
    pub single_distance_branches: usize,
    pub one_dimensional_branches: usize,
    pub curves: Vec<CurveEntanglement>,
    pub branches: Vec<Branch>,
}

impl ProjectorCensus {
    pub fn multi_distance_branches(&self) -> impl Iterator<Item = &Branch> {
        self.branches.iter().filter(|b| b.separations.len() > 1)
    }
}

pub fn entangled_projector_census(sw: &SweepResult, threshold: f64) -> ProjectorCensus {
    let mut curves = Vec::new();
    let mut branches = Vec::new();
    let alphas = sw.curve_alphas();
    for c in &sw.curves {
        let valid: Vec<(usize, usize)> = c.valid_points().collect();
        let seps: Vec<Vec<usize>> = valid
            .iter()
            .map(|&(t, l)| sw.curve_point(t).entangled_separations(l, threshold))
            .collect();
        let mut curve_branches = Vec::new();
        let mut i = 0;
        while i < valid.len() {
            if seps[i].is_empty() {
                i += 1;
                continue;
            }
            let start = i;
            while i < valid.len() && !seps[i].is_empty() {
                i += 1;
            }
            let run = start..i;
            let mut spans: Vec<SeparationSpan> = Vec::new();
            for d in 1..=sw.max_separation() {
                let hits: Vec<usize> = run.clone().filter(|&k| seps[k].contains(&d)).collect();
                if let (Some(&f), Some(&l)) = (hits.first(), hits.last()) {
                    spans.push(SeparationSpan {
                        separation: d,
                        first_alpha: alphas[valid[f].0],
                        last_alpha: alphas[valid[l].0],
                        whole_branch: hits.len() == run.len(),
                    });
                }
            }
            curve_branches.push(Branch {
                curve: c.id,
                multiplicity: c.multiplicity,
                first_alpha: alphas[valid[start].0],
                last_alpha: alphas[valid[i - 1].0],
                spans_curve: start == 0 && i == valid.len(),
                separations: spans,
            });
        }
        if !curve_branches.is_empty() {
            let mut all: Vec<usize> = seps.iter().flatten().copied().collect();
            all.sort_unstable();
            all.dedup();
            curves.push(CurveEntanglement {
                curve: c.id,
                multiplicity: c.multiplicity,
                separations: all,
                max_simultaneous: seps.iter().map(Vec::len).max().unwrap_or(0),
                branches: curve_branches.len(),
            });
        }
        branches.extend(curve_branches);
    }
    ProjectorCensus {
        total_curves: sw.curves.len(),
        one_dimensional_curves: sw.curves.iter().filter(|c| c.multiplicity == 1).count(),
        entangled_curves: curves.len(),
        single_distance_curves: curves.iter().filter(|c| c.separations.len() == 1).count(),
        one_dimensional_entangled_curves: curves.iter().filter(|c| c.multiplicity == 1).count(),
        entangled_branches: branches.len(),
        single_distance_branches: branches.iter().filter(|b| b.separations.len() == 1).count(),
        one_dimensional_branches: branches.iter().filter(|b| b.multiplicity == 1).count(),
        curves,
        branches,
    }
}

/// Points (α > 0) at which the lowest level is not entangled at separation
/// 1 only, with the separations it is entangled at.
pub fn ground_exclusivity_violations(sw: &SweepResult, threshold: f64) -> Vec<(Alpha, Vec<usize>)> {
    sw.points
        .iter()
        .filter(|p| p.alpha.value() > 0.0)
        .filter_map(|p| {
            let seps = p.entangled_separations(0, threshold);
            (seps != [1]).then_some((p.alpha, seps))
        })
        .collect()
}

/// `(α, level, excess)` for every excited level whose separation-1
/// concurrence exceeds the ground level's by more than `slack`.
pub fn dominance_violations(sw: &SweepResult, slack: f64) -> Vec<(Alpha, usize, f64)> {
    let mut out = Vec::new();
    for p in &sw.points {
        let ground = p.concurrence(0, 1);
        for l in 1..p.n_levels() {
            let excess = p.concurrence(l, 1) - ground;
            if excess > slack {
                out.push((p.alpha, l, excess));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundVariation {
    pub min: f64,
    pub max: f64,
    /// `(max − min) / max`.
    pub relative: f64,
    pub at_largest_alpha: f64,
}

/// Spread of the ground level's nearest-neighbour concurrence over the
/// finite positive points of the sweep.
pub fn ground_nn_variation(sw: &SweepResult) -> Option<GroundVariation> {
    let vals: Vec<f64> = sw
        .points
        .iter()
        .filter(|p| matches!(p.alpha, Alpha::Finite(a) if a > 0.0))
        .map(|p| p.concurrence(0, 1))
        .collect();
    let last = *vals.last()?;
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(GroundVariation {
        min,
        max,
        relative: (max - min) / max,
        at_largest_alpha: last,
    })
}

/// Entanglement at the bottom of the reversed (ferromagnetic) spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FerroOrdering {
    /// Number of lowest levels of `−H` with no two-site entanglement.
    pub unentangled_bottom: usize,
    /// Index (ascending in `−H`) of the first entangled level.
    pub first_entangled_level: Option<usize>,
    pub first_entangled_separations: Vec<usize>,
}

pub fn ferromagnetic_ordering(
    n_sites: usize,
    alpha: Alpha,
    threshold: f64,
) -> Result<FerroOrdering> {
    let an = Analyzer::new(n_sites, Variant::Ferromagnetic, Default::default())?;
    let dec = an.decompose(alpha)?;
    let table = concurrence_table(&dec, an.config().structure_tolerance, false)?;
    let nsep = n_sites / 2;
    let seps = |l: usize| -> Vec<usize> {
        (1..=nsep)
            .filter(|&d| table[l * nsep + d - 1].concurrence > threshold)
            .collect()
    };
    let first = (0..dec.levels().len()).find(|&l| !seps(l).is_empty());
    Ok(FerroOrdering {
        unentangled_bottom: first.unwrap_or(dec.levels().len()),
        first_entangled_level: first,
        first_entangled_separations: first.map(seps).unwrap_or_default(),
    })
}
