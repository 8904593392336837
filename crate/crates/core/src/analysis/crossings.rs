//! Localization of level crossings and entanglement thresholds by bisection
//! along tracked curves.

use rayon::prelude::*;
use serde::Serialize;

use super::sweep::SweepResult;
use super::Analyzer;
use crate::entanglement::{concurrence_structured, extract_abc, level_pair_reduction};
use crate::error::Result;
use crate::spectral::{cluster_levels, match_levels, LevelSignature, SpectralDecomposition};

/// Gaps in a union of entangled intervals narrower than this many
/// resolutions are attributed to bisection round-off and closed.
const GAP_SLACK: f64 = 4.0;

/// Step of the descending scan used to find the last crossing.
const LAST_CROSSING_STEP: f64 = 0.01;

/// Lower end of the descending scan.
const LAST_CROSSING_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    /// Two curves exchange energy order.
    Crossing,
    /// Concurrence becomes positive along a curve (increasing α).
    Onset,
    /// Concurrence drops to zero along a curve (increasing α).
    Offset,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossingEvent {
    pub kind: EventKind,
    /// Midpoint of the final bracket.
    pub alpha: f64,
    /// Final bracket `[low, high]`.
    pub bracket: [f64; 2],
    /// Participating curve ids (or level indices at the scan start for
    /// [`find_last_crossing`]).
    pub curves: Vec<usize>,
    pub separation: Option<usize>,
    /// A threshold event whose final bracket also contains a change of the
    /// curve's energy rank, i.e. a concurrence jump at a crossing.
    pub crossing_coincident: bool,
    /// For crossings: whether clustering with a tolerance of the order of the
    /// bracket width at the midpoint merges levels (the count dips).
    pub count_dip: Option<bool>,
    /// Bisection stopped early because a curve could not be followed.
    pub lost_track: bool,
}

impl CrossingEvent {
    pub fn width(&self) -> f64 {
        self.bracket[1] - self.bracket[0]
    }
}

/// Outcome of a bisection between two α values (in either order).
struct Bisection {
    from: f64,
    to: f64,
    g_from: f64,
    g_to: f64,
    levels_from: Vec<usize>,
    levels_to: Vec<usize>,
    /// Decomposition at the midpoint of the final bracket with the curves'
    /// levels there.
    mid: Option<(SpectralDecomposition, Vec<usize>)>,
    lost: bool,
}

impl Bisection {
    fn bracket(&self) -> [f64; 2] {
        [self.from.min(self.to), self.from.max(self.to)]
    }

    fn midpoint(&self) -> f64 {
        0.5 * (self.from + self.to)
    }
}

/// Follow `sigs` from `from` towards `to`, keeping the invariant that the
/// sign of `g` at `from` differs from that at `to`.
///
/// `g(dec, levels)` is evaluated on the curves' levels at a probe α.
#[allow(clippy::too_many_arguments)]
fn bisect(
    an: &Analyzer,
    mut from: f64,
    mut to: f64,
    mut sigs: Vec<LevelSignature>,
    mut g_from: f64,
    mut g_to: f64,
    mut levels_from: Vec<usize>,
    mut levels_to: Vec<usize>,
    g: impl Fn(&SpectralDecomposition, &[usize]) -> Result<f64>,
) -> Result<Bisection> {
    let cfg = an.config();
    let mut lost = false;
    while (to - from).abs() > cfg.resolution {
        let mid = 0.5 * (from + to);
        let dec = an.decompose_at(mid)?;
        let Some(levels) = follow(&sigs, &dec, cfg.overlap_threshold) else {
            lost = true;
            break;
        };
        let gm = g(&dec, &levels)?;
        if (gm > 0.0) == (g_from > 0.0) {
            from = mid;
            g_from = gm;
            sigs = levels
                .iter()
                .map(|&l| LevelSignature::of(&dec, l))
                .collect();
            levels_from = levels;
        } else {
            to = mid;
            g_to = gm;
            levels_to = levels;
        }
    }
    let mid = if lost {
        None
    } else {
        let m = 0.5 * (from + to);
        let dec = an.decompose_at(m)?;
        follow(&sigs, &dec, cfg.overlap_threshold).map(|l| (dec, l))
    };
    Ok(Bisection {
        from,
        to,
        g_from,
        g_to,
        levels_from,
        levels_to,
        mid,
        lost,
    })
}

/// Levels of `dec` continuing each signature, if all are found, above the
/// overlap threshold and distinct.
fn follow(
    sigs: &[LevelSignature],
    dec: &SpectralDecomposition,
    threshold: f64,
) -> Option<Vec<usize>> {
    let levels: Vec<usize> = sigs
        .iter()
        .map(|s| {
            s.best_match(dec)
                .filter(|&(_, o)| o > threshold)
                .map(|(l, _)| l)
        })
        .collect::<Option<_>>()?;
    let mut sorted = levels.clone();
    sorted.sort_unstable();
    sorted.dedup();
    (sorted.len() == levels.len()).then_some(levels)
}

fn energy_gap(dec: &SpectralDecomposition, levels: &[usize]) -> Result<f64> {
    Ok(dec.level(levels[0]).energy - dec.level(levels[1]).energy)
}

/// Does clustering with a tolerance covering the end-point gaps merge
/// levels at the bracket midpoint?
fn count_dip(b: &Bisection, default_tolerance: f64) -> Option<bool> {
    let (dec, _) = b.mid.as_ref()?;
    let scale = dec.spectral_range().max(1.0);
    let tol = (b.g_from.abs().max(b.g_to.abs()) / scale).max(default_tolerance);
    let (coarse, _) = cluster_levels(dec.eigenvalues(), tol);
    Some(coarse.len() < dec.levels().len())
}

/// Bisect the energy-order exchange of two levels between `from` and `to`.
#[allow(clippy::too_many_arguments)]
fn bisect_crossing(
    an: &Analyzer,
    from: f64,
    dec_from: &SpectralDecomposition,
    levels_from: [usize; 2],
    to: f64,
    dec_to: &SpectralDecomposition,
    levels_to: [usize; 2],
    curves: Vec<usize>,
) -> Result<CrossingEvent> {
    let sigs = levels_from
        .iter()
        .map(|&l| LevelSignature::of(dec_from, l))
        .collect();
    let b = bisect(
        an,
        from,
        to,
        sigs,
        energy_gap(dec_from, &levels_from)?,
        energy_gap(dec_to, &levels_to)?,
        levels_from.to_vec(),
        levels_to.to_vec(),
        energy_gap,
    )?;
    Ok(CrossingEvent {
        kind: EventKind::Crossing,
        alpha: b.midpoint(),
        bracket: b.bracket(),
        curves,
        separation: None,
        crossing_coincident: false,
        count_dip: count_dip(&b, an.config().cluster_tolerance),
        lost_track: b.lost,
    })
}

/// Consecutive curve-grid indices at which both curves are defined and
/// their energy order differs.
fn sign_changes(sw: &SweepResult, a: usize, b: usize) -> Vec<(usize, usize)> {
    let (ca, cb) = (&sw.curves[a], &sw.curves[b]);
    let common: Vec<(usize, f64)> = (0..sw.curve_points.len())
        .filter_map(|t| Some((t, ca.energies[t]? - cb.energies[t]?)))
        .collect();
    common
        .windows(2)
        .filter(|w| (w[0].1 > 0.0) != (w[1].1 > 0.0))
        .map(|w| (w[0].0, w[1].0))
        .collect()
}

fn crossing_between(
    an: &Analyzer,
    sw: &SweepResult,
    a: usize,
    b: usize,
    t0: usize,
    t1: usize,
) -> Result<CrossingEvent> {
    let alphas = (
        sw.curve_point(t0).alpha.value(),
        sw.curve_point(t1).alpha.value(),
    );
    let d0 = an.decompose_at(alphas.0)?;
    let d1 = an.decompose_at(alphas.1)?;
    let lv = |t: usize| {
        [
            sw.curves[a].levels[t].unwrap(),
            sw.curves[b].levels[t].unwrap(),
        ]
    };
    bisect_crossing(an, alphas.0, &d0, lv(t0), alphas.1, &d1, lv(t1), vec![a, b])
}

/// Every energy-order exchange of curves `a` and `b` on the sweep, bisected.
pub fn locate_crossings(
    an: &Analyzer,
    sw: &SweepResult,
    a: usize,
    b: usize,
) -> Result<Vec<CrossingEvent>> {
    sign_changes(sw, a, b)
        .into_iter()
        .map(|(t0, t1)| crossing_between(an, sw, a, b, t0, t1))
        .collect()
}

/// The lowest-α crossing of curves `a` and `b`, or `None` if their energy
/// order never changes on the grid.
pub fn locate_crossing(
    an: &Analyzer,
    sw: &SweepResult,
    a: usize,
    b: usize,
) -> Result<Option<CrossingEvent>> {
    match sign_changes(sw, a, b).first() {
        Some(&(t0, t1)) => crossing_between(an, sw, a, b, t0, t1).map(Some),
        None => Ok(None),
    }
}

/// All crossings between tracked curves on the sweep, sorted by α.
pub fn find_crossings(an: &Analyzer, sw: &SweepResult) -> Result<Vec<CrossingEvent>> {
    let n = sw.curves.len();
    let jobs: Vec<(usize, usize, usize, usize)> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .flat_map(|(a, b)| {
            sign_changes(sw, a, b)
                .into_iter()
                .map(move |(t0, t1)| (a, b, t0, t1))
        })
        .collect();
    let mut events = jobs
        .par_iter()
        .map(|&(a, b, t0, t1)| crossing_between(an, sw, a, b, t0, t1))
        .collect::<Result<Vec<_>>>()?;
    events.sort_by(|x, y| {
        x.alpha
            .total_cmp(&y.alpha)
            .then_with(|| x.curves.cmp(&y.curves))
    });
    Ok(events)
}

/// The largest α below `alpha_max` at which two levels exchange order.
///
/// Scans downward in steps of 0.01 to α = 0.05, matching levels between
/// neighbouring points by projector overlap; the first interval with an
/// order exchange is bisected. `curves` of the result are level indices at
/// the upper end of the interval.
pub fn find_last_crossing(an: &Analyzer, alpha_max: f64) -> Result<Option<CrossingEvent>> {
    let floor = LAST_CROSSING_FLOOR.min(alpha_max);
    let steps = ((alpha_max - floor) / LAST_CROSSING_STEP).ceil() as usize;
    let alphas: Vec<f64> = (0..=steps)
        .map(|i| (alpha_max - i as f64 * LAST_CROSSING_STEP).max(floor))
        .collect();
    let threshold = an.config().overlap_threshold;
    let mut prev: Option<(f64, SpectralDecomposition)> = None;
    for chunk in alphas.chunks(32) {
        let decs = chunk
            .par_iter()
            .map(|&a| Ok((a, an.decompose_at(a)?)))
            .collect::<Result<Vec<_>>>()?;
        for (a, dec) in decs {
            if let Some((pa, pdec)) = &prev {
                let pairing = match_levels(pdec, &dec, threshold);
                let mut events = Vec::new();
                for (x, px) in pairing.pairs.iter().enumerate() {
                    for py in &pairing.pairs[x + 1..] {
                        let (i, j) = if px.a < py.a { (px, py) } else { (py, px) };
                        if i.b > j.b {
                            events.push(bisect_crossing(
                                an,
                                *pa,
                                pdec,
                                [i.a, j.a],
                                a,
                                &dec,
                                [i.b, j.b],
                                vec![i.a, j.a],
                            )?);
                        }
                    }
                }
                if let Some(e) = events
                    .into_iter()
                    .max_by(|x, y| x.alpha.total_cmp(&y.alpha))
                {
                    return Ok(Some(e));
                }
            }
            prev = Some((a, dec));
        }
    }
    Ok(None)
}

/// Onset and offset events of the concurrence at `separation` along
/// `curve`, bisected to the configured resolution.
pub fn entanglement_boundaries(
    an: &Analyzer,
    sw: &SweepResult,
    curve: usize,
    separation: usize,
) -> Result<Vec<CrossingEvent>> {
    let cfg = an.config();
    let thr = cfg.concurrence_threshold;
    let c = &sw.curves[curve];
    let valid: Vec<(usize, usize)> = c.valid_points().collect();
    let mut out = Vec::new();
    for w in valid.windows(2) {
        let ((t0, l0), (t1, l1)) = (w[0], w[1]);
        let c0 = sw.curve_point(t0).concurrence(l0, separation);
        let c1 = sw.curve_point(t1).concurrence(l1, separation);
        if (c0 > thr) == (c1 > thr) {
            continue;
        }
        let a0 = sw.curve_point(t0).alpha.value();
        let a1 = sw.curve_point(t1).alpha.value();
        let d0 = an.decompose_at(a0)?;
        let g = |dec: &SpectralDecomposition, levels: &[usize]| -> Result<f64> {
            let r = level_pair_reduction(dec, levels[0], 1, 1 + separation)?;
            Ok(concurrence_structured(&extract_abc(&r, cfg.structure_tolerance)?) - thr)
        };
        let b = bisect(
            an,
            a0,
            a1,
            vec![LevelSignature::of(&d0, l0)],
            c0 - thr,
            c1 - thr,
            vec![l0],
            vec![l1],
            g,
        )?;
        out.push(CrossingEvent {
            kind: if c1 > thr {
                EventKind::Onset
            } else {
                EventKind::Offset
            },
            alpha: b.midpoint(),
            bracket: b.bracket(),
            curves: vec![curve],
            separation: Some(separation),
            crossing_coincident: b.levels_from != b.levels_to,
            count_dip: None,
            lost_track: b.lost,
        });
    }
    Ok(out)
}

/// Where any level carries entanglement at one separation, as a union of
/// per-curve intervals within the curve grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationCoverage {
    pub separation: usize,
    pub intervals: Vec<[f64; 2]>,
    /// Complement of `intervals` within the curve grid range.
    pub gaps: Vec<[f64; 2]>,
    pub events: Vec<CrossingEvent>,
}

impl SeparationCoverage {
    /// Gaps that do not touch either end of the grid.
    pub fn interior_gaps(&self, grid: [f64; 2]) -> Vec<[f64; 2]> {
        self.gaps
            .iter()
            .copied()
            .filter(|g| g[0] > grid[0] && g[1] < grid[1])
            .collect()
    }
}

/// Union over all curves of the α-intervals with positive concurrence at
/// `separation`, with interval ends refined by bisection.
pub fn separation_coverage(
    an: &Analyzer,
    sw: &SweepResult,
    separation: usize,
) -> Result<SeparationCoverage> {
    let thr = an.config().concurrence_threshold;
    let alphas = sw.curve_alphas();
    let (Some(&lo), Some(&hi)) = (alphas.first(), alphas.last()) else {
        return Ok(SeparationCoverage {
            separation,
            intervals: vec![],
            gaps: vec![],
            events: vec![],
        });
    };
    let per_curve = (0..sw.curves.len())
        .into_par_iter()
        .map(|ci| -> Result<(Vec<[f64; 2]>, Vec<CrossingEvent>)> {
            let valid: Vec<(usize, usize)> = sw.curves[ci].valid_points().collect();
            let positive: Vec<bool> = valid
                .iter()
                .map(|&(t, l)| sw.curve_point(t).concurrence(l, separation) > thr)
                .collect();
            if !positive.iter().any(|&p| p) {
                return Ok((vec![], vec![]));
            }
            let events = entanglement_boundaries(an, sw, ci, separation)?;
            let mut intervals = Vec::new();
            let mut start = positive[0].then(|| alphas[valid[0].0]);
            let mut k = 0;
            for w in 1..valid.len() {
                if positive[w] == positive[w - 1] {
                    continue;
                }
                let e = &events[k];
                k += 1;
                if positive[w] {
                    start = Some(e.alpha);
                } else if let Some(s) = start.take() {
                    intervals.push([s, e.alpha]);
                }
            }
            if let Some(s) = start {
                intervals.push([s, alphas[valid[valid.len() - 1].0]]);
            }
            Ok((intervals, events))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut events: Vec<CrossingEvent> = Vec::new();
    let mut all: Vec<[f64; 2]> = Vec::new();
    for (iv, ev) in per_curve {
        all.extend(iv);
        events.extend(ev);
    }
    all.sort_by(|x, y| x[0].total_cmp(&y[0]).then(x[1].total_cmp(&y[1])));
    let slack = GAP_SLACK * an.config().resolution;
    let mut intervals: Vec<[f64; 2]> = Vec::new();
    for iv in all {
        match intervals.last_mut() {
            Some(last) if iv[0] <= last[1] + slack => last[1] = last[1].max(iv[1]),
            _ => intervals.push(iv),
        }
    }
    let mut gaps = Vec::new();
    let mut cursor = lo;
    for iv in &intervals {
        if iv[0] > cursor {
            gaps.push([cursor, iv[0]]);
        }
        cursor = cursor.max(iv[1]);
    }
    if cursor < hi {
        gaps.push([cursor, hi]);
    }
    events.sort_by(|x, y| {
        x.alpha
            .total_cmp(&y.alpha)
            .then_with(|| x.curves.cmp(&y.curves))
    });
    Ok(SeparationCoverage {
        separation,
        intervals,
        gaps,
        events,
    })
}
