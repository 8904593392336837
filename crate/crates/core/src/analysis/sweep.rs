//! α grids and the per-point data of a sweep.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Analyzer;
use crate::entanglement::{
    concurrence_table, level_meyer_wallach, level_oliveira, ConcurrenceRecord, OliveiraValue,
};
use crate::error::{Error, Result};
use crate::model::{Alpha, Variant};
use crate::spectral::{CurveTracker, LevelCurve, SpectralDecomposition};

/// Grid points evaluated concurrently before being threaded into curves.
const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[serde(alias = "lin")]
    Linear,
    Log,
}

impl FromStr for Spacing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lin" | "linear" => Ok(Spacing::Linear),
            "log" => Ok(Spacing::Log),
            other => Err(Error::InvalidArgument(format!(
                "unknown grid spacing '{other}' (expected lin or log)"
            ))),
        }
    }
}

/// Regular α points (threaded into level curves) plus explicit extra points
/// (evaluated but not threaded, e.g. `0`, `2`, `∞`).
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaGrid {
    regular: Vec<f64>,
    extras: Vec<Alpha>,
}

impl AlphaGrid {
    pub fn new(regular: Vec<f64>, mut extras: Vec<Alpha>) -> Result<Self> {
        if regular.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::InvalidArgument(
                "regular grid points must be positive and finite".into(),
            ));
        }
        if regular.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument(
                "regular grid points must be strictly ascending".into(),
            ));
        }
        for a in &extras {
            if let Alpha::Finite(v) = a {
                if !(v.is_finite() && *v >= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "invalid extra grid point {v}"
                    )));
                }
            }
        }
        extras.sort_by(|x, y| x.value().total_cmp(&y.value()));
        extras.dedup();
        extras.retain(|a| !regular.iter().any(|r| Alpha::Finite(*r) == *a));
        if regular.is_empty() && extras.is_empty() {
            return Err(Error::InvalidArgument("alpha grid is empty".into()));
        }
        Ok(Self { regular, extras })
    }

    /// `count` points from `min` to `max` inclusive.
    pub fn spaced(min: f64, max: f64, count: usize, spacing: Spacing) -> Result<Vec<f64>> {
        if count == 0 || !(min > 0.0) || !(max >= min) || !max.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "grid needs 0 < min <= max and count >= 1, got {min}:{max}:{count}"
            )));
        }
        if count == 1 {
            return Ok(vec![min]);
        }
        let last = (count - 1) as f64;
        let mut pts: Vec<f64> = (0..count)
            .map(|i| {
                let t = i as f64 / last;
                match spacing {
                    Spacing::Linear => min + t * (max - min),
                    Spacing::Log => (min.ln() + t * (max.ln() - min.ln())).exp(),
                }
            })
            .collect();
        pts[0] = min;
        pts[count - 1] = max;
        pts.dedup();
        Ok(pts)
    }

    pub fn range(
        min: f64,
        max: f64,
        count: usize,
        spacing: Spacing,
        extras: Vec<Alpha>,
    ) -> Result<Self> {
        Self::new(Self::spaced(min, max, count, spacing)?, extras)
    }

    /// 400 log-spaced points on `[0.05, 12]` plus `{0, 2, ∞}`.
    pub fn default_sweep() -> Self {
        Self::range(
            0.05,
            12.0,
            400,
            Spacing::Log,
            vec![Alpha::Finite(0.0), Alpha::Finite(2.0), Alpha::Infinity],
        )
        .expect("default grid is valid")
    }

    /// A grid of explicit points only (no curve threading).
    pub fn points_only(alphas: Vec<Alpha>) -> Result<Self> {
        Self::new(Vec::new(), alphas)
    }

    pub fn regular(&self) -> &[f64] {
        &self.regular
    }

    pub fn extras(&self) -> &[Alpha] {
        &self.extras
    }

    /// All points in ascending order with their index into the regular grid.
    pub fn points(&self) -> Vec<(Alpha, Option<usize>)> {
        let mut pts: Vec<(Alpha, Option<usize>)> = self
            .regular
            .iter()
            .enumerate()
            .map(|(i, &a)| (Alpha::Finite(a), Some(i)))
            .collect();
        pts.extend(self.extras.iter().map(|&a| (a, None)));
        pts.sort_by(|x, y| x.0.value().total_cmp(&y.0.value()));
        pts
    }
}

/// Parses `min:max:count:lin|log`.
impl FromStr for AlphaGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || {
            Error::InvalidArgument(format!(
                "grid '{s}' is not of the form min:max:count:lin|log"
            ))
        };
        if parts.len() != 4 {
            return Err(bad());
        }
        let min: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let max: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
        let spacing: Spacing = parts[3].parse()?;
        Self::range(min, max, count, spacing, Vec::new())
    }
}

impl fmt::Display for AlphaGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} regular points", self.regular.len())?;
        if let (Some(a), Some(b)) = (self.regular.first(), self.regular.last()) {
            write!(f, " on [{a}, {b}]")?;
        }
        if !self.extras.is_empty() {
            let e: Vec<String> = self.extras.iter().map(Alpha::to_string).collect();
            write!(f, " plus {{{}}}", e.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelSummary {
    pub energy: f64,
    pub multiplicity: usize,
}

/// Everything computed at one α.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointData {
    pub alpha: Alpha,
    /// Index into the curve grid when this point is threaded.
    pub curve_index: Option<usize>,
    pub levels: Vec<LevelSummary>,
    pub cluster_warnings: usize,
    pub max_separation: usize,
    /// Level-major, separation-minor.
    pub records: Vec<ConcurrenceRecord>,
    pub meyer_wallach: Option<Vec<f64>>,
    pub oliveira: Option<Vec<OliveiraValue>>,
}

impl PointData {
    pub(crate) fn evaluate(
        an: &Analyzer,
        dec: &SpectralDecomposition,
        curve_index: Option<usize>,
    ) -> Result<Self> {
        let cfg = an.config();
        let records = concurrence_table(dec, cfg.structure_tolerance, cfg.verify_translates)?;
        let n_levels = dec.levels().len();
        let (meyer_wallach, oliveira) = if cfg.global_measures {
            let mw = (0..n_levels)
                .map(|l| level_meyer_wallach(dec, l))
                .collect::<Result<Vec<_>>>()?;
            let ol = (0..n_levels)
                .map(|l| level_oliveira(dec, l, cfg.oliveira_normalization))
                .collect::<Result<Vec<_>>>()?;
            (Some(mw), Some(ol))
        } else {
            (None, None)
        };
        Ok(Self {
            alpha: dec.spec().alpha(),
            curve_index,
            levels: dec
                .levels()
                .iter()
                .map(|l| LevelSummary {
                    energy: l.energy,
                    multiplicity: l.multiplicity,
                })
                .collect(),
            cluster_warnings: dec.warnings().len(),
            max_separation: dec.spec().n_sites() / 2,
            records,
            meyer_wallach,
            oliveira,
        })
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn record(&self, level: usize, separation: usize) -> &ConcurrenceRecord {
        &self.records[level * self.max_separation + separation - 1]
    }

    pub fn concurrence(&self, level: usize, separation: usize) -> f64 {
        self.record(level, separation).concurrence
    }

    /// Separations at which `level` has concurrence above `threshold`.
    pub fn entangled_separations(&self, level: usize, threshold: f64) -> Vec<usize> {
        (1..=self.max_separation)
            .filter(|&d| self.concurrence(level, d) > threshold)
            .collect()
    }

    /// Multiplicity → number of levels.
    pub fn histogram(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for l in &self.levels {
            *h.entry(l.multiplicity).or_insert(0) += 1;
        }
        h
    }

    /// Separation → number of levels entangled at that separation.
    pub fn census(&self, threshold: f64) -> BTreeMap<usize, usize> {
        (1..=self.max_separation)
            .map(|d| {
                (
                    d,
                    (0..self.n_levels())
                        .filter(|&l| self.concurrence(l, d) > threshold)
                        .count(),
                )
            })
            .collect()
    }
}

/// Data of a full α sweep with level curves threaded over the regular grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub n_sites: usize,
    pub variant: Variant,
    pub points: Vec<PointData>,
    /// `points` index of every curve-grid point, ascending.
    pub curve_points: Vec<usize>,
    pub curves: Vec<LevelCurve>,
}

impl SweepResult {
    /// Point data at curve-grid index `t`.
    pub fn curve_point(&self, t: usize) -> &PointData {
        &self.points[self.curve_points[t]]
    }

    pub fn curve_alphas(&self) -> Vec<f64> {
        self.curve_points
            .iter()
            .map(|&i| self.points[i].alpha.value())
            .collect()
    }

    /// Concurrence of `curve` at curve-grid index `t`, if the curve is
    /// defined there.
    pub fn curve_concurrence(&self, curve: usize, t: usize, separation: usize) -> Option<f64> {
        let level = self.curves[curve].level_at(t)?;
        Some(self.curve_point(t).concurrence(level, separation))
    }

    pub fn point_at(&self, alpha: Alpha) -> Option<&PointData> {
        self.points.iter().find(|p| p.alpha == alpha)
    }

    pub fn max_separation(&self) -> usize {
        self.n_sites / 2
    }
}

impl Analyzer {
    /// Evaluate every grid point and thread level curves through the
    /// regular points. Points are computed concurrently; threading is
    /// sequential, so the result does not depend on scheduling.
    pub fn sweep(&self, grid: &AlphaGrid) -> Result<SweepResult> {
        let pts = grid.points();
        let mut tracker = CurveTracker::new(self.config().overlap_threshold);
        let mut points = Vec::with_capacity(pts.len());
        let mut curve_points = Vec::new();
        for chunk in pts.chunks(CHUNK) {
            let evaluated = chunk
                .par_iter()
                .map(|&(alpha, t)| {
                    let dec = self.decompose(alpha)?;
                    let pd = PointData::evaluate(self, &dec, t).map_err(|e| Error::AtAlpha {
                        alpha: alpha.to_string(),
                        source: Box::new(e),
                    })?;
                    Ok((pd, t.map(|_| dec)))
                })
                .collect::<Result<Vec<_>>>()?;
            for (pd, dec) in evaluated {
                if let Some(dec) = dec {
                    tracker.push(pd.alpha.value(), &dec);
                    curve_points.push(points.len());
                }
                points.push(pd);
            }
        }
        Ok(SweepResult {
            n_sites: self.n_sites(),
            variant: self.variant(),
            points,
            curve_points,
            curves: tracker.finish(),
        })
    }

    /// Data at a single α (no curves).
    pub fn point(&self, alpha: Alpha) -> Result<PointData> {
        let dec = self.decompose(alpha)?;
        PointData::evaluate(self, &dec, None).map_err(|e| Error::AtAlpha {
            alpha: alpha.to_string(),
            source: Box::new(e),
        })
    }
}
