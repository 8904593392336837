//! α sweeps over a ring family: level counts, tracked level curves, crossing
//! and entanglement-threshold localization, censuses and the
//! nearest-neighbour linear concurrence fit.

mod census;
mod crossings;
mod fit;
mod sweep;

pub use census::{
    distance_selectivity_check, dominance_violations, entangled_level_census,
    entangled_projector_census, ferromagnetic_ordering, ground_exclusivity_violations,
    ground_nn_variation, projector_dimension_histogram, selectivity_violations, Branch,
    CurveEntanglement, FerroOrdering, GroundVariation, ProjectorCensus, SelectivityViolation,
    SeparationSpan,
};
pub use crossings::{
    entanglement_boundaries, find_crossings, find_last_crossing, locate_crossing, locate_crossings,
    separation_coverage, CrossingEvent, EventKind, SeparationCoverage,
};
pub use fit::{nn_linear_fit, LinearFit};
pub use sweep::{AlphaGrid, LevelSummary, PointData, Spacing, SweepResult};

use serde::{Deserialize, Serialize};

use crate::entanglement::{
    OliveiraNormalization, DEFAULT_CONCURRENCE_THRESHOLD, DEFAULT_STRUCTURE_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::model::{Alpha, RingSpec, Variant};
use crate::spectral::{
    diagonalize_with, DecompositionCache, SpectralDecomposition, DEFAULT_CLUSTER_TOLERANCE,
};

/// Default bracket width for crossing and threshold bisection.
pub const DEFAULT_RESOLUTION: f64 = 1e-3;

/// Numerical knobs shared by all analysis passes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub cluster_tolerance: f64,
    pub structure_tolerance: f64,
    pub concurrence_threshold: f64,
    pub overlap_threshold: f64,
    pub resolution: f64,
    /// Cross-check every translate of each representative site pair.
    pub verify_translates: bool,
    /// Compute Meyer-Wallach and de Oliveira values at every sweep point.
    pub global_measures: bool,
    pub oliveira_normalization: OliveiraNormalization,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            cluster_tolerance: DEFAULT_CLUSTER_TOLERANCE,
            structure_tolerance: DEFAULT_STRUCTURE_TOLERANCE,
            concurrence_threshold: DEFAULT_CONCURRENCE_THRESHOLD,
            overlap_threshold: crate::spectral::DEFAULT_OVERLAP_THRESHOLD,
            resolution: DEFAULT_RESOLUTION,
            verify_translates: true,
            global_measures: false,
            oliveira_normalization: OliveiraNormalization::AsPrinted,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cluster tolerance", self.cluster_tolerance),
            ("structure tolerance", self.structure_tolerance),
            ("concurrence threshold", self.concurrence_threshold),
            ("overlap threshold", self.overlap_threshold),
            ("resolution", self.resolution),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// A ring family `(N, variant)` with its analysis settings and optional
/// decomposition cache.
#[derive(Debug, Clone)]
pub struct Analyzer {
    n_sites: usize,
    variant: Variant,
    config: AnalysisConfig,
    cache: Option<DecompositionCache>,
}

impl Analyzer {
    pub fn new(n_sites: usize, variant: Variant, config: AnalysisConfig) -> Result<Self> {
        config.validate()?;
        RingSpec::new(n_sites, Alpha::Infinity, variant)?;
        Ok(Self {
            n_sites,
            variant,
            config,
            cache: None,
        })
    }

    /// Standard variant with default settings.
    pub fn standard(n_sites: usize) -> Result<Self> {
        Self::new(n_sites, Variant::Standard, AnalysisConfig::default())
    }

    pub fn with_cache(mut self, cache: DecompositionCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn config(&self) -> &AnalysisConfig {
        &self.config
    }

    pub fn spec(&self, alpha: Alpha) -> Result<RingSpec> {
        RingSpec::new(self.n_sites, alpha, self.variant)
    }

    /// Decomposition at `alpha`, through the cache when one is attached.
    /// Failures carry the offending α.
    pub fn decompose(&self, alpha: Alpha) -> Result<SpectralDecomposition> {
        let run = || {
            let spec = self.spec(alpha)?;
            match &self.cache {
                Some(c) => c.get_or_compute(&spec, self.config.cluster_tolerance),
                None => diagonalize_with(&spec, self.config.cluster_tolerance),
            }
        };
        run().map_err(|e| match e {
            Error::AtAlpha { .. } => e,
            e => Error::AtAlpha {
                alpha: alpha.to_string(),
                source: Box::new(e),
            },
        })
    }

    pub(crate) fn decompose_at(&self, alpha: f64) -> Result<SpectralDecomposition> {
        self.decompose(Alpha::Finite(alpha))
    }
}

/// Number of distinct levels of the standard `N`-site ring at `alpha`.
pub fn count_distinct_levels(n_sites: usize, alpha: Alpha, tolerance: f64) -> Result<usize> {
    let spec = RingSpec::new(n_sites, alpha, Variant::Standard)?;
    Ok(diagonalize_with(&spec, tolerance)?.levels().len())
}
