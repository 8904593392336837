//! Least-squares fit of the linear nearest-neighbour concurrence law
//! `C = max{−A·E − B, 0}`.

use serde::Serialize;

use super::sweep::PointData;
use super::Analyzer;
use crate::error::{Error, Result};
use crate::model::Alpha;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearFit {
    pub a: f64,
    pub b: f64,
    pub max_residual: f64,
    pub max_concurrence: f64,
    pub n_points: usize,
}

impl LinearFit {
    /// `max_residual / max_concurrence`.
    pub fn relative_residual(&self) -> f64 {
        self.max_residual / self.max_concurrence
    }

    pub fn predict(&self, energy: f64) -> f64 {
        -self.a * energy - self.b
    }

    /// Ordinary least squares over the levels with positive separation-1
    /// concurrence.
    pub fn from_point(p: &PointData, threshold: f64) -> Result<Self> {
        let pts: Vec<(f64, f64)> = (0..p.n_levels())
            .map(|l| (p.levels[l].energy, p.concurrence(l, 1)))
            .filter(|&(_, c)| c > threshold)
            .collect();
        if pts.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "{} level(s) with positive nearest-neighbour concurrence at alpha = {}",
                pts.len(),
                p.alpha
            )));
        }
        let n = pts.len() as f64;
        let me = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let mc = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let see: f64 = pts.iter().map(|p| (p.0 - me).powi(2)).sum();
        let sec: f64 = pts.iter().map(|p| (p.0 - me) * (p.1 - mc)).sum();
        if !(see > 0.0) {
            return Err(Error::InsufficientData(
                "all positive points share one energy".into(),
            ));
        }
        let slope = sec / see;
        let intercept = mc - slope * me;
        let max_residual = pts
            .iter()
            .map(|&(e, c)| (c - slope * e - intercept).abs())
            .fold(0.0, f64::max);
        let max_concurrence = pts.iter().map(|p| p.1).fold(0.0, f64::max);
        Ok(Self {
            a: -slope,
            b: -intercept,
            max_residual,
            max_concurrence,
            n_points: pts.len(),
        })
    }
}

pub fn nn_linear_fit(an: &Analyzer, alpha: Alpha) -> Result<LinearFit> {
    LinearFit::from_point(&an.point(alpha)?, an.config().concurrence_threshold)
}
