use serde::{Deserialize, Serialize};

use super::{csa_minimize, Bounds, CsaConfig, FitResult};
use crate::model::{
    amdahl_unchecked, proposed_unchecked, AmdahlParams, Config, ModelParams, SpeedupSample, DEFAULT_K_MAX,
};
use crate::{Error, Result};

/// Analytical models that can be fitted by annealing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Amdahl,
    Proposed,
}

impl ModelKind {
    pub fn dim(self) -> usize {
        match self {
            ModelKind::Amdahl => 1,
            ModelKind::Proposed => 4,
        }
    }

    /// `f, m1, m2` in `[0, 1]` and `k` in `[0, k_max]`.
    pub fn default_bounds(self, k_max: f64) -> Result<Bounds> {
        match self {
            ModelKind::Amdahl => Bounds::new(&[(0.0, 1.0)]),
            ModelKind::Proposed => Bounds::new(&[(0.0, 1.0), (0.0, k_max), (0.0, 1.0), (0.0, 1.0)]),
        }
    }

    pub fn paper_bounds(self) -> Bounds {
        self.default_bounds(DEFAULT_K_MAX).expect("static bounds are valid")
    }
}

/// Fitted parameters of either analytical model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FittedModel {
    Amdahl(AmdahlParams),
    Proposed(ModelParams),
}

impl FittedModel {
    pub fn from_point(kind: ModelKind, point: &[f64]) -> Result<Self> {
        match kind {
            ModelKind::Amdahl => match point {
                &[f] => Ok(FittedModel::Amdahl(AmdahlParams { f })),
                _ => Err(Error::DimensionMismatch { expected: 1, got: point.len() }),
            },
            ModelKind::Proposed => ModelParams::from_slice(point).map(FittedModel::Proposed),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            FittedModel::Amdahl(_) => ModelKind::Amdahl,
            FittedModel::Proposed(_) => ModelKind::Proposed,
        }
    }

    pub fn predict(&self, config: Config) -> Result<f64> {
        match self {
            FittedModel::Amdahl(p) => crate::model::amdahl_speedup(p, config.p),
            FittedModel::Proposed(p) => crate::model::proposed_speedup(p, config),
        }
    }
}

fn check_domain(kind: ModelKind, bounds: &Bounds) -> Result<()> {
    if bounds.dim() != kind.dim() {
        return Err(Error::DimensionMismatch { expected: kind.dim(), got: bounds.dim() });
    }
    for d in 0..bounds.dim() {
        let upper_limit = if kind == ModelKind::Proposed && d == 1 { f64::INFINITY } else { 1.0 };
        if bounds.lower()[d] < 0.0 || bounds.upper()[d] > upper_limit {
            return Err(Error::InvalidConfig(format!("bounds of parameter {d} leave the model's domain")));
        }
    }
    Ok(())
}

/// Fits a model to speedup samples by minimizing the training MSE with [`csa_minimize`].
///
/// `best_value` of the result is the training MSE and `best_point` the parameter
/// vector (`[f]` or `[f, k, m1, m2]`).
pub fn fit_model(kind: ModelKind, samples: &[SpeedupSample], bounds: &Bounds, config: &CsaConfig) -> Result<FitResult> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("no samples to fit"));
    }
    check_domain(kind, bounds)?;
    let points = objective_points(samples)?;
    csa_minimize(|x: &[f64]| point_mse(kind, x, &points), bounds, config)
}

/// Training MSE of a parameter vector, computed exactly as the fitting objective does.
pub fn training_mse(kind: ModelKind, point: &[f64], samples: &[SpeedupSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("no samples to evaluate"));
    }
    FittedModel::from_point(kind, point)?;
    Ok(point_mse(kind, point, &objective_points(samples)?))
}

// (1/p, phi, observed)
fn objective_points(samples: &[SpeedupSample]) -> Result<Vec<(f64, f64, f64)>> {
    samples
        .iter()
        .map(|s| {
            s.config.validate()?;
            Ok((1.0 / f64::from(s.config.p), s.config.phi, s.speedup))
        })
        .collect()
}

fn point_mse(kind: ModelKind, x: &[f64], points: &[(f64, f64, f64)]) -> f64 {
    let n = points.len() as f64;
    match kind {
        ModelKind::Amdahl => {
            let f = x[0];
            points.iter().map(|&(inv_p, _, y)| (amdahl_unchecked(f, inv_p) - y).powi(2)).sum::<f64>() / n
        }
        ModelKind::Proposed => {
            let (f, k, m1, m2) = (x[0], x[1], x[2], x[3]);
            points
                .iter()
                .map(|&(inv_p, phi, y)| (proposed_unchecked(f, k, m1, m2, inv_p, phi) - y).powi(2))
                .sum::<f64>()
                / n
        }
    }
}
