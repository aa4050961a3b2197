use serde::{Deserialize, Serialize};

use crate::csa::{fit_model, training_mse, CsaConfig, ModelKind};
use crate::io::report::opt;
use crate::io::{Report, ReportKind};
use crate::model::{AmdahlParams, ModelParams, SpeedupSample};
use crate::{Error, Result};

/// Relative MSE improvement of the proposed model over Amdahl's, in percent.
pub fn accuracy_gain(mse_amdahl: f64, mse_proposed: f64) -> Result<f64> {
    if mse_amdahl == 0.0 {
        return Err(Error::DivisionByZero("Amdahl MSE is zero"));
    }
    if !(mse_amdahl > 0.0 && mse_proposed >= 0.0 && mse_amdahl.is_finite() && mse_proposed.is_finite()) {
        return Err(Error::domain("MSE values must be finite and non-negative"));
    }
    Ok(100.0 * (mse_amdahl - mse_proposed) / mse_amdahl)
}

/// Both analytical models fitted on every available sample of one application.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub application: String,
    pub measurements: usize,
    pub amdahl: AmdahlParams,
    pub amdahl_mse: f64,
    pub proposed: ModelParams,
    pub proposed_mse: f64,
    /// Undefined when Amdahl's MSE is exactly zero.
    pub accuracy_gain: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub seed: u64,
    pub annealers: usize,
    pub iterations: usize,
    pub k_max: f64,
    pub rows: Vec<ComparisonRow>,
}

/// Fits Amdahl's and the proposed model to all samples with the same annealing
/// configuration and reports parameters, training MSEs and the accuracy gain.
pub fn compare_models(
    application: &str,
    samples: &[SpeedupSample],
    config: &CsaConfig,
    k_max: f64,
) -> Result<ComparisonRow> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("no samples to compare models on"));
    }
    let amdahl = fit_model(ModelKind::Amdahl, samples, &ModelKind::Amdahl.default_bounds(k_max)?, config)?;
    let annealed = fit_model(ModelKind::Proposed, samples, &ModelKind::Proposed.default_bounds(k_max)?, config)?;
    // The proposed model contains Amdahl's law at k = m1 = m2 = 0, so that point is
    // always a candidate and the proposed fit is never the worse of the two.
    let nested = [amdahl.best_point[0], 0.0, 0.0, 0.0];
    let nested_mse = training_mse(ModelKind::Proposed, &nested, samples)?;
    let (proposed_point, proposed_mse) = if nested_mse < annealed.best_value {
        (nested.to_vec(), nested_mse)
    } else {
        (annealed.best_point, annealed.best_value)
    };
    let gain = match accuracy_gain(amdahl.best_value, proposed_mse) {
        Ok(g) => Some(g),
        Err(Error::DivisionByZero(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(ComparisonRow {
        application: application.to_string(),
        measurements: samples.len(),
        amdahl: AmdahlParams { f: amdahl.best_point[0] },
        amdahl_mse: amdahl.best_value,
        proposed: ModelParams::from_slice(&proposed_point)?,
        proposed_mse,
        accuracy_gain: gain,
    })
}

impl Report for ComparisonReport {
    const KIND: ReportKind = ReportKind::Comparison;

    fn csv_header() -> &'static [&'static str] {
        &[
            "application",
            "measurements",
            "amdahl_f",
            "amdahl_mse",
            "f",
            "k",
            "m1",
            "m2",
            "proposed_mse",
            "accuracy_gain_pct",
        ]
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.application.clone(),
                    r.measurements.to_string(),
                    r.amdahl.f.to_string(),
                    r.amdahl_mse.to_string(),
                    r.proposed.f.to_string(),
                    r.proposed.k.to_string(),
                    r.proposed.m1.to_string(),
                    r.proposed.m2.to_string(),
                    r.proposed_mse.to_string(),
                    opt(r.accuracy_gain),
                ]
            })
            .collect()
    }
}
