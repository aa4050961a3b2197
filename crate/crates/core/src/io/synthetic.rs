use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Measurement, MeasurementTable};
use crate::model::{mu_p, proposed_speedup, rho, Config, ModelParams};
use crate::{seed, Error, Result};

/// Ground truth for a synthetic measurement table.
///
/// Single-core time follows the model's own instruction mix: processor-instruction
/// time scales with `1/F_cpu`, and memory instructions cost `rho(phi)` times as much.
/// `base_serial_time` is the single-core time at the reference frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub application: String,
    pub true_params: ModelParams,
    pub f_mem_mhz: u32,
    pub cpu_frequencies_mhz: Vec<u32>,
    pub core_counts: Vec<u32>,
    pub base_serial_time: f64,
    /// Defaults to the highest CPU frequency.
    pub reference_frequency_mhz: Option<u32>,
    /// Standard deviation of the log-normal multiplicative noise on each time.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    /// 14 frequencies from 1.2 to 2.5 GHz against a 1 GHz memory clock, 1 to 24 cores.
    fn default() -> Self {
        SyntheticSpec {
            application: "synthetic".into(),
            true_params: ModelParams { f: 0.99, k: 0.5, m1: 0.05, m2: 0.4 },
            f_mem_mhz: 1000,
            cpu_frequencies_mhz: (12..=25).map(|h| h * 100).collect(),
            core_counts: (1..=24).collect(),
            base_serial_time: 100.0,
            reference_frequency_mhz: None,
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        self.true_params.validate()?;
        if self.f_mem_mhz == 0 {
            return Err(Error::InvalidConfig("memory frequency must be positive".into()));
        }
        if self.cpu_frequencies_mhz.is_empty() || self.core_counts.is_empty() {
            return Err(Error::InvalidConfig("frequency and core grids must be non-empty".into()));
        }
        if self.cpu_frequencies_mhz.contains(&0) || self.core_counts.contains(&0) {
            return Err(Error::InvalidConfig("frequencies and core counts must be positive".into()));
        }
        if self.reference_frequency_mhz == Some(0) {
            return Err(Error::InvalidConfig("reference frequency must be positive".into()));
        }
        if !(self.base_serial_time > 0.0 && self.base_serial_time.is_finite()) {
            return Err(Error::InvalidConfig("base serial time must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidConfig("noise sigma must be non-negative".into()));
        }
        Ok(())
    }
}

/// Produces a measurement table whose noiseless speedups follow the variable-delay model.
///
/// Rows are emitted frequency-major in grid order. The noise on row `i` is drawn from
/// a stream derived from `(seed, i)` alone.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<MeasurementTable> {
    spec.validate()?;
    let params = &spec.true_params;
    let f_mem = f64::from(spec.f_mem_mhz);
    let reference =
        f64::from(spec.reference_frequency_mhz.unwrap_or_else(|| *spec.cpu_frequencies_mhz.iter().max().unwrap()));
    let mu_1 = mu_p(params.m1, params.m2, 1)?;
    let mix = |phi: f64| -> Result<f64> { Ok((1.0 - mu_1) + rho(params.k, phi)? * mu_1) };
    let reference_mix = mix(reference / f_mem)?;

    let normal = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut rows = Vec::with_capacity(spec.cpu_frequencies_mhz.len() * spec.core_counts.len());
    for &freq in &spec.cpu_frequencies_mhz {
        let phi = f64::from(freq) / f_mem;
        let serial = spec.base_serial_time * (reference / f64::from(freq)) * mix(phi)? / reference_mix;
        for &cores in &spec.core_counts {
            let speedup = proposed_speedup(params, Config::new(cores, phi)?)?;
            let mut time_s = serial / speedup;
            if spec.noise_sigma > 0.0 {
                let mut rng = seed::rng(spec.seed, &[rows.len() as u64]);
                time_s *= normal.sample(&mut rng).exp();
            }
            rows.push(Measurement { application: spec.application.clone(), cpu_freq_mhz: freq, cores, time_s });
        }
    }
    let table = MeasurementTable { memory_frequency_mhz: spec.f_mem_mhz, runs_aggregated: None, rows };
    table.validate()?;
    Ok(table)
}
