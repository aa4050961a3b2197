//! The variable-delay speedup model, Amdahl's law, and the speedup/error helpers
//! shared by fitting and evaluation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::io::MeasurementTable;
use crate::{Error, Result};

/// Default upper bound for the memory-frequency sensitivity `k`.
pub const DEFAULT_K_MAX: f64 = 10.0;

/// Application parameters of the variable-delay model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Parallel fraction.
    pub f: f64,
    /// Sensitivity of memory-instruction time to the CPU/memory frequency ratio.
    pub k: f64,
    /// Memory-instruction fraction that does not change with the core count.
    pub m1: f64,
    /// Memory-instruction fraction that shrinks as `1/p`.
    pub m2: f64,
}

impl ModelParams {
    /// Builds parameters checked against the default bounds (`k <= 10`).
    pub fn new(f: f64, k: f64, m1: f64, m2: f64) -> Result<Self> {
        Self::with_k_max(f, k, m1, m2, DEFAULT_K_MAX)
    }

    pub fn with_k_max(f: f64, k: f64, m1: f64, m2: f64, k_max: f64) -> Result<Self> {
        let params = ModelParams { f, k, m1, m2 };
        params.validate()?;
        if k_max.is_nan() || k > k_max {
            return Err(Error::domain(format!("k = {k} exceeds k_max = {k_max}")));
        }
        Ok(params)
    }

    /// Checks `f, m1, m2` in `[0, 1]` and `k >= 0`.
    pub fn validate(&self) -> Result<()> {
        check_unit("f", self.f)?;
        check_unit("m1", self.m1)?;
        check_unit("m2", self.m2)?;
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return Err(Error::domain(format!("k = {} must be finite and non-negative", self.k)));
        }
        Ok(())
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.f, self.k, self.m1, self.m2]
    }

    /// Reads `[f, k, m1, m2]`.
    pub fn from_slice(x: &[f64]) -> Result<Self> {
        match x {
            &[f, k, m1, m2] => Ok(ModelParams { f, k, m1, m2 }),
            _ => Err(Error::DimensionMismatch { expected: 4, got: x.len() }),
        }
    }
}

/// Amdahl's law has a single parameter, the parallel fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmdahlParams {
    pub f: f64,
}

impl AmdahlParams {
    pub fn new(f: f64) -> Result<Self> {
        check_unit("f", f)?;
        Ok(AmdahlParams { f })
    }
}

/// A hardware configuration: active cores and the CPU/memory frequency ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub p: u32,
    pub phi: f64,
}

impl Config {
    pub fn new(p: u32, phi: f64) -> Result<Self> {
        let config = Config { p, phi };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        check_cores(self.p)?;
        check_phi(self.phi)
    }
}

/// An observed speedup at one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedupSample {
    pub config: Config,
    pub speedup: f64,
}

/// Which term of the model's denominator is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// The instruction-mix-scaled Amdahl term dominates.
    Compute,
    /// Memory saturation (`rho * mu_p`) dominates.
    Memory,
}

/// A model evaluation together with the denominator branch that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub speedup: f64,
    pub branch: Branch,
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} = {v} outside [0, 1]")))
    }
}

fn check_cores(p: u32) -> Result<()> {
    if p >= 1 {
        Ok(())
    } else {
        Err(Error::domain("core count must be at least 1"))
    }
}

fn check_phi(phi: f64) -> Result<()> {
    if phi > 0.0 && phi.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("frequency ratio phi = {phi} must be positive and finite")))
    }
}

/// Ratio of average memory-instruction time to processor-instruction time, `1 + k*phi`.
pub fn rho(k: f64, phi: f64) -> Result<f64> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::domain(format!("k = {k} must be finite and non-negative")));
    }
    check_phi(phi)?;
    Ok(1.0 + k * phi)
}

/// Fraction of instructions reaching main memory on `p` cores, `min(m1 + m2/p, 1)`.
pub fn mu_p(m1: f64, m2: f64, p: u32) -> Result<f64> {
    check_unit("m1", m1)?;
    check_unit("m2", m2)?;
    check_cores(p)?;
    Ok((m1 + m2 / f64::from(p)).min(1.0))
}

pub fn amdahl_speedup(params: &AmdahlParams, p: u32) -> Result<f64> {
    check_unit("f", params.f)?;
    check_cores(p)?;
    Ok(1.0 / ((1.0 - params.f) + params.f / f64::from(p)))
}

pub fn proposed_speedup(params: &ModelParams, config: Config) -> Result<f64> {
    proposed_evaluate(params, config).map(|e| e.speedup)
}

/// Evaluates the variable-delay model and reports which denominator branch is active.
/// Ties go to [`Branch::Compute`].
pub fn proposed_evaluate(params: &ModelParams, config: Config) -> Result<Evaluation> {
    params.validate()?;
    config.validate()?;
    let rho = rho(params.k, config.phi)?;
    let mu_1 = mu_p(params.m1, params.m2, 1)?;
    let mu_p = mu_p(params.m1, params.m2, config.p)?;

    let numerator = (1.0 - mu_1) + rho * mu_1;
    let compute = ((1.0 - mu_p) + rho * mu_p) * ((1.0 - params.f) + params.f / f64::from(config.p));
    let memory = rho * mu_p;
    let (denominator, branch) = if memory > compute { (memory, Branch::Memory) } else { (compute, Branch::Compute) };
    Ok(Evaluation { speedup: numerator / denominator, branch })
}

#[inline]
pub(crate) fn amdahl_unchecked(f: f64, inv_p: f64) -> f64 {
    1.0 / ((1.0 - f) + f * inv_p)
}

/// Hot-path evaluation for the fitter. Arguments are assumed in-domain.
#[inline]
pub(crate) fn proposed_unchecked(f: f64, k: f64, m1: f64, m2: f64, inv_p: f64, phi: f64) -> f64 {
    let rho = 1.0 + k * phi;
    let mu_1 = (m1 + m2).min(1.0);
    let mu_p = (m1 + m2 * inv_p).min(1.0);
    let numerator = (1.0 - mu_1) + rho * mu_1;
    let compute = ((1.0 - mu_p) + rho * mu_p) * ((1.0 - f) + f * inv_p);
    numerator / compute.max(rho * mu_p)
}

/// Derives per-frequency speedups from a measurement table.
///
/// The baseline for each row is the single-core time of the same application at the
/// same CPU frequency, so every `p = 1` row yields a speedup of exactly 1. Output
/// order follows row order.
pub fn speedups_from_measurements(table: &MeasurementTable) -> Result<Vec<SpeedupSample>> {
    if table.rows.is_empty() {
        return Err(Error::EmptyInput("measurement table has no rows"));
    }
    if table.memory_frequency_mhz == 0 {
        return Err(Error::domain("memory frequency must be positive"));
    }
    for (i, row) in table.rows.iter().enumerate() {
        if !(row.time_s > 0.0 && row.time_s.is_finite()) {
            return Err(Error::NonPositiveTime { row: i, time: row.time_s });
        }
    }

    let baselines: HashMap<(&str, u32), f64> = table
        .rows
        .iter()
        .filter(|r| r.cores == 1)
        .map(|r| ((r.application.as_str(), r.cpu_freq_mhz), r.time_s))
        .collect();

    let f_mem = f64::from(table.memory_frequency_mhz);
    table
        .rows
        .iter()
        .map(|row| {
            let base = baselines.get(&(row.application.as_str(), row.cpu_freq_mhz)).ok_or_else(|| {
                Error::MissingBaseline { application: row.application.clone(), frequency_mhz: row.cpu_freq_mhz }
            })?;
            let speedup = if row.cores == 1 { 1.0 } else { base / row.time_s };
            let config = Config::new(row.cores, f64::from(row.cpu_freq_mhz) / f_mem)?;
            Ok(SpeedupSample { config, speedup })
        })
        .collect()
}

/// Mean squared error between predictions and observations.
pub fn mse(predicted: &[f64], observed: &[f64]) -> Result<f64> {
    if predicted.len() != observed.len() {
        return Err(Error::LengthMismatch { left: predicted.len(), right: observed.len() });
    }
    if predicted.is_empty() {
        return Err(Error::EmptyInput("mse needs at least one pair"));
    }
    let sum: f64 = predicted.iter().zip(observed).map(|(p, o)| (p - o) * (p - o)).sum();
    Ok(sum / predicted.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::Measurement;
    use proptest::prelude::*;

    const EPS: f64 = 1e-12;

    fn row(freq: u32, cores: u32, time: f64) -> Measurement {
        Measurement { application: "app".into(), cpu_freq_mhz: freq, cores, time_s: time }
    }

    fn table(mem: u32, rows: Vec<Measurement>) -> MeasurementTable {
        MeasurementTable { memory_frequency_mhz: mem, runs_aggregated: None, rows }
    }

    #[test]
    fn rho_examples() {
        assert_eq!(rho(0.0, 3.0).unwrap(), 1.0);
        assert_eq!(rho(1.0, 3.0).unwrap(), 4.0);
        assert!((rho(9.9264, 1.0).unwrap() - 10.9264).abs() < EPS);
        assert!(rho(-0.1, 1.0).is_err());
        assert!(rho(1.0, 0.0).is_err());
    }

    #[test]
    fn mu_p_examples() {
        assert_eq!(mu_p(0.5, 1.0, 2).unwrap(), 1.0);
        assert!((mu_p(0.1, 0.8, 4).unwrap() - 0.3).abs() < EPS);
        assert_eq!(mu_p(0.0, 0.0, 17).unwrap(), 0.0);
        assert!(mu_p(1.1, 0.0, 1).is_err());
        assert!(mu_p(0.1, 0.1, 0).is_err());
    }

    #[test]
    fn amdahl_examples() {
        assert_eq!(amdahl_speedup(&AmdahlParams { f: 1.0 }, 8).unwrap(), 8.0);
        assert_eq!(amdahl_speedup(&AmdahlParams { f: 0.0 }, 64).unwrap(), 1.0);
        let hand = 1.0 / (0.01 + 0.99 / 32.0);
        let s = amdahl_speedup(&AmdahlParams { f: 0.99 }, 32).unwrap();
        assert!((s - hand).abs() < EPS);
        assert!((s - 24.4275).abs() < 1e-4);
        assert!(amdahl_speedup(&AmdahlParams { f: 1.5 }, 2).is_err());
        assert!(amdahl_speedup(&AmdahlParams { f: 0.5 }, 0).is_err());
    }

    #[test]
    fn proposed_hand_values() {
        // rho = 4, mu = 0.1: numerator 1.3, compute 1.3 * (0.01 + 0.99/16), memory 0.4.
        let e =
            proposed_evaluate(&ModelParams::new(0.99, 1.0, 0.1, 0.0).unwrap(), Config::new(16, 3.0).unwrap()).unwrap();
        assert!((e.speedup - 3.25).abs() < EPS);
        assert_eq!(e.branch, Branch::Memory);

        let s = proposed_speedup(&ModelParams::new(0.5, 0.0, 0.0, 0.0).unwrap(), Config::new(2, 2.7).unwrap()).unwrap();
        assert!((s - 4.0 / 3.0).abs() < EPS);

        // rho = 2, mu_1 = 0.5, mu_4 = 0.125: numerator 1.5, compute 1.125 * 0.25, memory 0.25.
        let e =
            proposed_evaluate(&ModelParams::new(1.0, 1.0, 0.0, 0.5).unwrap(), Config::new(4, 1.0).unwrap()).unwrap();
        assert!((e.speedup - 16.0 / 3.0).abs() < EPS);
        assert_eq!(e.branch, Branch::Compute);
        assert!(e.speedup > 4.0);
    }

    #[test]
    fn proposed_rejects_out_of_domain() {
        let bad = ModelParams { f: 1.2, k: 0.0, m1: 0.0, m2: 0.0 };
        assert!(proposed_speedup(&bad, Config { p: 2, phi: 1.0 }).is_err());
        let ok = ModelParams::new(0.5, 0.0, 0.0, 0.0).unwrap();
        assert!(proposed_speedup(&ok, Config { p: 0, phi: 1.0 }).is_err());
        assert!(proposed_speedup(&ok, Config { p: 2, phi: -1.0 }).is_err());
        assert!(ModelParams::new(0.5, 10.5, 0.0, 0.0).is_err());
        assert!(ModelParams::with_k_max(0.5, 10.5, 0.0, 0.0, 20.0).is_ok());
    }

    #[test]
    fn speedup_derivation() {
        let t = table(1000, vec![row(2500, 1, 100.0), row(2500, 4, 30.0)]);
        let s = speedups_from_measurements(&t).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].speedup, 1.0);
        assert_eq!(s[0].config, Config { p: 1, phi: 2.5 });
        assert!((s[1].speedup - 100.0 / 30.0).abs() < EPS);
        assert_eq!(s[1].config.p, 4);

        let s = speedups_from_measurements(&table(1200, vec![row(1200, 1, 50.0)])).unwrap();
        assert_eq!(s, vec![SpeedupSample { config: Config { p: 1, phi: 1.0 }, speedup: 1.0 }]);
    }

    #[test]
    fn speedup_derivation_errors() {
        let err = speedups_from_measurements(&table(1000, vec![row(2000, 8, 10.0)])).unwrap_err();
        assert_eq!(err, Error::MissingBaseline { application: "app".into(), frequency_mhz: 2000 });
        let err = speedups_from_measurements(&table(1000, vec![row(2000, 1, 0.0)])).unwrap_err();
        assert!(matches!(err, Error::NonPositiveTime { row: 0, .. }));
        assert!(matches!(speedups_from_measurements(&table(1000, vec![])), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn baselines_are_per_application() {
        let mut rows = vec![row(2000, 1, 10.0), row(2000, 2, 5.0)];
        rows.push(Measurement { application: "other".into(), cpu_freq_mhz: 2000, cores: 2, time_s: 1.0 });
        let err = speedups_from_measurements(&table(1000, rows)).unwrap_err();
        assert!(matches!(err, Error::MissingBaseline { ref application, .. } if application == "other"));
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(mse(&[1.0, 2.0], &[2.0, 4.0]).unwrap(), 2.5);
        assert_eq!(mse(&[0.0], &[3.0]).unwrap(), 9.0);
        assert!(matches!(mse(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch { left: 1, right: 2 })));
        assert!(matches!(mse(&[], &[]), Err(Error::EmptyInput(_))));
    }

    fn params() -> impl Strategy<Value = ModelParams> {
        (0.0..=1.0f64, 0.0..=10.0f64, 0.0..=1.0f64, 0.0..=1.0f64).prop_map(|(f, k, m1, m2)| ModelParams {
            f,
            k,
            m1,
            m2,
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig { max_global_rejects: 100_000, ..ProptestConfig::default() })]

        #[test]
        fn unchecked_matches_checked(p in params(), cores in 1u32..128, phi in 0.1f64..5.0) {
            let a = proposed_speedup(&p, Config { p: cores, phi }).unwrap();
            let b = proposed_unchecked(p.f, p.k, p.m1, p.m2, 1.0 / f64::from(cores), phi);
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }

        #[test]
        fn saturation_ceiling(p in params(), cores in 1u32..256, phi in 0.1f64..5.0) {
            let mu_1 = mu_p(p.m1, p.m2, 1).unwrap();
            let mu = mu_p(p.m1, p.m2, cores).unwrap();
            prop_assume!(mu > 0.0);
            let rho = rho(p.k, phi).unwrap();
            let ceiling = ((1.0 - mu_1) + rho * mu_1) / (rho * mu);
            let s = proposed_speedup(&p, Config { p: cores, phi }).unwrap();
            prop_assert!(s <= ceiling * (1.0 + 1e-12));
        }

        #[test]
        fn super_linear_on_compute_branch(
            f in 0.0..=1.0f64, k in 0.01f64..10.0, m1 in 0.0..=0.5f64, m2 in 0.01f64..=0.5,
            cores in 2u32..128, phi in 0.1f64..5.0,
        ) {
            let p = ModelParams { f, k, m1, m2 };
            let e = proposed_evaluate(&p, Config { p: cores, phi }).unwrap();
            prop_assume!(e.branch == Branch::Compute);
            let a = amdahl_speedup(&AmdahlParams { f }, cores).unwrap();
            prop_assert!(e.speedup > a);
        }

        #[test]
        fn mse_permutation_and_scaling(
            pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..20),
            shift in 0usize..20, scale in 0.1f64..10.0,
        ) {
            let (pred, obs): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
            let base = mse(&pred, &obs).unwrap();
            let mut rp = pred.clone();
            let mut ro = obs.clone();
            let r = shift % pred.len();
            rp.rotate_left(r);
            ro.rotate_left(r);
            prop_assert!((mse(&rp, &ro).unwrap() - base).abs() <= 1e-9 * base.max(1.0));
            // Scaling residuals by c scales the error by c^2.
            let sp: Vec<f64> = pred.iter().zip(&obs).map(|(p, o)| o + scale * (p - o)).collect();
            let scaled = mse(&sp, &obs).unwrap();
            prop_assert!((scaled - scale * scale * base).abs() <= 1e-9 * scaled.max(1.0));
        }
    }
}
