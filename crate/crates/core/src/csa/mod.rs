//! Coupled simulated annealing with acceptance-variance control (CSA-M).
//!
//! A population of annealers explores a box in parallel. Uphill moves are accepted
//! with probabilities that are normalized across the whole population, so that
//! annealers sitting at high energies are the ones most willing to move. The
//! acceptance temperature is adapted every iteration to hold the variance of those
//! probabilities near a target, and generation steps are Cauchy distributed with a
//! `T0 / t` temperature schedule.

mod fit;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{seed, Error, Result};

pub use fit::{fit_model, training_mse, FittedModel, ModelKind};

/// Relative step applied to the acceptance temperature by the variance controller.
const ACCEPTANCE_TEMPERATURE_STEP: f64 = 0.05;

/// Share of the theoretical maximum acceptance variance used as the default target.
const DEFAULT_VARIANCE_SHARE: f64 = 0.99;

/// Per-dimension box constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(pairs: &[(f64, f64)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidConfig("bounds need at least one dimension".into()));
        }
        for (i, &(lo, hi)) in pairs.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidConfig(format!("dimension {i}: invalid bounds [{lo}, {hi}]")));
            }
        }
        Ok(Bounds { lower: pairs.iter().map(|p| p.0).collect(), upper: pairs.iter().map(|p| p.1).collect() })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (lo, hi))| lo <= v && v <= hi)
    }

    /// Folds `value` back into dimension `d` by mirror reflection at the walls.
    pub fn reflect(&self, d: usize, value: f64) -> f64 {
        let (lo, hi) = (self.lower[d], self.upper[d]);
        if (lo..=hi).contains(&value) {
            return value;
        }
        let width = hi - lo;
        let mut t = (value - lo).rem_euclid(2.0 * width);
        if t > width {
            t = 2.0 * width - t;
        }
        (lo + t).clamp(lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsaConfig {
    pub num_annealers: usize,
    pub max_iterations: usize,
    pub initial_generation_temperature: f64,
    pub initial_acceptance_temperature: f64,
    /// Target variance of the coupled acceptance probabilities. `None` selects 99% of
    /// the maximum `(m - 1) / m^2`.
    pub desired_acceptance_variance: Option<f64>,
    pub seed: u64,
    /// Evaluate the annealers' candidates concurrently on the rayon pool.
    pub parallel: bool,
    /// Keep the per-iteration best-so-far values.
    pub record_trace: bool,
}

impl Default for CsaConfig {
    fn default() -> Self {
        CsaConfig {
            num_annealers: 10,
            max_iterations: 30_000,
            initial_generation_temperature: 1.0,
            initial_acceptance_temperature: 0.9,
            desired_acceptance_variance: None,
            seed: 0,
            parallel: false,
            record_trace: true,
        }
    }
}

impl CsaConfig {
    pub fn max_acceptance_variance(&self) -> f64 {
        let m = self.num_annealers as f64;
        (m - 1.0) / (m * m)
    }

    pub fn target_variance(&self) -> f64 {
        self.desired_acceptance_variance.unwrap_or(DEFAULT_VARIANCE_SHARE * self.max_acceptance_variance())
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_annealers < 2 {
            return Err(Error::InvalidConfig("coupling needs at least two annealers".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
        }
        for (name, t) in [
            ("initial_generation_temperature", self.initial_generation_temperature),
            ("initial_acceptance_temperature", self.initial_acceptance_temperature),
        ] {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        let target = self.target_variance();
        if !(target > 0.0 && target <= self.max_acceptance_variance()) {
            return Err(Error::InvalidConfig(format!(
                "desired acceptance variance {target} outside (0, {}]",
                self.max_acceptance_variance()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub iterations_used: usize,
    /// Best-so-far objective after each iteration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<f64>>,
    /// Probes where the objective returned NaN or an infinity; those moves were rejected.
    pub non_finite_evaluations: usize,
}

/// Coupled acceptance probabilities `exp((E_i - E_max)/T) / sum_j exp((E_j - E_max)/T)`.
pub fn coupled_acceptance(energies: &[f64], acceptance_temperature: f64) -> Vec<f64> {
    let e_max = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = energies.iter().map(|e| ((e - e_max) / acceptance_temperature).exp()).collect();
    let gamma: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / gamma).collect()
}

/// Variance of the coupled acceptance probabilities, `mean(A^2) - 1/m^2`.
pub fn acceptance_variance(probabilities: &[f64]) -> f64 {
    let m = probabilities.len() as f64;
    probabilities.iter().map(|a| a * a).sum::<f64>() / m - 1.0 / (m * m)
}

fn cauchy(rng: &mut ChaCha8Rng) -> f64 {
    (std::f64::consts::PI * (rng.random::<f64>() - 0.5)).tan()
}

struct Annealer {
    rng: ChaCha8Rng,
    position: Vec<f64>,
    energy: f64,
}

/// Minimizes `objective` over `bounds`.
///
/// Results are a pure function of `(objective, bounds, config)`: every annealer owns
/// a random stream derived from the seed, so concurrent evaluation does not change
/// the outcome.
pub fn csa_minimize<F>(objective: F, bounds: &Bounds, config: &CsaConfig) -> Result<FitResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    config.validate()?;
    let dim = bounds.dim();
    let m = config.num_annealers;
    let widths: Vec<f64> = bounds.lower.iter().zip(&bounds.upper).map(|(lo, hi)| hi - lo).collect();
    let evaluate = |points: &[Vec<f64>]| -> Vec<f64> {
        if config.parallel {
            points.par_iter().map(|x| objective(x)).collect()
        } else {
            points.iter().map(|x| objective(x)).collect()
        }
    };

    let mut rngs: Vec<ChaCha8Rng> = (0..m).map(|i| seed::rng(config.seed, &[i as u64])).collect();
    let initial: Vec<Vec<f64>> = rngs
        .iter_mut()
        .map(|rng| (0..dim).map(|d| bounds.lower[d] + widths[d] * rng.random::<f64>()).collect())
        .collect();
    let initial_energy = evaluate(&initial);
    let mut non_finite = initial_energy.iter().filter(|e| !e.is_finite()).count();
    let seed_index = initial_energy
        .iter()
        .enumerate()
        .filter(|(_, e)| e.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .ok_or(Error::NonFiniteObjective)?;

    let mut annealers: Vec<Annealer> = rngs
        .into_iter()
        .zip(initial.iter().zip(&initial_energy))
        .map(|(rng, (x, &e))| {
            if e.is_finite() {
                Annealer { rng, position: x.clone(), energy: e }
            } else {
                Annealer { rng, position: initial[seed_index].clone(), energy: initial_energy[seed_index] }
            }
        })
        .collect();

    let mut best_point = initial[seed_index].clone();
    let mut best_value = initial_energy[seed_index];
    let mut trace = config.record_trace.then(|| Vec::with_capacity(config.max_iterations));
    let mut t_acc = config.initial_acceptance_temperature;
    let target_variance = config.target_variance();
    let mut candidates = vec![vec![0.0; dim]; m];

    for t in 1..=config.max_iterations {
        let t_gen = config.initial_generation_temperature / t as f64;
        for (a, y) in annealers.iter_mut().zip(candidates.iter_mut()) {
            for d in 0..dim {
                let step = t_gen * widths[d] * cauchy(&mut a.rng);
                let proposal = a.position[d] + step;
                y[d] = if proposal.is_finite() { bounds.reflect(d, proposal) } else { a.position[d] };
            }
        }
        let candidate_energy = evaluate(&candidates);

        let energies: Vec<f64> = annealers.iter().map(|a| a.energy).collect();
        let acceptance = coupled_acceptance(&energies, t_acc);

        for ((a, y), (&e_new, &prob)) in
            annealers.iter_mut().zip(&candidates).zip(candidate_energy.iter().zip(&acceptance))
        {
            let r: f64 = a.rng.random();
            if !e_new.is_finite() {
                non_finite += 1;
                continue;
            }
            if e_new < best_value {
                best_value = e_new;
                best_point.copy_from_slice(y);
            }
            if e_new <= a.energy || prob > r {
                a.position.copy_from_slice(y);
                a.energy = e_new;
            }
        }

        if acceptance_variance(&acceptance) < target_variance {
            t_acc *= 1.0 - ACCEPTANCE_TEMPERATURE_STEP;
        } else {
            t_acc *= 1.0 + ACCEPTANCE_TEMPERATURE_STEP;
        }
        t_acc = t_acc.clamp(f64::MIN_POSITIVE, f64::MAX);

        if let Some(trace) = trace.as_mut() {
            trace.push(best_value);
        }
    }

    Ok(FitResult {
        best_point,
        best_value,
        iterations_used: config.max_iterations,
        trace,
        non_finite_evaluations: non_finite,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

    fn quadratic(x: &[f64]) -> f64 {
        (x[0] - 0.3).powi(2)
    }

    fn unit(dim: usize) -> Bounds {
        Bounds::new(&vec![(0.0, 1.0); dim]).unwrap()
    }

    #[test]
    fn quadratic_optimum() {
        let r = csa_minimize(quadratic, &unit(1), &CsaConfig::default()).unwrap();
        assert!((r.best_point[0] - 0.3).abs() < 1e-3, "{:?}", r.best_point);
        assert_eq!(r.best_value, quadratic(&r.best_point));
        assert_eq!(r.iterations_used, 30_000);
    }

    #[test]
    fn flat_landscape() {
        let r = csa_minimize(|_| 5.0, &unit(2), &CsaConfig { max_iterations: 200, ..Default::default() }).unwrap();
        assert_eq!(r.best_value, 5.0);
        assert!(unit(2).contains(&r.best_point));
    }

    #[test]
    fn deterministic_for_a_seed() {
        let config = CsaConfig { max_iterations: 2_000, seed: 42, ..Default::default() };
        let f = |x: &[f64]| (x[0] - 0.2).powi(2) + (x[1] * 3.0).sin();
        let a = csa_minimize(f, &unit(2), &config).unwrap();
        let b = csa_minimize(f, &unit(2), &config).unwrap();
        assert_eq!(a, b);
        let c = csa_minimize(f, &unit(2), &CsaConfig { seed: 43, ..config }).unwrap();
        assert_ne!(a.trace, c.trace);
    }

    #[test]
    fn trace_is_monotone_and_bounded_by_initial_population() {
        let config = CsaConfig { max_iterations: 3_000, seed: 3, ..Default::default() };
        let f = |x: &[f64]| (x[0] * 20.0).cos() + x[1];
        let r = csa_minimize(f, &unit(2), &config).unwrap();
        let trace = r.trace.unwrap();
        assert_eq!(trace.len(), 3_000);
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(*trace.last().unwrap(), r.best_value);

        let mut rng0 = seed::rng(3, &[0]);
        let x0: Vec<f64> = (0..2).map(|_| rng0.random::<f64>()).collect();
        assert!(r.best_value <= f(&x0));
    }

    #[test]
    fn every_probe_stays_in_the_box() {
        let bounds = Bounds::new(&[(-2.0, 3.0), (10.0, 10.5)]).unwrap();
        let escaped = AtomicBool::new(false);
        let f = |x: &[f64]| {
            if !bounds.contains(x) {
                escaped.store(true, Ordering::Relaxed);
            }
            x[0].powi(2) + (x[1] - 10.0).abs()
        };
        let config = CsaConfig { max_iterations: 5_000, initial_generation_temperature: 50.0, ..Default::default() };
        csa_minimize(f, &bounds, &config).unwrap();
        assert!(!escaped.load(Ordering::Relaxed));
    }

    #[test]
    fn reflection_mirrors_at_walls() {
        let b = Bounds::new(&[(0.0, 1.0)]).unwrap();
        assert!((b.reflect(0, 1.25) - 0.75).abs() < 1e-15);
        assert!((b.reflect(0, -0.25) - 0.25).abs() < 1e-15);
        assert!((b.reflect(0, 2.25) - 0.25).abs() < 1e-15);
        assert_eq!(b.reflect(0, 0.4), 0.4);
        assert!((0.0..=1.0).contains(&b.reflect(0, 1e300)));
    }

    #[test]
    fn non_finite_probes_are_rejected() {
        let calls = AtomicUsize::new(0);
        let f = |x: &[f64]| {
            calls.fetch_add(1, Ordering::Relaxed);
            if x[0] > 0.5 {
                f64::NAN
            } else {
                (x[0] - 0.25).powi(2)
            }
        };
        let r = csa_minimize(f, &unit(1), &CsaConfig { max_iterations: 2_000, ..Default::default() }).unwrap();
        assert!(r.best_point[0] <= 0.5);
        assert!(r.non_finite_evaluations > 0);
        assert!(r.best_value.is_finite());
    }

    #[test]
    fn all_non_finite_start_aborts() {
        let r = csa_minimize(|_| f64::INFINITY, &unit(1), &CsaConfig { max_iterations: 10, ..Default::default() });
        assert_eq!(r.unwrap_err(), Error::NonFiniteObjective);
    }

    #[test]
    fn coupled_probabilities_are_normalized() {
        let a = coupled_acceptance(&[1.0, 2.0, 3.0, -3.0], 1.0);
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(a[2] > a[1] && a[1] > a[0]);
        let v = acceptance_variance(&[1.0, 0.0, 0.0, 0.0]);
        assert!((v - 3.0 / 16.0).abs() < 1e-15);
        assert!(acceptance_variance(&[0.25; 4]).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(CsaConfig { num_annealers: 1, ..Default::default() }.validate().is_err());
        assert!(CsaConfig { max_iterations: 0, ..Default::default() }.validate().is_err());
        assert!(CsaConfig { desired_acceptance_variance: Some(0.5), ..Default::default() }.validate().is_err());
        assert!(Bounds::new(&[(1.0, 1.0)]).is_err());
        assert!(Bounds::new(&[]).is_err());
    }
}
