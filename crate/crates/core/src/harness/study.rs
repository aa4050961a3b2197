use std::time::Instant;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csa::{fit_model, CsaConfig, FittedModel, ModelKind};
use crate::io::report::opt;
use crate::io::{Report, ReportKind};
use crate::ml::{
    grid_search_cv, krr_fit, krr_predict, tree_fit, tree_predict, KrrHyperParams, RegressorInput, TreeHyperParams,
};
use crate::model::{mse, SpeedupSample, DEFAULT_K_MAX};
use crate::{seed, Error, Result};

/// Training-set sizes used when none are given: powers of two from 4 to 256.
pub const DEFAULT_TRAINING_SIZES: [usize; 7] = [4, 8, 16, 32, 64, 128, 256];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyModel {
    Amdahl,
    Proposed,
    Krr,
    Tree,
}

impl StudyModel {
    pub const ALL: [StudyModel; 4] = [StudyModel::Amdahl, StudyModel::Proposed, StudyModel::Krr, StudyModel::Tree];

    pub fn name(self) -> &'static str {
        match self {
            StudyModel::Amdahl => "amdahl",
            StudyModel::Proposed => "proposed",
            StudyModel::Krr => "krr",
            StudyModel::Tree => "tree",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown model '{s}'")))
    }

    fn code(self) -> u64 {
        self as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySpec {
    /// `None` selects [`DEFAULT_TRAINING_SIZES`] truncated below the sample count.
    pub training_sizes: Option<Vec<usize>>,
    pub repetitions: usize,
    pub models: Vec<StudyModel>,
    pub seed: u64,
    /// Annealing settings for the analytical models; the seed is replaced per fit.
    pub csa: CsaConfig,
    pub k_max: f64,
    pub cv_folds: usize,
    pub krr_grid: Vec<KrrHyperParams>,
    pub tree: TreeHyperParams,
    /// Keep wall-clock time per model. Timings make reports non-reproducible.
    pub record_timing: bool,
}

impl Default for StudySpec {
    fn default() -> Self {
        StudySpec {
            training_sizes: None,
            repetitions: 100,
            models: StudyModel::ALL.to_vec(),
            seed: 0,
            csa: CsaConfig { record_trace: false, ..CsaConfig::default() },
            k_max: DEFAULT_K_MAX,
            cv_folds: 3,
            krr_grid: KrrHyperParams::default_grid(),
            tree: TreeHyperParams::default(),
            record_timing: false,
        }
    }
}

pub fn default_training_sizes(sample_count: usize) -> Vec<usize> {
    DEFAULT_TRAINING_SIZES.into_iter().filter(|&s| s < sample_count).collect()
}

impl StudySpec {
    fn sizes_for(&self, sample_count: usize) -> Result<Vec<usize>> {
        let sizes = match &self.training_sizes {
            Some(s) => s.clone(),
            None => default_training_sizes(sample_count),
        };
        if sizes.is_empty() {
            return Err(Error::InsufficientSamples { size: DEFAULT_TRAINING_SIZES[0], available: sample_count });
        }
        if sizes.windows(2).any(|w| w[1] <= w[0]) || sizes[0] == 0 {
            return Err(Error::InvalidConfig("training sizes must be positive and strictly increasing".into()));
        }
        if let Some(&size) = sizes.iter().find(|&&s| s >= sample_count) {
            return Err(Error::InsufficientSamples { size, available: sample_count });
        }
        Ok(sizes)
    }

    fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::InvalidConfig("repetitions must be at least 1".into()));
        }
        if self.models.is_empty() {
            return Err(Error::InvalidConfig("no models selected".into()));
        }
        if self.models.contains(&StudyModel::Krr) && self.krr_grid.is_empty() {
            return Err(Error::InvalidConfig("KRR grid is empty".into()));
        }
        self.csa.validate()
    }
}

/// Test-set MSE of one model at one training size across all repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyCell {
    pub model: StudyModel,
    pub training_size: usize,
    pub repetitions: usize,
    /// Repetitions whose fit failed; they appear as `null` in `mse_values`.
    pub failed: usize,
    /// Median over the successful repetitions.
    pub median_mse: Option<f64>,
    /// Population standard deviation over the successful repetitions.
    pub std_mse: Option<f64>,
    pub mse_values: Vec<Option<f64>>,
}

impl StudyCell {
    fn from_values(model: StudyModel, training_size: usize, mse_values: Vec<Option<f64>>) -> Self {
        let ok: Vec<f64> = mse_values.iter().flatten().copied().collect();
        StudyCell {
            model,
            training_size,
            repetitions: mse_values.len(),
            failed: mse_values.len() - ok.len(),
            median_mse: median(&ok),
            std_mse: std_dev(&ok),
            mse_values,
        }
    }

    /// Recomputes `(median, std)` from the stored per-repetition values.
    pub fn recompute(&self) -> (Option<f64>, Option<f64>) {
        let ok: Vec<f64> = self.mse_values.iter().flatten().copied().collect();
        (median(&ok), std_dev(&ok))
    }
}

pub(crate) fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

pub(crate) fn std_dev(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Some((values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelTiming {
    pub model: StudyModel,
    pub training_size: usize,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplicationStudy {
    pub application: String,
    pub sample_count: usize,
    pub training_sizes: Vec<usize>,
    /// Size-major, then in the order models were requested.
    pub cells: Vec<StudyCell>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Vec<ModelTiming>>,
}

impl ApplicationStudy {
    pub fn cell(&self, model: StudyModel, training_size: usize) -> Option<&StudyCell> {
        self.cells.iter().find(|c| c.model == model && c.training_size == training_size)
    }
}

/// Cross-application aggregate: the mean of per-application medians and stds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallCell {
    pub model: StudyModel,
    pub training_size: usize,
    pub applications: usize,
    pub mean_median_mse: Option<f64>,
    pub mean_std_mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub seed: u64,
    pub repetitions: usize,
    pub models: Vec<StudyModel>,
    pub applications: Vec<ApplicationStudy>,
    pub overall: Vec<OverallCell>,
}

impl StudyReport {
    pub fn empty(seed: u64, repetitions: usize, models: Vec<StudyModel>) -> Self {
        StudyReport { seed, repetitions, models, applications: Vec::new(), overall: Vec::new() }
    }

    /// Rebuilds `overall` from the application studies.
    pub fn aggregate(&mut self) {
        let mut sizes: Vec<usize> = self.applications.iter().flat_map(|a| a.training_sizes.iter().copied()).collect();
        sizes.sort_unstable();
        sizes.dedup();
        let mean = |v: Vec<f64>| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        self.overall = sizes
            .iter()
            .flat_map(|&size| self.models.iter().map(move |&model| (size, model)))
            .filter_map(|(size, model)| {
                let cells: Vec<&StudyCell> = self.applications.iter().filter_map(|a| a.cell(model, size)).collect();
                (!cells.is_empty()).then(|| OverallCell {
                    model,
                    training_size: size,
                    applications: cells.len(),
                    mean_median_mse: mean(cells.iter().filter_map(|c| c.median_mse).collect()),
                    mean_std_mse: mean(cells.iter().filter_map(|c| c.std_mse).collect()),
                })
            })
            .collect();
    }
}

impl Report for StudyReport {
    const KIND: ReportKind = ReportKind::Study;

    fn csv_header() -> &'static [&'static str] {
        &["application", "model", "training_size", "repetitions", "failed", "median_mse", "std_mse"]
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.applications
            .iter()
            .flat_map(|a| {
                a.cells.iter().map(move |c| {
                    vec![
                        a.application.clone(),
                        c.model.name().to_string(),
                        c.training_size.to_string(),
                        c.repetitions.to_string(),
                        c.failed.to_string(),
                        opt(c.median_mse),
                        opt(c.std_mse),
                    ]
                })
            })
            .collect()
    }
}

/// Splits `0..n` into a seeded uniform training subset of `size` and the remaining test set.
pub(crate) fn split(n: usize, size: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut train = sample(&mut seed::rng(seed, &[]), n, size).into_vec();
    train.sort_unstable();
    let mut in_train = vec![false; n];
    for &i in &train {
        in_train[i] = true;
    }
    let test = (0..n).filter(|&i| !in_train[i]).collect();
    (train, test)
}

fn pick(samples: &[SpeedupSample], indices: &[usize]) -> Vec<SpeedupSample> {
    indices.iter().map(|&i| samples[i]).collect()
}

fn evaluate_model(
    model: StudyModel,
    train: &[SpeedupSample],
    test: &[SpeedupSample],
    spec: &StudySpec,
    unit_seed: u64,
) -> Result<f64> {
    let observed: Vec<f64> = test.iter().map(|s| s.speedup).collect();
    let model_seed = seed::derive(unit_seed, &[model.code()]);
    let predicted = match model {
        StudyModel::Amdahl | StudyModel::Proposed => {
            let kind = if model == StudyModel::Amdahl { ModelKind::Amdahl } else { ModelKind::Proposed };
            let config = CsaConfig { seed: model_seed, ..spec.csa.clone() };
            let fit = fit_model(kind, train, &kind.default_bounds(spec.k_max)?, &config)?;
            let fitted = FittedModel::from_point(kind, &fit.best_point)?;
            test.iter().map(|s| fitted.predict(s.config)).collect::<Result<Vec<_>>>()?
        }
        StudyModel::Krr => {
            let input = RegressorInput::from_samples(train);
            let cv = grid_search_cv(krr_fit, krr_predict, &input, &spec.krr_grid, spec.cv_folds, model_seed)?;
            let fitted = krr_fit(&input, &cv.best)?;
            krr_predict(&fitted, &RegressorInput::from_samples(test).features)
        }
        StudyModel::Tree => {
            let fitted = tree_fit(&RegressorInput::from_samples(train), &spec.tree)?;
            tree_predict(&fitted, &RegressorInput::from_samples(test).features)
        }
    };
    let e = mse(&predicted, &observed)?;
    if e.is_finite() {
        Ok(e)
    } else {
        Err(Error::domain("non-finite test error"))
    }
}

/// Runs the accuracy-versus-training-size protocol on one application.
///
/// For every size and repetition a training subset is drawn uniformly without
/// replacement from a seed derived from `(spec.seed, size index, repetition)`; the
/// remaining samples form the test set. Each model is trained on the subset and its
/// test MSE recorded. Units run concurrently on the rayon pool and the outcome does
/// not depend on the number of threads.
pub fn study_application(application: &str, samples: &[SpeedupSample], spec: &StudySpec) -> Result<ApplicationStudy> {
    spec.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptyInput("no samples to study"));
    }
    let sizes = spec.sizes_for(samples.len())?;
    let units: Vec<(usize, usize)> =
        (0..sizes.len()).flat_map(|s| (0..spec.repetitions).map(move |r| (s, r))).collect();

    // Per unit: for each model, (test mse, seconds).
    let outcomes: Vec<Vec<(Option<f64>, f64)>> = units
        .par_iter()
        .map(|&(size_index, rep)| {
            let unit_seed = seed::derive(spec.seed, &[size_index as u64, rep as u64]);
            let (train_idx, test_idx) = split(samples.len(), sizes[size_index], unit_seed);
            let (train, test) = (pick(samples, &train_idx), pick(samples, &test_idx));
            spec.models
                .iter()
                .map(|&model| {
                    let start = Instant::now();
                    let value = evaluate_model(model, &train, &test, spec, unit_seed).ok();
                    (value, start.elapsed().as_secs_f64())
                })
                .collect()
        })
        .collect();

    let mut cells = Vec::with_capacity(sizes.len() * spec.models.len());
    let mut timing = Vec::new();
    for (size_index, &size) in sizes.iter().enumerate() {
        let block = &outcomes[size_index * spec.repetitions..(size_index + 1) * spec.repetitions];
        for (m, &model) in spec.models.iter().enumerate() {
            cells.push(StudyCell::from_values(model, size, block.iter().map(|o| o[m].0).collect()));
            timing.push(ModelTiming { model, training_size: size, total_seconds: block.iter().map(|o| o[m].1).sum() });
        }
    }
    Ok(ApplicationStudy {
        application: application.to_string(),
        sample_count: samples.len(),
        training_sizes: sizes,
        cells,
        timing: spec.record_timing.then_some(timing),
    })
}

/// Single-sample-set study.
pub fn run_sampling_study(samples: &[SpeedupSample], spec: &StudySpec) -> Result<StudyReport> {
    run_study_set(&[("samples".to_string(), samples.to_vec())], spec)
}

/// Studies several applications with the same spec and aggregates them.
pub fn run_study_set(applications: &[(String, Vec<SpeedupSample>)], spec: &StudySpec) -> Result<StudyReport> {
    let mut report = StudyReport::empty(spec.seed, spec.repetitions, spec.models.clone());
    for (name, samples) in applications {
        report.applications.push(study_application(name, samples, spec)?);
    }
    report.aggregate();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{generate_synthetic, read_report, write_report, Format, SyntheticSpec};
    use crate::model::speedups_from_measurements;

    fn samples() -> Vec<SpeedupSample> {
        speedups_from_measurements(&generate_synthetic(&SyntheticSpec::default()).unwrap()).unwrap()
    }

    fn quick(models: Vec<StudyModel>) -> StudySpec {
        StudySpec {
            training_sizes: Some(vec![4, 16]),
            repetitions: 3,
            models,
            seed: 11,
            csa: CsaConfig { max_iterations: 300, record_trace: false, ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn split_is_a_partition() {
        for seed in 0..20 {
            let (train, test) = split(50, 13, seed);
            assert_eq!(train.len(), 13);
            let mut all = [train.clone(), test].concat();
            all.sort_unstable();
            assert_eq!(all, (0..50).collect::<Vec<_>>());
        }
    }

    #[test]
    fn default_sizes_truncate() {
        assert_eq!(default_training_sizes(336), DEFAULT_TRAINING_SIZES.to_vec());
        assert_eq!(default_training_sizes(56), vec![4, 8, 16, 32]);
        assert_eq!(default_training_sizes(64), vec![4, 8, 16, 32]);
    }

    #[test]
    fn deterministic_and_recomputable() {
        let s = samples();
        let spec = StudySpec { training_sizes: Some(vec![4]), repetitions: 1, ..quick(StudyModel::ALL.to_vec()) };
        let a = run_sampling_study(&s, &spec).unwrap();
        assert_eq!(a, run_sampling_study(&s, &spec).unwrap());

        let spec = quick(StudyModel::ALL.to_vec());
        let report = run_sampling_study(&s, &spec).unwrap();
        let app = &report.applications[0];
        assert_eq!(app.cells.len(), 8);
        for cell in &app.cells {
            assert_eq!(cell.repetitions, 3);
            assert_eq!(cell.mse_values.len(), 3);
            assert_eq!(cell.recompute(), (cell.median_mse, cell.std_mse));
        }
        assert!(app.timing.is_none());
    }

    #[test]
    fn thread_count_does_not_matter() {
        let s = samples();
        let spec = quick(vec![StudyModel::Proposed, StudyModel::Krr]);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| run_sampling_study(&s, &spec)).unwrap();
        let b = four.install(|| run_sampling_study(&s, &spec)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn size_must_be_below_sample_count() {
        let s = samples();
        let spec = StudySpec { training_sizes: Some(vec![4, 336]), ..quick(vec![StudyModel::Tree]) };
        assert_eq!(
            run_sampling_study(&s, &spec).unwrap_err(),
            Error::InsufficientSamples { size: 336, available: 336 }
        );
        let spec = StudySpec { training_sizes: Some(vec![8, 4]), ..quick(vec![StudyModel::Tree]) };
        assert!(run_sampling_study(&s, &spec).is_err());
        let spec = StudySpec { training_sizes: None, ..quick(vec![StudyModel::Tree]) };
        assert!(matches!(run_sampling_study(&s[..4], &spec), Err(Error::InsufficientSamples { .. })));
    }

    #[test]
    fn failed_repetitions_are_counted() {
        let s = samples();
        // Two training samples cannot be split into three folds.
        let spec = StudySpec { training_sizes: Some(vec![2]), ..quick(vec![StudyModel::Krr, StudyModel::Tree]) };
        let report = run_sampling_study(&s, &spec).unwrap();
        let krr = report.applications[0].cell(StudyModel::Krr, 2).unwrap();
        assert_eq!((krr.failed, krr.repetitions, krr.median_mse), (3, 3, None));
        assert!(krr.mse_values.iter().all(Option::is_none));
        let tree = report.applications[0].cell(StudyModel::Tree, 2).unwrap();
        assert_eq!(tree.failed, 0);

        let json = write_report(&report, Format::Json).unwrap();
        assert_eq!(read_report::<StudyReport>(&json).unwrap(), report);
        let csv = String::from_utf8(write_report(&report, Format::Csv).unwrap()).unwrap();
        assert!(csv.contains("samples,krr,2,3,3,,\n"), "{csv}");
    }

    #[test]
    fn empty_report_is_a_valid_document() {
        let report = StudyReport::empty(0, 100, StudyModel::ALL.to_vec());
        let json = write_report(&report, Format::Json).unwrap();
        let back: StudyReport = read_report(&json).unwrap();
        assert_eq!(back, report);
        let csv = write_report(&report, Format::Csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1);
        assert!(matches!(read_report::<crate::harness::ComparisonReport>(&json), Err(Error::Schema { .. })));
    }

    #[test]
    fn overall_is_mean_of_medians() {
        let cell = |m: f64| StudyCell::from_values(StudyModel::Tree, 4, vec![Some(m), Some(m)]);
        let app = |name: &str, m: f64| ApplicationStudy {
            application: name.into(),
            sample_count: 10,
            training_sizes: vec![4],
            cells: vec![cell(m)],
            timing: None,
        };
        let mut report = StudyReport::empty(0, 2, vec![StudyModel::Tree]);
        report.applications = vec![app("a", 1.0), app("b", 3.0)];
        report.aggregate();
        assert_eq!(report.overall.len(), 1);
        assert_eq!(report.overall[0].mean_median_mse, Some(2.0));
        assert_eq!(report.overall[0].mean_std_mse, Some(0.0));
    }

    #[test]
    fn statistics() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
        assert_eq!(std_dev(&[1.0, 3.0]), Some(1.0));
        assert_eq!(StudyModel::parse("KRR").unwrap(), StudyModel::Krr);
        assert!(StudyModel::parse("svr").is_err());
    }
}
