//! Evaluation protocols: full-data model comparison, parametric sweeps of the model,
//! and the accuracy-versus-training-size study.

mod compare;
mod study;
mod sweep;

pub use compare::{accuracy_gain, compare_models, ComparisonReport, ComparisonRow};
pub use study::{
    default_training_sizes, run_sampling_study, run_study_set, study_application, ApplicationStudy, ModelTiming,
    OverallCell, StudyCell, StudyModel, StudyReport, StudySpec,
};
pub use sweep::{curves_to_csv, parametric_sweep, Curve, CurvePoint, SweepAxis, SweepSpec};
