//! Machine-learning baselines over the `(p, phi)` feature space: RBF kernel ridge
//! regression, a CART regression tree, and k-fold grid-search cross-validation.

mod krr;
mod linalg;
mod tree;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::SpeedupSample;
use crate::{seed, Error, Result};

pub use krr::{krr_fit, krr_predict, KrrHyperParams, KrrModel};
pub use tree::{tree_fit, tree_predict, TreeHyperParams, TreeModel};

/// A `(p, phi)` feature pair.
pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorInput {
    pub features: Vec<Point>,
    pub targets: Vec<f64>,
}

impl RegressorInput {
    pub fn new(features: Vec<Point>, targets: Vec<f64>) -> Result<Self> {
        let input = RegressorInput { features, targets };
        input.validate()?;
        Ok(input)
    }

    pub fn from_samples(samples: &[SpeedupSample]) -> Self {
        RegressorInput {
            features: samples.iter().map(|s| [f64::from(s.config.p), s.config.phi]).collect(),
            targets: samples.iter().map(|s| s.speedup).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.len() != self.targets.len() {
            return Err(Error::LengthMismatch { left: self.features.len(), right: self.targets.len() });
        }
        let finite = self.features.iter().flatten().chain(&self.targets).all(|v| v.is_finite());
        if !finite {
            return Err(Error::domain("regressor input contains non-finite values"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> RegressorInput {
        RegressorInput {
            features: indices.iter().map(|&i| self.features[i]).collect(),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
        }
    }
}

/// Result of a grid search: the winning candidate and the mean validation MSE of every
/// candidate (`inf` where fitting failed).
#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome<H> {
    pub best: H,
    pub best_index: usize,
    pub scores: Vec<f64>,
}

/// Seeded shuffle followed by a contiguous partition; the first `n % k` folds get one
/// extra sample.
pub fn cv_folds(n: usize, k_folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k_folds < 2 || n < k_folds {
        return Err(Error::TooFewSamples { samples: n, folds: k_folds });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed, &[]));
    let (base, extra) = (n / k_folds, n % k_folds);
    let mut folds = Vec::with_capacity(k_folds);
    let mut start = 0;
    for i in 0..k_folds {
        let len = base + usize::from(i < extra);
        folds.push(order[start..start + len].to_vec());
        start += len;
    }
    Ok(folds)
}

/// Picks the grid element with the lowest mean validation MSE over `k_folds` folds.
/// Ties go to the earliest element.
pub fn grid_search_cv<H, M, Fit, Predict>(
    fit: Fit,
    predict: Predict,
    input: &RegressorInput,
    grid: &[H],
    k_folds: usize,
    seed: u64,
) -> Result<CvOutcome<H>>
where
    H: Clone + Sync,
    Fit: Fn(&RegressorInput, &H) -> Result<M> + Sync,
    Predict: Fn(&M, &[Point]) -> Vec<f64> + Sync,
{
    input.validate()?;
    if grid.is_empty() {
        return Err(Error::EmptyInput("hyperparameter grid is empty"));
    }
    let folds = cv_folds(input.len(), k_folds, seed)?;
    let splits: Vec<(RegressorInput, RegressorInput)> = (0..folds.len())
        .map(|v| {
            let train: Vec<usize> =
                folds.iter().enumerate().filter(|(i, _)| *i != v).flat_map(|(_, f)| f.iter().copied()).collect();
            (input.subset(&train), input.subset(&folds[v]))
        })
        .collect();

    let scores: Vec<f64> = grid
        .par_iter()
        .map(|hp| {
            let mut total = 0.0;
            for (train, valid) in &splits {
                let Ok(model) = fit(train, hp) else { return f64::INFINITY };
                let predicted = predict(&model, &valid.features);
                match crate::model::mse(&predicted, &valid.targets) {
                    Ok(e) if e.is_finite() => total += e,
                    _ => return f64::INFINITY,
                }
            }
            total / splits.len() as f64
        })
        .collect();

    let mut best_index = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s < scores[best_index] {
            best_index = i;
        }
    }
    if !scores[best_index].is_finite() {
        return Err(Error::InvalidConfig("no grid candidate could be fitted".into()));
    }
    Ok(CvOutcome { best: grid[best_index].clone(), best_index, scores })
}
