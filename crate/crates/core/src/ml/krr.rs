use serde::{Deserialize, Serialize};

use super::linalg::cholesky_solve;
use super::{Point, RegressorInput};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrrHyperParams {
    /// Ridge penalty added to the kernel diagonal.
    pub alpha: f64,
    /// RBF coefficient in `exp(-gamma * |x - y|^2)`.
    pub gamma: f64,
}

impl KrrHyperParams {
    pub const ALPHAS: [f64; 4] = [1.0, 0.1, 0.01, 0.001];
    pub const GAMMAS: [f64; 6] = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0];

    /// Cartesian product of [`Self::ALPHAS`] and [`Self::GAMMAS`], alpha-major.
    pub fn default_grid() -> Vec<KrrHyperParams> {
        Self::ALPHAS
            .iter()
            .flat_map(|&alpha| Self::GAMMAS.iter().map(move |&gamma| KrrHyperParams { alpha, gamma }))
            .collect()
    }
}

/// Standardization fitted on the training features. Constant columns keep unit scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Point,
    pub scale: Point,
}

impl Standardizer {
    fn fit(points: &[Point]) -> Self {
        let n = points.len() as f64;
        let mut mean = [0.0; 2];
        let mut scale = [1.0; 2];
        for d in 0..2 {
            mean[d] = points.iter().map(|x| x[d]).sum::<f64>() / n;
            let var = points.iter().map(|x| (x[d] - mean[d]).powi(2)).sum::<f64>() / n;
            if var > 0.0 {
                scale[d] = var.sqrt();
            }
        }
        Standardizer { mean, scale }
    }

    fn apply(&self, x: &Point) -> Point {
        [(x[0] - self.mean[0]) / self.scale[0], (x[1] - self.mean[1]) / self.scale[1]]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrrModel {
    pub scaler: Standardizer,
    pub gamma: f64,
    /// Standardized training points.
    pub support: Vec<Point>,
    pub coefficients: Vec<f64>,
}

fn rbf(gamma: f64, a: &Point, b: &Point) -> f64 {
    let d0 = a[0] - b[0];
    let d1 = a[1] - b[1];
    (-gamma * (d0 * d0 + d1 * d1)).exp()
}

/// Solves `(K + alpha I) a = y` on standardized features.
pub fn krr_fit(input: &RegressorInput, hp: &KrrHyperParams) -> Result<KrrModel> {
    input.validate()?;
    if input.is_empty() {
        return Err(Error::EmptyInput("kernel ridge regression needs at least one sample"));
    }
    if !(hp.alpha > 0.0 && hp.gamma > 0.0) {
        return Err(Error::domain("alpha and gamma must be positive"));
    }
    let scaler = Standardizer::fit(&input.features);
    let support: Vec<Point> = input.features.iter().map(|x| scaler.apply(x)).collect();
    let n = support.len();
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        gram[i * n + i] = 1.0 + hp.alpha;
        for j in 0..i {
            let k = rbf(hp.gamma, &support[i], &support[j]);
            gram[i * n + j] = k;
            gram[j * n + i] = k;
        }
    }
    let coefficients = cholesky_solve(gram, &input.targets)?;
    Ok(KrrModel { scaler, gamma: hp.gamma, support, coefficients })
}

pub fn krr_predict(model: &KrrModel, points: &[Point]) -> Vec<f64> {
    points
        .iter()
        .map(|x| {
            let z = model.scaler.apply(x);
            model.support.iter().zip(&model.coefficients).map(|(s, a)| a * rbf(model.gamma, &z, s)).sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Gaussian elimination with partial pivoting, independent of the Cholesky path.
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, pivot);
            b.swap(col, pivot);
            for row in (col + 1)..n {
                let factor = a[row][col] / a[col][col];
                let (upper, lower) = a.split_at_mut(row);
                for (x, pivot) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                    *x -= factor * pivot;
                }
                b[row] -= factor * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let s: f64 = ((row + 1)..n).map(|c| a[row][c] * x[c]).sum();
            x[row] = (b[row] - s) / a[row][row];
        }
        x
    }

    fn oracle_predictions(input: &RegressorInput, hp: &KrrHyperParams, queries: &[Point]) -> Vec<f64> {
        let n = input.len() as f64;
        let mean = [0, 1].map(|d| input.features.iter().map(|x| x[d]).sum::<f64>() / n);
        let sd = [0, 1].map(|d| {
            let v = input.features.iter().map(|x| (x[d] - mean[d]).powi(2)).sum::<f64>() / n;
            if v > 0.0 {
                v.sqrt()
            } else {
                1.0
            }
        });
        let z = |x: &Point| [(x[0] - mean[0]) / sd[0], (x[1] - mean[1]) / sd[1]];
        let k = |a: &Point, b: &Point| {
            let (a, b) = (z(a), z(b));
            (-hp.gamma * ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2))).exp()
        };
        let matrix = input
            .features
            .iter()
            .enumerate()
            .map(|(i, xi)| {
                input
                    .features
                    .iter()
                    .enumerate()
                    .map(|(j, xj)| k(xi, xj) + if i == j { hp.alpha } else { 0.0 })
                    .collect()
            })
            .collect();
        let coef = dense_solve(matrix, input.targets.clone());
        queries.iter().map(|q| input.features.iter().zip(&coef).map(|(x, c)| c * k(q, x)).sum()).collect()
    }

    #[test]
    fn single_sample_shrinks_by_alpha() {
        let input = RegressorInput::new(vec![[4.0, 2.0]], vec![2.0]).unwrap();
        for gamma in [1e-3, 1.0, 50.0] {
            let model = krr_fit(&input, &KrrHyperParams { alpha: 1.0, gamma }).unwrap();
            assert!((krr_predict(&model, &[[4.0, 2.0]])[0] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn two_samples_interpolate_with_tiny_ridge() {
        let input = RegressorInput::new(vec![[1.0, 1.2], [8.0, 2.5]], vec![1.0, 6.5]).unwrap();
        let model = krr_fit(&input, &KrrHyperParams { alpha: 1e-10, gamma: 0.5 }).unwrap();
        let p = krr_predict(&model, &input.features);
        assert!((p[0] - 1.0).abs() < 1e-3 && (p[1] - 6.5).abs() < 1e-3, "{p:?}");
    }

    #[test]
    fn far_queries_decay_to_zero() {
        let input = RegressorInput::new(vec![[1.0, 1.0], [2.0, 2.0], [3.0, 1.5]], vec![3.0, 4.0, 5.0]).unwrap();
        let model = krr_fit(&input, &KrrHyperParams { alpha: 0.1, gamma: 1.0 }).unwrap();
        assert!(krr_predict(&model, &[[500.0, 300.0]])[0].abs() < 1e-12);
        assert!(krr_predict(&model, &[]).is_empty());
    }

    #[test]
    fn empty_and_invalid() {
        let empty = RegressorInput::new(vec![], vec![]).unwrap();
        assert!(matches!(krr_fit(&empty, &KrrHyperParams { alpha: 1.0, gamma: 1.0 }), Err(Error::EmptyInput(_))));
        let one = RegressorInput::new(vec![[1.0, 1.0]], vec![1.0]).unwrap();
        assert!(krr_fit(&one, &KrrHyperParams { alpha: 0.0, gamma: 1.0 }).is_err());
    }

    #[test]
    fn default_grid_shape() {
        let grid = KrrHyperParams::default_grid();
        assert_eq!(grid.len(), 24);
        assert_eq!(grid[0], KrrHyperParams { alpha: 1.0, gamma: 1e-5 });
        assert_eq!(grid[23], KrrHyperParams { alpha: 0.001, gamma: 1.0 });
    }

    fn small_input() -> impl Strategy<Value = RegressorInput> {
        prop::collection::vec(((1u32..25).prop_map(f64::from), 1.2f64..2.5, 1.0f64..20.0), 1..=5).prop_map(|rows| {
            RegressorInput {
                features: rows.iter().map(|r| [r.0, r.1]).collect(),
                targets: rows.iter().map(|r| r.2).collect(),
            }
        })
    }

    proptest! {
        #[test]
        fn matches_independent_dense_solve(
            input in small_input(),
            hp in (prop::sample::select(KrrHyperParams::ALPHAS.to_vec()), prop::sample::select(KrrHyperParams::GAMMAS.to_vec()))
                .prop_map(|(alpha, gamma)| KrrHyperParams { alpha, gamma }),
            queries in prop::collection::vec((0.0f64..30.0, 0.5f64..3.0).prop_map(|q| [q.0, q.1]), 1..5),
        ) {
            let model = krr_fit(&input, &hp).unwrap();
            let mut all = queries.clone();
            all.extend(input.features.iter().copied());
            let got = krr_predict(&model, &all);
            let want = oracle_predictions(&input, &hp, &all);
            for (g, w) in got.iter().zip(&want) {
                prop_assert!((g - w).abs() <= 1e-9, "{} vs {}", g, w);
            }
        }

        #[test]
        fn residual_shrinks_with_alpha(input in small_input(), gamma in 0.01f64..2.0) {
            let residual = |alpha: f64| {
                let model = krr_fit(&input, &KrrHyperParams { alpha, gamma }).unwrap();
                krr_predict(&model, &input.features)
                    .iter()
                    .zip(&input.targets)
                    .map(|(p, y)| (p - y).powi(2))
                    .sum::<f64>()
                    .sqrt()
            };
            let norms: Vec<f64> = KrrHyperParams::ALPHAS.iter().map(|&a| residual(a)).collect();
            for w in norms.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9);
            }
        }
    }
}
