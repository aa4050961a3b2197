use serde::{Deserialize, Serialize};

use super::{Point, RegressorInput};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeHyperParams {
    pub min_samples_leaf: usize,
    /// `None` grows until leaves are pure or cannot be split.
    pub max_depth: Option<usize>,
}

impl Default for TreeHyperParams {
    fn default() -> Self {
        TreeHyperParams { min_samples_leaf: 1, max_depth: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
        samples: usize,
    },
    /// Points with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Regression tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub nodes: Vec<Node>,
}

impl TreeModel {
    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    fn leaf_of(&self, x: &Point) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

struct SplitCandidate {
    feature: usize,
    threshold: f64,
    sse: f64,
    /// Position in the sorted order after which the left child ends.
    cut: usize,
}

struct Builder<'a> {
    input: &'a RegressorInput,
    hp: TreeHyperParams,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn build(&mut self, indices: &mut [usize], depth: usize) -> usize {
        let id = self.nodes.len();
        let targets = &self.input.targets;
        let mean = indices.iter().map(|&i| targets[i]).sum::<f64>() / indices.len() as f64;
        self.nodes.push(Node::Leaf { value: mean, samples: indices.len() });

        let pure = indices.iter().all(|&i| targets[i] == targets[indices[0]]);
        let depth_reached = self.hp.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_reached || indices.len() < 2 * self.hp.min_samples_leaf {
            return id;
        }
        let Some(best) = self.best_split(indices) else { return id };

        let feature = best.feature;
        let features = &self.input.features;
        indices.sort_by(|&a, &b| features[a][feature].total_cmp(&features[b][feature]));
        let (left_idx, right_idx) = indices.split_at_mut(best.cut);
        let left = self.build(left_idx, depth + 1);
        let right = self.build(right_idx, depth + 1);
        self.nodes[id] = Node::Split { feature, threshold: best.threshold, left, right };
        id
    }

    /// Exhaustive search over midpoints between adjacent distinct feature values,
    /// minimizing the summed squared error of the two children.
    fn best_split(&self, indices: &[usize]) -> Option<SplitCandidate> {
        let n = indices.len();
        let min_leaf = self.hp.min_samples_leaf;
        let mut best: Option<SplitCandidate> = None;
        let mut order = indices.to_vec();
        for feature in 0..2 {
            let x = |i: usize| self.input.features[i][feature];
            order.sort_by(|&a, &b| x(a).total_cmp(&x(b)));
            let ys: Vec<f64> = order.iter().map(|&i| self.input.targets[i]).collect();
            let total: f64 = ys.iter().sum();
            let total_sq: f64 = ys.iter().map(|y| y * y).sum();
            let (mut sum_l, mut sq_l) = (0.0, 0.0);
            for cut in 1..n {
                sum_l += ys[cut - 1];
                sq_l += ys[cut - 1] * ys[cut - 1];
                let (lo, hi) = (x(order[cut - 1]), x(order[cut]));
                if lo == hi || cut < min_leaf || n - cut < min_leaf {
                    continue;
                }
                let (nl, nr) = (cut as f64, (n - cut) as f64);
                let sum_r = total - sum_l;
                let sse = (sq_l - sum_l * sum_l / nl) + ((total_sq - sq_l) - sum_r * sum_r / nr);
                if best.as_ref().is_none_or(|b| sse < b.sse) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(SplitCandidate { feature, threshold, sse, cut });
                }
            }
        }
        best
    }
}

/// Grows a CART regression tree with greedy axis-aligned splits.
pub fn tree_fit(input: &RegressorInput, hp: &TreeHyperParams) -> Result<TreeModel> {
    input.validate()?;
    if input.is_empty() {
        return Err(Error::EmptyInput("regression tree needs at least one sample"));
    }
    if hp.min_samples_leaf == 0 {
        return Err(Error::domain("min_samples_leaf must be at least 1"));
    }
    let mut builder = Builder { input, hp: *hp, nodes: Vec::new() };
    let mut indices: Vec<usize> = (0..input.len()).collect();
    builder.build(&mut indices, 0);
    Ok(TreeModel { nodes: builder.nodes })
}

pub fn tree_predict(model: &TreeModel, points: &[Point]) -> Vec<f64> {
    points
        .iter()
        .map(|x| match model.nodes[model.leaf_of(x)] {
            Node::Leaf { value, .. } => value,
            Node::Split { .. } => unreachable!("routing always ends at a leaf"),
        })
        .collect()
}
