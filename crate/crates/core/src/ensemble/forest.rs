use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_arity, check_training_set, Prediction, ProbabilityModel};
use crate::error::{Result, SdmError};
use crate::rng;
use crate::tree::{train_on_rows, MaxFeatures, Task, TreeConfig, TreeNode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: 10,
            min_samples_split: 2,
            max_features: MaxFeatures::Sqrt,
        }
    }
}

impl ForestParams {
    pub fn tree_config(&self) -> TreeConfig {
        TreeConfig {
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
            max_features: self.max_features,
            task: Task::Classification,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub feature_names: Vec<String>,
    pub seed: u64,
    pub hyperparameters: ForestParams,
    pub trees: Vec<TreeNode>,
}

/// `n` row indices drawn uniformly with replacement.
pub fn bootstrap_rows<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

/// Bagged gini trees. Tree `i` draws its bootstrap sample and its per-node
/// feature subsets from stream `(seed, i)`, so results do not depend on
/// the worker count.
pub fn train_random_forest(
    x: &[Vec<f64>],
    y: &[u8],
    feature_names: &[String],
    params: &ForestParams,
    seed: u64,
) -> Result<RandomForest> {
    check_training_set(x, y, feature_names)?;
    if params.n_trees == 0 {
        return Err(SdmError::invalid("a forest needs at least one tree"));
    }
    if y.len() < 2 {
        return Err(SdmError::invalid("a forest needs at least two samples"));
    }
    let positives = y.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == y.len() {
        return Err(SdmError::invalid(format!(
            "training labels are all {}; both classes are required",
            y[0]
        )));
    }
    let config = params.tree_config();
    config.validate(feature_names.len())?;
    let targets: Vec<f64> = y.iter().map(|&l| f64::from(l)).collect();

    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, i as u64);
            let rows = bootstrap_rows(x.len(), &mut rng);
            train_on_rows(x, &targets, &rows, &config, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(RandomForest {
        feature_names: feature_names.to_vec(),
        seed,
        hyperparameters: *params,
        trees,
    })
}

/// Mean tree probability per row, thresholded at `theta`.
pub fn predict_random_forest(model: &RandomForest, x: &[Vec<f64>], theta: f64) -> Result<Prediction> {
    model.predict(x, theta)
}

impl RandomForest {
    /// Per-tree probabilities, `[tree][row]`.
    pub fn tree_probabilities(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        for row in x {
            check_arity(&self.feature_names, row)?;
        }
        self.trees
            .iter()
            .map(|t| x.iter().map(|row| t.predict(row)).collect())
            .collect()
    }
}

impl ProbabilityModel for RandomForest {
    fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    fn predict_row(&self, x: &[f64]) -> Result<f64> {
        check_arity(&self.feature_names, x)?;
        let mut sum = 0.0;
        for tree in &self.trees {
            sum += tree.predict(x)?;
        }
        Ok(sum / self.trees.len() as f64)
    }
}
