//! L2 gradient boosting on 0/1 labels.
//!
//! `F_0` is the label mean; stage `t` fits a variance regression tree to the
//! residuals `y - F_{t-1}` and adds `eta * h_t`. The raw score is clamped to
//! `[0, 1]` when read as a probability. Because each leaf holds the mean
//! residual of its rows, the training squared error cannot increase for
//! `0 < eta < 2`.

use serde::{Deserialize, Serialize};

use super::{check_arity, check_training_set, Prediction, ProbabilityModel};
use crate::error::{Result, SdmError};
use crate::rng;
use crate::tree::{train_decision_tree, MaxFeatures, Task, TreeConfig, TreeNode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            n_trees: 100,
            learning_rate: 0.1,
            max_depth: 3,
            min_samples_split: 2,
            max_features: MaxFeatures::All,
        }
    }
}

impl GbtParams {
    pub fn tree_config(&self) -> TreeConfig {
        TreeConfig {
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
            max_features: self.max_features,
            task: Task::Regression,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosting {
    pub feature_names: Vec<String>,
    pub seed: u64,
    pub hyperparameters: GbtParams,
    /// `F_0`, the training label mean.
    pub init: f64,
    pub trees: Vec<TreeNode>,
}

pub fn train_gbt(
    x: &[Vec<f64>],
    y: &[u8],
    feature_names: &[String],
    params: &GbtParams,
    seed: u64,
) -> Result<GradientBoosting> {
    check_training_set(x, y, feature_names)?;
    if y.len() < 2 {
        return Err(SdmError::invalid("boosting needs at least two samples"));
    }
    let eta = params.learning_rate;
    if !(eta > 0.0 && eta < 2.0) {
        return Err(SdmError::invalid(format!("learning rate {eta} outside (0, 2)")));
    }
    let config = params.tree_config();
    config.validate(feature_names.len())?;

    let targets: Vec<f64> = y.iter().map(|&l| f64::from(l)).collect();
    let init = targets.iter().sum::<f64>() / targets.len() as f64;
    let mut scores = vec![init; targets.len()];
    let mut rng = rng::rng_from_seed(seed);
    let mut trees = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        let residuals: Vec<f64> = targets.iter().zip(&scores).map(|(t, f)| t - f).collect();
        let tree = train_decision_tree(x, &residuals, &config, &mut rng)?;
        for (score, row) in scores.iter_mut().zip(x) {
            *score += eta * tree.predict(row)?;
        }
        trees.push(tree);
    }
    Ok(GradientBoosting {
        feature_names: feature_names.to_vec(),
        seed,
        hyperparameters: *params,
        init,
        trees,
    })
}

/// Clamped boosting scores thresholded at `theta`.
pub fn predict_gbt(model: &GradientBoosting, x: &[Vec<f64>], theta: f64) -> Result<Prediction> {
    model.predict(x, theta)
}

impl GradientBoosting {
    /// Unclamped `F_T(x)`.
    pub fn raw_score(&self, x: &[f64]) -> Result<f64> {
        check_arity(&self.feature_names, x)?;
        let eta = self.hyperparameters.learning_rate;
        let mut score = self.init;
        for tree in &self.trees {
            score += eta * tree.predict(x)?;
        }
        Ok(score)
    }

    /// `F_t` over all rows for `t = 0..=T`.
    pub fn staged_raw_scores(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        for row in x {
            check_arity(&self.feature_names, row)?;
        }
        let eta = self.hyperparameters.learning_rate;
        let mut current = vec![self.init; x.len()];
        let mut stages = vec![current.clone()];
        for tree in &self.trees {
            for (score, row) in current.iter_mut().zip(x) {
                *score += eta * tree.predict(row)?;
            }
            stages.push(current.clone());
        }
        Ok(stages)
    }
}

impl ProbabilityModel for GradientBoosting {
    fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    fn predict_row(&self, x: &[f64]) -> Result<f64> {
        Ok(self.raw_score(x)?.clamp(0.0, 1.0))
    }
}
