//! Tree ensembles and the model file.
//!
//! A model file is one JSON document:
//!
//! ```text
//! {"model_type":"random_forest"|"gradient_boosting",
//!  "feature_names":[...], "seed":N, "hyperparameters":{...},
//!  ["init":f0,]            // boosting only
//!  "trees":[{"kind":"split","feature":0,"threshold":..,"impurity_decrease":..,
//!            "n":..,"left":{..},"right":{..}} | {"kind":"leaf","value":..,"n":..}]}
//! ```
//!
//! Field order is fixed by the struct definitions, so identical models
//! serialize to identical bytes.

mod boosting;
mod forest;
mod importance;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use boosting::{predict_gbt, train_gbt, GbtParams, GradientBoosting};
pub use forest::{bootstrap_rows, predict_random_forest, train_random_forest, ForestParams, RandomForest};
pub use importance::{feature_importance, FeatureImportance};

use crate::error::{Result, SdmError};
use crate::tree::TreeNode;

/// Default decision threshold on predicted probabilities.
pub const DEFAULT_THETA: f64 = 0.5;

/// Thresholded labels alongside the probabilities they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<u8>,
    pub probs: Vec<f64>,
}

impl Prediction {
    fn from_probs(probs: Vec<f64>, theta: f64) -> Self {
        Prediction {
            labels: threshold(&probs, theta),
            probs,
        }
    }
}

/// `1` where `p >= theta`, else `0`.
pub fn threshold(probs: &[f64], theta: f64) -> Vec<u8> {
    probs.iter().map(|&p| u8::from(p >= theta)).collect()
}

/// Anything that maps a feature row to a presence probability.
pub trait ProbabilityModel: Sync {
    fn feature_names(&self) -> &[String];

    /// Probability for one row; the row arity is checked.
    fn predict_row(&self, x: &[f64]) -> Result<f64>;

    fn predict_proba(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        x.iter().map(|row| self.predict_row(row)).collect()
    }

    fn predict(&self, x: &[Vec<f64>], theta: f64) -> Result<Prediction> {
        Ok(Prediction::from_probs(self.predict_proba(x)?, theta))
    }
}

fn check_arity(feature_names: &[String], x: &[f64]) -> Result<()> {
    if x.len() != feature_names.len() {
        return Err(SdmError::Arity {
            expected: feature_names.len(),
            got: x.len(),
        });
    }
    Ok(())
}

pub(crate) fn check_training_set(x: &[Vec<f64>], y: &[u8], feature_names: &[String]) -> Result<()> {
    if x.len() != y.len() {
        return Err(SdmError::invalid(format!(
            "{} feature rows but {} labels",
            x.len(),
            y.len()
        )));
    }
    if feature_names.is_empty() {
        return Err(SdmError::invalid("no feature names"));
    }
    for row in x {
        check_arity(feature_names, row)?;
    }
    if let Some(bad) = y.iter().find(|&&l| l > 1) {
        return Err(SdmError::invalid(format!("label {bad} is not 0 or 1")));
    }
    Ok(())
}

/// Either ensemble, as stored in a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model_type", rename_all = "snake_case")]
pub enum Model {
    RandomForest(RandomForest),
    GradientBoosting(GradientBoosting),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::RandomForest(_) => "rf",
            Model::GradientBoosting(_) => "gbt",
        }
    }

    pub fn trees(&self) -> &[TreeNode] {
        match self {
            Model::RandomForest(m) => &m.trees,
            Model::GradientBoosting(m) => &m.trees,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Model = serde_json::from_str(text)?;
        model.check()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Model::from_json(&std::fs::read_to_string(path)?)
    }

    fn check(&self) -> Result<()> {
        let arity = self.feature_names().len();
        let mut bad = None;
        for tree in self.trees() {
            tree.for_each_split(&mut |feature, _, _| {
                if feature >= arity {
                    bad = Some(feature);
                }
            });
        }
        match bad {
            Some(f) => Err(SdmError::Schema(format!(
                "tree splits on feature {f} but the model has {arity} features"
            ))),
            None => Ok(()),
        }
    }
}

impl From<RandomForest> for Model {
    fn from(m: RandomForest) -> Self {
        Model::RandomForest(m)
    }
}

impl From<GradientBoosting> for Model {
    fn from(m: GradientBoosting) -> Self {
        Model::GradientBoosting(m)
    }
}

impl ProbabilityModel for Model {
    fn feature_names(&self) -> &[String] {
        match self {
            Model::RandomForest(m) => m.feature_names(),
            Model::GradientBoosting(m) => m.feature_names(),
        }
    }

    fn predict_row(&self, x: &[f64]) -> Result<f64> {
        match self {
            Model::RandomForest(m) => m.predict_row(x),
            Model::GradientBoosting(m) => m.predict_row(x),
        }
    }
}
