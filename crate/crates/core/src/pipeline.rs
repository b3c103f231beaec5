//! End-to-end stages shared by the CLI and the Python bindings.
//!
//! `ingest` runs parse -> pseudo-absences -> assemble -> balance -> split
//! from one base seed; each stochastic stage gets its own derived stream.

use serde::{Deserialize, Serialize};

use crate::data::{
    assemble_dataset, balanced_sample, generate_pseudo_absences, split, Dataset, EnvironmentLayers,
    ObservationRecord, PseudoAbsenceParams, SplitDataset, DEFAULT_MIN_DIST_KM, DEFAULT_PER_CLASS,
    DEFAULT_REGION_MARGIN_DEG,
};
use crate::ensemble::{train_gbt, train_random_forest, ForestParams, GbtParams, Model, ProbabilityModel};
use crate::error::{Result, SdmError};
use crate::geo::{BoundingBox, GeoPoint};
use crate::metrics::{classification_report, MetricsReport};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct IngestConfig {
    pub species: String,
    pub seed: u64,
    pub n_per_class: usize,
    pub min_dist_km: f64,
    /// Defaults to the presence extent grown by half a degree.
    pub region: Option<BoundingBox>,
    /// Pseudo-absences to draw before nodata filtering.
    pub absences: Option<usize>,
}

impl IngestConfig {
    pub fn new(species: impl Into<String>, seed: u64) -> Self {
        IngestConfig {
            species: species.into(),
            seed,
            n_per_class: DEFAULT_PER_CLASS,
            min_dist_km: DEFAULT_MIN_DIST_KM,
            region: None,
            absences: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOutput {
    pub region: BoundingBox,
    pub presences: usize,
    pub dropped: usize,
    pub balanced: Dataset,
    pub split: SplitDataset,
}

/// Default pseudo-absence draw count: 20% above the larger of the presence
/// count and the per-class target.
pub fn default_absence_count(presences: usize, n_per_class: usize) -> usize {
    (presences.max(n_per_class) * 6).div_ceil(5)
}

pub fn ingest(
    observations: &[ObservationRecord],
    layers: &EnvironmentLayers,
    config: &IngestConfig,
) -> Result<IngestOutput> {
    let records: Vec<ObservationRecord> = observations
        .iter()
        .filter(|r| r.species == config.species && r.presence)
        .cloned()
        .collect();
    if records.is_empty() {
        return Err(SdmError::invalid(format!(
            "no observations of species '{}'",
            config.species
        )));
    }
    let points: Vec<GeoPoint> = records.iter().map(|r| r.point).collect();
    let region = match config.region {
        Some(r) => r,
        None => BoundingBox::around(&points, DEFAULT_REGION_MARGIN_DEG)?,
    };
    let count = config
        .absences
        .unwrap_or_else(|| default_absence_count(records.len(), config.n_per_class));
    let params = PseudoAbsenceParams {
        min_dist_km: config.min_dist_km,
        ..PseudoAbsenceParams::new(count, derive_seed(config.seed, 1))
    };
    let absences = generate_pseudo_absences(&points, &region, &params)?;
    let assembled = assemble_dataset(&records, &absences, layers)?;
    let balanced = balanced_sample(&assembled.dataset, config.n_per_class, derive_seed(config.seed, 2))?;
    let split = split(&balanced, derive_seed(config.seed, 3))?;
    Ok(IngestOutput {
        region,
        presences: records.len(),
        dropped: assembled.dropped,
        balanced,
        split,
    })
}

/// Which learner to fit, with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ModelSpec {
    RandomForest(ForestParams),
    GradientBoosting(GbtParams),
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::RandomForest(_) => "rf",
            ModelSpec::GradientBoosting(_) => "gbt",
        }
    }
}

pub fn train(spec: &ModelSpec, data: &Dataset, seed: u64) -> Result<Model> {
    let x = data.features();
    let y = data.labels();
    Ok(match spec {
        ModelSpec::RandomForest(p) => train_random_forest(&x, &y, &data.feature_names, p, seed)?.into(),
        ModelSpec::GradientBoosting(p) => train_gbt(&x, &y, &data.feature_names, p, seed)?.into(),
    })
}

/// Scores `data` after checking its feature names against the model's.
pub fn evaluate<M: ProbabilityModel + ?Sized>(model: &M, data: &Dataset, theta: f64) -> Result<MetricsReport> {
    if model.feature_names() != data.feature_names.as_slice() {
        return Err(SdmError::Schema(format!(
            "model features {:?} do not match dataset columns {:?}",
            model.feature_names(),
            data.feature_names
        )));
    }
    if data.is_empty() {
        return Err(SdmError::invalid("cannot evaluate on an empty dataset"));
    }
    let probs = model.predict_proba(&data.features())?;
    classification_report(&data.labels(), &probs, theta)
}

/// Threshold in `0.05, 0.10, ..., 0.95` with the best accuracy on `data`;
/// the lowest such threshold wins ties.
pub fn tune_theta<M: ProbabilityModel + ?Sized>(model: &M, data: &Dataset) -> Result<(f64, MetricsReport)> {
    let mut best: Option<(f64, MetricsReport)> = None;
    for step in 1..20 {
        let theta = step as f64 / 20.0;
        let report = evaluate(model, data, theta)?;
        if best.as_ref().is_none_or(|(_, b)| report.accuracy > b.accuracy) {
            best = Some((theta, report));
        }
    }
    Ok(best.expect("non-empty sweep"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FEATURE_NAMES;
    use crate::geo::Raster;
    use crate::synth::two_clusters;

    #[test]
    fn absence_count_default() {
        assert_eq!(default_absence_count(300, 250), 360);
        assert_eq!(default_absence_count(10, 250), 300);
        assert_eq!(default_absence_count(1, 1), 2);
    }

    #[test]
    fn ingest_requires_species_rows() {
        let layer = Raster::new(1, 1, -106.0, 39.0, 2.0, -9999.0, vec![1.0]).unwrap();
        let layers = EnvironmentLayers {
            elevation: layer.clone(),
            precipitation: layer.clone(),
            temperature: layer,
        };
        let err = ingest(&[], &layers, &IngestConfig::new("Blue Jay", 1)).unwrap_err();
        assert!(err.to_string().contains("Blue Jay"));
    }

    #[test]
    fn evaluate_checks_feature_names() {
        let data = two_clusters(40, 4.0, 1).unwrap();
        let model = train(&ModelSpec::GradientBoosting(GbtParams { n_trees: 3, ..Default::default() }), &data, 1)
            .unwrap();
        assert!(evaluate(&model, &data, 0.5).is_ok());
        let mut swapped = data.clone();
        swapped.feature_names.swap(0, 1);
        assert!(matches!(evaluate(&model, &swapped, 0.5), Err(SdmError::Schema(_))));
        assert_eq!(model.feature_names(), FEATURE_NAMES.map(String::from).as_slice());
    }

    #[test]
    fn theta_sweep_picks_lowest_best() {
        let data = two_clusters(60, 6.0, 2).unwrap();
        let model = train(&ModelSpec::RandomForest(ForestParams { n_trees: 10, ..Default::default() }), &data, 2)
            .unwrap();
        let (theta, report) = tune_theta(&model, &data).unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert!((0.05..=0.95).contains(&theta));
        assert!(evaluate(&model, &data, theta - 0.05).map_or(true, |r| r.accuracy < 1.0) || theta == 0.05);
    }
}
