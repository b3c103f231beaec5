use sdm_core::data::{read_dataset_csv, write_dataset_csv, DEFAULT_MIN_DIST_KM, FEATURE_NAMES};
use sdm_core::ensemble::{feature_importance, ForestParams, GbtParams, Model, ProbabilityModel};
use sdm_core::geo::{haversine_km, BoundingBox, GeoPoint};
use sdm_core::map::predict_grid;
use sdm_core::pipeline::{evaluate, ingest, train, IngestConfig, ModelSpec};
use sdm_core::synth::{landscape, Landscape, LANDSCAPE_SPECIES};

fn fixture() -> Landscape {
    landscape(300, 11)
}

fn small_forest() -> ModelSpec {
    ModelSpec::RandomForest(ForestParams { n_trees: 25, ..Default::default() })
}

#[test]
fn ingest_produces_balanced_split() {
    let land = fixture();
    let out = ingest(&land.observations, &land.layers, &IngestConfig::new(LANDSCAPE_SPECIES, 5)).unwrap();
    assert_eq!(out.presences, 300);
    assert_eq!(out.balanced.class_counts(), [250, 250]);
    assert_eq!(out.split.train.class_counts(), [175, 175]);
    assert_eq!(out.split.val.class_counts(), [25, 25]);
    assert_eq!(out.split.test.class_counts(), [50, 50]);

    let presences: Vec<GeoPoint> = land.observations.iter().map(|o| o.point).collect();
    for sample in &out.balanced.samples {
        let point = GeoPoint { lat: sample.features[0], lon: sample.features[1] };
        assert_eq!(land.layers.features_at(point).as_deref(), Some(sample.features.as_slice()));
        if sample.label == 0 {
            let nearest = presences.iter().map(|&p| haversine_km(point, p)).fold(f64::INFINITY, f64::min);
            assert!(nearest > DEFAULT_MIN_DIST_KM, "absence {point:?} is {nearest} km from a presence");
        }
    }
}

#[test]
fn ingest_is_seed_deterministic() {
    let land = fixture();
    let run = |seed| ingest(&land.observations, &land.layers, &IngestConfig::new(LANDSCAPE_SPECIES, seed)).unwrap();
    assert_eq!(run(9).split, run(9).split);
    assert_ne!(run(9).split, run(10).split);
}

#[test]
fn other_species_are_ignored() {
    let mut land = fixture();
    let mut extra = land.observations[0].clone();
    extra.species = "Other Finch".into();
    land.observations.push(extra);
    let out = ingest(&land.observations, &land.layers, &IngestConfig::new(LANDSCAPE_SPECIES, 5)).unwrap();
    assert_eq!(out.presences, 300);
}

#[test]
fn dataset_csv_round_trip_keeps_predictions() {
    let land = fixture();
    let out = ingest(&land.observations, &land.layers, &IngestConfig::new(LANDSCAPE_SPECIES, 2)).unwrap();
    let mut buf = Vec::new();
    write_dataset_csv(&out.split.test, &mut buf).unwrap();
    let back = read_dataset_csv(buf.as_slice(), LANDSCAPE_SPECIES).unwrap();
    assert_eq!(back.samples, out.split.test.samples);
}

#[test]
fn models_learn_the_landscape_and_survive_serialization() {
    let land = fixture();
    let out = ingest(&land.observations, &land.layers, &IngestConfig::new(LANDSCAPE_SPECIES, 3)).unwrap();
    let specs = [small_forest(), ModelSpec::GradientBoosting(GbtParams { n_trees: 50, ..Default::default() })];
    for spec in specs {
        let model = train(&spec, &out.split.train, 3).unwrap();
        let report = evaluate(&model, &out.split.test, 0.5).unwrap();
        assert!(report.auc > 0.75, "{} auc {}", spec.name(), report.auc);

        let reloaded = Model::from_json(&model.to_json().unwrap()).unwrap();
        let x = out.split.test.features();
        let a = model.predict_proba(&x).unwrap();
        let b = reloaded.predict_proba(&x).unwrap();
        assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));

        let imp = feature_importance(&model);
        let total: f64 = imp.weights.iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert_eq!(imp.weights.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>(), FEATURE_NAMES);
    }
}

#[test]
fn map_cells_match_point_predictions() {
    let land = fixture();
    let out = ingest(&land.observations, &land.layers, &IngestConfig::new(LANDSCAPE_SPECIES, 4)).unwrap();
    let model = train(&small_forest(), &out.split.train, 4).unwrap();
    // covers the nodata corner and spills past the raster's northern edge
    let bbox = BoundingBox::new(41.5, 42.5, -107.0, -106.0).unwrap();
    let grid = predict_grid(&model, &land.layers, &bbox, 0.1).unwrap();
    assert_eq!((grid.n_rows, grid.n_cols), (10, 10));
    let mut scored = 0;
    for cell in &grid.cells {
        match land.layers.features_at(cell.point) {
            Some(f) => {
                assert_eq!(cell.probability, Some(model.predict_row(&f).unwrap()));
                scored += 1;
            }
            None => assert_eq!(cell.probability, None),
        }
    }
    assert_eq!(scored, grid.scored());
    // northern half is off the raster, and 3x5 cells fall in the nodata block
    assert_eq!(scored, 50 - 15);
}

#[test]
fn longitude_carries_the_signal() {
    // sightings cluster in longitude only, so forests should split on it most
    let land = fixture();
    let out = ingest(&land.observations, &land.layers, &IngestConfig::new(LANDSCAPE_SPECIES, 6)).unwrap();
    let model = train(&ModelSpec::RandomForest(ForestParams::default()), &out.split.train, 6).unwrap();
    let imp = feature_importance(&model);
    assert_eq!(imp.top(), Some("longitude"), "{imp:?}");
}
