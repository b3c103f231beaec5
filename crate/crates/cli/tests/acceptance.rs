//! Acceptance checks. Prints one PASS/FAIL/SKIP line per criterion and
//! exits nonzero if any check fails.
//!
//! The optional accuracy-band check runs when `SDM_BAND_DATA` names a
//! directory holding one subdirectory per species, each with the
//! `train.csv` and `test.csv` written by `sdm ingest`.

mod common;

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{arg, run_ok, Fixture};
use rand::Rng;
use sdm_core::data::{
    generate_pseudo_absences, read_dataset_csv, split, split_sizes, Dataset, PseudoAbsenceParams, Sample,
};
use sdm_core::ensemble::{
    train_gbt, train_random_forest, ForestParams, GbtParams, GradientBoosting, ProbabilityModel,
};
use sdm_core::geo::{haversine_km, BoundingBox, GeoPoint};
use sdm_core::metrics::auc_roc;
use sdm_core::pipeline::{self, IngestConfig, ModelSpec};
use sdm_core::rng::rng_from_seed;
use sdm_core::synth::{landscape, two_clusters, LANDSCAPE_SPECIES};
use sdm_core::tree::{train_decision_tree, TreeConfig};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = fn() -> Outcome;

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn brute_force_auc(y: &[u8], s: &[f64]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        for (j, &yj) in y.iter().enumerate() {
            if yi == 1 && yj == 0 {
                pairs += 1.0;
                if s[i] > s[j] {
                    wins += 1.0;
                } else if s[i] == s[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

fn auc_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_from_seed(0xA0C);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.gen_range(2..=50);
        let mut y: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1)).collect();
        y[0] = 0;
        y[1] = 1;
        // coarse levels force plenty of ties
        let levels = rng.gen_range(2..=12);
        let s: Vec<f64> = (0..n).map(|_| rng.gen_range(0..levels) as f64 / levels as f64).collect();
        let fast = match auc_roc(&y, &s) {
            Ok(a) => a,
            Err(e) => return Outcome::Fail(e.to_string()),
        };
        worst = worst.max((fast - brute_force_auc(&y, &s)).abs());
    }
    let elapsed = start.elapsed();
    verdict(
        worst <= 1e-12 && elapsed < Duration::from_secs(5),
        format!("max |fast - pairwise| = {worst:.1e} over 1000 vectors in {elapsed:.2?}"),
    )
}

fn forest_averaging() -> Outcome {
    let data = two_clusters(400, 1.5, 31).unwrap();
    // samples come grouped by class, so alternate rows into train and test
    let train: Vec<&Sample> = data.samples.iter().step_by(2).collect();
    let test: Vec<&Sample> = data.samples.iter().skip(1).step_by(2).collect();
    let x: Vec<Vec<f64>> = train.iter().map(|s| s.features.clone()).collect();
    let y: Vec<u8> = train.iter().map(|s| s.label).collect();
    let params = ForestParams { n_trees: 100, ..Default::default() };
    let forest = train_random_forest(&x, &y, &data.feature_names, &params, 31).unwrap();
    let rows: Vec<Vec<f64>> = test.iter().map(|s| s.features.clone()).collect();
    let probs = forest.predict_proba(&rows).unwrap();
    let mut worst: f64 = 0.0;
    for (row, p) in rows.iter().zip(&probs) {
        let mean = forest.trees.iter().map(|t| t.predict(row).unwrap()).sum::<f64>() / forest.trees.len() as f64;
        worst = worst.max((mean - p).abs());
    }
    verdict(
        worst <= 1e-12 && rows.len() == 200 && forest.trees.len() == 100,
        format!("max deviation {worst:.1e} on 200 rows, 100 trees"),
    )
}

fn squared_errors(model: &GradientBoosting, data: &Dataset) -> Vec<f64> {
    let y = data.labels();
    model
        .staged_raw_scores(&data.features())
        .unwrap()
        .iter()
        .map(|f| f.iter().zip(&y).map(|(f, &y)| (y as f64 - f).powi(2)).sum())
        .collect()
}

fn boosting_monotone() -> Outcome {
    let land = landscape(300, 3);
    let ingested = pipeline::ingest(&land.observations, &land.layers, &IngestConfig::new(LANDSCAPE_SPECIES, 3)).unwrap();
    let fixtures = [
        ("overlapping clusters", two_clusters(300, 0.5, 1).unwrap()),
        ("separated clusters", two_clusters(500, 4.0, 2).unwrap()),
        ("landscape", ingested.split.train),
    ];
    let mut checked = 0;
    for (name, data) in &fixtures {
        for eta in [0.05, 0.1, 0.5, 1.0, 1.9] {
            let params = GbtParams { n_trees: 100, learning_rate: eta, ..Default::default() };
            let model = train_gbt(&data.features(), &data.labels(), &data.feature_names, &params, 5).unwrap();
            let loss = squared_errors(&model, data);
            if let Some(t) = loss.windows(2).position(|w| w[1] > w[0]) {
                return Outcome::Fail(format!(
                    "{name}, eta {eta}: loss rises at t={} ({} -> {})",
                    t + 1,
                    loss[t],
                    loss[t + 1]
                ));
            }
            checked += 1;
        }
    }
    Outcome::Pass(format!("{checked} fixture/eta pairs, 101 stages each"))
}

fn synthetic_benchmark() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in 1..=5 {
        let start = Instant::now();
        let data = two_clusters(500, 4.0, seed).unwrap();
        let parts = split(&data, seed).unwrap();
        let specs = [
            ModelSpec::RandomForest(ForestParams { n_trees: 100, max_depth: 10, ..Default::default() }),
            ModelSpec::GradientBoosting(GbtParams { n_trees: 100, learning_rate: 0.1, max_depth: 3, ..Default::default() }),
        ];
        let mut scores = Vec::new();
        for spec in specs {
            let model = pipeline::train(&spec, &parts.train, seed).unwrap();
            let r = pipeline::evaluate(&model, &parts.test, 0.5).unwrap();
            ok &= r.accuracy >= 0.95 && r.auc >= 0.98;
            scores.push(format!("{} acc {:.3} auc {:.4}", spec.name(), r.accuracy, r.auc));
        }
        let elapsed = start.elapsed();
        ok &= elapsed < Duration::from_secs(10);
        lines.push(format!("seed {seed}: {} ({elapsed:.2?})", scores.join(", ")));
    }
    verdict(ok, lines.join("; "))
}

fn band_check() -> Outcome {
    let Some(root) = std::env::var_os("SDM_BAND_DATA") else {
        return Outcome::Skip("SDM_BAND_DATA not set".into());
    };
    let mut dirs: Vec<_> = match fs::read_dir(&root) {
        Ok(d) => d.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_dir()).collect(),
        Err(e) => return Outcome::Fail(format!("{}: {e}", Path::new(&root).display())),
    };
    dirs.sort();
    if dirs.is_empty() {
        return Outcome::Fail("no species directories".into());
    }
    let mut ok = true;
    let mut lines = Vec::new();
    for dir in dirs {
        let load = |name: &str| read_dataset_csv(fs::File::open(dir.join(name)).unwrap(), "band").unwrap();
        let model = pipeline::train(&ModelSpec::RandomForest(ForestParams::default()), &load("train.csv"), 0).unwrap();
        let r = pipeline::evaluate(&model, &load("test.csv"), 0.5).unwrap();
        ok &= (0.75..=0.95).contains(&r.accuracy);
        lines.push(format!("{} rf acc {:.3}", dir.file_name().unwrap().to_string_lossy(), r.accuracy));
    }
    verdict(ok, lines.join("; "))
}

fn absence_safety() -> Outcome {
    let mut violations = 0;
    let mut absences = 0;
    for fixture in 0..10u64 {
        let mut rng = rng_from_seed(0xAB5 + fixture);
        // dense clusters so many candidates land inside the exclusion radius
        let center = GeoPoint { lat: rng.gen_range(-60.0..60.0), lon: rng.gen_range(-170.0..170.0) };
        let spread = rng.gen_range(0.02..0.3);
        let presences: Vec<GeoPoint> = (0..rng.gen_range(20..300))
            .map(|_| GeoPoint {
                lat: center.lat + rng.gen_range(-spread..spread),
                lon: center.lon + rng.gen_range(-spread..spread),
            })
            .collect();
        let region = BoundingBox::around(&presences, 0.1).unwrap();
        let params = PseudoAbsenceParams::new(400, fixture);
        let generated = match generate_pseudo_absences(&presences, &region, &params) {
            Ok(g) => g,
            Err(e) => return Outcome::Fail(format!("fixture {fixture}: {e}")),
        };
        absences += generated.len();
        violations += generated
            .iter()
            .filter(|&&a| presences.iter().any(|&p| haversine_km(a, p) <= 1.1))
            .count();
    }
    verdict(violations == 0, format!("{violations} violations among {absences} absences in 10 fixtures"))
}

fn split_arithmetic() -> Outcome {
    let mut details = Vec::new();
    for n in [10usize, 99, 500, 1234] {
        let samples: Vec<Sample> = (0..n)
            .map(|i| Sample { features: vec![i as f64], label: (i % 2) as u8 })
            .collect();
        let data = Dataset::new("split", vec!["id".into()], samples).unwrap();
        let parts = split(&data, n as u64).unwrap();
        for class in 0..2u8 {
            let k = data.samples.iter().filter(|s| s.label == class).count();
            let (tr, va) = split_sizes(k);
            let count = |d: &Dataset| d.samples.iter().filter(|s| s.label == class).count();
            let got = (count(&parts.train), count(&parts.val), count(&parts.test));
            if got != (k * 7 / 10, k / 10, k - k * 7 / 10 - k / 10) || (tr, va) != (got.0, got.1) {
                return Outcome::Fail(format!("n={n} class {class}: sizes {got:?} for {k} samples"));
            }
        }
        let mut ids: Vec<usize> = [&parts.train, &parts.val, &parts.test]
            .iter()
            .flat_map(|d| d.samples.iter().map(|s| s.features[0] as usize))
            .collect();
        ids.sort_unstable();
        if ids != (0..n).collect::<Vec<_>>() {
            return Outcome::Fail(format!("n={n}: parts are not a partition"));
        }
        details.push(format!("n={n} -> {}/{}/{}", parts.train.len(), parts.val.len(), parts.test.len()));
    }
    Outcome::Pass(details.join(", "))
}

/// Runs the CLI chain into `out` and returns every artifact's bytes.
fn cli_chain(fx: &Fixture, out: &Path, threads: usize) -> Vec<(String, Vec<u8>)> {
    fs::create_dir_all(out).unwrap();
    let t = threads.to_string();
    let mut ingest = vec!["--threads".to_string(), t.clone(), "ingest".into()];
    ingest.extend(fx.source_args(17));
    ingest.extend(["--out-dir".into(), arg(out)]);
    run_ok(&ingest);
    for model in ["rf", "gbt"] {
        let path = arg(&out.join(format!("{model}.json")));
        run_ok([
            "--threads",
            &t,
            "train",
            "--train",
            &arg(&out.join("train.csv")),
            "--model",
            model,
            "--seed",
            "17",
            "--out",
            &path,
        ]);
        run_ok([
            "--threads",
            &t,
            "evaluate",
            "--model",
            &path,
            "--data",
            &arg(&out.join("test.csv")),
            "--out",
            &arg(&out.join(format!("{model}-metrics.json"))),
        ]);
        let mut map = vec!["--threads".to_string(), t.clone(), "map".into(), "--model".into(), path];
        map.extend(fx.raster_args());
        map.extend([
            "--bbox".into(),
            "38,42,-107,-101".into(),
            "--csv".into(),
            arg(&out.join(format!("{model}-map.csv"))),
            "--pgm".into(),
            arg(&out.join(format!("{model}-map.pgm"))),
        ]);
        run_ok(&map);
    }
    let mut files: Vec<_> = fs::read_dir(out)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let fx = Fixture::new(300, 17);
    let a = cli_chain(&fx, &fx.path("run-a"), 4);
    let b = cli_chain(&fx, &fx.path("run-b"), 4);
    let c = cli_chain(&fx, &fx.path("run-c"), 1);
    let differing: Vec<&str> = a
        .iter()
        .zip(&b)
        .zip(&c)
        .filter(|((x, y), z)| x != y || x != z)
        .map(|((x, _), _)| x.0.as_str())
        .collect();
    verdict(
        a.len() == 11 && a.len() == b.len() && a.len() == c.len() && differing.is_empty(),
        format!("{} artifacts compared across 2 runs x 4 threads and 1 thread; differing: {differing:?}", a.len()),
    )
}

fn degenerate_handling() -> Outcome {
    let names = vec!["a".to_string()];
    let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
    let rf_rejects = train_random_forest(&x, &[1; 6], &names, &ForestParams::default(), 1).is_err();

    let y = [0, 1, 1, 0, 1, 1];
    let params = GbtParams { n_trees: 0, ..Default::default() };
    let gbt = train_gbt(&x, &y, &names, &params, 1).unwrap();
    let mean = 4.0 / 6.0;
    let gbt_mean = gbt.predict_proba(&x).unwrap().iter().all(|&p| (p - mean).abs() < 1e-12);

    let pure = train_decision_tree(&x, &[1.0; 6], &TreeConfig::classification(5), &mut rng_from_seed(1)).unwrap();
    let pure_leaf = pure.is_leaf() && pure.predict(&[2.0]).unwrap() == 1.0;
    verdict(
        rf_rejects && gbt_mean && pure_leaf,
        format!("single-class rf rejected: {rf_rejects}, T=0 gbt = mean: {gbt_mean}, pure node leaf: {pure_leaf}"),
    )
}

fn main() -> ExitCode {
    let checks: [(&str, Check); 9] = [
        ("auc matches pairwise oracle", auc_oracle),
        ("forest averages tree outputs", forest_averaging),
        ("boosting loss non-increasing", boosting_monotone),
        ("synthetic separable benchmark", synthetic_benchmark),
        ("real-data accuracy band", band_check),
        ("pseudo-absence exclusion radius", absence_safety),
        ("stratified split arithmetic", split_arithmetic),
        ("deterministic cli chain", determinism),
        ("degenerate inputs", degenerate_handling),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::Fail(format!("panicked: {msg}"))
        });
        match outcome {
            Outcome::Pass(d) => println!("PASS  {name}: {d}"),
            Outcome::Skip(d) => println!("SKIP  {name}: {d}"),
            Outcome::Fail(d) => {
                failed += 1;
                println!("FAIL  {name}: {d}");
            }
        }
    }
    println!("{} checks, {failed} failed", checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
