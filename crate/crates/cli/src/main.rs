//! `sdm`: species distribution modelling from the command line.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data error.

use std::fmt::Display;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sdm_core::data::{read_dataset_csv, read_observations, write_dataset_csv, Dataset, EnvironmentLayers};
use sdm_core::ensemble::{feature_importance, ForestParams, GbtParams, Model, DEFAULT_THETA};
use sdm_core::geo::{read_ascii_grid, BoundingBox};
use sdm_core::map::{predict_grid, write_grid_csv, write_heatmap_pgm, DEFAULT_STEP_DEG};
use sdm_core::metrics::{MetricsRecord, MetricsReport};
use sdm_core::pipeline::{self, IngestConfig, ModelSpec};
use sdm_core::tree::MaxFeatures;
use sdm_core::{synth, SdmError};

#[derive(Parser)]
#[command(name = "sdm", version, about = "Presence/pseudo-absence species distribution models")]
struct Cli {
    /// Worker threads for forest training and map scoring (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build train/val/test CSVs from sightings and rasters.
    Ingest(IngestArgs),
    /// Build the balanced dataset as a single CSV, without splitting.
    ExportDataset(ExportArgs),
    /// Fit a random forest or gradient boosted model.
    Train(TrainArgs),
    /// Score a model on a dataset CSV.
    Evaluate(EvaluateArgs),
    /// Write normalized feature importance as JSON and an SVG bar chart.
    Importance(ImportanceArgs),
    /// Score a lat/lon grid into CSV and PGM maps.
    Map(MapArgs),
    /// Generate a Gaussian two-cluster dataset split 70:10:20.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RasterArgs {
    #[arg(long)]
    elevation: PathBuf,
    #[arg(long)]
    precipitation: PathBuf,
    #[arg(long)]
    temperature: PathBuf,
}

#[derive(Args)]
struct SourceArgs {
    /// Observation CSV with species,latitude,longitude,date columns.
    #[arg(long)]
    observations: PathBuf,
    #[arg(long)]
    species: String,
    #[command(flatten)]
    rasters: RasterArgs,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 250)]
    n_per_class: usize,
    #[arg(long, default_value_t = 1.1)]
    min_dist_km: f64,
    /// Pseudo-absence region as min_lat,max_lat,min_lon,max_lon.
    #[arg(long)]
    region: Option<String>,
    /// Pseudo-absences drawn before nodata filtering.
    #[arg(long)]
    absences: Option<usize>,
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Rf,
    Gbt,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    val: Option<PathBuf>,
    #[arg(long, value_enum)]
    model: ModelKind,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Number of trees [rf: 100, gbt: 100].
    #[arg(long)]
    trees: Option<usize>,
    /// Maximum tree depth [rf: 10, gbt: 3].
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long, default_value_t = 2)]
    min_samples_split: usize,
    /// all | sqrt | <count> [rf: sqrt, gbt: all].
    #[arg(long)]
    max_features: Option<String>,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    #[arg(long, default_value_t = DEFAULT_THETA)]
    theta: f64,
    /// Pick the validation-accuracy-maximizing threshold in 0.05..0.95.
    #[arg(long)]
    tune_theta: bool,
    #[arg(long, default_value = "unknown")]
    species: String,
    /// Also write the validation report JSON here.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Dataset CSV in the export schema.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THETA)]
    theta: f64,
    #[arg(long, default_value = "unknown")]
    species: String,
    /// Split name recorded in the report.
    #[arg(long, default_value = "test")]
    split: String,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ImportanceArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct MapArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    rasters: RasterArgs,
    /// min_lat,max_lat,min_lon,max_lon
    #[arg(long)]
    bbox: String,
    #[arg(long, default_value_t = DEFAULT_STEP_DEG)]
    step: f64,
    #[arg(long)]
    csv: PathBuf,
    #[arg(long)]
    pgm: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 500)]
    n: usize,
    /// Class mean shift in standard deviations per feature.
    #[arg(long, default_value_t = 4.0)]
    separation: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

struct Failure {
    code: u8,
    message: String,
}

type CmdResult<T = ()> = Result<T, Failure>;

fn usage(message: impl Display) -> Failure {
    Failure {
        code: 2,
        message: message.to_string(),
    }
}

fn data_error(message: impl Display) -> Failure {
    Failure {
        code: 3,
        message: message.to_string(),
    }
}

impl From<SdmError> for Failure {
    fn from(e: SdmError) -> Self {
        match &e {
            SdmError::Schema(_) | SdmError::InvalidInput(_) | SdmError::Arity { .. } => usage(e),
            SdmError::Io(io) if io.kind() == std::io::ErrorKind::NotFound => usage(e),
            _ => data_error(e),
        }
    }
}

fn context<T>(r: sdm_core::Result<T>, what: impl Display) -> CmdResult<T> {
    r.map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{what}: {}", f.message);
        f
    })
}

fn require(path: &Path) -> CmdResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{}: no such file", path.display())))
    }
}

fn create(path: &Path) -> CmdResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| data_error(format!("{}: {e}", dir.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| data_error(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| data_error(format!("{}: {e}", path.display())))
}

fn write_dataset(path: &Path, data: &Dataset) -> CmdResult {
    context(write_dataset_csv(data, create(path)?), path.display())
}

fn read_dataset(path: &Path, species: &str) -> CmdResult<Dataset> {
    require(path)?;
    let file = File::open(path).map_err(|e| data_error(format!("{}: {e}", path.display())))?;
    context(read_dataset_csv(file, species), path.display())
}

fn load_layers(args: &RasterArgs) -> CmdResult<EnvironmentLayers> {
    let load = |p: &PathBuf| -> CmdResult<_> {
        require(p)?;
        context(read_ascii_grid(p), p.display())
    };
    Ok(EnvironmentLayers {
        elevation: load(&args.elevation)?,
        precipitation: load(&args.precipitation)?,
        temperature: load(&args.temperature)?,
    })
}

fn load_model(path: &Path) -> CmdResult<Model> {
    require(path)?;
    context(Model::load(path), path.display())
}

fn run_source(src: &SourceArgs) -> CmdResult<pipeline::IngestOutput> {
    require(&src.observations)?;
    let layers = load_layers(&src.rasters)?;
    let file = File::open(&src.observations).map_err(|e| data_error(format!("{}: {e}", src.observations.display())))?;
    let observations = context(read_observations(file), src.observations.display())?;
    let region = src
        .region
        .as_deref()
        .map(BoundingBox::parse)
        .transpose()
        .map_err(usage)?;
    let config = IngestConfig {
        n_per_class: src.n_per_class,
        min_dist_km: src.min_dist_km,
        region,
        absences: src.absences,
        ..IngestConfig::new(&src.species, src.seed)
    };
    let out = pipeline::ingest(&observations, &layers, &config)?;
    eprintln!(
        "{}: {} presences, {} points dropped on nodata, region {:?}",
        src.species, out.presences, out.dropped, out.region
    );
    Ok(out)
}

fn cmd_ingest(args: &IngestArgs) -> CmdResult {
    let out = run_source(&args.source)?;
    for (name, part) in [("train", &out.split.train), ("val", &out.split.val), ("test", &out.split.test)] {
        let path = args.out_dir.join(format!("{name}.csv"));
        write_dataset(&path, part)?;
        println!("{}\t{} rows", path.display(), part.len());
    }
    Ok(())
}

fn cmd_export(args: &ExportArgs) -> CmdResult {
    let out = run_source(&args.source)?;
    write_dataset(&args.out, &out.balanced)?;
    println!("{}\t{} rows", args.out.display(), out.balanced.len());
    Ok(())
}

fn model_spec(args: &TrainArgs) -> CmdResult<ModelSpec> {
    let max_features = args
        .max_features
        .as_deref()
        .map(str::parse::<MaxFeatures>)
        .transpose()
        .map_err(usage)?;
    Ok(match args.model {
        ModelKind::Rf => {
            let d = ForestParams::default();
            ModelSpec::RandomForest(ForestParams {
                n_trees: args.trees.unwrap_or(d.n_trees),
                max_depth: args.max_depth.unwrap_or(d.max_depth),
                min_samples_split: args.min_samples_split,
                max_features: max_features.unwrap_or(d.max_features),
            })
        }
        ModelKind::Gbt => {
            let d = GbtParams::default();
            ModelSpec::GradientBoosting(GbtParams {
                n_trees: args.trees.unwrap_or(d.n_trees),
                learning_rate: args.learning_rate,
                max_depth: args.max_depth.unwrap_or(d.max_depth),
                min_samples_split: args.min_samples_split,
                max_features: max_features.unwrap_or(d.max_features),
            })
        }
    })
}

fn warn_degenerate(report: &MetricsReport) {
    if !report.degenerate.is_empty() {
        eprintln!("warning: degenerate metrics reported as defaults: {:?}", report.degenerate);
    }
}

fn print_report(record: &MetricsRecord, json: bool) -> CmdResult {
    if json {
        println!("{}", serde_json::to_string(record).map_err(data_error)?);
    } else {
        let c = &record.confusion;
        println!(
            "{} {} {}: accuracy {:.3}  precision {:.3}  recall {:.3}  f1 {:.3}  auc {:.3}  [tp {} fp {} fn {} tn {}]",
            record.species,
            record.model,
            record.split,
            record.accuracy,
            record.precision,
            record.recall,
            record.f1,
            record.auc,
            c.tp,
            c.fp,
            c.fn_,
            c.tn
        );
    }
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> CmdResult {
    let spec = model_spec(args)?;
    let train = read_dataset(&args.train, &args.species)?;
    let val = args.val.as_deref().map(|p| read_dataset(p, &args.species)).transpose()?;
    if let Some(val) = &val {
        if val.feature_names != train.feature_names {
            return Err(usage(format!(
                "validation columns {:?} differ from training columns {:?}",
                val.feature_names, train.feature_names
            )));
        }
    }
    let model = context(pipeline::train(&spec, &train, args.seed), "training")?;
    write_text(&args.out, &model.to_json()?)?;
    eprintln!("wrote {} ({} trees)", args.out.display(), model.trees().len());

    if let Some(val) = &val {
        let report = if args.tune_theta {
            let (theta, report) = pipeline::tune_theta(&model, val)?;
            eprintln!("tuned theta {theta:.2}");
            report
        } else {
            pipeline::evaluate(&model, val, args.theta)?
        };
        warn_degenerate(&report);
        let record = MetricsRecord::new(&args.species, spec.name(), "val", &report);
        if let Some(path) = &args.report {
            write_text(path, &serde_json::to_string(&record).map_err(data_error)?)?;
        }
        print_report(&record, args.json)?;
    }
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> CmdResult {
    let model = load_model(&args.model)?;
    let data = read_dataset(&args.data, &args.species)?;
    let report = pipeline::evaluate(&model, &data, args.theta)?;
    warn_degenerate(&report);
    let record = MetricsRecord::new(&args.species, model.kind(), &args.split, &report);
    if let Some(path) = &args.out {
        write_text(path, &serde_json::to_string(&record).map_err(data_error)?)?;
    }
    print_report(&record, args.json)
}

fn cmd_importance(args: &ImportanceArgs) -> CmdResult {
    let model = load_model(&args.model)?;
    let imp = feature_importance(&model);
    if imp.is_degenerate() {
        eprintln!("warning: model has no splits; all importances are zero");
    }
    let json = serde_json::to_string(&imp).map_err(data_error)?;
    write_text(&args.out, &json)?;
    if let Some(svg) = &args.svg {
        write_text(svg, &imp.to_svg())?;
    }
    println!("{json}");
    Ok(())
}

fn cmd_map(args: &MapArgs) -> CmdResult {
    let model = load_model(&args.model)?;
    let layers = load_layers(&args.rasters)?;
    let bbox = BoundingBox::parse(&args.bbox).map_err(usage)?;
    let grid = predict_grid(&model, &layers, &bbox, args.step)?;
    let rows = context(write_grid_csv(&grid, create(&args.csv)?), args.csv.display())?;
    if let Some(pgm) = &args.pgm {
        context(write_heatmap_pgm(&grid, create(pgm)?), pgm.display())?;
    }
    println!(
        "{} x {} cells, {} scored -> {}",
        grid.n_rows,
        grid.n_cols,
        rows,
        args.csv.display()
    );
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> CmdResult {
    let data = synth::two_clusters(args.n, args.separation, args.seed)?;
    let parts = sdm_core::data::split(&data, args.seed)?;
    for (name, part) in [("train", &parts.train), ("val", &parts.val), ("test", &parts.test)] {
        let path = args.out_dir.join(format!("{name}.csv"));
        write_dataset(&path, part)?;
        println!("{}\t{} rows", path.display(), part.len());
    }
    Ok(())
}

fn run(cli: &Cli) -> CmdResult {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(usage)?;
    }
    match &cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::ExportDataset(a) => cmd_export(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Importance(a) => cmd_importance(a),
        Command::Map(a) => cmd_map(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
