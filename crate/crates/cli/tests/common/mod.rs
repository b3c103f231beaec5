#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sdm_core::synth::{landscape, Landscape, LANDSCAPE_SPECIES};
use tempfile::TempDir;

pub const SPECIES: &str = LANDSCAPE_SPECIES;

pub fn sdm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sdm"))
}

/// Runs `sdm` with `args`, panicking with stderr on a nonzero exit.
pub fn run_ok<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = sdm().args(args).output().expect("spawn sdm");
    assert!(
        out.status.success(),
        "sdm failed ({:?}): {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn exit_code<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    sdm().args(args).output().expect("spawn sdm").status.code().expect("exit code")
}

/// Landscape rasters and sightings written to a temporary directory.
pub struct Fixture {
    pub dir: TempDir,
    pub land: Landscape,
}

impl Fixture {
    pub fn new(n_presences: usize, seed: u64) -> Self {
        let dir = tempfile::tempdir().expect("tempdir");
        let land = landscape(n_presences, seed);
        let root = dir.path();
        fs::write(root.join("elevation.asc"), land.layers.elevation.to_ascii_grid()).unwrap();
        fs::write(root.join("precipitation.asc"), land.layers.precipitation.to_ascii_grid()).unwrap();
        fs::write(root.join("temperature.asc"), land.layers.temperature.to_ascii_grid()).unwrap();
        fs::write(root.join("observations.csv"), land.observations_csv()).unwrap();
        Fixture { dir, land }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn raster_args(&self) -> Vec<String> {
        ["elevation", "precipitation", "temperature"]
            .iter()
            .flat_map(|layer| [format!("--{layer}"), arg(&self.path(&format!("{layer}.asc")))])
            .collect()
    }

    /// Arguments for `ingest` or `export-dataset` minus the output flag.
    pub fn source_args(&self, seed: u64) -> Vec<String> {
        let mut args = vec![
            "--observations".to_string(),
            arg(&self.path("observations.csv")),
            "--species".to_string(),
            SPECIES.to_string(),
            "--seed".to_string(),
            seed.to_string(),
        ];
        args.extend(self.raster_args());
        args
    }

    /// Runs `ingest` into a fresh subdirectory and returns it.
    pub fn ingest(&self, name: &str, seed: u64) -> PathBuf {
        let out = self.path(name);
        fs::create_dir_all(&out).unwrap();
        let mut args = vec!["ingest".to_string()];
        args.extend(self.source_args(seed));
        args.extend(["--out-dir".to_string(), arg(&out)]);
        run_ok(&args);
        out
    }
}

pub fn arg(p: &Path) -> String {
    p.to_str().expect("utf-8 path").to_string()
}

pub fn read(p: &Path) -> String {
    fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

/// Data rows in a CSV file with a header line.
pub fn data_rows(p: &Path) -> usize {
    read(p).lines().count() - 1
}
