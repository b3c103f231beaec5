//! Dataset assembly: sightings + rasters -> labelled feature rows.
//!
//! Every sample carries five features in a fixed order, see
//! [`FEATURE_NAMES`]. Presences come from observation CSVs; negatives are
//! pseudo-absences drawn uniformly inside a region and rejected when they
//! fall within `min_dist_km` of any sighting of the same species.

use std::io::{Read, Write};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SdmError};
use crate::geo::{haversine_km, BoundingBox, GeoPoint, Raster};
use crate::rng;

pub const FEATURE_NAMES: [&str; 5] = ["latitude", "longitude", "elevation", "precipitation", "temperature"];

pub const LABEL_COLUMN: &str = "label";

/// Exclusion radius around each sighting.
pub const DEFAULT_MIN_DIST_KM: f64 = 1.1;

/// Margin added around the presence bounding box when no region is given.
pub const DEFAULT_REGION_MARGIN_DEG: f64 = 0.5;

pub const DEFAULT_PER_CLASS: usize = 250;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub species: String,
    pub point: GeoPoint,
    /// Carried through but not used as a feature.
    pub date: String,
    pub presence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub species: String,
    pub feature_names: Vec<String>,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(species: impl Into<String>, feature_names: Vec<String>, samples: Vec<Sample>) -> Result<Self> {
        let arity = feature_names.len();
        if let Some((i, s)) = samples.iter().enumerate().find(|(_, s)| s.features.len() != arity) {
            return Err(SdmError::invalid(format!(
                "sample {i} has {} features, expected {arity}",
                s.features.len()
            )));
        }
        if let Some(i) = samples.iter().position(|s| s.label > 1) {
            return Err(SdmError::invalid(format!("sample {i} has non-binary label")));
        }
        Ok(Dataset {
            species: species.into(),
            feature_names,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Feature rows, cloned out for training.
    pub fn features(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| s.features.clone()).collect()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let pos = self.samples.iter().filter(|s| s.label == 1).count();
        [self.samples.len() - pos, pos]
    }

    fn with_samples(&self, samples: Vec<Sample>) -> Dataset {
        Dataset {
            species: self.species.clone(),
            feature_names: self.feature_names.clone(),
            samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

/// The three environmental layers sampled at every point.
#[derive(Debug, Clone)]
pub struct EnvironmentLayers {
    pub elevation: Raster,
    pub precipitation: Raster,
    pub temperature: Raster,
}

impl EnvironmentLayers {
    /// Feature vector for `p` in [`FEATURE_NAMES`] order, or `None` if any
    /// layer has no value there.
    pub fn features_at(&self, p: GeoPoint) -> Option<Vec<f64>> {
        Some(vec![
            p.lat,
            p.lon,
            self.elevation.sample(p)?,
            self.precipitation.sample(p)?,
            self.temperature.sample(p)?,
        ])
    }

    pub fn layers(&self) -> [&Raster; 3] {
        [&self.elevation, &self.precipitation, &self.temperature]
    }
}

/// Parses `species,latitude,longitude,date` sightings. Extra columns are
/// ignored; every record is a presence.
pub fn parse_observations_csv(text: &str) -> Result<Vec<ObservationRecord>> {
    read_observations(text.as_bytes())
}

pub fn read_observations<R: Read>(reader: R) -> Result<Vec<ObservationRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| SdmError::parse(1, e.to_string()))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| SdmError::parse(1, format!("missing column '{name}'")))
    };
    let (c_species, c_lat, c_lon, c_date) =
        (column("species")?, column("latitude")?, column("longitude")?, column("date")?);

    let mut out = Vec::new();
    for result in rdr.records() {
        let record = result.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            SdmError::parse(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |c: usize, name: &str| {
            record
                .get(c)
                .ok_or_else(|| SdmError::parse(line, format!("missing field '{name}'")))
        };
        let coord = |c: usize, name: &str| -> Result<f64> {
            let raw = field(c, name)?;
            raw.parse::<f64>()
                .map_err(|_| SdmError::parse(line, format!("{name} '{raw}' is not a number")))
        };
        let species = field(c_species, "species")?.to_string();
        if species.is_empty() {
            return Err(SdmError::parse(line, "empty species name"));
        }
        let point = GeoPoint::new(coord(c_lat, "latitude")?, coord(c_lon, "longitude")?)
            .map_err(|e| SdmError::parse(line, e.to_string()))?;
        out.push(ObservationRecord {
            species,
            point,
            date: field(c_date, "date")?.to_string(),
            presence: true,
        });
    }
    Ok(out)
}

/// True when `candidate` is farther than `min_dist_km` from every presence.
pub fn is_valid_absence(candidate: GeoPoint, presences: &[GeoPoint], min_dist_km: f64) -> bool {
    presences.iter().all(|&p| haversine_km(candidate, p) > min_dist_km)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoAbsenceParams {
    pub count: usize,
    pub min_dist_km: f64,
    pub seed: u64,
    /// Total candidate draws allowed; defaults to `1000 * count`.
    pub max_attempts: usize,
}

impl PseudoAbsenceParams {
    pub fn new(count: usize, seed: u64) -> Self {
        PseudoAbsenceParams {
            count,
            min_dist_km: DEFAULT_MIN_DIST_KM,
            seed,
            max_attempts: count.saturating_mul(1000),
        }
    }
}

/// Rejection-samples `params.count` points uniformly (in degrees) inside
/// `region`, keeping only those farther than `min_dist_km` from every
/// presence.
pub fn generate_pseudo_absences(
    presences: &[GeoPoint],
    region: &BoundingBox,
    params: &PseudoAbsenceParams,
) -> Result<Vec<GeoPoint>> {
    if params.max_attempts < params.count {
        return Err(SdmError::invalid(format!(
            "max_attempts {} < count {}",
            params.max_attempts, params.count
        )));
    }
    if !(params.min_dist_km >= 0.0) {
        return Err(SdmError::invalid("min_dist_km must be >= 0"));
    }
    let region = BoundingBox::new(region.min_lat, region.max_lat, region.min_lon, region.max_lon)?;
    let mut rng = rng::rng_from_seed(params.seed);
    let mut accepted = Vec::with_capacity(params.count);
    let mut attempts = 0;
    while accepted.len() < params.count {
        if attempts == params.max_attempts {
            return Err(SdmError::AttemptsExhausted {
                requested: params.count,
                accepted: accepted.len(),
                attempts,
                rate: accepted.len() as f64 / attempts.max(1) as f64,
            });
        }
        attempts += 1;
        let candidate = GeoPoint {
            lat: rng.gen_range(region.min_lat..region.max_lat),
            lon: rng.gen_range(region.min_lon..region.max_lon),
        };
        if is_valid_absence(candidate, presences, params.min_dist_km) {
            accepted.push(candidate);
        }
    }
    Ok(accepted)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assembled {
    pub dataset: Dataset,
    /// Points discarded because some raster had no value there.
    pub dropped: usize,
}

/// Joins raster features onto presences (label 1) then absences (label 0).
pub fn assemble_dataset(
    presences: &[ObservationRecord],
    absences: &[GeoPoint],
    layers: &EnvironmentLayers,
) -> Result<Assembled> {
    let species = match presences.first() {
        Some(r) => r.species.clone(),
        None => String::new(),
    };
    if let Some(other) = presences.iter().find(|r| r.species != species) {
        return Err(SdmError::invalid(format!(
            "records mix species '{species}' and '{}'",
            other.species
        )));
    }
    let points = presences
        .iter()
        .map(|r| (r.point, 1u8))
        .chain(absences.iter().map(|&p| (p, 0u8)));
    let mut samples = Vec::with_capacity(presences.len() + absences.len());
    let mut dropped = 0;
    for (point, label) in points {
        match layers.features_at(point) {
            Some(features) if features.iter().all(|v| v.is_finite()) => {
                samples.push(Sample { features, label })
            }
            _ => dropped += 1,
        }
    }
    if samples.is_empty() {
        return Err(SdmError::EmptyDataset { dropped });
    }
    let names = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    Ok(Assembled {
        dataset: Dataset::new(species, names, samples)?,
        dropped,
    })
}

fn class_indices(dataset: &Dataset) -> [Vec<usize>; 2] {
    let mut by_class = [Vec::new(), Vec::new()];
    for (i, s) in dataset.samples.iter().enumerate() {
        by_class[s.label as usize].push(i);
    }
    by_class
}

/// Draws `n_per_class` rows of each class without replacement. Selected
/// rows keep their original relative order.
pub fn balanced_sample(dataset: &Dataset, n_per_class: usize, seed: u64) -> Result<Dataset> {
    let by_class = class_indices(dataset);
    for class in [1u8, 0u8] {
        let available = by_class[class as usize].len();
        if available < n_per_class {
            return Err(SdmError::InsufficientClass {
                class,
                available,
                requested: n_per_class,
            });
        }
    }
    let mut chosen = Vec::with_capacity(2 * n_per_class);
    for (class, members) in by_class.iter().enumerate() {
        let mut rng = rng::stream(seed, class as u64);
        chosen.extend(
            index::sample(&mut rng, members.len(), n_per_class)
                .into_iter()
                .map(|k| members[k]),
        );
    }
    chosen.sort_unstable();
    Ok(dataset.with_samples(chosen.into_iter().map(|i| dataset.samples[i].clone()).collect()))
}

/// Per-class cut points: `(train, val)` sizes; test gets the remainder.
pub fn split_sizes(class_count: usize) -> (usize, usize) {
    (class_count * 7 / 10, class_count / 10)
}

/// Stratified 70:10:20 split. Each class is shuffled with its own stream
/// and cut at `floor(0.7 k)` / `floor(0.1 k)` / rest.
pub fn split(dataset: &Dataset, seed: u64) -> Result<SplitDataset> {
    if dataset.len() < 10 {
        return Err(SdmError::invalid(format!(
            "split needs at least 10 samples, got {}",
            dataset.len()
        )));
    }
    let mut parts: [Vec<usize>; 3] = Default::default();
    for (class, mut members) in class_indices(dataset).into_iter().enumerate() {
        let mut rng = rng::stream(seed, 0x5350_4c49_0000 + class as u64);
        rand::seq::SliceRandom::shuffle(members.as_mut_slice(), &mut rng);
        let (n_train, n_val) = split_sizes(members.len());
        parts[0].extend_from_slice(&members[..n_train]);
        parts[1].extend_from_slice(&members[n_train..n_train + n_val]);
        parts[2].extend_from_slice(&members[n_train + n_val..]);
    }
    let [train, val, test] = parts.map(|mut idx| {
        idx.sort_unstable();
        dataset.with_samples(idx.into_iter().map(|i| dataset.samples[i].clone()).collect())
    });
    Ok(SplitDataset { train, val, test })
}

/// Writes the `label,<features...>` export CSV.
pub fn write_dataset_csv<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let header: Vec<&str> = std::iter::once(LABEL_COLUMN)
        .chain(dataset.feature_names.iter().map(String::as_str))
        .collect();
    w.write_record(&header).map_err(csv_io)?;
    for s in &dataset.samples {
        let row: Vec<String> = std::iter::once(s.label.to_string())
            .chain(s.features.iter().map(|v| v.to_string()))
            .collect();
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> SdmError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => SdmError::Io(io),
        other => SdmError::invalid(format!("{other:?}")),
    }
}

/// Reads an export CSV. The first column must be `label`; the remaining
/// header names become the feature names.
pub fn read_dataset_csv<R: Read>(reader: R, species: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| SdmError::parse(1, e.to_string()))?
        .clone();
    if headers.get(0) != Some(LABEL_COLUMN) {
        return Err(SdmError::Schema(format!(
            "first column must be '{LABEL_COLUMN}', found '{}'",
            headers.get(0).unwrap_or("")
        )));
    }
    let feature_names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    if feature_names.is_empty() {
        return Err(SdmError::Schema("no feature columns".into()));
    }
    let mut samples = Vec::new();
    for result in rdr.records() {
        let record = result.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            SdmError::parse(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let label = match record.get(0) {
            Some("0") => 0,
            Some("1") => 1,
            other => {
                return Err(SdmError::parse(
                    line,
                    format!("label '{}' is not 0 or 1", other.unwrap_or("")),
                ))
            }
        };
        let features = record
            .iter()
            .skip(1)
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| SdmError::parse(line, format!("feature '{v}' is not a finite number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        samples.push(Sample { features, label });
    }
    Dataset::new(species, feature_names, samples)
}
