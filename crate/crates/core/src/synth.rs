//! Gaussian two-cluster datasets in the export schema.
//!
//! Each feature is normal with a per-feature scale. The presence cluster is
//! shifted by `separation` standard deviations along every feature, so the
//! Bayes error is `Phi(-separation * sqrt(5) / 2)`: about 4e-6 at 4.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{Dataset, EnvironmentLayers, ObservationRecord, Sample, FEATURE_NAMES};
use crate::error::{Result, SdmError};
use crate::geo::{GeoPoint, Raster};
use crate::rng;

/// `(mean, standard deviation)` of the absence cluster per feature.
const BASE: [(f64, f64); 5] = [
    (38.0, 1.0),
    (-100.0, 1.5),
    (1200.0, 250.0),
    (60.0, 12.0),
    (11.0, 2.5),
];

/// `n` samples, `n - n/2` presences followed by `n/2` absences.
pub fn two_clusters(n: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if !separation.is_finite() {
        return Err(SdmError::invalid("separation must be finite"));
    }
    let n_neg = n / 2;
    let mut rng = rng::rng_from_seed(seed);
    let normals: Vec<Normal<f64>> = BASE
        .iter()
        .map(|&(_, sd)| Normal::new(0.0, sd).expect("positive scale"))
        .collect();
    let samples = (0..n)
        .map(|i| {
            let label = u8::from(i < n - n_neg);
            let shift = if label == 1 { separation } else { 0.0 };
            let features = BASE
                .iter()
                .zip(&normals)
                .map(|(&(mean, sd), dist)| mean + shift * sd + dist.sample(&mut rng))
                .collect();
            Sample { features, label }
        })
        .collect();
    Dataset::new("synthetic", FEATURE_NAMES.map(String::from).to_vec(), samples)
}

/// A small synthetic study area: three 0.05-degree rasters over
/// lat [38, 42] x lon [-107, -101] and sightings of one species inside
/// lat [39, 41] x lon [-106, -102], so the default sampling region stays on
/// the rasters.
#[derive(Debug, Clone)]
pub struct Landscape {
    pub layers: EnvironmentLayers,
    pub observations: Vec<ObservationRecord>,
}

pub const LANDSCAPE_SPECIES: &str = "Synthetic Thrush";

const LANDSCAPE_ROWS: usize = 80;
const LANDSCAPE_COLS: usize = 120;
const LANDSCAPE_CELL: f64 = 0.05;
const LANDSCAPE_WEST: f64 = -107.0;
const LANDSCAPE_SOUTH: f64 = 38.0;

/// Builds the landscape. Elevation has a nodata block in the north-west
/// corner; sightings cluster around longitude -103 and avoid nodata cells.
pub fn landscape(n_presences: usize, seed: u64) -> Landscape {
    let mut elevation = Vec::with_capacity(LANDSCAPE_ROWS * LANDSCAPE_COLS);
    let mut precipitation = Vec::with_capacity(elevation.capacity());
    let mut temperature = Vec::with_capacity(elevation.capacity());
    for row in 0..LANDSCAPE_ROWS {
        let lat = LANDSCAPE_SOUTH + (LANDSCAPE_ROWS - row) as f64 * LANDSCAPE_CELL - LANDSCAPE_CELL / 2.0;
        for col in 0..LANDSCAPE_COLS {
            let lon = LANDSCAPE_WEST + (col as f64 + 0.5) * LANDSCAPE_CELL;
            let elev = 1500.0 + 250.0 * (lat - LANDSCAPE_SOUTH) + 150.0 * (1.7 * lon).sin();
            let nodata = row < 6 && col < 10;
            elevation.push(if nodata { -9999.0 } else { (elev * 10.0).round() / 10.0 });
            precipitation.push(((30.0 + 12.0 * (lat - 39.0) + 5.0 * (2.0 * lon).cos()) * 100.0).round() / 100.0);
            temperature.push(((14.0 - 0.0065 * elev + 0.8 * (41.0 - lat)) * 100.0).round() / 100.0);
        }
    }
    let grid = |values| {
        Raster::new(
            LANDSCAPE_COLS,
            LANDSCAPE_ROWS,
            LANDSCAPE_WEST,
            LANDSCAPE_SOUTH,
            LANDSCAPE_CELL,
            -9999.0,
            values,
        )
        .expect("landscape raster dimensions")
    };
    let layers = EnvironmentLayers {
        elevation: grid(elevation),
        precipitation: grid(precipitation),
        temperature: grid(temperature),
    };

    let mut rng = rng::rng_from_seed(seed);
    let lon_dist = Normal::new(-103.0, 0.35).expect("positive scale");
    let mut observations = Vec::with_capacity(n_presences);
    while observations.len() < n_presences {
        let lon: f64 = lon_dist.sample(&mut rng);
        let lat: f64 = rng.gen_range(39.05..40.95);
        let point = GeoPoint { lat, lon: lon.clamp(-105.95, -102.05) };
        if layers.features_at(point).is_none() {
            continue;
        }
        let day = observations.len() % 28 + 1;
        observations.push(ObservationRecord {
            species: LANDSCAPE_SPECIES.to_string(),
            point: GeoPoint {
                lat: (point.lat * 1e5).round() / 1e5,
                lon: (point.lon * 1e5).round() / 1e5,
            },
            date: format!("2023-05-{day:02}"),
            presence: true,
        });
    }
    Landscape { layers, observations }
}

impl Landscape {
    /// Observations in the `species,latitude,longitude,date` CSV layout.
    pub fn observations_csv(&self) -> String {
        let mut out = String::from("species,latitude,longitude,date\n");
        for r in &self.observations {
            out.push_str(&format!("{},{},{},{}\n", r.species, r.point.lat, r.point.lon, r.date));
        }
        out
    }
}
