//! Predicted distribution maps.
//!
//! The bounding box is tiled into `ceil(dlat / step)` rows by
//! `ceil(dlon / step)` columns. Each cell is scored at its center, so the
//! map is offset by `step / 2` from the box corner. Cells are stored north
//! to south, west to east.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{EnvironmentLayers, FEATURE_NAMES};
use crate::ensemble::ProbabilityModel;
use crate::error::{Result, SdmError};
use crate::geo::{BoundingBox, GeoPoint};

pub const DEFAULT_STEP_DEG: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub point: GeoPoint,
    /// `None` where a raster has no value.
    pub probability: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionGrid {
    pub bbox: BoundingBox,
    pub step: f64,
    pub n_rows: usize,
    pub n_cols: usize,
    pub cells: Vec<GridCell>,
}

impl PredictionGrid {
    pub fn cell(&self, row: usize, col: usize) -> &GridCell {
        &self.cells[row * self.n_cols + col]
    }

    pub fn scored(&self) -> usize {
        self.cells.iter().filter(|c| c.probability.is_some()).count()
    }
}

/// `ceil(span / step)`, ignoring float noise just above an integer.
fn cell_count(span: f64, step: f64) -> usize {
    let ratio = span / step;
    ((ratio - 1e-9 * ratio.max(1.0)).ceil() as usize).max(1)
}

/// Center of grid cell `(row, col)`.
pub fn cell_center(bbox: &BoundingBox, step: f64, row: usize, col: usize) -> GeoPoint {
    GeoPoint {
        lat: bbox.max_lat - (row as f64 + 0.5) * step,
        lon: bbox.min_lon + (col as f64 + 0.5) * step,
    }
}

/// Scores every cell center of `bbox` with `model`.
pub fn predict_grid<M: ProbabilityModel + ?Sized>(
    model: &M,
    layers: &EnvironmentLayers,
    bbox: &BoundingBox,
    step: f64,
) -> Result<PredictionGrid> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(SdmError::invalid(format!("step {step} must be > 0")));
    }
    let bbox = BoundingBox::new(bbox.min_lat, bbox.max_lat, bbox.min_lon, bbox.max_lon)?;
    if model.feature_names().iter().map(String::as_str).ne(FEATURE_NAMES) {
        return Err(SdmError::Schema(format!(
            "model features {:?} are not {:?}",
            model.feature_names(),
            FEATURE_NAMES
        )));
    }
    if !layers.layers().iter().any(|r| r.extent().intersects(&bbox)) {
        return Err(SdmError::invalid("bounding box lies outside every raster"));
    }
    let n_rows = cell_count(bbox.max_lat - bbox.min_lat, step);
    let n_cols = cell_count(bbox.max_lon - bbox.min_lon, step);

    let rows = (0..n_rows)
        .into_par_iter()
        .map(|row| {
            (0..n_cols)
                .map(|col| {
                    let point = cell_center(&bbox, step, row, col);
                    let probability = match layers.features_at(point) {
                        Some(features) => Some(model.predict_row(&features)?),
                        None => None,
                    };
                    Ok(GridCell { point, probability })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(PredictionGrid {
        bbox,
        step,
        n_rows,
        n_cols,
        cells: rows.into_iter().flatten().collect(),
    })
}

/// `latitude,longitude,probability` rows for scored cells; returns the row
/// count.
pub fn write_grid_csv<W: Write>(grid: &PredictionGrid, mut sink: W) -> Result<usize> {
    writeln!(sink, "latitude,longitude,probability")?;
    let mut rows = 0;
    for cell in &grid.cells {
        if let Some(p) = cell.probability {
            writeln!(sink, "{:.6},{:.6},{:.6}", cell.point.lat, cell.point.lon, p)?;
            rows += 1;
        }
    }
    sink.flush()?;
    Ok(rows)
}

/// Plain (`P2`) graymap, one pixel per cell, `round(255 p)`, nodata black.
pub fn write_heatmap_pgm<W: Write>(grid: &PredictionGrid, mut sink: W) -> Result<()> {
    writeln!(sink, "P2")?;
    writeln!(sink, "{} {}", grid.n_cols, grid.n_rows)?;
    writeln!(sink, "255")?;
    for row in grid.cells.chunks(grid.n_cols.max(1)) {
        let line: Vec<String> = row
            .iter()
            .map(|c| c.probability.map_or(0, |p| (255.0 * p).round() as u8).to_string())
            .collect();
        writeln!(sink, "{}", line.join(" "))?;
    }
    sink.flush()?;
    Ok(())
}
