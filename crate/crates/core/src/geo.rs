//! Georeferenced rasters and point geometry.
//!
//! Rasters are read from the ESRI ASCII grid format:
//!
//! ```text
//! ncols         4
//! nrows         3
//! xllcorner     -106.0
//! yllcorner     39.0
//! cellsize      0.5
//! NODATA_value  -9999
//! 1 2 3 4
//! ...
//! ```
//!
//! Header keys are case-insensitive and `NODATA_value` is optional (default
//! `-9999`). `xllcenter`/`yllcenter` are accepted and shifted by half a cell.
//! Data rows run north to south. A point lying exactly on the east or north
//! edge of a cell belongs to the next cell over.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SdmError};

/// Mean Earth radius used by [`haversine_km`].
pub const EARTH_RADIUS_KM: f64 = 6371.0;

pub const DEFAULT_NODATA: f64 = -9999.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(SdmError::invalid(format!(
                "point ({lat}, {lon}) outside [-90, 90] x [-180, 180]"
            )));
        }
        Ok(GeoPoint { lat, lon })
    }
}

/// Study-region extent in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
}

impl BoundingBox {
    pub fn new(min_lat: f64, max_lat: f64, min_lon: f64, max_lon: f64) -> Result<Self> {
        let finite = [min_lat, max_lat, min_lon, max_lon]
            .iter()
            .all(|v| v.is_finite());
        if !finite || min_lat >= max_lat || min_lon >= max_lon {
            return Err(SdmError::invalid(format!(
                "degenerate bounding box lat [{min_lat}, {max_lat}] lon [{min_lon}, {max_lon}]"
            )));
        }
        Ok(BoundingBox {
            min_lat,
            max_lat,
            min_lon,
            max_lon,
        })
    }

    /// Bounding box of `points` grown by `margin` degrees on every side,
    /// clipped to valid coordinates.
    pub fn around(points: &[GeoPoint], margin: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(SdmError::invalid("cannot bound an empty point set"));
        }
        let mut bbox = BoundingBox {
            min_lat: f64::INFINITY,
            max_lat: f64::NEG_INFINITY,
            min_lon: f64::INFINITY,
            max_lon: f64::NEG_INFINITY,
        };
        for p in points {
            bbox.min_lat = bbox.min_lat.min(p.lat);
            bbox.max_lat = bbox.max_lat.max(p.lat);
            bbox.min_lon = bbox.min_lon.min(p.lon);
            bbox.max_lon = bbox.max_lon.max(p.lon);
        }
        BoundingBox::new(
            (bbox.min_lat - margin).max(-90.0),
            (bbox.max_lat + margin).min(90.0),
            (bbox.min_lon - margin).max(-180.0),
            (bbox.max_lon + margin).min(180.0),
        )
    }

    /// Parses `min_lat,max_lat,min_lon,max_lon`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<f64> = text
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| SdmError::invalid(format!("bounding box '{text}': {e}")))?;
        match parts.as_slice() {
            &[a, b, c, d] => BoundingBox::new(a, b, c, d),
            _ => Err(SdmError::invalid(format!(
                "bounding box '{text}' needs min_lat,max_lat,min_lon,max_lon"
            ))),
        }
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        p.lat >= self.min_lat && p.lat <= self.max_lat && p.lon >= self.min_lon && p.lon <= self.max_lon
    }

    pub fn intersects(&self, other: &BoundingBox) -> bool {
        self.min_lat < other.max_lat
            && other.min_lat < self.max_lat
            && self.min_lon < other.max_lon
            && other.min_lon < self.max_lon
    }
}

/// Great-circle distance on a sphere of radius [`EARTH_RADIUS_KM`].
pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.clamp(0.0, 1.0).sqrt().asin()
}

/// Single-band raster on a regular lat/lon grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    ncols: usize,
    nrows: usize,
    xll: f64,
    yll: f64,
    cellsize: f64,
    nodata: f64,
    /// Row-major, first row northernmost.
    values: Vec<f64>,
}

impl Raster {
    pub fn new(
        ncols: usize,
        nrows: usize,
        xll: f64,
        yll: f64,
        cellsize: f64,
        nodata: f64,
        values: Vec<f64>,
    ) -> Result<Self> {
        if ncols == 0 || nrows == 0 {
            return Err(SdmError::invalid("raster needs at least one row and column"));
        }
        if !(cellsize > 0.0 && cellsize.is_finite()) {
            return Err(SdmError::invalid(format!("cellsize {cellsize} must be > 0")));
        }
        if !xll.is_finite() || !yll.is_finite() {
            return Err(SdmError::invalid("raster origin must be finite"));
        }
        if values.len() != ncols * nrows {
            return Err(SdmError::invalid(format!(
                "expected {} values, got {}",
                ncols * nrows,
                values.len()
            )));
        }
        Ok(Raster {
            ncols,
            nrows,
            xll,
            yll,
            cellsize,
            nodata,
            values,
        })
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn xll(&self) -> f64 {
        self.xll
    }

    pub fn yll(&self) -> f64 {
        self.yll
    }

    pub fn cellsize(&self) -> f64 {
        self.cellsize
    }

    pub fn nodata(&self) -> f64 {
        self.nodata
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn extent(&self) -> BoundingBox {
        BoundingBox {
            min_lat: self.yll,
            max_lat: self.yll + self.nrows as f64 * self.cellsize,
            min_lon: self.xll,
            max_lon: self.xll + self.ncols as f64 * self.cellsize,
        }
    }

    /// Flat index of the cell holding `p`, if inside the grid.
    pub fn cell_index(&self, p: GeoPoint) -> Option<usize> {
        let col = ((p.lon - self.xll) / self.cellsize).floor();
        let row_from_south = ((p.lat - self.yll) / self.cellsize).floor();
        if !(col >= 0.0 && row_from_south >= 0.0) {
            return None;
        }
        let (col, row_from_south) = (col as usize, row_from_south as usize);
        if col >= self.ncols || row_from_south >= self.nrows {
            return None;
        }
        Some((self.nrows - 1 - row_from_south) * self.ncols + col)
    }

    /// Cell value at `p`; `None` outside the grid or on nodata.
    pub fn sample(&self, p: GeoPoint) -> Option<f64> {
        let v = self.values[self.cell_index(p)?];
        if v == self.nodata || v.is_nan() {
            None
        } else {
            Some(v)
        }
    }

    /// Renders the raster back to ESRI ASCII grid text.
    pub fn to_ascii_grid(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "ncols {}", self.ncols);
        let _ = writeln!(out, "nrows {}", self.nrows);
        let _ = writeln!(out, "xllcorner {}", self.xll);
        let _ = writeln!(out, "yllcorner {}", self.yll);
        let _ = writeln!(out, "cellsize {}", self.cellsize);
        let _ = writeln!(out, "NODATA_value {}", self.nodata);
        for row in self.values.chunks(self.ncols) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Parses ESRI ASCII grid text.
pub fn parse_ascii_grid(text: &str) -> Result<Raster> {
    let mut ncols = None;
    let mut nrows = None;
    let mut xll = None;
    let mut yll = None;
    let mut x_center = false;
    let mut y_center = false;
    let mut cellsize = None;
    let mut nodata = None;

    let mut lines = text.lines().enumerate().peekable();
    while let Some(&(idx, line)) = lines.peek() {
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            lines.next();
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        let key = parts.next().unwrap_or_default();
        if !key.starts_with(|c: char| c.is_ascii_alphabetic()) {
            break;
        }
        let value = parts
            .next()
            .ok_or_else(|| SdmError::parse(lineno, format!("header '{key}' has no value")))?;
        if parts.next().is_some() {
            return Err(SdmError::parse(lineno, format!("header '{key}' has trailing tokens")));
        }
        let number = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| SdmError::parse(lineno, format!("header '{key}' value '{v}' is not numeric")))
        };
        let count = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| SdmError::parse(lineno, format!("header '{key}' value '{v}' is not a count")))
        };
        match key.to_ascii_lowercase().as_str() {
            "ncols" => ncols = Some(count(value)?),
            "nrows" => nrows = Some(count(value)?),
            "xllcorner" => xll = Some(number(value)?),
            "yllcorner" => yll = Some(number(value)?),
            "xllcenter" => {
                xll = Some(number(value)?);
                x_center = true;
            }
            "yllcenter" => {
                yll = Some(number(value)?);
                y_center = true;
            }
            "cellsize" => cellsize = Some(number(value)?),
            "nodata_value" => nodata = Some(number(value)?),
            other => {
                return Err(SdmError::parse(lineno, format!("unknown header key '{other}'")));
            }
        }
        lines.next();
    }

    let header_line = lines.peek().map(|&(i, _)| i + 1).unwrap_or(text.lines().count() + 1);
    let missing = |name: &str| SdmError::parse(header_line, format!("missing header '{name}'"));
    let ncols = ncols.ok_or_else(|| missing("ncols"))?;
    let nrows = nrows.ok_or_else(|| missing("nrows"))?;
    let mut xll = xll.ok_or_else(|| missing("xllcorner"))?;
    let mut yll = yll.ok_or_else(|| missing("yllcorner"))?;
    let cellsize = cellsize.ok_or_else(|| missing("cellsize"))?;
    let nodata = nodata.unwrap_or(DEFAULT_NODATA);
    if ncols == 0 || nrows == 0 {
        return Err(SdmError::parse(header_line, "ncols and nrows must be >= 1"));
    }
    if !(cellsize > 0.0) {
        return Err(SdmError::parse(header_line, format!("cellsize {cellsize} must be > 0")));
    }
    if x_center {
        xll -= cellsize / 2.0;
    }
    if y_center {
        yll -= cellsize / 2.0;
    }

    let expected = ncols * nrows;
    let mut values = Vec::with_capacity(expected);
    let mut last_line = header_line;
    for (idx, line) in lines {
        let lineno = idx + 1;
        for token in line.split_whitespace() {
            let v = token
                .parse::<f64>()
                .map_err(|_| SdmError::parse(lineno, format!("cell value '{token}' is not numeric")))?;
            if values.len() == expected {
                return Err(SdmError::parse(
                    lineno,
                    format!("expected {expected} values, found more"),
                ));
            }
            values.push(v);
            last_line = lineno;
        }
    }
    if values.len() != expected {
        return Err(SdmError::parse(
            last_line,
            format!("expected {expected} values, got {}", values.len()),
        ));
    }
    Raster::new(ncols, nrows, xll, yll, cellsize, nodata, values)
}

/// Reads and parses an `.asc` file.
pub fn read_ascii_grid(path: impl AsRef<std::path::Path>) -> Result<Raster> {
    parse_ascii_grid(&std::fs::read_to_string(path)?)
}
