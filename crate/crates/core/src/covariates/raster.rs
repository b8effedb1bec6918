//! Gridded real-valued fields.
//!
//! A [`RasterField`] stores one value per cell of a regular grid and is read
//! as a piecewise-constant surface: every location takes the value of the
//! cell whose center is nearest to it. Covariates, the baseline surface and
//! kernel estimates all use this representation.
//!
//! On disk a raster is a single text file. The first line is a JSON header
//! `{"origin":[x0,y0],"dx":..,"dy":..,"n_x":..,"n_y":..}`; it is followed by
//! `n_y` comma-separated lines of `n_x` values. The first data line is the
//! row with the smallest y coordinate.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Rect};

/// Geometry of a regular grid. `origin` is the lower-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub origin: [f64; 2],
    pub dx: f64,
    pub dy: f64,
    pub n_x: usize,
    pub n_y: usize,
}

impl GridGeometry {
    pub fn new(origin: [f64; 2], dx: f64, dy: f64, n_x: usize, n_y: usize) -> Result<Self> {
        let g = GridGeometry {
            origin,
            dx,
            dy,
            n_x,
            n_y,
        };
        g.validate()?;
        Ok(g)
    }

    /// Grid of `n_x × n_y` cells exactly covering `rect`.
    pub fn covering(rect: &Rect, n_x: usize, n_y: usize) -> Result<Self> {
        if n_x == 0 || n_y == 0 {
            return Err(Error::InvalidRaster("grid dimensions must be >= 1".into()));
        }
        GridGeometry::new(
            [rect.x_min, rect.y_min],
            rect.width() / n_x as f64,
            rect.height() / n_y as f64,
            n_x,
            n_y,
        )
    }

    fn validate(&self) -> Result<()> {
        if !(self.dx > 0.0 && self.dy > 0.0 && self.dx.is_finite() && self.dy.is_finite()) {
            return Err(Error::InvalidRaster(format!(
                "cell sizes must be positive (dx={}, dy={})",
                self.dx, self.dy
            )));
        }
        if self.n_x == 0 || self.n_y == 0 {
            return Err(Error::InvalidRaster("grid dimensions must be >= 1".into()));
        }
        if !(self.origin[0].is_finite() && self.origin[1].is_finite()) {
            return Err(Error::InvalidRaster("origin must be finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_x * self.n_y
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn extent(&self) -> Rect {
        Rect::new(
            self.origin[0],
            self.origin[0] + self.dx * self.n_x as f64,
            self.origin[1],
            self.origin[1] + self.dy * self.n_y as f64,
        )
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    #[inline]
    pub fn center(&self, ix: usize, iy: usize) -> Point {
        Point::new(
            self.origin[0] + (ix as f64 + 0.5) * self.dx,
            self.origin[1] + (iy as f64 + 0.5) * self.dy,
        )
    }

    /// Flat index of the cell whose center is nearest to `u`.
    #[inline]
    pub fn cell_of(&self, u: &Point) -> Option<(usize, usize)> {
        let fx = (u.x - self.origin[0]) / self.dx;
        let fy = (u.y - self.origin[1]) / self.dy;
        if !(fx >= 0.0 && fy >= 0.0 && fx <= self.n_x as f64 && fy <= self.n_y as f64) {
            return None;
        }
        // The upper boundary belongs to the last cell.
        let ix = (fx.floor() as usize).min(self.n_x - 1);
        let iy = (fy.floor() as usize).min(self.n_y - 1);
        Some((ix, iy))
    }

    pub fn centers(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.n_y).flat_map(move |iy| (0..self.n_x).map(move |ix| self.center(ix, iy)))
    }
}

/// Piecewise-constant field on a regular grid (values row-major, y-rows).
#[derive(Debug, Clone, PartialEq)]
pub struct RasterField {
    geometry: GridGeometry,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RasterHeader {
    origin: [f64; 2],
    dx: f64,
    dy: f64,
    n_x: usize,
    n_y: usize,
}

impl RasterField {
    pub fn new(geometry: GridGeometry, values: Vec<f64>) -> Result<Self> {
        geometry.validate()?;
        if values.len() != geometry.len() {
            return Err(Error::InvalidRaster(format!(
                "expected {} values, got {}",
                geometry.len(),
                values.len()
            )));
        }
        Ok(RasterField { geometry, values })
    }

    pub fn constant(geometry: GridGeometry, value: f64) -> Self {
        RasterField {
            values: vec![value; geometry.len()],
            geometry,
        }
    }

    /// Evaluates `f` at every cell center.
    pub fn from_fn(geometry: GridGeometry, f: impl Fn(Point) -> f64) -> Self {
        let values = geometry.centers().map(f).collect();
        RasterField { geometry, values }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.geometry.n_x + ix]
    }

    pub fn extent(&self) -> Rect {
        self.geometry.extent()
    }

    /// Value of the nearest cell center to `u`.
    #[inline]
    pub fn lookup(&self, u: &Point) -> Result<f64> {
        self.geometry
            .cell_of(u)
            .map(|(ix, iy)| self.get(ix, iy))
            .ok_or(Error::OutsideRaster { x: u.x, y: u.y })
    }

    pub fn covers(&self, rect: &Rect) -> bool {
        self.extent().contains_rect(rect, 1e-12 * (1.0 + rect.width().max(rect.height())))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> RasterField {
        RasterField {
            geometry: self.geometry,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Pearson correlation of the cell values of two rasters on the same grid.
    /// Cells where `keep` is false are skipped.
    pub fn correlation(&self, other: &RasterField, keep: impl Fn(Point) -> bool) -> Result<f64> {
        if self.geometry != other.geometry {
            return Err(Error::InvalidRaster("rasters do not share a grid".into()));
        }
        let (mut n, mut sa, mut sb) = (0.0, 0.0, 0.0);
        let pairs: Vec<(f64, f64)> = self
            .geometry
            .centers()
            .zip(self.values.iter().zip(&other.values))
            .filter(|(c, _)| keep(*c))
            .map(|(_, (&a, &b))| (a, b))
            .collect();
        for &(a, b) in &pairs {
            n += 1.0;
            sa += a;
            sb += b;
        }
        if n < 2.0 {
            return Err(Error::InvalidRaster("fewer than two cells to correlate".into()));
        }
        let (ma, mb) = (sa / n, sb / n);
        let (mut cab, mut caa, mut cbb) = (0.0, 0.0, 0.0);
        for &(a, b) in &pairs {
            cab += (a - ma) * (b - mb);
            caa += (a - ma) * (a - ma);
            cbb += (b - mb) * (b - mb);
        }
        Ok(cab / (caa * cbb).sqrt())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::InvalidRaster("missing header line".into()))?
            .map_err(|e| Error::io(path, e))?;
        let h: RasterHeader = serde_json::from_str(&header_line)?;
        let geometry = GridGeometry::new(h.origin, h.dx, h.dy, h.n_x, h.n_y)?;
        let mut values = Vec::with_capacity(geometry.len());
        for (row, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let before = values.len();
            for tok in line.split(',') {
                let v: f64 = tok.trim().parse().map_err(|_| Error::MalformedRow {
                    row: row + 2,
                    reason: format!("cannot parse {tok:?} as a number"),
                })?;
                values.push(v);
            }
            if values.len() - before != geometry.n_x {
                return Err(Error::MalformedRow {
                    row: row + 2,
                    reason: format!("expected {} values", geometry.n_x),
                });
            }
        }
        RasterField::new(geometry, values)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = std::io::BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?);
        let g = &self.geometry;
        let header = RasterHeader {
            origin: g.origin,
            dx: g.dx,
            dy: g.dy,
            n_x: g.n_x,
            n_y: g.n_y,
        };
        let mut text = serde_json::to_string(&header)?;
        text.push('\n');
        for row in self.values.chunks(g.n_x) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            text.push_str(&line.join(","));
            text.push('\n');
        }
        out.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Long-format CSV (`x,y,value` per cell center) for plotting.
    pub fn write_long_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x", "y", "value"])?;
        for (c, v) in self.geometry.centers().zip(&self.values) {
            w.write_record([format!("{:?}", c.x), format!("{:?}", c.y), format!("{v:?}")])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}
