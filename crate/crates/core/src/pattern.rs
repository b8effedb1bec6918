//! Marked point patterns, observation windows and fixed-radius neighbor
//! queries.
//!
//! Marks are stored 0-based (`0..p`) in memory and written 1-based (`1..=p`)
//! in CSV files.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::covariates::{GridGeometry, RasterField};
use crate::error::{Error, Result};
use crate::geometry::{Point, Rect};

/// Two points closer than this are treated as coincident.
pub const COINCIDENCE_TOL: f64 = 1e-12;

/// Default resolution when rasterizing polygonal windows.
pub const DEFAULT_MASK_RESOLUTION: usize = 512;

/// Observation window: a rectangle, optionally restricted by a binary mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    rect: Rect,
    mask: Option<Arc<RasterField>>,
}

impl Window {
    pub fn rectangle(rect: Rect) -> Result<Self> {
        if !rect.is_valid() {
            return Err(Error::InvalidWindow(format!("degenerate rectangle {rect:?}")));
        }
        Ok(Window { rect, mask: None })
    }

    pub fn unit_square() -> Self {
        Window::rectangle(Rect::unit_square()).unwrap()
    }

    pub fn square(side: f64) -> Result<Self> {
        Window::rectangle(Rect::square(side))
    }

    /// Rectangle intersected with the nonzero cells of `mask`.
    pub fn with_mask(rect: Rect, mask: RasterField) -> Result<Self> {
        let w = Window::rectangle(rect)?;
        if !mask.covers(&rect) {
            return Err(Error::InvalidWindow("mask grid does not cover the rectangle".into()));
        }
        Ok(Window {
            mask: Some(Arc::new(mask)),
            ..w
        })
    }

    /// Rasterizes a simple polygon onto an `n × n` mask over its bounding box.
    pub fn from_polygon(vertices: &[Point], resolution: usize) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidWindow("polygon needs at least 3 vertices".into()));
        }
        let rect = Rect::new(
            vertices.iter().map(|v| v.x).fold(f64::INFINITY, f64::min),
            vertices.iter().map(|v| v.x).fold(f64::NEG_INFINITY, f64::max),
            vertices.iter().map(|v| v.y).fold(f64::INFINITY, f64::min),
            vertices.iter().map(|v| v.y).fold(f64::NEG_INFINITY, f64::max),
        );
        let grid = GridGeometry::covering(&rect, resolution, resolution)?;
        let mask = RasterField::from_fn(grid, |c| f64::from(u8::from(point_in_polygon(&c, vertices))));
        Window::with_mask(rect, mask)
    }

    pub fn rect(&self) -> &Rect {
        &self.rect
    }

    pub fn mask(&self) -> Option<&RasterField> {
        self.mask.as_deref()
    }

    #[inline]
    pub fn contains(&self, u: &Point) -> bool {
        self.rect.contains(u)
            && match &self.mask {
                None => true,
                Some(m) => m.lookup(u).map(|v| v != 0.0).unwrap_or(false),
            }
    }

    /// Area |W|. With a mask this counts valid cells whose centers fall in the rectangle.
    pub fn area(&self) -> f64 {
        match &self.mask {
            None => self.rect.area(),
            Some(m) => {
                let g = m.geometry();
                g.centers()
                    .zip(m.values())
                    .filter(|(c, &v)| v != 0.0 && self.rect.contains(c))
                    .count() as f64
                    * g.cell_area()
            }
        }
    }

    /// The eroded window `W ⊖ r`: the rectangle shrinks by `r` on every side
    /// and a mask cell survives iff every cell center within distance `r` is valid.
    pub fn erode(&self, r: f64) -> Result<Window> {
        if !(r >= 0.0) {
            return Err(Error::InvalidWindow(format!("negative erosion distance {r}")));
        }
        if r == 0.0 {
            return Ok(self.clone());
        }
        let rect = self.rect.shrink(r).ok_or(Error::EmptyErosion { distance: r })?;
        let mask = match &self.mask {
            None => None,
            Some(m) => {
                let eroded = erode_mask(m, r);
                let any = eroded
                    .geometry()
                    .centers()
                    .zip(eroded.values())
                    .any(|(c, &v)| v != 0.0 && rect.contains(&c));
                if !any {
                    return Err(Error::EmptyErosion { distance: r });
                }
                Some(Arc::new(eroded))
            }
        };
        Ok(Window { rect, mask })
    }

    /// Reads the sidecar JSON `{"x_min":..,"x_max":..,"y_min":..,"y_max":..,"mask":"path"}`.
    /// A relative mask path is resolved against the sidecar's directory.
    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: WindowFile = serde_json::from_str(&text)?;
        let rect = Rect::new(spec.x_min, spec.x_max, spec.y_min, spec.y_max);
        match spec.mask {
            None => Window::rectangle(rect),
            Some(mask_path) => {
                let base = path.parent().unwrap_or(Path::new("."));
                Window::with_mask(rect, RasterField::read(base.join(mask_path))?)
            }
        }
    }

    /// Writes the sidecar JSON. A mask is written next to it as `<stem>.mask.grid`.
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mask = match &self.mask {
            None => None,
            Some(m) => {
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("window");
                let name = format!("{stem}.mask.grid");
                m.write(path.with_file_name(&name))?;
                Some(PathBuf::from(name))
            }
        };
        let spec = WindowFile {
            x_min: self.rect.x_min,
            x_max: self.rect.x_max,
            y_min: self.rect.y_min,
            y_max: self.rect.y_max,
            mask,
        };
        fs::write(path, serde_json::to_string_pretty(&spec)?).map_err(|e| Error::io(path, e))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WindowFile {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mask: Option<PathBuf>,
}

/// Free-function form of [`Window::erode`].
pub fn erode_window(w: &Window, r: f64) -> Result<Window> {
    w.erode(r)
}

fn erode_mask(mask: &RasterField, r: f64) -> RasterField {
    let g = *mask.geometry();
    let kx = (r / g.dx).floor() as isize;
    let ky = (r / g.dy).floor() as isize;
    let r2 = r * r;
    let offsets: Vec<(isize, isize)> = (-ky..=ky)
        .flat_map(|oy| (-kx..=kx).map(move |ox| (ox, oy)))
        .filter(|&(ox, oy)| {
            let (ddx, ddy) = (ox as f64 * g.dx, oy as f64 * g.dy);
            ddx * ddx + ddy * ddy <= r2
        })
        .collect();
    let (nx, ny) = (g.n_x as isize, g.n_y as isize);
    let valid = |ix: isize, iy: isize| {
        ix >= 0 && iy >= 0 && ix < nx && iy < ny && mask.get(ix as usize, iy as usize) != 0.0
    };
    let mut out = vec![0.0; g.len()];
    for iy in 0..ny {
        for ix in 0..nx {
            if valid(ix, iy) && offsets.iter().all(|&(ox, oy)| valid(ix + ox, iy + oy)) {
                out[(iy * nx + ix) as usize] = 1.0;
            }
        }
    }
    RasterField::new(g, out).expect("same geometry")
}

fn point_in_polygon(u: &Point, poly: &[Point]) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > u.y) != (b.y > u.y) && u.x < (b.x - a.x) * (u.y - a.y) / (b.y - a.y) + a.x {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// A simple multi-type point pattern in a window. Marks are `0..p`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkedPointPattern {
    points: Vec<Point>,
    marks: Vec<usize>,
    window: Window,
    p: usize,
}

impl MarkedPointPattern {
    /// Validates locations, marks (0-based) and distinctness.
    pub fn new(points: Vec<Point>, marks: Vec<usize>, window: Window, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidModel("number of types must be >= 1".into()));
        }
        if points.len() != marks.len() {
            return Err(Error::InvalidModel("points and marks differ in length".into()));
        }
        for (u, &m) in points.iter().zip(&marks) {
            if m >= p {
                return Err(Error::MarkOutOfRange {
                    mark: m as i64 + 1,
                    p,
                });
            }
            if !window.contains(u) {
                return Err(Error::OutsideWindow { x: u.x, y: u.y });
            }
        }
        check_distinct(&points)?;
        Ok(MarkedPointPattern {
            points,
            marks,
            window,
            p,
        })
    }

    pub fn empty(window: Window, p: usize) -> Self {
        MarkedPointPattern {
            points: Vec::new(),
            marks: Vec::new(),
            window,
            p,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn marks(&self) -> &[usize] {
        &self.marks
    }

    pub fn point(&self, k: usize) -> (Point, usize) {
        (self.points[k], self.marks[k])
    }

    pub fn iter(&self) -> impl Iterator<Item = (Point, usize)> + '_ {
        self.points.iter().copied().zip(self.marks.iter().copied())
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn num_types(&self) -> usize {
        self.p
    }

    /// Number of points of each type.
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.p];
        for &m in &self.marks {
            c[m] += 1;
        }
        c
    }

    /// Locations of type `mark`.
    pub fn of_type(&self, mark: usize) -> Vec<Point> {
        self.iter().filter(|&(_, m)| m == mark).map(|(u, _)| u).collect()
    }

    /// Same points with the window replaced (points must lie inside it).
    pub fn with_window(&self, window: Window) -> Result<Self> {
        MarkedPointPattern::new(self.points.clone(), self.marks.clone(), window, self.p)
    }

    /// Reads `x,y,mark` rows; marks in the file are `1..=p`.
    pub fn read_csv(path: impl AsRef<Path>, p: usize, window: Window) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file, p, window)
    }

    pub fn from_csv_reader<R: std::io::Read>(reader: R, p: usize, window: Window) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let cols: Vec<&str> = headers.iter().collect();
        if cols != ["x", "y", "mark"] {
            return Err(Error::MalformedRow {
                row: 1,
                reason: format!("expected header x,y,mark, found {}", cols.join(",")),
            });
        }
        let (mut points, mut marks) = (Vec::new(), Vec::new());
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 2;
            let rec = rec?;
            if rec.len() != 3 {
                return Err(Error::MalformedRow {
                    row,
                    reason: format!("expected 3 fields, found {}", rec.len()),
                });
            }
            let num = |k: usize| -> Result<f64> {
                rec[k].parse::<f64>().map_err(|_| Error::MalformedRow {
                    row,
                    reason: format!("cannot parse {:?}", &rec[k]),
                })
            };
            let (x, y, m) = (num(0)?, num(1)?, num(2)?);
            if !(x.is_finite() && y.is_finite()) {
                return Err(Error::MalformedRow {
                    row,
                    reason: "non-finite coordinate".into(),
                });
            }
            if m.fract() != 0.0 || !m.is_finite() {
                return Err(Error::MalformedRow {
                    row,
                    reason: format!("mark {m} is not an integer"),
                });
            }
            let m = m as i64;
            if m < 1 || m as usize > p {
                return Err(Error::MarkOutOfRange { mark: m, p });
            }
            points.push(Point::new(x, y));
            marks.push(m as usize - 1);
        }
        MarkedPointPattern::new(points, marks, window, p)
    }

    /// Writes `x,y,mark` with round-trip exact number formatting.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        self.write_records(&mut w)?;
        w.flush().map_err(|e| Error::io("<csv>", e))
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        self.write_records(&mut w)?;
        let bytes = w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    fn write_records<W: std::io::Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        w.write_record(["x", "y", "mark"])?;
        for (u, m) in self.iter() {
            w.write_record([format!("{:?}", u.x), format!("{:?}", u.y), (m + 1).to_string()])?;
        }
        Ok(())
    }
}

/// Reads a pattern whose window sidecar sits next to the CSV as `<stem>.window.json`.
pub fn load_pattern(path: impl AsRef<Path>, p: usize) -> Result<MarkedPointPattern> {
    let path = path.as_ref();
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("pattern");
    let sidecar = path.with_file_name(format!("{stem}.window.json"));
    let window = Window::read_json(&sidecar)?;
    MarkedPointPattern::read_csv(path, p, window)
}

fn check_distinct(points: &[Point]) -> Result<()> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].x.total_cmp(&points[b].x));
    for (pos, &a) in order.iter().enumerate() {
        for &b in &order[pos + 1..] {
            if points[b].x - points[a].x > COINCIDENCE_TOL {
                break;
            }
            if points[a].dist(&points[b]) <= COINCIDENCE_TOL {
                return Err(Error::DuplicatePoint {
                    x: points[a].x,
                    y: points[a].y,
                    first: a.min(b) + 2,
                    second: a.max(b) + 2,
                });
            }
        }
    }
    Ok(())
}

/// A configuration that can enumerate its points near a location.
pub trait PointContext {
    /// Calls `f(v, mark)` for every point with `‖u − v‖ ≤ r`, restricted to
    /// `mark` when given. Points located at `u` itself are included; callers
    /// that need `y ∖ u` skip them.
    fn for_each_within<F: FnMut(Point, usize)>(&self, u: &Point, r: f64, mark: Option<usize>, f: F);
}

/// Uniform bucket grid shared by the static and dynamic indices.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BucketGrid {
    x0: f64,
    y0: f64,
    cell: f64,
    nx: usize,
    ny: usize,
}

impl BucketGrid {
    pub(crate) fn new(bounds: &Rect, cell: f64) -> Self {
        // Keep the grid bounded for tiny radii on large windows.
        let max_side = (bounds.width().max(bounds.height()) / 4096.0).max(f64::MIN_POSITIVE);
        let cell = if cell > 0.0 { cell.max(max_side) } else { bounds.width().max(bounds.height()) };
        let nx = ((bounds.width() / cell).floor() as usize + 1).max(1);
        let ny = ((bounds.height() / cell).floor() as usize + 1).max(1);
        BucketGrid {
            x0: bounds.x_min,
            y0: bounds.y_min,
            cell,
            nx,
            ny,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub(crate) fn cell(&self) -> f64 {
        self.cell
    }

    #[inline]
    fn coord(&self, v: f64, origin: f64, n: usize) -> usize {
        let c = ((v - origin) / self.cell).floor();
        if c <= 0.0 {
            0
        } else {
            (c as usize).min(n - 1)
        }
    }

    #[inline]
    pub(crate) fn bucket(&self, u: &Point) -> usize {
        self.coord(u.y, self.y0, self.ny) * self.nx + self.coord(u.x, self.x0, self.nx)
    }

    /// Buckets that may hold points within `r` of `u`.
    #[inline]
    pub(crate) fn for_each_bucket(&self, u: &Point, r: f64, mut f: impl FnMut(usize)) {
        let ix0 = self.coord(u.x - r, self.x0, self.nx);
        let ix1 = self.coord(u.x + r, self.x0, self.nx);
        let iy0 = self.coord(u.y - r, self.y0, self.ny);
        let iy1 = self.coord(u.y + r, self.y0, self.ny);
        for iy in iy0..=iy1 {
            for ix in ix0..=ix1 {
                f(iy * self.nx + ix);
            }
        }
    }
}

/// Static fixed-radius neighbor index over a pattern.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    grid: BucketGrid,
    cells: Vec<Vec<u32>>,
    points: Vec<Point>,
    marks: Vec<usize>,
}

impl NeighborIndex {
    /// Buckets of side `cell_side` (normally the largest query radius).
    pub fn new(pattern: &MarkedPointPattern, cell_side: f64) -> Self {
        Self::from_points(pattern.points(), pattern.marks(), pattern.window().rect(), cell_side)
    }

    pub fn from_points(points: &[Point], marks: &[usize], bounds: &Rect, cell_side: f64) -> Self {
        let grid = BucketGrid::new(bounds, cell_side);
        let mut cells = vec![Vec::new(); grid.len()];
        for (k, u) in points.iter().enumerate() {
            cells[grid.bucket(u)].push(k as u32);
        }
        NeighborIndex {
            grid,
            cells,
            points: points.to_vec(),
            marks: marks.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Calls `f(k)` for the index of every point within `r` of `u`, `u` itself included.
    #[inline]
    pub fn for_each_index_within<F: FnMut(usize)>(&self, u: &Point, r: f64, mut f: F) {
        let r2 = r * r;
        self.grid.for_each_bucket(u, r, |b| {
            for &k in &self.cells[b] {
                let k = k as usize;
                if self.points[k].dist2(u) <= r2 {
                    f(k);
                }
            }
        });
    }

    /// Indices of points `v ≠ u` with `‖u − v‖ ≤ r`, optionally of one mark, in increasing order.
    pub fn neighbors_within(&self, u: &Point, r: f64, mark: Option<usize>) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_index_within(u, r, |k| {
            if mark.is_none_or(|m| self.marks[k] == m)
                && self.points[k].dist2(u) > COINCIDENCE_TOL * COINCIDENCE_TOL
            {
                out.push(k);
            }
        });
        out.sort_unstable();
        out
    }
}

impl PointContext for NeighborIndex {
    #[inline]
    fn for_each_within<F: FnMut(Point, usize)>(&self, u: &Point, r: f64, mark: Option<usize>, mut f: F) {
        self.for_each_index_within(u, r, |k| {
            let m = self.marks[k];
            if mark.is_none_or(|want| want == m) {
                f(self.points[k], m);
            }
        });
    }
}

/// Free-function form of [`NeighborIndex::neighbors_within`].
pub fn neighbors_within(idx: &NeighborIndex, u: &Point, r: f64, mark: Option<usize>) -> Vec<usize> {
    idx.neighbors_within(u, r, mark)
}
