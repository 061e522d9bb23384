use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{GeometryError, Point, GEOMETRY_EPS};

/// Piecewise-linear palate trace: the upper chain of a convex hull.
///
/// Vertices are strictly increasing in x and the chain is concave-down.
#[derive(Debug, Clone, PartialEq)]
pub struct PalateModel {
    vertices: Vec<Point>,
}

/// z-component of (a - o) × (b - o); negative for a clockwise turn.
fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

impl PalateModel {
    /// Validates monotonicity and concavity (within [`GEOMETRY_EPS`]).
    pub fn new(vertices: Vec<Point>) -> Result<Self, GeometryError> {
        if vertices.len() < 2 || vertices.windows(2).any(|w| w[1].x <= w[0].x) {
            return Err(GeometryError::BadPalate);
        }
        if vertices.iter().any(|p| !p.is_finite()) {
            return Err(GeometryError::NonFinite("palate"));
        }
        for w in vertices.windows(3) {
            // middle vertex must be on or above the chord between its neighbours
            let t = (w[1].x - w[0].x) / (w[2].x - w[0].x);
            let chord = w[0].y + t * (w[2].y - w[0].y);
            if w[1].y < chord - GEOMETRY_EPS {
                return Err(GeometryError::BadPalate);
            }
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.vertices[0].x, self.vertices[self.vertices.len() - 1].x)
    }

    /// Height of the trace at `x`, or `None` outside its x-range.
    pub fn height_at(&self, x: f64) -> Option<f64> {
        let (lo, hi) = self.x_range();
        if x < lo || x > hi {
            return None;
        }
        let k = self.vertices.partition_point(|v| v.x < x);
        if k == 0 {
            return Some(self.vertices[0].y);
        }
        let (a, b) = (self.vertices[k - 1], self.vertices[k]);
        Some(a.y + (x - a.x) / (b.x - a.x) * (b.y - a.y))
    }

    /// Shifts the trace upward by `dy` millimetres.
    pub fn raised(&self, dy: f64) -> Self {
        Self { vertices: self.vertices.iter().map(|p| Point::new(p.x, p.y + dy)).collect() }
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self { vertices: self.vertices.iter().map(|p| Point::new(p.x + dx, p.y + dy)).collect() }
    }
}

/// Upper envelope of a point cloud via Andrew's monotone chain.
///
/// Collinear interior points are dropped, so the result is the minimal
/// vertex set of the upper hull.
pub fn fit_palate<I>(points: I) -> Result<PalateModel, GeometryError>
where
    I: IntoIterator,
    I::Item: Into<Point>,
{
    let mut pts: Vec<Point> = points.into_iter().map(Into::into).collect();
    if pts.iter().any(|p| !p.is_finite()) {
        return Err(GeometryError::NonFinite("tongue points"));
    }
    // partial_cmp so that -0.0 and 0.0 share an x; all values are finite here
    pts.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap().then(b.y.partial_cmp(&a.y).unwrap()));
    // only the highest point at each x can be on the upper chain
    pts.dedup_by(|later, kept| later.x == kept.x);
    if pts.len() < 2 {
        return Err(GeometryError::DegenerateCloud);
    }

    let mut hull: Vec<Point> = Vec::with_capacity(pts.len());
    for p in pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) >= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    Ok(PalateModel { vertices: hull })
}

/// Nearest point on the palate to `p`: returns (distance, x of nearest point).
///
/// Segments are scanned left to right and only a strictly smaller distance
/// replaces the incumbent, so ties resolve to the smallest x.
pub fn point_to_polyline(p: Point, palate: &PalateModel) -> (f64, f64) {
    let mut best = (f64::INFINITY, f64::NAN);
    for w in palate.vertices.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
        let q = Point::new(a.x + t * dx, a.y + t * dy);
        let d = p.distance(q);
        if d < best.0 {
            best = (d, q.x);
        }
    }
    best
}

pub fn write_palate_csv(path: impl AsRef<Path>, palate: &PalateModel) -> Result<(), GeometryError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "x,y")?;
    for v in &palate.vertices {
        writeln!(w, "{},{}", v.x, v.y)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_palate_csv(path: impl AsRef<Path>) -> Result<PalateModel, GeometryError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let perr = |line: usize, msg: String| GeometryError::Parse { path: path.display().to_string(), line, msg };
    let mut vertices = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (n == 0 && line == "x,y") {
            continue;
        }
        let (x, y) = line.split_once(',').ok_or_else(|| perr(n + 1, "expected x,y".into()))?;
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| perr(n + 1, format!("bad number {s:?}")));
        vertices.push(Point::new(parse(x)?, parse(y)?));
    }
    PalateModel::new(vertices)
}
