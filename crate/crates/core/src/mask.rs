//! Random convex polygon layer masks, their rasterisation, and the
//! flow-adaptive blur strength.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{FlowField, Interval};
use crate::metrics::Sum;
use crate::raster::LayerMask;

const MAX_SAMPLE_ATTEMPTS: usize = 16;

/// Convex polygon with vertices ordered so that the shoelace area is
/// positive (counter-clockwise in x-right/y-up terms).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct Polygon {
    vertices: Vec<[f64; 2]>,
}

#[inline]
fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

impl Polygon {
    /// Accepts an already-convex, positively oriented vertex list.
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidPolygon(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPolygon("non-finite vertex".into()));
        }
        let n = vertices.len();
        for i in 0..n {
            let turn = cross(vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
            if turn <= 0.0 {
                return Err(Error::InvalidPolygon(format!(
                    "not strictly convex with positive orientation at vertex {}",
                    (i + 1) % n
                )));
            }
        }
        Ok(Self { vertices })
    }

    /// Convex hull of `points` (Andrew's monotone chain); collinear points dropped.
    pub fn hull(points: &[[f64; 2]]) -> Result<Self> {
        let mut pts: Vec<[f64; 2]> = points.to_vec();
        pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        pts.dedup();
        if pts.len() < 3 {
            return Err(Error::InvalidPolygon("fewer than 3 distinct points".into()));
        }
        let mut lower: Vec<[f64; 2]> = Vec::new();
        for &p in &pts {
            while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
                lower.pop();
            }
            lower.push(p);
        }
        let mut upper: Vec<[f64; 2]> = Vec::new();
        for &p in pts.iter().rev() {
            while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
                upper.pop();
            }
            upper.push(p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        Self::new(lower)
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        0.5 * (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                a[0] * b[1] - b[0] * a[1]
            })
            .sum::<f64>()
    }

    pub fn centroid(&self) -> [f64; 2] {
        let n = self.vertices.len() as f64;
        let (sx, sy) = self
            .vertices
            .iter()
            .fold((0.0, 0.0), |(x, y), v| (x + v[0], y + v[1]));
        [sx / n, sy / n]
    }

    /// Distance from `p` to the nearest edge line.
    pub fn inradius_about(&self, p: [f64; 2]) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                cross(a, b, p) / (b[0] - a[0]).hypot(b[1] - a[1])
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(|v| [v[0] + dx, v[1] + dy]).collect(),
        }
    }

    /// Inside test with the top-left fill convention: a point exactly on an
    /// edge belongs to the polygon only if that edge is a left edge or a
    /// horizontal top edge (smaller y).
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let n = self.vertices.len();
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let e = cross(a, b, [x, y]);
            if e < 0.0 {
                return false;
            }
            if e == 0.0 {
                let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
                let top_left = dy < 0.0 || (dy == 0.0 && dx > 0.0);
                if !top_left {
                    return false;
                }
            }
        }
        true
    }
}

impl TryFrom<Vec<[f64; 2]>> for Polygon {
    type Error = Error;

    fn try_from(v: Vec<[f64; 2]>) -> Result<Self> {
        Polygon::new(v)
    }
}

impl From<Polygon> for Vec<[f64; 2]> {
    fn from(p: Polygon) -> Self {
        p.vertices
    }
}

/// Inclusive integer range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SidesRange {
    pub low: u32,
    pub high: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskParams {
    pub sides: SidesRange,
    /// Vertex radius as a fraction of the smaller canvas dimension.
    pub radius: Interval,
    pub hole_probability: f64,
    /// Hole vertex radius as a fraction of the outer polygon's inradius.
    pub hole_scale: Interval,
}

impl Default for MaskParams {
    fn default() -> Self {
        Self {
            sides: SidesRange { low: 3, high: 12 },
            radius: Interval::new(0.05, 0.25),
            hole_probability: 0.3,
            hole_scale: Interval::new(0.2, 0.5),
        }
    }
}

impl MaskParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("mask params: {m}")));
        if self.sides.low < 3 || self.sides.low > self.sides.high {
            return bad("sides must satisfy 3 <= low <= high");
        }
        if !self.radius.is_valid() || self.radius.low <= 0.0 || self.radius.high > 0.5 {
            return bad("radius must lie within (0, 0.5]");
        }
        if !(0.0..=1.0).contains(&self.hole_probability) {
            return bad("hole_probability must lie in [0, 1]");
        }
        if !self.hole_scale.is_valid() || self.hole_scale.low <= 0.0 || self.hole_scale.high >= 1.0 {
            return bad("hole_scale must lie within (0, 1)");
        }
        Ok(())
    }
}

fn star_polygon<R: Rng + ?Sized>(
    rng: &mut R,
    center: [f64; 2],
    sides: SidesRange,
    mut radius: impl FnMut(&mut R) -> f64,
) -> Result<Polygon> {
    let n = rng.random_range(sides.low..=sides.high) as usize;
    let mut angles: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * TAU).collect();
    angles.sort_by(f64::total_cmp);
    let points: Vec<[f64; 2]> = angles
        .iter()
        .map(|&a| {
            let r = radius(rng);
            let (s, c) = a.sin_cos();
            [center[0] + r * c, center[1] + r * s]
        })
        .collect();
    Polygon::hull(&points)
}

/// Random convex polygon: `n` sorted random angles about a random centre in
/// the canvas, per-vertex radii from `params.radius`, convex hull of the
/// resulting points.
pub fn sample_convex_polygon<R: Rng + ?Sized>(
    rng: &mut R,
    params: &MaskParams,
    width: usize,
    height: usize,
) -> Result<Polygon> {
    params.validate()?;
    let scale = width.min(height) as f64;
    for _ in 0..MAX_SAMPLE_ATTEMPTS {
        let center = [rng.random::<f64>() * width as f64, rng.random::<f64>() * height as f64];
        if let Ok(p) = star_polygon(rng, center, params.sides, |r| params.radius.sample(r) * scale) {
            return Ok(p);
        }
    }
    Err(Error::DegeneratePolygon {
        attempts: MAX_SAMPLE_ATTEMPTS,
    })
}

/// Smaller polygon nested strictly inside `outer`, centred on its vertex
/// centroid with radii a `hole_scale` fraction of the inradius there.
pub fn sample_hole<R: Rng + ?Sized>(rng: &mut R, params: &MaskParams, outer: &Polygon) -> Result<Polygon> {
    params.validate()?;
    let center = outer.centroid();
    let inradius = outer.inradius_about(center);
    for _ in 0..MAX_SAMPLE_ATTEMPTS {
        if let Ok(p) = star_polygon(rng, center, params.sides, |r| params.hole_scale.sample(r) * inradius) {
            return Ok(p);
        }
    }
    Err(Error::DegeneratePolygon {
        attempts: MAX_SAMPLE_ATTEMPTS,
    })
}

/// Scanline fill of every pixel whose centre lies inside `poly`.
///
/// Span interiors are filled directly; the few columns at each span end are
/// decided by [`Polygon::contains`] so the result is identical to a per-pixel
/// inside test.
pub fn rasterize_polygon(poly: &Polygon, width: usize, height: usize) -> LayerMask {
    let mut mask = LayerMask::zeros(width, height);
    fill_polygon(&mut mask, poly, 1.0);
    mask
}

fn fill_polygon(mask: &mut LayerMask, poly: &Polygon, value: f64) {
    let (width, height) = (mask.width(), mask.height());
    if width == 0 || height == 0 {
        return;
    }
    let verts = poly.vertices();
    let n = verts.len();
    let (ymin, ymax) = verts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v[1]), hi.max(v[1])));
    let row_lo = ((ymin - 0.5).floor().max(0.0)) as usize;
    let row_hi = ((ymax - 0.5).ceil().min(height as f64 - 1.0)).max(-1.0);
    if row_hi < 0.0 || row_lo >= height {
        return;
    }
    let last_col = width as isize - 1;
    for row in row_lo..=row_hi as usize {
        let yc = row as f64 + 0.5;
        let mut xmin = f64::INFINITY;
        let mut xmax = f64::NEG_INFINITY;
        let mut on_horizontal_edge = false;
        for i in 0..n {
            let a = verts[i];
            let b = verts[(i + 1) % n];
            if a[1] == b[1] {
                if a[1] == yc {
                    on_horizontal_edge = true;
                    xmin = xmin.min(a[0].min(b[0]));
                    xmax = xmax.max(a[0].max(b[0]));
                }
                continue;
            }
            let (lo, hi) = if a[1] < b[1] { (a, b) } else { (b, a) };
            if yc < lo[1] || yc > hi[1] {
                continue;
            }
            let t = (yc - lo[1]) / (hi[1] - lo[1]);
            let x = lo[0] + t * (hi[0] - lo[0]);
            xmin = xmin.min(x);
            xmax = xmax.max(x);
        }
        if xmin > xmax {
            continue;
        }
        let c_lo = ((xmin - 0.5).floor() as isize - 1).max(0);
        let c_hi = ((xmax - 0.5).ceil() as isize + 1).min(last_col);
        if c_lo > c_hi {
            continue;
        }
        // Columns [fill_lo, fill_hi] have centres more than a pixel inside the span.
        let (fill_lo, fill_hi) = if on_horizontal_edge {
            (c_hi + 1, c_hi)
        } else {
            (c_lo + 3, c_hi - 3)
        };
        for col in c_lo..=c_hi {
            let inside = if col >= fill_lo && col <= fill_hi {
                true
            } else {
                poly.contains(col as f64 + 0.5, yc)
            };
            if inside {
                mask.set(col as usize, row, value);
            }
        }
    }
}

/// Clears the pixels of `hole` (same inside rule as rasterisation).
pub fn punch_hole(mask: &LayerMask, hole: &Polygon) -> LayerMask {
    let mut out = mask.clone();
    fill_polygon(&mut out, hole, 0.0);
    out
}

/// Gaussian blur strength from the mean flow magnitude over the mask:
/// `ln(sum(M |F|) / (sum(M) alpha))`, clamped below at zero. An empty mask
/// needs no blur and yields zero.
pub fn blur_sigma(mask: &LayerMask, flow: &FlowField, alpha: f64) -> Result<f64> {
    if (mask.width(), mask.height()) != (flow.width(), flow.height()) {
        return Err(Error::mismatch(
            format!("{}x{}", flow.width(), flow.height()),
            format!("{}x{}", mask.width(), mask.height()),
        ));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    let (mut weighted, mut coverage) = (Sum::default(), Sum::default());
    for (&m, [u, v]) in mask.data().iter().zip(flow.data()) {
        if m == 0.0 {
            continue;
        }
        weighted.add(m * u.hypot(*v));
        coverage.add(m);
    }
    let (weighted, coverage) = (weighted.value(), coverage.value());
    if coverage == 0.0 {
        return Ok(0.0);
    }
    let sigma = (weighted / coverage / alpha).ln();
    Ok(if sigma > 0.0 { sigma } else { 0.0 })
}
