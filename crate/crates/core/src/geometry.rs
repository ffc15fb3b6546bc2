//! Homography motion models and the dense flow fields they induce.
//!
//! Pixel `(col, row)` sits at continuous coordinate `(col + 0.5, row + 0.5)`.
//! Flow is measured in pixels with `+u` rightward and `+v` downward.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MIN_DET: f64 = 1e-8;
const MIN_DENOMINATOR: f64 = 1e-8;
const MAX_SAMPLE_ATTEMPTS: usize = 16;
/// Largest magnitude allowed for either projective entry.
pub const MAX_PERSPECTIVE: f64 = 0.01;

/// Closed real interval `[low, high]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub const fn new(low: f64, high: f64) -> Self {
        Self { low, high }
    }

    pub const fn point(value: f64) -> Self {
        Self::new(value, value)
    }

    /// Symmetric interval `[-half_width, half_width]`.
    pub const fn symmetric(half_width: f64) -> Self {
        Self::new(-half_width, half_width)
    }

    pub fn is_valid(&self) -> bool {
        self.low.is_finite() && self.high.is_finite() && self.low <= self.high
    }

    pub fn contains(&self, v: f64) -> bool {
        self.low <= v && v <= self.high
    }

    /// Uniform draw. Always consumes exactly one `f64` from `rng`, so a
    /// collapsed interval returns `low` without perturbing later draws.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.low + (self.high - self.low) * u
    }

    /// Same centre, half the width.
    pub fn halved(&self) -> Self {
        let mid = 0.5 * (self.low + self.high);
        let half = 0.25 * (self.high - self.low);
        Self::new(mid - half, mid + half)
    }
}

/// Sampling ranges for the four motion factors of a layer homography.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionRanges {
    /// Isotropic scale factor.
    pub scale: Interval,
    /// Rotation in degrees.
    pub rotation_deg: Interval,
    /// Horizontal translation as a fraction of the canvas width.
    pub translation_x: Interval,
    /// Vertical translation as a fraction of the canvas height.
    pub translation_y: Interval,
    /// Range shared by both projective entries.
    pub perspective: Interval,
}

impl MotionRanges {
    pub fn identity() -> Self {
        Self {
            scale: Interval::point(1.0),
            rotation_deg: Interval::point(0.0),
            translation_x: Interval::point(0.0),
            translation_y: Interval::point(0.0),
            perspective: Interval::point(0.0),
        }
    }

    /// Default motion for upper (object) layers.
    pub fn upper_default() -> Self {
        Self {
            scale: Interval::new(0.85, 1.15),
            rotation_deg: Interval::symmetric(12.0),
            translation_x: Interval::symmetric(0.06),
            translation_y: Interval::symmetric(0.06),
            perspective: Interval::symmetric(0.0005),
        }
    }

    /// Default motion for the background: half-width versions of the upper ranges.
    pub fn background_default() -> Self {
        Self::upper_default().halved()
    }

    pub fn halved(&self) -> Self {
        Self {
            scale: self.scale.halved(),
            rotation_deg: self.rotation_deg.halved(),
            translation_x: self.translation_x.halved(),
            translation_y: self.translation_y.halved(),
            perspective: self.perspective.halved(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("scale", self.scale),
            ("rotation_deg", self.rotation_deg),
            ("translation_x", self.translation_x),
            ("translation_y", self.translation_y),
            ("perspective", self.perspective),
        ];
        for (name, iv) in named {
            if !iv.is_valid() {
                return Err(Error::InvalidParameter(format!(
                    "motion range {name} must satisfy low <= high, got [{}, {}]",
                    iv.low, iv.high
                )));
            }
        }
        if self.scale.low <= 0.0 {
            return Err(Error::InvalidParameter("scale range must be positive".into()));
        }
        if self.perspective.low.abs() > MAX_PERSPECTIVE || self.perspective.high.abs() > MAX_PERSPECTIVE {
            return Err(Error::InvalidParameter(format!(
                "perspective magnitudes must not exceed {MAX_PERSPECTIVE}"
            )));
        }
        Ok(())
    }
}

impl Default for MotionRanges {
    fn default() -> Self {
        Self::upper_default()
    }
}

/// 3x3 projective transform, row-major, normalised so that `m[2][2] == 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 3]; 3]", into = "[[f64; 3]; 3]")]
pub struct Homography {
    m: [[f64; 3]; 3],
}

impl Homography {
    pub const IDENTITY: Homography = Homography {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    /// Normalises `m` by its bottom-right entry and checks invertibility.
    pub fn new(m: [[f64; 3]; 3]) -> Result<Self> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("homography entries must be finite".into()));
        }
        let s = m[2][2];
        if s.abs() < MIN_DENOMINATOR {
            return Err(Error::DegenerateHomography { attempts: 1 });
        }
        let mut n = m;
        if s != 1.0 {
            for v in n.iter_mut().flatten() {
                *v /= s;
            }
        }
        n[2][2] = 1.0;
        let h = Homography { m: n };
        if h.determinant().abs() <= MIN_DET {
            return Err(Error::DegenerateHomography { attempts: 1 });
        }
        Ok(h)
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Homography {
            m: [[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]],
        }
    }

    /// Isotropic scale about the origin.
    pub fn scaling(s: f64) -> Result<Self> {
        Self::new([[s, 0.0, 0.0], [0.0, s, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn rotation_deg(deg: f64) -> Self {
        let (sin, cos) = deg.to_radians().sin_cos();
        Homography {
            m: [[cos, -sin, 0.0], [sin, cos, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn perspective(p0: f64, p1: f64) -> Self {
        Homography {
            m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [p0, p1, 1.0]],
        }
    }

    pub fn matrix(&self) -> &[[f64; 3]; 3] {
        &self.m
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    /// Matrix product `self * rhs` (apply `rhs` first), renormalised.
    pub fn compose(&self, rhs: &Homography) -> Result<Homography> {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.m[i][k] * rhs.m[k][j]).sum();
            }
        }
        Homography::new(out)
    }

    /// Maps `(x, y)`; `None` when the projective denominator vanishes.
    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let m = &self.m;
        let w = m[2][0] * x + m[2][1] * y + m[2][2];
        if w.abs() < MIN_DENOMINATOR {
            return None;
        }
        let px = m[0][0] * x + m[0][1] * y + m[0][2];
        let py = m[1][0] * x + m[1][1] * y + m[1][2];
        Some((px / w, py / w))
    }

    /// The same motion expressed in a frame whose origin sits `(dx, dy)`
    /// up-left of the current one, i.e. `T(dx,dy) * H * T(-dx,-dy)`.
    pub fn shifted(&self, dx: f64, dy: f64) -> Result<Homography> {
        Homography::translation(dx, dy)
            .compose(self)?
            .compose(&Homography::translation(-dx, -dy))
    }
}

impl TryFrom<[[f64; 3]; 3]> for Homography {
    type Error = Error;

    fn try_from(m: [[f64; 3]; 3]) -> Result<Self> {
        Homography::new(m)
    }
}

impl From<Homography> for [[f64; 3]; 3] {
    fn from(h: Homography) -> Self {
        h.m
    }
}

/// Samples `T * R * S * P` about the canvas centre.
///
/// Draw order is fixed (scale, rotation, tx, ty, p0, p1) so a given rng
/// state always yields the same matrix.
pub fn sample_homography<R: Rng + ?Sized>(
    rng: &mut R,
    ranges: &MotionRanges,
    width: usize,
    height: usize,
) -> Result<Homography> {
    ranges.validate()?;
    let (cx, cy) = (0.5 * width as f64, 0.5 * height as f64);
    for _ in 0..MAX_SAMPLE_ATTEMPTS {
        let s = ranges.scale.sample(rng);
        let deg = ranges.rotation_deg.sample(rng);
        let tx = ranges.translation_x.sample(rng) * width as f64;
        let ty = ranges.translation_y.sample(rng) * height as f64;
        let p0 = ranges.perspective.sample(rng);
        let p1 = ranges.perspective.sample(rng);
        let composed = Homography::translation(tx, ty)
            .compose(&Homography::rotation_deg(deg))
            .and_then(|h| h.compose(&Homography::scaling(s)?))
            .and_then(|h| h.compose(&Homography::perspective(p0, p1)))
            .and_then(|h| h.shifted(cx, cy));
        if let Ok(h) = composed {
            return Ok(h);
        }
    }
    Err(Error::DegenerateHomography {
        attempts: MAX_SAMPLE_ATTEMPTS,
    })
}

/// Dense per-pixel `(u, v)` displacement field.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    data: Vec<[f64; 2]>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self::constant(width, height, [0.0, 0.0])
    }

    pub fn constant(width: usize, height: usize, uv: [f64; 2]) -> Self {
        Self {
            width,
            height,
            data: vec![uv; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<[f64; 2]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter("flow field must be at least 1x1".into()));
        }
        if data.len() != width * height {
            return Err(Error::mismatch(width * height, data.len()));
        }
        if data.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("flow components must be finite".into()));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f64; 2]) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(col, row));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[[f64; 2]] {
        &self.data
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> [f64; 2] {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, uv: [f64; 2]) {
        self.data[row * self.width + col] = uv;
    }

    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> FlowField {
        assert!(x0 + width <= self.width && y0 + height <= self.height);
        FlowField::from_fn(width, height, |c, r| self.get(x0 + c, y0 + r))
    }

    pub fn mean_magnitude(&self) -> f64 {
        self.data.iter().map(|[u, v]| u.hypot(*v)).sum::<f64>() / self.data.len() as f64
    }

    pub fn max_magnitude(&self) -> f64 {
        self.data.iter().map(|[u, v]| u.hypot(*v)).fold(0.0, f64::max)
    }

    pub fn negated(&self) -> FlowField {
        FlowField {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|[u, v]| [-u, -v]).collect(),
        }
    }
}

/// `f(p) = H x(p) - x(p)` at every pixel centre.
pub fn homography_to_flow(h: &Homography, width: usize, height: usize) -> Result<FlowField> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidParameter("flow canvas must be at least 1x1".into()));
    }
    let mut data = Vec::with_capacity(width * height);
    for row in 0..height {
        let y = row as f64 + 0.5;
        for col in 0..width {
            let x = col as f64 + 0.5;
            let (tx, ty) = h
                .apply(x, y)
                .ok_or(Error::DegenerateProjection { col, row })?;
            data.push([tx - x, ty - y]);
        }
    }
    Ok(FlowField { width, height, data })
}

/// Linear-motion extrapolation to the third frame: every component times two.
pub fn double_flow(f12: &FlowField) -> FlowField {
    FlowField {
        width: f12.width,
        height: f12.height,
        data: f12.data.iter().map(|[u, v]| [2.0 * u, 2.0 * v]).collect(),
    }
}
