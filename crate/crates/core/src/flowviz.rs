//! Middlebury-style optical flow colour coding.
//!
//! Hue follows flow direction on a 55-entry wheel (segments RY 15, YG 6,
//! GC 4, CB 11, BM 13, MR 6); saturation grows with magnitude normalised by
//! the largest magnitude in the field. Zero flow is white.

use crate::geometry::FlowField;
use crate::raster::Image;

const SEGMENTS: [usize; 6] = [15, 6, 4, 11, 13, 6];

/// The wheel as RGB triples in `[0, 255]`.
pub fn color_wheel() -> Vec<[f64; 3]> {
    let [ry, yg, gc, cb, bm, mr] = SEGMENTS;
    let ramp = |i: usize, n: usize| (255.0 * i as f64 / n as f64).floor();
    let mut wheel = Vec::with_capacity(SEGMENTS.iter().sum());
    wheel.extend((0..ry).map(|i| [255.0, ramp(i, ry), 0.0]));
    wheel.extend((0..yg).map(|i| [255.0 - ramp(i, yg), 255.0, 0.0]));
    wheel.extend((0..gc).map(|i| [0.0, 255.0, ramp(i, gc)]));
    wheel.extend((0..cb).map(|i| [0.0, 255.0 - ramp(i, cb), 255.0]));
    wheel.extend((0..bm).map(|i| [ramp(i, bm), 0.0, 255.0]));
    wheel.extend((0..mr).map(|i| [255.0, 0.0, 255.0 - ramp(i, mr)]));
    wheel
}

/// Colour of an already-normalised flow vector (unit magnitude = full saturation).
pub fn flow_color(wheel: &[[f64; 3]], u: f64, v: f64) -> [f64; 3] {
    let n = wheel.len();
    let rad = u.hypot(v);
    let a = (-v).atan2(-u) / std::f64::consts::PI;
    let fk = (a + 1.0) / 2.0 * (n - 1) as f64;
    let k0 = fk.floor() as usize % n;
    let k1 = (k0 + 1) % n;
    let f = fk - fk.floor();
    let mut out = [0.0; 3];
    for (ch, o) in out.iter_mut().enumerate() {
        let col = ((1.0 - f) * wheel[k0][ch] + f * wheel[k1][ch]) / 255.0;
        *o = if rad <= 1.0 { 1.0 - rad * (1.0 - col) } else { col * 0.75 };
    }
    out
}

/// Renders `flow` normalised by its own maximum magnitude.
pub fn flow_to_rgb(flow: &FlowField) -> Image {
    let wheel = color_wheel();
    let max = flow.max_magnitude();
    let scale = if max > 0.0 { 1.0 / max } else { 0.0 };
    let mut img = Image::new(flow.width(), flow.height(), 3);
    for row in 0..flow.height() {
        for col in 0..flow.width() {
            let [u, v] = flow.get(col, row);
            let c = flow_color(&wheel, u * scale, v * scale);
            for (ch, val) in c.iter().enumerate() {
                img.set(col, row, ch, *val);
            }
        }
    }
    img
}
