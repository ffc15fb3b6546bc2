//! Contact-sheet rendering of one dataset entry.

use crate::dataset::LoadedEntry;
use crate::flowviz::flow_to_rgb;
use crate::raster::{BinaryMap, Image};

const OVERLAY: [f64; 3] = [1.0, 0.0, 1.0];
const OVERLAY_WEIGHT: f64 = 0.6;

/// `frame` with occluded pixels tinted magenta.
pub fn occlusion_overlay(frame: &Image, occlusion: &BinaryMap) -> Image {
    Image::from_fn(frame.width(), frame.height(), 3, |c, r, ch| {
        let v = frame.get(c, r, ch);
        if occlusion.get(c, r) {
            (1.0 - OVERLAY_WEIGHT) * v + OVERLAY_WEIGHT * OVERLAY[ch]
        } else {
            v
        }
    })
}

/// Side-by-side strip `I1 | I2 | I3 | flow(F12) | occlusion(2) over I2`,
/// five canvases wide.
pub fn preview_strip(entry: &LoadedEntry) -> Image {
    let panels = [
        entry.i1.clone(),
        entry.i2.clone(),
        entry.i3.clone(),
        flow_to_rgb(&entry.f12),
        occlusion_overlay(&entry.i2, &entry.occ2),
    ];
    let (w, h) = (entry.i1.width(), entry.i1.height());
    Image::from_fn(w * panels.len(), h, 3, |c, r, ch| panels[c / w].get(c % w, r, ch))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlay_only_touches_occluded_pixels() {
        let frame = Image::filled(3, 2, 3, 0.5);
        let mut occ = BinaryMap::zeros(3, 2);
        occ.set(1, 1, true);
        let out = occlusion_overlay(&frame, &occ);
        assert_eq!(out.pixel(0, 0), frame.pixel(0, 0));
        assert!((out.get(1, 1, 0) - 0.8).abs() < 1e-12);
        assert!((out.get(1, 1, 1) - 0.2).abs() < 1e-12);
    }
}
