//! Consistency checks shared by the renderer tests, dataset validation and
//! the acceptance suite.

use crate::error::Result;
use crate::geometry::FlowField;
use crate::metrics::psnr;
use crate::raster::{BinaryMap, Image};
use crate::warp::forward_warp_average;

/// Photo-consistency PSNR at the minimum required by strict validation.
pub const PHOTO_CONSISTENCY_MIN_DB: f64 = 35.0;

/// Number of pixels where both frames agree on the owning layer but
/// `f13 != 2 * f12` bitwise.
pub fn doubling_violations(f12: &FlowField, f13: &FlowField, owners2: &[u8], owners3: &[u8]) -> usize {
    f12.data()
        .iter()
        .zip(f13.data())
        .zip(owners2.iter().zip(owners3))
        .filter(|((a, b), (o2, o3))| {
            o2 == o3 && ((2.0 * a[0]).to_bits() != b[0].to_bits() || (2.0 * a[1]).to_bits() != b[1].to_bits())
        })
        .count()
}

/// Target pixels of `forward_warp(i1, f12)` that are safe to compare with
/// frame 2: not a splat hole, not a frame-2 hole, and fed by no excluded
/// source.
///
/// Excluded sources are the occluded ones plus the one-pixel canvas border.
/// A target fed from the border ring is usually also fed from just beyond
/// the canvas, and those sources are missing from the cropped frame 1.
pub fn photo_consistency_mask(f12: &FlowField, occlusion: &BinaryMap, holes: &BinaryMap) -> Result<(BinaryMap, Image)> {
    let (w, h) = (f12.width(), f12.height());
    let mut excluded = occlusion.to_mask().to_image();
    for row in 0..h {
        for col in 0..w {
            if row == 0 || col == 0 || row + 1 == h || col + 1 == w {
                excluded.set(col, row, 0, 1.0);
            }
        }
    }
    let splat_occ = forward_warp_average(&excluded, f12)?;
    let mut valid = BinaryMap::zeros(w, h);
    for row in 0..h {
        for col in 0..w {
            let ok = !splat_occ.holes.get(col, row) && splat_occ.image.get(col, row, 0) == 0.0 && !holes.get(col, row);
            valid.set(col, row, ok);
        }
    }
    Ok((valid, splat_occ.image))
}

/// PSNR between frame 2 and frame 1 forward-warped by the ground-truth flow,
/// over pixels untouched by occlusion or holes. `None` when no pixel qualifies.
pub fn photo_consistency_psnr(
    i1: &Image,
    i2: &Image,
    f12: &FlowField,
    occlusion2: &BinaryMap,
    holes2: &BinaryMap,
) -> Result<Option<f64>> {
    let warped = forward_warp_average(i1, f12)?;
    let (valid, _) = photo_consistency_mask(f12, occlusion2, holes2)?;
    if valid.is_empty() {
        return Ok(None);
    }
    psnr(&warped.image, i2, Some(&valid)).map(Some)
}
