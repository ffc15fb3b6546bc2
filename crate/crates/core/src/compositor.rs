//! Layered compositing of frames and ground-truth flow, and the ownership
//! based occlusion map.
//!
//! Layers are indexed bottom to top; layer 0 is the background and always
//! has full coverage.

use crate::error::{Error, Result};
use crate::geometry::FlowField;
use crate::raster::{BinaryMap, Image, LayerMask};
use crate::warp::splat_taps;

/// Soft mask values above this count as coverage for ownership decisions.
pub const OWNERSHIP_THRESHOLD: f64 = 0.5;
/// A pixel is "pure" when its owning layer contributes at least `1 - MIXED_TOLERANCE`
/// of the composited value.
pub const MIXED_TOLERANCE: f64 = 0.01;
/// Largest disagreement (pixels, per component) between the ground-truth
/// flow and the owning layer's own motion that still counts as consistent.
pub const FLOW_TOLERANCE: f64 = 1e-3;

fn check_stack(count_a: usize, count_b: usize, width: usize, height: usize, dims: &[(usize, usize)]) -> Result<()> {
    if count_a == 0 || count_a != count_b {
        return Err(Error::InvalidParameter(format!(
            "layer lists must be non-empty and equal in length ({count_a} vs {count_b})"
        )));
    }
    for &(w, h) in dims {
        if (w, h) != (width, height) {
            return Err(Error::mismatch(format!("{width}x{height}"), format!("{w}x{h}")));
        }
    }
    Ok(())
}

fn check_background(mask: &LayerMask) -> Result<()> {
    if mask.data().iter().any(|&v| v != 1.0) {
        return Err(Error::InvalidParameter("background mask must be all ones".into()));
    }
    Ok(())
}

/// `I := (1 - M_k) I + M_k I_k` for `k = 1..K`, starting from `I = 0`.
pub fn composite_frame(images: &[Image], masks: &[LayerMask]) -> Result<Image> {
    let first = images
        .first()
        .ok_or_else(|| Error::InvalidParameter("at least one layer required".into()))?;
    let (w, h, c) = (first.width(), first.height(), first.channels());
    let dims: Vec<(usize, usize)> = images
        .iter()
        .map(|i| (i.width(), i.height()))
        .chain(masks.iter().map(|m| (m.width(), m.height())))
        .collect();
    check_stack(images.len(), masks.len(), w, h, &dims)?;
    if images.iter().any(|i| i.channels() != c) {
        return Err(Error::InvalidParameter("layer images differ in channel count".into()));
    }
    check_background(&masks[0])?;
    let mut out = Image::new(w, h, c);
    for (img, mask) in images.iter().zip(masks) {
        let src = img.data();
        for (p, &m) in mask.data().iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for ch in 0..c {
                let i = p * c + ch;
                let acc = &mut out.data_mut()[i];
                *acc = (1.0 - m) * *acc + m * src[i];
            }
        }
    }
    Ok(out)
}

/// Same recurrence for flows: `F := (1 - M_k) F + M_k F_k`.
pub fn composite_flow(layer_flows: &[FlowField], masks: &[LayerMask]) -> Result<FlowField> {
    let first = layer_flows
        .first()
        .ok_or_else(|| Error::InvalidParameter("at least one layer required".into()))?;
    let (w, h) = (first.width(), first.height());
    let dims: Vec<(usize, usize)> = layer_flows
        .iter()
        .map(|f| (f.width(), f.height()))
        .chain(masks.iter().map(|m| (m.width(), m.height())))
        .collect();
    check_stack(layer_flows.len(), masks.len(), w, h, &dims)?;
    check_background(&masks[0])?;
    let mut out = FlowField::zeros(w, h);
    for (flow, mask) in layer_flows.iter().zip(masks) {
        for row in 0..h {
            for col in 0..w {
                let m = mask.get(col, row);
                if m == 0.0 {
                    continue;
                }
                let [u, v] = out.get(col, row);
                let [fu, fv] = flow.get(col, row);
                out.set(col, row, [(1.0 - m) * u + m * fu, (1.0 - m) * v + m * fv]);
            }
        }
    }
    Ok(out)
}

/// Index of the topmost layer whose mask exceeds [`OWNERSHIP_THRESHOLD`] at
/// each pixel; 0 (background) where none does.
pub fn ownership_map(masks: &[LayerMask]) -> Vec<u8> {
    let n = masks.first().map_or(0, |m| m.data().len());
    (0..n)
        .map(|p| {
            masks
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .find(|(_, m)| m.data()[p] > OWNERSHIP_THRESHOLD)
                .map_or(0, |(k, _)| k as u8)
        })
        .collect()
}

/// Share of the composited value contributed by `layer` at pixel `p`.
fn layer_share(masks: &[LayerMask], layer: usize, p: usize) -> f64 {
    let own = if layer == 0 { 1.0 } else { masks[layer].data()[p] };
    masks[layer + 1..]
        .iter()
        .fold(own, |acc, m| acc * (1.0 - m.data()[p]))
}

/// Inputs for [`compute_occlusion_map`]; all fields share one canvas.
pub struct OcclusionInputs<'a> {
    /// Layer masks at frame 1 (unwarped, after blur).
    pub masks_at_1: &'a [LayerMask],
    /// Layer masks forward-warped to frame `n`.
    pub masks_at_n: &'a [LayerMask],
    /// Per-layer motion from frame 1 to frame `n`.
    pub layer_flows: &'a [FlowField],
    /// Composited ground-truth flow from frame 1 to frame `n`.
    pub flow: &'a FlowField,
    /// Splat holes of frame `n`, if tracked.
    pub holes: Option<&'a BinaryMap>,
}

/// Flags frame-1 pixels whose ground-truth displacement is not
/// photo-consistent with frame `n`.
///
/// A pixel `p` owned (see [`ownership_map`]) by layer `o` at frame 1 is
/// flagged when any of the following holds:
/// - the layer owning its flow target at frame `n` is not `o`, checked on
///   every bilinear tap of `p + F(p)`, or a tap leaves the canvas;
/// - a tap is a splat hole;
/// - `F(p)` differs from layer `o`'s own motion at `p`;
/// - `p` at frame 1, or a tap at frame `n`, is a mixed pixel where the
///   owner contributes less than `1 - MIXED_TOLERANCE` of the colour.
///
/// With binary masks the last rule never fires.
pub fn compute_occlusion_map(inputs: &OcclusionInputs<'_>) -> Result<BinaryMap> {
    let OcclusionInputs {
        masks_at_1,
        masks_at_n,
        layer_flows,
        flow,
        holes,
    } = *inputs;
    let (w, h) = (flow.width(), flow.height());
    let k = masks_at_1.len();
    if k == 0 || masks_at_n.len() != k || layer_flows.len() != k {
        return Err(Error::InvalidParameter("occlusion inputs disagree on layer count".into()));
    }
    let dims: Vec<(usize, usize)> = masks_at_1
        .iter()
        .chain(masks_at_n)
        .map(|m| (m.width(), m.height()))
        .chain(layer_flows.iter().map(|f| (f.width(), f.height())))
        .chain(holes.map(|b| (b.width(), b.height())))
        .collect();
    check_stack(k, k, w, h, &dims)?;

    let owner_1 = ownership_map(masks_at_1);
    let owner_n = ownership_map(masks_at_n);
    let pure_1 = |p: usize, o: usize| layer_share(masks_at_1, o, p) >= 1.0 - MIXED_TOLERANCE;
    let pure_n = |p: usize, o: usize| layer_share(masks_at_n, o, p) >= 1.0 - MIXED_TOLERANCE;

    let mut out = BinaryMap::zeros(w, h);
    for row in 0..h {
        for col in 0..w {
            let p = row * w + col;
            let o = owner_1[p] as usize;
            let [u, v] = flow.get(col, row);
            let [lu, lv] = layer_flows[o].get(col, row);
            let mut flagged = !pure_1(p, o) || (u - lu).abs() > FLOW_TOLERANCE || (v - lv).abs() > FLOW_TOLERANCE;
            if !flagged {
                let x = col as f64 + 0.5 + u;
                let y = row as f64 + 0.5 + v;
                let mut inside_weight = 0.0;
                for (tc, tr, wt) in splat_taps(x, y, w, h) {
                    inside_weight += wt;
                    let q = tr * w + tc;
                    if owner_n[q] as usize != o || !pure_n(q, o) || holes.is_some_and(|b| b.get(tc, tr)) {
                        flagged = true;
                        break;
                    }
                }
                // taps that fell off the canvas carry the missing weight
                if (1.0 - inside_weight).abs() > 1e-9 {
                    flagged = true;
                }
            }
            out.set(col, row, flagged);
        }
    }
    Ok(out)
}
