//! Forward warping by average splatting, plus bilinear backward warping.

use crate::error::{Error, Result};
use crate::geometry::FlowField;
use crate::raster::{BinaryMap, Image, LayerMask};

/// Target pixels with accumulated weight below this are holes.
pub const HOLE_EPSILON: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct WarpResult {
    pub image: Image,
    /// Accumulated bilinear splat weight per target pixel.
    pub weight: Vec<f64>,
    pub holes: BinaryMap,
}

fn check_dims(src: &Image, flow: &FlowField) -> Result<()> {
    if (src.width(), src.height()) != (flow.width(), flow.height()) {
        return Err(Error::mismatch(
            format!("{}x{}", src.width(), src.height()),
            format!("{}x{}", flow.width(), flow.height()),
        ));
    }
    Ok(())
}

/// `floor` for finite values well inside the `i64` range, without the libm call.
#[inline]
fn floor_i64(t: f64) -> i64 {
    let i = t as i64;
    if (i as f64) > t {
        i - 1
    } else {
        i
    }
}

/// Bilinear footprint of a continuous position on integer pixel centres:
/// up to four `(col, row, weight)` taps, off-canvas taps omitted.
#[inline]
pub fn splat_taps(x: f64, y: f64, width: usize, height: usize) -> impl Iterator<Item = (usize, usize, f64)> {
    // index space: centre of pixel c sits at c
    let tx = x - 0.5;
    let ty = y - 0.5;
    let x0 = floor_i64(tx);
    let y0 = floor_i64(ty);
    let ax = tx - x0 as f64;
    let ay = ty - y0 as f64;
    let (w, h) = (width as i64, height as i64);
    [
        (x0, y0, (1.0 - ax) * (1.0 - ay)),
        (x0 + 1, y0, ax * (1.0 - ay)),
        (x0, y0 + 1, (1.0 - ax) * ay),
        (x0 + 1, y0 + 1, ax * ay),
    ]
    .into_iter()
    .filter(move |&(c, r, wt)| wt > 0.0 && c >= 0 && r >= 0 && c < w && r < h)
    .map(|(c, r, wt)| (c as usize, r as usize, wt))
}

/// Average splatting: every source pixel scatters `value * w` and `w` onto
/// the four integer centres around its displaced position; each target is
/// the accumulated value over the accumulated weight. Targets below
/// [`HOLE_EPSILON`] are holes and hold zero.
///
/// Sources are visited in raster order, so accumulation order per target is
/// fixed and the output bitwise reproducible.
pub fn forward_warp_average(src: &Image, flow: &FlowField) -> Result<WarpResult> {
    check_dims(src, flow)?;
    let (w, h, c) = (src.width(), src.height(), src.channels());
    let mut acc = vec![0.0; w * h * c];
    let mut weight = vec![0.0; w * h];
    let data = src.data();
    let vectors = flow.data();
    for row in 0..h {
        for col in 0..w {
            let p = row * w + col;
            let [u, v] = vectors[p];
            let x = col as f64 + 0.5 + u;
            let y = row as f64 + 0.5 + v;
            let px = &data[p * c..(p + 1) * c];
            for (tc, tr, wt) in splat_taps(x, y, w, h) {
                let t = tr * w + tc;
                weight[t] += wt;
                for (a, s) in acc[t * c..(t + 1) * c].iter_mut().zip(px) {
                    *a += wt * s;
                }
            }
        }
    }
    let mut holes = BinaryMap::zeros(w, h);
    for t in 0..w * h {
        if weight[t] < HOLE_EPSILON {
            holes.set(t % w, t / w, true);
            acc[t * c..(t + 1) * c].iter_mut().for_each(|v| *v = 0.0);
        } else {
            let inv = weight[t];
            acc[t * c..(t + 1) * c].iter_mut().for_each(|v| *v /= inv);
        }
    }
    Ok(WarpResult {
        image: Image::from_vec(w, h, c, acc)?,
        weight,
        holes,
    })
}

/// Warps a mask through the same kernel; values clamped back into `[0, 1]`.
pub fn forward_warp_mask(mask: &LayerMask, flow: &FlowField) -> Result<(LayerMask, WarpResult)> {
    let res = forward_warp_average(&mask.to_image(), flow)?;
    Ok((LayerMask::from_image_clamped(&res.image), res))
}

/// Bilinear sample at continuous position `(x, y)`, clamping to the edge.
pub fn sample_bilinear(src: &Image, x: f64, y: f64, ch: usize) -> f64 {
    let mut px = [0.0; 3];
    sample_bilinear_pixel(src, x, y, &mut px[..src.channels()]);
    px[ch]
}

/// All channels of [`sample_bilinear`] at once; `out.len()` must equal the
/// channel count.
pub fn sample_bilinear_pixel(src: &Image, x: f64, y: f64, out: &mut [f64]) {
    let (w, h) = (src.width(), src.height());
    let tx = (x - 0.5).clamp(0.0, (w - 1) as f64);
    let ty = (y - 0.5).clamp(0.0, (h - 1) as f64);
    let x0 = tx as usize;
    let y0 = ty as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let ax = tx - x0 as f64;
    let ay = ty - y0 as f64;
    let (p00, p10, p01, p11) = (src.pixel(x0, y0), src.pixel(x1, y0), src.pixel(x0, y1), src.pixel(x1, y1));
    for (ch, o) in out.iter_mut().enumerate() {
        let top = (1.0 - ax) * p00[ch] + ax * p10[ch];
        let bottom = (1.0 - ax) * p01[ch] + ax * p11[ch];
        *o = (1.0 - ay) * top + ay * bottom;
    }
}

/// `out(p) = src(x(p) + f(p))`, bilinear, edge-clamped.
pub fn backward_warp_bilinear(src: &Image, flow: &FlowField) -> Result<Image> {
    check_dims(src, flow)?;
    let (w, c) = (src.width(), src.channels());
    let mut out = Image::new(w, src.height(), c);
    for (p, px) in out.data_mut().chunks_exact_mut(c).enumerate() {
        let [u, v] = flow.data()[p];
        sample_bilinear_pixel(src, (p % w) as f64 + 0.5 + u, (p / w) as f64 + 0.5 + v, px);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_flow_is_identity() {
        let img = Image::from_fn(7, 5, 3, |c, r, ch| ((c * 3 + r * 5 + ch) % 11) as f64 / 10.0);
        let res = forward_warp_average(&img, &FlowField::zeros(7, 5)).unwrap();
        assert_eq!(res.image, img);
        assert!(res.weight.iter().all(|&w| w == 1.0));
        assert!(res.holes.is_empty());
    }

    #[test]
    fn integer_shift_moves_pixel_and_leaves_hole() {
        let mut img = Image::new(4, 1, 1);
        img.set(1, 0, 0, 0.7);
        let res = forward_warp_average(&img, &FlowField::constant(4, 1, [1.0, 0.0])).unwrap();
        assert_eq!(res.image.get(2, 0, 0), 0.7);
        assert!(res.holes.get(0, 0));
        assert_eq!(res.image.get(0, 0, 0), 0.0);
        assert_eq!(res.weight[3], 1.0);
    }

    #[test]
    fn half_pixel_shift_straddles_two_targets() {
        // The isolated pixel moves by half a pixel; its neighbour leaves the canvas.
        let img = Image::from_vec(2, 1, 1, vec![0.6, 0.3]).unwrap();
        let flow = FlowField::from_vec(2, 1, vec![[0.5, 0.0], [10.0, 0.0]]).unwrap();
        let res = forward_warp_average(&img, &flow).unwrap();
        assert_eq!(res.image.get(0, 0, 0), 0.6);
        assert_eq!(res.image.get(1, 0, 0), 0.6);
        assert_eq!(res.weight, vec![0.5, 0.5]);
    }

    #[test]
    fn colliding_sources_average() {
        let img = Image::from_vec(3, 1, 1, vec![0.2, 0.9, 0.0]).unwrap();
        let flow = FlowField::from_vec(3, 1, vec![[2.0, 0.0], [1.0, 0.0], [5.0, 0.0]]).unwrap();
        let res = forward_warp_average(&img, &flow).unwrap();
        assert!((res.image.get(2, 0, 0) - 0.55).abs() < 1e-15);
        assert!(res.holes.get(0, 0) && res.holes.get(1, 0));
    }

    #[test]
    fn dimension_mismatch_errors() {
        let img = Image::new(4, 4, 1);
        assert!(forward_warp_average(&img, &FlowField::zeros(4, 3)).is_err());
        assert!(backward_warp_bilinear(&img, &FlowField::zeros(3, 4)).is_err());
    }

    #[test]
    fn backward_shift_on_ramp() {
        let img = Image::from_fn(8, 3, 1, |c, _, _| c as f64 / 8.0);
        let out = backward_warp_bilinear(&img, &FlowField::constant(8, 3, [1.0, 0.0])).unwrap();
        for row in 0..3 {
            for col in 0..7 {
                assert_eq!(out.get(col, row, 0), img.get(col + 1, row, 0));
            }
            assert_eq!(out.get(7, row, 0), img.get(7, row, 0));
        }
        assert_eq!(backward_warp_bilinear(&img, &FlowField::zeros(8, 3)).unwrap(), img);
    }

    #[test]
    fn backward_inverts_forward_for_integer_flow() {
        let img = Image::from_fn(10, 9, 3, |c, r, ch| ((c * 7 + r * 13 + ch * 5) % 17) as f64 / 16.0);
        let flow = FlowField::constant(10, 9, [2.0, -1.0]);
        let fw = forward_warp_average(&img, &flow).unwrap();
        let back = backward_warp_bilinear(&fw.image, &flow).unwrap();
        for row in 1..9 {
            for col in 0..8 {
                for ch in 0..3 {
                    assert_eq!(back.get(col, row, ch), img.get(col, row, ch));
                }
            }
        }
        // and the negated flow gathers the forward result back from the shifted side
        let again = backward_warp_bilinear(&img, &flow.negated()).unwrap();
        for row in 0..8 {
            for col in 2..10 {
                assert_eq!(again.get(col, row, 0), fw.image.get(col, row, 0));
            }
        }
    }

    fn backward_oracle(src: &Image, flow: &FlowField, col: usize, row: usize, ch: usize) -> f64 {
        let [u, v] = flow.get(col, row);
        let (w, h) = (src.width() as f64, src.height() as f64);
        let px = (col as f64 + u).clamp(0.0, w - 1.0);
        let py = (row as f64 + v).clamp(0.0, h - 1.0);
        let (fx, fy) = (px.floor(), py.floor());
        let (ax, ay) = (px - fx, py - fy);
        let at = |x: f64, y: f64| src.get((x as usize).min(src.width() - 1), (y as usize).min(src.height() - 1), ch);
        at(fx, fy) * (1.0 - ax) * (1.0 - ay)
            + at(fx + 1.0, fy) * ax * (1.0 - ay)
            + at(fx, fy + 1.0) * (1.0 - ax) * ay
            + at(fx + 1.0, fy + 1.0) * ax * ay
    }

    proptest! {
        #[test]
        fn backward_matches_four_tap_oracle(
            data in proptest::collection::vec(0.0f64..1.0, 9 * 7 * 3),
            uv in proptest::collection::vec(prop::array::uniform2(-3.0f64..3.0), 9 * 7),
        ) {
            let img = Image::from_vec(9, 7, 3, data).unwrap();
            let flow = FlowField::from_vec(9, 7, uv).unwrap();
            let out = backward_warp_bilinear(&img, &flow).unwrap();
            for row in 0..7 {
                for col in 0..9 {
                    for ch in 0..3 {
                        prop_assert!((out.get(col, row, ch) - backward_oracle(&img, &flow, col, row, ch)).abs() < 1e-9);
                    }
                }
            }
        }

        #[test]
        fn average_splat_stays_in_source_range(
            data in proptest::collection::vec(0.0f64..1.0, 8 * 8),
            uv in proptest::collection::vec(prop::array::uniform2(-2.5f64..2.5), 8 * 8),
        ) {
            let img = Image::from_vec(8, 8, 1, data.clone()).unwrap();
            let flow = FlowField::from_vec(8, 8, uv).unwrap();
            let res = forward_warp_average(&img, &flow).unwrap();
            let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for t in 0..64 {
                let v = res.image.data()[t];
                if res.holes.data()[t] == 0 {
                    prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
                } else {
                    prop_assert_eq!(v, 0.0);
                    prop_assert!(res.weight[t] < HOLE_EPSILON);
                }
            }
        }
    }
}
