//! Separable Gaussian blur with half-sample symmetric ("reflect") borders.

use crate::raster::{Image, LayerMask};

/// Normalised 1-D kernel of radius `ceil(3 sigma)`; entry `i` is the tap at
/// offset `i - radius`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    assert!(sigma > 0.0 && sigma.is_finite());
    let radius = (3.0 * sigma).ceil() as isize;
    let denom = 2.0 * sigma * sigma;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / denom).exp())
        .collect();
    let total: f64 = k.iter().sum();
    for v in &mut k {
        *v /= total;
    }
    k
}

/// Maps an out-of-range index into `[0, n)` by mirroring about the edges,
/// repeating the edge sample (`... b a | a b c ... `).
#[inline]
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m >= n { period - 1 - m } else { m }) as usize
}

/// Blurs every channel; `sigma == 0` returns an exact copy.
pub fn gaussian_blur(image: &Image, sigma: f64) -> Image {
    assert!(sigma >= 0.0, "sigma must be non-negative");
    if sigma == 0.0 || image.width() == 0 || image.height() == 0 {
        return image.clone();
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let (w, h, c) = (image.width(), image.height(), image.channels());

    let mut tmp = Image::new(w, h, c);
    {
        let src = image.data();
        let dst = tmp.data_mut();
        let padded_len = w + 2 * radius as usize;
        let mut line = vec![0.0; padded_len * c];
        for row in 0..h {
            let base = row * w;
            for (i, px) in line.chunks_exact_mut(c).enumerate() {
                let sc = reflect_index(i as isize - radius, w);
                px.copy_from_slice(&src[(base + sc) * c..(base + sc + 1) * c]);
            }
            for col in 0..w {
                let out = &mut dst[(base + col) * c..(base + col + 1) * c];
                for (t, kv) in kernel.iter().enumerate() {
                    let s = (col + t) * c;
                    for ch in 0..c {
                        out[ch] += kv * line[s + ch];
                    }
                }
            }
        }
    }

    let mut out = Image::new(w, h, c);
    let src = tmp.data();
    let dst = out.data_mut();
    let stride = w * c;
    let mut acc = vec![0.0; stride];
    for row in 0..h {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for (t, kv) in kernel.iter().enumerate() {
            let sr = reflect_index(row as isize + t as isize - radius, h);
            let line = &src[sr * stride..(sr + 1) * stride];
            for (a, s) in acc.iter_mut().zip(line) {
                *a += kv * s;
            }
        }
        dst[row * stride..(row + 1) * stride].copy_from_slice(&acc);
    }
    out
}

/// Number of taps on each side of the centre for `sigma`.
pub fn kernel_radius(sigma: f64) -> usize {
    (3.0 * sigma).ceil() as usize
}

/// Mask flavour of [`gaussian_blur`]; output re-clamped into `[0, 1]`.
pub fn gaussian_blur_mask(mask: &LayerMask, sigma: f64) -> LayerMask {
    LayerMask::from_image_clamped(&gaussian_blur(&mask.to_image(), sigma))
}
