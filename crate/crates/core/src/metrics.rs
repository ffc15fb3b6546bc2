//! PSNR and single-scale SSIM on `[0, 1]` images.

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::raster::{BinaryMap, Image};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

/// Neumaier-compensated running sum.
#[derive(Default)]
pub(crate) struct Sum {
    total: f64,
    compensation: f64,
}

impl Sum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.total + x;
        if self.total.abs() >= x.abs() {
            self.compensation += (self.total - t) + x;
        } else {
            self.compensation += (x - t) + self.total;
        }
        self.total = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.total + self.compensation
    }
}

fn check_pair(a: &Image, b: &Image) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::mismatch(a.shape_string(), b.shape_string()));
    }
    Ok(())
}

/// Mean squared error over the pixels selected by `mask` (all pixels when
/// `None`), plus the number of pixels evaluated.
pub fn mse(a: &Image, b: &Image, mask: Option<&BinaryMap>) -> Result<(f64, usize)> {
    check_pair(a, b)?;
    if let Some(m) = mask {
        if (m.width(), m.height()) != (a.width(), a.height()) {
            return Err(Error::mismatch(
                format!("{}x{}", a.width(), a.height()),
                format!("{}x{}", m.width(), m.height()),
            ));
        }
    }
    let c = a.channels();
    let mut sum = Sum::default();
    let mut pixels = 0usize;
    for p in 0..a.width() * a.height() {
        if mask.is_some_and(|m| m.data()[p] == 0) {
            continue;
        }
        pixels += 1;
        for ch in 0..c {
            let d = a.data()[p * c + ch] - b.data()[p * c + ch];
            sum.add(d * d);
        }
    }
    if pixels == 0 {
        return Err(Error::InvalidParameter("PSNR mask selects no pixels".into()));
    }
    Ok((sum.value() / (pixels * c) as f64, pixels))
}

/// `10 log10(1 / MSE)` with peak 1.0; `+inf` when the images agree exactly.
pub fn psnr(a: &Image, b: &Image, mask: Option<&BinaryMap>) -> Result<f64> {
    let (err, _) = mse(a, b, mask)?;
    Ok(psnr_from_mse(err))
}

pub fn psnr_from_mse(err: f64) -> f64 {
    if err == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / err).log10()
    }
}

fn window_kernel() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Valid-position separable filtering of a plane.
fn filter_valid(plane: &[f64], w: usize, h: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = k.len();
    let ow = w - n + 1;
    let oh = h - n + 1;
    let mut tmp = vec![0.0; ow * h];
    for row in 0..h {
        for col in 0..ow {
            let line = &plane[row * w + col..row * w + col + n];
            tmp[row * ow + col] = line.iter().zip(k).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for row in 0..oh {
        for col in 0..ow {
            out[row * ow + col] = (0..n).map(|t| tmp[(row + t) * ow + col] * k[t]).sum();
        }
    }
    (out, ow, oh)
}

/// Mean local SSIM with an 11x11 Gaussian window (sigma 1.5) over valid
/// window positions, averaged across channels.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    check_pair(a, b)?;
    let (w, h, c) = (a.width(), a.height(), a.channels());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::InvalidParameter(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {w}x{h}"
        )));
    }
    let k = window_kernel();
    let mut total = 0.0;
    for ch in 0..c {
        let pa: Vec<f64> = a.data().iter().skip(ch).step_by(c).copied().collect();
        let pb: Vec<f64> = b.data().iter().skip(ch).step_by(c).copied().collect();
        let aa: Vec<f64> = pa.iter().map(|v| v * v).collect();
        let bb: Vec<f64> = pb.iter().map(|v| v * v).collect();
        let ab: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();
        let (mu_a, _, _) = filter_valid(&pa, w, h, &k);
        let (mu_b, _, _) = filter_valid(&pb, w, h, &k);
        let (e_aa, _, _) = filter_valid(&aa, w, h, &k);
        let (e_bb, _, _) = filter_valid(&bb, w, h, &k);
        let (e_ab, _, _) = filter_valid(&ab, w, h, &k);
        let mut sum = Sum::default();
        for i in 0..mu_a.len() {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            let num = (2.0 * ma * mb + C1) * (2.0 * cov + C2);
            let den = (ma * ma + mb * mb + C1) * (va + vb + C2);
            sum.add(num / den);
        }
        total += sum.value() / mu_a.len() as f64;
    }
    Ok((total / c as f64).clamp(-1.0, 1.0))
}

fn serialize_db<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricReport {
    #[serde(serialize_with = "serialize_db")]
    pub psnr_db: f64,
    pub ssim: f64,
    pub pixel_count: usize,
    pub mask_applied: bool,
}

impl MetricReport {
    pub fn compare(a: &Image, b: &Image, mask: Option<&BinaryMap>) -> Result<Self> {
        let (err, pixels) = mse(a, b, mask)?;
        Ok(Self {
            psnr_db: psnr_from_mse(err),
            ssim: ssim(a, b)?,
            pixel_count: pixels,
            mask_applied: mask.is_some(),
        })
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serialises")
    }
}
