//! Dense raster containers shared by every stage of the pipeline.
//!
//! All planes are row-major. Multi-channel images interleave channels per
//! pixel, so sample `(col, row, ch)` lives at `(row * width + col) * channels + ch`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-pixel real values, nominally in `[0, 1]`, with 1 or 3 channels.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self::filled(width, height, channels, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        assert!(channels == 1 || channels == 3, "channels must be 1 or 3");
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidParameter(format!(
                "image channels must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::mismatch(width * height * channels, data.len()));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Builds an image by evaluating `f(col, row, channel)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut img = Self::new(width, height, channels);
        for row in 0..height {
            for col in 0..width {
                for ch in 0..channels {
                    img.data[(row * width + col) * channels + ch] = f(col, row, ch);
                }
            }
        }
        img
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize, ch: usize) -> f64 {
        self.data[(row * self.width + col) * self.channels + ch]
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, ch: usize, value: f64) {
        self.data[(row * self.width + col) * self.channels + ch] = value;
    }

    pub fn pixel(&self, col: usize, row: usize) -> &[f64] {
        let base = (row * self.width + col) * self.channels;
        &self.data[base..base + self.channels]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn shape_string(&self) -> String {
        format!("{}x{}x{}", self.width, self.height, self.channels)
    }

    pub fn clamp_unit(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }

    /// Copies the `width x height` window whose top-left pixel is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Image {
        assert!(x0 + width <= self.width && y0 + height <= self.height);
        let mut out = Image::new(width, height, self.channels);
        let c = self.channels;
        for row in 0..height {
            let src = ((y0 + row) * self.width + x0) * c;
            let dst = row * width * c;
            out.data[dst..dst + width * c].copy_from_slice(&self.data[src..src + width * c]);
        }
        out
    }

    /// Extracts a single channel as a mask without clamping.
    pub fn channel(&self, ch: usize) -> LayerMask {
        let data = self.data.iter().skip(ch).step_by(self.channels).copied().collect();
        LayerMask {
            width: self.width,
            height: self.height,
            data,
        }
    }

    pub fn flip_horizontal(&self) -> Image {
        Image::from_fn(self.width, self.height, self.channels, |c, r, ch| {
            self.get(self.width - 1 - c, r, ch)
        })
    }
}

/// Per-pixel coverage in `[0, 1]`; binary until blurred.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerMask {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl LayerMask {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn ones(width: usize, height: usize) -> Self {
        Self::filled(width, height, 1.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::mismatch(width * height, data.len()));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter("mask values must lie in [0, 1]".into()));
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn coverage(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Single-channel image view of the mask.
    pub fn to_image(&self) -> Image {
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.data.clone(),
        }
    }

    /// Takes channel 0 of `img`, clamped into `[0, 1]`.
    pub fn from_image_clamped(img: &Image) -> Self {
        let mut m = img.channel(0);
        for v in &mut m.data {
            *v = v.clamp(0.0, 1.0);
        }
        m
    }

    pub fn threshold(&self, level: f64) -> BinaryMap {
        BinaryMap {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| u8::from(v > level)).collect(),
        }
    }

    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> LayerMask {
        LayerMask::from_image_clamped(&self.to_image().crop(x0, y0, width, height))
    }
}

/// 0/1 map such as occlusion or hole flags.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryMap {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl BinaryMap {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::mismatch(width * height, data.len()));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::InvalidParameter("binary map values must be 0 or 1".into()));
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> bool {
        self.data[row * self.width + col] != 0
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, on: bool) {
        self.data[row * self.width + col] = u8::from(on);
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> BinaryMap {
        let mut out = BinaryMap::zeros(width, height);
        for row in 0..height {
            for col in 0..width {
                out.set(col, row, self.get(x0 + col, y0 + row));
            }
        }
        out
    }

    pub fn union(&self, other: &BinaryMap) -> BinaryMap {
        assert_eq!((self.width, self.height), (other.width, other.height));
        BinaryMap {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a | b).collect(),
        }
    }

    pub fn to_mask(&self) -> LayerMask {
        LayerMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f64::from(v)).collect(),
        }
    }
}
