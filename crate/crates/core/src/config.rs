//! Generation configuration. Every knob has a default; `GenConfig::default()`
//! serialised to JSON is the documented default config.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::MotionRanges;
use crate::mask::MaskParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Canvas {
    pub width: usize,
    pub height: usize,
}

impl Canvas {
    pub const fn new(width: usize, height: usize) -> Self {
        Self { width, height }
    }
}

impl Default for Canvas {
    fn default() -> Self {
        Self::new(512, 384)
    }
}

/// Layer count `K` including the background.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCount {
    pub min: usize,
    pub max: usize,
}

impl Default for LayerCount {
    fn default() -> Self {
        Self { min: 2, max: 4 }
    }
}

/// Which mask stack selects the per-layer flow during flow compositing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowMaskAnchor {
    /// Masks warped to the target frame.
    #[default]
    Warped,
    /// Frame-1 masks.
    Source,
}

/// Width of the oversampled border around the canvas.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum MarginPolicy {
    /// `ceil(max |F13|)` of the background motion near the canvas plus `extra`.
    Auto { extra: usize },
    Fixed { pixels: usize },
}

impl Default for MarginPolicy {
    fn default() -> Self {
        MarginPolicy::Auto { extra: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFormats {
    pub frames: String,
    pub flow: String,
}

impl Default for OutputFormats {
    fn default() -> Self {
        Self {
            frames: "png".into(),
            flow: "flo".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub canvas: Canvas,
    pub count: usize,
    pub global_seed: u64,
    pub source_dir: PathBuf,
    pub layer_count: LayerCount,
    pub background_motion: MotionRanges,
    pub upper_motion: MotionRanges,
    pub mask: MaskParams,
    pub alpha: f64,
    pub source_margin: MarginPolicy,
    pub flow_mask_anchor: FlowMaskAnchor,
    pub background_static: bool,
    pub output: OutputFormats,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            canvas: Canvas::default(),
            count: 100,
            global_seed: 0,
            source_dir: PathBuf::from("sources"),
            layer_count: LayerCount::default(),
            background_motion: MotionRanges::background_default(),
            upper_motion: MotionRanges::upper_default(),
            mask: MaskParams::default(),
            alpha: 0.1,
            source_margin: MarginPolicy::default(),
            flow_mask_anchor: FlowMaskAnchor::default(),
            background_static: false,
            output: OutputFormats::default(),
        }
    }
}

impl GenConfig {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.canvas.width < 64 || self.canvas.height < 64 {
            return bad(format!(
                "canvas must be at least 64x64, got {}x{}",
                self.canvas.width, self.canvas.height
            ));
        }
        if self.layer_count.min < 1 || self.layer_count.min > self.layer_count.max {
            return bad("layer_count must satisfy 1 <= min <= max".into());
        }
        if self.layer_count.max > 255 {
            return bad("layer_count.max must not exceed 255".into());
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if self.output.frames != "png" {
            return bad(format!("unsupported frame format {:?}", self.output.frames));
        }
        if self.output.flow != "flo" {
            return bad(format!("unsupported flow format {:?}", self.output.flow));
        }
        self.background_motion.validate()?;
        self.upper_motion.validate()?;
        self.mask.validate()
    }

    /// SHA-256 over the fields that influence rendered content. `count` and
    /// `source_dir` are excluded so that a dataset extended or relocated
    /// keeps its digest.
    pub fn digest(&self) -> String {
        let mut canonical = self.clone();
        canonical.count = 0;
        canonical.source_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&canonical).expect("config serialises");
        hex::encode(Sha256::digest(&bytes))
    }
}
