//! Synthetic frame-interpolation triplets built from layered cel-style
//! stills: each layer moves under its own homography, so ground-truth flow,
//! occlusion and warped frames are all known exactly.

pub mod blur;
pub mod check;
pub mod compositor;
pub mod config;
pub mod dataset;
pub mod error;
pub mod flo;
pub mod flowviz;
pub mod geometry;
pub mod mask;
pub mod metrics;
pub mod preview;
pub mod raster;
pub mod render;
pub mod store;
pub mod warp;

pub use config::GenConfig;
pub use error::{Error, Result};
pub use geometry::{FlowField, Homography, MotionRanges};
pub use raster::{BinaryMap, Image, LayerMask};
pub use render::{generate_triplet, render_triplet, SceneSpec, Triplet};
pub use store::{ImageStore, SourceImages};
