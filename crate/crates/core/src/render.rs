//! Scene description, scene sampling, and the full triplet renderer.
//!
//! All layers are rendered on a canvas enlarged by `source_margin` pixels on
//! every side and centre-cropped at the end, so the background never exposes
//! splat holes at the border.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::blur::{gaussian_blur, gaussian_blur_mask, kernel_radius};
use crate::compositor::{
    composite_flow, composite_frame, compute_occlusion_map, ownership_map, OcclusionInputs, OWNERSHIP_THRESHOLD,
};
use crate::config::{Canvas, FlowMaskAnchor, GenConfig, MarginPolicy};
use crate::error::{Error, Result};
use crate::geometry::{double_flow, homography_to_flow, sample_homography, FlowField, Homography};
use crate::mask::{blur_sigma, punch_hole, rasterize_polygon, sample_convex_polygon, sample_hole, Polygon};
use crate::raster::{BinaryMap, Image, LayerMask};
use crate::store::{SourceImages, SourceRef};
use crate::warp::{forward_warp_average, forward_warp_mask};

/// Attempts after the first when a sampled scene fails to render cleanly.
pub const MAX_RETRIES: usize = 4;
const MAX_MARGIN: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSpec {
    pub source: SourceRef,
    pub motion: Homography,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub source: SourceRef,
    /// Outer mask polygon in canvas coordinates.
    pub polygon: Polygon,
    pub hole: Option<Polygon>,
    pub motion: Homography,
}

/// Everything needed to render one triplet deterministically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub canvas: Canvas,
    pub source_margin: usize,
    pub alpha: f64,
    pub flow_mask_anchor: FlowMaskAnchor,
    pub background: BackgroundSpec,
    /// Upper layers, bottom to top.
    pub layers: Vec<LayerSpec>,
}

impl SceneSpec {
    /// Layer count `K`, background included.
    pub fn layer_count(&self) -> usize {
        1 + self.layers.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.canvas.width == 0 || self.canvas.height == 0 {
            return Err(Error::InvalidParameter("canvas must be non-empty".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.source_margin > MAX_MARGIN {
            return Err(Error::InvalidParameter(format!(
                "source margin {} exceeds {MAX_MARGIN}",
                self.source_margin
            )));
        }
        if self.layer_count() > 255 {
            return Err(Error::InvalidParameter("at most 255 layers".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("scene serialises")))
    }

    fn enlarged(&self) -> (usize, usize) {
        (
            self.canvas.width + 2 * self.source_margin,
            self.canvas.height + 2 * self.source_margin,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerStats {
    /// Blur standard deviation applied to this layer.
    pub sigma: f64,
    /// Fraction of the output canvas covered by the frame-1 mask.
    pub area_fraction: f64,
}

/// One rendered training sample.
#[derive(Clone, Debug)]
pub struct Triplet {
    pub i1: Image,
    pub i2: Image,
    pub i3: Image,
    pub f12: FlowField,
    pub f13: FlowField,
    pub occlusion2: BinaryMap,
    pub occlusion3: BinaryMap,
    pub holes2: BinaryMap,
    pub holes3: BinaryMap,
    /// Owning layer index per pixel at frames 2 and 3.
    pub owners2: Vec<u8>,
    pub owners3: Vec<u8>,
    /// Per upper layer (background excluded).
    pub layers: Vec<LayerStats>,
    /// Digest of the scene that produced this triplet.
    pub provenance: String,
}

/// Frame-1 state of one layer on the enlarged canvas.
struct PreparedLayer {
    texture: Image,
    mask: LayerMask,
    f12: FlowField,
    f13: FlowField,
}

fn prepare_layers(spec: &SceneSpec, store: &dyn SourceImages) -> Result<(Vec<PreparedLayer>, Vec<LayerStats>)> {
    let m = spec.source_margin;
    let (ew, eh) = spec.enlarged();
    let shift = m as f64;
    let canvas_area = (spec.canvas.width * spec.canvas.height) as f64;

    let background = (|| {
        let texture = spec.background.source.crop(store, ew, eh)?;
        let f12 = homography_to_flow(&spec.background.motion.shifted(shift, shift)?, ew, eh)?;
        let f13 = double_flow(&f12);
        Ok(PreparedLayer {
            texture,
            mask: LayerMask::ones(ew, eh),
            f12,
            f13,
        })
    })()
    .map_err(|e: Error| e.in_layer(1))?;

    let mut layers = vec![background];
    let mut stats = Vec::new();
    for (i, layer) in spec.layers.iter().enumerate() {
        let prepared = (|| {
            let raw = layer.source.crop(store, ew, eh)?;
            let poly = layer.polygon.translated(shift, shift);
            let mut mask = rasterize_polygon(&poly, ew, eh);
            if let Some(hole) = &layer.hole {
                mask = punch_hole(&mask, &hole.translated(shift, shift));
            }
            let f12 = homography_to_flow(&layer.motion.shifted(shift, shift)?, ew, eh)?;
            let sigma = blur_sigma(&mask, &f12, spec.alpha)?;
            let area = mask.crop(m, m, spec.canvas.width, spec.canvas.height).coverage() / canvas_area;
            let (texture, mask) = if sigma > 0.0 {
                blur_layer(&raw, &mask, sigma)
            } else {
                (raw, mask)
            };
            let f13 = double_flow(&f12);
            Ok((
                PreparedLayer { texture, mask, f12, f13 },
                LayerStats {
                    sigma,
                    area_fraction: area,
                },
            ))
        })()
        .map_err(|e: Error| e.in_layer(i + 2))?;
        layers.push(prepared.0);
        stats.push(prepared.1);
    }
    Ok((layers, stats))
}

/// Bounding box `[x0, x1) x [y0, y1)` of the non-zero mask pixels.
fn support_bounds(mask: &LayerMask) -> Option<(usize, usize, usize, usize)> {
    let w = mask.width();
    let mut bounds: Option<(usize, usize, usize, usize)> = None;
    for (p, &v) in mask.data().iter().enumerate() {
        if v > 0.0 {
            let (c, r) = (p % w, p / w);
            bounds = Some(match bounds {
                None => (c, r, c + 1, r + 1),
                Some((x0, y0, x1, y1)) => (x0.min(c), y0.min(r), x1.max(c + 1), y1.max(r + 1)),
            });
        }
    }
    bounds
}

/// Blurs the mask and the masked object, then un-premultiplies so that
/// `blurred_mask * texture == blur(mask * raw)`.
///
/// Work is confined to the mask support grown by two kernel radii: outputs
/// beyond one radius are zero, and the second radius keeps reflections at
/// the window edge reading zeros, so the result equals a full-canvas blur.
fn blur_layer(raw: &Image, mask: &LayerMask, sigma: f64) -> (Image, LayerMask) {
    let Some((bx0, by0, bx1, by1)) = support_bounds(mask) else {
        return (raw.clone(), mask.clone());
    };
    let (w, h, c) = (raw.width(), raw.height(), raw.channels());
    let reach = 2 * kernel_radius(sigma);
    let (x0, y0) = (bx0.saturating_sub(reach), by0.saturating_sub(reach));
    let (x1, y1) = ((bx1 + reach).min(w), (by1 + reach).min(h));
    let (ww, wh) = (x1 - x0, y1 - y0);

    let window_mask = mask.crop(x0, y0, ww, wh);
    let mut premult = raw.crop(x0, y0, ww, wh);
    for (p, &mv) in window_mask.data().iter().enumerate() {
        premult.data_mut()[p * c..(p + 1) * c].iter_mut().for_each(|v| *v *= mv);
    }
    let object = gaussian_blur(&premult, sigma);
    let soft = gaussian_blur_mask(&window_mask, sigma);

    let mut texture = raw.clone();
    let mut full = LayerMask::zeros(w, h);
    for row in 0..wh {
        for col in 0..ww {
            let mv = soft.get(col, row);
            if mv > 0.0 {
                full.set(x0 + col, y0 + row, mv);
                for ch in 0..c {
                    let v = object.get(col, row, ch) / mv;
                    texture.set(x0 + col, y0 + row, ch, v.clamp(0.0, 1.0));
                }
            }
        }
    }
    (texture, full)
}

/// Holes of an upper layer that sit next to its own coverage.
fn interior_holes(holes: &BinaryMap, mask: &LayerMask) -> BinaryMap {
    let (w, h) = (holes.width(), holes.height());
    let mut out = BinaryMap::zeros(w, h);
    for row in 0..h {
        for col in 0..w {
            if !holes.get(col, row) {
                continue;
            }
            let touching = (row.saturating_sub(1)..=(row + 1).min(h - 1)).any(|r| {
                (col.saturating_sub(1)..=(col + 1).min(w - 1)).any(|c| mask.get(c, r) > OWNERSHIP_THRESHOLD)
            });
            out.set(col, row, touching);
        }
    }
    out
}

struct FrameOutput {
    frame: Image,
    flow: FlowField,
    occlusion: BinaryMap,
    holes: BinaryMap,
    owners: Vec<u8>,
}

fn crop_masks(masks: &[LayerMask], m: usize, canvas: Canvas) -> Vec<LayerMask> {
    masks.iter().map(|k| k.crop(m, m, canvas.width, canvas.height)).collect()
}

fn crop_flows(flows: &[FlowField], m: usize, canvas: Canvas) -> Vec<FlowField> {
    flows.iter().map(|f| f.crop(m, m, canvas.width, canvas.height)).collect()
}

fn render_frame(spec: &SceneSpec, layers: &[PreparedLayer], n: usize, masks_1_cropped: &[LayerMask]) -> Result<FrameOutput> {
    let m = spec.source_margin;
    let canvas = spec.canvas;
    let (ew, eh) = spec.enlarged();
    let flows: Vec<FlowField> = layers
        .iter()
        .map(|l| if n == 2 { l.f12.clone() } else { l.f13.clone() })
        .collect();

    let mut images = Vec::with_capacity(layers.len());
    let mut masks = Vec::with_capacity(layers.len());
    let mut holes = BinaryMap::zeros(ew, eh);
    for (k, (layer, flow)) in layers.iter().zip(&flows).enumerate() {
        let warped = forward_warp_average(&layer.texture, flow).map_err(|e| e.in_layer(k + 1))?;
        if k == 0 {
            holes = holes.union(&warped.holes);
            masks.push(LayerMask::ones(ew, eh));
        } else {
            let (mask, _) = forward_warp_mask(&layer.mask, flow).map_err(|e| e.in_layer(k + 1))?;
            holes = holes.union(&interior_holes(&warped.holes, &mask));
            masks.push(mask);
        }
        images.push(warped.image);
    }

    let mut frame = composite_frame(&images, &masks)?.crop(m, m, canvas.width, canvas.height);
    frame.clamp_unit();
    let holes = holes.crop(m, m, canvas.width, canvas.height);

    let select: Vec<LayerMask> = match spec.flow_mask_anchor {
        FlowMaskAnchor::Warped => masks.iter().map(|k| k.threshold(OWNERSHIP_THRESHOLD).to_mask()).collect(),
        FlowMaskAnchor::Source => layers
            .iter()
            .map(|l| l.mask.threshold(OWNERSHIP_THRESHOLD).to_mask())
            .collect(),
    };
    let flow = composite_flow(&flows, &select)?.crop(m, m, canvas.width, canvas.height);

    let masks_n = crop_masks(&masks, m, canvas);
    let flows_cropped = crop_flows(&flows, m, canvas);
    let occlusion = compute_occlusion_map(&OcclusionInputs {
        masks_at_1: masks_1_cropped,
        masks_at_n: &masks_n,
        layer_flows: &flows_cropped,
        flow: &flow,
        holes: Some(&holes),
    })?;
    let owners = ownership_map(&masks_n);
    Ok(FrameOutput {
        frame,
        flow,
        occlusion,
        holes,
        owners,
    })
}

/// Renders frames, ground-truth flows, occlusion and hole maps for `spec`.
///
/// Fails with [`Error::Validation`] when splat holes remain inside the canvas
/// at frame 2 or 3.
pub fn render_triplet(spec: &SceneSpec, store: &dyn SourceImages) -> Result<Triplet> {
    spec.validate()?;
    let m = spec.source_margin;
    let canvas = spec.canvas;
    let (layers, stats) = prepare_layers(spec, store)?;

    let masks_1: Vec<LayerMask> = layers.iter().map(|l| l.mask.clone()).collect();
    let textures: Vec<Image> = layers.iter().map(|l| l.texture.clone()).collect();
    let mut i1 = composite_frame(&textures, &masks_1)?.crop(m, m, canvas.width, canvas.height);
    i1.clamp_unit();
    let masks_1_cropped = crop_masks(&masks_1, m, canvas);

    let second = render_frame(spec, &layers, 2, &masks_1_cropped)?;
    let third = render_frame(spec, &layers, 3, &masks_1_cropped)?;
    for (n, out) in [(2, &second), (3, &third)] {
        if !out.holes.is_empty() {
            return Err(Error::Validation(format!(
                "{} splat holes remain in frame {n}",
                out.holes.count()
            )));
        }
    }
    Ok(Triplet {
        i1,
        i2: second.frame,
        i3: third.frame,
        f12: second.flow,
        f13: third.flow,
        occlusion2: second.occlusion,
        occlusion3: third.occlusion,
        holes2: second.holes,
        holes3: third.holes,
        owners2: second.owners,
        owners3: third.owners,
        layers: stats,
        provenance: spec.digest(),
    })
}

/// Mixes two integers into a fresh 64-bit seed (SHA-256, first 8 bytes LE).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(b"animsynth/seed");
    hasher.update(seed.to_le_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Largest `|H x - x|` over the border of the canvas grown by `pad` pixels.
fn max_border_flow(h: &Homography, canvas: Canvas, pad: f64) -> Result<f64> {
    let (x0, y0) = (-pad, -pad);
    let (x1, y1) = (canvas.width as f64 + pad, canvas.height as f64 + pad);
    let steps = |len: f64| ((len / 4.0).ceil() as usize).max(1);
    let mut best: f64 = 0.0;
    let mut visit = |x: f64, y: f64| -> Result<()> {
        let (tx, ty) = h.apply(x, y).ok_or(Error::DegenerateProjection {
            col: x.max(0.0) as usize,
            row: y.max(0.0) as usize,
        })?;
        best = best.max((tx - x).hypot(ty - y));
        Ok(())
    };
    let nx = steps(x1 - x0);
    for i in 0..=nx {
        let x = x0 + (x1 - x0) * i as f64 / nx as f64;
        visit(x, y0)?;
        visit(x, y1)?;
    }
    let ny = steps(y1 - y0);
    for i in 0..=ny {
        let y = y0 + (y1 - y0) * i as f64 / ny as f64;
        visit(x0, y)?;
        visit(x1, y)?;
    }
    Ok(best)
}

/// Border width that keeps frame-3 background splats covering the canvas.
pub fn auto_margin(background: &Homography, canvas: Canvas, extra: usize) -> Result<usize> {
    // frame 3 moves twice as far; refine once on the grown canvas
    let first = (2.0 * max_border_flow(background, canvas, 0.0)?).ceil() as usize + extra;
    let second = (2.0 * max_border_flow(background, canvas, first as f64)?).ceil() as usize + extra;
    Ok(second.max(first).min(MAX_MARGIN))
}

/// Draws a complete scene from `config` using `seed` only.
pub fn sample_scene(config: &GenConfig, store: &dyn SourceImages, seed: u64) -> Result<SceneSpec> {
    if store.is_empty() {
        return Err(Error::EmptyStore(config.source_dir.clone()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let canvas = config.canvas;
    let k = rng.random_range(config.layer_count.min..=config.layer_count.max);
    let background_motion = if config.background_static {
        Homography::IDENTITY
    } else {
        sample_homography(&mut rng, &config.background_motion, canvas.width, canvas.height)?
    };
    let margin = match config.source_margin {
        MarginPolicy::Auto { extra } => auto_margin(&background_motion, canvas, extra)?,
        MarginPolicy::Fixed { pixels } => pixels,
    };
    let (ew, eh) = (canvas.width + 2 * margin, canvas.height + 2 * margin);
    let background = BackgroundSpec {
        source: SourceRef::sample(&mut rng, store, ew, eh)?,
        motion: background_motion,
    };
    let mut layers = Vec::with_capacity(k - 1);
    for _ in 1..k {
        let motion = sample_homography(&mut rng, &config.upper_motion, canvas.width, canvas.height)?;
        let polygon = sample_convex_polygon(&mut rng, &config.mask, canvas.width, canvas.height)?;
        let hole = if rng.random::<f64>() < config.mask.hole_probability {
            Some(sample_hole(&mut rng, &config.mask, &polygon)?)
        } else {
            None
        };
        let source = SourceRef::sample(&mut rng, store, ew, eh)?;
        layers.push(LayerSpec {
            source,
            polygon,
            hole,
            motion,
        });
    }
    Ok(SceneSpec {
        seed,
        canvas,
        source_margin: margin,
        alpha: config.alpha,
        flow_mask_anchor: config.flow_mask_anchor,
        background,
        layers,
    })
}

#[derive(Debug)]
pub struct Generated {
    pub spec: SceneSpec,
    pub triplet: Triplet,
    /// Reasons for rejected attempts, in order.
    pub retries: Vec<String>,
}

/// Samples and renders one triplet, retrying with derived sub-seeds when a
/// scene is rejected.
pub fn generate_triplet(config: &GenConfig, store: &dyn SourceImages, seed: u64) -> Result<Generated> {
    let mut retries = Vec::new();
    for attempt in 0..=MAX_RETRIES {
        let attempt_seed = if attempt == 0 {
            seed
        } else {
            derive_seed(seed, attempt as u64)
        };
        let outcome = sample_scene(config, store, attempt_seed)
            .and_then(|spec| render_triplet(&spec, store).map(|t| (spec, t)));
        match outcome {
            Ok((spec, triplet)) => return Ok(Generated { spec, triplet, retries }),
            Err(e @ Error::EmptyStore(_)) => return Err(e),
            Err(e) => retries.push(format!("attempt {attempt}: {e}")),
        }
    }
    Err(Error::Validation(format!(
        "rejected after {} attempts: {}",
        MAX_RETRIES + 1,
        retries.join("; ")
    )))
}
