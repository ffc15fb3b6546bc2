//! On-disk dataset layout, batch generation, validation and statistics.
//!
//! A dataset directory holds `manifest.json` and a `samples/` directory with
//! one group of files per entry, named `{id:06}_{kind}`:
//!
//! | kind            | format                                         |
//! |-----------------|------------------------------------------------|
//! | `i1` `i2` `i3`  | 8-bit RGB PNG, `round(v * 255)`                |
//! | `f12` `f13`     | Middlebury `.flo`                              |
//! | `occ2` `occ3`   | 8-bit gray PNG, 0 or 255                       |
//! | `holes2` `holes3` | 8-bit gray PNG, 0 or 255                     |
//! | `own2` `own3`   | 8-bit gray PNG, owning layer index (0 = background) |
//! | `scene`         | scene description JSON                         |

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use image::ColorType;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::check::{doubling_violations, photo_consistency_psnr, PHOTO_CONSISTENCY_MIN_DB};
use crate::config::{Canvas, GenConfig};
use crate::error::{Error, Result};
use crate::flo::{read_flo, write_flo};
use crate::geometry::FlowField;
use crate::raster::{BinaryMap, Image};
use crate::render::{derive_seed, generate_triplet, Generated, LayerStats, SceneSpec, Triplet};
use crate::store::SourceImages;

pub const MANIFEST_VERSION: &str = "animsynth/1";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SAMPLES_DIR: &str = "samples";

/// Relative paths (from the dataset root) of one entry's files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryFiles {
    pub i1: String,
    pub i2: String,
    pub i3: String,
    pub f12: String,
    pub f13: String,
    pub occ2: String,
    pub occ3: String,
    pub holes2: String,
    pub holes3: String,
    pub own2: String,
    pub own3: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<String>,
}

impl EntryFiles {
    pub fn for_id(id: usize) -> Self {
        let p = |kind: &str, ext: &str| format!("{SAMPLES_DIR}/{id:06}_{kind}.{ext}");
        Self {
            i1: p("i1", "png"),
            i2: p("i2", "png"),
            i3: p("i3", "png"),
            f12: p("f12", "flo"),
            f13: p("f13", "flo"),
            occ2: p("occ2", "png"),
            occ3: p("occ3", "png"),
            holes2: p("holes2", "png"),
            holes3: p("holes3", "png"),
            own2: p("own2", "png"),
            own3: p("own3", "png"),
            scene: None,
        }
    }

    fn all(&self) -> Vec<&str> {
        let mut v = vec![
            self.i1.as_str(),
            &self.i2,
            &self.i3,
            &self.f12,
            &self.f13,
            &self.occ2,
            &self.occ3,
            &self.holes2,
            &self.holes3,
            &self.own2,
            &self.own3,
        ];
        if let Some(s) = &self.scene {
            v.push(s);
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: usize,
    /// Position in the generation sequence; differs from `id` once a sample failed.
    pub sample_index: usize,
    pub seed: u64,
    pub spec_digest: String,
    pub layer_count: usize,
    pub layers: Vec<LayerStats>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub retries: Vec<String>,
    pub files: EntryFiles,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub sample_index: usize,
    pub seed: u64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: String,
    pub global_seed: u64,
    pub config_digest: String,
    pub canvas: Canvas,
    pub config: GenConfig,
    pub entries: Vec<ManifestEntry>,
    #[serde(default)]
    pub failures: Vec<FailureRecord>,
}

impl DatasetManifest {
    pub fn new(config: &GenConfig) -> Self {
        Self {
            version: MANIFEST_VERSION.into(),
            global_seed: config.global_seed,
            config_digest: config.digest(),
            canvas: config.canvas,
            config: config.clone(),
            entries: Vec::new(),
            failures: Vec::new(),
        }
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Json(path, e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serialises");
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn save_png(path: &Path, bytes: &[u8], width: usize, height: usize, color: ColorType) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let encoder = image::codecs::png::PngEncoder::new(BufWriter::new(file));
    image::ImageEncoder::write_image(encoder, bytes, width as u32, height as u32, color.into()).map_err(|source| {
        Error::Image {
            path: path.to_path_buf(),
            source,
        }
    })
}

/// Writes an RGB or gray image as 8-bit PNG.
pub fn write_image_png(image: &Image, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = image.data().iter().map(|&v| quantize(v)).collect();
    let color = if image.channels() == 3 { ColorType::Rgb8 } else { ColorType::L8 };
    save_png(path, &bytes, image.width(), image.height(), color)
}

pub fn write_binary_png(map: &BinaryMap, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = map.data().iter().map(|&v| if v != 0 { 255 } else { 0 }).collect();
    save_png(path, &bytes, map.width(), map.height(), ColorType::L8)
}

fn write_index_png(indices: &[u8], canvas: (usize, usize), path: &Path) -> Result<()> {
    save_png(path, indices, canvas.0, canvas.1, ColorType::L8)
}

fn open_image(path: &Path) -> Result<image::DynamicImage> {
    image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads any supported raster as RGB in `[0, 1]`.
pub fn read_rgb(path: &Path) -> Result<Image> {
    let rgb = open_image(path)?.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    Image::from_vec(w, h, 3, rgb.into_raw().into_iter().map(|b| f64::from(b) / 255.0).collect())
}

/// Raw 8-bit gray samples.
pub fn read_gray(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let gray = open_image(path)?.to_luma8();
    Ok((gray.width() as usize, gray.height() as usize, gray.into_raw()))
}

pub fn read_binary_png(path: &Path) -> Result<BinaryMap> {
    let (w, h, data) = read_gray(path)?;
    BinaryMap::from_vec(w, h, data.into_iter().map(|v| u8::from(v > 127)).collect())
}

pub fn read_flo_file(path: &Path) -> Result<FlowField> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_flo(std::io::BufReader::new(file))
}

pub fn write_flo_file(flow: &FlowField, path: &Path) -> Result<usize> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_flo(flow, BufWriter::new(file)).map_err(|e| match e {
        Error::Stream(io) => Error::io(path, io),
        other => other,
    })
}

/// Writes all files of one triplet below `dir` and returns their relative paths.
pub fn write_triplet(t: &Triplet, dir: &Path, id: usize) -> Result<EntryFiles> {
    let files = EntryFiles::for_id(id);
    let samples = dir.join(SAMPLES_DIR);
    fs::create_dir_all(&samples).map_err(|e| Error::io(&samples, e))?;
    let at = |rel: &str| dir.join(rel);
    let canvas = (t.i1.width(), t.i1.height());
    write_image_png(&t.i1, &at(&files.i1))?;
    write_image_png(&t.i2, &at(&files.i2))?;
    write_image_png(&t.i3, &at(&files.i3))?;
    write_flo_file(&t.f12, &at(&files.f12))?;
    write_flo_file(&t.f13, &at(&files.f13))?;
    write_binary_png(&t.occlusion2, &at(&files.occ2))?;
    write_binary_png(&t.occlusion3, &at(&files.occ3))?;
    write_binary_png(&t.holes2, &at(&files.holes2))?;
    write_binary_png(&t.holes3, &at(&files.holes3))?;
    write_index_png(&t.owners2, canvas, &at(&files.own2))?;
    write_index_png(&t.owners3, canvas, &at(&files.own3))?;
    Ok(files)
}

fn write_scene(spec: &SceneSpec, dir: &Path, id: usize) -> Result<String> {
    let rel = format!("{SAMPLES_DIR}/{id:06}_scene.json");
    let path = dir.join(&rel);
    let text = serde_json::to_string(spec).expect("scene serialises");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(rel)
}

/// Result of [`generate_dataset`].
#[derive(Debug)]
pub struct GenerationReport {
    pub manifest: DatasetManifest,
    pub manifest_path: PathBuf,
    pub generated: usize,
    pub failed: usize,
}

/// Renders `count` triplets with sub-seeds `derive_seed(global_seed, index)`
/// and writes them with a manifest under `outdir`.
///
/// Rendering runs on `jobs` worker threads (all cores when `None`); output
/// does not depend on the thread count. On an I/O error the entries written
/// so far are saved as `manifest.json.partial`.
pub fn generate_dataset(
    config: &GenConfig,
    store: &dyn SourceImages,
    count: usize,
    outdir: &Path,
    jobs: Option<usize>,
    mut on_progress: impl FnMut(usize, usize),
) -> Result<GenerationReport> {
    config.validate()?;
    if store.is_empty() {
        return Err(Error::EmptyStore(config.source_dir.clone()));
    }
    let samples = outdir.join(SAMPLES_DIR);
    fs::create_dir_all(&samples).map_err(|e| Error::io(&samples, e))?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let chunk = 2 * pool.current_num_threads();

    let mut manifest = DatasetManifest::new(config);
    let final_path = outdir.join(MANIFEST_FILE);
    let partial_path = outdir.join(format!("{MANIFEST_FILE}.partial"));

    let mut start = 0;
    while start < count {
        let end = (start + chunk).min(count);
        let rendered: Vec<(usize, u64, Result<Generated>)> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|index| {
                    let seed = derive_seed(config.global_seed, index as u64);
                    (index, seed, generate_triplet(config, store, seed))
                })
                .collect()
        });

        let mut pending = Vec::new();
        for (index, seed, outcome) in rendered {
            match outcome {
                Ok(generated) => {
                    let id = manifest.entries.len() + pending.len();
                    pending.push((id, index, seed, generated));
                }
                Err(e) => {
                    log::warn!("sample {index} failed: {e}");
                    manifest.failures.push(FailureRecord {
                        sample_index: index,
                        seed,
                        reason: e.to_string(),
                    });
                }
            }
        }

        let written: Vec<Result<ManifestEntry>> = pool.install(|| {
            pending
                .par_iter()
                .map(|(id, index, seed, g)| {
                    let mut files = write_triplet(&g.triplet, outdir, *id)?;
                    files.scene = Some(write_scene(&g.spec, outdir, *id)?);
                    for r in &g.retries {
                        log::info!("sample {index}: {r}");
                    }
                    Ok(ManifestEntry {
                        id: *id,
                        sample_index: *index,
                        seed: *seed,
                        spec_digest: g.triplet.provenance.clone(),
                        layer_count: g.spec.layer_count(),
                        layers: g.triplet.layers.clone(),
                        retries: g.retries.clone(),
                        files,
                    })
                })
                .collect()
        });
        for entry in written {
            match entry {
                Ok(e) => manifest.entries.push(e),
                Err(err) => {
                    manifest.save(&partial_path)?;
                    return Err(err);
                }
            }
        }
        on_progress(end, count);
        start = end;
    }

    manifest.save(&final_path)?;
    if partial_path.exists() {
        fs::remove_file(&partial_path).map_err(|e| Error::io(&partial_path, e))?;
    }
    let generated = manifest.entries.len();
    let failed = manifest.failures.len();
    Ok(GenerationReport {
        manifest,
        manifest_path: final_path,
        generated,
        failed,
    })
}

/// Everything stored for one entry, decoded.
#[derive(Debug)]
pub struct LoadedEntry {
    pub i1: Image,
    pub i2: Image,
    pub i3: Image,
    pub f12: FlowField,
    pub f13: FlowField,
    pub occ2: BinaryMap,
    pub occ3: BinaryMap,
    pub holes2: BinaryMap,
    pub holes3: BinaryMap,
    pub owners2: Vec<u8>,
    pub owners3: Vec<u8>,
}

pub fn load_entry(dir: &Path, entry: &ManifestEntry) -> Result<LoadedEntry> {
    let f = &entry.files;
    Ok(LoadedEntry {
        i1: read_rgb(&dir.join(&f.i1))?,
        i2: read_rgb(&dir.join(&f.i2))?,
        i3: read_rgb(&dir.join(&f.i3))?,
        f12: read_flo_file(&dir.join(&f.f12))?,
        f13: read_flo_file(&dir.join(&f.f13))?,
        occ2: read_binary_png(&dir.join(&f.occ2))?,
        occ3: read_binary_png(&dir.join(&f.occ3))?,
        holes2: read_binary_png(&dir.join(&f.holes2))?,
        holes3: read_binary_png(&dir.join(&f.holes3))?,
        owners2: read_gray(&dir.join(&f.own2))?.2,
        owners3: read_gray(&dir.join(&f.own3))?.2,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CheckCount {
    pub pass: usize,
    pub fail: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationFailure {
    pub id: Option<usize>,
    pub check: String,
    pub detail: String,
}

fn serialize_opt_db<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) if x.is_infinite() => s.serialize_str("inf"),
        Some(x) => s.serialize_f64(*x),
        None => s.serialize_none(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PsnrRecord {
    pub id: usize,
    #[serde(serialize_with = "serialize_opt_db")]
    pub psnr_db: Option<f64>,
}

/// Machine-readable outcome of [`validate_dataset`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub version: String,
    pub strict: bool,
    pub entries: usize,
    pub passed: bool,
    pub checks: BTreeMap<String, CheckCount>,
    pub failures: Vec<ValidationFailure>,
    pub photo_consistency: Vec<PsnrRecord>,
}

impl ValidationReport {
    fn record(&mut self, check: &str, id: Option<usize>, outcome: std::result::Result<(), String>) {
        let counter = self.checks.entry(check.to_string()).or_default();
        match outcome {
            Ok(()) => counter.pass += 1,
            Err(detail) => {
                counter.fail += 1;
                self.failures.push(ValidationFailure {
                    id,
                    check: check.to_string(),
                    detail,
                });
            }
        }
    }

    /// Accumulates one check's result; shorthand for `record`.
    fn verdict(&mut self, check: &str, id: usize, outcome: std::result::Result<(), String>) {
        self.record(check, Some(id), outcome);
    }

    pub fn failed_ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.failures.iter().filter_map(|f| f.id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

fn check_manifest(m: &DatasetManifest) -> std::result::Result<(), String> {
    if m.version != MANIFEST_VERSION {
        return Err(format!("version {:?}, expected {MANIFEST_VERSION:?}", m.version));
    }
    for (i, e) in m.entries.iter().enumerate() {
        if e.id != i {
            return Err(format!("entry {i} has id {}; ids must be dense and ordered", e.id));
        }
    }
    if m.config.digest() != m.config_digest {
        return Err("config_digest does not match the embedded config".into());
    }
    if m.canvas != m.config.canvas {
        return Err("canvas disagrees with the embedded config".into());
    }
    Ok(())
}

struct EntryCheckInputs {
    i1: Option<Image>,
    i2: Option<Image>,
    f12: Option<FlowField>,
    f13: Option<FlowField>,
    occ2: Option<BinaryMap>,
    holes2: Option<BinaryMap>,
    holes3: Option<BinaryMap>,
    owners2: Option<Vec<u8>>,
    owners3: Option<Vec<u8>>,
}

fn validate_entry(dir: &Path, canvas: Canvas, entry: &ManifestEntry, strict: bool, report: &mut ValidationReport) {
    let id = entry.id;
    let dims_ok = |w: usize, h: usize| (w, h) == (canvas.width, canvas.height);
    let mut file_problems: Vec<String> = Vec::new();
    let mut flo_problems: Vec<String> = Vec::new();

    for rel in entry.files.all() {
        if !dir.join(rel).is_file() {
            file_problems.push(format!("missing {rel}"));
        }
    }

    let load_rgb = |rel: &str, problems: &mut Vec<String>| match read_rgb(&dir.join(rel)) {
        Ok(img) if dims_ok(img.width(), img.height()) => Some(img),
        Ok(img) => {
            problems.push(format!("{rel}: {}x{} does not match canvas", img.width(), img.height()));
            None
        }
        Err(e) => {
            problems.push(e.to_string());
            None
        }
    };
    let i1 = load_rgb(&entry.files.i1, &mut file_problems);
    let i2 = load_rgb(&entry.files.i2, &mut file_problems);
    let _ = load_rgb(&entry.files.i3, &mut file_problems);

    let load_map = |rel: &str, problems: &mut Vec<String>| match read_binary_png(&dir.join(rel)) {
        Ok(m) if dims_ok(m.width(), m.height()) => Some(m),
        Ok(_) => {
            problems.push(format!("{rel}: size does not match canvas"));
            None
        }
        Err(e) => {
            problems.push(e.to_string());
            None
        }
    };
    let occ2 = load_map(&entry.files.occ2, &mut file_problems);
    let _ = load_map(&entry.files.occ3, &mut file_problems);
    let holes2 = load_map(&entry.files.holes2, &mut file_problems);
    let holes3 = load_map(&entry.files.holes3, &mut file_problems);

    let load_owners = |rel: &str, problems: &mut Vec<String>| match read_gray(&dir.join(rel)) {
        Ok((w, h, data)) if dims_ok(w, h) => Some(data),
        Ok(_) => {
            problems.push(format!("{rel}: size does not match canvas"));
            None
        }
        Err(e) => {
            problems.push(e.to_string());
            None
        }
    };
    let owners2 = load_owners(&entry.files.own2, &mut file_problems);
    let owners3 = load_owners(&entry.files.own3, &mut file_problems);

    let load_flow = |rel: &str, problems: &mut Vec<String>| match read_flo_file(&dir.join(rel)) {
        Ok(f) if dims_ok(f.width(), f.height()) => Some(f),
        Ok(f) => {
            problems.push(format!("{rel}: {}x{} does not match canvas", f.width(), f.height()));
            None
        }
        Err(e) => {
            problems.push(format!("{rel}: {e}"));
            None
        }
    };
    let f12 = load_flow(&entry.files.f12, &mut flo_problems);
    let f13 = load_flow(&entry.files.f13, &mut flo_problems);

    file_problems.sort();
    file_problems.dedup();
    report.verdict("files", id, if file_problems.is_empty() { Ok(()) } else { Err(file_problems.join("; ")) });
    report.verdict("flo", id, if flo_problems.is_empty() { Ok(()) } else { Err(flo_problems.join("; ")) });

    let inputs = EntryCheckInputs {
        i1,
        i2,
        f12,
        f13,
        occ2,
        holes2,
        holes3,
        owners2,
        owners3,
    };
    run_content_checks(id, &inputs, strict, report);
}

fn run_content_checks(id: usize, x: &EntryCheckInputs, strict: bool, report: &mut ValidationReport) {
    let holes = match (&x.holes2, &x.holes3) {
        (Some(a), Some(b)) if a.is_empty() && b.is_empty() => Ok(()),
        (Some(a), Some(b)) => Err(format!("{} / {} hole pixels at frames 2 / 3", a.count(), b.count())),
        _ => Err("hole maps unavailable".into()),
    };
    report.verdict("holes", id, holes);

    let doubling = match (&x.f12, &x.f13, &x.owners2, &x.owners3) {
        (Some(f12), Some(f13), Some(o2), Some(o3)) => match doubling_violations(f12, f13, o2, o3) {
            0 => Ok(()),
            n => Err(format!("{n} owned pixels violate f13 == 2 * f12")),
        },
        _ => Err("flows or ownership maps unavailable".into()),
    };
    report.verdict("doubling", id, doubling);

    if strict {
        let photo = match (&x.i1, &x.i2, &x.f12, &x.occ2, &x.holes2) {
            (Some(i1), Some(i2), Some(f12), Some(occ), Some(holes)) => {
                match photo_consistency_psnr(i1, i2, f12, occ, holes) {
                    Ok(p) => {
                        report.photo_consistency.push(PsnrRecord { id, psnr_db: p });
                        match p {
                            Some(db) if db >= PHOTO_CONSISTENCY_MIN_DB => Ok(()),
                            Some(db) => Err(format!("PSNR {db:.2} dB below {PHOTO_CONSISTENCY_MIN_DB} dB")),
                            None => Err("no unoccluded pixels to compare".into()),
                        }
                    }
                    Err(e) => Err(e.to_string()),
                }
            }
            _ => Err("inputs unavailable".into()),
        };
        report.verdict("photo_consistency", id, photo);
    }
}

/// Re-checks a dataset directory. Only an unreadable manifest is an error;
/// every other problem is recorded in the report.
pub fn validate_dataset(dir: &Path, strict: bool) -> Result<ValidationReport> {
    let manifest = DatasetManifest::load(dir)?;
    let mut report = ValidationReport {
        version: MANIFEST_VERSION.into(),
        strict,
        entries: manifest.entries.len(),
        passed: false,
        checks: BTreeMap::new(),
        failures: Vec::new(),
        photo_consistency: Vec::new(),
    };
    report.record("manifest", None, check_manifest(&manifest));

    let partials: Vec<ValidationReport> = manifest
        .entries
        .par_iter()
        .map(|entry| {
            let mut r = ValidationReport {
                checks: BTreeMap::new(),
                failures: Vec::new(),
                photo_consistency: Vec::new(),
                ..report.clone()
            };
            validate_entry(dir, manifest.canvas, entry, strict, &mut r);
            r
        })
        .collect();
    for part in partials {
        for (k, c) in part.checks {
            let counter = report.checks.entry(k).or_default();
            counter.pass += c.pass;
            counter.fail += c.fail;
        }
        report.failures.extend(part.failures);
        report.photo_consistency.extend(part.photo_consistency);
    }
    report.passed = report.checks.values().all(|c| c.fail == 0);
    Ok(report)
}

/// Validation pass with in-memory inputs, as used on freshly rendered triplets.
pub fn validate_triplet(t: &Triplet, strict: bool) -> ValidationReport {
    let mut report = ValidationReport {
        version: MANIFEST_VERSION.into(),
        strict,
        entries: 1,
        passed: false,
        checks: BTreeMap::new(),
        failures: Vec::new(),
        photo_consistency: Vec::new(),
    };
    let inputs = EntryCheckInputs {
        i1: Some(t.i1.clone()),
        i2: Some(t.i2.clone()),
        f12: Some(t.f12.clone()),
        f13: Some(t.f13.clone()),
        occ2: Some(t.occlusion2.clone()),
        holes2: Some(t.holes2.clone()),
        holes3: Some(t.holes3.clone()),
        owners2: Some(t.owners2.clone()),
        owners3: Some(t.owners3.clone()),
    };
    run_content_checks(0, &inputs, strict, &mut report);
    report.passed = report.checks.values().all(|c| c.fail == 0);
    report
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        Self {
            count: values.len(),
            mean: values.iter().sum::<f64>() / values.len() as f64,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DatasetStats {
    pub entries: usize,
    /// Mean `|F12|` over every pixel of every entry.
    pub mean_flow_magnitude: f64,
    pub mean_flow_magnitude_f13: f64,
    pub mask_area_fraction: Summary,
    pub sigma: Summary,
    /// Histogram of `K` (background included), keyed by layer count.
    pub layer_counts: BTreeMap<String, usize>,
}

pub fn dataset_stats(dir: &Path) -> Result<DatasetStats> {
    let manifest = DatasetManifest::load(dir)?;
    let mut stats = DatasetStats {
        entries: manifest.entries.len(),
        ..DatasetStats::default()
    };
    if manifest.entries.is_empty() {
        return Ok(stats);
    }
    let sums: Vec<Result<(f64, f64, usize)>> = manifest
        .entries
        .par_iter()
        .map(|e| {
            let f12 = read_flo_file(&dir.join(&e.files.f12))?;
            let f13 = read_flo_file(&dir.join(&e.files.f13))?;
            let n = f12.data().len();
            Ok((f12.mean_magnitude() * n as f64, f13.mean_magnitude() * n as f64, n))
        })
        .collect();
    let (mut s12, mut s13, mut pixels) = (0.0, 0.0, 0usize);
    for r in sums {
        let (a, b, n) = r?;
        s12 += a;
        s13 += b;
        pixels += n;
    }
    stats.mean_flow_magnitude = s12 / pixels as f64;
    stats.mean_flow_magnitude_f13 = s13 / pixels as f64;
    let areas: Vec<f64> = manifest.entries.iter().flat_map(|e| e.layers.iter().map(|l| l.area_fraction)).collect();
    let sigmas: Vec<f64> = manifest.entries.iter().flat_map(|e| e.layers.iter().map(|l| l.sigma)).collect();
    stats.mask_area_fraction = Summary::of(&areas);
    stats.sigma = Summary::of(&sigmas);
    for e in &manifest.entries {
        *stats.layer_counts.entry(e.layer_count.to_string()).or_default() += 1;
    }
    Ok(stats)
}
