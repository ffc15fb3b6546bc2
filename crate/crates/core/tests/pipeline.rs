use animsynth_core::check::{doubling_violations, photo_consistency_psnr, PHOTO_CONSISTENCY_MIN_DB};
use animsynth_core::config::{Canvas, FlowMaskAnchor};
use animsynth_core::mask::Polygon;
use animsynth_core::render::{derive_seed, sample_scene, BackgroundSpec, LayerSpec};
use animsynth_core::store::{procedural_still, SourceRef};
use animsynth_core::{generate_triplet, render_triplet, GenConfig, Homography, ImageStore, SceneSpec};

fn store() -> ImageStore {
    let mut s = ImageStore::new();
    for i in 0..3 {
        s.push(format!("still{i}"), procedural_still(10 + i, 200, 160));
    }
    s
}

fn square(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon {
    Polygon::new(vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]]).unwrap()
}

/// Static background plus one square object moved by `motion`. A large
/// alpha keeps the object unblurred so its mask stays binary.
fn one_object_scene(motion: Homography) -> SceneSpec {
    SceneSpec {
        seed: 0,
        canvas: Canvas::new(96, 72),
        source_margin: 16,
        alpha: 1e6,
        flow_mask_anchor: FlowMaskAnchor::Warped,
        background: BackgroundSpec {
            source: SourceRef {
                index: 0,
                scale: 1.0,
                origin: [3, 5],
            },
            motion: Homography::IDENTITY,
        },
        layers: vec![LayerSpec {
            source: SourceRef {
                index: 1,
                scale: 1.0,
                origin: [0, 0],
            },
            polygon: square(20.0, 16.0, 44.0, 40.0),
            hole: None,
            motion,
        }],
    }
}

#[test]
fn identity_scene_is_static() {
    let t = render_triplet(&one_object_scene(Homography::IDENTITY), &store()).unwrap();
    assert_eq!(t.i1, t.i2);
    assert_eq!(t.i1, t.i3);
    assert!(t.f12.data().iter().all(|f| *f == [0.0, 0.0]));
    assert!(t.f13.data().iter().all(|f| *f == [0.0, 0.0]));
    assert!(t.occlusion2.is_empty() && t.occlusion3.is_empty());
    assert!(t.holes2.is_empty() && t.holes3.is_empty());
    assert_eq!(t.layers[0].sigma, 0.0);
    assert!((t.layers[0].area_fraction - 576.0 / (96.0 * 72.0)).abs() < 1e-12);
}

#[test]
fn translated_object_moves_by_d_and_2d() {
    let (dx, dy) = (5usize, 3usize);
    let t = render_triplet(&one_object_scene(Homography::translation(dx as f64, dy as f64)), &store()).unwrap();
    for row in 16..40 {
        for col in 20..44 {
            assert_eq!(t.i2.pixel(col + dx, row + dy), t.i1.pixel(col, row));
            assert_eq!(t.i3.pixel(col + 2 * dx, row + 2 * dy), t.i1.pixel(col, row));
            assert_eq!(t.f12.get(col + dx, row + dy), [5.0, 3.0]);
            assert_eq!(t.f13.get(col + 2 * dx, row + 2 * dy), [10.0, 6.0]);
            assert_eq!(t.owners2[(row + dy) * 96 + col + dx], 1);
        }
    }
    // background far from the object stays put with zero flow
    assert_eq!(t.i2.pixel(80, 60), t.i1.pixel(80, 60));
    assert_eq!(t.f12.get(80, 60), [0.0, 0.0]);
    // the strip the object uncovers is occluded
    assert!(t.occlusion2.get(21, 20));
    assert!(!t.occlusion2.get(80, 60));
    assert_eq!(doubling_violations(&t.f12, &t.f13, &t.owners2, &t.owners3), 0);
}

#[test]
fn rendering_is_deterministic() {
    let cfg = GenConfig {
        canvas: Canvas::new(128, 96),
        ..GenConfig::default()
    };
    let s = store();
    let spec = sample_scene(&cfg, &s, 99).unwrap();
    let a = render_triplet(&spec, &s).unwrap();
    let b = render_triplet(&spec, &s).unwrap();
    assert_eq!(a.i1, b.i1);
    assert_eq!(a.i3, b.i3);
    assert_eq!(a.f13, b.f13);
    assert_eq!(a.occlusion3, b.occlusion3);
    assert_eq!(a.provenance, spec.digest());
}

#[test]
fn sampled_scenes_satisfy_doubling_and_photo_consistency() {
    let s = store();
    for anchor in [FlowMaskAnchor::Warped, FlowMaskAnchor::Source] {
        let cfg = GenConfig {
            canvas: Canvas::new(128, 96),
            flow_mask_anchor: anchor,
            ..GenConfig::default()
        };
        for i in 0..6 {
            let g = generate_triplet(&cfg, &s, derive_seed(5, i)).unwrap();
            let t = &g.triplet;
            assert_eq!(doubling_violations(&t.f12, &t.f13, &t.owners2, &t.owners3), 0);
            let p = photo_consistency_psnr(&t.i1, &t.i2, &t.f12, &t.occlusion2, &t.holes2)
                .unwrap()
                .unwrap();
            assert!(p >= PHOTO_CONSISTENCY_MIN_DB, "sample {i}: {p} dB");
            let k = g.spec.layer_count();
            assert!((2..=4).contains(&k));
            assert_eq!(t.layers.len(), k - 1);
        }
    }
}

#[test]
fn static_background_flag() {
    let cfg = GenConfig {
        canvas: Canvas::new(96, 64),
        background_static: true,
        ..GenConfig::default()
    };
    let spec = sample_scene(&cfg, &store(), 4).unwrap();
    assert!(spec.background.motion.is_identity());
}
