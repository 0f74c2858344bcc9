use landmark_cascade::manifest::Manifest;
use landmark_cascade::model3d::{builtin_model3d, load_model3d, model3d_from_str, model3d_to_string};
use landmark_cascade::model_file::{model_from_str, model_to_string};
use landmark_cascade::pts::{format_pts, parse_pts, read_pts, write_pts};
use landmark_cascade::{image_io, Error};
use landmark_cascade_core::balance::uniform_plan;
use landmark_cascade_core::cascade::train_cascade;
use landmark_cascade_core::rng::{rng_for, stream};
use landmark_cascade_core::synth::generate_synthetic;
use landmark_cascade_core::{FeatureMode, Model3D, Point2, Shape, SynthConfig, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn pts_round_trip_random_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dir = tempfile::tempdir().unwrap();
    for i in 0..200 {
        let k = rng.random_range(1..70);
        let pts: Vec<Point2> =
            (0..k).map(|_| Point2::new(rng.random_range(-1e4..1e4), rng.random_range(-1e4..1e4))).collect();
        let shape = Shape::new(pts).unwrap();
        let path = dir.path().join(format!("{i}.pts"));
        write_pts(&path, &shape).unwrap();
        let back = read_pts(&path).unwrap();
        let dev = shape.points().iter().zip(back.points()).map(|(a, b)| a.distance(*b)).fold(0.0, f64::max);
        assert!(dev <= 1e-6, "deviation {dev}");
        assert_eq!(format_pts(&back), format_pts(&shape));
    }
}

#[test]
fn pts_accepts_crlf_and_extra_whitespace() {
    let s = parse_pts("version: 1\r\nn_points:   2\r\n{\r\n  1.5\t2.5 \r\n3 4\r\n}\r\n").unwrap();
    assert_eq!(s.points(), &[Point2::new(1.5, 2.5), Point2::new(3.0, 4.0)]);
}

#[test]
fn shipped_3d_models_match_builtins() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    for name in ["face5", "face68", "sheep8"] {
        let from_file = load_model3d(&format!("{dir}/{name}.json")).unwrap();
        assert_eq!(from_file, builtin_model3d(name).unwrap(), "{name}");
        assert_eq!(model3d_from_str(&model3d_to_string(name, &from_file)).unwrap(), from_file);
    }
    let planar = r#"{"points": [[0,0,0],[1,0,0],[0,1,0],[1,1,0]]}"#;
    assert!(model3d_from_str(planar).is_err());
    assert!(load_model3d("no/such/model.json").is_err());
}

#[test]
fn images_round_trip_through_png() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SynthConfig { count: 2, image_size: 40, ..SynthConfig::default() };
    for s in generate_synthetic(&cfg).unwrap() {
        let path = dir.path().join(format!("{}.png", s.id));
        image_io::write_png(&path, &s.image).unwrap();
        assert_eq!(image_io::read_gray(&path).unwrap(), s.image);
    }
    let rgb = dir.path().join("rgb.png");
    image::RgbImage::from_pixel(3, 2, image::Rgb([255, 0, 0])).save(&rgb).unwrap();
    let gray = image_io::read_gray(&rgb).unwrap();
    assert!(gray.pixels().iter().all(|&p| p == 76));
}

fn small_model(mode: FeatureMode) -> (landmark_cascade_core::CascadeModel, Vec<landmark_cascade_core::Sample>) {
    let samples = generate_synthetic(&SynthConfig { count: 12, image_size: 48, seed: 3, ..SynthConfig::default() }).unwrap();
    let cfg = TrainConfig { mode, stages: 2, ferns_per_stage: 5, pool_size: 30, pair_count: 40, ..TrainConfig::default() };
    (train_cascade(&samples, &uniform_plan(12, 3).unwrap(), &cfg).unwrap().0, samples)
}

#[test]
fn model_file_round_trip_is_exact_for_every_mode() {
    for mode in [FeatureMode::Tif, FeatureMode::Pair, FeatureMode::Offset] {
        let (model, samples) = small_model(mode);
        let text = model_to_string(&model);
        let back = model_from_str(&text).unwrap();
        assert_eq!(back, model);
        assert_eq!(model_to_string(&back), text);
        for (i, s) in samples.iter().enumerate() {
            let a = model.predict(&s.image, &s.bbox, 3, &mut rng_for(9, stream::PREDICT, i as u64)).unwrap();
            let b = back.predict(&s.image, &s.bbox, 3, &mut rng_for(9, stream::PREDICT, i as u64)).unwrap();
            assert_eq!(a, b);
        }
    }
}

#[test]
fn corrupted_model_files_are_rejected() {
    let (model, _) = small_model(FeatureMode::Tif);
    let text = model_to_string(&model);
    let bad_magic = text.replacen("landmark-cascade-model", "landmark-cascade-modex", 1);
    assert!(matches!(model_from_str(&bad_magic), Err(Error::Data(m)) if m.contains("magic")));
    let truncated = &text[..text.len() / 2];
    assert!(model_from_str(truncated).is_err());
    let wrong_k = text.replacen("\"k\":5", "\"k\":4", 1);
    assert!(model_from_str(&wrong_k).is_err());
}

#[test]
fn manifest_reloads_to_equal_samples() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("set");
    let code = landmark_cascade::cli::main_with_args([
        "landmark-cascade", "synth", "--out", out.to_str().unwrap(), "--count", "4", "--size", "48",
    ]);
    assert_eq!(code, 0);
    let manifest = Manifest::load(&out.join("manifest.json")).unwrap();
    let samples = manifest.load_samples(&out).unwrap();
    let cfg = SynthConfig { count: 4, image_size: 48, ..SynthConfig::default() };
    let generated = generate_synthetic(&cfg).unwrap();
    for (a, b) in samples.iter().zip(&generated) {
        assert_eq!(a.image, b.image);
        assert_eq!(a.bbox, b.bbox);
        assert_eq!(a.pose, b.pose);
        let dev = a.truth().unwrap().points().iter().zip(b.truth().unwrap().points()).map(|(p, q)| p.distance(*q));
        assert!(dev.fold(0.0, f64::max) <= 1e-6);
    }
    assert_eq!(Model3D::builtin(manifest.landmarks).unwrap().len(), 5);
}
