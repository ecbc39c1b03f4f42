use std::collections::BTreeMap;

use nalgebra::Vector3;
use occlusion3d::estimation::{fit_map, fit_scene, group_by_object, init_closed_form, InitMethod, SolverOptions};
use occlusion3d::geometry::{min_volume_enclosing_ellipsoid, MVEE_DEFAULT_TOL};
use occlusion3d::metrics::{evaluate, o3d, DEFAULT_IOU_SAMPLES};
use occlusion3d::simulation::{generate_scene, render_detections, NoiseModel, SceneConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn closed_form_init_recovers_noiseless_objects() {
    for seed in 0..5 {
        let scene = generate_scene(&SceneConfig { seed, ..SceneConfig::default() }).unwrap();
        let dets = render_detections(&scene, &NoiseModel::noiseless(), seed).unwrap();
        let init = init_closed_form(&dets, &scene.cameras).unwrap();
        let iou = o3d(&scene.objects[&0], &init, DEFAULT_IOU_SAMPLES, seed);
        assert!(iou.iou >= 0.999, "seed {seed}: {iou:?}");
    }
}

#[test]
fn single_object_scene_matches_fit_map() {
    let scene = generate_scene(&SceneConfig { seed: 8, ..SceneConfig::default() }).unwrap();
    let dets = render_detections(&scene, &NoiseModel::default(), 8).unwrap();
    let opts = SolverOptions::default();
    let fit = fit_scene(&dets, &scene.cameras, &opts);
    let init = init_closed_form(&dets, &scene.cameras).unwrap();
    let mut direct = fit_map(&dets, &scene.cameras, &init, &opts).unwrap();
    direct.init = InitMethod::ClosedForm;
    assert_eq!(fit.reports[&0], direct);
}

#[test]
fn fourteen_object_scene() {
    let cfg = SceneConfig { n_objects: 14, n_cameras: 16, scale_range: [0.05, 0.15], seed: 1, ..SceneConfig::default() };
    let scene = generate_scene(&cfg).unwrap();
    let noise = NoiseModel { base_sigma: [0.01; 6], ..NoiseModel::default() };
    let dets = render_detections(&scene, &noise, 2).unwrap();
    assert_eq!(group_by_object(&dets).len(), 14);
    let fit = fit_scene(&dets, &scene.cameras, &SolverOptions::default());
    assert!(fit.failures.is_empty(), "{:?}", fit.failures);
    let estimates: BTreeMap<_, _> = fit.reports.iter().map(|(id, r)| (*id, r.q_hat)).collect();
    let eval = evaluate(&scene.objects, &estimates, 50_000, 3);
    assert_eq!(eval.per_object.len(), 14);
    assert!(eval.o3d > 0.7, "mean O3D {}", eval.o3d);
}

#[test]
fn mvee_of_sampled_surface_is_a_ground_truth_ellipsoid() {
    // Points on a known ellipsoid surface: the enclosing ellipsoid is that ellipsoid.
    let scene = generate_scene(&SceneConfig { seed: 21, ..SceneConfig::default() }).unwrap();
    let q = scene.objects[&0];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let rot = q.rotation();
    let points: Vec<Vector3<f64>> = (0..400)
        .map(|_| {
            let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                .normalize();
            q.center() + rot * Vector3::new(v.x * q.s()[0], v.y * q.s()[1], v.z * q.s()[2])
        })
        .collect();
    let mvee = min_volume_enclosing_ellipsoid(&points, MVEE_DEFAULT_TOL).unwrap();
    assert!(o3d(&q, &mvee, DEFAULT_IOU_SAMPLES, 0).iou > 0.99);
}
