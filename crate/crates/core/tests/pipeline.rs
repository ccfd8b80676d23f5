use std::path::Path;

use gmm_reparam::data::{load_trajectory, mean_trajectory};
use gmm_reparam::gmr::{default_times, regress, DEFAULT_RATE};
use gmm_reparam::metrics::{boundary_error, shape_deviation, SHAPE_SAMPLES};
use gmm_reparam::model::{fit_demonstrations, load_model, save_model, FitConfig};
use gmm_reparam::reparam::{generalize, ReparamConfig, TaskSpec};
use gmm_reparam::scene::{load_scene, Scene};
use gmm_reparam::synth::{generate_demonstrations, write_demonstrations, SynthConfig};

#[test]
fn bundled_scene_is_the_default() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenes/desk.json");
    assert_eq!(load_scene(&path).unwrap(), Scene::desk_default());
}

#[test]
fn files_round_trip_through_the_whole_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let scene = Scene::desk_default();
    let synth = SynthConfig::for_scene(&scene);
    let demos = generate_demonstrations(&scene, &synth).unwrap();
    let manifest = write_demonstrations(dir.path(), &demos, &synth, &scene).unwrap();
    let loaded: Vec<_> = manifest
        .files
        .iter()
        .map(|f| load_trajectory(&dir.path().join(f)).unwrap())
        .collect();
    assert_eq!(loaded, demos);

    let fit = fit_demonstrations(&loaded, synth.phases(), &FitConfig::default()).unwrap();
    let path = dir.path().join("model.json");
    save_model(&fit.model, &path).unwrap();
    let model = load_model(&path).unwrap();
    assert_eq!(model, fit.model);

    let mean = mean_trajectory(&demos).unwrap();
    let task = TaskSpec::new(mean.first_pose(), mean.last_pose()).unwrap();
    let out = generalize(&model, &task, &ReparamConfig::default()).unwrap();
    let traj = regress(&out, &default_times(model.duration, DEFAULT_RATE)).unwrap();
    assert!(shape_deviation(&traj, &mean, SHAPE_SAMPLES).unwrap() < 1e-3);
    let (s, g) = boundary_error(&traj, &task).unwrap();
    assert!(s.mm < 2.0 && g.mm < 2.0 && s.deg < 0.5 && g.deg < 0.5);
}
