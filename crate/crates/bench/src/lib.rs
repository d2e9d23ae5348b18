//! Fixtures shared by the benchmarks.

use lpgs_core::config::Preset;
use lpgs_core::synth::{generate, render_gaussians, SynthConfig};
use lpgs_core::trainer::TrainView;
use lpgs_core::{ContractionMode, SceneModel};

/// A c1-mini model initialized on a synthetic scene, with its training views.
pub fn synthetic_setup(n_gaussians: usize, resolution: usize) -> (SceneModel<f32>, Vec<TrainView<f32>>) {
    let cfg = SynthConfig {
        seed: 1,
        n_gaussians,
        n_cameras: 4,
        resolution,
        ..SynthConfig::default()
    };
    let scene = generate(&cfg);
    let model = SceneModel::initialize(Preset::C1Mini.config(), &scene.init_points, ContractionMode::Verbatim, 1)
        .expect("synthetic scene initializes");
    let views = scene
        .train_cameras
        .iter()
        .map(|c| TrainView {
            camera: c.clone(),
            image: render_gaussians(&scene.gaussians, c, cfg.background).cast(),
        })
        .collect();
    (model, views)
}
