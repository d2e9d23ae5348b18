//! Desk-scale synthetic scenes: random explicit splats in `[-1,1]^3` seen by
//! cameras on a sphere around the origin.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::image::Image;
use crate::raster::{project, rasterize};
use crate::scene::{Camera, GaussianAttributes};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_gaussians: usize,
    /// Training views.
    pub n_cameras: usize,
    /// Held-out views, drawn after the training views.
    pub n_test: usize,
    /// Square image side in pixels.
    pub resolution: usize,
    pub background: [f64; 3],
    /// Standard deviation of the noise added to the initialization points.
    pub init_jitter: f64,
    pub camera_distance: f64,
    pub fov_y: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_gaussians: 50,
            n_cameras: 20,
            n_test: 1,
            resolution: 64,
            background: [0.0; 3],
            init_jitter: 0.0,
            camera_distance: 4.0,
            fov_y: 0.9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthScene {
    pub gaussians: Vec<GaussianAttributes<f64>>,
    pub train_cameras: Vec<Camera>,
    pub test_cameras: Vec<Camera>,
    pub init_points: Vec<[f64; 3]>,
}

fn random_camera<G: Rng>(rng: &mut G, cfg: &SynthConfig) -> Camera {
    let azimuth = rng.random_range(0.0..std::f64::consts::TAU);
    let elevation: f64 = rng.random_range(-0.35..1.0);
    let d = cfg.camera_distance;
    let eye = [
        d * elevation.cos() * azimuth.cos(),
        d * elevation.cos() * azimuth.sin(),
        d * elevation.sin(),
    ];
    Camera::look_at(eye, [0.0; 3], [0.0, 0.0, 1.0], cfg.fov_y, cfg.resolution, cfg.resolution)
}

pub fn generate(cfg: &SynthConfig) -> SynthScene {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let gaussians: Vec<GaussianAttributes<f64>> = (0..cfg.n_gaussians)
        .map(|_| {
            let position = [(); 3].map(|_| rng.random_range(-1.0..1.0));
            let scale = [(); 3].map(|_| (rng.random_range(0.06f64.ln()..0.3f64.ln())).exp());
            let q: [f64; 4] = [(); 4].map(|_| rng.sample(StandardNormal));
            let n = q.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            GaussianAttributes {
                position,
                scale,
                rotation: q.map(|v| v / n),
                opacity: rng.random_range(0.6..1.0),
                color: [(); 3].map(|_| rng.random_range(0.05..0.95)),
            }
        })
        .collect();
    let train_cameras = (0..cfg.n_cameras).map(|_| random_camera(&mut rng, cfg)).collect();
    let test_cameras = (0..cfg.n_test).map(|_| random_camera(&mut rng, cfg)).collect();
    let init_points = gaussians
        .iter()
        .map(|g| {
            g.position.map(|p| {
                if cfg.init_jitter > 0.0 {
                    p + cfg.init_jitter * rng.sample::<f64, _>(StandardNormal)
                } else {
                    p
                }
            })
        })
        .collect();
    SynthScene {
        gaussians,
        train_cameras,
        test_cameras,
        init_points,
    }
}

/// Render explicit splats with the production rasterizer.
pub fn render_gaussians(gaussians: &[GaussianAttributes<f64>], camera: &Camera, background: [f64; 3]) -> Image<f64> {
    let splats: Vec<_> = gaussians.iter().filter_map(|g| project(g, camera)).collect();
    rasterize(&splats, background, camera.width, camera.height).0.image
}
