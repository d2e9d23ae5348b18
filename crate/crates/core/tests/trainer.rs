use lpgs_core::config::{HashGridConfig, ModelConfig};
use lpgs_core::image::Image;
use lpgs_core::raster::render;
use lpgs_core::scene::{Camera, SceneModel};
use lpgs_core::spatial::ContractionMode;
use lpgs_core::trainer::{
    loss, run_training, ssim, LrRange, OptimizerState, ParamGroup, TrainConfig, TrainView, Trainer, TrainerError,
    NETWORK_GROUPS,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(w: usize, h: usize, seed: u64) -> Image<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img = Image::new(w, h);
    for v in img.data.iter_mut() {
        *v = rng.random();
    }
    img
}

/// Direct 2D windowed SSIM with explicit zero padding.
fn ssim_oracle(a: &Image<f64>, b: &Image<f64>) -> f64 {
    let (w, h) = (a.width as isize, a.height as isize);
    let mut win = [[0.0; 11]; 11];
    let mut total = 0.0;
    for i in 0..11 {
        for j in 0..11 {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            win[i][j] = (-(di * di + dj * dj) / (2.0 * 1.5 * 1.5)).exp();
            total += win[i][j];
        }
    }
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut acc = 0.0;
    for c in 0..3 {
        for y in 0..h {
            for x in 0..w {
                let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in 0..11isize {
                    for j in 0..11isize {
                        let (sy, sx) = (y + i - 5, x + j - 5);
                        if sy < 0 || sx < 0 || sy >= h || sx >= w {
                            continue;
                        }
                        let g = win[i as usize][j as usize] / total;
                        let p = a.pixel(sx as usize, sy as usize)[c];
                        let q = b.pixel(sx as usize, sy as usize)[c];
                        mx += g * p;
                        my += g * q;
                        xx += g * p * p;
                        yy += g * q * q;
                        xy += g * p * q;
                    }
                }
                let (vx, vy, cxy) = (xx - mx * mx, yy - my * my, xy - mx * my);
                acc += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            }
        }
    }
    acc / (3 * a.width * a.height) as f64
}

#[test]
fn ssim_matches_windowed_oracle() {
    for seed in 0..5 {
        let a = random_image(32, 32, seed);
        let mut b = a.clone();
        let noise = random_image(32, 32, seed + 100);
        for (v, n) in b.data.iter_mut().zip(&noise.data) {
            *v = (*v * 0.7 + 0.3 * n).clamp(0.0, 1.0);
        }
        let got = ssim(&a, &b).unwrap();
        let want = ssim_oracle(&a, &b);
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }
}

#[test]
fn loss_gradient_matches_finite_differences() {
    let a = random_image(14, 11, 1);
    let b = random_image(14, 11, 2);
    let (_, g) = loss(&a, &b, 0.2).unwrap();
    let eps = 1e-6;
    let mut num = Vec::new();
    let mut ana = Vec::new();
    for k in (0..a.data.len()).step_by(5) {
        let mut p = a.clone();
        p.data[k] += eps;
        let mut m = a.clone();
        m.data[k] -= eps;
        let lp = loss(&p, &b, 0.2).unwrap().0.total;
        let lm = loss(&m, &b, 0.2).unwrap().0.total;
        num.push((lp - lm) / (2.0 * eps));
        ana.push(g.data[k]);
    }
    let d: f64 = num.iter().zip(&ana).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let n: f64 = num.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(d / n < 1e-4, "relative error {}", d / n);
}

fn toy_model(points: &[[f64; 3]], k: usize, seed: u64) -> SceneModel<f32> {
    let mut cfg = ModelConfig::new(8, k);
    cfg.grid = HashGridConfig::with_finest(4, 1 << 12, 2, 4, 64);
    SceneModel::initialize(cfg, points, ContractionMode::Verbatim, seed).unwrap()
}

fn toy_views(n: usize) -> Vec<TrainView<f32>> {
    // a single orange blob at the origin
    let blob = lpgs_core::scene::GaussianAttributes {
        position: [0.0, 0.0, 0.0],
        scale: [0.3, 0.2, 0.25],
        rotation: [1.0, 0.0, 0.0, 0.0],
        opacity: 0.9,
        color: [0.9, 0.5, 0.1],
    };
    (0..n)
        .map(|i| {
            let a = i as f64 * 1.3;
            let cam = Camera::look_at([3.0 * a.cos(), 3.0 * a.sin(), 0.8], [0.0; 3], [0.0, 0.0, 1.0], 0.8, 24, 24);
            let img = lpgs_core::synth::render_gaussians(&[blob], &cam, [0.0; 3]);
            TrainView {
                camera: cam,
                image: img.cast(),
            }
        })
        .collect()
}

fn quick_config(steps: usize) -> TrainConfig {
    TrainConfig {
        total_steps: steps,
        warmup_steps: 0,
        warmup_downscale: 1,
        atm_enabled: false,
        psnr_interval: 0,
        seed: 5,
        ..TrainConfig::default()
    }
}

#[test]
fn loss_decreases_on_single_blob() {
    let pts = [[0.05, 0.0, 0.0], [-0.3, 0.2, 0.1]];
    let mut cfg = quick_config(200);
    for g in ParamGroup::ALL {
        cfg.lr_table.0.insert(g, LrRange::constant(5e-3));
    }
    let (_, log) = run_training(toy_views(4), toy_model(&pts, 2, 1), cfg, |_| {}).unwrap();
    assert_eq!(log.steps.len(), 200);
    let first: f64 = log.steps[..20].iter().map(|s| s.loss).sum::<f64>() / 20.0;
    let last: f64 = log.steps[180..].iter().map(|s| s.loss).sum::<f64>() / 20.0;
    assert!(last < 0.7 * first, "{first} -> {last}");
}

#[test]
fn same_seed_is_bit_identical() {
    let pts: Vec<[f64; 3]> = (0..6).map(|i| [0.1 * i as f64 - 0.3, 0.05 * i as f64, 0.0]).collect();
    let mut cfg = quick_config(50);
    cfg.atm_enabled = true;
    cfg.densify_start = 10;
    cfg.densify_interval = 10;
    cfg.densify_end = 40;
    let (a, _) = run_training(toy_views(3), toy_model(&pts, 2, 3), cfg.clone(), |_| {}).unwrap();
    let (b, _) = run_training(toy_views(3), toy_model(&pts, 2, 3), cfg, |_| {}).unwrap();
    assert_eq!(a.parents, b.parents);
    assert_eq!(a.grid.tables, b.grid.tables);
    assert_eq!(a.nets, b.nets);
}

#[test]
fn zero_steps_returns_the_input() {
    let pts = [[0.0, 0.0, 0.0], [0.3, 0.1, 0.0]];
    let m = toy_model(&pts, 2, 2);
    let (out, log) = run_training(toy_views(2), m.clone(), quick_config(0), |_| {}).unwrap();
    assert_eq!(out, m);
    assert!(log.steps.is_empty());
}

#[test]
fn perfect_fit_leaves_parameters_unchanged() {
    let pts = [[0.0, 0.0, 0.0], [0.3, 0.1, 0.0]];
    let m = toy_model(&pts, 2, 2);
    let cam = toy_views(1)[0].camera.clone();
    let gt = render(&m, &cam, [0.0; 3]).unwrap().image;
    let views = vec![TrainView { camera: cam, image: gt }];
    let mut t = Trainer::new(m.clone(), views, quick_config(3)).unwrap();
    t.advance().unwrap();
    assert_eq!(t.model.parents, m.parents);
    assert_eq!(t.model.grid.tables, m.grid.tables);
    assert_eq!(t.model.nets, m.nets);
}

#[test]
fn nan_grid_aborts_with_group() {
    let pts = [[0.0, 0.0, 0.0], [0.3, 0.1, 0.0]];
    let mut m = toy_model(&pts, 2, 2);
    m.grid.tables.iter_mut().for_each(|v| *v = f32::NAN);
    let err = run_training(toy_views(2), m, quick_config(2), |_| {}).unwrap_err();
    assert!(
        matches!(err, TrainerError::NonFiniteLoss { step: 0, group: ParamGroup::Grid }),
        "{err}"
    );
}

#[test]
fn frozen_networks_with_no_children_move_only_parents() {
    let pts = [[0.05, 0.0, 0.0], [-0.2, 0.1, 0.0], [0.1, -0.2, 0.1]];
    let m = toy_model(&pts, 0, 4);
    let mut cfg = quick_config(20);
    for g in NETWORK_GROUPS.into_iter().chain([ParamGroup::Grid]) {
        cfg.lr_table.0.insert(g, LrRange::constant(0.0));
    }
    cfg.lr_table.0.insert(ParamGroup::Position, LrRange::constant(1e-2));
    let (out, _) = run_training(toy_views(3), m.clone(), cfg, |_| {}).unwrap();
    assert_eq!(out.nets, m.nets);
    assert_eq!(out.grid.tables, m.grid.tables);
    assert_ne!(out.parents, m.parents);
    assert_eq!(out.splat_count(), 3);
}

#[test]
fn invalid_configs_are_rejected() {
    let pts = [[0.0, 0.0, 0.0], [0.3, 0.1, 0.0]];
    let mut cfg = quick_config(10);
    cfg.beta = 1.5;
    assert!(matches!(
        Trainer::new(toy_model(&pts, 2, 0), toy_views(1), cfg),
        Err(TrainerError::InvalidConfig(_))
    ));
    let mut cfg = quick_config(10);
    cfg.warmup_steps = 10;
    assert!(matches!(
        Trainer::new(toy_model(&pts, 2, 0), toy_views(1), cfg),
        Err(TrainerError::InvalidConfig(_))
    ));
    assert!(matches!(
        Trainer::new(toy_model(&pts, 2, 0), Vec::new(), quick_config(10)),
        Err(TrainerError::EmptyDataset)
    ));
}

#[test]
fn optimizer_shapes_follow_the_model() {
    let pts = [[0.0, 0.0, 0.0], [0.3, 0.1, 0.0]];
    let m = toy_model(&pts, 2, 0);
    let mut opt = OptimizerState::new(&m);
    assert!(opt.matches(&m));
    opt.remap_parents(&[Some(1), None, Some(0)]);
    let mut m3 = m.clone();
    m3.parents.push(m.parents[0]);
    m3.provenance.push(m.provenance[0]);
    assert!(opt.matches(&m3));
}
