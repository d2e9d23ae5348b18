use lpgs_core::atm::{
    check_forest, densify_event, densify_parents, promote_children, prune_trees, AtmConfig, AtmError, AtmStats,
};
use lpgs_core::config::{HashGridConfig, ModelConfig};
use lpgs_core::predictor::{expand_static, ParentGrad};
use lpgs_core::raster::render;
use lpgs_core::scene::{Camera, Provenance, SceneModel};
use lpgs_core::spatial::ContractionMode;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const K: usize = 2;
const NODES: usize = K + 1;

fn model(n: usize) -> SceneModel<f64> {
    let pts: Vec<[f64; 3]> = (0..n)
        .map(|i| {
            let t = i as f64 * 0.9;
            [0.6 * t.cos(), 0.6 * t.sin(), 0.1 * i as f64 - 0.2]
        })
        .collect();
    let mut cfg = ModelConfig::new(8, K);
    cfg.grid = HashGridConfig::with_finest(4, 1 << 12, 2, 4, 64);
    SceneModel::initialize(cfg, &pts, ContractionMode::Verbatim, 9).unwrap()
}

fn camera() -> Camera {
    Camera::look_at([0.0, -3.0, 0.5], [0.0; 3], [0.0, 0.0, 1.0], 0.9, 32, 32)
}

/// Mark every parent as seen with the given mean gradient and opacity.
fn observe_parents(stats: &mut AtmStats, grad: f64, opacity: f64) {
    for p in 0..stats.parents() {
        stats.grad_sum[p * NODES] = grad;
        stats.count[p * NODES] = 1;
        stats.max_opacity[p] = opacity;
    }
}

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0)
}

#[test]
fn splat_count_is_parents_times_tree_size() {
    let mut m = model(5);
    let cfg = AtmConfig::default();
    let mut stats = AtmStats::for_model(&m);
    observe_parents(&mut stats, 1.0, 0.5);
    stats.grad_sum[1] = 1.0;
    stats.count[1] = 1;
    densify_event(&mut m, &mut stats, &cfg, 100, 1e-4, &mut rng()).unwrap();
    assert_eq!(m.splat_count(), m.parents.len() * NODES);
    assert_eq!(render(&m, &camera(), [0.0; 3]).unwrap().visible.len(), m.splat_count());
    check_forest(&m).unwrap();
}

#[test]
fn accumulate_uses_ndc_scaling_and_visibility() {
    let m = model(2);
    let mut stats = AtmStats::for_model(&m);
    let screen = vec![[1.0f64, 0.0]; 2 * NODES];
    let mut visible = vec![true; 2 * NODES];
    visible[NODES] = false;
    let opacity = vec![0.3; 2 * NODES];
    let world = vec![
        ParentGrad {
            position: [1.0, 2.0, 3.0],
            log_scale: [0.0; 3]
        };
        2
    ];
    stats.accumulate(&screen, &visible, &opacity, &world, 64, 32, true);
    stats.accumulate(&screen, &visible, &opacity, &world, 64, 32, false);
    assert_eq!(stats.count[0], 2);
    assert_eq!(stats.count[1], 1);
    assert_eq!(stats.count[NODES], 0);
    assert!((stats.mean_grad(0) - 32.0).abs() < 1e-12);
    assert_eq!(stats.world_grad_sum[0], [2.0, 4.0, 6.0]);
    assert_eq!(stats.world_grad_sum[1], [0.0; 3]);
    assert_eq!(stats.max_opacity[0], 0.3);
}

#[test]
fn promotion_none_one_and_idempotent() {
    let cfg = AtmConfig::default();
    let mut m = model(4);
    let mut stats = AtmStats::for_model(&m);
    stats.grad_sum[1] = 0.5 * cfg.child_grad_threshold;
    stats.count[1] = 1;
    let before = m.clone();
    promote_children(&mut m, &mut stats, &cfg).unwrap();
    assert_eq!(m.parents, before.parents);

    // one hot child of parent 2
    let hot = 2 * NODES + 2;
    stats.grad_sum[hot] = 10.0 * cfg.child_grad_threshold;
    stats.count[hot] = 1;
    let tree = expand_static(&m.parents[2], &m).unwrap();
    let sources = promote_children(&mut m, &mut stats, &cfg).unwrap();
    assert_eq!(m.parents.len(), 5);
    assert_eq!(sources, vec![Some(0), Some(1), Some(2), Some(3), None]);
    assert_eq!(m.provenance[4], Provenance::Promoted);
    let promoted = m.parents[4];
    assert_eq!(promoted.position, tree.nodes[2].position);
    for a in 0..3 {
        assert!((promoted.scale()[a] - tree.nodes[2].scale[a]).abs() < 1e-12);
    }

    let snapshot = m.clone();
    promote_children(&mut m, &mut stats, &cfg).unwrap();
    assert_eq!(m.parents, snapshot.parents);
}

#[test]
fn promotion_can_be_disabled() {
    let cfg = AtmConfig {
        promote_children: false,
        ..AtmConfig::default()
    };
    let mut m = model(3);
    let mut stats = AtmStats::for_model(&m);
    stats.grad_sum[1] = 1.0;
    stats.count[1] = 1;
    promote_children(&mut m, &mut stats, &cfg).unwrap();
    assert_eq!(m.parents.len(), 3);
}

#[test]
fn clone_keeps_original_and_steps_along_gradient() {
    let cfg = AtmConfig::default();
    let mut m = model(3);
    let boundary = cfg.split_scale_factor * m.contraction.scene_extent();
    m.parents[1].log_scale = [(0.5 * boundary).ln(); 3];
    let mut stats = AtmStats::for_model(&m);
    stats.grad_sum[NODES] = 1.0;
    stats.count[NODES] = 2;
    stats.world_grad_sum[1] = [2.0, -4.0, 6.0];
    let orig = m.parents[1];
    let lr = 0.01;
    let (sources, counts) = densify_parents(&mut m, &mut stats, &cfg, lr, &mut rng()).unwrap();
    assert_eq!((counts.clones, counts.splits), (1, 0));
    assert_eq!(sources, vec![Some(0), Some(1), Some(2), None]);
    assert_eq!(m.parents[1], orig);
    let c = m.parents[3];
    let want = [orig.position[0] - 0.01, orig.position[1] + 0.02, orig.position[2] - 0.03];
    for a in 0..3 {
        assert!((c.position[a] - want[a]).abs() < 1e-12);
    }
    assert_eq!(c.log_scale, orig.log_scale);
    assert_eq!(m.provenance[3], Provenance::Densified);
}

#[test]
fn split_replaces_parent_with_two_smaller_ones() {
    let cfg = AtmConfig::default();
    let mut m = model(3);
    let boundary = cfg.split_scale_factor * m.contraction.scene_extent();
    m.parents[0].log_scale = [(4.0 * boundary).ln(); 3];
    let mut stats = AtmStats::for_model(&m);
    stats.grad_sum[0] = 1.0;
    stats.count[0] = 1;
    let orig = m.parents[0];
    let (sources, counts) = densify_parents(&mut m, &mut stats, &cfg, 0.0, &mut rng()).unwrap();
    assert_eq!((counts.clones, counts.splits), (0, 1));
    assert_eq!(sources, vec![Some(1), Some(2), None, None]);
    assert_eq!(m.parents.len(), 4);
    for p in &m.parents[2..] {
        for a in 0..3 {
            assert!((p.log_scale[a] - (orig.log_scale[a] - 1.6f64.ln())).abs() < 1e-12);
        }
        assert_ne!(p.position, orig.position);
    }
    assert_eq!(m.splat_count(), 4 * NODES);
}

#[test]
fn max_parents_caps_growth() {
    let cfg = AtmConfig {
        max_parents: 4,
        ..AtmConfig::default()
    };
    let mut m = model(3);
    let mut stats = AtmStats::for_model(&m);
    observe_parents(&mut stats, 1.0, 0.5);
    densify_parents(&mut m, &mut stats, &cfg, 0.0, &mut rng()).unwrap();
    assert!(m.parents.len() <= 5, "{}", m.parents.len());
    let n = m.parents.len();
    let mut stats = AtmStats::for_model(&m);
    observe_parents(&mut stats, 1.0, 0.5);
    densify_parents(&mut m, &mut stats, &cfg, 0.0, &mut rng()).unwrap();
    assert_eq!(m.parents.len(), n);
}

#[test]
fn prune_removes_transparent_trees_and_their_pixels() {
    let cfg = AtmConfig::default();
    let mut m = model(5);
    let mut stats = AtmStats::for_model(&m);
    observe_parents(&mut stats, 0.0, 0.5);
    stats.max_opacity[1] = 0.001;
    stats.max_opacity[3] = 0.001;
    // unseen parents are never opacity-pruned
    stats.count[4 * NODES] = 0;
    stats.max_opacity[4] = 0.0;
    let before = m.clone();
    let sources = prune_trees(&mut m, &mut stats, &cfg).unwrap();
    assert_eq!(sources, vec![Some(0), Some(2), Some(4)]);
    assert_eq!(m.splat_count(), 3 * NODES);

    let mut manual = before.clone();
    manual.parents = vec![before.parents[0], before.parents[2], before.parents[4]];
    manual.provenance = vec![Provenance::Init; 3];
    let a = render(&m, &camera(), [0.0; 3]).unwrap().image;
    let b = render(&manual, &camera(), [0.0; 3]).unwrap().image;
    assert_eq!(a.data, b.data);
    let full = render(&before, &camera(), [0.0; 3]).unwrap().image;
    assert_ne!(a.data, full.data);
}

#[test]
fn prune_by_scale() {
    let cfg = AtmConfig::default();
    let mut m = model(3);
    m.parents[2].log_scale = [(0.1 * cfg.scale_prune_threshold).ln(); 3];
    let mut stats = AtmStats::for_model(&m);
    prune_trees(&mut m, &mut stats, &cfg).unwrap();
    assert_eq!(m.parents.len(), 2);
}

#[test]
fn pruning_everything_is_refused() {
    let cfg = AtmConfig::default();
    let mut m = model(3);
    let mut stats = AtmStats::for_model(&m);
    observe_parents(&mut stats, 0.0, 0.0);
    let before = m.clone();
    assert!(matches!(prune_trees(&mut m, &mut stats, &cfg), Err(AtmError::EmptyScene)));
    assert_eq!(m, before);

    let (event, _) = densify_event(&mut m, &mut stats, &cfg, 7, 0.0, &mut rng()).unwrap();
    assert!(event.prune_skipped);
    assert_eq!(event.parents, 3);
}

#[test]
fn event_resets_statistics_and_reports_counts() {
    let cfg = AtmConfig::default();
    let mut m = model(6);
    let mut stats = AtmStats::for_model(&m);
    observe_parents(&mut stats, 0.0, 0.5);
    stats.grad_sum[NODES] = 1.0;
    stats.grad_sum[NODES + 1] = 1.0;
    stats.count[NODES + 1] = 1;
    stats.max_opacity[5] = 0.0;
    let (event, sources) = densify_event(&mut m, &mut stats, &cfg, 300, 1e-4, &mut rng()).unwrap();
    assert!(stats.is_reset());
    assert_eq!(stats.parents(), m.parents.len());
    assert_eq!(event.promotions, 1);
    assert_eq!(event.clones + event.splits, 1);
    assert_eq!(event.prunes, 1);
    assert_eq!(event.parents, m.parents.len());
    assert_eq!(sources.len(), m.parents.len());
    assert!(!sources.contains(&Some(5)));
    assert_eq!(sources.iter().flatten().count(), 5 - event.splits);
    check_forest(&m).unwrap();
}

#[test]
fn mismatched_stats_are_rejected() {
    let cfg = AtmConfig::default();
    let mut m = model(3);
    let mut stats = AtmStats::new(2, NODES);
    assert!(matches!(
        promote_children(&mut m, &mut stats, &cfg),
        Err(AtmError::StatsShape { .. })
    ));
}

#[test]
fn forest_check_catches_bookkeeping_errors() {
    let mut m = model(3);
    m.provenance.pop();
    assert!(matches!(check_forest(&m), Err(AtmError::Inconsistent(_))));
    let mut m = model(3);
    m.parents[0].position[1] = f64::NAN;
    assert!(check_forest(&m).is_err());
}
