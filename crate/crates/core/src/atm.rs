//! Adaptive tree manipulation: positional-gradient statistics per node,
//! child promotion, parent clone/split and whole-tree pruning.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::predictor::{expand_static, ParentGrad, PredictorError};
use crate::real::Real;
use crate::scene::{ParentNode, Provenance, SceneModel};

#[derive(Debug, Error)]
pub enum AtmError {
    #[error("invalid ATM config: {0}")]
    InvalidConfig(&'static str),
    #[error("stats cover {stats} parents, scene has {parents}")]
    StatsShape { stats: usize, parents: usize },
    #[error("pruning would remove every parent")]
    EmptyScene,
    #[error("forest inconsistent: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AtmConfig {
    /// Mean NDC positional gradient above which a child becomes a parent.
    pub child_grad_threshold: f64,
    /// Mean NDC positional gradient above which a parent is cloned or split.
    pub parent_grad_threshold: f64,
    pub opacity_prune_threshold: f64,
    /// World units; parents whose largest axis is below this are removed.
    pub scale_prune_threshold: f64,
    /// Parents smaller than this fraction of the scene extent clone, larger ones split.
    pub split_scale_factor: f64,
    /// Scale divisor applied to both halves of a split.
    pub split_divisor: f64,
    /// `false` tracks parents only: no child statistics and no promotion.
    pub promote_children: bool,
    /// Densification stops adding parents beyond this count.
    pub max_parents: usize,
}

impl Default for AtmConfig {
    fn default() -> Self {
        Self {
            child_grad_threshold: 2e-4,
            parent_grad_threshold: 2e-4,
            opacity_prune_threshold: 0.005,
            scale_prune_threshold: 1e-6,
            split_scale_factor: 0.01,
            split_divisor: 1.6,
            promote_children: true,
            max_parents: 1_000_000,
        }
    }
}

impl AtmConfig {
    pub fn validate(&self) -> Result<(), AtmError> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.child_grad_threshold) || !pos(self.parent_grad_threshold) {
            return Err(AtmError::InvalidConfig("gradient thresholds must be positive"));
        }
        if !pos(self.opacity_prune_threshold) || !pos(self.scale_prune_threshold) {
            return Err(AtmError::InvalidConfig("prune thresholds must be positive"));
        }
        if !pos(self.split_scale_factor) {
            return Err(AtmError::InvalidConfig("split scale factor must be positive"));
        }
        if !(self.split_divisor > 1.0 && self.split_divisor.is_finite()) {
            return Err(AtmError::InvalidConfig("split divisor must exceed 1"));
        }
        Ok(())
    }
}

/// Statistics accumulated between densify events.
#[derive(Debug, Clone, PartialEq)]
pub struct AtmStats {
    pub nodes_per_tree: usize,
    /// Per flattened node (`parent * (K+1) + node`), node 0 being the parent.
    pub grad_sum: Vec<f64>,
    pub count: Vec<u32>,
    /// Per parent: summed world-space positional gradient.
    pub world_grad_sum: Vec<[f64; 3]>,
    /// Per parent: largest predicted opacity of the parent node while visible.
    pub max_opacity: Vec<f64>,
}

impl AtmStats {
    pub fn new(parents: usize, nodes_per_tree: usize) -> Self {
        Self {
            nodes_per_tree,
            grad_sum: vec![0.0; parents * nodes_per_tree],
            count: vec![0; parents * nodes_per_tree],
            world_grad_sum: vec![[0.0; 3]; parents],
            max_opacity: vec![0.0; parents],
        }
    }

    pub fn for_model<R: Real>(model: &SceneModel<R>) -> Self {
        Self::new(model.parents.len(), model.config.nodes_per_tree())
    }

    pub fn parents(&self) -> usize {
        self.max_opacity.len()
    }

    /// Mean gradient norm of a flattened node; 0 when never observed.
    pub fn mean_grad(&self, node: usize) -> f64 {
        match self.count[node] {
            0 => 0.0,
            c => self.grad_sum[node] / c as f64,
        }
    }

    pub fn is_reset(&self) -> bool {
        self.grad_sum.iter().all(|v| *v == 0.0)
            && self.count.iter().all(|c| *c == 0)
            && self.max_opacity.iter().all(|v| *v == 0.0)
            && self.world_grad_sum.iter().flatten().all(|v| *v == 0.0)
    }

    /// Add one step's observations.
    ///
    /// `screen` holds pixel-space mean gradients per flattened node; they are
    /// rescaled to NDC using the render size. `opacity` is the predicted
    /// opacity per flattened node.
    #[allow(clippy::too_many_arguments)]
    pub fn accumulate<R: Real>(
        &mut self,
        screen: &[[R; 2]],
        visible: &[bool],
        opacity: &[R],
        world: &[ParentGrad<R>],
        width: usize,
        height: usize,
        track_children: bool,
    ) {
        let (sx, sy) = (0.5 * width as f64, 0.5 * height as f64);
        let k = self.nodes_per_tree;
        for (i, g) in screen.iter().enumerate().take(self.grad_sum.len()) {
            if !visible[i] || (!track_children && i % k != 0) {
                continue;
            }
            let (gx, gy) = (g[0].as_f64() * sx, g[1].as_f64() * sy);
            self.grad_sum[i] += (gx * gx + gy * gy).sqrt();
            self.count[i] += 1;
            if i % k == 0 {
                let p = i / k;
                self.max_opacity[p] = self.max_opacity[p].max(opacity[i].as_f64());
                for a in 0..3 {
                    self.world_grad_sum[p][a] += world[p].position[a].as_f64();
                }
            }
        }
    }

    /// Reorder parents; new ones (`None`) start empty.
    pub fn remap(&mut self, sources: &[Option<usize>]) {
        let k = self.nodes_per_tree;
        let mut out = Self::new(sources.len(), k);
        for (i, src) in sources.iter().enumerate() {
            if let Some(j) = *src {
                out.grad_sum[i * k..(i + 1) * k].copy_from_slice(&self.grad_sum[j * k..(j + 1) * k]);
                out.count[i * k..(i + 1) * k].copy_from_slice(&self.count[j * k..(j + 1) * k]);
                out.world_grad_sum[i] = self.world_grad_sum[j];
                out.max_opacity[i] = self.max_opacity[j];
            }
        }
        *self = out;
    }
}

fn check_shape<R: Real>(model: &SceneModel<R>, stats: &AtmStats) -> Result<(), AtmError> {
    if stats.parents() != model.parents.len() || stats.nodes_per_tree != model.config.nodes_per_tree() {
        return Err(AtmError::StatsShape {
            stats: stats.parents(),
            parents: model.parents.len(),
        });
    }
    Ok(())
}

fn identity_sources(n: usize) -> Vec<Option<usize>> {
    (0..n).map(Some).collect()
}

/// Turn every child whose mean gradient exceeds the child threshold into a
/// new parent at its predicted position and scale. Promoted children have
/// their statistics cleared, so a second call in the same event is a no-op.
/// Returns the parent index map (new parents map to `None`).
pub fn promote_children<R: Real>(
    model: &mut SceneModel<R>,
    stats: &mut AtmStats,
    config: &AtmConfig,
) -> Result<Vec<Option<usize>>, AtmError> {
    check_shape(model, stats)?;
    let k = stats.nodes_per_tree;
    let n = model.parents.len();
    let mut sources = identity_sources(n);
    if !config.promote_children {
        return Ok(sources);
    }
    let mut new_parents = Vec::new();
    for p in 0..n {
        let hot: Vec<usize> = (1..k)
            .filter(|&c| stats.mean_grad(p * k + c) > config.child_grad_threshold)
            .collect();
        if hot.is_empty() {
            continue;
        }
        let tree = expand_static(&model.parents[p], model)?;
        for c in hot {
            if n + new_parents.len() >= config.max_parents {
                break;
            }
            let node = &tree.nodes[c];
            new_parents.push(ParentNode {
                position: node.position,
                log_scale: node.scale.map(|s| s.max(R::of(1e-12)).ln()),
            });
            stats.grad_sum[p * k + c] = 0.0;
            stats.count[p * k + c] = 0;
        }
    }
    for np in new_parents {
        model.parents.push(np);
        model.provenance.push(Provenance::Promoted);
        sources.push(None);
    }
    stats.remap(&sources);
    model.bump_revision();
    Ok(sources)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensifyCounts {
    pub clones: usize,
    pub splits: usize,
}

/// Clone small and split large parents whose mean gradient exceeds the
/// parent threshold. A clone is displaced by one gradient step of size
/// `position_lr`; a split draws two parents from the parent's Gaussian.
pub fn densify_parents<R: Real, G: Rng>(
    model: &mut SceneModel<R>,
    stats: &mut AtmStats,
    config: &AtmConfig,
    position_lr: f64,
    rng: &mut G,
) -> Result<(Vec<Option<usize>>, DensifyCounts), AtmError> {
    check_shape(model, stats)?;
    let k = stats.nodes_per_tree;
    let n = model.parents.len();
    let boundary = config.split_scale_factor * model.contraction.scene_extent();
    let shrink = R::of(config.split_divisor.ln());
    let mut counts = DensifyCounts::default();
    let mut keep: Vec<usize> = Vec::with_capacity(n);
    let mut added: Vec<(ParentNode<R>, Option<usize>)> = Vec::new();
    let mut budget = config.max_parents.saturating_sub(n);

    for p in 0..n {
        let parent = model.parents[p];
        if budget == 0 || stats.mean_grad(p * k) <= config.parent_grad_threshold {
            keep.push(p);
            continue;
        }
        let max_scale = parent.scale().iter().fold(R::zero(), |a, b| a.max(*b)).as_f64();
        if max_scale < boundary {
            let c = stats.count[p * k].max(1) as f64;
            let g = stats.world_grad_sum[p].map(|v| v / c);
            let mut clone = parent;
            for a in 0..3 {
                clone.position[a] -= R::of(position_lr * g[a]);
            }
            keep.push(p);
            added.push((clone, None));
            counts.clones += 1;
        } else {
            let tree = expand_static(&parent, model)?;
            let rot = linalg::quat_to_mat(tree.nodes[0].rotation);
            let s = parent.scale();
            for _ in 0..2 {
                let z: [R; 3] = [(); 3].map(|_| R::of(rng.sample::<f64, _>(StandardNormal)));
                let local = [z[0] * s[0], z[1] * s[1], z[2] * s[2]];
                let offset = linalg::mat_vec(&rot, local);
                added.push((
                    ParentNode {
                        position: linalg::add(parent.position, offset),
                        log_scale: parent.log_scale.map(|l| l - shrink),
                    },
                    None,
                ));
            }
            counts.splits += 1;
        }
        budget = budget.saturating_sub(1);
    }

    let mut parents = Vec::with_capacity(keep.len() + added.len());
    let mut provenance = Vec::with_capacity(keep.len() + added.len());
    let mut sources = Vec::with_capacity(keep.len() + added.len());
    for &p in &keep {
        parents.push(model.parents[p]);
        provenance.push(model.provenance[p]);
        sources.push(Some(p));
    }
    for (node, src) in added {
        parents.push(node);
        provenance.push(Provenance::Densified);
        sources.push(src);
    }
    model.parents = parents;
    model.provenance = provenance;
    stats.remap(&sources);
    model.bump_revision();
    Ok((sources, counts))
}

/// Remove whole trees whose parent was seen but never exceeded the opacity
/// threshold, or whose largest scale axis is below the scale threshold.
/// Fails with [`AtmError::EmptyScene`] (scene untouched) if nothing would remain.
pub fn prune_trees<R: Real>(
    model: &mut SceneModel<R>,
    stats: &mut AtmStats,
    config: &AtmConfig,
) -> Result<Vec<Option<usize>>, AtmError> {
    check_shape(model, stats)?;
    let k = stats.nodes_per_tree;
    let keep: Vec<usize> = (0..model.parents.len())
        .filter(|&p| {
            let seen = stats.count[p * k] > 0;
            let transparent = seen && stats.max_opacity[p] < config.opacity_prune_threshold;
            let max_scale = model.parents[p].scale().iter().fold(R::zero(), |a, b| a.max(*b)).as_f64();
            !(transparent || max_scale < config.scale_prune_threshold)
        })
        .collect();
    if keep.is_empty() && !model.parents.is_empty() {
        return Err(AtmError::EmptyScene);
    }
    let sources: Vec<Option<usize>> = keep.iter().map(|&p| Some(p)).collect();
    if keep.len() != model.parents.len() {
        model.parents = keep.iter().map(|&p| model.parents[p]).collect();
        model.provenance = keep.iter().map(|&p| model.provenance[p]).collect();
        model.bump_revision();
    }
    stats.remap(&sources);
    Ok(sources)
}

/// Every child belongs to exactly one parent: per-parent bookkeeping has one
/// entry per parent and every parent is finite.
pub fn check_forest<R: Real>(model: &SceneModel<R>) -> Result<(), AtmError> {
    if model.provenance.len() != model.parents.len() {
        return Err(AtmError::Inconsistent(format!(
            "{} provenance entries for {} parents",
            model.provenance.len(),
            model.parents.len()
        )));
    }
    if model.splat_count() != model.parents.len() * (model.config.children_per_parent + 1) {
        return Err(AtmError::Inconsistent("splat count".into()));
    }
    model.validate().map_err(|e| AtmError::Inconsistent(e.to_string()))
}

/// One densify event's outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtmEvent {
    pub step: usize,
    pub promotions: usize,
    pub clones: usize,
    pub splits: usize,
    pub prunes: usize,
    /// Pruning was skipped because it would have emptied the scene.
    pub prune_skipped: bool,
    pub parents: usize,
}

fn compose(first: &[Option<usize>], second: &[Option<usize>]) -> Vec<Option<usize>> {
    second.iter().map(|s| s.and_then(|j| first[j])).collect()
}

/// Promote, densify, prune, then reset the statistics. Returns the event
/// record and the parent index map from before to after.
pub fn densify_event<R: Real, G: Rng>(
    model: &mut SceneModel<R>,
    stats: &mut AtmStats,
    config: &AtmConfig,
    step: usize,
    position_lr: f64,
    rng: &mut G,
) -> Result<(AtmEvent, Vec<Option<usize>>), AtmError> {
    let before = model.parents.len();
    let s1 = promote_children(model, stats, config)?;
    let promotions = model.parents.len() - before;
    let (s2, counts) = densify_parents(model, stats, config, position_lr, rng)?;
    let after_densify = model.parents.len();
    let (s3, prune_skipped) = match prune_trees(model, stats, config) {
        Ok(s) => (s, false),
        Err(AtmError::EmptyScene) => (identity_sources(model.parents.len()), true),
        Err(e) => return Err(e),
    };
    let sources = compose(&compose(&s1, &s2), &s3);
    *stats = AtmStats::for_model(model);
    check_forest(model)?;
    Ok((
        AtmEvent {
            step,
            promotions,
            clones: counts.clones,
            splits: counts.splits,
            prunes: after_densify - model.parents.len(),
            prune_skipped,
            parents: model.parents.len(),
        },
        sources,
    ))
}
