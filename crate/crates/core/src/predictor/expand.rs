use rayon::prelude::*;

use super::{
    predict_child_positions_taped, predict_color_taped, predict_opacity_taped,
    predict_scale_rotation_taped, AttentionTape, HeadTape, PositionTape, PredictorError,
};
use crate::linalg::{self, Quat, Vec3};
use crate::real::Real;
use crate::scene::{Camera, GaussianAttributes, ParentNode, SceneModel};
use crate::spatial::normalize_position;

/// View-independent part of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticNode<R> {
    pub position: Vec3<R>,
    pub unit: Vec3<R>,
    pub scale: Vec3<R>,
    pub rotation: Quat<R>,
    pub opacity: R,
    /// Attention-fused attribute feature of this node.
    pub fused: Vec<R>,
}

/// View-independent part of a tree; node 0 is the parent.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticTree<R> {
    pub nodes: Vec<StaticNode<R>>,
    pub degenerate_rotations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedTree<R> {
    pub nodes: Vec<GaussianAttributes<R>>,
    pub degenerate_rotations: usize,
}

/// Everything the backward pass needs from the view-independent forward.
#[derive(Debug, Clone)]
pub struct StaticTape<R> {
    pub parent_scale: Vec3<R>,
    pub feature: Vec<R>,
    pub positions: PositionTape<R>,
    pub child_features: Vec<Vec<R>>,
    /// Unfused attribute rows, `(K+1) x D/2`.
    pub attr_rows: Vec<R>,
    pub attention: AttentionTape<R>,
    pub center_dist: Vec<R>,
    pub rs: Vec<HeadTape<R>>,
    pub degenerate: Vec<bool>,
    pub multipliers: Vec<Vec3<R>>,
    pub opacity: Vec<HeadTape<R>>,
}

#[derive(Debug, Clone)]
pub struct ColorTape<R> {
    /// Unnormalized `node - eye`.
    pub view: Vec3<R>,
    pub dir: Vec3<R>,
    pub head: HeadTape<R>,
}

#[derive(Debug, Clone)]
pub struct TreeTape<R> {
    pub statics: StaticTape<R>,
    pub colors: Vec<ColorTape<R>>,
    pub tree: StaticTree<R>,
}

pub fn expand_static<R: Real>(parent: &ParentNode<R>, model: &SceneModel<R>) -> Result<StaticTree<R>, PredictorError> {
    expand_static_taped(parent, model).map(|(t, _)| t)
}

pub fn expand_static_taped<R: Real>(
    parent: &ParentNode<R>,
    model: &SceneModel<R>,
) -> Result<(StaticTree<R>, StaticTape<R>), PredictorError> {
    let cfg = &model.config;
    let h = cfg.half_dim();
    let nets = &model.nets;
    let params = &model.contraction;

    let unit_p = normalize_position(parent.position, params)?;
    let feature = model.grid.query(unit_p)?;
    let (children, positions) = if cfg.children_per_parent > 0 {
        predict_child_positions_taped(parent.position, &feature[..h], nets, R::of(model.offset_scale))
    } else {
        (Vec::new(), PositionTape::default())
    };

    let n = children.len() + 1;
    let mut node_pos = Vec::with_capacity(n);
    let mut node_unit = Vec::with_capacity(n);
    node_pos.push(parent.position);
    node_unit.push(unit_p);
    let mut attr_rows = Vec::with_capacity(n * h);
    attr_rows.extend_from_slice(&feature[h..]);
    let mut child_features = Vec::with_capacity(children.len());
    for x in &children {
        let u = normalize_position(*x, params)?;
        let f = model.grid.query(u)?;
        attr_rows.extend_from_slice(&f[h..]);
        child_features.push(f);
        node_pos.push(*x);
        node_unit.push(u);
    }

    let (fused, attention) = nets.attn.fuse_taped(&attr_rows)?;

    let parent_scale = parent.scale();
    let half = R::of(0.5);
    let mut nodes = Vec::with_capacity(n);
    let mut rs = Vec::with_capacity(n);
    let mut opacity_tapes = Vec::with_capacity(n);
    let mut degenerate = Vec::with_capacity(n);
    let mut multipliers = Vec::with_capacity(n);
    let mut center_dist = Vec::with_capacity(n);
    let mut degenerate_rotations = 0;
    for i in 0..n {
        let f = &fused[i * h..(i + 1) * h];
        let u = node_unit[i];
        let b = linalg::norm(linalg::sub(u, [half; 3]));
        let (sr, rs_tape) = predict_scale_rotation_taped(f, u, b, parent_scale, i == 0, nets);
        let (opacity, o_tape) = predict_opacity_taped(f, u, nets);
        if sr.degenerate {
            degenerate_rotations += 1;
        }
        nodes.push(StaticNode {
            position: node_pos[i],
            unit: u,
            scale: sr.scale,
            rotation: sr.rotation,
            opacity,
            fused: f.to_vec(),
        });
        rs.push(rs_tape);
        opacity_tapes.push(o_tape);
        degenerate.push(sr.degenerate);
        multipliers.push(sr.multiplier);
        center_dist.push(b);
    }

    Ok((
        StaticTree {
            nodes,
            degenerate_rotations,
        },
        StaticTape {
            parent_scale,
            feature,
            positions,
            child_features,
            attr_rows,
            attention,
            center_dist,
            rs,
            degenerate,
            multipliers,
            opacity: opacity_tapes,
        },
    ))
}

/// Attach view-dependent colours for a camera centred at `eye`.
pub fn colorize<R: Real>(
    tree: &StaticTree<R>,
    eye: Vec3<R>,
    model: &SceneModel<R>,
) -> (ExpandedTree<R>, Vec<ColorTape<R>>) {
    let mut nodes = Vec::with_capacity(tree.nodes.len());
    let mut tapes = Vec::with_capacity(tree.nodes.len());
    for node in &tree.nodes {
        let view = linalg::sub(node.position, eye);
        let len = linalg::norm(view);
        let dir = if len > R::zero() {
            linalg::scale(view, R::one() / len)
        } else {
            [R::zero(), R::zero(), R::one()]
        };
        let (color, head) = predict_color_taped(&node.fused, dir, model.config.sh_degree, &model.nets);
        nodes.push(GaussianAttributes {
            position: node.position,
            scale: node.scale,
            rotation: node.rotation,
            opacity: node.opacity,
            color,
        });
        tapes.push(ColorTape { view, dir, head });
    }
    (
        ExpandedTree {
            nodes,
            degenerate_rotations: tree.degenerate_rotations,
        },
        tapes,
    )
}

pub(crate) fn eye_of<R: Real>(camera: &Camera) -> Vec3<R> {
    camera.center().map(R::of)
}

/// Children and all attributes of one tree as seen from `camera`.
pub fn expand_tree<R: Real>(
    parent: &ParentNode<R>,
    camera: &Camera,
    model: &SceneModel<R>,
) -> Result<ExpandedTree<R>, PredictorError> {
    let tree = expand_static(parent, model)?;
    Ok(colorize(&tree, eye_of(camera), model).0)
}

pub fn expand_tree_taped<R: Real>(
    parent: &ParentNode<R>,
    camera: &Camera,
    model: &SceneModel<R>,
) -> Result<(ExpandedTree<R>, TreeTape<R>), PredictorError> {
    let (tree, statics) = expand_static_taped(parent, model)?;
    let (expanded, colors) = colorize(&tree, eye_of(camera), model);
    Ok((
        expanded,
        TreeTape {
            statics,
            colors,
            tree,
        },
    ))
}

/// View-independent attributes of every parent, valid for one model revision.
#[derive(Debug, Clone)]
pub struct TreeCache<R> {
    pub revision: u64,
    pub trees: Vec<StaticTree<R>>,
}

impl<R: Real> TreeCache<R> {
    pub fn build(model: &SceneModel<R>) -> Result<Self, PredictorError> {
        let trees = model
            .parents
            .par_iter()
            .map(|p| expand_static(p, model))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            revision: model.revision,
            trees,
        })
    }
}

/// Like [`expand_tree`] but only the colour head runs; geometry comes from
/// the cache.
pub fn expand_tree_cached<R: Real>(
    parent_index: usize,
    camera: &Camera,
    model: &SceneModel<R>,
    cache: &TreeCache<R>,
) -> Result<ExpandedTree<R>, PredictorError> {
    if cache.revision != model.revision {
        return Err(PredictorError::StaleCache {
            cache: cache.revision,
            model: model.revision,
        });
    }
    let tree = cache
        .trees
        .get(parent_index)
        .ok_or(PredictorError::MissingCacheEntry(parent_index))?;
    Ok(colorize(tree, eye_of(camera), model).0)
}
