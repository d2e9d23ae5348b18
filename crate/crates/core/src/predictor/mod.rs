//! Predicts children and every non-stored attribute of a tree from the
//! shared hash grid and four small heads.
//!
//! Per tree: query the grid at the parent, split the feature into a
//! displacement half and an attribute half, offset the children, query the
//! grid again at each child, fuse the attribute halves with self-attention,
//! then run the scale/rotation, colour and opacity heads per node.

mod attention;
mod backward;
mod expand;

pub use attention::{AttentionParams, AttentionTape};
pub use backward::{tree_backward, AttrGrad, ModelGrads, ParentGrad};
pub use expand::{
    colorize, expand_static, expand_static_taped, expand_tree, expand_tree_cached, expand_tree_taped,
    ColorTape, ExpandedTree, StaticNode, StaticTape, StaticTree, TreeCache, TreeTape,
};

use rand::Rng;
use thiserror::Error;

use crate::config::ModelConfig;
use crate::hashgrid::GridError;
use crate::linalg::{Quat, Vec3};
use crate::nn::Mlp;
use crate::real::{sigmoid, Real};
use crate::sh;
use crate::spatial::SpatialError;

/// Quaternions shorter than this are replaced by the identity.
pub const DEGENERATE_QUAT_NORM: f64 = 1e-8;
/// Initial opacity of every node (through the opacity head's bias).
pub const INITIAL_OPACITY: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PredictorError {
    #[error("dimension mismatch: expected a multiple of {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("stale cache: built at revision {cache}, model is at revision {model}")]
    StaleCache { cache: u64, model: u64 },
    #[error("cache has no entry for parent {0}")]
    MissingCacheEntry(usize),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Spatial(#[from] SpatialError),
}

/// The grid feature split into its displacement and attribute halves.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePair<R> {
    pub f_delta: Vec<R>,
    pub f_attr: Vec<R>,
}

impl<R: Real> FeaturePair<R> {
    pub fn concat(&self) -> Vec<R> {
        let mut v = self.f_delta.clone();
        v.extend_from_slice(&self.f_attr);
        v
    }
}

pub fn split_features<R: Real>(f: &[R], feature_dim: usize) -> Result<FeaturePair<R>, PredictorError> {
    if f.len() != feature_dim || !feature_dim.is_multiple_of(2) {
        return Err(PredictorError::DimensionMismatch {
            expected: feature_dim,
            got: f.len(),
        });
    }
    let h = feature_dim / 2;
    Ok(FeaturePair {
        f_delta: f[..h].to_vec(),
        f_attr: f[h..].to_vec(),
    })
}

/// The shared heads and attention parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkBundle<R> {
    /// `D/2 -> K*3` child offsets.
    pub g_pos: Mlp<R>,
    /// `D/2 + 3 + 1 -> 3 + 4` log scale multiplier and quaternion.
    pub g_rs: Mlp<R>,
    /// `D/2 + sh_dim -> 3` colour logits.
    pub g_c: Mlp<R>,
    /// `D/2 + 3 -> 1` opacity logit.
    pub g_o: Mlp<R>,
    pub attn: AttentionParams<R>,
}

impl<R: Real> NetworkBundle<R> {
    pub fn zeros(config: &ModelConfig) -> Self {
        let h = config.half_dim();
        let w = config.hidden_width;
        Self {
            g_pos: Mlp::zeros(h, w, config.children_per_parent * 3),
            g_rs: Mlp::zeros(h + 4, w, 7),
            g_c: Mlp::zeros(h + config.sh_dim(), w, 3),
            g_o: Mlp::zeros(h + 3, w, 1),
            attn: AttentionParams::zeros(h, R::of(config.attention_lambda)),
        }
    }

    pub fn random<G: Rng>(config: &ModelConfig, rng: &mut G) -> Self {
        let h = config.half_dim();
        let w = config.hidden_width;
        let mut nets = Self {
            g_pos: Mlp::random(h, w, config.children_per_parent * 3, rng),
            g_rs: Mlp::random(h + 4, w, 7, rng),
            g_c: Mlp::random(h + config.sh_dim(), w, 3, rng),
            g_o: Mlp::random(h + 3, w, 1, rng),
            attn: AttentionParams::random(h, R::of(config.attention_lambda), rng),
        };
        // identity rotation and a faint initial opacity
        nets.g_rs.b2[3] = R::one();
        let o = INITIAL_OPACITY;
        nets.g_o.b2[0] = R::of((o / (1.0 - o)).ln());
        nets
    }

    /// A zeroed bundle with the same shapes, used as a gradient buffer.
    pub fn zeros_like(&self) -> Self {
        let z = |m: &Mlp<R>| Mlp::zeros(m.input, m.hidden, m.output);
        Self {
            g_pos: z(&self.g_pos),
            g_rs: z(&self.g_rs),
            g_c: z(&self.g_c),
            g_o: z(&self.g_o),
            attn: AttentionParams::zeros(self.attn.dim, self.attn.lambda),
        }
    }

    pub fn matches(&self, config: &ModelConfig) -> bool {
        let reference = Self::zeros(config);
        let shape = |m: &Mlp<R>| (m.input, m.hidden, m.output);
        shape(&self.g_pos) == shape(&reference.g_pos)
            && shape(&self.g_rs) == shape(&reference.g_rs)
            && shape(&self.g_c) == shape(&reference.g_c)
            && shape(&self.g_o) == shape(&reference.g_o)
            && self.attn.dim == reference.attn.dim
            && self.attn.p1.len() == reference.attn.p1.len()
    }

    pub fn add_assign(&mut self, other: &Self) {
        self.g_pos.add_assign(&other.g_pos);
        self.g_rs.add_assign(&other.g_rs);
        self.g_c.add_assign(&other.g_c);
        self.g_o.add_assign(&other.g_o);
        for (a, b) in self.attn.p1.iter_mut().zip(&other.attn.p1) {
            *a += *b;
        }
        for (a, b) in self.attn.p2.iter_mut().zip(&other.attn.p2) {
            *a += *b;
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.g_pos.parameter_count()
            + self.g_rs.parameter_count()
            + self.g_c.parameter_count()
            + self.g_o.parameter_count()
            + self.attn.p1.len()
            + self.attn.p2.len()
    }
}

/// Hidden activations and raw `tanh` outputs of the offset head.
#[derive(Debug, Clone, Default)]
pub struct PositionTape<R> {
    pub hidden: Vec<R>,
    pub tanh: Vec<R>,
}

/// `x_k = x_p + offset_scale * tanh(g_pos(f_delta)[k])`.
pub fn predict_child_positions<R: Real>(
    parent: Vec3<R>,
    f_delta: &[R],
    nets: &NetworkBundle<R>,
    offset_scale: R,
) -> Vec<Vec3<R>> {
    predict_child_positions_taped(parent, f_delta, nets, offset_scale).0
}

pub fn predict_child_positions_taped<R: Real>(
    parent: Vec3<R>,
    f_delta: &[R],
    nets: &NetworkBundle<R>,
    offset_scale: R,
) -> (Vec<Vec3<R>>, PositionTape<R>) {
    let (hidden, raw) = nets.g_pos.forward(f_delta);
    let tanh: Vec<R> = raw.iter().map(|v| v.tanh()).collect();
    let children = tanh
        .chunks_exact(3)
        .map(|t| {
            [
                parent[0] + offset_scale * t[0],
                parent[1] + offset_scale * t[1],
                parent[2] + offset_scale * t[2],
            ]
        })
        .collect();
    (children, PositionTape { hidden, tanh })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleRotation<R> {
    pub scale: Vec3<R>,
    pub rotation: Quat<R>,
    /// `exp` of the predicted log multiplier (unused for the parent).
    pub multiplier: Vec3<R>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Default)]
pub struct HeadTape<R> {
    pub input: Vec<R>,
    pub hidden: Vec<R>,
    pub output: Vec<R>,
}

fn head_input<R: Real>(f_attr: &[R], extra: &[R]) -> Vec<R> {
    let mut v = Vec::with_capacity(f_attr.len() + extra.len());
    v.extend_from_slice(f_attr);
    v.extend_from_slice(extra);
    v
}

/// Shared scale/rotation head. `unit_pos` is the node's contracted unit-cube
/// position and `center_dist` its distance to the box centre.
pub fn predict_scale_rotation<R: Real>(
    f_attr: &[R],
    unit_pos: Vec3<R>,
    center_dist: R,
    parent_scale: Vec3<R>,
    is_parent: bool,
    nets: &NetworkBundle<R>,
) -> ScaleRotation<R> {
    predict_scale_rotation_taped(f_attr, unit_pos, center_dist, parent_scale, is_parent, nets).0
}

pub fn predict_scale_rotation_taped<R: Real>(
    f_attr: &[R],
    unit_pos: Vec3<R>,
    center_dist: R,
    parent_scale: Vec3<R>,
    is_parent: bool,
    nets: &NetworkBundle<R>,
) -> (ScaleRotation<R>, HeadTape<R>) {
    let input = head_input(
        f_attr,
        &[unit_pos[0], unit_pos[1], unit_pos[2], center_dist],
    );
    let (hidden, output) = nets.g_rs.forward(&input);
    let multiplier = [output[0].exp(), output[1].exp(), output[2].exp()];
    let scale = if is_parent {
        parent_scale
    } else {
        [
            multiplier[0] * parent_scale[0],
            multiplier[1] * parent_scale[1],
            multiplier[2] * parent_scale[2],
        ]
    };
    let q = [output[3], output[4], output[5], output[6]];
    let n = q.iter().map(|v| *v * *v).sum::<R>().sqrt();
    let (rotation, degenerate) = if n < R::of(DEGENERATE_QUAT_NORM) || !n.is_finite() {
        ([R::one(), R::zero(), R::zero(), R::zero()], true)
    } else {
        ([q[0] / n, q[1] / n, q[2] / n, q[3] / n], false)
    };
    (
        ScaleRotation {
            scale,
            rotation,
            multiplier,
            degenerate,
        },
        HeadTape {
            input,
            hidden,
            output,
        },
    )
}

/// RGB in `[0,1]` from the attribute feature and a unit view direction.
pub fn predict_color<R: Real>(f_attr: &[R], dir: Vec3<R>, sh_degree: usize, nets: &NetworkBundle<R>) -> Vec3<R> {
    predict_color_taped(f_attr, dir, sh_degree, nets).0
}

pub fn predict_color_taped<R: Real>(
    f_attr: &[R],
    dir: Vec3<R>,
    sh_degree: usize,
    nets: &NetworkBundle<R>,
) -> (Vec3<R>, HeadTape<R>) {
    debug_assert!(
        (dir.iter().map(|v| *v * *v).sum::<R>().sqrt() - R::one()).abs().as_f64() < 1e-4,
        "view direction must be unit length"
    );
    let input = head_input(f_attr, &sh::encode(dir, sh_degree));
    let (hidden, output) = nets.g_c.forward(&input);
    let rgb = [sigmoid(output[0]), sigmoid(output[1]), sigmoid(output[2])];
    (
        rgb,
        HeadTape {
            input,
            hidden,
            output,
        },
    )
}

pub fn predict_opacity<R: Real>(f_attr: &[R], unit_pos: Vec3<R>, nets: &NetworkBundle<R>) -> R {
    predict_opacity_taped(f_attr, unit_pos, nets).0
}

pub fn predict_opacity_taped<R: Real>(
    f_attr: &[R],
    unit_pos: Vec3<R>,
    nets: &NetworkBundle<R>,
) -> (R, HeadTape<R>) {
    let input = head_input(f_attr, &unit_pos);
    let (hidden, output) = nets.g_o.forward(&input);
    (
        sigmoid(output[0]),
        HeadTape {
            input,
            hidden,
            output,
        },
    )
}
