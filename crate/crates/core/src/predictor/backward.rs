use super::{NetworkBundle, PredictorError, TreeTape};
use crate::linalg::{self, Quat, Vec3};
use crate::real::Real;
use crate::scene::{ParentNode, SceneModel};
use crate::sh;
use crate::spatial::normalize_position_backward;

/// Upstream gradient on one node's attributes. `rotation` is with respect to
/// the normalized quaternion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttrGrad<R> {
    pub position: Vec3<R>,
    pub scale: Vec3<R>,
    pub rotation: Quat<R>,
    pub opacity: R,
    pub color: Vec3<R>,
}

impl<R: Real> Default for AttrGrad<R> {
    fn default() -> Self {
        Self {
            position: [R::zero(); 3],
            scale: [R::zero(); 3],
            rotation: [R::zero(); 4],
            opacity: R::zero(),
            color: [R::zero(); 3],
        }
    }
}

/// Gradient on the stored parameters of one parent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParentGrad<R> {
    pub position: Vec3<R>,
    pub log_scale: Vec3<R>,
}

/// Shared-parameter gradients: dense network buffer plus sparse grid pairs.
#[derive(Debug, Clone)]
pub struct ModelGrads<R> {
    pub nets: NetworkBundle<R>,
    pub grid: Vec<(usize, R)>,
}

impl<R: Real> ModelGrads<R> {
    pub fn new(nets: &NetworkBundle<R>) -> Self {
        Self {
            nets: nets.zeros_like(),
            grid: Vec::new(),
        }
    }

    pub fn merge(&mut self, other: &ModelGrads<R>) {
        self.nets.add_assign(&other.nets);
        self.grid.extend_from_slice(&other.grid);
    }
}

fn sigmoid_backward<R: Real>(y: R, dy: R) -> R {
    dy * y * (R::one() - y)
}

/// Chain rule through one expanded tree.
pub fn tree_backward<R: Real>(
    model: &SceneModel<R>,
    parent: &ParentNode<R>,
    tape: &TreeTape<R>,
    node_grads: &[AttrGrad<R>],
    out: &mut ModelGrads<R>,
) -> Result<ParentGrad<R>, PredictorError> {
    let cfg = &model.config;
    let h = cfg.half_dim();
    let nets = &model.nets;
    let params = &model.contraction;
    let st = &tape.statics;
    let tree = &tape.tree;
    let n = tree.nodes.len();
    debug_assert_eq!(node_grads.len(), n);

    let mut d_fused = vec![R::zero(); n * h];
    let mut d_unit = vec![[R::zero(); 3]; n];
    let mut d_pos: Vec<Vec3<R>> = node_grads.iter().map(|g| g.position).collect();
    let mut d_parent_scale = [R::zero(); 3];

    for i in 0..n {
        let g = &node_grads[i];
        let node = &tree.nodes[i];
        let df = &mut d_fused[i * h..(i + 1) * h];

        // colour
        let ct = &tape.colors[i];
        let d_logit: Vec<R> = (0..3).map(|c| sigmoid_backward(node_color(tape, i, c), g.color[c])).collect();
        if d_logit.iter().any(|v| *v != R::zero()) {
            let dx = nets.g_c.backward(&ct.head.input, &ct.head.hidden, &d_logit, &mut out.nets.g_c);
            for (a, b) in df.iter_mut().zip(&dx[..h]) {
                *a += *b;
            }
            let d_dir = sh::encode_backward(ct.dir, cfg.sh_degree, &dx[h..]);
            if linalg::norm(ct.view) > R::zero() {
                let d_view = linalg::normalize_backward(ct.view, d_dir);
                linalg::add_assign(&mut d_pos[i], d_view);
            }
        }

        // opacity
        let ot = &st.opacity[i];
        let d_o = sigmoid_backward(node.opacity, g.opacity);
        if d_o != R::zero() {
            let dx = nets.g_o.backward(&ot.input, &ot.hidden, &[d_o], &mut out.nets.g_o);
            for (a, b) in df.iter_mut().zip(&dx[..h]) {
                *a += *b;
            }
            linalg::add_assign(&mut d_unit[i], [dx[h], dx[h + 1], dx[h + 2]]);
        }

        // scale and rotation
        let rt = &st.rs[i];
        let mut d_rs = [R::zero(); 7];
        if i == 0 {
            linalg::add_assign(&mut d_parent_scale, g.scale);
        } else {
            let m = st.multipliers[i];
            for a in 0..3 {
                d_rs[a] = g.scale[a] * node.scale[a];
                d_parent_scale[a] += g.scale[a] * m[a];
            }
        }
        if !st.degenerate[i] {
            let q = [rt.output[3], rt.output[4], rt.output[5], rt.output[6]];
            let dq = linalg::normalize_quat_backward(q, g.rotation);
            d_rs[3..7].copy_from_slice(&dq);
        }
        if d_rs.iter().any(|v| *v != R::zero()) {
            let dx = nets.g_rs.backward(&rt.input, &rt.hidden, &d_rs, &mut out.nets.g_rs);
            for (a, b) in df.iter_mut().zip(&dx[..h]) {
                *a += *b;
            }
            let mut du = [dx[h], dx[h + 1], dx[h + 2]];
            let b = st.center_dist[i];
            if b > R::zero() {
                let half = R::of(0.5);
                for a in 0..3 {
                    du[a] += dx[h + 3] * (node.unit[a] - half) / b;
                }
            }
            linalg::add_assign(&mut d_unit[i], du);
        }
    }

    // attention
    let d_rows = nets.attn.backward(&st.attr_rows, &st.attention, &d_fused, &mut out.nets.attn);

    // children: grid query at each child, then the offset head
    let k = n - 1;
    let mut d_raw = vec![R::zero(); k * 3];
    let os = R::of(model.offset_scale);
    for c in 0..k {
        let i = c + 1;
        let x = tree.nodes[i].position;
        let mut up = vec![R::zero(); cfg.feature_dim];
        up[h..].copy_from_slice(&d_rows[i * h..(i + 1) * h]);
        let du_grid = model.grid.query_backward(tree.nodes[i].unit, &up, &mut out.grid)?;
        let du = linalg::add(du_grid, d_unit[i]);
        let dx = normalize_position_backward(x, params, du);
        linalg::add_assign(&mut d_pos[i], dx);
        for a in 0..3 {
            let t = st.positions.tanh[c * 3 + a];
            d_raw[c * 3 + a] = d_pos[i][a] * os * (R::one() - t * t);
        }
    }

    let mut d_parent_pos = d_pos[0];
    let mut up = vec![R::zero(); cfg.feature_dim];
    if k > 0 {
        for c in 0..k {
            linalg::add_assign(&mut d_parent_pos, d_pos[c + 1]);
        }
        let d_delta = nets.g_pos.backward(&st.feature[..h], &st.positions.hidden, &d_raw, &mut out.nets.g_pos);
        up[..h].copy_from_slice(&d_delta);
    }
    up[h..].copy_from_slice(&d_rows[..h]);
    let du_grid = model.grid.query_backward(tree.nodes[0].unit, &up, &mut out.grid)?;
    let du = linalg::add(du_grid, d_unit[0]);
    linalg::add_assign(&mut d_parent_pos, normalize_position_backward(parent.position, params, du));

    let s = st.parent_scale;
    Ok(ParentGrad {
        position: d_parent_pos,
        log_scale: [
            d_parent_scale[0] * s[0],
            d_parent_scale[1] * s[1],
            d_parent_scale[2] * s[2],
        ],
    })
}

fn node_color<R: Real>(tape: &TreeTape<R>, i: usize, c: usize) -> R {
    let logit = tape.colors[i].head.output[c];
    crate::real::sigmoid(logit)
}
