//! Adam with per-group moments. Grid entries use a lazy variant that only
//! touches entries with a gradient this step.

use std::collections::BTreeMap;

use super::schedule::ParamGroup;
use crate::predictor::NetworkBundle;
use crate::real::Real;
use crate::scene::SceneModel;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub struct Moments<R> {
    pub m: Vec<R>,
    pub v: Vec<R>,
}

impl<R: Real> Moments<R> {
    pub fn zeros(n: usize) -> Self {
        Self {
            m: vec![R::zero(); n],
            v: vec![R::zero(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().chain(&self.v).all(|x| x.is_finite())
    }
}

/// Bias-corrected step size factors for step `t` (1-based).
#[derive(Debug, Clone, Copy)]
struct Step<R> {
    lr: R,
    b1: R,
    b2: R,
    c1: R,
    c2: R,
    eps: R,
}

impl<R: Real> Step<R> {
    fn new(lr: f64, t: u64) -> Self {
        let t = t as i32;
        Self {
            lr: R::of(lr),
            b1: R::of(ADAM_BETA1),
            b2: R::of(ADAM_BETA2),
            c1: R::of(1.0 / (1.0 - ADAM_BETA1.powi(t))),
            c2: R::of(1.0 / (1.0 - ADAM_BETA2.powi(t))),
            eps: R::of(ADAM_EPS),
        }
    }

    #[inline]
    fn apply(&self, p: &mut R, g: R, m: &mut R, v: &mut R) {
        *m = self.b1 * *m + (R::one() - self.b1) * g;
        *v = self.b2 * *v + (R::one() - self.b2) * g * g;
        let mh = *m * self.c1;
        let vh = *v * self.c2;
        *p -= self.lr * mh / (vh.sqrt() + self.eps);
    }
}

/// Sum duplicate indices of a sparse gradient over a table of `len`
/// entries; output sorted by index. Summation order within an index
/// follows input order.
pub fn coalesce<R: Real>(pairs: &[(usize, R)], len: usize) -> Vec<(usize, R)> {
    let mut dense = vec![R::zero(); len];
    let mut touched = vec![false; len];
    for &(i, g) in pairs {
        dense[i] += g;
        touched[i] = true;
    }
    touched
        .iter()
        .enumerate()
        .filter(|(_, t)| **t)
        .map(|(i, _)| (i, dense[i]))
        .collect()
}

fn head_slices<R: Real>(nets: &NetworkBundle<R>, group: ParamGroup) -> Vec<&[R]> {
    match group {
        ParamGroup::Offset => nets.g_pos.params().to_vec(),
        ParamGroup::ScaleRotation => nets.g_rs.params().to_vec(),
        ParamGroup::Color => nets.g_c.params().to_vec(),
        ParamGroup::Opacity => nets.g_o.params().to_vec(),
        ParamGroup::Attention => vec![&nets.attn.p1, &nets.attn.p2],
        _ => Vec::new(),
    }
}

fn head_slices_mut<R: Real>(nets: &mut NetworkBundle<R>, group: ParamGroup) -> Vec<&mut [R]> {
    match group {
        ParamGroup::Offset => nets.g_pos.params_mut().into_iter().map(|v| v.as_mut_slice()).collect(),
        ParamGroup::ScaleRotation => nets.g_rs.params_mut().into_iter().map(|v| v.as_mut_slice()).collect(),
        ParamGroup::Color => nets.g_c.params_mut().into_iter().map(|v| v.as_mut_slice()).collect(),
        ParamGroup::Opacity => nets.g_o.params_mut().into_iter().map(|v| v.as_mut_slice()).collect(),
        ParamGroup::Attention => vec![nets.attn.p1.as_mut_slice(), nets.attn.p2.as_mut_slice()],
        _ => Vec::new(),
    }
}

/// Groups backed by network weights.
pub const NETWORK_GROUPS: [ParamGroup; 5] = [
    ParamGroup::Offset,
    ParamGroup::ScaleRotation,
    ParamGroup::Color,
    ParamGroup::Opacity,
    ParamGroup::Attention,
];

/// Number of scalars in a group for `model`.
pub fn group_size<R: Real>(model: &SceneModel<R>, group: ParamGroup) -> usize {
    match group {
        ParamGroup::Grid => model.grid.tables.len(),
        ParamGroup::Position | ParamGroup::ParentScale => 3 * model.parents.len(),
        _ => head_slices(&model.nets, group).iter().map(|s| s.len()).sum(),
    }
}

/// Gradients for one step, laid out per group.
#[derive(Debug, Clone)]
pub struct StepGrads<R> {
    pub nets: NetworkBundle<R>,
    /// Coalesced sparse grid gradient.
    pub grid: Vec<(usize, R)>,
    pub position: Vec<[R; 3]>,
    pub log_scale: Vec<[R; 3]>,
}

impl<R: Real> StepGrads<R> {
    /// First group holding a non-finite gradient.
    pub fn non_finite_group(&self) -> Option<ParamGroup> {
        if !self.grid.iter().all(|(_, g)| g.is_finite()) {
            return Some(ParamGroup::Grid);
        }
        if !self.position.iter().flatten().all(|g| g.is_finite()) {
            return Some(ParamGroup::Position);
        }
        if !self.log_scale.iter().flatten().all(|g| g.is_finite()) {
            return Some(ParamGroup::ParentScale);
        }
        NETWORK_GROUPS
            .into_iter()
            .find(|g| !head_slices(&self.nets, *g).iter().all(|s| s.iter().all(|v| v.is_finite())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<R> {
    /// Number of updates applied so far.
    pub step: u64,
    pub groups: BTreeMap<ParamGroup, Moments<R>>,
}

impl<R: Real> OptimizerState<R> {
    pub fn new(model: &SceneModel<R>) -> Self {
        let groups = ParamGroup::ALL
            .into_iter()
            .map(|g| (g, Moments::zeros(group_size(model, g))))
            .collect();
        Self { step: 0, groups }
    }

    /// Whether every group's moment buffers match `model`'s parameter shapes.
    pub fn matches(&self, model: &SceneModel<R>) -> bool {
        ParamGroup::ALL
            .into_iter()
            .all(|g| self.groups.get(&g).map(Moments::len) == Some(group_size(model, g)))
    }

    pub fn is_finite(&self) -> bool {
        self.groups.values().all(Moments::is_finite)
    }

    /// One Adam update of every group; `rates` gives the learning rate per group.
    pub fn apply(&mut self, model: &mut SceneModel<R>, grads: &StepGrads<R>, rates: &BTreeMap<ParamGroup, f64>) {
        self.step += 1;
        let t = self.step;
        let rate = |g: ParamGroup| rates.get(&g).copied().unwrap_or(0.0);

        for group in NETWORK_GROUPS {
            let st = Step::<R>::new(rate(group), t);
            let mom = self.groups.get_mut(&group).expect("group present");
            let gs = head_slices(&grads.nets, group);
            let ps = head_slices_mut(&mut model.nets, group);
            let mut k = 0;
            for (p, g) in ps.into_iter().zip(gs) {
                for (pi, gi) in p.iter_mut().zip(g) {
                    st.apply(pi, *gi, &mut mom.m[k], &mut mom.v[k]);
                    k += 1;
                }
            }
        }

        let st = Step::<R>::new(rate(ParamGroup::Grid), t);
        let mom = self.groups.get_mut(&ParamGroup::Grid).expect("group present");
        for &(i, g) in &grads.grid {
            st.apply(&mut model.grid.tables[i], g, &mut mom.m[i], &mut mom.v[i]);
        }

        let st = Step::<R>::new(rate(ParamGroup::Position), t);
        let mom = self.groups.get_mut(&ParamGroup::Position).expect("group present");
        for (p, (parent, g)) in model.parents.iter_mut().zip(&grads.position).enumerate() {
            for a in 0..3 {
                let k = 3 * p + a;
                st.apply(&mut parent.position[a], g[a], &mut mom.m[k], &mut mom.v[k]);
            }
        }

        let st = Step::<R>::new(rate(ParamGroup::ParentScale), t);
        let mom = self.groups.get_mut(&ParamGroup::ParentScale).expect("group present");
        for (p, (parent, g)) in model.parents.iter_mut().zip(&grads.log_scale).enumerate() {
            for a in 0..3 {
                let k = 3 * p + a;
                st.apply(&mut parent.log_scale[a], g[a], &mut mom.m[k], &mut mom.v[k]);
            }
        }
    }

    /// Rebuild per-parent moments after the parent list changed. `sources[i]`
    /// is the old index new parent `i` inherits from; `None` starts at zero.
    pub fn remap_parents(&mut self, sources: &[Option<usize>]) {
        for group in [ParamGroup::Position, ParamGroup::ParentScale] {
            let old = self.groups.get(&group).cloned().unwrap_or_else(|| Moments::zeros(0));
            let mut new = Moments::zeros(3 * sources.len());
            for (i, src) in sources.iter().enumerate() {
                if let Some(j) = *src {
                    if 3 * j + 2 < old.len() {
                        new.m[3 * i..3 * i + 3].copy_from_slice(&old.m[3 * j..3 * j + 3]);
                        new.v[3 * i..3 * i + 3].copy_from_slice(&old.v[3 * j..3 * j + 3]);
                    }
                }
            }
            self.groups.insert(group, new);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coalesce_sums_duplicates() {
        let c = coalesce(&[(3usize, 1.0f64), (1, 2.0), (3, 0.5), (0, 1.0)], 5);
        assert_eq!(c, vec![(0, 1.0), (1, 2.0), (3, 1.5)]);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let st = Step::<f64>::new(0.01, 1);
        for g in [3.0, -0.2, 1e-3] {
            let (mut p, mut m, mut v) = (1.0, 0.0, 0.0);
            st.apply(&mut p, g, &mut m, &mut v);
            assert!((p - (1.0 - 0.01 * f64::signum(g))).abs() < 1e-9);
        }
    }

    #[test]
    fn scaled_gradient_scales_first_moment() {
        let st = Step::<f64>::new(0.01, 1);
        let (mut p1, mut m1, mut v1) = (0.0, 0.0, 0.0);
        let (mut p2, mut m2, mut v2) = (0.0, 0.0, 0.0);
        st.apply(&mut p1, 0.3, &mut m1, &mut v1);
        st.apply(&mut p2, 0.3 * 7.0, &mut m2, &mut v2);
        assert!((m2 - 7.0 * m1).abs() < 1e-15);
        assert_eq!(p1.signum(), p2.signum());
    }
}
