//! Scene bounds, sphere-based contraction into the unit cube, and depth culling.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, Mat3, Vec3};
use crate::real::Real;

/// Parents at or closer than this view depth are culled.
pub const CULL_DEPTH: f64 = 0.201;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SpatialError {
    #[error("degenerate point cloud: fewer than two distinct points")]
    DegeneratePointCloud,
    #[error("contracted point overshoots the estimated box by {0}")]
    OutOfBox(f64),
}

/// How points outside the inner sphere are pulled in. Radii below are in
/// world units; `r` is the distance from the centre.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ContractionMode {
    /// `(R_outer - 1/r) * dir + O` evaluated in units of `R_inner`, i.e.
    /// `(R_outer - R_inner^2 / r) * dir + O` in world units. Jumps inward at
    /// `R_inner` and sends infinity to `S_outer`.
    #[default]
    Verbatim,
    /// `(R_outer - (R_outer - R_inner) * R_inner / r) * dir + O`: equals the
    /// identity at `R_inner` and still sends infinity to `S_outer`.
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionParams {
    pub center: [f64; 3],
    pub r_inner: f64,
    pub r_outer: f64,
    pub mode: ContractionMode,
}

impl ContractionParams {
    pub fn new(center: [f64; 3], r_inner: f64, mode: ContractionMode) -> Self {
        Self {
            center,
            r_inner,
            r_outer: 3f64.sqrt() * r_inner,
            mode,
        }
    }

    /// Half side of the estimated box (the cube circumscribing `S_outer`).
    pub fn box_half_side(&self) -> f64 {
        self.r_outer
    }

    pub fn aabb_min(&self) -> [f64; 3] {
        let h = self.box_half_side();
        [self.center[0] - h, self.center[1] - h, self.center[2] - h]
    }

    pub fn aabb_max(&self) -> [f64; 3] {
        let h = self.box_half_side();
        [self.center[0] + h, self.center[1] + h, self.center[2] + h]
    }

    /// Side length of the initial (cubified) point-cloud box.
    pub fn scene_extent(&self) -> f64 {
        2.0 * self.r_inner
    }

}

/// Cubified bounding box of the points and the derived spheres.
pub fn estimate_aabb(points: &[[f64; 3]], mode: ContractionMode) -> Result<ContractionParams, SpatialError> {
    let first = points.first().ok_or(SpatialError::DegeneratePointCloud)?;
    let mut lo = *first;
    let mut hi = *first;
    for p in points {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let half = (0..3).map(|a| 0.5 * (hi[a] - lo[a])).fold(0.0, f64::max);
    if !(half > 0.0) {
        return Err(SpatialError::DegeneratePointCloud);
    }
    let center = [
        0.5 * (lo[0] + hi[0]),
        0.5 * (lo[1] + hi[1]),
        0.5 * (lo[2] + hi[2]),
    ];
    Ok(ContractionParams::new(center, half, mode))
}

fn center_of<R: Real>(params: &ContractionParams) -> Vec3<R> {
    [R::of(params.center[0]), R::of(params.center[1]), R::of(params.center[2])]
}

/// Radial scale `g(r)` with `contract(p) = O + g(r) (p - O)`, and `g'(r)`.
fn radial<R: Real>(r: R, params: &ContractionParams) -> (R, R) {
    let r_in = R::of(params.r_inner);
    let r_out = R::of(params.r_outer);
    let k = match params.mode {
        ContractionMode::Verbatim => r_in * r_in,
        ContractionMode::Continuous => (r_out - r_in) * r_in,
    };
    let g = r_out / r - k / (r * r);
    let dg = -r_out / (r * r) + R::of(2.0) * k / (r * r * r);
    (g, dg)
}

pub fn contract<R: Real>(p: Vec3<R>, params: &ContractionParams) -> Vec3<R> {
    let o = center_of::<R>(params);
    let v = linalg::sub(p, o);
    let r = linalg::norm(v);
    if r <= R::of(params.r_inner) {
        return p;
    }
    let (g, _) = radial(r, params);
    linalg::add(o, linalg::scale(v, g))
}

/// Jacobian of `contract` at `p`.
pub fn contract_jacobian<R: Real>(p: Vec3<R>, params: &ContractionParams) -> Mat3<R> {
    let o = center_of::<R>(params);
    let v = linalg::sub(p, o);
    let r = linalg::norm(v);
    let mut j = [[R::zero(); 3]; 3];
    if r <= R::of(params.r_inner) {
        for (i, row) in j.iter_mut().enumerate() {
            row[i] = R::one();
        }
        return j;
    }
    let (g, dg) = radial(r, params);
    for i in 0..3 {
        for k in 0..3 {
            j[i][k] = v[i] * dg * v[k] / r;
        }
        j[i][i] += g;
    }
    j
}

/// Affine map of the estimated box onto `[0,1]^3`.
pub fn to_unit_cube<R: Real>(p: Vec3<R>, params: &ContractionParams) -> Result<Vec3<R>, SpatialError> {
    let lo = params.aabb_min();
    let side = R::of(2.0 * params.box_half_side());
    let mut u = [R::zero(); 3];
    for a in 0..3 {
        let x = (p[a] - R::of(lo[a])) / side;
        let over = if x < R::zero() {
            -x
        } else if x > R::one() {
            x - R::one()
        } else {
            R::zero()
        };
        if over.as_f64() > 1e-6 || !x.is_finite() {
            return Err(SpatialError::OutOfBox(over.as_f64()));
        }
        u[a] = x.max(R::zero()).min(R::one());
    }
    Ok(u)
}

/// `to_unit_cube(contract(p))`.
pub fn normalize_position<R: Real>(p: Vec3<R>, params: &ContractionParams) -> Result<Vec3<R>, SpatialError> {
    to_unit_cube(contract(p, params), params)
}

/// Pull a gradient on the unit-cube coordinate back to the world position.
pub fn normalize_position_backward<R: Real>(
    p: Vec3<R>,
    params: &ContractionParams,
    d_unit: Vec3<R>,
) -> Vec3<R> {
    let inv_side = R::one() / R::of(2.0 * params.box_half_side());
    let j = contract_jacobian(p, params);
    linalg::mat_t_vec(&j, linalg::scale(d_unit, inv_side))
}

/// Keep mask of points whose view depth (row 2 of `M * [p; 1]`) exceeds `threshold`.
pub fn frustum_cull(points: &[[f64; 3]], world_to_view: &[[f64; 4]; 4], threshold: f64) -> Vec<bool> {
    let row = world_to_view[2];
    points
        .iter()
        .map(|p| row[0] * p[0] + row[1] * p[1] + row[2] * p[2] + row[3] > threshold)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_params() -> ContractionParams {
        ContractionParams::new([0.0; 3], 1.0, ContractionMode::Verbatim)
    }

    #[test]
    fn cube_corners_give_expected_spheres() {
        let mut pts = Vec::new();
        for i in 0..8 {
            pts.push([
                if i & 1 == 0 { -0.5 } else { 0.5 },
                if i & 2 == 0 { -0.5 } else { 0.5 },
                if i & 4 == 0 { -0.5 } else { 0.5 },
            ]);
        }
        let c = estimate_aabb(&pts, ContractionMode::Verbatim).unwrap();
        assert_eq!(c.center, [0.0; 3]);
        assert_eq!(c.r_inner, 0.5);
        assert!((c.r_outer - 0.5 * 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn repeated_point_is_degenerate() {
        let pts = vec![[1.0, 2.0, 3.0]; 5];
        assert_eq!(
            estimate_aabb(&pts, ContractionMode::Verbatim),
            Err(SpatialError::DegeneratePointCloud)
        );
        assert_eq!(
            estimate_aabb(&[], ContractionMode::Verbatim),
            Err(SpatialError::DegeneratePointCloud)
        );
    }

    #[test]
    fn contract_fixed_points_and_far_limit() {
        let c = unit_params();
        assert_eq!(contract([0.0f64; 3], &c), [0.0; 3]);
        assert_eq!(contract([1.0f64, 0.0, 0.0], &c), [1.0, 0.0, 0.0]);
        let far = contract([1e9f64, 0.0, 0.0], &c);
        assert!((far[0] - (3f64.sqrt() - 1e-9)).abs() < 1e-12);
    }

    #[test]
    fn unit_cube_endpoints() {
        let c = unit_params();
        let lo = c.aabb_min();
        assert_eq!(to_unit_cube(lo, &c).unwrap(), [0.0; 3]);
        let mid = to_unit_cube([0.0f64; 3], &c).unwrap();
        assert!(mid.iter().all(|v| (v - 0.5).abs() < 1e-15));
        assert!(matches!(
            to_unit_cube([5.0f64, 0.0, 0.0], &c),
            Err(SpatialError::OutOfBox(_))
        ));
    }

    #[test]
    fn verbatim_matches_literal_formula_at_unit_radius() {
        let c = ContractionParams::new([0.2, 0.0, -0.1], 1.0, ContractionMode::Verbatim);
        let p = [2.5f64, -1.0, 0.7];
        let v = [p[0] - 0.2, p[1], p[2] + 0.1];
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let got = contract(p, &c);
        for a in 0..3 {
            let want = (3f64.sqrt() - 1.0 / r) * v[a] / r + c.center[a];
            assert!((got[a] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn small_scenes_stay_in_box() {
        for r_in in [1e-3, 0.05, 0.5, 1.0, 40.0] {
            for mode in [ContractionMode::Verbatim, ContractionMode::Continuous] {
                let c = ContractionParams::new([0.0; 3], r_in, mode);
                for t in [1.0 + 1e-9, 1.01, 1.5, 3.0, 1e3, 1e8] {
                    let p = [t * r_in * 0.6, -t * r_in * 0.8, 0.0];
                    assert!(normalize_position(p, &c).is_ok(), "r_in {r_in} t {t} {mode:?}");
                }
            }
        }
    }

    #[test]
    fn continuous_mode_is_continuous_at_inner_radius() {
        let c = ContractionParams::new([0.0; 3], 0.5, ContractionMode::Continuous);
        let just_out = contract([0.5f64 + 1e-9, 0.0, 0.0], &c);
        assert!((just_out[0] - 0.5).abs() < 1e-8);
        let far = contract([1e9f64, 0.0, 0.0], &c);
        assert!((far[0] - c.r_outer).abs() < 1e-8);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        for mode in [ContractionMode::Verbatim, ContractionMode::Continuous] {
            let c = ContractionParams::new([0.1, -0.2, 0.3], 1.0, mode);
            let p = [1.7f64, 0.4, -1.1];
            let j = contract_jacobian(p, &c);
            for k in 0..3 {
                let h = 1e-6;
                let mut pp = p;
                let mut pm = p;
                pp[k] += h;
                pm[k] -= h;
                let a = contract(pp, &c);
                let b = contract(pm, &c);
                for i in 0..3 {
                    let fd = (a[i] - b[i]) / (2.0 * h);
                    assert!((fd - j[i][k]).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn cull_threshold_is_strict() {
        let mut m = [[0.0; 4]; 4];
        for i in 0..4 {
            m[i][i] = 1.0;
        }
        let pts = [[0.0, 0.0, 0.3], [0.0, 0.0, 0.201], [0.0, 0.0, -1.0]];
        assert_eq!(frustum_cull(&pts, &m, CULL_DEPTH), vec![true, false, false]);
    }
}
