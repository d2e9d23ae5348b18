//! Local-affine (EWA) projection of a 3D Gaussian to screen space.

use super::covariance::{build_covariance, build_covariance_backward};
use super::{Gaussian2D, Gaussian2DGrad};
use crate::linalg::{self, Mat3, Vec3};
use crate::predictor::AttrGrad;
use crate::real::Real;
use crate::scene::{Camera, GaussianAttributes};
use crate::spatial::CULL_DEPTH;

/// Added to the screen-space covariance diagonal, px^2.
pub const COV2D_REGULARIZER: f64 = 0.3;

#[derive(Debug, Clone)]
pub struct ProjectTape<R> {
    pub view: Vec3<R>,
    pub sigma: Mat3<R>,
    /// `J W`, the 2x3 linear map from world offsets to pixels.
    pub jw: [[R; 3]; 2],
}

/// Camera rotation and translation converted to `R`.
pub fn camera_pose<R: Real>(camera: &Camera) -> (Mat3<R>, Vec3<R>) {
    let r = camera.rotation();
    let t = camera.translation();
    (r.map(|row| row.map(R::of)), t.map(R::of))
}

pub fn project<R: Real>(attrs: &GaussianAttributes<R>, camera: &Camera) -> Option<Gaussian2D<R>> {
    project_taped(attrs, camera).map(|(g, _)| g)
}

/// `None` when the splat sits at or in front of the near depth.
pub fn project_taped<R: Real>(
    attrs: &GaussianAttributes<R>,
    camera: &Camera,
) -> Option<(Gaussian2D<R>, ProjectTape<R>)> {
    let (w, t) = camera_pose::<R>(camera);
    let view = linalg::add(linalg::mat_vec(&w, attrs.position), t);
    let z = view[2];
    if !(z > R::of(CULL_DEPTH)) {
        return None;
    }
    let (fx, fy) = (R::of(camera.fx), R::of(camera.fy));
    let mean = [
        fx * view[0] / z + R::of(camera.cx),
        fy * view[1] / z + R::of(camera.cy),
    ];
    let j = [
        [fx / z, R::zero(), -fx * view[0] / (z * z)],
        [R::zero(), fy / z, -fy * view[1] / (z * z)],
    ];
    let mut jw = [[R::zero(); 3]; 2];
    for r in 0..2 {
        for c in 0..3 {
            jw[r][c] = j[r][0] * w[0][c] + j[r][1] * w[1][c] + j[r][2] * w[2][c];
        }
    }
    let sigma = build_covariance(attrs.scale, attrs.rotation);
    let mut cov = [[R::zero(); 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let mut acc = R::zero();
            for k in 0..3 {
                for l in 0..3 {
                    acc += jw[a][k] * sigma[k][l] * jw[b][l];
                }
            }
            cov[a][b] = acc;
        }
    }
    let reg = R::of(COV2D_REGULARIZER);
    Some((
        Gaussian2D {
            mean,
            cov: [cov[0][0] + reg, cov[0][1], cov[1][1] + reg],
            depth: z,
            color: attrs.color,
            opacity: attrs.opacity,
        },
        ProjectTape { view, sigma, jw },
    ))
}

pub fn project_backward<R: Real>(
    attrs: &GaussianAttributes<R>,
    camera: &Camera,
    tape: &ProjectTape<R>,
    grad: &Gaussian2DGrad<R>,
) -> AttrGrad<R> {
    let (w, _) = camera_pose::<R>(camera);
    let (fx, fy) = (R::of(camera.fx), R::of(camera.fy));
    let [x, y, z] = tape.view;
    let z2 = z * z;
    let z3 = z2 * z;
    let two = R::of(2.0);

    let mut d_view = [
        grad.mean[0] * fx / z,
        grad.mean[1] * fy / z,
        -grad.mean[0] * fx * x / z2 - grad.mean[1] * fy * y / z2,
    ];

    // full symmetric gradient on the 2x2 covariance
    let half = R::of(0.5);
    let g = [
        [grad.cov[0], half * grad.cov[1]],
        [half * grad.cov[1], grad.cov[2]],
    ];
    let jw = &tape.jw;
    let sigma = &tape.sigma;
    let mut d_sigma = [[R::zero(); 3]; 3];
    for k in 0..3 {
        for l in 0..3 {
            let mut acc = R::zero();
            for a in 0..2 {
                for b in 0..2 {
                    acc += jw[a][k] * g[a][b] * jw[b][l];
                }
            }
            d_sigma[k][l] = acc;
        }
    }
    // d(JW) = 2 G (JW) Sigma
    let mut d_jw = [[R::zero(); 3]; 2];
    for a in 0..2 {
        for c in 0..3 {
            let mut acc = R::zero();
            for b in 0..2 {
                for k in 0..3 {
                    acc += g[a][b] * jw[b][k] * sigma[k][c];
                }
            }
            d_jw[a][c] = two * acc;
        }
    }
    // dJ = d(JW) W^T
    let mut d_j = [[R::zero(); 3]; 2];
    for a in 0..2 {
        for r in 0..3 {
            d_j[a][r] = d_jw[a][0] * w[r][0] + d_jw[a][1] * w[r][1] + d_jw[a][2] * w[r][2];
        }
    }
    d_view[0] += -d_j[0][2] * fx / z2;
    d_view[1] += -d_j[1][2] * fy / z2;
    d_view[2] += -d_j[0][0] * fx / z2 + d_j[0][2] * two * fx * x / z3 - d_j[1][1] * fy / z2
        + d_j[1][2] * two * fy * y / z3;

    let (d_scale, d_rot) = build_covariance_backward(attrs.scale, attrs.rotation, &d_sigma);
    AttrGrad {
        position: linalg::mat_t_vec(&w, d_view),
        scale: d_scale,
        rotation: d_rot,
        opacity: grad.opacity,
        color: grad.color,
    }
}
