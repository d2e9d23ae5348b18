use crate::linalg::{self, Mat3, Quat, Vec3};
use crate::real::Real;

/// `R S S^T R^T` for a unit quaternion and per-axis scales.
pub fn build_covariance<R: Real>(scale: Vec3<R>, rotation: Quat<R>) -> Mat3<R> {
    let rot = linalg::quat_to_mat(rotation);
    let m = rs_product(&rot, scale);
    let mut sigma = [[R::zero(); 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let v = m[i][0] * m[j][0] + m[i][1] * m[j][1] + m[i][2] * m[j][2];
            sigma[i][j] = v;
            sigma[j][i] = v;
        }
    }
    sigma
}

fn rs_product<R: Real>(rot: &Mat3<R>, scale: Vec3<R>) -> Mat3<R> {
    let mut m = *rot;
    for row in m.iter_mut() {
        for j in 0..3 {
            row[j] *= scale[j];
        }
    }
    m
}

/// Backward of [`build_covariance`] given the (symmetric) full-matrix
/// gradient on `sigma`. Returns gradients on scale and on the unit quaternion.
pub fn build_covariance_backward<R: Real>(
    scale: Vec3<R>,
    rotation: Quat<R>,
    d_sigma: &Mat3<R>,
) -> (Vec3<R>, Quat<R>) {
    let rot = linalg::quat_to_mat(rotation);
    let m = rs_product(&rot, scale);
    // sigma = M M^T, dM = (dS + dS^T) M
    let mut d_m = [[R::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut acc = R::zero();
            for k in 0..3 {
                acc += (d_sigma[i][k] + d_sigma[k][i]) * m[k][j];
            }
            d_m[i][j] = acc;
        }
    }
    let mut d_scale = [R::zero(); 3];
    let mut d_rot = [[R::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            d_rot[i][j] = d_m[i][j] * scale[j];
            d_scale[j] += d_m[i][j] * rot[i][j];
        }
    }
    (d_scale, linalg::quat_to_mat_backward(rotation, &d_rot))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_quat(rng: &mut ChaCha8Rng) -> Quat<f64> {
        let q: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        q.map(|v| v / n)
    }

    /// Eigenvalues of a symmetric 3x3 via the trigonometric closed form.
    fn sym_eigenvalues(a: &Mat3<f64>) -> [f64; 3] {
        let p1 = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
        let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
        let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        let mut b = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                b[i][j] = (a[i][j] - if i == j { q } else { 0.0 }) / p;
            }
        }
        let det_b = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1])
            - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
            + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
        let r = (det_b / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let e1 = q + 2.0 * p * phi.cos();
        let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        let e2 = 3.0 * q - e1 - e3;
        let mut e = [e1, e2, e3];
        e.sort_by(f64::total_cmp);
        e
    }

    #[test]
    fn identity_rotation_is_diagonal() {
        let s = build_covariance([0.5f64, 2.0, 3.0], [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(s, [[0.25, 0.0, 0.0], [0.0, 4.0, 0.0], [0.0, 0.0, 9.0]]);
    }

    #[test]
    fn symmetric_and_eigenvalues_are_squared_scales() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let s: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.1..2.0));
            let q = random_quat(&mut rng);
            let sigma = build_covariance(s, q);
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(sigma[i][j], sigma[j][i]);
                }
            }
            let ev = sym_eigenvalues(&sigma);
            let mut s2 = s.map(|v| v * v);
            s2.sort_by(f64::total_cmp);
            for k in 0..3 {
                assert!((ev[k] - s2[k]).abs() / s2[k] < 1e-9, "{ev:?} vs {s2:?}");
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = [0.3f64, 0.7, 1.1];
        let q = random_quat(&mut rng);
        let up: Mat3<f64> = std::array::from_fn(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)));
        let f = |s: Vec3<f64>, q: Quat<f64>| -> f64 {
            let sig = build_covariance(s, q);
            (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| sig[i][j] * up[i][j]).sum()
        };
        let (ds, dq) = build_covariance_backward(s, q, &up);
        let h = 1e-6;
        for k in 0..3 {
            let (mut sp, mut sm) = (s, s);
            sp[k] += h;
            sm[k] -= h;
            assert!(((f(sp, q) - f(sm, q)) / (2.0 * h) - ds[k]).abs() < 1e-7);
        }
        for k in 0..4 {
            let (mut qp, mut qm) = (q, q);
            qp[k] += h;
            qm[k] -= h;
            assert!(((f(s, qp) - f(s, qm)) / (2.0 * h) - dq[k]).abs() < 1e-7);
        }
    }
}
