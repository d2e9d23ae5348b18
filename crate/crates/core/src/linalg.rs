//! Small fixed-size vector, matrix and quaternion helpers on arrays.

use crate::real::Real;

pub type Vec3<R> = [R; 3];
pub type Mat3<R> = [[R; 3]; 3];
/// Quaternion stored as `[w, x, y, z]`.
pub type Quat<R> = [R; 4];

#[inline]
pub fn add<R: Real>(a: Vec3<R>, b: Vec3<R>) -> Vec3<R> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub<R: Real>(a: Vec3<R>, b: Vec3<R>) -> Vec3<R> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale<R: Real>(a: Vec3<R>, s: R) -> Vec3<R> {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot<R: Real>(a: Vec3<R>, b: Vec3<R>) -> R {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm<R: Real>(a: Vec3<R>) -> R {
    dot(a, a).sqrt()
}

#[inline]
pub fn add_assign<R: Real>(a: &mut Vec3<R>, b: Vec3<R>) {
    a[0] += b[0];
    a[1] += b[1];
    a[2] += b[2];
}

pub fn mat_vec<R: Real>(m: &Mat3<R>, v: Vec3<R>) -> Vec3<R> {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn mat_t_vec<R: Real>(m: &Mat3<R>, v: Vec3<R>) -> Vec3<R> {
    [
        m[0][0] * v[0] + m[1][0] * v[1] + m[2][0] * v[2],
        m[0][1] * v[0] + m[1][1] * v[1] + m[2][1] * v[2],
        m[0][2] * v[0] + m[1][2] * v[1] + m[2][2] * v[2],
    ]
}

pub fn mat_mul<R: Real>(a: &Mat3<R>, b: &Mat3<R>) -> Mat3<R> {
    let mut out = [[R::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

pub fn transpose<R: Real>(a: &Mat3<R>) -> Mat3<R> {
    let mut out = [[R::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

/// Rotation matrix of a unit quaternion `[w, x, y, z]`.
pub fn quat_to_mat<R: Real>(q: Quat<R>) -> Mat3<R> {
    let [w, x, y, z] = q;
    let one = R::one();
    let two = R::of(2.0);
    [
        [
            one - two * (y * y + z * z),
            two * (x * y - w * z),
            two * (x * z + w * y),
        ],
        [
            two * (x * y + w * z),
            one - two * (x * x + z * z),
            two * (y * z - w * x),
        ],
        [
            two * (x * z - w * y),
            two * (y * z + w * x),
            one - two * (x * x + y * y),
        ],
    ]
}

/// Pull a gradient on the rotation matrix back onto the (already normalized)
/// quaternion components.
pub fn quat_to_mat_backward<R: Real>(q: Quat<R>, d: &Mat3<R>) -> Quat<R> {
    let [w, x, y, z] = q;
    let two = R::of(2.0);
    let dw = two
        * (-z * d[0][1] + y * d[0][2] + z * d[1][0] - x * d[1][2] - y * d[2][0] + x * d[2][1]);
    let dx = two
        * (y * d[0][1] + z * d[0][2] + y * d[1][0] - two * x * d[1][1] - w * d[1][2]
            + z * d[2][0]
            + w * d[2][1]
            - two * x * d[2][2]);
    let dy = two
        * (-two * y * d[0][0] + x * d[0][1] + w * d[0][2] + x * d[1][0] + z * d[1][2]
            - w * d[2][0]
            + z * d[2][1]
            - two * y * d[2][2]);
    let dz = two
        * (-two * z * d[0][0] - w * d[0][1] + x * d[0][2] + w * d[1][0] - two * z * d[1][1]
            + y * d[1][2]
            + x * d[2][0]
            + y * d[2][1]);
    [dw, dx, dy, dz]
}

/// Backward of `q / |q|` given the gradient on the normalized quaternion.
pub fn normalize_quat_backward<R: Real>(q: Quat<R>, d_unit: Quat<R>) -> Quat<R> {
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    let u = [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
    let proj = u[0] * d_unit[0] + u[1] * d_unit[1] + u[2] * d_unit[2] + u[3] * d_unit[3];
    [
        (d_unit[0] - u[0] * proj) / n,
        (d_unit[1] - u[1] * proj) / n,
        (d_unit[2] - u[2] * proj) / n,
        (d_unit[3] - u[3] * proj) / n,
    ]
}

/// Backward of `v / |v|` for a 3-vector.
pub fn normalize_backward<R: Real>(v: Vec3<R>, d_unit: Vec3<R>) -> Vec3<R> {
    let n = norm(v);
    let u = scale(v, R::one() / n);
    let proj = dot(u, d_unit);
    [
        (d_unit[0] - u[0] * proj) / n,
        (d_unit[1] - u[1] * proj) / n,
        (d_unit[2] - u[2] * proj) / n,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_quaternion_gives_identity() {
        let m = quat_to_mat([1.0f64, 0.0, 0.0, 0.0]);
        for (i, row) in m.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_eq!(*v, if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn quat_backward_matches_finite_differences() {
        let q = [0.3f64, -0.5, 0.7, 0.2];
        let d = [[0.1, -0.4, 0.9], [0.3, 0.2, -0.7], [-0.5, 0.6, 0.05]];
        let f = |q: Quat<f64>| {
            let m = quat_to_mat(q);
            let mut s = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    s += m[i][j] * d[i][j];
                }
            }
            s
        };
        let g = quat_to_mat_backward(q, &d);
        for k in 0..4 {
            let h = 1e-6;
            let mut qp = q;
            let mut qm = q;
            qp[k] += h;
            qm[k] -= h;
            let fd = (f(qp) - f(qm)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-8, "component {k}: {fd} vs {}", g[k]);
        }
    }
}
