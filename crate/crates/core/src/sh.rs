//! Real spherical-harmonic encoding of view directions, degrees 1 to 3.

use crate::linalg::Vec3;
use crate::real::Real;

pub const SH_C0: f64 = 0.282_094_791_773_878_14;
pub const SH_C1: f64 = 0.488_602_511_902_919_9;
pub const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
pub const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

pub fn basis_len(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

/// Basis values at unit direction `d`.
pub fn encode<R: Real>(d: Vec3<R>, degree: usize) -> Vec<R> {
    let [x, y, z] = d;
    let c = R::of;
    let mut out = Vec::with_capacity(basis_len(degree));
    out.push(c(SH_C0));
    if degree >= 1 {
        out.push(-c(SH_C1) * y);
        out.push(c(SH_C1) * z);
        out.push(-c(SH_C1) * x);
    }
    if degree >= 2 {
        let (xx, yy, zz) = (x * x, y * y, z * z);
        out.push(c(SH_C2[0]) * x * y);
        out.push(c(SH_C2[1]) * y * z);
        out.push(c(SH_C2[2]) * (c(2.0) * zz - xx - yy));
        out.push(c(SH_C2[3]) * x * z);
        out.push(c(SH_C2[4]) * (xx - yy));
    }
    if degree >= 3 {
        let (xx, yy, zz) = (x * x, y * y, z * z);
        out.push(c(SH_C3[0]) * y * (c(3.0) * xx - yy));
        out.push(c(SH_C3[1]) * x * y * z);
        out.push(c(SH_C3[2]) * y * (c(4.0) * zz - xx - yy));
        out.push(c(SH_C3[3]) * z * (c(2.0) * zz - c(3.0) * xx - c(3.0) * yy));
        out.push(c(SH_C3[4]) * x * (c(4.0) * zz - xx - yy));
        out.push(c(SH_C3[5]) * z * (xx - yy));
        out.push(c(SH_C3[6]) * x * (xx - c(3.0) * yy));
    }
    out
}

/// Gradient of `<d_basis, encode(d)>` with respect to the (unnormalized
/// treatment of the) direction components.
pub fn encode_backward<R: Real>(d: Vec3<R>, degree: usize, d_basis: &[R]) -> Vec3<R> {
    let [x, y, z] = d;
    let c = R::of;
    let mut g = [R::zero(); 3];
    let mut acc = |i: usize, dx: R, dy: R, dz: R| {
        let u = d_basis[i];
        g[0] += u * dx;
        g[1] += u * dy;
        g[2] += u * dz;
    };
    let zero = R::zero();
    if degree >= 1 {
        let k = c(SH_C1);
        acc(1, zero, -k, zero);
        acc(2, zero, zero, k);
        acc(3, -k, zero, zero);
    }
    if degree >= 2 {
        let k = SH_C2.map(c);
        acc(4, k[0] * y, k[0] * x, zero);
        acc(5, zero, k[1] * z, k[1] * y);
        acc(6, -c(2.0) * k[2] * x, -c(2.0) * k[2] * y, c(4.0) * k[2] * z);
        acc(7, k[3] * z, zero, k[3] * x);
        acc(8, c(2.0) * k[4] * x, -c(2.0) * k[4] * y, zero);
    }
    if degree >= 3 {
        let k = SH_C3.map(c);
        let (xx, yy, zz) = (x * x, y * y, z * z);
        acc(9, k[0] * c(6.0) * x * y, k[0] * (c(3.0) * xx - c(3.0) * yy), zero);
        acc(10, k[1] * y * z, k[1] * x * z, k[1] * x * y);
        acc(
            11,
            -k[2] * c(2.0) * x * y,
            k[2] * (c(4.0) * zz - xx - c(3.0) * yy),
            k[2] * c(8.0) * y * z,
        );
        acc(
            12,
            -k[3] * c(6.0) * x * z,
            -k[3] * c(6.0) * y * z,
            k[3] * (c(6.0) * zz - c(3.0) * xx - c(3.0) * yy),
        );
        acc(
            13,
            k[4] * (c(4.0) * zz - c(3.0) * xx - yy),
            -k[4] * c(2.0) * x * y,
            k[4] * c(8.0) * x * z,
        );
        acc(14, k[5] * c(2.0) * x * z, -k[5] * c(2.0) * y * z, k[5] * (xx - yy));
        acc(15, k[6] * (c(3.0) * xx - c(3.0) * yy), -k[6] * c(6.0) * x * y, zero);
    }
    g
}
