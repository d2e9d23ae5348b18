use std::f64::consts::PI;

use lpgs_core::sh::{basis_len, encode, SH_C0, SH_C1, SH_C2, SH_C3};

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

#[test]
fn coefficients_match_closed_forms() {
    let s = f64::sqrt;
    assert!((SH_C0 - 0.5 / s(PI)).abs() < 1e-15);
    assert!((SH_C1 - s(3.0 / (4.0 * PI))).abs() < 1e-15);
    let c2 = [0.5 * s(15.0 / PI), -0.5 * s(15.0 / PI), 0.25 * s(5.0 / PI), -0.5 * s(15.0 / PI), 0.25 * s(15.0 / PI)];
    for (a, b) in SH_C2.iter().zip(c2) {
        assert!((a - b).abs() < 1e-14, "{a} {b}");
    }
    let c3 = [
        -0.25 * s(35.0 / (2.0 * PI)),
        0.5 * s(105.0 / PI),
        -0.25 * s(21.0 / (2.0 * PI)),
        0.25 * s(7.0 / PI),
        -0.25 * s(21.0 / (2.0 * PI)),
        0.25 * s(105.0 / PI),
        -0.25 * s(35.0 / (2.0 * PI)),
    ];
    for (a, b) in SH_C3.iter().zip(c3) {
        assert!((a - b).abs() < 1e-14, "{a} {b}");
    }
}

#[test]
fn basis_is_orthonormal_on_the_sphere() {
    let degree = 3;
    let n = basis_len(degree);
    let nodes = gauss_legendre(12);
    let n_phi = 24;
    let mut gram = vec![0.0; n * n];
    for &(z, w) in &nodes {
        let rho = (1.0 - z * z).sqrt();
        for j in 0..n_phi {
            let phi = 2.0 * PI * j as f64 / n_phi as f64;
            let y = encode([rho * phi.cos(), rho * phi.sin(), z], degree);
            let wt = w * 2.0 * PI / n_phi as f64;
            for a in 0..n {
                for b in 0..n {
                    gram[a * n + b] += wt * y[a] * y[b];
                }
            }
        }
    }
    for a in 0..n {
        for b in 0..n {
            let want = if a == b { 1.0 } else { 0.0 };
            assert!((gram[a * n + b] - want).abs() < 1e-12, "({a},{b}) = {}", gram[a * n + b]);
        }
    }
}

#[test]
fn lower_degrees_are_prefixes() {
    let d = [0.3f64, -0.5, 0.81];
    let full = encode(d, 3);
    for deg in 0..3 {
        assert_eq!(encode(d, deg)[..], full[..basis_len(deg)]);
    }
}
