//! SSIM (11x11 Gaussian window, sigma 1.5, zero padding) and PSNR.

use super::TrainerError;
use crate::image::Image;
use crate::real::Real;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;
/// Returned for identical images.
pub const PSNR_CAP: f64 = 100.0;

/// Normalized 1D Gaussian taps; the 2D window is their outer product.
pub fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let mut g = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in g.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = g.iter().sum();
    g.map(|v| v / s)
}

pub(crate) fn check_shapes<R: Real>(a: &Image<R>, b: &Image<R>) -> Result<(), TrainerError> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(TrainerError::DimensionMismatch {
            left: (a.width, a.height),
            right: (b.width, b.height),
        })
    }
}

/// Separable "same" filtering of one plane with zero padding. The kernel is
/// symmetric, so this is also its own adjoint.
fn blur<R: Real>(plane: &[R], w: usize, h: usize, taps: &[R; SSIM_WINDOW]) -> Vec<R> {
    let r = (SSIM_WINDOW / 2) as isize;
    let mut tmp = vec![R::zero(); w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = R::zero();
            for (k, t) in taps.iter().enumerate() {
                let sx = x as isize + k as isize - r;
                if sx >= 0 && (sx as usize) < w {
                    acc += *t * plane[y * w + sx as usize];
                }
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![R::zero(); w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = R::zero();
            for (k, t) in taps.iter().enumerate() {
                let sy = y as isize + k as isize - r;
                if sy >= 0 && (sy as usize) < h {
                    acc += *t * tmp[sy as usize * w + x];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

fn channel<R: Real>(img: &Image<R>, c: usize) -> Vec<R> {
    img.data.iter().skip(c).step_by(3).copied().collect()
}

pub fn ssim<R: Real>(a: &Image<R>, b: &Image<R>) -> Result<R, TrainerError> {
    ssim_impl(a, b, false).map(|(s, _)| s)
}

/// SSIM and its gradient with respect to `a`.
pub fn ssim_with_grad<R: Real>(a: &Image<R>, b: &Image<R>) -> Result<(R, Image<R>), TrainerError> {
    ssim_impl(a, b, true).map(|(s, g)| (s, g.expect("gradient requested")))
}

fn ssim_impl<R: Real>(a: &Image<R>, b: &Image<R>, want_grad: bool) -> Result<(R, Option<Image<R>>), TrainerError> {
    check_shapes(a, b)?;
    let (w, h) = (a.width, a.height);
    let n = w * h;
    if n == 0 {
        return Err(TrainerError::DimensionMismatch {
            left: (w, h),
            right: (b.width, b.height),
        });
    }
    let taps = gaussian_taps().map(R::of);
    let c1 = R::of(SSIM_C1);
    let c2 = R::of(SSIM_C2);
    let two = R::of(2.0);
    let mut total = R::zero();
    let mut grad = want_grad.then(|| Image::new(w, h));
    let norm = R::one() / R::of((3 * n) as f64);
    for c in 0..3 {
        let x = channel(a, c);
        let y = channel(b, c);
        let xx: Vec<R> = x.iter().map(|v| *v * *v).collect();
        let yy: Vec<R> = y.iter().map(|v| *v * *v).collect();
        let xy: Vec<R> = x.iter().zip(&y).map(|(p, q)| *p * *q).collect();
        let mx = blur(&x, w, h, &taps);
        let my = blur(&y, w, h, &taps);
        let exx = blur(&xx, w, h, &taps);
        let eyy = blur(&yy, w, h, &taps);
        let exy = blur(&xy, w, h, &taps);
        let mut d_mx = vec![R::zero(); if want_grad { n } else { 0 }];
        let mut d_exx = d_mx.clone();
        let mut d_exy = d_mx.clone();
        for p in 0..n {
            let a1 = two * mx[p] * my[p] + c1;
            let a2 = two * (exy[p] - mx[p] * my[p]) + c2;
            let b1 = mx[p] * mx[p] + my[p] * my[p] + c1;
            let b2 = exx[p] - mx[p] * mx[p] + eyy[p] - my[p] * my[p] + c2;
            let s = a1 * a2 / (b1 * b2);
            total += s;
            if want_grad {
                let inv = R::one() / (b1 * b2);
                d_mx[p] = (two * my[p] * a2 - two * my[p] * a1) * inv - s * two * mx[p] * (R::one() / b1 - R::one() / b2);
                d_exy[p] = two * a1 * inv;
                d_exx[p] = -s / b2;
            }
        }
        if let Some(g) = grad.as_mut() {
            let gm = blur(&d_mx, w, h, &taps);
            let gxx = blur(&d_exx, w, h, &taps);
            let gxy = blur(&d_exy, w, h, &taps);
            for p in 0..n {
                g.data[p * 3 + c] = norm * (gm[p] + two * x[p] * gxx[p] + y[p] * gxy[p]);
            }
        }
    }
    Ok((total * norm, grad))
}

pub fn mse<R: Real>(a: &Image<R>, b: &Image<R>) -> Result<f64, TrainerError> {
    check_shapes(a, b)?;
    let n = a.data.len().max(1) as f64;
    Ok(a.data.iter().zip(&b.data).map(|(p, q)| (p.as_f64() - q.as_f64()).powi(2)).sum::<f64>() / n)
}

/// `-10 log10(MSE)` in dB, capped at [`PSNR_CAP`].
pub fn psnr<R: Real>(a: &Image<R>, b: &Image<R>) -> Result<f64, TrainerError> {
    Ok(psnr_from_mse(mse(a, b)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP;
    }
    (-10.0 * mse.log10()).min(PSNR_CAP)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taps_sum_to_one_and_are_symmetric() {
        let g = gaussian_taps();
        assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for i in 0..SSIM_WINDOW {
            assert_eq!(g[i], g[SSIM_WINDOW - 1 - i]);
        }
    }

    #[test]
    fn identical_images_have_unit_ssim() {
        let mut img = Image::<f64>::new(17, 9);
        for (i, v) in img.data.iter_mut().enumerate() {
            *v = ((i * 37) % 101) as f64 / 100.0;
        }
        assert!((ssim(&img, &img).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn black_against_white_is_near_floor() {
        let a = Image::<f64>::filled(16, 16, [0.0; 3]);
        let b = Image::<f64>::filled(16, 16, [1.0; 3]);
        let s = ssim(&a, &b).unwrap();
        assert!(s.abs() < 0.1, "{s}");
    }

    #[test]
    fn psnr_closed_forms() {
        assert_eq!(psnr_from_mse(0.0), PSNR_CAP);
        assert!((psnr_from_mse(0.01) - 20.0).abs() < 1e-12);
        assert_eq!(psnr_from_mse(1.0), 0.0);
    }

    #[test]
    fn shape_mismatch_is_named() {
        let a = Image::<f32>::new(4, 4);
        let b = Image::<f32>::new(4, 5);
        assert!(matches!(ssim(&a, &b), Err(TrainerError::DimensionMismatch { .. })));
        assert!(matches!(psnr(&a, &b), Err(TrainerError::DimensionMismatch { .. })));
    }
}
