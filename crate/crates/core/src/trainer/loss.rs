//! Training objective: `(1 - beta) * L1 + beta * (1 - SSIM) / 2`.

use super::metrics::{check_shapes, ssim_with_grad};
use super::TrainerError;
use crate::image::Image;
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub total: f64,
    pub l1: f64,
    pub dssim: f64,
}

/// Loss value and its gradient with respect to `rendered`.
pub fn loss<R: Real>(rendered: &Image<R>, gt: &Image<R>, beta: f64) -> Result<(LossTerms, Image<R>), TrainerError> {
    check_shapes(rendered, gt)?;
    if rendered.data == gt.data {
        // exact optimum; skip the SSIM chain, whose rounding residue is not zero
        let zero = LossTerms {
            total: 0.0,
            l1: 0.0,
            dssim: 0.0,
        };
        return Ok((zero, Image::new(rendered.width, rendered.height)));
    }
    let n = rendered.data.len().max(1);
    let inv_n = R::of(1.0 / n as f64);
    let w_l1 = R::of(1.0 - beta);
    let mut l1 = R::zero();
    let mut grad = Image::new(rendered.width, rendered.height);
    for ((g, r), t) in grad.data.iter_mut().zip(&rendered.data).zip(&gt.data) {
        let d = *r - *t;
        l1 += d.abs();
        let sign = if d > R::zero() {
            R::one()
        } else if d < R::zero() {
            -R::one()
        } else {
            R::zero()
        };
        *g = w_l1 * sign * inv_n;
    }
    let l1 = (l1 * inv_n).as_f64();
    let dssim = if beta != 0.0 {
        let (s, sg) = ssim_with_grad(rendered, gt)?;
        let scale = R::of(-0.5 * beta);
        for (g, d) in grad.data.iter_mut().zip(&sg.data) {
            *g += scale * *d;
        }
        (1.0 - s.as_f64()) / 2.0
    } else {
        0.0
    };
    Ok((
        LossTerms {
            total: (1.0 - beta) * l1 + beta * dssim,
            l1,
            dssim,
        },
        grad,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_images_give_zero() {
        let mut a = Image::<f64>::new(12, 12);
        for (i, v) in a.data.iter_mut().enumerate() {
            *v = (i % 7) as f64 / 7.0;
        }
        let (l, g) = loss(&a, &a, 0.2).unwrap();
        assert!(l.total.abs() < 1e-14);
        assert!(g.data.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn beta_zero_is_l1_with_sign_gradient() {
        let a = Image::<f64>::filled(4, 2, [0.5, 0.2, 0.9]);
        let b = Image::<f64>::filled(4, 2, [0.4, 0.2, 1.0]);
        let (l, g) = loss(&a, &b, 0.0).unwrap();
        let n = 24.0;
        assert!((l.total - (0.1 + 0.1) * 8.0 / n).abs() < 1e-12);
        assert_eq!(g.pixel(0, 0), [1.0 / n, 0.0, -1.0 / n]);
    }
}
