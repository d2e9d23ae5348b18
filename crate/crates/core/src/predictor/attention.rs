//! Residual single-head self-attention over the nodes of one tree.
//!
//! `F' = F + lambda * softmax(F P1 (F P2)^T / sqrt(d)) F` with unprojected
//! values and no positional encoding.

use rand::Rng;

use super::PredictorError;
use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams<R> {
    /// Feature width `D/2`; also the softmax scaling factor `d`.
    pub dim: usize,
    /// `dim x dim`, row-major; applied as `F * P1`.
    pub p1: Vec<R>,
    pub p2: Vec<R>,
    pub lambda: R,
}

#[derive(Debug, Clone, Default)]
pub struct AttentionTape<R> {
    pub rows: usize,
    pub q: Vec<R>,
    pub k: Vec<R>,
    /// Row-stochastic attention matrix, `rows x rows`.
    pub attn: Vec<R>,
}

impl<R: Real> AttentionParams<R> {
    pub fn zeros(dim: usize, lambda: R) -> Self {
        Self {
            dim,
            p1: vec![R::zero(); dim * dim],
            p2: vec![R::zero(); dim * dim],
            lambda,
        }
    }

    pub fn random<G: Rng>(dim: usize, lambda: R, rng: &mut G) -> Self {
        let a = (3.0 / dim as f64).sqrt();
        let mut p = Self::zeros(dim, lambda);
        p.p1.iter_mut().for_each(|v| *v = R::of(rng.random_range(-a..a)));
        p.p2.iter_mut().for_each(|v| *v = R::of(rng.random_range(-a..a)));
        p
    }

    fn project(&self, f: &[R], rows: usize, p: &[R]) -> Vec<R> {
        let d = self.dim;
        let mut out = vec![R::zero(); rows * d];
        for i in 0..rows {
            for k in 0..d {
                let fik = f[i * d + k];
                if fik == R::zero() {
                    continue;
                }
                for j in 0..d {
                    out[i * d + j] += fik * p[k * d + j];
                }
            }
        }
        out
    }

    /// Fused features for a `rows x dim` matrix (row-major).
    pub fn fuse(&self, f: &[R]) -> Result<Vec<R>, PredictorError> {
        self.fuse_taped(f).map(|(out, _)| out)
    }

    pub fn fuse_taped(&self, f: &[R]) -> Result<(Vec<R>, AttentionTape<R>), PredictorError> {
        let d = self.dim;
        if d == 0 || !f.len().is_multiple_of(d) || f.is_empty() {
            return Err(PredictorError::DimensionMismatch {
                expected: d,
                got: f.len(),
            });
        }
        let rows = f.len() / d;
        let q = self.project(f, rows, &self.p1);
        let k = self.project(f, rows, &self.p2);
        let inv_sqrt_d = R::one() / R::of(d as f64).sqrt();
        let mut attn = vec![R::zero(); rows * rows];
        for i in 0..rows {
            let row = &mut attn[i * rows..(i + 1) * rows];
            for (j, a) in row.iter_mut().enumerate() {
                let mut s = R::zero();
                for c in 0..d {
                    s += q[i * d + c] * k[j * d + c];
                }
                *a = s * inv_sqrt_d;
            }
            softmax_in_place(row);
        }
        let mut out = f.to_vec();
        for i in 0..rows {
            for j in 0..rows {
                let w = self.lambda * attn[i * rows + j];
                for c in 0..d {
                    out[i * d + c] += w * f[j * d + c];
                }
            }
        }
        Ok((out, AttentionTape { rows, q, k, attn }))
    }

    /// Gradients of the fused output. Accumulates parameter gradients into
    /// `grad` and returns `d loss / d F`.
    pub fn backward(
        &self,
        f: &[R],
        tape: &AttentionTape<R>,
        d_out: &[R],
        grad: &mut AttentionParams<R>,
    ) -> Vec<R> {
        let d = self.dim;
        let n = tape.rows;
        let a = &tape.attn;
        // residual + value path
        let mut d_f = d_out.to_vec();
        for i in 0..n {
            for j in 0..n {
                let w = self.lambda * a[i * n + j];
                for c in 0..d {
                    d_f[j * d + c] += w * d_out[i * d + c];
                }
            }
        }
        // d attn = lambda * dOut F^T
        let mut d_a = vec![R::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = R::zero();
                for c in 0..d {
                    s += d_out[i * d + c] * f[j * d + c];
                }
                d_a[i * n + j] = self.lambda * s;
            }
        }
        // softmax backward, then the 1/sqrt(d) scale
        let inv_sqrt_d = R::one() / R::of(d as f64).sqrt();
        let mut d_s = vec![R::zero(); n * n];
        for i in 0..n {
            let row_dot: R = (0..n).map(|j| a[i * n + j] * d_a[i * n + j]).sum();
            for j in 0..n {
                d_s[i * n + j] = a[i * n + j] * (d_a[i * n + j] - row_dot) * inv_sqrt_d;
            }
        }
        // S = Q K^T
        let mut d_q = vec![R::zero(); n * d];
        let mut d_k = vec![R::zero(); n * d];
        for i in 0..n {
            for j in 0..n {
                let s = d_s[i * n + j];
                if s == R::zero() {
                    continue;
                }
                for c in 0..d {
                    d_q[i * d + c] += s * tape.k[j * d + c];
                    d_k[j * d + c] += s * tape.q[i * d + c];
                }
            }
        }
        // Q = F P1, K = F P2
        for (dp, p, dx) in [(&mut grad.p1, &self.p1, &d_q), (&mut grad.p2, &self.p2, &d_k)] {
            for i in 0..n {
                for r in 0..d {
                    let fir = f[i * d + r];
                    let mut back = R::zero();
                    for c in 0..d {
                        let g = dx[i * d + c];
                        dp[r * d + c] += fir * g;
                        back += g * p[r * d + c];
                    }
                    d_f[i * d + r] += back;
                }
            }
        }
        d_f
    }
}

fn softmax_in_place<R: Real>(row: &mut [R]) {
    let m = row.iter().copied().fold(R::neg_infinity(), R::max);
    let mut sum = R::zero();
    for v in row.iter_mut() {
        *v = (*v - m).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}
