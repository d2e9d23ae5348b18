//! Tile-binned front-to-back alpha blending and its backward pass.

use rayon::prelude::*;

use super::{Gaussian2D, Gaussian2DGrad, RenderOutput};
use crate::image::Image;
use crate::real::Real;

pub const TILE_SIZE: usize = 16;
/// Blending stops once transmittance drops below this.
pub const MIN_TRANSMITTANCE: f64 = 1e-4;
/// Splats are skipped when the regularized screen covariance is this flat.
pub const MIN_COV_DET: f64 = 1e-12;
/// Support radius of every splat in standard deviations (Mahalanobis).
pub const SUPPORT_SIGMAS: f64 = 3.0;

/// Per-pixel bookkeeping kept from the forward pass.
#[derive(Debug, Clone)]
pub struct RasterTape<R> {
    pub width: usize,
    pub height: usize,
    pub background: [R; 3],
    /// Inverse covariances `(a, b, c)` of `[[a, b], [b, c]]`.
    pub conics: Vec<[R; 3]>,
    /// Splat indices per tile, front to back.
    pub tiles: Vec<Vec<u32>>,
    pub final_transmittance: Vec<R>,
    /// Position in the tile list after the last blended splat, per pixel.
    pub last_index: Vec<u32>,
}

impl<R: Real> RasterTape<R> {
    pub fn tiles_x(&self) -> usize {
        self.width.div_ceil(TILE_SIZE)
    }
}

/// `exp(-0.5 d^T conic d)` inside the support ellipse, `None` outside.
#[inline]
fn falloff<R: Real>(conic: &[R; 3], dx: R, dy: R) -> Option<R> {
    let m2 = conic[0] * dx * dx + R::of(2.0) * conic[1] * dx * dy + conic[2] * dy * dy;
    if m2 > R::of(SUPPORT_SIGMAS * SUPPORT_SIGMAS) {
        None
    } else {
        Some((R::of(-0.5) * m2).exp())
    }
}

/// Depth order: ascending depth, stable on insertion index.
pub fn depth_order<R: Real>(splats: &[Gaussian2D<R>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..splats.len()).collect();
    order.sort_by(|&a, &b| splats[a].depth.partial_cmp(&splats[b].depth).unwrap_or(std::cmp::Ordering::Equal));
    order
}

struct TileResult<R> {
    pixels: Vec<([R; 3], R, R, u32)>,
    contribution: Vec<(u32, R)>,
}

pub fn rasterize<R: Real>(
    splats: &[Gaussian2D<R>],
    background: [R; 3],
    width: usize,
    height: usize,
) -> (RenderOutput<R>, RasterTape<R>) {
    let tiles_x = width.div_ceil(TILE_SIZE);
    let tiles_y = height.div_ceil(TILE_SIZE);
    let mut conics = vec![[R::zero(); 3]; splats.len()];
    let mut visible = vec![false; splats.len()];
    let mut tiles: Vec<Vec<u32>> = vec![Vec::new(); tiles_x * tiles_y];
    let mut singular = 0usize;

    for &i in &depth_order(splats) {
        let s = &splats[i];
        let [a, b, c] = s.cov;
        let det = a * c - b * b;
        if !(det.as_f64() >= MIN_COV_DET) || !(a > R::zero()) {
            singular += 1;
            continue;
        }
        conics[i] = [c / det, -b / det, a / det];
        let k = R::of(SUPPORT_SIGMAS);
        let rx = k * a.sqrt();
        let ry = k * c.sqrt();
        let (x0, x1) = (s.mean[0] - rx, s.mean[0] + rx);
        let (y0, y1) = (s.mean[1] - ry, s.mean[1] + ry);
        if x1 < R::zero() || y1 < R::zero() || x0 > R::of(width as f64) || y0 > R::of(height as f64) {
            continue;
        }
        if ![x0, x1, y0, y1].iter().all(|v| v.is_finite()) {
            continue;
        }
        let tile = R::of(TILE_SIZE as f64);
        let tx0 = (x0 / tile).floor().max(R::zero()).as_f64() as usize;
        let ty0 = (y0 / tile).floor().max(R::zero()).as_f64() as usize;
        let tx1 = ((x1 / tile).floor().as_f64() as usize).min(tiles_x - 1);
        let ty1 = ((y1 / tile).floor().as_f64() as usize).min(tiles_y - 1);
        visible[i] = true;
        for ty in ty0..=ty1 {
            for tx in tx0..=tx1 {
                tiles[ty * tiles_x + tx].push(i as u32);
            }
        }
    }

    let min_t = R::of(MIN_TRANSMITTANCE);
    let half = R::of(0.5);
    let results: Vec<TileResult<R>> = (0..tiles.len())
        .into_par_iter()
        .map(|t| {
            let list = &tiles[t];
            let (tx, ty) = (t % tiles_x, t / tiles_x);
            let mut contrib = vec![R::zero(); list.len()];
            let mut pixels = Vec::with_capacity(TILE_SIZE * TILE_SIZE);
            for py in ty * TILE_SIZE..((ty + 1) * TILE_SIZE).min(height) {
                for px in tx * TILE_SIZE..((tx + 1) * TILE_SIZE).min(width) {
                    let (fx, fy) = (R::of(px as f64) + half, R::of(py as f64) + half);
                    let mut trans = R::one();
                    let mut rgb = [R::zero(); 3];
                    let mut last = 0u32;
                    for (j, &si) in list.iter().enumerate() {
                        let s = &splats[si as usize];
                        let Some(g) = falloff(&conics[si as usize], fx - s.mean[0], fy - s.mean[1]) else {
                            continue;
                        };
                        let a = s.opacity * g;
                        let w = a * trans;
                        for c in 0..3 {
                            rgb[c] += s.color[c] * w;
                        }
                        contrib[j] += w;
                        trans *= R::one() - a;
                        last = j as u32 + 1;
                        if trans < min_t {
                            break;
                        }
                    }
                    for c in 0..3 {
                        rgb[c] += trans * background[c];
                    }
                    pixels.push((rgb, R::one() - trans, trans, last));
                }
            }
            TileResult {
                pixels,
                contribution: list.iter().zip(contrib).map(|(&i, w)| (i, w)).collect(),
            }
        })
        .collect();

    let mut image = Image::new(width, height);
    let mut alpha = vec![R::zero(); width * height];
    let mut final_transmittance = vec![R::one(); width * height];
    let mut last_index = vec![0u32; width * height];
    let mut contribution = vec![R::zero(); splats.len()];
    for (t, res) in results.into_iter().enumerate() {
        let (tx, ty) = (t % tiles_x, t / tiles_x);
        let mut k = 0;
        for py in ty * TILE_SIZE..((ty + 1) * TILE_SIZE).min(height) {
            for px in tx * TILE_SIZE..((tx + 1) * TILE_SIZE).min(width) {
                let (rgb, a, tr, last) = res.pixels[k];
                k += 1;
                image.set_pixel(px, py, rgb);
                let p = py * width + px;
                alpha[p] = a;
                final_transmittance[p] = tr;
                last_index[p] = last;
            }
        }
        for (i, w) in res.contribution {
            contribution[i as usize] += w;
        }
    }

    (
        RenderOutput {
            image,
            alpha,
            visible,
            contribution,
            singular,
        },
        RasterTape {
            width,
            height,
            background,
            conics,
            tiles,
            final_transmittance,
            last_index,
        },
    )
}

/// Per-splat gradients of `sum(d_image * image)`.
pub fn rasterize_backward<R: Real>(
    splats: &[Gaussian2D<R>],
    tape: &RasterTape<R>,
    d_image: &Image<R>,
) -> Vec<Gaussian2DGrad<R>> {
    let (width, height) = (tape.width, tape.height);
    let tiles_x = tape.tiles_x();
    let half = R::of(0.5);
    let two = R::of(2.0);

    let partials: Vec<Vec<Gaussian2DGrad<R>>> = (0..tape.tiles.len())
        .into_par_iter()
        .map(|t| {
            let list = &tape.tiles[t];
            let mut grads = vec![Gaussian2DGrad::default(); list.len()];
            if list.is_empty() {
                return grads;
            }
            let (tx, ty) = (t % tiles_x, t / tiles_x);
            // (local index, a, g, transmittance before, dx, dy)
            let mut hits: Vec<(usize, R, R, R, R, R)> = Vec::new();
            for py in ty * TILE_SIZE..((ty + 1) * TILE_SIZE).min(height) {
                for px in tx * TILE_SIZE..((tx + 1) * TILE_SIZE).min(width) {
                    let p = py * width + px;
                    let d_pix = d_image.pixel(px, py);
                    if d_pix.iter().all(|v| *v == R::zero()) {
                        continue;
                    }
                    let (fx, fy) = (R::of(px as f64) + half, R::of(py as f64) + half);
                    hits.clear();
                    let mut trans = R::one();
                    for (j, &si) in list.iter().enumerate().take(tape.last_index[p] as usize) {
                        let s = &splats[si as usize];
                        let (dx, dy) = (fx - s.mean[0], fy - s.mean[1]);
                        let Some(g) = falloff(&tape.conics[si as usize], dx, dy) else {
                            continue;
                        };
                        let a = s.opacity * g;
                        hits.push((j, a, g, trans, dx, dy));
                        trans *= R::one() - a;
                    }
                    // back to front: B_i = c_i a_i + (1 - a_i) B_{i+1}, B_{n+1} = background
                    let mut behind = tape.background;
                    for &(j, a, g, t_before, dx, dy) in hits.iter().rev() {
                        let s = &splats[list[j] as usize];
                        let conic = &tape.conics[list[j] as usize];
                        let gr = &mut grads[j];
                        let mut d_a = R::zero();
                        for c in 0..3 {
                            gr.color[c] += d_pix[c] * a * t_before;
                            d_a += d_pix[c] * t_before * (s.color[c] - behind[c]);
                            behind[c] = s.color[c] * a + (R::one() - a) * behind[c];
                        }
                        gr.opacity += d_a * g;
                        // g = exp(power), power = -0.5 (A dx^2 + 2 B dx dy + C dy^2)
                        let d_power = d_a * s.opacity * g;
                        gr.mean[0] += d_power * (conic[0] * dx + conic[1] * dy);
                        gr.mean[1] += d_power * (conic[1] * dx + conic[2] * dy);
                        let d_conic = [
                            -half * dx * dx * d_power,
                            -dx * dy * d_power,
                            -half * dy * dy * d_power,
                        ];
                        // conic = cov^-1: dCov = -K dK K with symmetric full matrices
                        let gm = [[d_conic[0], half * d_conic[1]], [half * d_conic[1], d_conic[2]]];
                        let k = [[conic[0], conic[1]], [conic[1], conic[2]]];
                        let mut kg = [[R::zero(); 2]; 2];
                        for r in 0..2 {
                            for c in 0..2 {
                                kg[r][c] = k[r][0] * gm[0][c] + k[r][1] * gm[1][c];
                            }
                        }
                        let mut dcov = [[R::zero(); 2]; 2];
                        for r in 0..2 {
                            for c in 0..2 {
                                dcov[r][c] = -(kg[r][0] * k[0][c] + kg[r][1] * k[1][c]);
                            }
                        }
                        gr.cov[0] += dcov[0][0];
                        gr.cov[1] += two * dcov[0][1];
                        gr.cov[2] += dcov[1][1];
                    }
                }
            }
            grads
        })
        .collect();

    let mut out = vec![Gaussian2DGrad::default(); splats.len()];
    for (t, grads) in partials.into_iter().enumerate() {
        for (j, g) in grads.into_iter().enumerate() {
            out[tape.tiles[t][j] as usize].accumulate(&g);
        }
    }
    out
}
