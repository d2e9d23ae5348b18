//! Differentiable CPU splatting: EWA projection, tile-binned alpha
//! blending, and the matching backward passes.

mod covariance;
mod project;
mod render;
mod tile;

pub use covariance::{build_covariance, build_covariance_backward};
pub use project::{camera_pose, project, project_backward, project_taped, ProjectTape, COV2D_REGULARIZER};
pub use render::{
    render, render_backward, render_cached, render_splats, render_taped, RenderGrads, RenderTape,
};
pub use tile::{
    depth_order, rasterize, rasterize_backward, RasterTape, MIN_COV_DET, MIN_TRANSMITTANCE, SUPPORT_SIGMAS,
    TILE_SIZE,
};

use thiserror::Error;

use crate::image::Image;
use crate::predictor::PredictorError;
use crate::real::Real;
use crate::scene::CameraError;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error("image size {0}x{1} is empty")]
    EmptyImage(usize, usize),
    #[error("gradient image is {got:?}, render was {expected:?}")]
    GradientShape { expected: (usize, usize), got: (usize, usize) },
}

/// A splat in pixel space. `cov` holds `(xx, xy, yy)` of the symmetric
/// covariance, regularizer included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian2D<R> {
    pub mean: [R; 2],
    pub cov: [R; 3],
    pub depth: R,
    pub color: [R; 3],
    pub opacity: R,
}

/// Gradient with respect to the fields of [`Gaussian2D`]. `cov[1]` is the
/// derivative with respect to the single off-diagonal parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian2DGrad<R> {
    pub mean: [R; 2],
    pub cov: [R; 3],
    pub color: [R; 3],
    pub opacity: R,
}

impl<R: Real> Default for Gaussian2DGrad<R> {
    fn default() -> Self {
        Self {
            mean: [R::zero(); 2],
            cov: [R::zero(); 3],
            color: [R::zero(); 3],
            opacity: R::zero(),
        }
    }
}

impl<R: Real> Gaussian2DGrad<R> {
    pub fn accumulate(&mut self, other: &Self) {
        for i in 0..2 {
            self.mean[i] += other.mean[i];
        }
        for i in 0..3 {
            self.cov[i] += other.cov[i];
            self.color[i] += other.color[i];
        }
        self.opacity += other.opacity;
    }
}

#[derive(Debug, Clone)]
pub struct RenderOutput<R> {
    pub image: Image<R>,
    /// Accumulated opacity per pixel, `1 - T_final`.
    pub alpha: Vec<R>,
    /// Per input splat: binned into at least one tile.
    pub visible: Vec<bool>,
    /// Per input splat: summed blending weight over all pixels.
    pub contribution: Vec<R>,
    /// Splats skipped for a singular screen covariance.
    pub singular: usize,
}
