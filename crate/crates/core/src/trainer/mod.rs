//! Objective, image metrics, learning-rate schedules, optimizer and the
//! training loop.

mod loss;
mod metrics;
mod optim;
mod schedule;
mod train;

pub use loss::{loss, LossTerms};
pub use metrics::{
    gaussian_taps, mse, psnr, psnr_from_mse, ssim, ssim_with_grad, PSNR_CAP, SSIM_C1, SSIM_C2, SSIM_SIGMA,
    SSIM_WINDOW,
};
pub use optim::{
    coalesce, group_size, Moments, OptimizerState, StepGrads, ADAM_BETA1, ADAM_BETA2, ADAM_EPS, NETWORK_GROUPS,
};
pub use schedule::{lr_at, warmup_resolution, LrRange, LrTable, ParamGroup};
pub use train::{
    rates_at, run_training, train_step, LogRecord, StepOutcome, StepRecord, TrainConfig, TrainLog, TrainView,
    Trainer,
};

use thiserror::Error;

use crate::atm::AtmError;
use crate::raster::RasterError;

#[derive(Debug, Error)]
pub enum TrainerError {
    #[error("image sizes differ: {left:?} vs {right:?}")]
    DimensionMismatch { left: (usize, usize), right: (usize, usize) },
    #[error("unknown parameter group `{0}`")]
    UnknownGroup(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss or gradient at step {step} in group `{group}`")]
    NonFiniteLoss { step: usize, group: ParamGroup },
    #[error("dataset has no views")]
    EmptyDataset,
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Atm(#[from] AtmError),
}
