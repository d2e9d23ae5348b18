//! Training step and loop.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::loss;
use super::metrics::psnr;
use super::optim::{coalesce, OptimizerState, StepGrads};
use super::schedule::{lr_at, warmup_resolution, LrTable, ParamGroup};
use super::TrainerError;
use crate::atm::{densify_event, AtmConfig, AtmEvent, AtmStats};
use crate::image::Image;
use crate::raster::{render_backward, render_taped};
use crate::real::Real;
use crate::scene::{Camera, SceneModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Weight of the D-SSIM term.
    pub beta: f64,
    pub total_steps: usize,
    pub warmup_steps: usize,
    pub warmup_downscale: usize,
    pub lr_table: LrTable,
    pub densify_interval: usize,
    pub densify_start: usize,
    pub densify_end: usize,
    pub atm: AtmConfig,
    pub atm_enabled: bool,
    pub seed: u64,
    pub background: [f64; 3],
    /// Training-view PSNR is logged every this many steps; 0 disables it.
    pub psnr_interval: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            beta: 0.2,
            total_steps: 30_000,
            warmup_steps: 7_500,
            warmup_downscale: 4,
            lr_table: LrTable::default(),
            densify_interval: 100,
            densify_start: 500,
            densify_end: 15_000,
            atm: AtmConfig::default(),
            atm_enabled: true,
            seed: 0,
            background: [0.0; 3],
            psnr_interval: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainerError> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(TrainerError::InvalidConfig(format!("beta {} outside [0,1]", self.beta)));
        }
        if self.total_steps > 0 && self.warmup_steps >= self.total_steps {
            return Err(TrainerError::InvalidConfig(format!(
                "warmup_steps {} must be below total_steps {}",
                self.warmup_steps, self.total_steps
            )));
        }
        if self.warmup_downscale == 0 {
            return Err(TrainerError::InvalidConfig("warmup_downscale must be at least 1".into()));
        }
        if self.atm_enabled && self.densify_interval == 0 {
            return Err(TrainerError::InvalidConfig("densify_interval must be positive".into()));
        }
        for g in ParamGroup::ALL {
            self.lr_table.get(g)?;
        }
        self.atm.validate()?;
        Ok(())
    }

    /// Whether a densify event follows the step that brings the completed
    /// step count to `done`.
    pub fn densify_after(&self, done: usize) -> bool {
        self.atm_enabled
            && self.densify_interval > 0
            && done >= self.densify_start
            && done <= self.densify_end
            && done.is_multiple_of(self.densify_interval)
    }
}

/// One training image with its camera.
#[derive(Debug, Clone)]
pub struct TrainView<R> {
    pub camera: Camera,
    pub image: Image<R>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub loss: f64,
    pub l1: f64,
    pub dssim: f64,
    pub lr: BTreeMap<String, f64>,
    pub parents: usize,
    pub splats: usize,
    pub width: usize,
    pub height: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psnr: Option<f64>,
}

/// Line-delimited log entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogRecord {
    Step(StepRecord),
    Atm(AtmEvent),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub steps: Vec<StepRecord>,
    pub events: Vec<AtmEvent>,
}

/// Result of one [`train_step`].
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub record: StepRecord,
}

/// Learning rate of every group at `step`.
pub fn rates_at(config: &TrainConfig, step: usize) -> Result<BTreeMap<ParamGroup, f64>, TrainerError> {
    ParamGroup::ALL
        .into_iter()
        .map(|g| Ok((g, lr_at(step, g, &config.lr_table, config.total_steps)?)))
        .collect()
}

fn non_finite_param<R: Real>(model: &SceneModel<R>) -> Option<ParamGroup> {
    if !model.grid.tables.iter().all(|v| v.is_finite()) {
        return Some(ParamGroup::Grid);
    }
    if !model.parents.iter().all(|p| p.position.iter().all(|v| v.is_finite())) {
        return Some(ParamGroup::Position);
    }
    if !model.parents.iter().all(|p| p.log_scale.iter().all(|v| v.is_finite())) {
        return Some(ParamGroup::ParentScale);
    }
    let nets = &model.nets;
    let finite = |s: &[R]| s.iter().all(|v| v.is_finite());
    for (g, ok) in [
        (ParamGroup::Offset, nets.g_pos.params().iter().all(|s| finite(s))),
        (ParamGroup::ScaleRotation, nets.g_rs.params().iter().all(|s| finite(s))),
        (ParamGroup::Color, nets.g_c.params().iter().all(|s| finite(s))),
        (ParamGroup::Opacity, nets.g_o.params().iter().all(|s| finite(s))),
        (ParamGroup::Attention, finite(&nets.attn.p1) && finite(&nets.attn.p2)),
    ] {
        if !ok {
            return Some(g);
        }
    }
    None
}

/// Render, evaluate the loss, backpropagate and apply one optimizer update.
/// `camera` and `gt` must already be at this step's resolution. ATM
/// statistics are accumulated into `stats`.
#[allow(clippy::too_many_arguments)]
pub fn train_step<R: Real>(
    model: &mut SceneModel<R>,
    optimizer: &mut OptimizerState<R>,
    stats: &mut AtmStats,
    camera: &Camera,
    gt: &Image<R>,
    step: usize,
    config: &TrainConfig,
) -> Result<StepOutcome, TrainerError> {
    let bg = config.background.map(R::of);
    let (out, tape) = render_taped(model, camera, bg)?;
    let (terms, d_image) = loss(&out.image, gt, config.beta)?;
    let grads = render_backward(model, &tape, &d_image)?;
    let step_grads = StepGrads {
        grid: coalesce(&grads.model.grid, model.grid.tables.len()),
        nets: grads.model.nets,
        position: grads.parents.iter().map(|g| g.position).collect(),
        log_scale: grads.parents.iter().map(|g| g.log_scale).collect(),
    };
    let bad = if terms.total.is_finite() {
        step_grads.non_finite_group()
    } else {
        Some(step_grads.non_finite_group().or_else(|| non_finite_param(model)).unwrap_or(ParamGroup::Color))
    };
    if let Some(group) = bad {
        return Err(TrainerError::NonFiniteLoss { step, group });
    }

    if config.atm_enabled {
        let n = model.config.nodes_per_tree();
        let opacity: Vec<R> = tape
            .trees
            .iter()
            .flat_map(|(t, _)| t.nodes.iter().map(|a| a.opacity))
            .collect();
        debug_assert_eq!(opacity.len(), model.parents.len() * n);
        stats.accumulate(
            &grads.screen,
            &out.visible,
            &opacity,
            &grads.parents,
            camera.width,
            camera.height,
            config.atm.promote_children,
        );
    }

    let rates = rates_at(config, step)?;
    optimizer.apply(model, &step_grads, &rates);
    model.bump_revision();

    let psnr_value = if config.psnr_interval > 0 && step.is_multiple_of(config.psnr_interval) {
        Some(psnr(&out.image, gt)?)
    } else {
        None
    };
    Ok(StepOutcome {
        record: StepRecord {
            step,
            loss: terms.total,
            l1: terms.l1,
            dssim: terms.dssim,
            lr: rates.iter().map(|(g, r)| (g.name().to_string(), *r)).collect(),
            parents: model.parents.len(),
            splats: model.splat_count(),
            width: camera.width,
            height: camera.height,
            psnr: psnr_value,
        },
    })
}

/// Training state that can be advanced one step at a time.
pub struct Trainer<R> {
    pub model: SceneModel<R>,
    pub optimizer: OptimizerState<R>,
    pub stats: AtmStats,
    pub config: TrainConfig,
    pub step: usize,
    views: Vec<TrainView<R>>,
    warm: Vec<Image<R>>,
    order: Vec<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl<R: Real> Trainer<R> {
    pub fn new(model: SceneModel<R>, views: Vec<TrainView<R>>, config: TrainConfig) -> Result<Self, TrainerError> {
        config.validate()?;
        if views.is_empty() {
            return Err(TrainerError::EmptyDataset);
        }
        for v in &views {
            v.camera.validate().map_err(crate::raster::RasterError::from)?;
            if v.image.width != v.camera.width || v.image.height != v.camera.height {
                return Err(TrainerError::DimensionMismatch {
                    left: (v.camera.width, v.camera.height),
                    right: (v.image.width, v.image.height),
                });
            }
        }
        let warm = views.iter().map(|v| v.image.downsample(config.warmup_downscale)).collect();
        Ok(Self {
            optimizer: OptimizerState::new(&model),
            stats: AtmStats::for_model(&model),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            model,
            config,
            step: 0,
            views,
            warm,
            order: Vec::new(),
            cursor: 0,
        })
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.config.total_steps
    }

    fn next_view(&mut self) -> usize {
        if self.cursor >= self.order.len() {
            self.order = (0..self.views.len()).collect();
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        self.cursor += 1;
        self.order[self.cursor - 1]
    }

    /// Run one step (plus a densify event when scheduled). Returns the step
    /// record and the event, if any.
    pub fn advance(&mut self) -> Result<(StepRecord, Option<AtmEvent>), TrainerError> {
        let step = self.step;
        let v = self.next_view();
        let full = (self.views[v].camera.width, self.views[v].camera.height);
        let (w, h) = warmup_resolution(step, self.config.warmup_steps, self.config.warmup_downscale, full);
        let (camera, gt) = if (w, h) == full {
            (self.views[v].camera.clone(), &self.views[v].image)
        } else {
            (self.views[v].camera.resized(w, h), &self.warm[v])
        };
        let outcome = train_step(
            &mut self.model,
            &mut self.optimizer,
            &mut self.stats,
            &camera,
            gt,
            step,
            &self.config,
        )?;
        self.step += 1;
        let mut event = None;
        if self.config.densify_after(self.step) {
            let lr = lr_at(step, ParamGroup::Position, &self.config.lr_table, self.config.total_steps)?;
            let (ev, sources) = densify_event(
                &mut self.model,
                &mut self.stats,
                &self.config.atm,
                self.step,
                lr,
                &mut self.rng,
            )?;
            self.optimizer.remap_parents(&sources);
            event = Some(ev);
        }
        Ok((outcome.record, event))
    }
}

/// Train `model` on `views` for `config.total_steps` steps. `on_record` sees
/// every log entry as it is produced.
pub fn run_training<R: Real>(
    views: Vec<TrainView<R>>,
    model: SceneModel<R>,
    config: TrainConfig,
    mut on_record: impl FnMut(&LogRecord),
) -> Result<(SceneModel<R>, TrainLog), TrainerError> {
    let mut trainer = Trainer::new(model, views, config)?;
    let mut log = TrainLog::default();
    while !trainer.is_done() {
        let (rec, ev) = trainer.advance()?;
        let rec = LogRecord::Step(rec);
        on_record(&rec);
        if let LogRecord::Step(r) = rec {
            log.steps.push(r);
        }
        if let Some(ev) = ev {
            let rec = LogRecord::Atm(ev);
            on_record(&rec);
            if let LogRecord::Atm(e) = rec {
                log.events.push(e);
            }
        }
    }
    Ok((trainer.model, log))
}
