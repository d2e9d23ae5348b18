//! Predictive Gaussian splatting: a small set of stored parent nodes, a
//! shared multi-resolution hash grid and four tiny MLP heads that predict
//! every child splat and attribute on the fly.

pub mod atm;
pub mod codec;
pub mod config;
pub mod hashgrid;
pub mod image;
pub mod linalg;
pub mod nn;
pub mod predictor;
pub mod raster;
pub mod real;
pub mod scene;
pub mod sh;
pub mod spatial;
pub mod synth;
pub mod trainer;

pub use config::{validate_config, ConfigError, HashGridConfig, ModelConfig, Preset};
pub use hashgrid::HashGrid;
pub use image::Image;
pub use predictor::{expand_tree, ExpandedTree, NetworkBundle, TreeCache};
pub use raster::{render, render_cached, Gaussian2D, RenderOutput};
pub use real::Real;
pub use scene::{Camera, GaussianAttributes, ParentNode, Provenance, SceneModel};
pub use spatial::{ContractionMode, ContractionParams};
