//! Model and hash-grid configuration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default attention residual weight.
pub const DEFAULT_LAMBDA: f64 = 0.5;
/// Hidden width shared by every two-layer head.
pub const DEFAULT_HIDDEN_WIDTH: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid config: odd feature dim {0}")]
    OddFeatureDim(usize),
    #[error("invalid config: feature dim must be positive")]
    ZeroFeatureDim,
    #[error("invalid config: children cap exceeded ({0} > 2)")]
    ChildrenCap(usize),
    #[error("invalid config: attention lambda must be >= 0 and finite")]
    NegativeLambda,
    #[error("invalid config: sh degree {0} outside 1..=3")]
    ShDegree(usize),
    #[error("invalid config: grid levels x features ({0}) != feature dim ({1})")]
    GridDimMismatch(usize, usize),
    #[error("invalid config: table size {0} is not a power of two")]
    TableSize(usize),
    #[error("invalid config: base resolution {0} < 2")]
    BaseResolution(usize),
    #[error("invalid config: growth factor {0} must be > 1")]
    GrowthFactor(f64),
    #[error("invalid config: hidden width must be positive")]
    HiddenWidth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashGridConfig {
    pub levels: usize,
    pub table_size: usize,
    pub features_per_level: usize,
    pub base_resolution: usize,
    pub growth_factor: f64,
}

impl HashGridConfig {
    /// Two features per level, 2^19 entries, resolutions 16 up to 2048.
    pub fn for_feature_dim(feature_dim: usize) -> Self {
        Self::with_finest(feature_dim / 2, 1 << 19, 2, 16, 2048)
    }

    /// Geometric level progression from `base_resolution` to `finest`.
    pub fn with_finest(
        levels: usize,
        table_size: usize,
        features_per_level: usize,
        base_resolution: usize,
        finest: usize,
    ) -> Self {
        let growth_factor = if levels > 1 {
            ((finest as f64).ln() - (base_resolution as f64).ln()) / (levels - 1) as f64
        } else {
            0.0
        }
        .exp()
        .max(1.0 + 1e-9);
        Self {
            levels,
            table_size,
            features_per_level,
            base_resolution,
            growth_factor,
        }
    }

    pub fn output_dim(&self) -> usize {
        self.levels * self.features_per_level
    }

    /// Lattice resolution of `level`: floor(N_min * b^level).
    pub fn resolution(&self, level: usize) -> usize {
        let r = self.base_resolution as f64 * self.growth_factor.powi(level as i32);
        (r * (1.0 + 1e-12)).floor() as usize
    }

    pub fn parameter_count(&self) -> usize {
        self.levels * self.table_size * self.features_per_level
    }

    pub fn validate(&self, feature_dim: usize) -> Result<(), ConfigError> {
        if self.output_dim() != feature_dim {
            return Err(ConfigError::GridDimMismatch(self.output_dim(), feature_dim));
        }
        if !self.table_size.is_power_of_two() {
            return Err(ConfigError::TableSize(self.table_size));
        }
        if self.base_resolution < 2 {
            return Err(ConfigError::BaseResolution(self.base_resolution));
        }
        if !(self.growth_factor > 1.0) || !self.growth_factor.is_finite() {
            return Err(ConfigError::GrowthFactor(self.growth_factor));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub feature_dim: usize,
    pub children_per_parent: usize,
    pub attention_lambda: f64,
    pub sh_degree: usize,
    pub hidden_width: usize,
    pub grid: HashGridConfig,
}

/// Named model sizes. `C1`..`C3` differ only in feature dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    C1,
    C2,
    C3,
    /// `C1` with a 2^14 table, for desk-scale runs.
    C1Mini,
}

impl Preset {
    pub fn feature_dim(self) -> usize {
        match self {
            Preset::C1 | Preset::C1Mini => 32,
            Preset::C2 => 48,
            Preset::C3 => 64,
        }
    }

    pub fn config(self) -> ModelConfig {
        let mut cfg = ModelConfig::new(self.feature_dim(), 2);
        if self == Preset::C1Mini {
            cfg.grid.table_size = 1 << 14;
        }
        cfg
    }
}

impl std::str::FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "c1" => Ok(Preset::C1),
            "c2" => Ok(Preset::C2),
            "c3" => Ok(Preset::C3),
            "c1-mini" | "c1mini" => Ok(Preset::C1Mini),
            other => Err(format!("unknown preset `{other}` (expected c1, c2, c3, c1-mini)")),
        }
    }
}

impl ModelConfig {
    pub fn new(feature_dim: usize, children_per_parent: usize) -> Self {
        Self {
            feature_dim,
            children_per_parent,
            attention_lambda: DEFAULT_LAMBDA,
            sh_degree: 3,
            hidden_width: DEFAULT_HIDDEN_WIDTH,
            grid: HashGridConfig::for_feature_dim(feature_dim),
        }
    }

    pub fn half_dim(&self) -> usize {
        self.feature_dim / 2
    }

    /// Length of the view-direction encoding fed to the colour head.
    pub fn sh_dim(&self) -> usize {
        (self.sh_degree + 1) * (self.sh_degree + 1)
    }

    pub fn nodes_per_tree(&self) -> usize {
        self.children_per_parent + 1
    }
}

/// Checks every `ModelConfig` invariant, reporting the first violation.
pub fn validate_config(config: &ModelConfig) -> Result<(), ConfigError> {
    if config.feature_dim == 0 {
        return Err(ConfigError::ZeroFeatureDim);
    }
    if !config.feature_dim.is_multiple_of(2) {
        return Err(ConfigError::OddFeatureDim(config.feature_dim));
    }
    if config.children_per_parent > 2 {
        return Err(ConfigError::ChildrenCap(config.children_per_parent));
    }
    if !(config.attention_lambda >= 0.0) || !config.attention_lambda.is_finite() {
        return Err(ConfigError::NegativeLambda);
    }
    if !(1..=3).contains(&config.sh_degree) {
        return Err(ConfigError::ShDegree(config.sh_degree));
    }
    if config.hidden_width == 0 {
        return Err(ConfigError::HiddenWidth);
    }
    config.grid.validate(config.feature_dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_presets_validate() {
        let cfg = ModelConfig::new(32, 2);
        assert_eq!(cfg.attention_lambda, 0.5);
        assert_eq!(cfg.sh_degree, 3);
        assert_eq!(validate_config(&cfg), Ok(()));
    }

    #[test]
    fn odd_feature_dim_rejected() {
        let mut cfg = ModelConfig::new(32, 2);
        cfg.feature_dim = 33;
        assert_eq!(validate_config(&cfg), Err(ConfigError::OddFeatureDim(33)));
    }

    #[test]
    fn three_children_rejected() {
        let cfg = ModelConfig::new(32, 3);
        assert_eq!(validate_config(&cfg), Err(ConfigError::ChildrenCap(3)));
    }

    #[test]
    fn other_violations_named() {
        let mut cfg = ModelConfig::new(32, 2);
        cfg.attention_lambda = -0.1;
        assert_eq!(validate_config(&cfg), Err(ConfigError::NegativeLambda));
        let mut cfg = ModelConfig::new(32, 2);
        cfg.sh_degree = 4;
        assert_eq!(validate_config(&cfg), Err(ConfigError::ShDegree(4)));
        let mut cfg = ModelConfig::new(32, 2);
        cfg.grid.table_size = 1000;
        assert_eq!(validate_config(&cfg), Err(ConfigError::TableSize(1000)));
        let mut cfg = ModelConfig::new(32, 2);
        cfg.grid.levels = 8;
        assert_eq!(validate_config(&cfg), Err(ConfigError::GridDimMismatch(16, 32)));
    }

    #[test]
    fn default_grid_spans_16_to_2048() {
        for d in [32, 48, 64] {
            let g = HashGridConfig::for_feature_dim(d);
            assert_eq!(g.output_dim(), d);
            assert_eq!(g.resolution(0), 16);
            assert_eq!(g.resolution(g.levels - 1), 2048);
            assert_eq!(g.table_size, 1 << 19);
        }
    }

    #[test]
    fn presets_set_feature_dim() {
        assert_eq!(Preset::C1.config().feature_dim, 32);
        assert_eq!(Preset::C2.config().feature_dim, 48);
        assert_eq!(Preset::C3.config().feature_dim, 64);
        let mini = Preset::C1Mini.config();
        assert_eq!(mini.grid.table_size, 1 << 14);
        assert_eq!(validate_config(&mini), Ok(()));
    }
}
