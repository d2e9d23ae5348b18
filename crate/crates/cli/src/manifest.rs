//! Dataset manifest: a TOML file listing images with their cameras.
//!
//! ```toml
//! version = 1
//! resolution = [64, 64]
//! background = [0.0, 0.0, 0.0]
//! init_ply = "init.ply"            # optional
//!
//! [init_box]                      # optional; used when there is no PLY
//! count = 500
//! min = [-1.0, -1.0, -1.0]
//! max = [1.0, 1.0, 1.0]
//!
//! [[images]]
//! path = "images/train_0000.png"
//! split = "train"                  # or "test"
//! [images.camera]
//! world_to_view = [[...], [...], [...], [...]]
//! fx = 76.9
//! fy = 76.9
//! cx = 32.0
//! cy = 32.0
//! width = 64
//! height = 64
//! ```
//!
//! Paths are relative to the manifest's directory.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use lpgs_core::Camera;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub path: PathBuf,
    pub split: Split,
    pub camera: Camera,
}

/// Uniform random initialization inside a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitBox {
    pub count: usize,
    pub min: [f64; 3],
    pub max: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub resolution: [usize; 2],
    #[serde(default)]
    pub background: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_ply: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_box: Option<InitBox>,
    pub images: Vec<ImageEntry>,
}

/// Which manifest images a command works on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitFilter {
    All,
    Only(Split),
}

impl SplitFilter {
    pub fn accepts(self, split: Split) -> bool {
        match self {
            SplitFilter::All => true,
            SplitFilter::Only(s) => s == split,
        }
    }
}

impl FromStr for SplitFilter {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(SplitFilter::All),
            "train" => Ok(SplitFilter::Only(Split::Train)),
            "test" => Ok(SplitFilter::Only(Split::Test)),
            other => Err(format!("unknown split `{other}` (expected all, train, test)")),
        }
    }
}

impl DatasetManifest {
    /// Read `dir/manifest.toml` and check every invariant.
    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let manifest: Self = toml::from_str(&text).map_err(|e| CliError::Manifest(format!("{}: {e}", path.display())))?;
        manifest.validate(dir)?;
        Ok(manifest)
    }

    pub fn save(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join(MANIFEST_FILE);
        let text = toml::to_string(self).map_err(|e| CliError::Manifest(e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }

    pub fn validate(&self, dir: &Path) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Manifest(msg));
        if self.version != MANIFEST_VERSION {
            return bad(format!("manifest version {} (expected {MANIFEST_VERSION})", self.version));
        }
        if self.images.is_empty() {
            return bad("manifest lists no images".into());
        }
        for (i, e) in self.images.iter().enumerate() {
            e.camera
                .validate()
                .map_err(|err| CliError::Manifest(format!("image {i}: {err}")))?;
            if !dir.join(&e.path).is_file() {
                return bad(format!("image {i}: {} does not exist", e.path.display()));
            }
        }
        if let Some(p) = &self.init_ply {
            if !dir.join(p).is_file() {
                return bad(format!("init_ply {} does not exist", p.display()));
            }
        }
        if let Some(b) = &self.init_box {
            if b.count == 0 || (0..3).any(|a| !(b.min[a] < b.max[a])) {
                return bad("init_box needs count > 0 and min < max".into());
            }
        }
        Ok(())
    }

    /// Indices of the entries passing `filter`, in manifest order.
    pub fn select(&self, filter: SplitFilter) -> Vec<usize> {
        (0..self.images.len()).filter(|&i| filter.accepts(self.images[i].split)).collect()
    }
}
