//! Scene-level domain types: parents, predicted attributes, cameras and the
//! scene model that bundles them with the shared networks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{validate_config, ConfigError, ModelConfig};
use crate::hashgrid::HashGrid;
use crate::linalg::{Quat, Vec3};
use crate::predictor::NetworkBundle;
use crate::real::Real;
use crate::spatial::{estimate_aabb, ContractionMode, ContractionParams, SpatialError};

/// Stored geometry of one tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParentNode<R> {
    pub position: Vec3<R>,
    pub log_scale: Vec3<R>,
}

impl<R: Real> ParentNode<R> {
    pub fn scale(&self) -> Vec3<R> {
        self.log_scale.map(|v| v.exp())
    }
}

/// Where a parent came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Provenance {
    Init,
    Densified,
    Promoted,
}

/// Fully predicted attributes of one splat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianAttributes<R> {
    pub position: Vec3<R>,
    pub scale: Vec3<R>,
    pub rotation: Quat<R>,
    pub opacity: R,
    pub color: Vec3<R>,
}

impl<R: Real> GaussianAttributes<R> {
    /// Checks the attribute ranges and the unit quaternion.
    pub fn is_valid(&self) -> bool {
        let qn = self.rotation.iter().map(|v| *v * *v).sum::<R>().sqrt();
        (qn - R::one()).abs().as_f64() <= 1e-6
            && self.scale.iter().all(|s| *s > R::zero())
            && self.opacity >= R::zero()
            && self.opacity <= R::one()
            && self.color.iter().all(|c| *c >= R::zero() && *c <= R::one())
            && self.position.iter().all(|p| p.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CameraError {
    #[error("camera rotation is not orthonormal (error {0:.2e})")]
    NotOrthonormal(f64),
    #[error("camera focal lengths must be positive")]
    NonPositiveFocal,
    #[error("camera resolution must be non-zero")]
    EmptyResolution,
}

/// Pinhole camera. View space looks down +z with +y pointing down the image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub world_to_view: [[f64; 4]; 4],
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Camera {
    /// Camera at `eye` looking at `target` with vertical field of view `fov_y`.
    pub fn look_at(eye: [f64; 3], target: [f64; 3], up: [f64; 3], fov_y: f64, width: usize, height: usize) -> Self {
        let norm = |v: [f64; 3]| {
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            [v[0] / n, v[1] / n, v[2] / n]
        };
        let cross = |a: [f64; 3], b: [f64; 3]| {
            [
                a[1] * b[2] - a[2] * b[1],
                a[2] * b[0] - a[0] * b[2],
                a[0] * b[1] - a[1] * b[0],
            ]
        };
        let fwd = norm([target[0] - eye[0], target[1] - eye[1], target[2] - eye[2]]);
        let mut right = cross(fwd, up);
        if right.iter().map(|v| v * v).sum::<f64>() < 1e-12 {
            right = cross(fwd, [1.0, 0.0, 0.0]);
        }
        let right = norm(right);
        let down = cross(fwd, right);
        let rows = [right, down, fwd];
        let mut m = [[0.0; 4]; 4];
        for i in 0..3 {
            m[i][..3].copy_from_slice(&rows[i]);
            m[i][3] = -(rows[i][0] * eye[0] + rows[i][1] * eye[1] + rows[i][2] * eye[2]);
        }
        m[3][3] = 1.0;
        let fy = 0.5 * height as f64 / (0.5 * fov_y).tan();
        Self {
            world_to_view: m,
            fx: fy,
            fy,
            cx: 0.5 * width as f64,
            cy: 0.5 * height as f64,
            width,
            height,
        }
    }

    pub fn rotation(&self) -> [[f64; 3]; 3] {
        let m = &self.world_to_view;
        [
            [m[0][0], m[0][1], m[0][2]],
            [m[1][0], m[1][1], m[1][2]],
            [m[2][0], m[2][1], m[2][2]],
        ]
    }

    pub fn translation(&self) -> [f64; 3] {
        let m = &self.world_to_view;
        [m[0][3], m[1][3], m[2][3]]
    }

    /// Camera centre in world space, `-R^T t`.
    pub fn center(&self) -> [f64; 3] {
        let r = self.rotation();
        let t = self.translation();
        [
            -(r[0][0] * t[0] + r[1][0] * t[1] + r[2][0] * t[2]),
            -(r[0][1] * t[0] + r[1][1] * t[1] + r[2][1] * t[2]),
            -(r[0][2] * t[0] + r[1][2] * t[1] + r[2][2] * t[2]),
        ]
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(CameraError::NonPositiveFocal);
        }
        if self.width == 0 || self.height == 0 {
            return Err(CameraError::EmptyResolution);
        }
        let r = self.rotation();
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let d: f64 = (0..3).map(|k| r[i][k] * r[j][k]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((d - target).abs());
            }
        }
        if worst > 1e-5 || !worst.is_finite() {
            return Err(CameraError::NotOrthonormal(worst));
        }
        Ok(())
    }

    /// Same pose with intrinsics rescaled to a new resolution.
    pub fn resized(&self, width: usize, height: usize) -> Self {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Self {
            world_to_view: self.world_to_view,
            fx: self.fx * sx,
            fy: self.fy * sy,
            cx: self.cx * sx,
            cy: self.cy * sy,
            width,
            height,
        }
    }
}

#[derive(Debug, Error)]
pub enum SceneError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Spatial(#[from] SpatialError),
    #[error("grid output dim {grid} does not match feature dim {config}")]
    GridMismatch { grid: usize, config: usize },
    #[error("parent {0} has a non-finite position or scale")]
    NonFiniteParent(usize),
    #[error("provenance list length {0} does not match parent count {1}")]
    ProvenanceLength(usize, usize),
    #[error("network shapes do not match the config")]
    NetworkShape,
}

/// The unit of save/load: parents plus everything shared across trees.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneModel<R> {
    pub parents: Vec<ParentNode<R>>,
    pub provenance: Vec<Provenance>,
    pub grid: HashGrid<R>,
    pub nets: NetworkBundle<R>,
    pub contraction: ContractionParams,
    pub config: ModelConfig,
    /// Bound on child displacement per axis, world units.
    pub offset_scale: f64,
    /// Bumped on every mutation; caches compare against it.
    pub revision: u64,
}

impl<R: Real> SceneModel<R> {
    /// Parents at `points` with isotropic scales from nearest-neighbour
    /// spacing; networks and grid randomly initialized from `seed`.
    pub fn initialize(
        config: ModelConfig,
        points: &[[f64; 3]],
        mode: ContractionMode,
        seed: u64,
    ) -> Result<Self, SceneError> {
        validate_config(&config)?;
        let contraction = estimate_aabb(points, mode)?;
        let nn = nearest_neighbor_stats(points);
        let extent = contraction.scene_extent();
        let parents = points
            .iter()
            .zip(&nn)
            .map(|(p, s)| {
                let s = s.mean3.clamp(1e-4 * extent, 0.1 * extent);
                ParentNode {
                    position: p.map(R::of),
                    log_scale: [R::of(s.ln()); 3],
                }
            })
            .collect::<Vec<_>>();
        let mut nearest: Vec<f64> = nn.iter().map(|s| s.nearest).filter(|d| *d > 0.0).collect();
        nearest.sort_by(f64::total_cmp);
        let median = nearest.get(nearest.len() / 2).copied().unwrap_or(0.01 * extent);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = HashGrid::random(config.grid.clone(), &mut rng);
        let nets = NetworkBundle::random(&config, &mut rng);
        let n = parents.len();
        Ok(Self {
            parents,
            provenance: vec![Provenance::Init; n],
            grid,
            nets,
            contraction,
            config,
            offset_scale: 2.0 * median,
            revision: 0,
        })
    }

    pub fn splat_count(&self) -> usize {
        self.parents.len() * self.config.nodes_per_tree()
    }

    pub fn bump_revision(&mut self) {
        self.revision = self.revision.wrapping_add(1);
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        validate_config(&self.config)?;
        if self.grid.output_dim() != self.config.feature_dim {
            return Err(SceneError::GridMismatch {
                grid: self.grid.output_dim(),
                config: self.config.feature_dim,
            });
        }
        if self.provenance.len() != self.parents.len() {
            return Err(SceneError::ProvenanceLength(self.provenance.len(), self.parents.len()));
        }
        if !self.nets.matches(&self.config) {
            return Err(SceneError::NetworkShape);
        }
        for (i, p) in self.parents.iter().enumerate() {
            if !p.position.iter().chain(&p.log_scale).all(|v| v.is_finite()) {
                return Err(SceneError::NonFiniteParent(i));
            }
        }
        Ok(())
    }

    /// Fraction of parents per provenance, in `[init, densified, promoted]` order.
    pub fn provenance_fractions(&self) -> [f64; 3] {
        let n = self.provenance.len().max(1) as f64;
        let count = |k: Provenance| self.provenance.iter().filter(|p| **p == k).count() as f64 / n;
        if self.provenance.is_empty() {
            return [0.0; 3];
        }
        [
            count(Provenance::Init),
            count(Provenance::Densified),
            count(Provenance::Promoted),
        ]
    }
}

#[derive(Debug, Clone, Copy)]
struct NeighborStats {
    nearest: f64,
    /// Root mean squared distance to the three nearest neighbours.
    mean3: f64,
}

fn nearest_neighbor_stats(points: &[[f64; 3]]) -> Vec<NeighborStats> {
    points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut best = [f64::INFINITY; 3];
            for (j, q) in points.iter().enumerate() {
                if i == j {
                    continue;
                }
                let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
                if d2 < best[2] {
                    best[2] = d2;
                    best.sort_by(f64::total_cmp);
                }
            }
            let finite: Vec<f64> = best.iter().copied().filter(|d| d.is_finite()).collect();
            if finite.is_empty() {
                return NeighborStats {
                    nearest: 0.0,
                    mean3: 0.01,
                };
            }
            NeighborStats {
                nearest: finite[0].sqrt(),
                mean3: (finite.iter().sum::<f64>() / finite.len() as f64).sqrt().max(1e-7),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn look_at_produces_valid_camera() {
        let cam = Camera::look_at([0.0, -3.0, 1.0], [0.0; 3], [0.0, 0.0, 1.0], 0.8, 64, 48);
        cam.validate().unwrap();
        let c = cam.center();
        assert!((c[0]).abs() < 1e-12 && (c[1] + 3.0).abs() < 1e-12 && (c[2] - 1.0).abs() < 1e-12);
        // target lies straight ahead
        let r = cam.rotation();
        let t = cam.translation();
        let z = r[2][0] * 0.0 + t[2];
        assert!((z - 10f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn bad_cameras_named() {
        let mut cam = Camera::look_at([0.0, -3.0, 0.0], [0.0; 3], [0.0, 0.0, 1.0], 0.8, 8, 8);
        cam.fx = 0.0;
        assert_eq!(cam.validate(), Err(CameraError::NonPositiveFocal));
        let mut cam = Camera::look_at([0.0, -3.0, 0.0], [0.0; 3], [0.0, 0.0, 1.0], 0.8, 8, 8);
        cam.world_to_view[0][0] = 2.0;
        assert!(matches!(cam.validate(), Err(CameraError::NotOrthonormal(_))));
    }

    #[test]
    fn initialization_sets_counts() {
        let pts: Vec<[f64; 3]> = (0..20)
            .map(|i| {
                let t = i as f64 * 0.7;
                [t.sin(), t.cos(), (0.3 * t).sin()]
            })
            .collect();
        let mut cfg = ModelConfig::new(8, 2);
        cfg.grid = crate::config::HashGridConfig::with_finest(4, 1 << 10, 2, 4, 32);
        let m = SceneModel::<f32>::initialize(cfg, &pts, ContractionMode::Verbatim, 1).unwrap();
        assert_eq!(m.parents.len(), 20);
        assert_eq!(m.splat_count(), 60);
        assert!(m.offset_scale > 0.0);
        m.validate().unwrap();
        assert_eq!(m.provenance_fractions(), [1.0, 0.0, 0.0]);
    }
}
