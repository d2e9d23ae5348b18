//! Multiresolution hashed feature grid with trilinear interpolation and
//! analytic gradients.

use rand::Rng;
use thiserror::Error;

use crate::config::HashGridConfig;
use crate::real::Real;

/// Spatial hash multipliers, one per axis.
pub const HASH_PRIMES: [u32; 3] = [1, 2_654_435_761, 805_459_861];

/// Queries may overshoot the unit cube by this much and get clamped.
pub const UNIT_CUBE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GridError {
    #[error("query point ({0}, {1}, {2}) lies outside the unit cube")]
    OutOfUnitCube(f64, f64, f64),
}

/// Index of a lattice corner inside a level's table.
///
/// Dense row-major indexing when the whole lattice fits, spatial hash otherwise.
pub fn hash_index(resolution: usize, corner: [u32; 3], table_size: usize) -> usize {
    let side = resolution + 1;
    if side * side * side <= table_size {
        corner[0] as usize + side * (corner[1] as usize + side * corner[2] as usize)
    } else {
        let h = corner[0].wrapping_mul(HASH_PRIMES[0])
            ^ corner[1].wrapping_mul(HASH_PRIMES[1])
            ^ corner[2].wrapping_mul(HASH_PRIMES[2]);
        h as usize & (table_size - 1)
    }
}

/// Trilinear stencil of one level: cell origin, fractional offset, resolution.
#[derive(Debug, Clone, Copy)]
struct Stencil<R> {
    cell: [u32; 3],
    frac: [R; 3],
    resolution: usize,
}

impl<R: Real> Stencil<R> {
    fn new(p: [R; 3], resolution: usize) -> Self {
        let n = R::of(resolution as f64);
        let mut cell = [0u32; 3];
        let mut frac = [R::zero(); 3];
        for a in 0..3 {
            let x = p[a] * n;
            let i = x.floor().max(R::zero()).min(n - R::one());
            cell[a] = i.as_f64() as u32;
            frac[a] = x - i;
        }
        Self {
            cell,
            frac,
            resolution,
        }
    }

    /// Corner `c` (bit a set = upper corner on axis a).
    fn corner(&self, c: usize) -> [u32; 3] {
        [
            self.cell[0] + (c & 1) as u32,
            self.cell[1] + ((c >> 1) & 1) as u32,
            self.cell[2] + ((c >> 2) & 1) as u32,
        ]
    }

    fn axis_weight(&self, c: usize, a: usize) -> R {
        if (c >> a) & 1 == 1 {
            self.frac[a]
        } else {
            R::one() - self.frac[a]
        }
    }

    fn weight(&self, c: usize) -> R {
        self.axis_weight(c, 0) * self.axis_weight(c, 1) * self.axis_weight(c, 2)
    }

    /// d weight / d frac[a].
    fn weight_grad(&self, c: usize, a: usize) -> R {
        let sign = if (c >> a) & 1 == 1 { R::one() } else { -R::one() };
        let mut g = sign;
        for b in 0..3 {
            if b != a {
                g *= self.axis_weight(c, b);
            }
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HashGrid<R> {
    pub config: HashGridConfig,
    /// `levels * table_size * features_per_level` values, level-major.
    pub tables: Vec<R>,
    resolutions: Vec<usize>,
}

impl<R: Real> HashGrid<R> {
    pub fn zeros(config: HashGridConfig) -> Self {
        let tables = vec![R::zero(); config.parameter_count()];
        Self::from_tables(config, tables)
    }

    /// Entries drawn uniformly from [-1e-4, 1e-4].
    pub fn random<G: Rng>(config: HashGridConfig, rng: &mut G) -> Self {
        let tables = (0..config.parameter_count())
            .map(|_| R::of(rng.random_range(-1e-4..=1e-4)))
            .collect();
        Self::from_tables(config, tables)
    }

    pub fn from_tables(config: HashGridConfig, tables: Vec<R>) -> Self {
        assert_eq!(tables.len(), config.parameter_count());
        let resolutions = (0..config.levels).map(|l| config.resolution(l)).collect();
        Self {
            config,
            tables,
            resolutions,
        }
    }

    pub fn output_dim(&self) -> usize {
        self.config.output_dim()
    }

    pub fn resolution(&self, level: usize) -> usize {
        self.resolutions[level]
    }

    /// Flat offset of the first feature of `entry` in `level`.
    pub fn entry_offset(&self, level: usize, entry: usize) -> usize {
        (level * self.config.table_size + entry) * self.config.features_per_level
    }

    fn check(&self, p: [R; 3]) -> Result<[R; 3], GridError> {
        let tol = R::of(UNIT_CUBE_TOLERANCE);
        let mut q = p;
        for v in q.iter_mut() {
            if !(*v >= -tol && *v <= R::one() + tol) {
                return Err(GridError::OutOfUnitCube(
                    p[0].as_f64(),
                    p[1].as_f64(),
                    p[2].as_f64(),
                ));
            }
            *v = v.max(R::zero()).min(R::one());
        }
        Ok(q)
    }

    /// Interpolated feature at `p` in the unit cube, all levels concatenated.
    pub fn query(&self, p: [R; 3]) -> Result<Vec<R>, GridError> {
        let mut out = vec![R::zero(); self.output_dim()];
        self.query_into(p, &mut out)?;
        Ok(out)
    }

    pub fn query_into(&self, p: [R; 3], out: &mut [R]) -> Result<(), GridError> {
        let p = self.check(p)?;
        let f = self.config.features_per_level;
        let t = self.config.table_size;
        for level in 0..self.config.levels {
            let st = Stencil::new(p, self.resolutions[level]);
            let dst = &mut out[level * f..(level + 1) * f];
            dst.iter_mut().for_each(|v| *v = R::zero());
            for c in 0..8 {
                let w = st.weight(c);
                let base = self.entry_offset(level, hash_index(st.resolution, st.corner(c), t));
                for (k, v) in dst.iter_mut().enumerate() {
                    *v += w * self.tables[base + k];
                }
            }
        }
        Ok(())
    }

    /// Gradients of `<upstream, query(p)>`.
    ///
    /// Table gradients are appended to `table_grads` as `(flat index, value)`
    /// pairs (indices may repeat); the positional gradient is returned.
    pub fn query_backward(
        &self,
        p: [R; 3],
        upstream: &[R],
        table_grads: &mut Vec<(usize, R)>,
    ) -> Result<[R; 3], GridError> {
        let p = self.check(p)?;
        let f = self.config.features_per_level;
        let t = self.config.table_size;
        let mut dp = [R::zero(); 3];
        for level in 0..self.config.levels {
            let up = &upstream[level * f..(level + 1) * f];
            if up.iter().all(|v| *v == R::zero()) {
                continue;
            }
            let st = Stencil::new(p, self.resolutions[level]);
            let n = R::of(st.resolution as f64);
            for c in 0..8 {
                let w = st.weight(c);
                let base = self.entry_offset(level, hash_index(st.resolution, st.corner(c), t));
                let mut feat_dot = R::zero();
                for (k, &u) in up.iter().enumerate() {
                    table_grads.push((base + k, w * u));
                    feat_dot += u * self.tables[base + k];
                }
                for (a, d) in dp.iter_mut().enumerate() {
                    *d += feat_dot * st.weight_grad(c, a) * n;
                }
            }
        }
        Ok(dp)
    }

    /// Trilinear weights of every level at `p`, for diagnostics and tests.
    pub fn level_weights(&self, p: [R; 3], level: usize) -> [R; 8] {
        let st = Stencil::new(p, self.resolutions[level]);
        std::array::from_fn(|c| st.weight(c))
    }
}

/// Sum repeated `(index, value)` pairs into a dense buffer.
pub fn accumulate_sparse<R: Real>(pairs: &[(usize, R)], dense: &mut [R]) {
    for &(i, v) in pairs {
        dense[i] += v;
    }
}
