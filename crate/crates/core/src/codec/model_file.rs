use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CodecError;
use crate::config::{validate_config, HashGridConfig, ModelConfig};
use crate::hashgrid::HashGrid;
use crate::nn::Mlp;
use crate::predictor::{AttentionParams, NetworkBundle};
use crate::real::Real;
use crate::scene::{ParentNode, Provenance, SceneModel};
use crate::spatial::{ContractionMode, ContractionParams};

pub const MAGIC: [u8; 4] = *b"LPGS";
pub const FORMAT_VERSION: u32 = 1;
pub const SECTION_NAMES: [&str; 8] = ["positions", "log_scales", "grid", "g_pos", "g_rs", "g_c", "g_o", "attention"];
const CHECKSUM_OFFSET: usize = 208;
pub const HEADER_BYTES: usize = CHECKSUM_OFFSET + 4;
/// Floats per splat when every attribute is stored explicitly: position 3,
/// scale 3, rotation 4, opacity 1, degree-3 SH colour 48.
const EXPLODED_FLOATS: u64 = 59;
const PROVENANCE_ORDER: [Provenance; 3] = [Provenance::Init, Provenance::Densified, Provenance::Promoted];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageReport {
    pub header_bytes: u64,
    /// `(section name, bytes)` in file order.
    pub sections: Vec<(String, u64)>,
    pub total_bytes: u64,
    pub parents: u64,
    pub splats: u64,
    pub exploded_equivalent_bytes: u64,
    /// Exploded-equivalent bytes over total bytes.
    pub ratio: f64,
}

impl StorageReport {
    pub fn section(&self, name: &str) -> Option<u64> {
        self.sections.iter().find(|(n, _)| n == name).map(|(_, b)| *b)
    }

    /// Bytes spent on parent positions and scales.
    pub fn parent_bytes(&self) -> u64 {
        self.section("positions").unwrap_or(0) + self.section("log_scales").unwrap_or(0)
    }
}

impl fmt::Display for StorageReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<22}{:>14}", "section", "bytes")?;
        writeln!(f, "{:<22}{:>14}", "header", self.header_bytes)?;
        for (name, bytes) in &self.sections {
            writeln!(f, "{:<22}{:>14}", name, bytes)?;
        }
        writeln!(f, "{:<22}{:>14}", "total", self.total_bytes)?;
        writeln!(f, "{:<22}{:>14}", "exploded equivalent", self.exploded_equivalent_bytes)?;
        write!(f, "{:<22}{:>14.3}", "ratio", self.ratio)
    }
}

fn mlp_len<R>(m: &Mlp<R>) -> usize {
    m.w1.len() + m.b1.len() + m.w2.len() + m.b2.len()
}

fn section_lengths<R: Real>(model: &SceneModel<R>) -> [u64; 8] {
    let n = &model.nets;
    let f = |floats: usize| 4 * floats as u64;
    [
        f(3 * model.parents.len()),
        f(3 * model.parents.len()),
        f(model.grid.tables.len()),
        f(mlp_len(&n.g_pos)),
        f(mlp_len(&n.g_rs)),
        f(mlp_len(&n.g_c)),
        f(mlp_len(&n.g_o)),
        f(n.attn.p1.len() + n.attn.p2.len()),
    ]
}

fn report_from_lengths(lengths: &[u64; 8], parents: u64, nodes_per_tree: u64) -> StorageReport {
    let total = HEADER_BYTES as u64 + lengths.iter().sum::<u64>();
    let splats = parents * nodes_per_tree;
    let exploded = splats * EXPLODED_FLOATS * 4;
    StorageReport {
        header_bytes: HEADER_BYTES as u64,
        sections: SECTION_NAMES.iter().zip(lengths).map(|(n, b)| (n.to_string(), *b)).collect(),
        total_bytes: total,
        parents,
        splats,
        exploded_equivalent_bytes: exploded,
        ratio: exploded as f64 / total as f64,
    }
}

/// Sizes `save` would produce for `model`, without writing anything.
pub fn storage_report<R: Real>(model: &SceneModel<R>) -> StorageReport {
    report_from_lengths(
        &section_lengths(model),
        model.parents.len() as u64,
        model.config.nodes_per_tree() as u64,
    )
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f32s<R: Real>(&mut self, vals: &[R]) {
        for v in vals {
            self.0.extend_from_slice(&v.as_f32().to_le_bytes());
        }
    }
    fn mlp<R: Real>(&mut self, m: &Mlp<R>) {
        for p in m.params() {
            self.f32s(p);
        }
    }
}

fn to_u32(v: usize, what: &str) -> Result<u32, CodecError> {
    u32::try_from(v).map_err(|_| CodecError::InvalidHeader(format!("{what} {v} does not fit in u32")))
}

/// Serialize `model` (values rounded to f32). Deterministic: equal models
/// give equal bytes.
pub fn encode<R: Real>(model: &SceneModel<R>) -> Result<Vec<u8>, CodecError> {
    model.validate().map_err(|e| CodecError::InvalidModel(e.to_string()))?;
    let cfg = &model.config;
    let g = &cfg.grid;
    let c = &model.contraction;
    let lengths = section_lengths(model);
    let mut w = Writer(Vec::with_capacity(HEADER_BYTES + lengths.iter().sum::<u64>() as usize));
    w.0.extend_from_slice(&MAGIC);
    w.u32(FORMAT_VERSION);
    w.u32(to_u32(cfg.feature_dim, "feature dim")?);
    w.u32(to_u32(cfg.children_per_parent, "children per parent")?);
    w.u32(to_u32(cfg.sh_degree, "sh degree")?);
    w.u32(to_u32(cfg.hidden_width, "hidden width")?);
    w.f64(cfg.attention_lambda);
    w.u32(to_u32(g.levels, "grid levels")?);
    w.u32(to_u32(g.table_size, "table size")?);
    w.u32(to_u32(g.features_per_level, "features per level")?);
    w.u32(to_u32(g.base_resolution, "base resolution")?);
    w.f64(g.growth_factor);
    for v in c.center {
        w.f64(v);
    }
    w.f64(c.r_inner);
    w.f64(c.r_outer);
    w.u32(match c.mode {
        ContractionMode::Verbatim => 0,
        ContractionMode::Continuous => 1,
    });
    w.f64(model.offset_scale);
    w.u64(model.parents.len() as u64);
    let order: Vec<usize> = PROVENANCE_ORDER
        .iter()
        .flat_map(|k| (0..model.parents.len()).filter(move |&i| model.provenance[i] == *k))
        .collect();
    for k in PROVENANCE_ORDER {
        w.u64(model.provenance.iter().filter(|p| **p == k).count() as u64);
    }
    w.u32(SECTION_NAMES.len() as u32);
    for l in lengths {
        w.u64(l);
    }
    debug_assert_eq!(w.0.len(), CHECKSUM_OFFSET);
    w.u32(0);
    for &i in &order {
        w.f32s(&model.parents[i].position);
    }
    for &i in &order {
        w.f32s(&model.parents[i].log_scale);
    }
    w.f32s(&model.grid.tables);
    let n = &model.nets;
    w.mlp(&n.g_pos);
    w.mlp(&n.g_rs);
    w.mlp(&n.g_c);
    w.mlp(&n.g_o);
    w.f32s(&n.attn.p1);
    w.f32s(&n.attn.p2);
    let crc = checksum(&w.0);
    w.0[CHECKSUM_OFFSET..HEADER_BYTES].copy_from_slice(&crc.to_le_bytes());
    Ok(w.0)
}

fn checksum(bytes: &[u8]) -> u32 {
    let mut h = crc32fast::Hasher::new();
    h.update(&bytes[..CHECKSUM_OFFSET]);
    h.update(&bytes[HEADER_BYTES..]);
    h.finalize()
}

/// Write `model` to `sink` and report the sizes written.
pub fn save<R: Real, W: Write>(model: &SceneModel<R>, sink: &mut W) -> Result<StorageReport, CodecError> {
    let bytes = encode(model)?;
    sink.write_all(&bytes)?;
    let report = storage_report(model);
    debug_assert_eq!(report.total_bytes, bytes.len() as u64);
    Ok(report)
}

pub fn save_file<R: Real>(model: &SceneModel<R>, path: impl AsRef<Path>) -> Result<StorageReport, CodecError> {
    let bytes = encode(model)?;
    std::fs::write(path, &bytes)?;
    Ok(storage_report(model))
}

pub fn load_file(path: impl AsRef<Path>) -> Result<SceneModel<f32>, CodecError> {
    decode(&std::fs::read(path)?)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> &'a [u8] {
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        s
    }
    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take(4).try_into().expect("4 bytes"))
    }
    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take(8).try_into().expect("8 bytes"))
    }
    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take(8).try_into().expect("8 bytes"))
    }
    fn f32s(&mut self, n: usize) -> Vec<f32> {
        self.take(4 * n)
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect()
    }
    fn mlp(&mut self, shape: &Mlp<f32>) -> Mlp<f32> {
        let mut m = Mlp::zeros(shape.input, shape.hidden, shape.output);
        for p in m.params_mut() {
            let n = p.len();
            *p = self.f32s(n);
        }
        m
    }
}

fn truncated(section: &'static str, needed: u64, available: u64) -> CodecError {
    CodecError::TruncatedSection {
        section,
        needed,
        available,
    }
}

/// Parse a model file. Checks run in order: magic, version, header size,
/// declared section lengths against the byte count, checksum, then the
/// decoded contents.
pub fn decode(bytes: &[u8]) -> Result<SceneModel<f32>, CodecError> {
    let len = bytes.len() as u64;
    if bytes.len() < 4 {
        return Err(truncated("magic", 4, len));
    }
    if bytes[..4] != MAGIC {
        return Err(CodecError::BadMagic);
    }
    if bytes.len() < 8 {
        return Err(truncated("version", 8, len));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(CodecError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    if bytes.len() < HEADER_BYTES {
        return Err(truncated("header", HEADER_BYTES as u64, len));
    }

    let mut r = Reader { bytes, pos: 8 };
    let feature_dim = r.u32() as usize;
    let children = r.u32() as usize;
    let sh_degree = r.u32() as usize;
    let hidden = r.u32() as usize;
    let lambda = r.f64();
    let levels = r.u32() as usize;
    let table_size = r.u32() as usize;
    let features_per_level = r.u32() as usize;
    let base_resolution = r.u32() as usize;
    let growth_factor = r.f64();
    let center = [r.f64(), r.f64(), r.f64()];
    let r_inner = r.f64();
    let r_outer = r.f64();
    let mode = r.u32();
    let offset_scale = r.f64();
    let parent_count = r.u64();
    let counts = [r.u64(), r.u64(), r.u64()];
    let section_count = r.u32();
    let lengths: [u64; 8] = std::array::from_fn(|_| r.u64());
    let stored = r.u32();
    debug_assert_eq!(r.pos, HEADER_BYTES);

    let mut needed = HEADER_BYTES as u64;
    for (l, name) in lengths.iter().zip(SECTION_NAMES) {
        needed = needed
            .checked_add(*l)
            .ok_or_else(|| CodecError::InvalidHeader(format!("length of {name} overflows")))?;
        if needed > len {
            return Err(truncated(name, needed, len));
        }
    }
    if needed < len {
        return Err(CodecError::TrailingBytes(len - needed));
    }
    let computed = checksum(bytes);
    if computed != stored {
        return Err(CodecError::ChecksumMismatch { stored, computed });
    }

    let bad = |m: String| CodecError::InvalidHeader(m);
    if section_count != SECTION_NAMES.len() as u32 {
        return Err(bad(format!("{section_count} sections, expected {}", SECTION_NAMES.len())));
    }
    let mode = match mode {
        0 => ContractionMode::Verbatim,
        1 => ContractionMode::Continuous,
        m => return Err(bad(format!("unknown contraction mode {m}"))),
    };
    let config = ModelConfig {
        feature_dim,
        children_per_parent: children,
        attention_lambda: lambda,
        sh_degree,
        hidden_width: hidden,
        grid: HashGridConfig {
            levels,
            table_size,
            features_per_level,
            base_resolution,
            growth_factor,
        },
    };
    validate_config(&config).map_err(|e| bad(e.to_string()))?;
    if counts.iter().try_fold(0u64, |a, c| a.checked_add(*c)) != Some(parent_count) {
        return Err(bad(format!("provenance counts {counts:?} do not sum to {parent_count}")));
    }
    let n = usize::try_from(parent_count).map_err(|_| bad("parent count too large".into()))?;
    let shapes = NetworkBundle::<f32>::zeros(&config);
    let grid_len = config.grid.parameter_count();
    let expected: [u64; 8] = [
        12 * parent_count,
        12 * parent_count,
        4 * grid_len as u64,
        4 * mlp_len(&shapes.g_pos) as u64,
        4 * mlp_len(&shapes.g_rs) as u64,
        4 * mlp_len(&shapes.g_c) as u64,
        4 * mlp_len(&shapes.g_o) as u64,
        4 * (shapes.attn.p1.len() + shapes.attn.p2.len()) as u64,
    ];
    if lengths != expected {
        return Err(bad(format!("section lengths {lengths:?} do not match the config {expected:?}")));
    }
    if !(r_inner > 0.0 && r_outer > 0.0) || !center.iter().chain([&r_inner, &r_outer, &offset_scale]).all(|v| v.is_finite()) {
        return Err(bad("contraction parameters are not finite and positive".into()));
    }

    let pos = r.f32s(3 * n);
    let log = r.f32s(3 * n);
    let parents: Vec<ParentNode<f32>> = (0..n)
        .map(|i| ParentNode {
            position: [pos[3 * i], pos[3 * i + 1], pos[3 * i + 2]],
            log_scale: [log[3 * i], log[3 * i + 1], log[3 * i + 2]],
        })
        .collect();
    let provenance: Vec<Provenance> = PROVENANCE_ORDER
        .iter()
        .zip(counts)
        .flat_map(|(k, c)| std::iter::repeat_n(*k, c as usize))
        .collect();
    let grid = HashGrid::from_tables(config.grid.clone(), r.f32s(grid_len));
    let g_pos = r.mlp(&shapes.g_pos);
    let g_rs = r.mlp(&shapes.g_rs);
    let g_c = r.mlp(&shapes.g_c);
    let g_o = r.mlp(&shapes.g_o);
    let dim = shapes.attn.dim;
    let attn = AttentionParams {
        dim,
        p1: r.f32s(dim * dim),
        p2: r.f32s(dim * dim),
        lambda: lambda as f32,
    };
    debug_assert_eq!(r.pos, bytes.len());
    let model = SceneModel {
        parents,
        provenance,
        grid,
        nets: NetworkBundle {
            g_pos,
            g_rs,
            g_c,
            g_o,
            attn,
        },
        contraction: ContractionParams {
            center,
            r_inner,
            r_outer,
            mode,
        },
        config,
        offset_scale,
        revision: 0,
    };
    model.validate().map_err(|e| CodecError::InvalidModel(e.to_string()))?;
    Ok(model)
}
