//! Binary model container, storage accounting and PLY point ingestion.
//!
//! Layout of a model file, little-endian throughout:
//!
//! | offset | field |
//! |---|---|
//! | 0 | magic `LPGS` |
//! | 4 | format version, u32 |
//! | 8 | D, K, SH degree, hidden width: 4 x u32 |
//! | 24 | lambda: f64 |
//! | 32 | grid levels, table size, features per level, base resolution: 4 x u32 |
//! | 48 | grid growth factor: f64 |
//! | 56 | contraction centre (3 x f64), R_inner, R_outer: f64 |
//! | 96 | contraction mode: u32 (0 verbatim, 1 continuous) |
//! | 100 | child offset scale: f64 |
//! | 108 | parent count: u64 |
//! | 116 | parents from init / densify / promotion: 3 x u64 |
//! | 140 | section count: u32 (8) |
//! | 144 | section byte lengths: 8 x u64 |
//! | 208 | CRC-32 of bytes `0..208` followed by the payload |
//! | 212 | payload sections, f32 each |
//!
//! Sections in order: parent positions, parent log-scales, grid tables,
//! `g_pos`, `g_rs`, `g_c`, `g_o` (each `w1, b1, w2, b2`), attention
//! (`P1`, `P2`). Parents are written grouped by provenance (init, densified,
//! promoted) so the counts in the header restore each parent's origin.

mod model_file;
mod ply;

pub use model_file::{
    decode, encode, load_file, save, save_file, storage_report, StorageReport, FORMAT_VERSION, HEADER_BYTES, MAGIC,
    SECTION_NAMES,
};
pub use ply::{load_ply_points, parse_ply_points, write_ply_points, PlyError, PlyFormat};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic: not a model file")]
    BadMagic,
    #[error("format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("truncated {section}: need {needed} bytes, {available} available")]
    TruncatedSection {
        section: &'static str,
        needed: u64,
        available: u64,
    },
    #[error("{0} unexpected bytes after the last section")]
    TrailingBytes(u64),
    #[error("invalid header: {0}")]
    InvalidHeader(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
}
