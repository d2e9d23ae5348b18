use lpgs_core::codec::{decode, encode, save, storage_report, CodecError, HEADER_BYTES};
use lpgs_core::config::{HashGridConfig, ModelConfig};
use lpgs_core::raster::render;
use lpgs_core::scene::{Camera, Provenance, SceneModel};
use lpgs_core::spatial::ContractionMode;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_model(parents: usize, seed: u64) -> SceneModel<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<[f64; 3]> = (0..parents.max(2))
        .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect();
    let mut cfg = ModelConfig::new(8, 2);
    cfg.grid = HashGridConfig::with_finest(4, 1 << 10, 2, 4, 64);
    let mut m = SceneModel::initialize(cfg, &pts, ContractionMode::Verbatim, seed).unwrap();
    m.parents.truncate(parents);
    m.provenance.truncate(parents);
    for v in m.grid.tables.iter_mut() {
        *v = rng.random_range(-0.5..0.5);
    }
    for (i, p) in m.provenance.iter_mut().enumerate() {
        *p = [Provenance::Init, Provenance::Promoted, Provenance::Densified][i % 3];
    }
    m
}

fn camera() -> Camera {
    Camera::look_at([0.5, -3.5, 1.0], [0.0; 3], [0.0, 0.0, 1.0], 0.9, 40, 32)
}

#[test]
fn round_trip_renders_identically() {
    let m = random_model(40, 1);
    let bytes = encode(&m).unwrap();
    let back = decode(&bytes).unwrap();
    let a = render(&m, &camera(), [0.1, 0.1, 0.1]).unwrap();
    let b = render(&back, &camera(), [0.1, 0.1, 0.1]).unwrap();
    assert_eq!(a.image.data, b.image.data);
    assert_eq!(back.provenance_fractions(), m.provenance_fractions());
}

#[test]
fn resave_is_byte_identical() {
    let m = random_model(25, 2);
    let first = encode(&m).unwrap();
    let second = encode(&decode(&first).unwrap()).unwrap();
    assert_eq!(first, second);
    assert_eq!(encode(&m).unwrap(), first);
}

#[test]
fn report_total_is_file_size() {
    let m = random_model(17, 3);
    let mut sink = Vec::new();
    let report = save(&m, &mut sink).unwrap();
    assert_eq!(report.total_bytes, sink.len() as u64);
    assert_eq!(
        report.total_bytes,
        report.header_bytes + report.sections.iter().map(|(_, b)| b).sum::<u64>()
    );
}

#[test]
fn empty_scene_has_empty_parent_sections() {
    let m = random_model(0, 4);
    let bytes = encode(&m).unwrap();
    let r = storage_report(&m);
    assert_eq!(r.parent_bytes(), 0);
    assert_eq!(r.total_bytes, bytes.len() as u64);
    assert!(decode(&bytes).unwrap().parents.is_empty());
}

fn tiny_grid_model(parents: usize) -> SceneModel<f32> {
    let mut cfg = ModelConfig::new(2, 2);
    cfg.grid = HashGridConfig::with_finest(1, 1 << 10, 2, 16, 16);
    let pts: Vec<[f64; 3]> = (0..parents).map(|i| [i as f64 * 0.01, (i % 7) as f64 * 0.1, 0.0]).collect();
    SceneModel::initialize(cfg, &pts, ContractionMode::Verbatim, 0).unwrap()
}

#[test]
fn storage_arithmetic() {
    let r = storage_report(&tiny_grid_model(1000));
    assert_eq!(r.parent_bytes(), 24_000);
    assert_eq!(r.exploded_equivalent_bytes, 708_000);
    let mut prev = 0.0;
    for n in [10, 100, 1000, 5000] {
        let r = storage_report(&tiny_grid_model(n));
        assert!(r.ratio > prev);
        prev = r.ratio;
    }
}

#[test]
fn named_errors_for_header_damage() {
    let m = random_model(5, 5);
    let bytes = encode(&m).unwrap();
    let mut b = bytes.clone();
    b[0] = b'X';
    assert!(matches!(decode(&b), Err(CodecError::BadMagic)));
    let mut b = bytes.clone();
    b[4] = 2;
    assert!(matches!(decode(&b), Err(CodecError::VersionMismatch { found: 2, .. })));
    let mut b = bytes.clone();
    let last = b.len() - 1;
    b[last] ^= 0x10;
    assert!(matches!(decode(&b), Err(CodecError::ChecksumMismatch { .. })));
    assert!(matches!(decode(&bytes[..bytes.len() - 3]), Err(CodecError::TruncatedSection { .. })));
    assert!(matches!(decode(&bytes[..HEADER_BYTES - 1]), Err(CodecError::TruncatedSection { .. })));
    let mut b = bytes.clone();
    b.push(0);
    assert!(matches!(decode(&b), Err(CodecError::TrailingBytes(1))));
}

#[test]
fn random_corruption_never_loads() {
    let m = random_model(12, 6);
    let bytes = encode(&m).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for i in 0..300 {
        let mut b = bytes.clone();
        if i % 3 == 0 {
            let cut = rng.random_range(0..b.len());
            b.truncate(cut);
        } else {
            for _ in 0..rng.random_range(1..4) {
                let k = rng.random_range(0..b.len());
                b[k] ^= 1 << rng.random_range(0..8);
            }
        }
        if b == bytes {
            continue;
        }
        assert!(decode(&b).is_err(), "corruption {i} loaded");
    }
}
