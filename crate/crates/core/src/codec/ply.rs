//! The subset of PLY needed for initialization: vertex `x, y, z` from ASCII
//! or binary little-endian files. Other properties are skipped.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlyError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported PLY: {0}")]
    UnsupportedPly(String),
    #[error("malformed PLY header: {0}")]
    MalformedHeader(String),
    #[error("malformed PLY body: {0}")]
    MalformedBody(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().expect("4 bytes")) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().expect("4 bytes")) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().expect("4 bytes")) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
        }
    }
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    /// `(name, type)`; `None` type marks a list property.
    props: Vec<(String, Option<Scalar>)>,
}

fn parse_header(text: &str) -> Result<(PlyFormat, Vec<Element>), PlyError> {
    let malformed = |m: &str| PlyError::MalformedHeader(m.to_string());
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(malformed("missing `ply` signature"));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", f, _version] => {
                format = Some(match *f {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    "binary_big_endian" => return Err(PlyError::UnsupportedPly("big-endian encoding".into())),
                    other => return Err(PlyError::MalformedHeader(format!("unknown format `{other}`"))),
                });
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| PlyError::MalformedHeader(format!("bad element count `{count}`")))?,
                props: Vec::new(),
            }),
            ["property", "list", _, _, name] => elements
                .last_mut()
                .ok_or_else(|| malformed("property before any element"))?
                .props
                .push((name.to_string(), None)),
            ["property", ty, name] => {
                let ty = Scalar::parse(ty).ok_or_else(|| PlyError::MalformedHeader(format!("unknown type `{ty}`")))?;
                elements
                    .last_mut()
                    .ok_or_else(|| malformed("property before any element"))?
                    .props
                    .push((name.to_string(), Some(ty)));
            }
            _ => return Err(PlyError::MalformedHeader(format!("unrecognized line `{line}`"))),
        }
    }
    Ok((format.ok_or_else(|| malformed("missing format line"))?, elements))
}

/// Extract vertex positions from PLY bytes.
pub fn parse_ply_points(bytes: &[u8]) -> Result<Vec<[f64; 3]>, PlyError> {
    const END: &[u8] = b"end_header";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| PlyError::MalformedHeader("missing end_header".into()))?;
    let mut body = end + END.len();
    if bytes.get(body) == Some(&b'\r') {
        body += 1;
    }
    if bytes.get(body) != Some(&b'\n') {
        return Err(PlyError::MalformedHeader("end_header must end its line".into()));
    }
    body += 1;
    let header =
        std::str::from_utf8(&bytes[..end]).map_err(|_| PlyError::MalformedHeader("header is not UTF-8".into()))?;
    let (format, elements) = parse_header(header)?;
    let vi = elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| PlyError::UnsupportedPly("no vertex element".into()))?;
    let vertex = &elements[vi];
    let axis = |n: &str| {
        vertex
            .props
            .iter()
            .position(|(p, _)| p == n)
            .ok_or_else(|| PlyError::UnsupportedPly(format!("vertex has no `{n}` property")))
    };
    let idx = [axis("x")?, axis("y")?, axis("z")?];
    if idx.iter().any(|&i| vertex.props[i].1.is_none()) {
        return Err(PlyError::UnsupportedPly("x, y, z must be scalar properties".into()));
    }
    match format {
        PlyFormat::Ascii => parse_ascii(&bytes[body..], &elements, vi, idx),
        PlyFormat::BinaryLittleEndian => parse_binary(&bytes[body..], &elements, vi, idx),
    }
}

fn parse_ascii(body: &[u8], elements: &[Element], vi: usize, idx: [usize; 3]) -> Result<Vec<[f64; 3]>, PlyError> {
    let text = std::str::from_utf8(body).map_err(|_| PlyError::MalformedBody("ASCII body is not UTF-8".into()))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let skip: usize = elements[..vi].iter().map(|e| e.count).sum();
    for _ in 0..skip {
        lines
            .next()
            .ok_or_else(|| PlyError::MalformedBody("file ends before the vertex element".into()))?;
    }
    let mut out = Vec::with_capacity(elements[vi].count);
    for i in 0..elements[vi].count {
        let line = lines
            .next()
            .ok_or_else(|| PlyError::MalformedBody(format!("missing vertex {i}")))?;
        let vals: Vec<&str> = line.split_whitespace().collect();
        if vals.len() < elements[vi].props.len() {
            return Err(PlyError::MalformedBody(format!("vertex {i} has too few values")));
        }
        let get = |k: usize| {
            vals[k]
                .parse::<f64>()
                .map_err(|_| PlyError::MalformedBody(format!("vertex {i}: bad number `{}`", vals[k])))
        };
        out.push([get(idx[0])?, get(idx[1])?, get(idx[2])?]);
    }
    Ok(out)
}

fn fixed_stride(e: &Element) -> Result<usize, PlyError> {
    e.props
        .iter()
        .map(|(n, t)| {
            t.map(Scalar::size)
                .ok_or_else(|| PlyError::UnsupportedPly(format!("list property `{n}` before vertex data")))
        })
        .sum()
}

fn parse_binary(body: &[u8], elements: &[Element], vi: usize, idx: [usize; 3]) -> Result<Vec<[f64; 3]>, PlyError> {
    let mut offset = 0usize;
    for e in &elements[..vi] {
        offset = e
            .count
            .checked_mul(fixed_stride(e)?)
            .and_then(|b| b.checked_add(offset))
            .ok_or_else(|| PlyError::MalformedBody("element size overflows".into()))?;
    }
    let v = &elements[vi];
    let stride = fixed_stride(v)?;
    let mut prop_offset = Vec::with_capacity(v.props.len());
    let mut acc = 0;
    for (_, t) in &v.props {
        prop_offset.push(acc);
        acc += t.map(Scalar::size).unwrap_or(0);
    }
    let needed = v
        .count
        .checked_mul(stride)
        .and_then(|b| b.checked_add(offset))
        .ok_or_else(|| PlyError::MalformedBody("vertex block size overflows".into()))?;
    if body.len() < needed {
        return Err(PlyError::MalformedBody(format!("need {needed} body bytes, found {}", body.len())));
    }
    Ok((0..v.count)
        .map(|i| {
            let rec = &body[offset + i * stride..offset + (i + 1) * stride];
            idx.map(|k| {
                let ty = v.props[k].1.expect("checked scalar");
                ty.read_le(&rec[prop_offset[k]..])
            })
        })
        .collect())
}

pub fn load_ply_points(path: impl AsRef<Path>) -> Result<Vec<[f64; 3]>, PlyError> {
    parse_ply_points(&std::fs::read(path)?)
}

/// Write points as float `x, y, z` vertices.
pub fn write_ply_points<W: Write>(sink: &mut W, points: &[[f64; 3]], format: PlyFormat) -> Result<(), PlyError> {
    let name = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    write!(
        sink,
        "ply\nformat {name} 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
        points.len()
    )?;
    for p in points {
        match format {
            PlyFormat::Ascii => writeln!(sink, "{} {} {}", p[0] as f32, p[1] as f32, p[2] as f32)?,
            PlyFormat::BinaryLittleEndian => {
                for v in p {
                    sink.write_all(&(*v as f32).to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}
