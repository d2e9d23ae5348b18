//! RGB float images, PNG I/O and a lossless float dump.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::real::Real;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("png: {0}")]
    Png(#[from] image::ImageError),
    #[error("float dump header is malformed")]
    BadDump,
}

/// Interleaved RGB, row-major, values nominally in `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image<R> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<R>,
}

impl<R: Real> Image<R> {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, [R::zero(); 3])
    }

    pub fn filled(width: usize, height: usize, rgb: [R; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self { width, height, data }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [R; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [R; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height && self.data.len() == other.data.len()
    }

    pub fn cast<S: Real>(&self) -> Image<S> {
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| S::of(v.as_f64())).collect(),
        }
    }

    /// Box-filter downsample by an integer factor (output size rounds down,
    /// minimum 1).
    pub fn downsample(&self, factor: usize) -> Self {
        if factor <= 1 {
            return self.clone();
        }
        let w = (self.width / factor).max(1);
        let h = (self.height / factor).max(1);
        let mut out = Self::new(w, h);
        for y in 0..h {
            for x in 0..w {
                let mut acc = [R::zero(); 3];
                let mut n = 0usize;
                for sy in y * factor..((y + 1) * factor).min(self.height) {
                    for sx in x * factor..((x + 1) * factor).min(self.width) {
                        let p = self.pixel(sx, sy);
                        for c in 0..3 {
                            acc[c] += p[c];
                        }
                        n += 1;
                    }
                }
                let inv = R::one() / R::of(n as f64);
                out.set_pixel(x, y, acc.map(|v| v * inv));
            }
        }
        out
    }

    /// 8-bit quantization with rounding, clamped to `[0,255]`.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| (v.as_f64().clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Self {
        Self {
            width,
            height,
            data: bytes.iter().map(|b| R::of(*b as f64 / 255.0)).collect(),
        }
    }

    pub fn save_png(&self, path: &Path) -> Result<(), ImageError> {
        image::save_buffer(
            path,
            &self.to_rgb8(),
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::Rgb8,
        )?;
        Ok(())
    }

    pub fn load_png(path: &Path) -> Result<Self, ImageError> {
        let img = image::open(path)?.to_rgb8();
        let (w, h) = img.dimensions();
        Ok(Self::from_rgb8(w as usize, h as usize, img.as_raw()))
    }

    /// `u32 width, u32 height, u32 channels=3`, then `f32` samples, little endian.
    pub fn write_f32_dump<W: Write>(&self, mut w: W) -> Result<(), ImageError> {
        w.write_all(&(self.width as u32).to_le_bytes())?;
        w.write_all(&(self.height as u32).to_le_bytes())?;
        w.write_all(&3u32.to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.as_f32().to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_f32_dump<Rd: Read>(mut r: Rd) -> Result<Self, ImageError> {
        let mut head = [0u8; 12];
        r.read_exact(&mut head)?;
        let word = |i: usize| u32::from_le_bytes(head[i * 4..i * 4 + 4].try_into().unwrap()) as usize;
        let (width, height, channels) = (word(0), word(1), word(2));
        if channels != 3 {
            return Err(ImageError::BadDump);
        }
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != width * height * 3 * 4 {
            return Err(ImageError::BadDump);
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| R::of(f32::from_le_bytes(c.try_into().unwrap()) as f64))
            .collect();
        Ok(Self { width, height, data })
    }
}
