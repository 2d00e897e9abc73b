//! Grayscale image containers and the file formats the tool reads and writes.
//!
//! PGM is the native bit-exact format (P5 and P2 on input, P5 on output).
//! 8-bit grayscale PNG is accepted as a convenience. Float rasters (`SABF`)
//! hold unquantized stego images: the 4-byte magic, little-endian `u32`
//! width and height, then `width * height` little-endian `f64` samples.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

const FLOAT_MAGIC: &[u8; 4] = b"SABF";
const PNG_SIGNATURE: &[u8; 8] = b"\x89PNG\r\n\x1a\n";

/// 8-bit grayscale image, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_shape(width, height, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }

    pub fn same_shape(&self, other: &GrayImage) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Real-valued staging image used between the transform and solver stages.
#[derive(Clone, Debug, PartialEq)]
pub struct RealImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RealImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_shape(width, height, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0.0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }
}

fn check_shape(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::Dimension(format!(
            "image dimensions must be positive, got {width}x{height}"
        )));
    }
    match width.checked_mul(height) {
        Some(n) if n == len => Ok(()),
        _ => Err(Error::Dimension(format!(
            "{width}x{height} image needs {} samples, got {len}",
            width.saturating_mul(height)
        ))),
    }
}

pub fn to_real(img: &GrayImage) -> RealImage {
    RealImage {
        width: img.width,
        height: img.height,
        data: img.data.iter().map(|&v| f64::from(v)).collect(),
    }
}

/// Rounds to nearest (ties away from zero) and clamps to `[0, 255]`.
pub fn quantize(img: &RealImage) -> GrayImage {
    GrayImage {
        width: img.width,
        height: img.height,
        data: img.data.iter().map(|&v| quantize_sample(v)).collect(),
    }
}

fn quantize_sample(v: f64) -> u8 {
    // NaN maps to 0 through the saturating cast.
    v.round().clamp(0.0, 255.0) as u8
}

// ---------------------------------------------------------------------------
// PGM

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::MalformedHeader(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| Error::MalformedHeader(format!("{what} out of range")))
    }
}

/// Decodes a binary (P5) or ASCII (P2) PGM. Samples are returned as stored.
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(Error::MalformedHeader("missing P2/P5 magic".into()));
    }
    let binary = match bytes[1] {
        b'5' => true,
        b'2' => false,
        _ => return Err(Error::MalformedHeader("missing P2/P5 magic".into())),
    };
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader(format!(
            "zero dimension {width}x{height}"
        )));
    }
    if maxval == 0 {
        return Err(Error::MalformedHeader("maxval must be positive".into()));
    }
    if maxval > 255 {
        return Err(Error::UnsupportedMaxval(maxval));
    }
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| Error::MalformedHeader("image too large".into()))?;

    let data = if binary {
        // Exactly one whitespace byte separates maxval from the raster.
        match bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            _ => return Err(Error::MalformedHeader("missing raster separator".into())),
        }
        let payload = &bytes[cur.pos..];
        if payload.len() < expected {
            return Err(Error::TruncatedPayload {
                expected,
                found: payload.len(),
            });
        }
        let data = payload[..expected].to_vec();
        if let Some(&v) = data.iter().find(|&&v| u32::from(v) > maxval) {
            return Err(Error::InvalidPixel {
                value: v.into(),
                maxval,
            });
        }
        data
    } else {
        let mut data = Vec::with_capacity(expected);
        for _ in 0..expected {
            cur.skip_space_and_comments();
            if cur.pos >= bytes.len() {
                return Err(Error::TruncatedPayload {
                    expected,
                    found: data.len(),
                });
            }
            let v = cur.number("sample")?;
            if v > maxval {
                return Err(Error::InvalidPixel { value: v, maxval });
            }
            data.push(v as u8);
        }
        data
    };
    GrayImage::new(width, height, data)
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    decode_pgm(&fs::read(path)?)
}

pub fn save_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_pgm(img))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// PNG

pub fn decode_png(bytes: &[u8]) -> Result<GrayImage> {
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder.read_info()?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedPng(format!(
            "expected 8-bit grayscale, got {:?} at {:?}",
            info.color_type, info.bit_depth
        )));
    }
    let (width, height) = (info.width as usize, info.height as usize);
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::UnsupportedPng("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let frame = reader.next_frame(&mut buf)?;
    buf.truncate(frame.buffer_size());
    if frame.line_size != width {
        return Err(Error::UnsupportedPng("unexpected row stride".into()));
    }
    GrayImage::new(width, height, buf)
}

pub fn encode_png(img: &GrayImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width as u32, img.height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header()?;
        writer.write_image_data(&img.data)?;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Float raster

pub fn encode_float_raster(img: &RealImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * img.data.len());
    out.extend_from_slice(FLOAT_MAGIC);
    out.extend_from_slice(&(img.width as u32).to_le_bytes());
    out.extend_from_slice(&(img.height as u32).to_le_bytes());
    for v in &img.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_float_raster(bytes: &[u8]) -> Result<RealImage> {
    if bytes.len() < 12 || &bytes[..4] != FLOAT_MAGIC {
        return Err(Error::MalformedHeader("missing SABF magic".into()));
    }
    let width = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| Error::MalformedHeader("image too large".into()))?;
    let payload = &bytes[12..];
    if payload.len() / 8 < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: payload.len() / 8,
        });
    }
    let data = payload
        .chunks_exact(8)
        .take(expected)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    RealImage::new(width, height, data)
}

pub fn save_float_raster(img: &RealImage, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&encode_float_raster(img))?;
    w.flush()?;
    Ok(())
}

pub fn load_float_raster(path: impl AsRef<Path>) -> Result<RealImage> {
    decode_float_raster(&fs::read(path)?)
}

// ---------------------------------------------------------------------------
// Format dispatch

/// A decoded raster of either precision.
#[derive(Clone, Debug)]
pub enum Raster {
    Gray(GrayImage),
    Float(RealImage),
}

impl Raster {
    pub fn to_real(&self) -> RealImage {
        match self {
            Raster::Gray(g) => to_real(g),
            Raster::Float(f) => f.clone(),
        }
    }
}

/// Loads PGM, PNG or a float raster, detected by content.
pub fn load_raster(path: impl AsRef<Path>) -> Result<Raster> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    if bytes.starts_with(FLOAT_MAGIC) {
        Ok(Raster::Float(decode_float_raster(&bytes)?))
    } else if bytes.starts_with(PNG_SIGNATURE) {
        Ok(Raster::Gray(decode_png(&bytes)?))
    } else if bytes.starts_with(b"P5") || bytes.starts_with(b"P2") {
        Ok(Raster::Gray(decode_pgm(&bytes)?))
    } else if bytes.is_empty() {
        Err(Error::MalformedHeader("empty file".into()))
    } else {
        Err(Error::UnknownFormat(path.to_path_buf()))
    }
}

/// Loads an 8-bit image (PGM or PNG).
pub fn load_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    match load_raster(path.as_ref())? {
        Raster::Gray(g) => Ok(g),
        Raster::Float(_) => Err(Error::InvalidArgument(format!(
            "{} is a float raster, expected an 8-bit image",
            path.as_ref().display()
        ))),
    }
}

/// Saves as PNG when the extension is `.png`, otherwise as binary PGM.
pub fn save_gray(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let is_png = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        fs::write(path, encode_png(img)?)?;
        Ok(())
    } else {
        save_pgm(img, path)
    }
}

// ---------------------------------------------------------------------------
// Resampling

/// Resizes with area averaging on shrinking axes and bilinear interpolation
/// on growing axes. Each axis is handled independently.
pub fn resize(img: &GrayImage, width: usize, height: usize) -> Result<GrayImage> {
    if width == 0 || height == 0 {
        return Err(Error::Dimension("resize target must be positive".into()));
    }
    if img.width == width && img.height == height {
        return Ok(img.clone());
    }
    let src = to_real(img);
    // Horizontal pass then vertical pass.
    let h_weights = axis_weights(img.width, width);
    let mut tmp = vec![0.0; width * img.height];
    for row in 0..img.height {
        let line = &src.data[row * img.width..(row + 1) * img.width];
        for (col, taps) in h_weights.iter().enumerate() {
            tmp[row * width + col] = taps.iter().map(|&(i, w)| line[i] * w).sum();
        }
    }
    let v_weights = axis_weights(img.height, height);
    let mut out = vec![0.0; width * height];
    for (row, taps) in v_weights.iter().enumerate() {
        for col in 0..width {
            out[row * width + col] = taps.iter().map(|&(i, w)| tmp[i * width + col] * w).sum();
        }
    }
    Ok(quantize(&RealImage::new(width, height, out)?))
}

fn axis_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|d| {
            if dst < src {
                // Box filter over the source interval [d*scale, (d+1)*scale).
                let lo = d as f64 * scale;
                let hi = lo + scale;
                let mut taps = Vec::new();
                let mut i = lo.floor() as usize;
                while (i as f64) < hi && i < src {
                    let overlap = (hi.min(i as f64 + 1.0) - lo.max(i as f64)).max(0.0);
                    if overlap > 0.0 {
                        taps.push((i, overlap / scale));
                    }
                    i += 1;
                }
                taps
            } else {
                // Pixel-center aligned bilinear.
                let x = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
                let i0 = x.floor() as usize;
                let i1 = (i0 + 1).min(src - 1);
                let f = x - i0 as f64;
                if i1 == i0 || f == 0.0 {
                    vec![(i0, 1.0)]
                } else {
                    vec![(i0, 1.0 - f), (i1, f)]
                }
            }
        })
        .collect()
}
