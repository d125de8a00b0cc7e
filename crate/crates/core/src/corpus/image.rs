use std::fs;
use std::io::ErrorKind;
use std::path::Path;

use crate::grid::Grid;

use super::CorpusError;

const PNG_SIGNATURE: &[u8] = &[0x89, b'P', b'N', b'G', b'\r', b'\n', 0x1a, b'\n'];

/// Grayscale image with intensities in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pixels: Grid<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, intensities: Vec<f64>) -> Result<Self, CorpusError> {
        if width == 0 || height == 0 {
            return Err(CorpusError::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if let Some(bad) = intensities
            .iter()
            .position(|v| !v.is_finite() || !(0.0..=1.0).contains(v))
        {
            return Err(CorpusError::InvalidImage(format!(
                "intensity {} at index {bad} outside [0, 1]",
                intensities[bad]
            )));
        }
        let pixels = Grid::from_vec(width, height, intensities).ok_or_else(|| {
            CorpusError::InvalidImage(format!("buffer length does not match {width}x{height}"))
        })?;
        Ok(Self { pixels })
    }

    /// Builds an image from a per-pixel function of `(row, col)`; values are
    /// clamped into `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            pixels: Grid::from_fn(width, height, |r, c| {
                let v = f(r, c);
                if v.is_nan() {
                    0.0
                } else {
                    v.clamp(0.0, 1.0)
                }
            }),
        }
    }

    pub fn width(&self) -> usize {
        self.pixels.width()
    }

    pub fn height(&self) -> usize {
        self.pixels.height()
    }

    pub fn intensities(&self) -> &[f64] {
        self.pixels.as_slice()
    }

    pub fn grid(&self) -> &Grid<f64> {
        &self.pixels
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.pixels[(row, col)]
    }

    /// Bilinear sample at pixel coordinates `(x, y)` (x = column).
    ///
    /// Points up to half a pixel outside the image are clamped onto the border
    /// and reported with `clamped = true`; points further out yield `None`.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Option<Sample> {
        let (w, h) = (self.width() as f64, self.height() as f64);
        if !(x >= -0.5 && x <= w - 0.5 && y >= -0.5 && y <= h - 0.5) {
            return None;
        }
        let cx = x.clamp(0.0, w - 1.0);
        let cy = y.clamp(0.0, h - 1.0);
        let clamped = cx != x || cy != y;
        let (c0, fx) = split_coord(cx, self.width());
        let (r0, fy) = split_coord(cy, self.height());
        let c1 = (c0 + 1).min(self.width() - 1);
        let r1 = (r0 + 1).min(self.height() - 1);
        let top = (1.0 - fx) * self.at(r0, c0) + fx * self.at(r0, c1);
        let bottom = (1.0 - fx) * self.at(r1, c0) + fx * self.at(r1, c1);
        let value = (1.0 - fy) * top + fy * bottom;
        Some(Sample { value, clamped })
    }
}

/// Result of a bilinear lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub value: f64,
    pub clamped: bool,
}

/// Integer cell and fractional offset for a coordinate already clamped to
/// `[0, n-1]`. The last cell is folded back so `fx == 1` at the far edge.
#[inline]
fn split_coord(v: f64, n: usize) -> (usize, f64) {
    if n == 1 {
        return (0, 0.0);
    }
    let cell = (v.floor() as usize).min(n - 2);
    (cell, v - cell as f64)
}

/// Loads an 8-bit grayscale image (binary PGM or PNG). Color PNGs are
/// converted by averaging their RGB channels.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage, CorpusError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        ErrorKind::NotFound => CorpusError::FileNotFound(path.to_path_buf()),
        _ => CorpusError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    decode_image(&bytes)
}

pub fn decode_image(bytes: &[u8]) -> Result<GrayImage, CorpusError> {
    if bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else if bytes.starts_with(PNG_SIGNATURE) {
        decode_png(bytes)
    } else if bytes.len() < 2 {
        Err(CorpusError::CorruptImage("file too short".into()))
    } else {
        Err(CorpusError::UnsupportedFormat(
            "expected binary PGM (P5) or PNG".into(),
        ))
    }
}

fn decode_pgm(bytes: &[u8]) -> Result<GrayImage, CorpusError> {
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        skip_whitespace_and_comments(bytes, &mut pos);
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(CorpusError::CorruptImage("truncated PGM header".into()));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *field = text
            .parse()
            .map_err(|_| CorpusError::CorruptImage(format!("bad PGM header value {text:?}")))?;
    }
    let [width, height, maxval] = fields;
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(CorpusError::CorruptImage("truncated PGM header".into()));
    }
    pos += 1;
    if width == 0 || height == 0 || maxval == 0 {
        return Err(CorpusError::CorruptImage(format!(
            "invalid PGM header {width}x{height} maxval {maxval}"
        )));
    }
    if maxval > 255 {
        return Err(CorpusError::UnsupportedFormat(format!(
            "16-bit PGM (maxval {maxval})"
        )));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| CorpusError::CorruptImage("PGM dimensions overflow".into()))?;
    let raster = bytes
        .get(pos..pos + n)
        .ok_or_else(|| CorpusError::CorruptImage("truncated PGM raster".into()))?;
    let scale = maxval as f64;
    let mut values = Vec::with_capacity(n);
    for &b in raster {
        if b as usize > maxval {
            return Err(CorpusError::CorruptImage(format!(
                "sample {b} exceeds maxval {maxval}"
            )));
        }
        values.push(b as f64 / scale);
    }
    GrayImage::new(width, height, values)
}

fn skip_whitespace_and_comments(bytes: &[u8], pos: &mut usize) {
    while *pos < bytes.len() {
        match bytes[*pos] {
            b'#' => {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            }
            b if b.is_ascii_whitespace() => *pos += 1,
            _ => break,
        }
    }
}

fn decode_png(bytes: &[u8]) -> Result<GrayImage, CorpusError> {
    use image::DynamicImage;

    let decoded = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| CorpusError::CorruptImage(e.to_string()))?;
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    let values: Vec<f64> = match decoded {
        DynamicImage::ImageLuma8(buf) => buf.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageLuma16(buf) => buf.pixels().map(|p| p.0[0] as f64 / 65535.0).collect(),
        other => other
            .to_rgb8()
            .pixels()
            .map(|p| (p.0[0] as f64 + p.0[1] as f64 + p.0[2] as f64) / (3.0 * 255.0))
            .collect(),
    };
    GrayImage::new(width, height, values)
}

/// Quantizes to 8 bits: `round(v * 255)`.
pub fn to_u8_pixels(img: &GrayImage) -> Vec<u8> {
    img.intensities()
        .iter()
        .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect()
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(to_u8_pixels(img));
    out
}

pub fn save_pgm(path: impl AsRef<Path>, img: &GrayImage) -> Result<(), CorpusError> {
    let path = path.as_ref();
    crate::fsutil::write_atomic(path, &encode_pgm(img)).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn save_png(path: impl AsRef<Path>, img: &GrayImage) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let bytes = crate::fsutil::encode_png_gray(img.width(), img.height(), &to_u8_pixels(img))
        .map_err(|e| CorpusError::InvalidImage(e.to_string()))?;
    crate::fsutil::write_atomic(path, &bytes).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}
