//! Binary container and PNG previews for aligned faces.
//!
//! Layout (little endian):
//!
//! ```text
//! 0   8  magic  "PXALFACE"
//! 8   4  version (u32) = 1
//! 12  4  flags (u32): bit0 xmap/ymap present, bit1 dx/dy present
//! 16  4  width (u32)
//! 20  4  height (u32)
//! 24  8  clamped sample count (u64)
//! 32  .. five f64 grids, row-major: intensity, xmap, ymap, dx, dy
//!        (absent grids are stored as zeros)
//! ..  .. mask bits, row-major, LSB first, ceil(w*h/8) bytes
//! ```

use std::path::Path;

use crate::corpus::CorpusError;
use crate::grid::Grid;

use super::map::AlignedFace;
use super::WarpError;

const MAGIC: &[u8; 8] = b"PXALFACE";
const VERSION: u32 = 1;
const FLAG_MAPS: u32 = 1;
const FLAG_DELTAS: u32 = 2;

pub fn encode_aligned_face(face: &AlignedFace) -> Vec<u8> {
    let (w, h) = face.dims();
    let n = w * h;
    let mut flags = 0;
    if face.xmap.is_some() && face.ymap.is_some() {
        flags |= FLAG_MAPS;
    }
    if face.dx.is_some() && face.dy.is_some() {
        flags |= FLAG_DELTAS;
    }
    let mut out = Vec::with_capacity(32 + 5 * 8 * n + n.div_ceil(8));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&(face.clamped_samples as u64).to_le_bytes());
    let zeros = Grid::filled(w, h, 0.0);
    for g in [
        Some(&face.intensity),
        face.xmap.as_ref(),
        face.ymap.as_ref(),
        face.dx.as_ref(),
        face.dy.as_ref(),
    ] {
        for v in g.unwrap_or(&zeros).as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut bits = vec![0u8; n.div_ceil(8)];
    for (i, &m) in face.mask.as_slice().iter().enumerate() {
        if m {
            bits[i / 8] |= 1 << (i % 8);
        }
    }
    out.extend_from_slice(&bits);
    out
}

pub fn decode_aligned_face(bytes: &[u8]) -> Result<AlignedFace, WarpError> {
    let corrupt = |m: &str| WarpError::CorruptContainer(m.to_string());
    if bytes.len() < 32 || &bytes[..8] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let version = u32_at(8);
    if version != VERSION {
        return Err(WarpError::CorruptContainer(format!("unsupported version {version}")));
    }
    let flags = u32_at(12);
    let (w, h) = (u32_at(16) as usize, u32_at(20) as usize);
    let clamped = u64::from_le_bytes(bytes[24..32].try_into().expect("8 bytes")) as usize;
    let n = w * h;
    let expected = 32 + 5 * 8 * n + n.div_ceil(8);
    if w == 0 || h == 0 || bytes.len() != expected {
        return Err(corrupt("length does not match dimensions"));
    }
    let mut pos = 32;
    let mut read_grid = || {
        let vals = bytes[pos..pos + 8 * n]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        pos += 8 * n;
        Grid::from_vec(w, h, vals).expect("sized")
    };
    let intensity = read_grid();
    let xmap = read_grid();
    let ymap = read_grid();
    let dx = read_grid();
    let dy = read_grid();
    let mask_bytes = &bytes[expected - n.div_ceil(8)..];
    let mask = Grid::from_vec(w, h, (0..n).map(|i| mask_bytes[i / 8] >> (i % 8) & 1 == 1).collect())
        .expect("sized");
    let maps = flags & FLAG_MAPS != 0;
    let deltas = flags & FLAG_DELTAS != 0;
    Ok(AlignedFace {
        intensity,
        mask,
        xmap: maps.then_some(xmap),
        ymap: maps.then_some(ymap),
        dx: deltas.then_some(dx),
        dy: deltas.then_some(dy),
        clamped_samples: clamped,
    })
}

pub fn save_aligned_face(path: impl AsRef<Path>, face: &AlignedFace) -> Result<(), WarpError> {
    let path = path.as_ref();
    crate::fsutil::write_atomic(path, &encode_aligned_face(face)).map_err(|source| io_err(path, source))
}

pub fn load_aligned_face(path: impl AsRef<Path>) -> Result<AlignedFace, WarpError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| match source.kind() {
        std::io::ErrorKind::NotFound => WarpError::Corpus(CorpusError::FileNotFound(path.to_path_buf())),
        _ => io_err(path, source),
    })?;
    decode_aligned_face(&bytes)
}

fn io_err(path: &Path, source: std::io::Error) -> WarpError {
    WarpError::Corpus(CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Grayscale PNG of the warped intensity grid.
pub fn intensity_png(face: &AlignedFace) -> Vec<u8> {
    let px: Vec<u8> = face
        .intensity
        .as_slice()
        .iter()
        .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    crate::fsutil::encode_png_gray(face.width(), face.height(), &px).expect("in-memory png")
}

/// False-color PNG of a Δ grid: blue below 1 (compression), white at 1,
/// red above 1 (stretch); masked pixels black. The color range is symmetric
/// around 1 and set by the largest deviation inside the mask.
pub fn delta_png(delta: &Grid<f64>, mask: &Grid<bool>) -> Vec<u8> {
    let spread = delta
        .as_slice()
        .iter()
        .zip(mask.as_slice())
        .filter(|(_, &m)| m)
        .map(|(v, _)| (v - 1.0).abs())
        .fold(1e-9, f64::max);
    let mut px = Vec::with_capacity(delta.as_slice().len() * 3);
    for (v, &m) in delta.as_slice().iter().zip(mask.as_slice()) {
        if !m {
            px.extend_from_slice(&[0, 0, 0]);
            continue;
        }
        let t = ((v - 1.0) / spread).clamp(-1.0, 1.0);
        let fade = |s: f64| (255.0 * (1.0 - s)).round() as u8;
        if t >= 0.0 {
            px.extend_from_slice(&[255, fade(t), fade(t)]);
        } else {
            px.extend_from_slice(&[fade(-t), fade(-t), 255]);
        }
    }
    crate::fsutil::encode_png_rgb(delta.width(), delta.height(), &px).expect("in-memory png")
}
