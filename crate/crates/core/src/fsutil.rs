//! Small file helpers shared by the persistence code.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

/// Writes `bytes` to a sibling temp file and renames it over `path`, so a
/// failed write never leaves a partial file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let file_name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        file_name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

pub(crate) fn encode_png_gray(
    width: usize,
    height: usize,
    pixels: &[u8],
) -> Result<Vec<u8>, image::ImageError> {
    encode_png(width, height, pixels, image::ExtendedColorType::L8)
}

pub(crate) fn encode_png_rgb(
    width: usize,
    height: usize,
    pixels: &[u8],
) -> Result<Vec<u8>, image::ImageError> {
    encode_png(width, height, pixels, image::ExtendedColorType::Rgb8)
}

fn encode_png(
    width: usize,
    height: usize,
    pixels: &[u8],
    color: image::ExtendedColorType,
) -> Result<Vec<u8>, image::ImageError> {
    use image::ImageEncoder;

    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out).write_image(
        pixels,
        width as u32,
        height as u32,
        color,
    )?;
    Ok(out)
}

/// 64-bit FNV-1a, used for layout fingerprints stored in model headers.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
