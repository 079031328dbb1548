//! Binary PGM (P5) and PPM (P6) image IO, mask files, and the centroid
//! overlay writer.
//!
//! Masks are stored as PGM with foreground written as 255; on read, any
//! nonzero pixel counts as foreground.

use std::path::Path;

use mdn_ik_core::vision::{Blob, ImageBuf, SegMask};

#[derive(Debug, thiserror::Error)]
pub enum PnmError {
    #[error("image io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Bad(String),
    #[error("unsupported magic '{0}'; only binary P5/P6 are supported")]
    UnsupportedMagic(String),
    #[error(transparent)]
    Vision(#[from] mdn_ik_core::vision::VisionError),
}

/// Parse a binary PGM/PPM from bytes.
pub fn parse_pnm(bytes: &[u8]) -> Result<ImageBuf, PnmError> {
    let mut cursor = 0usize;
    let magic = next_token(bytes, &mut cursor)
        .ok_or_else(|| PnmError::Bad("missing magic number".to_string()))?;
    let channels = match magic.as_str() {
        "P5" => 1u8,
        "P6" => 3u8,
        other => return Err(PnmError::UnsupportedMagic(other.to_string())),
    };
    let mut dims = [0usize; 3];
    for slot in &mut dims {
        let token = next_token(bytes, &mut cursor)
            .ok_or_else(|| PnmError::Bad("truncated header".to_string()))?;
        *slot = token
            .parse()
            .map_err(|_| PnmError::Bad(format!("bad header token '{token}'")))?;
    }
    let [width, height, maxval] = dims;
    if maxval == 0 || maxval > 255 {
        return Err(PnmError::Bad(format!(
            "maxval {maxval} unsupported (must be 1..=255)"
        )));
    }
    let expected = width * height * channels as usize;
    let raster = bytes
        .get(cursor..cursor + expected)
        .ok_or_else(|| PnmError::Bad("truncated raster".to_string()))?;
    Ok(ImageBuf::new(
        width as u32,
        height as u32,
        channels,
        raster.to_vec(),
    )?)
}

/// One header token, skipping whitespace and `#` comments; consumes the
/// single whitespace byte that terminates the token.
fn next_token(bytes: &[u8], cursor: &mut usize) -> Option<String> {
    loop {
        while *cursor < bytes.len() && bytes[*cursor].is_ascii_whitespace() {
            *cursor += 1;
        }
        if *cursor < bytes.len() && bytes[*cursor] == b'#' {
            while *cursor < bytes.len() && bytes[*cursor] != b'\n' {
                *cursor += 1;
            }
        } else {
            break;
        }
    }
    let start = *cursor;
    while *cursor < bytes.len() && !bytes[*cursor].is_ascii_whitespace() {
        *cursor += 1;
    }
    let end = *cursor;
    if *cursor < bytes.len() {
        *cursor += 1;
    }
    (end > start).then(|| String::from_utf8_lossy(&bytes[start..end]).into_owned())
}

pub fn read_image(path: impl AsRef<Path>) -> Result<ImageBuf, PnmError> {
    parse_pnm(&std::fs::read(path)?)
}

pub fn image_to_pnm(image: &ImageBuf) -> Vec<u8> {
    let magic = if image.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend_from_slice(image.data());
    out
}

pub fn write_image(image: &ImageBuf, path: impl AsRef<Path>) -> Result<(), PnmError> {
    std::fs::write(path, image_to_pnm(image))?;
    Ok(())
}

/// Write a mask as PGM, foreground as 255.
pub fn write_mask(mask: &SegMask, path: impl AsRef<Path>) -> Result<(), PnmError> {
    let data: Vec<u8> = mask
        .data()
        .iter()
        .map(|&v| if v != 0 { 255 } else { 0 })
        .collect();
    write_image(&ImageBuf::gray(mask.width(), mask.height(), data)?, path)
}

/// Read a PGM as a mask; any nonzero pixel is foreground.
pub fn read_mask(path: impl AsRef<Path>) -> Result<SegMask, PnmError> {
    let image = read_image(path)?;
    if image.channels() != 1 {
        return Err(PnmError::Bad(
            "masks must be single-channel PGM".to_string(),
        ));
    }
    Ok(SegMask::from_nonzero(
        image.width(),
        image.height(),
        image.data(),
    )?)
}

/// Render the input image with a green circle marking each blob centroid.
pub fn overlay_image(image: &ImageBuf, blobs: &[Blob]) -> ImageBuf {
    let (w, h) = (image.width(), image.height());
    let mut rgb = Vec::with_capacity(w as usize * h as usize * 3);
    for y in 0..h {
        for x in 0..w {
            if image.channels() == 3 {
                let idx = (y as usize * w as usize + x as usize) * 3;
                rgb.extend_from_slice(&image.data()[idx..idx + 3]);
            } else {
                let v = image.luma_at(x, y);
                rgb.extend_from_slice(&[v, v, v]);
            }
        }
    }
    for blob in blobs {
        draw_circle(&mut rgb, w, h, blob.centroid, 6.0);
        draw_circle(&mut rgb, w, h, blob.centroid, 1.0);
    }
    ImageBuf::rgb(w, h, rgb).expect("dimensions preserved")
}

pub fn write_overlay(
    image: &ImageBuf,
    blobs: &[Blob],
    path: impl AsRef<Path>,
) -> Result<(), PnmError> {
    write_image(&overlay_image(image, blobs), path)
}

fn draw_circle(rgb: &mut [u8], w: u32, h: u32, center: (f64, f64), radius: f64) {
    let (w, h) = (w as i64, h as i64);
    let x0 = ((center.0 - radius - 1.0).floor() as i64).max(0);
    let x1 = ((center.0 + radius + 1.0).ceil() as i64).min(w - 1);
    let y0 = ((center.1 - radius - 1.0).floor() as i64).max(0);
    let y1 = ((center.1 + radius + 1.0).ceil() as i64).min(h - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let dx = x as f64 - center.0;
            let dy = y as f64 - center.1;
            if ((dx * dx + dy * dy).sqrt() - radius).abs() <= 0.75 {
                let idx = ((y * w + x) * 3) as usize;
                rgb[idx] = 0;
                rgb[idx + 1] = 255;
                rgb[idx + 2] = 0;
            }
        }
    }
}
