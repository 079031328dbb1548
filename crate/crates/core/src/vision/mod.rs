//! Classical plate vision: thresholding, blob extraction, mask metrics.
//!
//! The segmenter is a stand-in detector with two built-ins — fixed
//! threshold and Otsu — behind the same mask type used by externally
//! produced masks, so the downstream pipeline is agnostic to mask origin.
//! Images and masks are immutable once built and all operations are pure,
//! so evaluating a corpus concurrently is safe.

use alloc::vec;
use alloc::vec::Vec;

pub mod camera;

pub use camera::{pixel_to_world, world_to_pixel, CameraError, CameraModel};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VisionError {
    #[error("image is empty")]
    EmptyImage,
    #[error("buffer length {got} does not match {expected} ({width}x{height}x{channels})")]
    BadBufferLength {
        width: u32,
        height: u32,
        channels: u8,
        expected: usize,
        got: usize,
    },
    #[error("mask values must be 0 or 1")]
    BadMaskValue,
    #[error("mask dimensions differ: {a_width}x{a_height} vs {b_width}x{b_height}")]
    DimensionMismatch {
        a_width: u32,
        a_height: u32,
        b_width: u32,
        b_height: u32,
    },
    #[error("unsupported channel count {0}")]
    BadChannels(u8),
}

/// An 8-bit image, grayscale (1 channel) or RGB (3 channels), row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuf {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
}

impl ImageBuf {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Result<Self, VisionError> {
        if !(channels == 1 || channels == 3) {
            return Err(VisionError::BadChannels(channels));
        }
        if width == 0 || height == 0 {
            return Err(VisionError::EmptyImage);
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(VisionError::BadBufferLength {
                width,
                height,
                channels,
                expected,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn gray(width: u32, height: u32, data: Vec<u8>) -> Result<Self, VisionError> {
        Self::new(width, height, 1, data)
    }

    pub fn rgb(width: u32, height: u32, data: Vec<u8>) -> Result<Self, VisionError> {
        Self::new(width, height, 3, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    /// Luma of the pixel at `(x, y)`: the gray value directly, or the
    /// BT.601 weighting `0.299·R + 0.587·G + 0.114·B` rounded to nearest.
    pub fn luma_at(&self, x: u32, y: u32) -> u8 {
        let idx = (y as usize * self.width as usize + x as usize) * self.channels as usize;
        match self.channels {
            1 => self.data[idx],
            _ => luma(self.data[idx], self.data[idx + 1], self.data[idx + 2]),
        }
    }
}

/// BT.601 luma, rounded to nearest.
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64 + 0.5) as u8
}

/// A binary occupancy mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegMask {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl SegMask {
    /// All-background mask.
    pub fn zeros(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0; width as usize * height as usize],
        }
    }

    /// Wrap an existing buffer; every value must be 0 or 1.
    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self, VisionError> {
        let expected = width as usize * height as usize;
        if data.len() != expected {
            return Err(VisionError::BadBufferLength {
                width,
                height,
                channels: 1,
                expected,
                got: data.len(),
            });
        }
        if data.iter().any(|&v| v > 1) {
            return Err(VisionError::BadMaskValue);
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Build from any byte buffer, mapping nonzero to foreground.
    pub fn from_nonzero(width: u32, height: u32, data: &[u8]) -> Result<Self, VisionError> {
        let expected = width as usize * height as usize;
        if data.len() != expected {
            return Err(VisionError::BadBufferLength {
                width,
                height,
                channels: 1,
                expected,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data: data.iter().map(|&v| (v != 0) as u8).collect(),
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: u8) {
        self.data[y as usize * self.width as usize + x as usize] = if value != 0 { 1 } else { 0 };
    }

    /// Number of foreground pixels.
    pub fn popcount(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }

    fn same_dims(&self, other: &Self) -> Result<(), VisionError> {
        if self.width != other.width || self.height != other.height {
            return Err(VisionError::DimensionMismatch {
                a_width: self.width,
                a_height: self.height,
                b_width: other.width,
                b_height: other.height,
            });
        }
        Ok(())
    }
}

/// Which side of the threshold counts as foreground.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    /// Foreground is brighter than the threshold (`luma > t`).
    Bright,
    /// Foreground is darker than the threshold (`luma < t`).
    Dark,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdMethod {
    Fixed(u8),
    /// Threshold chosen by maximizing between-class variance over the
    /// luma histogram.
    Otsu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentSettings {
    pub method: ThresholdMethod,
    pub polarity: Polarity,
}

impl Default for SegmentSettings {
    fn default() -> Self {
        Self {
            method: ThresholdMethod::Otsu,
            polarity: Polarity::Bright,
        }
    }
}

/// Threshold an image into a binary mask.
///
/// RGB input is converted to luma first. With [`Polarity::Bright`] a pixel
/// is foreground iff `luma > t`, so raising the threshold never adds mask
/// pixels.
pub fn segment_threshold(
    image: &ImageBuf,
    settings: &SegmentSettings,
) -> Result<SegMask, VisionError> {
    let (w, h) = (image.width(), image.height());
    let mut lumas = Vec::with_capacity(w as usize * h as usize);
    for y in 0..h {
        for x in 0..w {
            lumas.push(image.luma_at(x, y));
        }
    }
    let threshold = match settings.method {
        ThresholdMethod::Fixed(t) => t,
        ThresholdMethod::Otsu => {
            let mut hist = [0u64; 256];
            for &v in &lumas {
                hist[v as usize] += 1;
            }
            otsu_threshold(&hist)
        }
    };
    let data = lumas
        .iter()
        .map(|&v| match settings.polarity {
            Polarity::Bright => (v > threshold) as u8,
            Polarity::Dark => (v < threshold) as u8,
        })
        .collect();
    Ok(SegMask {
        width: w,
        height: h,
        data,
    })
}

/// Otsu's threshold over a 256-bin histogram.
///
/// Maximizes the between-class variance of the split `luma <= t` versus
/// `luma > t`; ties across a plateau resolve to the plateau midpoint, so a
/// clean bimodal histogram yields a threshold strictly between the modes.
pub fn otsu_threshold(hist: &[u64; 256]) -> u8 {
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return 127;
    }
    let total_f = total as f64;
    let weighted_sum: f64 = hist
        .iter()
        .enumerate()
        .map(|(v, &count)| v as f64 * count as f64)
        .sum();

    let mut background = 0.0f64;
    let mut background_sum = 0.0f64;
    let mut best = f64::NEG_INFINITY;
    let mut plateau_lo = 0usize;
    let mut plateau_hi = 0usize;
    for (t, &count) in hist.iter().enumerate().take(255) {
        background += count as f64;
        background_sum += t as f64 * count as f64;
        let foreground = total_f - background;
        if background == 0.0 || foreground == 0.0 {
            continue;
        }
        let mean_b = background_sum / background;
        let mean_f = (weighted_sum - background_sum) / foreground;
        let variance = background * foreground * (mean_b - mean_f) * (mean_b - mean_f);
        if variance > best {
            best = variance;
            plateau_lo = t;
            plateau_hi = t;
        } else if variance == best {
            plateau_hi = t;
        }
    }
    if best == f64::NEG_INFINITY {
        // Single-value histogram: no split exists.
        return 127;
    }
    ((plateau_lo + plateau_hi) / 2) as u8
}

/// Inclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundingBox {
    pub min_x: u32,
    pub min_y: u32,
    pub max_x: u32,
    pub max_y: u32,
}

impl BoundingBox {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x as f64
            && x <= self.max_x as f64
            && y >= self.min_y as f64
            && y <= self.max_y as f64
    }
}

/// A connected foreground component.
#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    pub pixel_count: usize,
    /// Sub-pixel centroid `(u, v)`: the arithmetic mean of member pixel
    /// coordinates.
    pub centroid: (f64, f64),
    pub bounding_box: BoundingBox,
}

/// Extract 8-connected components with at least `min_area` pixels.
///
/// Blobs are sorted by descending pixel count; ties resolve by the
/// bounding box's top-left corner in row-major order.
pub fn find_blobs(mask: &SegMask, min_area: usize) -> Vec<Blob> {
    let w = mask.width as usize;
    let h = mask.height as usize;
    let mut visited = vec![false; w * h];
    let mut stack: Vec<(usize, usize)> = Vec::new();
    let mut blobs = Vec::new();

    for start_y in 0..h {
        for start_x in 0..w {
            let start = start_y * w + start_x;
            if visited[start] || mask.data[start] == 0 {
                continue;
            }
            visited[start] = true;
            stack.push((start_x, start_y));
            let mut count = 0usize;
            let mut sum_x = 0.0f64;
            let mut sum_y = 0.0f64;
            let (mut min_x, mut min_y, mut max_x, mut max_y) =
                (start_x, start_y, start_x, start_y);

            while let Some((x, y)) = stack.pop() {
                count += 1;
                sum_x += x as f64;
                sum_y += y as f64;
                min_x = min_x.min(x);
                min_y = min_y.min(y);
                max_x = max_x.max(x);
                max_y = max_y.max(y);

                let x0 = x.saturating_sub(1);
                let y0 = y.saturating_sub(1);
                for ny in y0..=(y + 1).min(h - 1) {
                    for nx in x0..=(x + 1).min(w - 1) {
                        let idx = ny * w + nx;
                        if !visited[idx] && mask.data[idx] != 0 {
                            visited[idx] = true;
                            stack.push((nx, ny));
                        }
                    }
                }
            }

            if count >= min_area {
                blobs.push(Blob {
                    pixel_count: count,
                    centroid: (sum_x / count as f64, sum_y / count as f64),
                    bounding_box: BoundingBox {
                        min_x: min_x as u32,
                        min_y: min_y as u32,
                        max_x: max_x as u32,
                        max_y: max_y as u32,
                    },
                });
            }
        }
    }

    blobs.sort_by(|a, b| {
        b.pixel_count.cmp(&a.pixel_count).then_with(|| {
            (a.bounding_box.min_y, a.bounding_box.min_x)
                .cmp(&(b.bounding_box.min_y, b.bounding_box.min_x))
        })
    });
    blobs
}

/// Mask-overlap quality scores; all values lie in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub iou: f64,
    pub dice: f64,
    pub pixel_accuracy: f64,
}

/// Intersection-over-union, Dice coefficient and pixel accuracy between a
/// predicted and a ground-truth mask. Two empty masks score 1.0 on all
/// three.
pub fn metrics(pred: &SegMask, truth: &SegMask) -> Result<MetricReport, VisionError> {
    pred.same_dims(truth)?;
    let mut intersection = 0u64;
    let mut pred_count = 0u64;
    let mut truth_count = 0u64;
    let mut matches = 0u64;
    for (&p, &t) in pred.data.iter().zip(&truth.data) {
        intersection += (p & t) as u64;
        pred_count += p as u64;
        truth_count += t as u64;
        matches += (p == t) as u64;
    }
    let union = pred_count + truth_count - intersection;
    let iou = if union == 0 {
        1.0
    } else {
        intersection as f64 / union as f64
    };
    let dice = if pred_count + truth_count == 0 {
        1.0
    } else {
        2.0 * intersection as f64 / (pred_count + truth_count) as f64
    };
    let total = pred.data.len() as f64;
    Ok(MetricReport {
        iou,
        dice,
        pixel_accuracy: matches as f64 / total,
    })
}
