use std::path::Path;

use crate::error::{Error, Result};

const BINS: usize = 64;

/// 64-bin histogram per RGB channel, concatenated (192 values), each bin
/// holding the fraction of pixels that fall into it.
pub fn histogram_feature(path: &Path) -> Result<Vec<f32>> {
    let img =
        image::open(path).map_err(|e| Error::invalid(format!("cannot read frame {}: {e}", path.display())))?.to_rgb8();
    Ok(histogram_of(&img))
}

pub(crate) fn histogram_of(img: &image::RgbImage) -> Vec<f32> {
    let mut hist = vec![0u64; BINS * 3];
    for px in img.pixels() {
        for (c, &v) in px.0.iter().enumerate() {
            hist[c * BINS + (v as usize * BINS / 256)] += 1;
        }
    }
    let total = (img.width() as u64 * img.height() as u64).max(1) as f32;
    hist.into_iter().map(|n| n as f32 / total).collect()
}
