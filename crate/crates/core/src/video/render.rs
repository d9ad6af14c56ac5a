//! Visual prompting: burns detection boxes and their labels into a copy of
//! the frame image so a multimodal model sees them.

use std::fs;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};

use super::Annotation;
use crate::error::{Error, Result};

pub trait AnnotationRenderer: Send + Sync {
    /// Writes an annotated copy of `image_path` and returns its path.
    fn render(&self, image_path: &str, annotations: &[Annotation]) -> Result<String>;
}

/// Draws box outlines with a filled label bar above each box.
#[derive(Debug, Clone)]
pub struct BoxRenderer {
    pub out_dir: PathBuf,
    pub color: [u8; 3],
    pub thickness: u32,
}

impl BoxRenderer {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        BoxRenderer { out_dir: out_dir.into(), color: [255, 32, 32], thickness: 2 }
    }
}

impl AnnotationRenderer for BoxRenderer {
    fn render(&self, image_path: &str, annotations: &[Annotation]) -> Result<String> {
        let mut img =
            image::open(image_path).map_err(|e| Error::invalid(format!("cannot read {image_path}: {e}")))?.to_rgb8();
        for a in annotations {
            draw_annotation(&mut img, a, Rgb(self.color), self.thickness);
        }
        fs::create_dir_all(&self.out_dir)?;
        let stem = Path::new(image_path)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "frame".into());
        let out = self.out_dir.join(format!("{stem}.annotated.png"));
        img.save(&out).map_err(|e| Error::invalid(format!("cannot write {}: {e}", out.display())))?;
        Ok(out.to_string_lossy().into_owned())
    }
}

pub(crate) fn draw_annotation(img: &mut RgbImage, a: &Annotation, color: Rgb<u8>, thickness: u32) {
    let (w, h) = (img.width() as f64, img.height() as f64);
    let x0 = (a.bbox.x * w).floor() as i64;
    let y0 = (a.bbox.y * h).floor() as i64;
    let x1 = ((a.bbox.x + a.bbox.w) * w).ceil() as i64 - 1;
    let y1 = ((a.bbox.y + a.bbox.h) * h).ceil() as i64 - 1;
    for t in 0..thickness as i64 {
        for x in x0..=x1 {
            put(img, x, y0 + t, color);
            put(img, x, y1 - t, color);
        }
        for y in y0..=y1 {
            put(img, x0 + t, y, color);
            put(img, x1 - t, y, color);
        }
    }

    // label bar sits just above the box, or inside it at the top edge
    let text = a.label.to_uppercase();
    let bar_h = GLYPH_H as i64 + 2;
    let bar_w = text.chars().count() as i64 * (GLYPH_W as i64 + 1) + 1;
    let bar_y = if y0 - bar_h >= 0 { y0 - bar_h } else { y0 };
    for y in bar_y..bar_y + bar_h {
        for x in x0..x0 + bar_w {
            put(img, x, y, color);
        }
    }
    let white = Rgb([255, 255, 255]);
    for (i, ch) in text.chars().enumerate() {
        let gx = x0 + 1 + i as i64 * (GLYPH_W as i64 + 1);
        let rows = glyph(ch);
        for (ry, row) in rows.iter().enumerate() {
            for cx in 0..GLYPH_W {
                if row & (1 << (GLYPH_W - 1 - cx)) != 0 {
                    put(img, gx + cx as i64, bar_y + 1 + ry as i64, white);
                }
            }
        }
    }
}

fn put(img: &mut RgbImage, x: i64, y: i64, color: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, color);
    }
}

const GLYPH_W: u32 = 5;
const GLYPH_H: u32 = 7;

fn glyph(c: char) -> [u8; 7] {
    match c {
        'A' => [0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'B' => [0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E],
        'C' => [0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E],
        'D' => [0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E],
        'E' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F],
        'F' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10],
        'G' => [0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F],
        'H' => [0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'I' => [0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E],
        'J' => [0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C],
        'K' => [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11],
        'L' => [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F],
        'M' => [0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11],
        'N' => [0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11],
        'O' => [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'P' => [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10],
        'Q' => [0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D],
        'R' => [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11],
        'S' => [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E],
        'T' => [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04],
        'U' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'V' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04],
        'W' => [0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A],
        'X' => [0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11],
        'Y' => [0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04],
        'Z' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F],
        '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
        '3' => [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        ' ' => [0; 7],
        '-' => [0, 0, 0, 0x1F, 0, 0, 0],
        '.' => [0, 0, 0, 0, 0, 0x0C, 0x0C],
        _ => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x00, 0x04],
    }
}
