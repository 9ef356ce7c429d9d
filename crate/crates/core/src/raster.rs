//! Pixel-level primitives shared by every module: 8-bit quantization and the
//! binary [`Mask`] raster.

use image::{GrayImage, Luma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::BBox;

pub type Rgb = [u8; 3];

/// Quantizes a non-negative channel value to 8 bits, rounding half away from zero.
#[inline]
pub fn quantize(v: f64) -> u8 {
    if v.is_nan() || v <= 0.0 {
        0
    } else if v >= 255.0 {
        255
    } else {
        (v + 0.5).floor() as u8
    }
}

#[inline]
pub fn quantize_f32(v: f32) -> u8 {
    if v.is_nan() || v <= 0.0 {
        0
    } else if v >= 255.0 {
        255
    } else {
        (v + 0.5).floor() as u8
    }
}

/// Hex form `rrggbb`.
pub fn rgb_hex(c: Rgb) -> String {
    format!("{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

pub fn parse_rgb_hex(s: &str) -> Option<Rgb> {
    if s.len() != 6 || !s.is_ascii() {
        return None;
    }
    let p = |i: usize| u8::from_str_radix(&s[i..i + 2], 16).ok();
    Some([p(0)?, p(2)?, p(4)?])
}

/// Which side of a canvas an outpainting band hugs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
    Top,
    Bottom,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Top, Side::Bottom];
}

/// Single-channel binary raster. Every pixel is 0 or 255.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask(GrayImage);

impl Mask {
    pub fn new(width: u32, height: u32) -> Self {
        Mask(GrayImage::new(width, height))
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> bool) -> Self {
        Mask(GrayImage::from_fn(width, height, |x, y| {
            Luma([if f(x, y) { 255 } else { 0 }])
        }))
    }

    /// Wraps a gray image, rejecting any value other than 0 and 255.
    pub fn from_gray(img: GrayImage) -> Result<Self> {
        if img.as_raw().iter().any(|&v| v != 0 && v != 255) {
            return Err(Error::InvalidScene("mask values must be 0 or 255".into()));
        }
        Ok(Mask(img))
    }

    /// Foreground wherever `img >= threshold`.
    pub fn threshold(img: &GrayImage, threshold: u8) -> Self {
        let mut out = img.clone();
        for v in out.iter_mut() {
            *v = if *v >= threshold { 255 } else { 0 };
        }
        Mask(out)
    }

    pub fn from_rects(width: u32, height: u32, rects: &[BBox]) -> Self {
        let mut m = Mask::new(width, height);
        for r in rects {
            m.fill_rect(r);
        }
        m
    }

    /// Bands along canvas sides; `frac` is the share of the perpendicular dimension.
    pub fn from_edge_bands(width: u32, height: u32, bands: &[(Side, f64)]) -> Self {
        let mut m = Mask::new(width, height);
        for &(side, frac) in bands {
            let bw = ((width as f64) * frac).round().clamp(0.0, width as f64) as u32;
            let bh = ((height as f64) * frac).round().clamp(0.0, height as f64) as u32;
            let rect = match side {
                Side::Left => BBox::new(0, 0, bw, height),
                Side::Right => BBox::new(width - bw, 0, width, height),
                Side::Top => BBox::new(0, 0, width, bh),
                Side::Bottom => BBox::new(0, height - bh, width, height),
            };
            if let Some(r) = rect {
                m.fill_rect(&r);
            }
        }
        m
    }

    pub fn width(&self) -> u32 {
        self.0.width()
    }

    pub fn height(&self) -> u32 {
        self.0.height()
    }

    pub fn dimensions(&self) -> (u32, u32) {
        self.0.dimensions()
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.0.as_raw()[(y as usize) * (self.0.width() as usize) + x as usize] != 0
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, on: bool) {
        let w = self.0.width() as usize;
        self.0.as_mut()[(y as usize) * w + x as usize] = if on { 255 } else { 0 };
    }

    pub fn fill_rect(&mut self, r: &BBox) {
        let (w, h) = self.dimensions();
        for y in r.y0.min(h)..r.y1.min(h) {
            for x in r.x0.min(w)..r.x1.min(w) {
                self.set(x, y, true);
            }
        }
    }

    pub fn count(&self) -> u64 {
        self.0.as_raw().iter().filter(|&&v| v != 0).count() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.0.as_raw().iter().all(|&v| v == 0)
    }

    pub fn fraction(&self) -> f64 {
        let n = (self.width() as u64 * self.height() as u64).max(1);
        self.count() as f64 / n as f64
    }

    pub fn union_with(&mut self, other: &Mask) {
        debug_assert_eq!(self.dimensions(), other.dimensions());
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a |= *b;
        }
    }

    pub fn intersection_count(&self, other: &Mask) -> u64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .filter(|(a, b)| **a != 0 && **b != 0)
            .count() as u64
    }

    /// Intersection over union; two empty masks count as identical.
    pub fn iou(&self, other: &Mask) -> f64 {
        let inter = self.intersection_count(other);
        let union = self.count() + other.count() - inter;
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// Translates by an integer offset; pixels leaving the raster are dropped.
    pub fn shifted(&self, dx: i64, dy: i64) -> Mask {
        let (w, h) = self.dimensions();
        let mut out = Mask::new(w, h);
        for y in 0..h {
            for x in 0..w {
                if self.get(x, y) {
                    let nx = x as i64 + dx;
                    let ny = y as i64 + dy;
                    if nx >= 0 && ny >= 0 && nx < w as i64 && ny < h as i64 {
                        out.set(nx as u32, ny as u32, true);
                    }
                }
            }
        }
        out
    }

    /// Half-open bounding box of the foreground, `None` when empty.
    pub fn bbox(&self) -> Option<BBox> {
        let (w, h) = self.dimensions();
        let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0u32, 0u32);
        for y in 0..h {
            for x in 0..w {
                if self.get(x, y) {
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x + 1);
                    y1 = y1.max(y + 1);
                }
            }
        }
        BBox::new(x0, y0, x1, y1)
    }

    pub fn iter_on(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width();
        self.0
            .as_raw()
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0)
            .map(move |(i, _)| ((i as u32) % w, (i as u32) / w))
    }

    pub fn as_image(&self) -> &GrayImage {
        &self.0
    }

    pub fn into_image(self) -> GrayImage {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_rounds_half_away() {
        assert_eq!(quantize(127.5), 128);
        assert_eq!(quantize(127.499), 127);
        assert_eq!(quantize(-3.0), 0);
        assert_eq!(quantize(300.0), 255);
    }

    #[test]
    fn hex_round_trip() {
        let c = [1, 128, 255];
        assert_eq!(parse_rgb_hex(&rgb_hex(c)), Some(c));
        assert_eq!(parse_rgb_hex("zz0000"), None);
    }

    #[test]
    fn from_gray_rejects_soft_values() {
        let mut g = GrayImage::new(4, 4);
        g.put_pixel(1, 1, Luma([7]));
        assert!(Mask::from_gray(g).is_err());
    }

    #[test]
    fn edge_band_right_quarter() {
        let m = Mask::from_edge_bands(64, 32, &[(Side::Right, 0.25)]);
        for y in 0..32 {
            for x in 0..64 {
                assert_eq!(m.get(x, y), x >= 48);
            }
        }
    }

    #[test]
    fn shift_and_iou() {
        let m = Mask::from_rects(20, 20, &[BBox::new(2, 2, 6, 6).unwrap()]);
        let s = m.shifted(3, 1);
        assert_eq!(s.bbox(), BBox::new(5, 3, 9, 7));
        assert_eq!(s.shifted(-3, -1), m);
        // overlap is 1 column x 3 rows
        assert!((m.iou(&s) - 3.0 / 29.0).abs() < 1e-12);
    }
}
