//! Assets synthesized from their id instead of loaded from disk.
//!
//! * `shape:<circle|square|triangle>:<rrggbb>:<size>`
//! * `text:<font>:<size>:<thickness>:<rrggbb>:<text>`
//!
//! Scenes reference these ids like any other asset, so geometry, compositing
//! and replay treat vector shapes and rendered words uniformly.

use std::fmt;
use std::str::FromStr;

use image::{Rgba, RgbaImage};
use serde::{Deserialize, Serialize};

use super::{Asset, AssetCatalog, AssetKind};
use crate::error::{Error, Result};
use crate::raster::{parse_rgb_hex, quantize, rgb_hex, Rgb};

const SUPERSAMPLE: u32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Circle,
    Square,
    Triangle,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 3] = [ShapeKind::Circle, ShapeKind::Square, ShapeKind::Triangle];

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Circle => "circle",
            ShapeKind::Square => "square",
            ShapeKind::Triangle => "triangle",
        }
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ShapeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownAsset(format!("shape:{s}")))
    }
}

pub fn shape_id(kind: ShapeKind, color: Rgb, size: u32) -> String {
    format!("shape:{}:{}:{}", kind.name(), rgb_hex(color), size)
}

fn inside_shape(kind: ShapeKind, size: f64, x: f64, y: f64) -> bool {
    // shape occupies [1, size + 1]^2
    let (u, v) = (x - 1.0, y - 1.0);
    match kind {
        ShapeKind::Circle => {
            let r = size / 2.0;
            (u - r).powi(2) + (v - r).powi(2) <= r * r
        }
        ShapeKind::Square => (0.0..=size).contains(&u) && (0.0..=size).contains(&v),
        ShapeKind::Triangle => {
            if !(0.0..=size).contains(&v) {
                return false;
            }
            let half = 0.5 * size * v / size;
            (u - size / 2.0).abs() <= half
        }
    }
}

/// Anti-aliased solid shape with a one-pixel transparent margin.
pub fn rasterize_shape(kind: ShapeKind, color: Rgb, size: u32) -> RgbaImage {
    let side = size + 2;
    let s = size as f64;
    let n = (SUPERSAMPLE * SUPERSAMPLE) as f64;
    RgbaImage::from_fn(side, side, |x, y| {
        let mut hits = 0u32;
        for sy in 0..SUPERSAMPLE {
            for sx in 0..SUPERSAMPLE {
                let px = x as f64 + (sx as f64 + 0.5) / SUPERSAMPLE as f64;
                let py = y as f64 + (sy as f64 + 0.5) / SUPERSAMPLE as f64;
                hits += inside_shape(kind, s, px, py) as u32;
            }
        }
        let a = quantize(255.0 * hits as f64 / n);
        if a == 0 {
            Rgba([0, 0, 0, 0])
        } else {
            Rgba([color[0], color[1], color[2], a])
        }
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextStyle {
    pub font: String,
    /// Glyph cell height in pixels.
    pub size: u32,
    /// Stroke weight, 1 = the font's native weight.
    pub thickness: u32,
    pub color: Rgb,
}

pub fn text_id(style: &TextStyle, text: &str) -> String {
    format!(
        "text:{}:{}:{}:{}:{}",
        style.font,
        style.size,
        style.thickness,
        rgb_hex(style.color),
        text
    )
}

/// Extra pixels each side of a stroke for a given thickness and size.
pub fn dilation_radius(thickness: u32, size: u32) -> u32 {
    thickness.saturating_sub(1) * (size / 32).max(1)
}

/// Lays `text` out on one line from the catalog's glyphs for `style.font`.
pub fn rasterize_text(catalog: &AssetCatalog, style: &TextStyle, text: &str) -> Result<RgbaImage> {
    if catalog.fonts().all(|f| f != style.font) {
        return Err(Error::NoFont);
    }
    let size = style.size.max(4);
    let gap = (size / 10).max(1);
    let space = size / 2;
    // scaled alpha planes per character
    let mut pieces: Vec<Option<(u32, Vec<u8>)>> = Vec::new();
    for ch in text.chars() {
        if ch == ' ' {
            pieces.push(None);
            continue;
        }
        let glyph = catalog
            .glyph(&style.font, ch)
            .or_else(|| catalog.glyph(&style.font, ch.to_ascii_uppercase()))
            .ok_or_else(|| Error::UnknownAsset(format!("glyph {ch:?} in font {}", style.font)))?;
        let (gw, gh) = glyph.pixels.dimensions();
        let w = ((gw as f64) * size as f64 / gh as f64).round().max(1.0) as u32;
        let mut plane = vec![0u8; (w * size) as usize];
        for y in 0..size {
            let sy = (((y as f64 + 0.5) * gh as f64 / size as f64) as u32).min(gh - 1);
            for x in 0..w {
                let sx = (((x as f64 + 0.5) * gw as f64 / w as f64) as u32).min(gw - 1);
                plane[(y * w + x) as usize] = glyph.pixels.get_pixel(sx, sy)[3];
            }
        }
        pieces.push(Some((w, plane)));
    }
    let line_w: u32 = pieces
        .iter()
        .map(|p| p.as_ref().map_or(space, |(w, _)| *w))
        .sum::<u32>()
        + gap * pieces.len().saturating_sub(1) as u32;
    let r = dilation_radius(style.thickness, size);
    let pad = r + 2;
    let (out_w, out_h) = (line_w + 2 * pad, size + 2 * pad);
    let mut alpha = vec![0u8; (out_w * out_h) as usize];
    let mut cursor = pad;
    for piece in &pieces {
        match piece {
            None => cursor += space + gap,
            Some((w, plane)) => {
                for y in 0..size {
                    for x in 0..*w {
                        let a = plane[(y * w + x) as usize];
                        let idx = ((y + pad) * out_w + cursor + x) as usize;
                        alpha[idx] = alpha[idx].max(a);
                    }
                }
                cursor += w + gap;
            }
        }
    }
    if r > 0 {
        alpha = dilate(&alpha, out_w, out_h, r);
    }
    let c = style.color;
    Ok(RgbaImage::from_fn(out_w, out_h, |x, y| {
        let a = alpha[(y * out_w + x) as usize];
        if a == 0 {
            Rgba([0, 0, 0, 0])
        } else {
            Rgba([c[0], c[1], c[2], a])
        }
    }))
}

// separable square max filter
fn dilate(src: &[u8], w: u32, h: u32, r: u32) -> Vec<u8> {
    let (w, h, r) = (w as usize, h as usize, r as usize);
    let mut tmp = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            let lo = x.saturating_sub(r);
            let hi = (x + r).min(w - 1);
            tmp[y * w + x] = src[y * w + lo..=y * w + hi].iter().copied().max().unwrap_or(0);
        }
    }
    let mut out = vec![0u8; w * h];
    for y in 0..h {
        let lo = y.saturating_sub(r);
        let hi = (y + r).min(h - 1);
        for x in 0..w {
            out[y * w + x] = (lo..=hi).map(|yy| tmp[yy * w + x]).max().unwrap_or(0);
        }
    }
    out
}

pub(crate) fn synthesize(catalog: &AssetCatalog, id: &str) -> Result<Asset> {
    let unknown = || Error::UnknownAsset(id.to_owned());
    if let Some(rest) = id.strip_prefix("shape:") {
        let mut it = rest.splitn(3, ':');
        let kind: ShapeKind = it.next().ok_or_else(unknown)?.parse().map_err(|_| unknown())?;
        let color = it.next().and_then(parse_rgb_hex).ok_or_else(unknown)?;
        let size: u32 = it.next().and_then(|s| s.parse().ok()).ok_or_else(unknown)?;
        if !(6..=4096).contains(&size) {
            return Err(unknown());
        }
        return Ok(Asset::new(
            id,
            AssetKind::Sticker,
            vec![kind.name().to_owned()],
            rasterize_shape(kind, color, size),
        ));
    }
    if let Some(rest) = id.strip_prefix("text:") {
        let mut it = rest.splitn(5, ':');
        let font = it.next().ok_or_else(unknown)?.to_owned();
        let size: u32 = it.next().and_then(|s| s.parse().ok()).ok_or_else(unknown)?;
        let thickness: u32 = it.next().and_then(|s| s.parse().ok()).ok_or_else(unknown)?;
        let color = it.next().and_then(parse_rgb_hex).ok_or_else(unknown)?;
        let text = it.next().ok_or_else(unknown)?;
        if text.trim().is_empty() || !(4..=1024).contains(&size) || !(1..=16).contains(&thickness) {
            return Err(unknown());
        }
        let style = TextStyle {
            font,
            size,
            thickness,
            color,
        };
        let pixels = rasterize_text(catalog, &style, text)?;
        return Ok(Asset::new(id, AssetKind::Sticker, vec!["text".to_owned()], pixels));
    }
    Err(unknown())
}
