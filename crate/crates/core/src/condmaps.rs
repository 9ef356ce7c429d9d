//! Condition maps (edges, layer depth, segmentation colors), editing masks,
//! and detection/segmentation target drawing.

use std::collections::VecDeque;

use image::{GrayImage, Luma, Rgb as RgbPx, RgbImage};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::assets::AssetCatalog;
use crate::error::{Error, Result};
use crate::raster::{quantize, Mask, Rgb, Side};
use crate::render::{rasterize_layers, OwnerMap};
use crate::scene::{uniform, uniform_u32, BBox, Scene};

pub const CANNY_LOW: f32 = 50.0;
pub const CANNY_HIGH: f32 = 150.0;
pub const INPAINT_FILL: u8 = 128;

/// 32 well-separated colors; entry 0 is the background.
#[rustfmt::skip]
pub const PALETTE: [Rgb; 32] = [
    [0, 0, 0],       [230, 25, 75],   [60, 180, 75],   [255, 225, 25],
    [0, 130, 200],   [245, 130, 48],  [145, 30, 180],  [70, 240, 240],
    [240, 50, 230],  [210, 245, 60],  [250, 190, 212], [0, 128, 128],
    [220, 190, 255], [170, 110, 40],  [255, 250, 200], [128, 0, 0],
    [170, 255, 195], [128, 128, 0],   [255, 215, 180], [0, 0, 128],
    [128, 128, 128], [255, 255, 255], [100, 0, 60],    [0, 80, 0],
    [60, 60, 160],   [255, 100, 100], [100, 200, 255], [200, 100, 0],
    [0, 200, 130],   [180, 180, 60],  [90, 40, 20],    [160, 0, 255],
];

fn luma(img: &RgbImage) -> Vec<f32> {
    img.pixels()
        .map(|p| 0.299 * p[0] as f32 + 0.587 * p[1] as f32 + 0.114 * p[2] as f32)
        .collect()
}

fn gaussian5(sigma: f32) -> [f32; 5] {
    let mut k = [0f32; 5];
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f32 - 2.0;
        *v = (-d * d / (2.0 * sigma * sigma)).exp();
    }
    let s: f32 = k.iter().sum();
    k.map(|v| v / s)
}

fn blur(src: &[f32], w: usize, h: usize) -> Vec<f32> {
    let k = gaussian5(1.4);
    let mut tmp = vec![0f32; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                let xx = (x as isize + i as isize - 2).clamp(0, w as isize - 1) as usize;
                acc += kv * row[xx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                let yy = (y as isize + i as isize - 2).clamp(0, h as isize - 1) as usize;
                acc += kv * tmp[yy * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Classic Canny. Thresholds apply to the Sobel magnitude of the blurred luma.
pub fn canny(image: &RgbImage, low: f32, high: f32) -> Mask {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let mut out = Mask::new(w as u32, h as u32);
    if w < 3 || h < 3 {
        return out;
    }
    let g = blur(&luma(image), w, h);
    let mut mag = vec![0f32; w * h];
    let mut dir = vec![0u8; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let p = |dx: isize, dy: isize| g[(y as isize + dy) as usize * w + (x as isize + dx) as usize];
            let gx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            let gy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            mag[y * w + x] = (gx * gx + gy * gy).sqrt();
            let mut deg = gy.atan2(gx).to_degrees();
            if deg < 0.0 {
                deg += 180.0;
            }
            dir[y * w + x] = if !(22.5..157.5).contains(&deg) {
                0
            } else if deg < 67.5 {
                1
            } else if deg < 112.5 {
                2
            } else {
                3
            };
        }
    }
    const STEP: [(isize, isize); 4] = [(1, 0), (1, 1), (0, 1), (-1, 1)];
    // 0 = none, 1 = weak, 2 = strong
    let mut class = vec![0u8; w * h];
    let mut queue = VecDeque::new();
    for y in 2..h - 2 {
        for x in 2..w - 2 {
            let i = y * w + x;
            let m = mag[i];
            if m < low {
                continue;
            }
            let (sx, sy) = STEP[dir[i] as usize];
            let fwd = mag[(y as isize + sy) as usize * w + (x as isize + sx) as usize];
            let back = mag[(y as isize - sy) as usize * w + (x as isize - sx) as usize];
            // asymmetric tie-break keeps exactly one pixel of a symmetric ridge
            if m > back && m >= fwd {
                class[i] = if m >= high { 2 } else { 1 };
                if class[i] == 2 {
                    queue.push_back(i);
                }
            }
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = (i % w, i / w);
        out.set(x as u32, y as u32, true);
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                let j = (y as isize + dy) as usize * w + (x as isize + dx) as usize;
                if class[j] == 1 {
                    class[j] = 2;
                    queue.push_back(j);
                }
            }
        }
    }
    out
}

fn owner_map(scene: &Scene, catalog: &AssetCatalog) -> Result<OwnerMap> {
    let layers = rasterize_layers(scene, catalog)?;
    Ok(OwnerMap::build(scene.canvas(), &layers))
}

/// Gray level of the topmost visible layer's rank: 0 for background up to
/// 255 for the topmost of L layers.
pub fn depth_from_owners(owners: &OwnerMap, canvas: (u32, u32), layers: usize) -> GrayImage {
    let lut: Vec<u8> = (0..=layers)
        .map(|r| if layers == 0 { 0 } else { quantize(255.0 * r as f64 / layers as f64) })
        .collect();
    GrayImage::from_fn(canvas.0, canvas.1, |x, y| Luma([lut[owners.owner(x, y) as usize]]))
}

pub fn depth_map(scene: &Scene, catalog: &AssetCatalog) -> Result<GrayImage> {
    let owners = owner_map(scene, catalog)?;
    Ok(depth_from_owners(&owners, scene.canvas(), scene.placements.len()))
}

pub fn seg_from_owners(owners: &OwnerMap, layers: usize, palette: &[Rgb]) -> Result<RgbImage> {
    if palette.len() < layers + 1 {
        return Err(Error::PaletteTooSmall {
            available: palette.len(),
            required: layers + 1,
        });
    }
    Ok(owners.map_colors(|o| palette[o as usize]))
}

pub fn seg_map(scene: &Scene, catalog: &AssetCatalog, palette: &[Rgb]) -> Result<RgbImage> {
    if palette.len() < scene.placements.len() + 1 {
        return Err(Error::PaletteTooSmall {
            available: palette.len(),
            required: scene.placements.len() + 1,
        });
    }
    seg_from_owners(&owner_map(scene, catalog)?, scene.placements.len(), palette)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskKind {
    Smear,
    Block,
    Edge,
}

impl MaskKind {
    pub const ALL: [MaskKind; 3] = [MaskKind::Smear, MaskKind::Block, MaskKind::Edge];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskParams {
    pub strokes: (u32, u32),
    /// Brush radius as a fraction of the shorter side.
    pub radius_frac: (f64, f64),
    pub steps: (u32, u32),
    pub rects: (u32, u32),
    /// Per-rectangle area as a fraction of the canvas.
    pub rect_area_frac: (f64, f64),
    pub sides: (u32, u32),
    pub band_frac: (f64, f64),
    /// Accepted foreground fraction for smear and block masks.
    pub fraction: (f64, f64),
}

impl Default for MaskParams {
    fn default() -> Self {
        MaskParams {
            strokes: (1, 5),
            radius_frac: (0.02, 0.08),
            steps: (20, 200),
            rects: (1, 4),
            rect_area_frac: (0.02, 0.25),
            sides: (1, 4),
            band_frac: (0.1, 0.4),
            fraction: (0.02, 0.6),
        }
    }
}

pub const MASK_ATTEMPTS: usize = 100;

fn stamp_disk(m: &mut Mask, cx: f64, cy: f64, r: f64) {
    let (w, h) = m.dimensions();
    let x0 = (cx - r).floor().max(0.0) as u32;
    let y0 = (cy - r).floor().max(0.0) as u32;
    let x1 = ((cx + r).ceil() as u32).min(w - 1);
    let y1 = ((cy + r).ceil() as u32).min(h - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
            if dx * dx + dy * dy <= r * r {
                m.set(x, y, true);
            }
        }
    }
}

/// One random-walk brush stroke; consecutive stamps overlap so the stroke is
/// 4-connected.
pub(crate) fn smear_stroke(rng: &mut impl Rng, size: (u32, u32), params: &MaskParams) -> Mask {
    let (w, h) = size;
    let min_side = w.min(h) as f64;
    let r = (uniform(rng, params.radius_frac) * min_side).max(2.0);
    let steps = uniform_u32(rng, params.steps);
    let mut m = Mask::new(w, h);
    let mut x = rng.random_range(0.0..w as f64);
    let mut y = rng.random_range(0.0..h as f64);
    let mut heading = rng.random_range(0.0..std::f64::consts::TAU);
    stamp_disk(&mut m, x, y, r);
    for _ in 0..steps {
        heading += rng.random_range(-0.6..0.6);
        let len = rng.random_range(0.25..0.5) * r;
        x = (x + len * heading.cos()).clamp(0.5, w as f64 - 0.5);
        y = (y + len * heading.sin()).clamp(0.5, h as f64 - 0.5);
        stamp_disk(&mut m, x, y, r);
    }
    m
}

fn block_rect(rng: &mut impl Rng, size: (u32, u32), params: &MaskParams) -> BBox {
    let (w, h) = size;
    let area = uniform(rng, params.rect_area_frac) * w as f64 * h as f64;
    let aspect = rng.random_range(0.5f64..2.0);
    let rw = ((area * aspect).sqrt().round() as u32).clamp(1, w);
    let rh = ((area / rw as f64).round() as u32).clamp(1, h);
    let x0 = rng.random_range(0..=w - rw);
    let y0 = rng.random_range(0..=h - rh);
    BBox::new(x0, y0, x0 + rw, y0 + rh).expect("non-empty rect")
}

fn draw_mask(kind: MaskKind, rng: &mut impl Rng, size: (u32, u32), params: &MaskParams) -> Mask {
    match kind {
        MaskKind::Smear => {
            let n = uniform_u32(rng, params.strokes);
            let mut m = Mask::new(size.0, size.1);
            for _ in 0..n {
                m.union_with(&smear_stroke(rng, size, params));
            }
            m
        }
        MaskKind::Block => {
            let n = uniform_u32(rng, params.rects);
            let rects: Vec<BBox> = (0..n).map(|_| block_rect(rng, size, params)).collect();
            Mask::from_rects(size.0, size.1, &rects)
        }
        MaskKind::Edge => {
            let n = uniform_u32(rng, params.sides).clamp(1, 4) as usize;
            let mut sides = Side::ALL.to_vec();
            let mut bands = Vec::with_capacity(n);
            for _ in 0..n {
                let s = sides.remove(rng.random_range(0..sides.len()));
                bands.push((s, uniform(rng, params.band_frac)));
            }
            Mask::from_edge_bands(size.0, size.1, &bands)
        }
    }
}

/// Random editing mask. Smear and block masks are redrawn until the
/// foreground fraction is inside `params.fraction`; after the attempt cap a
/// centered block of the mid fraction is used.
pub fn gen_mask(kind: MaskKind, rng: &mut impl Rng, size: (u32, u32), params: &MaskParams) -> Mask {
    let (lo, hi) = params.fraction;
    for _ in 0..MASK_ATTEMPTS {
        let m = draw_mask(kind, rng, size, params);
        let f = m.fraction();
        let ok = match kind {
            MaskKind::Edge => f > 0.0 && f < 1.0,
            _ => (lo..=hi).contains(&f),
        };
        if ok {
            return m;
        }
    }
    let (w, h) = size;
    let side = ((lo + hi) / 2.0).sqrt();
    let rw = ((w as f64 * side).round() as u32).max(1);
    let rh = ((h as f64 * side).round() as u32).max(1);
    let r = BBox::new((w - rw) / 2, (h - rh) / 2, (w - rw) / 2 + rw, (h - rh) / 2 + rh).expect("non-empty");
    Mask::from_rects(w, h, &[r])
}

/// Copy of `image` with masked pixels set to the inpainting fill value.
pub fn apply_fill(image: &RgbImage, mask: &Mask) -> Result<RgbImage> {
    if image.dimensions() != mask.dimensions() {
        return Err(Error::DimensionMismatch {
            left: image.dimensions(),
            right: mask.dimensions(),
        });
    }
    let mut out = image.clone();
    for (x, y) in mask.iter_on() {
        out.put_pixel(x, y, RgbPx([INPAINT_FILL; 3]));
    }
    Ok(out)
}

/// Pixels covered by a frame of `thickness` drawn inside `bbox` (clipped to the canvas).
pub fn frame_region(canvas: (u32, u32), bbox: &BBox, thickness: u32) -> Result<BBox> {
    let b = BBox::new(bbox.x0, bbox.y0, bbox.x1.min(canvas.0), bbox.y1.min(canvas.1)).ok_or(Error::DegenerateBox)?;
    if thickness == 0 {
        return Err(Error::DegenerateBox);
    }
    Ok(b)
}

pub fn draw_bbox(image: &RgbImage, bbox: &BBox, color: Rgb, thickness: u32) -> Result<RgbImage> {
    let b = frame_region(image.dimensions(), bbox, thickness)?;
    let mut out = image.clone();
    let t = thickness;
    for y in b.y0..b.y1 {
        for x in b.x0..b.x1 {
            let on_frame = x < b.x0 + t || x + t >= b.x1 || y < b.y0 + t || y + t >= b.y1;
            if on_frame {
                out.put_pixel(x, y, RgbPx(color));
            }
        }
    }
    Ok(out)
}

pub fn color_highlight(image: &RgbImage, mask: &Mask, color: Rgb, opacity: f64) -> Result<RgbImage> {
    if image.dimensions() != mask.dimensions() {
        return Err(Error::DimensionMismatch {
            left: image.dimensions(),
            right: mask.dimensions(),
        });
    }
    let o = opacity.clamp(0.0, 1.0);
    let mut out = image.clone();
    for (x, y) in mask.iter_on() {
        let p = out.get_pixel_mut(x, y);
        for c in 0..3 {
            p[c] = quantize(p[c] as f64 * (1.0 - o) + color[c] as f64 * o);
        }
    }
    Ok(out)
}
