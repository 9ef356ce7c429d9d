//! Affine sprite resampling and back-to-front compositing.

use image::imageops::FilterType;
use image::{DynamicImage, Rgb as RgbPx, RgbImage, Rgba, RgbaImage};

use crate::assets::{Asset, AssetCatalog};
use crate::error::{Error, Result};
use crate::raster::{quantize_f32, Mask, Rgb};
use crate::scene::{Background, Placement, PoseTransform, Scene, MAX_SCALE, MIN_SCALE};

pub const MAX_RASTER_SIDE: u32 = 8192;

pub type RenderedImage = RgbImage;

/// A transformed asset positioned on a canvas; `pixels` covers the canvas
/// rectangle starting at (`x0`, `y0`).
#[derive(Clone, Debug, PartialEq)]
pub struct Sprite {
    pub x0: u32,
    pub y0: u32,
    pub pixels: RgbaImage,
}

impl Sprite {
    #[inline]
    pub fn alpha_at(&self, x: u32, y: u32) -> u8 {
        if x < self.x0 || y < self.y0 {
            return 0;
        }
        let (lx, ly) = (x - self.x0, y - self.y0);
        if lx >= self.pixels.width() || ly >= self.pixels.height() {
            return 0;
        }
        self.pixels.get_pixel(lx, ly)[3]
    }

    /// Canvas pixels with alpha > 0.
    pub fn footprint(&self, canvas: (u32, u32)) -> Mask {
        let mut m = Mask::new(canvas.0, canvas.1);
        for (x, y, p) in self.pixels.enumerate_pixels() {
            if p[3] > 0 {
                m.set(self.x0 + x, self.y0 + y, true);
            }
        }
        m
    }
}

/// Bilinear sample at continuous source coordinates with edge clamping and
/// premultiplied averaging. Points outside the asset rectangle are transparent.
#[inline]
fn sample(src: &RgbaImage, u: f64, v: f64) -> [u8; 4] {
    let (w, h) = src.dimensions();
    if !(u >= 0.0 && v >= 0.0 && u <= w as f64 && v <= h as f64) {
        return [0; 4];
    }
    let fx = u - 0.5;
    let fy = v - 0.5;
    let xf = fx.floor();
    let yf = fy.floor();
    let tx = (fx - xf) as f32;
    let ty = (fy - yf) as f32;
    let clamp_x = |i: f64| i.clamp(0.0, (w - 1) as f64) as u32;
    let clamp_y = |i: f64| i.clamp(0.0, (h - 1) as f64) as u32;
    let (x0, x1) = (clamp_x(xf), clamp_x(xf + 1.0));
    let (y0, y1) = (clamp_y(yf), clamp_y(yf + 1.0));
    if tx == 0.0 && ty == 0.0 {
        return src.get_pixel(x0, y0).0;
    }
    let taps = [
        (src.get_pixel(x0, y0), (1.0 - tx) * (1.0 - ty)),
        (src.get_pixel(x1, y0), tx * (1.0 - ty)),
        (src.get_pixel(x0, y1), (1.0 - tx) * ty),
        (src.get_pixel(x1, y1), tx * ty),
    ];
    let mut acc = [0f32; 4];
    for (p, wgt) in taps {
        let a = p[3] as f32 * wgt;
        acc[0] += p[0] as f32 * a;
        acc[1] += p[1] as f32 * a;
        acc[2] += p[2] as f32 * a;
        acc[3] += a;
    }
    let alpha = quantize_f32(acc[3]);
    if alpha == 0 {
        return [0; 4];
    }
    [
        quantize_f32(acc[0] / acc[3]),
        quantize_f32(acc[1] / acc[3]),
        quantize_f32(acc[2] / acc[3]),
        alpha,
    ]
}

fn check_scale(scale: f64) -> Result<()> {
    if (MIN_SCALE..=MAX_SCALE).contains(&scale) {
        Ok(())
    } else {
        Err(Error::InvalidScene(format!("scale {scale} outside [{MIN_SCALE}, {MAX_SCALE}]")))
    }
}

fn check_size(w: i64, h: i64) -> Result<()> {
    if w > MAX_RASTER_SIDE as i64 || h > MAX_RASTER_SIDE as i64 {
        return Err(Error::RasterTooLarge {
            width: w.max(0) as u64,
            height: h.max(0) as u64,
            limit: MAX_RASTER_SIDE,
        });
    }
    Ok(())
}

fn resample_into(src: &RgbaImage, t: &PoseTransform, x0: i64, y0: i64, w: u32, h: u32) -> RgbaImage {
    let mut out = RgbaImage::new(w, h);
    for (x, y, px) in out.enumerate_pixels_mut() {
        let (u, v) = t.inverse((x0 + x as i64) as f64 + 0.5, (y0 + y as i64) as f64 + 0.5);
        *px = Rgba(sample(src, u, v));
    }
    out
}

/// The asset scaled and rotated about its center, on a raster just large
/// enough for the transformed asset rectangle.
pub fn transform_asset(asset: &Asset, scale: f64, rotation: f64) -> Result<RgbaImage> {
    check_scale(scale)?;
    let (w, h) = asset.pixels.dimensions();
    let probe = Placement::new(asset.id.clone(), (0.0, 0.0), scale, rotation, 0);
    let (ex0, ey0, ex1, ey1) = PoseTransform::new(&probe, w, h)
        .pixel_extent([(0.0, 0.0, w as f64, h as f64)])
        .expect("one rectangle");
    let (ow, oh) = (ex1 - ex0, ey1 - ey0);
    check_size(ow, oh)?;
    let placed = Placement::new(asset.id.clone(), (ow as f64 / 2.0, oh as f64 / 2.0), scale, rotation, 0);
    let t = PoseTransform::new(&placed, w, h);
    Ok(resample_into(&asset.pixels, &t, 0, 0, ow.max(1) as u32, oh.max(1) as u32))
}

/// Renders one placement onto the canvas grid; `None` if nothing lands on it.
pub fn render_sprite(placement: &Placement, asset: &Asset, canvas: (u32, u32)) -> Result<Option<Sprite>> {
    check_scale(placement.scale)?;
    let (w, h) = asset.pixels.dimensions();
    let t = PoseTransform::new(placement, w, h);
    let (ex0, ey0, ex1, ey1) = t.pixel_extent([(0.0, 0.0, w as f64, h as f64)]).expect("one rectangle");
    check_size(ex1 - ex0, ey1 - ey0)?;
    let x0 = ex0.clamp(0, canvas.0 as i64);
    let y0 = ey0.clamp(0, canvas.1 as i64);
    let x1 = ex1.clamp(0, canvas.0 as i64);
    let y1 = ey1.clamp(0, canvas.1 as i64);
    if x0 >= x1 || y0 >= y1 {
        return Ok(None);
    }
    let pixels = resample_into(&asset.pixels, &t, x0, y0, (x1 - x0) as u32, (y1 - y0) as u32);
    Ok(Some(Sprite {
        x0: x0 as u32,
        y0: y0 as u32,
        pixels,
    }))
}

/// One sprite per placement, in scene order.
pub fn rasterize_layers(scene: &Scene, catalog: &AssetCatalog) -> Result<Vec<Option<Sprite>>> {
    scene
        .placements
        .iter()
        .map(|p| {
            let asset = catalog.resolve(&p.asset_id)?;
            render_sprite(p, &asset, scene.canvas())
        })
        .collect()
}

pub fn render_background(background: &Background, canvas: (u32, u32), catalog: &AssetCatalog) -> Result<RgbImage> {
    match background {
        Background::Solid(c) => Ok(RgbImage::from_pixel(canvas.0, canvas.1, RgbPx(*c))),
        Background::Asset(id) => {
            let asset = catalog.resolve(id)?;
            let rgb = DynamicImage::ImageRgba8(asset.pixels.clone()).into_rgb8();
            if rgb.dimensions() == canvas {
                return Ok(rgb);
            }
            Ok(DynamicImage::ImageRgb8(rgb)
                .resize_to_fill(canvas.0, canvas.1, FilterType::Triangle)
                .into_rgb8())
        }
    }
}

/// `c` over `d` at 8-bit alpha `a`, rounded to nearest.
#[inline]
pub fn over(c: u8, d: u8, a: u8) -> u8 {
    let a = a as u32;
    ((c as u32 * a + d as u32 * (255 - a) + 127) / 255) as u8
}

pub fn blit(dst: &mut RgbImage, sprite: &Sprite) {
    for (x, y, p) in sprite.pixels.enumerate_pixels() {
        let a = p[3];
        if a == 0 {
            continue;
        }
        let d = dst.get_pixel_mut(sprite.x0 + x, sprite.y0 + y);
        if a == 255 {
            *d = RgbPx([p[0], p[1], p[2]]);
        } else {
            for c in 0..3 {
                d[c] = over(p[c], d[c], a);
            }
        }
    }
}

pub fn composite_layers(mut base: RgbImage, layers: &[Option<Sprite>]) -> RgbImage {
    for s in layers.iter().flatten() {
        blit(&mut base, s);
    }
    base
}

pub fn composite(scene: &Scene, catalog: &AssetCatalog) -> Result<RenderedImage> {
    let base = render_background(&scene.background, scene.canvas(), catalog)?;
    let layers = rasterize_layers(scene, catalog)?;
    Ok(composite_layers(base, &layers))
}

/// Per-pixel index (1-based, 0 = background) of the topmost layer with
/// alpha >= 128.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OwnerMap {
    width: u32,
    height: u32,
    owners: Vec<u16>,
}

impl OwnerMap {
    pub fn build(canvas: (u32, u32), layers: &[Option<Sprite>]) -> Self {
        let mut owners = vec![0u16; canvas.0 as usize * canvas.1 as usize];
        for (i, s) in layers.iter().enumerate() {
            let Some(s) = s else { continue };
            for (x, y, p) in s.pixels.enumerate_pixels() {
                if p[3] >= 128 {
                    owners[((s.y0 + y) * canvas.0 + s.x0 + x) as usize] = i as u16 + 1;
                }
            }
        }
        OwnerMap {
            width: canvas.0,
            height: canvas.1,
            owners,
        }
    }

    #[inline]
    pub fn owner(&self, x: u32, y: u32) -> u16 {
        self.owners[(y * self.width + x) as usize]
    }

    pub fn visible_mask(&self, index: usize) -> Mask {
        let id = index as u16 + 1;
        Mask::from_fn(self.width, self.height, |x, y| self.owner(x, y) == id)
    }

    pub fn map_colors(&self, f: impl Fn(u16) -> Rgb) -> RgbImage {
        RgbImage::from_fn(self.width, self.height, |x, y| RgbPx(f(self.owner(x, y))))
    }

    pub fn raw(&self) -> &[u16] {
        &self.owners
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets::{builtin_catalog, AssetKind};
    use crate::scene::{bbox_of, visible_mask};
    use std::f64::consts::PI;

    fn sticker(w: u32, h: u32, f: impl Fn(u32, u32) -> [u8; 4]) -> Asset {
        Asset::new("t", AssetKind::Sticker, vec![], RgbaImage::from_fn(w, h, |x, y| Rgba(f(x, y))))
    }

    fn catalog_with(assets: Vec<Asset>) -> AssetCatalog {
        let mut c = AssetCatalog::new();
        for a in assets {
            c.insert(a).unwrap();
        }
        c
    }

    #[test]
    fn identity_is_bit_exact() {
        let cat = builtin_catalog();
        for id in cat.ids_of_kind(AssetKind::Sticker) {
            let a = cat.get(id).unwrap();
            assert_eq!(transform_asset(a, 1.0, 0.0).unwrap(), a.pixels, "{id}");
        }
    }

    #[test]
    fn double_scale_of_opaque_square() {
        let a = sticker(10, 10, |_, _| [10, 20, 30, 255]);
        let out = transform_asset(&a, 2.0, 0.0).unwrap();
        assert_eq!(out.dimensions(), (20, 20));
        assert!(out.pixels().all(|p| p.0 == [10, 20, 30, 255]));
    }

    #[test]
    fn half_turn_twice_is_identity() {
        let cat = builtin_catalog();
        for id in cat.ids_of_kind(AssetKind::Sticker).iter().take(5) {
            let a = cat.get(id).unwrap().clone();
            let once = Asset::new("x", AssetKind::Sticker, vec![], transform_asset(&a, 1.0, PI).unwrap());
            let twice = transform_asset(&once, 1.0, PI).unwrap();
            assert_eq!(twice.dimensions(), a.pixels.dimensions());
            for (p, q) in twice.pixels().zip(a.pixels.pixels()) {
                if q[3] == 0 && p[3] == 0 {
                    continue;
                }
                for c in 0..4 {
                    assert!((p[c] as i16 - q[c] as i16).abs() <= 2, "{id}: {p:?} vs {q:?}");
                }
            }
        }
    }

    #[test]
    fn oversize_is_error() {
        let a = sticker(4000, 8, |x, _| [0, 0, 0, if x == 0 { 0 } else { 255 }]);
        assert!(matches!(transform_asset(&a, 4.0, 0.0), Err(Error::RasterTooLarge { .. })));
    }

    #[test]
    fn over_operator_example() {
        assert_eq!([over(255, 0, 128), over(0, 0, 128), over(0, 255, 128)], [128, 0, 127]);
        let mut base = RgbImage::from_pixel(4, 4, RgbPx([0, 0, 255]));
        blit(
            &mut base,
            &Sprite {
                x0: 1,
                y0: 1,
                pixels: RgbaImage::from_pixel(2, 2, Rgba([255, 0, 0, 128])),
            },
        );
        assert_eq!(base.get_pixel(1, 1).0, [128, 0, 127]);
        assert_eq!(base.get_pixel(0, 0).0, [0, 0, 255]);
    }

    #[test]
    fn over_matches_float_oracle() {
        for a in 0..=255u32 {
            for c in (0..=255u32).step_by(17) {
                for d in (0..=255u32).step_by(15) {
                    let exact = (c * a + d * (255 - a)) as f64 / 255.0;
                    let got = over(c as u8, d as u8, a as u8) as f64;
                    assert!((got - exact).abs() <= 0.5 + 1e-9);
                }
            }
        }
    }

    #[test]
    fn background_only_scene() {
        let cat = builtin_catalog();
        let bg = cat.ids_of_kind(AssetKind::Background)[0].clone();
        let scene = Scene::empty(512, 512, Background::Asset(bg.clone()));
        let img = composite(&scene, &cat).unwrap();
        let expect = DynamicImage::ImageRgba8(cat.get(&bg).unwrap().pixels.clone()).into_rgb8();
        assert_eq!(img, expect);
    }

    #[test]
    fn opaque_sticker_replaces_background() {
        let a = sticker(20, 20, |x, y| if (2..18).contains(&x) && (2..18).contains(&y) { [1, 2, 3, 255] } else { [0; 4] });
        let cat = catalog_with(vec![a]);
        let mut scene = Scene::empty(64, 64, Background::Solid([200, 100, 50]));
        scene.push_top("t", (30.0, 30.0), 1.0, 0.0);
        let img = composite(&scene, &cat).unwrap();
        for (x, y, p) in img.enumerate_pixels() {
            let inside = (22..38).contains(&x) && (22..38).contains(&y);
            assert_eq!(p.0, if inside { [1, 2, 3] } else { [200, 100, 50] });
        }
    }

    #[test]
    fn footprint_within_bbox() {
        let cat = builtin_catalog();
        let ids = cat.ids_of_kind(AssetKind::Sticker);
        for (i, id) in ids.iter().enumerate() {
            let p = Placement::new(id.clone(), (100.3 + i as f64, 97.7), 0.7 + 0.1 * i as f64, 0.3 * i as f64 - 1.5, 0);
            let a = cat.get(id).unwrap();
            let s = render_sprite(&p, a, (256, 256)).unwrap().unwrap();
            let bb = bbox_of(&p, a, (256, 256)).unwrap();
            let fp = s.footprint((256, 256));
            assert!(fp.iter_on().all(|(x, y)| bb.contains(x, y)), "{id}");
        }
    }

    #[test]
    fn occlusion_consistency_for_opaque_layers() {
        let red = sticker(30, 30, |x, _| if x == 0 { [0; 4] } else { [255, 0, 0, 255] });
        let mut green = red.clone();
        green.id = "g".into();
        for p in green.pixels.pixels_mut() {
            if p[3] > 0 {
                *p = Rgba([0, 255, 0, 255]);
            }
        }
        let cat = catalog_with(vec![red, green]);
        let mut scene = Scene::empty(100, 100, Background::Solid([0, 0, 0]));
        scene.push_top("t", (40.0, 40.0), 1.0, 0.0);
        scene.push_top("g", (55.0, 50.0), 1.0, 0.0);
        let full = composite(&scene, &cat).unwrap();
        for i in 0..2 {
            let vm = visible_mask(&scene, &cat, i).unwrap();
            let mut single = scene.clone();
            single.placements = vec![scene.placements[i].clone()];
            let alone = composite(&single, &cat).unwrap();
            for (x, y) in vm.iter_on() {
                assert_eq!(full.get_pixel(x, y), alone.get_pixel(x, y));
            }
        }
    }

    #[test]
    fn removing_top_changes_only_its_footprint() {
        let cat = builtin_catalog();
        let ids = cat.ids_of_kind(AssetKind::Sticker);
        let mut scene = Scene::empty(200, 200, Background::Solid([240, 240, 240]));
        scene.push_top(ids[0].clone(), (90.0, 100.0), 0.8, 0.2);
        scene.push_top(ids[1].clone(), (110.0, 95.0), 0.9, -0.4);
        let full = composite(&scene, &cat).unwrap();
        let layers = rasterize_layers(&scene, &cat).unwrap();
        let fp = layers[1].as_ref().unwrap().footprint((200, 200));
        let mut less = scene.clone();
        less.placements.pop();
        let reduced = composite(&less, &cat).unwrap();
        for (x, y, p) in full.enumerate_pixels() {
            if p != reduced.get_pixel(x, y) {
                assert!(fp.get(x, y));
            }
        }
    }
}
