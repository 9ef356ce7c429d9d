//! A small procedurally drawn asset library, so the pipeline runs without any
//! files on disk. Ids match the on-disk layout written by [`export_builtin`],
//! which means a round trip through the filesystem yields the same catalog
//! fingerprint.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use image::{Rgba, RgbaImage};

use super::font::{self, FontStyle};
use super::{Asset, AssetCatalog, AssetKind, SIDECAR_NAME};
use crate::error::{Error, Result};
use crate::raster::{quantize, Rgb};

const SS: u32 = 4;

type Shape<'a> = Box<dyn Fn(f64, f64) -> bool + 'a>;

struct Canvas {
    w: u32,
    h: u32,
    // unpremultiplied rgba, float
    px: Vec<[f64; 4]>,
}

impl Canvas {
    fn new(w: u32, h: u32) -> Self {
        Canvas {
            w,
            h,
            px: vec![[0.0; 4]; (w * h) as usize],
        }
    }

    /// Paints `color` with anti-aliased coverage of `shape`, given in unit coordinates.
    fn paint(&mut self, color: Rgb, shape: Shape<'_>) {
        let n = (SS * SS) as f64;
        for y in 0..self.h {
            for x in 0..self.w {
                let mut hits = 0u32;
                for sy in 0..SS {
                    for sx in 0..SS {
                        let u = (x as f64 + (sx as f64 + 0.5) / SS as f64) / self.w as f64;
                        let v = (y as f64 + (sy as f64 + 0.5) / SS as f64) / self.h as f64;
                        hits += shape(u, v) as u32;
                    }
                }
                if hits == 0 {
                    continue;
                }
                let cov = hits as f64 / n;
                let d = &mut self.px[(y * self.w + x) as usize];
                let out_a = cov + d[3] * (1.0 - cov);
                for c in 0..3 {
                    d[c] = (color[c] as f64 * cov + d[c] * d[3] * (1.0 - cov)) / out_a;
                }
                d[3] = out_a;
            }
        }
    }

    fn into_image(self) -> RgbaImage {
        let w = self.w;
        RgbaImage::from_fn(self.w, self.h, |x, y| {
            let p = self.px[(y * w + x) as usize];
            let a = quantize(p[3] * 255.0);
            if a == 0 {
                Rgba([0, 0, 0, 0])
            } else {
                Rgba([quantize(p[0]), quantize(p[1]), quantize(p[2]), a])
            }
        })
    }
}

fn disk(cx: f64, cy: f64, r: f64) -> Shape<'static> {
    Box::new(move |u, v| (u - cx).powi(2) + (v - cy).powi(2) <= r * r)
}

fn ellipse(cx: f64, cy: f64, rx: f64, ry: f64) -> Shape<'static> {
    Box::new(move |u, v| ((u - cx) / rx).powi(2) + ((v - cy) / ry).powi(2) <= 1.0)
}

fn rect(u0: f64, v0: f64, u1: f64, v1: f64) -> Shape<'static> {
    Box::new(move |u, v| u >= u0 && u <= u1 && v >= v0 && v <= v1)
}

fn polygon(pts: Vec<(f64, f64)>) -> Shape<'static> {
    Box::new(move |u, v| {
        // even-odd ray cast
        let mut inside = false;
        let n = pts.len();
        for i in 0..n {
            let (xi, yi) = pts[i];
            let (xj, yj) = pts[(i + n - 1) % n];
            if (yi > v) != (yj > v) && u < (xj - xi) * (v - yi) / (yj - yi) + xi {
                inside = !inside;
            }
        }
        inside
    })
}

fn capsule(a: (f64, f64), b: (f64, f64), r: f64) -> Shape<'static> {
    Box::new(move |u, v| {
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let t = (((u - a.0) * dx + (v - a.1) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
        let (px, py) = (a.0 + t * dx - u, a.1 + t * dy - v);
        px * px + py * py <= r * r
    })
}

fn sticker(name: &str, w: u32, h: u32, draw: impl FnOnce(&mut Canvas)) -> Asset {
    let mut c = Canvas::new(w, h);
    draw(&mut c);
    Asset::new(
        format!("stickers/{name}.png"),
        AssetKind::Sticker,
        vec![name.to_owned()],
        c.into_image(),
    )
}

fn stickers() -> Vec<Asset> {
    vec![
        sticker("sun", 128, 128, |c| {
            for k in 0..8 {
                let t = k as f64 * PI / 4.0;
                let (s, co) = t.sin_cos();
                c.paint(
                    [255, 140, 0],
                    capsule((0.5 + 0.3 * co, 0.5 + 0.3 * s), (0.5 + 0.45 * co, 0.5 + 0.45 * s), 0.035),
                );
            }
            c.paint([255, 215, 0], disk(0.5, 0.5, 0.26));
        }),
        sticker("tree", 112, 144, |c| {
            c.paint([120, 72, 30], rect(0.42, 0.55, 0.58, 0.96));
            c.paint([34, 139, 34], disk(0.5, 0.38, 0.34));
        }),
        sticker("house", 128, 128, |c| {
            c.paint([200, 60, 50], rect(0.2, 0.45, 0.8, 0.92));
            c.paint([110, 60, 30], polygon(vec![(0.08, 0.48), (0.5, 0.08), (0.92, 0.48)]));
            c.paint([80, 45, 20], rect(0.44, 0.66, 0.58, 0.92));
        }),
        sticker("balloon", 96, 128, |c| {
            c.paint([100, 100, 100], capsule((0.5, 0.68), (0.54, 0.96), 0.015));
            c.paint([230, 30, 40], ellipse(0.5, 0.38, 0.36, 0.3));
            c.paint([230, 30, 40], polygon(vec![(0.45, 0.72), (0.5, 0.66), (0.55, 0.72)]));
        }),
        sticker("flower", 128, 128, |c| {
            for k in 0..5 {
                let t = k as f64 * 2.0 * PI / 5.0 - PI / 2.0;
                c.paint([255, 105, 180], disk(0.5 + 0.22 * t.cos(), 0.5 + 0.22 * t.sin(), 0.17));
            }
            c.paint([255, 220, 40], disk(0.5, 0.5, 0.12));
        }),
        sticker("fish", 160, 96, |c| {
            c.paint([255, 127, 0], polygon(vec![(0.68, 0.5), (0.96, 0.18), (0.96, 0.82)]));
            c.paint([255, 127, 0], ellipse(0.42, 0.5, 0.34, 0.3));
            c.paint([20, 20, 20], disk(0.24, 0.42, 0.035));
        }),
        sticker("moon", 128, 128, |c| {
            let outer = disk(0.5, 0.5, 0.4);
            let inner = disk(0.66, 0.4, 0.32);
            c.paint([240, 220, 80], Box::new(move |u, v| outer(u, v) && !inner(u, v)));
        }),
        sticker("cloud", 144, 96, |c| {
            let parts = [disk(0.3, 0.58, 0.2), disk(0.52, 0.42, 0.27), disk(0.72, 0.6, 0.19)];
            let base = rect(0.22, 0.55, 0.8, 0.78);
            c.paint(
                [225, 232, 245],
                Box::new(move |u, v| base(u, v) || parts.iter().any(|p| p(u, v))),
            );
        }),
        sticker("heart", 128, 128, |c| {
            c.paint(
                [220, 20, 60],
                Box::new(|u, v| {
                    let x = (u - 0.5) * 2.7;
                    let y = (0.45 - v) * 2.7;
                    (x * x + y * y - 1.0).powi(3) - x * x * y.powi(3) <= 0.0
                }),
            );
        }),
        sticker("star", 128, 128, |c| {
            let pts = (0..10)
                .map(|k| {
                    let t = k as f64 * PI / 5.0 - PI / 2.0;
                    let r = if k % 2 == 0 { 0.46 } else { 0.19 };
                    (0.5 + r * t.cos(), 0.53 + r * t.sin())
                })
                .collect();
            c.paint([255, 200, 0], polygon(pts));
        }),
        sticker("mushroom", 128, 128, |c| {
            c.paint([240, 228, 200], rect(0.4, 0.45, 0.6, 0.9));
            let cap = ellipse(0.5, 0.5, 0.42, 0.36);
            c.paint([200, 30, 30], Box::new(move |u, v| v <= 0.5 && cap(u, v)));
            for (x, y) in [(0.35, 0.36), (0.55, 0.25), (0.68, 0.4)] {
                c.paint([250, 250, 250], disk(x, y, 0.05));
            }
        }),
        sticker("apple", 128, 128, |c| {
            c.paint([110, 60, 20], rect(0.48, 0.1, 0.53, 0.3));
            c.paint([50, 160, 50], ellipse(0.62, 0.2, 0.11, 0.05));
            c.paint([200, 20, 30], disk(0.5, 0.6, 0.34));
        }),
        sticker("cup", 128, 128, |c| {
            let ring_o = disk(0.68, 0.55, 0.16);
            let ring_i = disk(0.68, 0.55, 0.08);
            c.paint(
                [40, 90, 200],
                Box::new(move |u, v| u > 0.6 && ring_o(u, v) && !ring_i(u, v)),
            );
            c.paint([40, 90, 200], rect(0.22, 0.3, 0.66, 0.86));
        }),
    ]
}

fn lerp(a: Rgb, b: Rgb, t: f64) -> Rgba<u8> {
    let m = |i: usize| quantize(a[i] as f64 + (b[i] as f64 - a[i] as f64) * t);
    Rgba([m(0), m(1), m(2), 255])
}

// integer hash noise, stable across platforms
fn hash2(x: u32, y: u32) -> f64 {
    let mut h = x.wrapping_mul(0x9E37_79B1) ^ y.wrapping_mul(0x85EB_CA77);
    h ^= h >> 15;
    h = h.wrapping_mul(0xC2B2_AE3D);
    h ^= h >> 13;
    (h & 0xFFFF) as f64 / 65535.0
}

fn backgrounds() -> Vec<Asset> {
    const S: u32 = 512;
    let bg = |name: &str, img: RgbaImage| {
        Asset::new(
            format!("backgrounds/{name}.png"),
            AssetKind::Background,
            vec![name.to_owned()],
            img,
        )
    };
    let t = |v: u32| v as f64 / (S - 1) as f64;
    vec![
        bg(
            "sky",
            RgbaImage::from_fn(S, S, |_, y| lerp([110, 180, 240], [225, 240, 252], t(y))),
        ),
        bg(
            "meadow",
            RgbaImage::from_fn(S, S, |x, y| {
                let horizon = 0.6 + 0.04 * (t(x) * 6.0 * PI).sin();
                if t(y) > horizon {
                    lerp([90, 170, 70], [50, 120, 40], (t(y) - horizon) / (1.0 - horizon))
                } else {
                    lerp([150, 200, 245], [215, 235, 250], t(y) / horizon)
                }
            }),
        ),
        bg(
            "checkerboard",
            RgbaImage::from_fn(S, S, |x, y| {
                if (x / 64 + y / 64) % 2 == 0 {
                    Rgba([228, 228, 228, 255])
                } else {
                    Rgba([196, 196, 196, 255])
                }
            }),
        ),
        bg(
            "stripes",
            RgbaImage::from_fn(S, S, |x, y| {
                if ((x + y) / 48) % 2 == 0 {
                    Rgba([250, 232, 200, 255])
                } else {
                    Rgba([214, 236, 226, 255])
                }
            }),
        ),
        bg(
            "sunset",
            RgbaImage::from_fn(S, S, |_, y| lerp([250, 170, 90], [110, 70, 150], t(y))),
        ),
        bg(
            "paper",
            RgbaImage::from_fn(S, S, |x, y| {
                let n = 0.5 * hash2(x / 4, y / 4) + 0.5 * hash2(x, y);
                lerp([232, 222, 196], [246, 240, 224], n)
            }),
        ),
    ]
}

fn glyphs() -> Vec<Asset> {
    let mut out = Vec::new();
    for style in FontStyle::ALL {
        for ch in font::chars() {
            let img = font::render_glyph(ch, style).expect("table char");
            out.push(Asset::new(
                format!("glyphs/{}/{}.png", style.name(), ch),
                AssetKind::Glyph,
                vec![format!("font:{}", style.name()), format!("char:{ch}")],
                img,
            ));
        }
    }
    out
}

/// The built-in library. Drawn once per process; clones share pixel storage.
pub fn builtin_catalog() -> AssetCatalog {
    static CATALOG: OnceLock<AssetCatalog> = OnceLock::new();
    CATALOG
        .get_or_init(|| {
            let mut cat = AssetCatalog::new();
            for a in stickers().into_iter().chain(backgrounds()).chain(glyphs()) {
                cat.insert(a).expect("builtin ids are unique");
            }
            cat
        })
        .clone()
}

/// Writes the built-in library under `root` in the standard layout, with a
/// `tags.json` sidecar per directory.
pub fn export_builtin(root: &Path) -> Result<()> {
    let cat = builtin_catalog();
    let mut sidecars: BTreeMap<std::path::PathBuf, BTreeMap<String, Vec<String>>> = BTreeMap::new();
    for asset in cat.iter() {
        let path = root.join(&asset.id);
        let dir = path.parent().expect("ids have a directory").to_path_buf();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        asset.pixels.save(&path).map_err(|source| Error::Image {
            path: path.clone(),
            source,
        })?;
        let file = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        sidecars.entry(dir).or_default().insert(file, asset.tags.clone());
    }
    for (dir, map) in sidecars {
        let path = dir.join(SIDECAR_NAME);
        let text = serde_json::to_string_pretty(&map)?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets::validate_asset;

    #[test]
    fn builtin_assets_are_valid() {
        let cat = builtin_catalog();
        for a in cat.iter() {
            let r = validate_asset(a);
            assert!(r.is_valid(), "{}: {r}", a.id);
        }
        assert_eq!(cat.count_of_kind(AssetKind::Sticker), 13);
        assert_eq!(cat.count_of_kind(AssetKind::Background), 6);
        assert_eq!(cat.fonts().collect::<Vec<_>>(), vec!["block", "round", "slant"]);
        assert!(cat.glyph("slant", 'Q').is_some());
    }

    #[test]
    fn builtin_is_deterministic() {
        assert_eq!(builtin_catalog().fingerprint(), builtin_catalog().fingerprint());
    }
}
