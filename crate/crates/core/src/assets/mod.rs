//! Reusable visual assets (stickers, backgrounds, glyphs) and the catalog that
//! every generator draws from.
//!
//! On disk a library is laid out as
//!
//! ```text
//! <root>/stickers/    RGBA cutouts (PNG)
//! <root>/backgrounds/ opaque images (PNG or JPEG)
//! <root>/glyphs/      one PNG per character, optionally grouped per font directory
//! ```
//!
//! Any directory may carry a `tags.json` sidecar mapping file name to a list of
//! tags. Without one, the file stem is the only tag.

mod builtin;
mod font;
pub mod procedural;

use std::borrow::Cow;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use image::{RgbImage, RgbaImage};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::raster::{Mask, Rgb};

pub use builtin::{builtin_catalog, export_builtin};

pub const MIN_ASSET_SIDE: u32 = 8;
pub const SIDECAR_NAME: &str = "tags.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssetKind {
    Sticker,
    Background,
    Glyph,
}

impl AssetKind {
    pub const ALL: [AssetKind; 3] = [AssetKind::Sticker, AssetKind::Background, AssetKind::Glyph];

    pub fn dir_name(self) -> &'static str {
        match self {
            AssetKind::Sticker => "stickers",
            AssetKind::Background => "backgrounds",
            AssetKind::Glyph => "glyphs",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AssetKind::Sticker => "sticker",
            AssetKind::Background => "background",
            AssetKind::Glyph => "glyph",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Asset {
    pub id: String,
    pub kind: AssetKind,
    pub tags: Vec<String>,
    pub pixels: RgbaImage,
}

impl Asset {
    pub fn new(id: impl Into<String>, kind: AssetKind, tags: Vec<String>, pixels: RgbaImage) -> Self {
        Asset {
            id: id.into(),
            kind,
            tags,
            pixels,
        }
    }

    pub fn width(&self) -> u32 {
        self.pixels.width()
    }

    pub fn height(&self) -> u32 {
        self.pixels.height()
    }

    /// First tag that is not a `key:value` attribute, falling back to the id.
    pub fn primary_tag(&self) -> &str {
        self.tags
            .iter()
            .find(|t| !t.contains(':'))
            .map(String::as_str)
            .unwrap_or(&self.id)
    }

    /// Mean color over pixels with alpha >= 128; `None` if there are none.
    pub fn mean_opaque_color(&self) -> Option<Rgb> {
        let mut sum = [0u64; 3];
        let mut n = 0u64;
        for p in self.pixels.pixels() {
            if p[3] >= 128 {
                for c in 0..3 {
                    sum[c] += p[c] as u64;
                }
                n += 1;
            }
        }
        (n > 0).then(|| {
            let avg = |s: u64| ((s * 2 + n) / (2 * n)) as u8;
            [avg(sum[0]), avg(sum[1]), avg(sum[2])]
        })
    }

    /// The alpha channel thresholded at 128.
    pub fn alpha_mask(&self) -> Mask {
        let px = &self.pixels;
        Mask::from_fn(px.width(), px.height(), |x, y| px.get_pixel(x, y)[3] >= 128)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    TooSmall { width: u32, height: u32 },
    NoTransparentPixel,
    NoVisiblePixel,
    NotOpaque { translucent_pixels: u64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooSmall { width, height } => write!(
                f,
                "size {width}x{height} below minimum {MIN_ASSET_SIDE}x{MIN_ASSET_SIDE}"
            ),
            Violation::NoTransparentPixel => f.write_str("no transparent pixel"),
            Violation::NoVisiblePixel => f.write_str("no visible pixel"),
            Violation::NotOpaque { translucent_pixels } => {
                write!(f, "background not opaque ({translucent_pixels} translucent pixels)")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn mentions(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.to_string().contains(needle))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join("; "))
    }
}

pub fn validate_asset(asset: &Asset) -> ValidationReport {
    let mut violations = Vec::new();
    let (w, h) = asset.pixels.dimensions();
    if w < MIN_ASSET_SIDE || h < MIN_ASSET_SIDE {
        violations.push(Violation::TooSmall { width: w, height: h });
    }
    let alphas = asset.pixels.as_raw().chunks_exact(4).map(|p| p[3]);
    match asset.kind {
        AssetKind::Sticker | AssetKind::Glyph => {
            let (mut any_visible, mut any_clear) = (false, false);
            for a in alphas {
                any_visible |= a > 0;
                any_clear |= a == 0;
            }
            if !any_clear {
                violations.push(Violation::NoTransparentPixel);
            }
            if !any_visible {
                violations.push(Violation::NoVisiblePixel);
            }
        }
        AssetKind::Background => {
            let translucent = alphas.filter(|&a| a != 255).count() as u64;
            if translucent > 0 {
                violations.push(Violation::NotOpaque {
                    translucent_pixels: translucent,
                });
            }
        }
    }
    ValidationReport { violations }
}

/// Crops `image` to the bounding box of `mask`; alpha is 255 on the mask and 0 elsewhere.
pub fn cutout_from_segmentation(id: impl Into<String>, image: &RgbImage, mask: &Mask) -> Result<Asset> {
    if image.dimensions() != mask.dimensions() {
        return Err(Error::DimensionMismatch {
            left: image.dimensions(),
            right: mask.dimensions(),
        });
    }
    let bb = mask.bbox().ok_or(Error::EmptyMask)?;
    let pixels = RgbaImage::from_fn(bb.width(), bb.height(), |x, y| {
        let (sx, sy) = (bb.x0 + x, bb.y0 + y);
        let p = image.get_pixel(sx, sy);
        let a = if mask.get(sx, sy) { 255 } else { 0 };
        image::Rgba([p[0], p[1], p[2], a])
    });
    let id = id.into();
    let tag = Path::new(&id)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| id.clone());
    Ok(Asset::new(id, AssetKind::Sticker, vec![tag], pixels))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoadWarning {
    pub path: PathBuf,
    pub reason: String,
}

impl fmt::Display for LoadWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path.display(), self.reason)
    }
}

/// Immutable after construction; share it behind `&` or `Arc` across workers.
#[derive(Clone, Debug, Default)]
pub struct AssetCatalog {
    assets: BTreeMap<String, Arc<Asset>>,
    by_kind: BTreeMap<AssetKind, Vec<String>>,
    by_tag: BTreeMap<String, Vec<String>>,
    // font -> char -> asset id
    fonts: BTreeMap<String, BTreeMap<char, String>>,
}

impl AssetCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, asset: Asset) -> Result<()> {
        if self.assets.contains_key(&asset.id) {
            return Err(Error::DuplicateAsset(asset.id));
        }
        let id = asset.id.clone();
        // index lists stay sorted by id regardless of insertion order
        let insert_sorted = |v: &mut Vec<String>| {
            let pos = v.binary_search(&id).unwrap_or_else(|p| p);
            v.insert(pos, id.clone());
        };
        insert_sorted(self.by_kind.entry(asset.kind).or_default());
        for t in &asset.tags {
            insert_sorted(self.by_tag.entry(t.clone()).or_default());
        }
        if asset.kind == AssetKind::Glyph {
            if let Some((font, ch)) = glyph_identity(&asset) {
                self.fonts.entry(font).or_default().insert(ch, id.clone());
            }
        }
        self.assets.insert(id, Arc::new(asset));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.assets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assets.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Asset> {
        self.assets.get(id).map(|a| a.as_ref())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Asset> {
        self.assets.values().map(|a| a.as_ref())
    }

    pub fn ids_of_kind(&self, kind: AssetKind) -> &[String] {
        self.by_kind.get(&kind).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn count_of_kind(&self, kind: AssetKind) -> usize {
        self.ids_of_kind(kind).len()
    }

    pub fn with_tag(&self, tag: &str) -> &[String] {
        self.by_tag.get(tag).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn tags(&self) -> impl Iterator<Item = &str> {
        self.by_tag.keys().map(String::as_str)
    }

    /// Ids of `kind`, or an error when fewer than `min` exist.
    pub fn require(&self, kind: AssetKind, min: usize) -> Result<&[String]> {
        let ids = self.ids_of_kind(kind);
        if ids.len() < min {
            return Err(Error::NotEnoughAssets {
                kind: kind.label(),
                available: ids.len(),
                required: min,
            });
        }
        Ok(ids)
    }

    pub fn fonts(&self) -> impl Iterator<Item = &str> {
        self.fonts.keys().map(String::as_str)
    }

    pub fn font_chars(&self, font: &str) -> Option<impl Iterator<Item = char> + '_> {
        self.fonts.get(font).map(|m| m.keys().copied())
    }

    pub fn glyph(&self, font: &str, ch: char) -> Option<&Asset> {
        self.fonts.get(font)?.get(&ch).and_then(|id| self.get(id))
    }

    /// Looks up an asset, synthesizing procedural `shape:` and `text:` ids on demand.
    pub fn resolve(&self, id: &str) -> Result<Cow<'_, Asset>> {
        if let Some(a) = self.get(id) {
            return Ok(Cow::Borrowed(a));
        }
        procedural::synthesize(self, id).map(Cow::Owned)
    }

    /// Content digest over ids, kinds, tags and pixels, in id order.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for a in self.iter() {
            h.update(a.id.as_bytes());
            h.update([0u8, a.kind as u8]);
            for t in &a.tags {
                h.update(t.as_bytes());
                h.update([0u8]);
            }
            h.update(a.width().to_le_bytes());
            h.update(a.height().to_le_bytes());
            h.update(a.pixels.as_raw());
        }
        hex::encode(h.finalize())
    }
}

fn glyph_identity(asset: &Asset) -> Option<(String, char)> {
    let attr = |key: &str| {
        asset
            .tags
            .iter()
            .find_map(|t| t.strip_prefix(key).map(str::to_owned))
    };
    let path = Path::new(&asset.id);
    let font = attr("font:").unwrap_or_else(|| {
        let comps: Vec<_> = path.components().collect();
        // glyphs/<font>/<char>.png
        if comps.len() >= 3 {
            comps[comps.len() - 2].as_os_str().to_string_lossy().into_owned()
        } else {
            "default".to_owned()
        }
    });
    let ch_str = attr("char:").or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()))?;
    let ch = parse_glyph_char(&ch_str)?;
    Some((font, ch))
}

fn parse_glyph_char(s: &str) -> Option<char> {
    let mut it = s.chars();
    match (it.next(), it.next()) {
        (Some(c), None) => Some(c),
        _ => {
            let hex = s.strip_prefix("U+").or_else(|| s.strip_prefix("u+"))?;
            char::from_u32(u32::from_str_radix(hex, 16).ok()?)
        }
    }
}

fn image_extension(path: &Path) -> Option<String> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    matches!(ext.as_str(), "png" | "jpg" | "jpeg").then_some(ext)
}

fn read_sidecar(dir: &Path, warnings: &mut Vec<LoadWarning>) -> HashMap<String, Vec<String>> {
    let path = dir.join(SIDECAR_NAME);
    let Ok(text) = fs::read_to_string(&path) else {
        return HashMap::new();
    };
    match serde_json::from_str(&text) {
        Ok(map) => map,
        Err(e) => {
            warnings.push(LoadWarning {
                path,
                reason: format!("ignoring malformed sidecar: {e}"),
            });
            HashMap::new()
        }
    }
}

/// Loads every decodable image under `root`. Undecodable or invalid files are
/// skipped and reported as warnings; only an unreadable root is fatal.
pub fn load_catalog(root: &Path) -> Result<(AssetCatalog, Vec<LoadWarning>)> {
    fs::read_dir(root).map_err(|e| Error::io(root, e))?;

    let mut catalog = AssetCatalog::new();
    let mut warnings = Vec::new();
    for kind in AssetKind::ALL {
        let dir = root.join(kind.dir_name());
        if !dir.is_dir() {
            continue;
        }
        let mut sidecars: HashMap<PathBuf, HashMap<String, Vec<String>>> = HashMap::new();
        for entry in WalkDir::new(&dir).sort_by_file_name() {
            let entry = match entry {
                Ok(e) => e,
                Err(e) => {
                    warnings.push(LoadWarning {
                        path: e.path().map(Path::to_path_buf).unwrap_or_else(|| dir.clone()),
                        reason: e.to_string(),
                    });
                    continue;
                }
            };
            if !entry.file_type().is_file() {
                continue;
            }
            let path = entry.path();
            let Some(ext) = image_extension(path) else {
                continue;
            };
            if ext != "png" && kind != AssetKind::Background {
                warnings.push(LoadWarning {
                    path: path.to_path_buf(),
                    reason: "JPEG is accepted for backgrounds only".into(),
                });
                continue;
            }
            let pixels = match image::open(path) {
                Ok(img) => img.to_rgba8(),
                Err(e) => {
                    warnings.push(LoadWarning {
                        path: path.to_path_buf(),
                        reason: format!("undecodable: {e}"),
                    });
                    continue;
                }
            };
            let parent = path.parent().unwrap_or(&dir).to_path_buf();
            let sidecar = sidecars
                .entry(parent.clone())
                .or_insert_with(|| read_sidecar(&parent, &mut warnings));
            let file_name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
            let tags = sidecar.get(&file_name).cloned().unwrap_or_else(|| {
                vec![path.file_stem().unwrap_or_default().to_string_lossy().into_owned()]
            });
            let id = path
                .strip_prefix(root)
                .unwrap_or(path)
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect::<Vec<_>>()
                .join("/");
            let asset = Asset::new(id, kind, tags, pixels);
            let report = validate_asset(&asset);
            if !report.is_valid() {
                warnings.push(LoadWarning {
                    path: path.to_path_buf(),
                    reason: format!("invalid {}: {report}", kind.label()),
                });
                continue;
            }
            catalog.insert(asset)?;
        }
    }
    Ok((catalog, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgba;

    fn sticker(w: u32, h: u32) -> Asset {
        let px = RgbaImage::from_fn(w, h, |x, _| Rgba([200, 10, 10, if x < w / 2 { 255 } else { 0 }]));
        Asset::new("s", AssetKind::Sticker, vec!["s".into()], px)
    }

    #[test]
    fn opaque_sticker_is_flagged() {
        let a = Asset::new(
            "x",
            AssetKind::Sticker,
            vec![],
            RgbaImage::from_pixel(16, 16, Rgba([1, 2, 3, 255])),
        );
        let r = validate_asset(&a);
        assert!(r.mentions("no transparent pixel"), "{r}");
    }

    #[test]
    fn tiny_asset_is_flagged() {
        let r = validate_asset(&sticker(4, 4));
        assert!(r.violations.iter().any(|v| matches!(v, Violation::TooSmall { .. })));
    }

    #[test]
    fn opaque_background_is_valid() {
        let a = Asset::new(
            "bg",
            AssetKind::Background,
            vec![],
            RgbaImage::from_pixel(32, 32, Rgba([9, 9, 9, 255])),
        );
        assert!(validate_asset(&a).is_valid());
        assert!(validate_asset(&sticker(16, 16)).is_valid());
    }

    #[test]
    fn cutout_centered_square() {
        let img = RgbImage::from_pixel(100, 100, image::Rgb([5, 6, 7]));
        let mask = Mask::from_fn(100, 100, |x, y| (40..60).contains(&x) && (40..60).contains(&y));
        let a = cutout_from_segmentation("c.png", &img, &mask).unwrap();
        assert_eq!(a.pixels.dimensions(), (20, 20));
        assert_eq!(a.pixels.pixels().filter(|p| p[3] == 255).count(), 400);
    }

    #[test]
    fn cutout_full_mask_is_identity_crop() {
        let img = RgbImage::from_fn(30, 20, |x, y| image::Rgb([x as u8, y as u8, 0]));
        let mask = Mask::from_fn(30, 20, |_, _| true);
        let a = cutout_from_segmentation("c", &img, &mask).unwrap();
        assert_eq!(a.pixels.dimensions(), (30, 20));
        assert!(a.pixels.pixels().all(|p| p[3] == 255));
        assert_eq!(a.pixels.get_pixel(7, 3).0, [7, 3, 0, 255]);
    }

    #[test]
    fn cutout_two_blobs_uses_joint_bbox() {
        let img = RgbImage::new(100, 100);
        let in_blob = |x: u32, y: u32| {
            ((10..30).contains(&x) && (10..30).contains(&y)) || ((70..80).contains(&x) && (70..80).contains(&y))
        };
        let mask = Mask::from_fn(100, 100, in_blob);
        // brute-force bbox over every foreground pixel
        let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
        for y in 0..100 {
            for x in 0..100 {
                if in_blob(x, y) {
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x + 1);
                    y1 = y1.max(y + 1);
                }
            }
        }
        let a = cutout_from_segmentation("c", &img, &mask).unwrap();
        assert_eq!(a.pixels.dimensions(), (x1 - x0, y1 - y0));
        assert_eq!((x0, y0), (10, 10));
        // between the blobs
        assert_eq!(a.pixels.get_pixel(40, 40)[3], 0);
        // mask restricted to its bbox is reproduced exactly
        for y in 0..a.height() {
            for x in 0..a.width() {
                assert_eq!(a.pixels.get_pixel(x, y)[3] == 255, in_blob(x + x0, y + y0));
            }
        }
    }

    #[test]
    fn cutout_errors() {
        let img = RgbImage::new(10, 10);
        assert!(matches!(
            cutout_from_segmentation("c", &img, &Mask::new(10, 10)),
            Err(Error::EmptyMask)
        ));
        assert!(matches!(
            cutout_from_segmentation("c", &img, &Mask::new(11, 10)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut c = AssetCatalog::new();
        c.insert(sticker(16, 16)).unwrap();
        assert!(matches!(c.insert(sticker(16, 16)), Err(Error::DuplicateAsset(_))));
    }

    #[test]
    fn glyph_char_parsing() {
        assert_eq!(parse_glyph_char("A"), Some('A'));
        assert_eq!(parse_glyph_char("U+0041"), Some('A'));
        assert_eq!(parse_glyph_char("AB"), None);
    }
}
