//! Geometric ground truth: placements, transforms, boxes, visible masks and
//! spatial relations between placed objects.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::assets::{Asset, AssetCatalog, AssetKind};
use crate::error::{Error, Result};
use crate::raster::{Mask, Rgb};
use crate::render;

pub const MIN_SCALE: f64 = 0.05;
pub const MAX_SCALE: f64 = 4.0;
pub const OVERLAP_IOM: f64 = 0.05;
pub const RELATION_MARGIN: f64 = 0.05;
pub const MAX_PLACEMENT_ATTEMPTS: usize = 1000;

// snapping tolerance when converting continuous extents to pixel bounds
const SNAP_EPS: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub asset_id: String,
    pub center: (f64, f64),
    pub scale: f64,
    /// Radians in (-pi, pi], about the asset center.
    pub rotation: f64,
    pub z: i32,
}

impl Placement {
    pub fn new(asset_id: impl Into<String>, center: (f64, f64), scale: f64, rotation: f64, z: i32) -> Self {
        Placement {
            asset_id: asset_id.into(),
            center,
            scale,
            rotation,
            z,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Background {
    Solid(Rgb),
    Asset(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub width: u32,
    pub height: u32,
    pub background: Background,
    /// Sorted ascending by `z`.
    pub placements: Vec<Placement>,
}

impl Scene {
    pub fn empty(width: u32, height: u32, background: Background) -> Self {
        Scene {
            width,
            height,
            background,
            placements: Vec::new(),
        }
    }

    pub fn canvas(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    /// Appends a placement on top of all existing ones.
    pub fn push_top(&mut self, asset_id: impl Into<String>, center: (f64, f64), scale: f64, rotation: f64) {
        let z = self.placements.last().map_or(0, |p| p.z + 1);
        self.placements.push(Placement::new(asset_id, center, scale, rotation, z));
    }

    pub fn validate(&self, catalog: &AssetCatalog) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidScene("empty canvas".into()));
        }
        if let Background::Asset(id) = &self.background {
            catalog.resolve(id)?;
        }
        for w in self.placements.windows(2) {
            if w[0].z >= w[1].z {
                return Err(Error::InvalidScene("placements must have strictly increasing z".into()));
            }
        }
        for p in &self.placements {
            if !(MIN_SCALE..=MAX_SCALE).contains(&p.scale) {
                return Err(Error::InvalidScene(format!("scale {} out of range", p.scale)));
            }
            if !(p.rotation > -PI - 1e-12 && p.rotation <= PI + 1e-12) {
                return Err(Error::InvalidScene(format!("rotation {} out of range", p.rotation)));
            }
            let asset = catalog.resolve(&p.asset_id)?;
            bbox_of(p, &asset, self.canvas())?;
        }
        Ok(())
    }
}

/// Axis-aligned, half-open pixel box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl BBox {
    /// `None` unless `x0 < x1` and `y0 < y1`.
    pub fn new(x0: u32, y0: u32, x1: u32, y1: u32) -> Option<BBox> {
        (x0 < x1 && y0 < y1).then_some(BBox { x0, y0, x1, y1 })
    }

    /// Clips signed bounds to a canvas.
    pub fn clipped(x0: i64, y0: i64, x1: i64, y1: i64, canvas: (u32, u32)) -> Option<BBox> {
        let cx = |v: i64| v.clamp(0, canvas.0 as i64) as u32;
        let cy = |v: i64| v.clamp(0, canvas.1 as i64) as u32;
        BBox::new(cx(x0), cy(y0), cx(x1), cy(y1))
    }

    pub fn width(&self) -> u32 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> u64 {
        self.width() as u64 * self.height() as u64
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x0 + self.x1) as f64 / 2.0, (self.y0 + self.y1) as f64 / 2.0)
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        BBox::new(
            self.x0.max(other.x0),
            self.y0.max(other.y0),
            self.x1.min(other.x1),
            self.y1.min(other.y1),
        )
    }

    /// Intersection area over the smaller box's area.
    pub fn iom(&self, other: &BBox) -> f64 {
        let inter = self.intersection(other).map_or(0, |b| b.area());
        inter as f64 / self.area().min(other.area()) as f64
    }

    /// Grows by `by` pixels on every side, clipped at zero.
    pub fn expanded(&self, by: u32) -> BBox {
        BBox {
            x0: self.x0.saturating_sub(by),
            y0: self.y0.saturating_sub(by),
            x1: self.x1 + by,
            y1: self.y1 + by,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialRelation {
    LeftOf,
    RightOf,
    Above,
    Below,
    Overlapping,
    Near,
}

impl SpatialRelation {
    pub const ALL: [SpatialRelation; 6] = [
        SpatialRelation::LeftOf,
        SpatialRelation::RightOf,
        SpatialRelation::Above,
        SpatialRelation::Below,
        SpatialRelation::Overlapping,
        SpatialRelation::Near,
    ];

    /// The relation of B to A when `self` is the relation of A to B.
    pub fn inverse(self) -> SpatialRelation {
        match self {
            SpatialRelation::LeftOf => SpatialRelation::RightOf,
            SpatialRelation::RightOf => SpatialRelation::LeftOf,
            SpatialRelation::Above => SpatialRelation::Below,
            SpatialRelation::Below => SpatialRelation::Above,
            other => other,
        }
    }

    pub fn phrase(self) -> &'static str {
        match self {
            SpatialRelation::LeftOf => "to the left of",
            SpatialRelation::RightOf => "to the right of",
            SpatialRelation::Above => "above",
            SpatialRelation::Below => "below",
            SpatialRelation::Overlapping => "overlapping",
            SpatialRelation::Near => "next to",
        }
    }
}

impl fmt::Display for SpatialRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.phrase())
    }
}

/// Relation of `a` to `b`. Overlap dominates; otherwise the larger
/// canvas-normalized center offset picks the axis, and sub-margin offsets
/// read as `Near`.
pub fn spatial_relation(a: &BBox, b: &BBox, canvas: (u32, u32)) -> SpatialRelation {
    if a.iom(b) > OVERLAP_IOM {
        return SpatialRelation::Overlapping;
    }
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    let nx = (bx - ax) / canvas.0 as f64;
    let ny = (by - ay) / canvas.1 as f64;
    if nx.abs() >= ny.abs() {
        if nx.abs() < RELATION_MARGIN {
            SpatialRelation::Near
        } else if nx > 0.0 {
            SpatialRelation::LeftOf
        } else {
            SpatialRelation::RightOf
        }
    } else if ny.abs() < RELATION_MARGIN {
        SpatialRelation::Near
    } else if ny > 0.0 {
        SpatialRelation::Above
    } else {
        SpatialRelation::Below
    }
}

/// Similarity transform from asset pixel space to canvas space.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PoseTransform {
    center: (f64, f64),
    scale: f64,
    cos: f64,
    sin: f64,
    half: (f64, f64),
}

impl PoseTransform {
    pub(crate) fn new(p: &Placement, asset_w: u32, asset_h: u32) -> Self {
        let (sin, cos) = p.rotation.sin_cos();
        PoseTransform {
            center: p.center,
            scale: p.scale,
            cos,
            sin,
            half: (asset_w as f64 / 2.0, asset_h as f64 / 2.0),
        }
    }

    #[inline]
    pub(crate) fn forward(&self, u: f64, v: f64) -> (f64, f64) {
        let (dx, dy) = ((u - self.half.0) * self.scale, (v - self.half.1) * self.scale);
        (
            self.center.0 + self.cos * dx - self.sin * dy,
            self.center.1 + self.sin * dx + self.cos * dy,
        )
    }

    #[inline]
    pub(crate) fn inverse(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = ((x - self.center.0) / self.scale, (y - self.center.1) / self.scale);
        (
            self.cos * dx + self.sin * dy + self.half.0,
            -self.sin * dx + self.cos * dy + self.half.1,
        )
    }

    /// Pixel bounds (floor/ceil) of the images of the given source rectangles.
    pub(crate) fn pixel_extent(
        &self,
        rects: impl IntoIterator<Item = (f64, f64, f64, f64)>,
    ) -> Option<(i64, i64, i64, i64)> {
        let mut ext: Option<(f64, f64, f64, f64)> = None;
        for (u0, v0, u1, v1) in rects {
            for (u, v) in [(u0, v0), (u1, v0), (u0, v1), (u1, v1)] {
                let (x, y) = self.forward(u, v);
                ext = Some(match ext {
                    None => (x, y, x, y),
                    Some((a, b, c, d)) => (a.min(x), b.min(y), c.max(x), d.max(y)),
                });
            }
        }
        let (x0, y0, x1, y1) = ext?;
        Some((
            (x0 + SNAP_EPS).floor() as i64,
            (y0 + SNAP_EPS).floor() as i64,
            (x1 - SNAP_EPS).ceil() as i64,
            (y1 - SNAP_EPS).ceil() as i64,
        ))
    }
}

/// Per-row source rectangles covering the continuous alpha support: each
/// pixel with alpha > 0 contributes its square grown by the half-pixel
/// bilinear footprint, clipped to the asset rectangle.
pub(crate) fn support_rects(asset: &Asset) -> Vec<(f64, f64, f64, f64)> {
    let (w, h) = asset.pixels.dimensions();
    let raw = asset.pixels.as_raw();
    let mut rects = Vec::new();
    for y in 0..h {
        let row = &raw[(y * w * 4) as usize..((y + 1) * w * 4) as usize];
        let mut first = None;
        let mut last = 0;
        for x in 0..w {
            if row[(x * 4 + 3) as usize] > 0 {
                first.get_or_insert(x);
                last = x;
            }
        }
        if let Some(a) = first {
            rects.push((
                (a as f64 - 0.5).max(0.0),
                (y as f64 - 0.5).max(0.0),
                (last as f64 + 1.5).min(w as f64),
                (y as f64 + 1.5).min(h as f64),
            ));
        }
    }
    rects
}

/// Unclipped pixel bounds of the placed asset's alpha support.
pub fn support_extent(placement: &Placement, asset: &Asset) -> Option<(i64, i64, i64, i64)> {
    PoseTransform::new(placement, asset.width(), asset.height()).pixel_extent(support_rects(asset))
}

/// Bounding box of the asset's alpha support after scale, rotation and
/// translation, clipped to the canvas.
pub fn bbox_of(placement: &Placement, asset: &Asset, canvas: (u32, u32)) -> Result<BBox> {
    let (x0, y0, x1, y1) =
        support_extent(placement, asset).ok_or_else(|| Error::OffCanvas(placement.asset_id.clone()))?;
    BBox::clipped(x0, y0, x1, y1, canvas).ok_or_else(|| Error::OffCanvas(placement.asset_id.clone()))
}

/// Pixels where placement `index` is the topmost layer with alpha >= 128.
pub fn visible_mask(scene: &Scene, catalog: &AssetCatalog, index: usize) -> Result<Mask> {
    let layers = render::rasterize_layers(scene, catalog)?;
    Ok(render::OwnerMap::build(scene.canvas(), &layers).visible_mask(index))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapPolicy {
    Allow,
    /// Pairwise bbox intersection-over-minimum must not exceed the bound.
    MaxIom(f64),
    /// Boxes grown by `gap` pixels must not intersect.
    Separated { gap: u32 },
}

impl OverlapPolicy {
    pub fn non_overlapping() -> Self {
        OverlapPolicy::MaxIom(OVERLAP_IOM)
    }

    fn accepts(&self, candidate: &BBox, placed: &[BBox]) -> bool {
        match self {
            OverlapPolicy::Allow => true,
            OverlapPolicy::MaxIom(m) => placed.iter().all(|b| candidate.iom(b) <= *m),
            OverlapPolicy::Separated { gap } => {
                let grown = candidate.expanded(*gap);
                placed.iter().all(|b| grown.intersection(b).is_none())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundChoice {
    Solid(Rgb),
    RandomAsset,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    pub width: u32,
    pub height: u32,
    /// Inclusive range of placements.
    pub count: (u32, u32),
    /// Longest object side as a fraction of the shorter canvas side.
    pub size_frac: (f64, f64),
    pub max_rotation: f64,
    pub overlap: OverlapPolicy,
    pub background: BackgroundChoice,
}

impl SceneParams {
    pub fn new(width: u32, height: u32) -> Self {
        SceneParams {
            width,
            height,
            count: (1, 5),
            size_frac: (0.15, 0.35),
            max_rotation: 0.35,
            overlap: OverlapPolicy::non_overlapping(),
            background: BackgroundChoice::RandomAsset,
        }
    }
}

pub(crate) fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

pub(crate) fn uniform_u32(rng: &mut impl Rng, (lo, hi): (u32, u32)) -> u32 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Scale that maps the asset's longest side to `frac` of the shorter canvas side.
pub fn scale_for(asset: &Asset, canvas: (u32, u32), frac: f64) -> f64 {
    let target = frac * canvas.0.min(canvas.1) as f64;
    (target / asset.width().max(asset.height()) as f64).clamp(MIN_SCALE, MAX_SCALE)
}

/// How large a requested object should be.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectSize {
    /// Longest side as a fraction range of the shorter canvas side.
    Frac(f64, f64),
    Scale(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectRequest {
    pub asset_id: String,
    pub size: ObjectSize,
}

impl ObjectRequest {
    pub fn frac(asset_id: impl Into<String>, range: (f64, f64)) -> Self {
        ObjectRequest {
            asset_id: asset_id.into(),
            size: ObjectSize::Frac(range.0, range.1),
        }
    }
}

/// True if the placed asset's alpha support lies fully on the canvas.
pub fn fits_on_canvas(placement: &Placement, asset: &Asset, canvas: (u32, u32)) -> bool {
    support_extent(placement, asset).is_some_and(|(x0, y0, x1, y1)| {
        x0 >= 0 && y0 >= 0 && x1 <= canvas.0 as i64 && y1 <= canvas.1 as i64
    })
}

/// Moves `probe` to a uniformly drawn integer center that keeps its alpha
/// support fully on canvas; `None` if the pose cannot fit at all.
pub fn random_center(rng: &mut impl Rng, probe: &Placement, asset: &Asset, canvas: (u32, u32)) -> Option<Placement> {
    let at_origin = Placement {
        center: (0.0, 0.0),
        ..probe.clone()
    };
    let (x0, y0, x1, y1) = support_extent(&at_origin, asset)?;
    let (lo_x, hi_x) = (-x0, canvas.0 as i64 - x1);
    let (lo_y, hi_y) = (-y0, canvas.1 as i64 - y1);
    if lo_x > hi_x || lo_y > hi_y {
        return None;
    }
    let cx = rng.random_range(lo_x..=hi_x);
    let cy = rng.random_range(lo_y..=hi_y);
    Some(Placement {
        center: (cx as f64, cy as f64),
        ..at_origin
    })
}

pub(crate) fn random_rotation(rng: &mut impl Rng, max_rotation: f64) -> f64 {
    if max_rotation > 0.0 {
        rng.random_range(-max_rotation..=max_rotation)
    } else {
        0.0
    }
}

/// Places the requested assets one after another (ascending z), each fully
/// on canvas and accepted by `overlap` against those already placed.
pub fn place_objects(
    rng: &mut impl Rng,
    catalog: &AssetCatalog,
    canvas: (u32, u32),
    requests: &[ObjectRequest],
    max_rotation: f64,
    overlap: &OverlapPolicy,
) -> Result<Vec<Placement>> {
    let mut placements = Vec::with_capacity(requests.len());
    let mut boxes = Vec::with_capacity(requests.len());
    for (index, req) in requests.iter().enumerate() {
        let asset = catalog.resolve(&req.asset_id)?;
        let mut placed = None;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let scale = match req.size {
                ObjectSize::Frac(lo, hi) => scale_for(&asset, canvas, uniform(rng, (lo, hi))),
                ObjectSize::Scale(s) => s,
            };
            let rotation = random_rotation(rng, max_rotation);
            let probe = Placement::new(req.asset_id.clone(), (0.0, 0.0), scale, rotation, index as i32);
            let Some(p) = random_center(rng, &probe, &asset, canvas) else {
                continue;
            };
            let bb = bbox_of(&p, &asset, canvas)?;
            if overlap.accepts(&bb, &boxes) {
                boxes.push(bb);
                placed = Some(p);
                break;
            }
        }
        placements.push(placed.ok_or(Error::CanvasTooCrowded {
            index,
            attempts: MAX_PLACEMENT_ATTEMPTS,
        })?);
    }
    Ok(placements)
}

pub(crate) fn pick_background(
    rng: &mut impl Rng,
    catalog: &AssetCatalog,
    choice: &BackgroundChoice,
) -> Result<Background> {
    Ok(match choice {
        BackgroundChoice::Solid(c) => Background::Solid(*c),
        BackgroundChoice::RandomAsset => {
            let ids = catalog.require(AssetKind::Background, 1)?;
            Background::Asset(ids[rng.random_range(0..ids.len())].clone())
        }
    })
}

/// Random sticker arrangement; a pure function of the rng state, catalog and params.
pub fn sample_scene(rng: &mut impl Rng, catalog: &AssetCatalog, params: &SceneParams) -> Result<Scene> {
    let background = pick_background(rng, catalog, &params.background)?;
    let n = uniform_u32(rng, params.count) as usize;
    let mut scene = Scene::empty(params.width, params.height, background);
    if n == 0 {
        return Ok(scene);
    }
    let stickers = catalog.require(AssetKind::Sticker, 1)?;
    let requests: Vec<_> = (0..n)
        .map(|_| ObjectRequest::frac(stickers[rng.random_range(0..stickers.len())].clone(), params.size_frac))
        .collect();
    scene.placements = place_objects(
        rng,
        catalog,
        scene.canvas(),
        &requests,
        params.max_rotation,
        &params.overlap,
    )?;
    Ok(scene)
}
