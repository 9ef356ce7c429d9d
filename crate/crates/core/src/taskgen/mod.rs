//! Task-family generators. Each is a pure function of
//! (task, seed, params, catalog) producing one paired sample.

mod drag;
mod edit;
mod fill;
mod reference;
mod t2i;

use std::fmt;
use std::str::FromStr;

use image::{GrayImage, RgbImage};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assets::AssetCatalog;
use crate::condmaps::{MaskKind, MaskParams};
use crate::dataset::bucket_of;
use crate::error::{Error, Result};
use crate::prompts::{Claim, DragSpec, EditOp, PixelDrag, SceneFacts, TextParams, TextSpec};
use crate::raster::{Mask, Rgb};
use crate::scene::{BBox, BackgroundChoice, OverlapPolicy, Scene};

pub use drag::{apply_drag, drag_points, DragTransform};
pub use fill::caption_included;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    T2iText,
    T2iShapes,
    T2iStickers,
    InstructEdit,
    DragEdit,
    Inpaint,
    Outpaint,
    ImageCond,
    SubjectDriven,
    SegDet,
}

impl TaskKind {
    pub const ALL: [TaskKind; 10] = [
        TaskKind::T2iText,
        TaskKind::T2iShapes,
        TaskKind::T2iStickers,
        TaskKind::InstructEdit,
        TaskKind::DragEdit,
        TaskKind::Inpaint,
        TaskKind::Outpaint,
        TaskKind::ImageCond,
        TaskKind::SubjectDriven,
        TaskKind::SegDet,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            TaskKind::T2iText => "t2i_text",
            TaskKind::T2iShapes => "t2i_shapes",
            TaskKind::T2iStickers => "t2i_stickers",
            TaskKind::InstructEdit => "instruct_edit",
            TaskKind::DragEdit => "drag_edit",
            TaskKind::Inpaint => "inpaint",
            TaskKind::Outpaint => "outpaint",
            TaskKind::ImageCond => "image_cond",
            TaskKind::SubjectDriven => "subject_driven",
            TaskKind::SegDet => "seg_det",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskKind::ALL
            .into_iter()
            .find(|t| t.tag() == s)
            .ok_or_else(|| Error::config("task", format!("unknown task `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditKind {
    Add,
    Remove,
    Replace,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DragKind {
    Translate,
    Scale,
    Rotate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Canny,
    Depth,
    Seg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegDetMode {
    Segment,
    Detect,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StickerParams {
    pub count: (u32, u32),
    pub size_frac: (f64, f64),
    pub max_rotation: f64,
}

impl Default for StickerParams {
    fn default() -> Self {
        StickerParams {
            count: (1, 4),
            size_frac: (0.15, 0.3),
            max_rotation: 0.35,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapeParams {
    pub count: (u32, u32),
    /// Shape side as a fraction of the shorter canvas side.
    pub size_frac: (f64, f64),
    pub colors: Vec<crate::prompts::ColorName>,
    pub background: Rgb,
}

impl Default for ShapeParams {
    fn default() -> Self {
        ShapeParams {
            count: (1, 6),
            size_frac: (0.08, 0.2),
            colors: crate::prompts::ColorName::ALL.to_vec(),
            background: [240, 240, 240],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DragParams {
    pub kinds: Vec<DragKind>,
    pub points: (u32, u32),
    /// Translation length as a fraction of the shorter canvas side.
    pub translate_frac: (f64, f64),
    pub scale: (f64, f64),
    pub max_rotation: f64,
    pub size_frac: (f64, f64),
    pub distractors: (u32, u32),
    pub background: BackgroundChoice,
}

impl Default for DragParams {
    fn default() -> Self {
        DragParams {
            kinds: vec![DragKind::Translate, DragKind::Scale, DragKind::Rotate],
            points: (1, 4),
            translate_frac: (0.05, 0.3),
            scale: (0.5, 2.0),
            max_rotation: std::f64::consts::FRAC_PI_2,
            size_frac: (0.25, 0.45),
            distractors: (0, 2),
            background: BackgroundChoice::RandomAsset,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskParams {
    /// Canvas sizes drawn uniformly per sample.
    pub canvases: Vec<(u32, u32)>,
    pub stickers: StickerParams,
    pub shapes: ShapeParams,
    pub text: TextParams,
    pub masks: MaskParams,
    pub inpaint_masks: Vec<MaskKind>,
    pub edit_ops: Vec<EditKind>,
    pub blank: Rgb,
    pub drag: DragParams,
    pub map_kinds: Vec<MapKind>,
    pub segdet_modes: Vec<SegDetMode>,
    pub highlight_opacity: f64,
    pub box_thickness: u32,
    pub subject_count: (u32, u32),
    pub caption_prob: f64,
    /// Sticker count range for the inpainting image pool.
    pub pool_count: (u32, u32),
}

impl Default for TaskParams {
    fn default() -> Self {
        TaskParams {
            canvases: vec![(512, 512)],
            stickers: StickerParams::default(),
            shapes: ShapeParams::default(),
            text: TextParams::default(),
            masks: MaskParams::default(),
            inpaint_masks: vec![MaskKind::Smear, MaskKind::Block],
            edit_ops: vec![EditKind::Add, EditKind::Remove, EditKind::Replace],
            blank: [240, 240, 240],
            drag: DragParams::default(),
            map_kinds: vec![MapKind::Canny, MapKind::Depth, MapKind::Seg],
            segdet_modes: vec![SegDetMode::Segment, SegDetMode::Detect],
            highlight_opacity: 0.6,
            box_thickness: 3,
            subject_count: (3, 8),
            caption_prob: 0.5,
            pool_count: (0, 4),
        }
    }
}

impl TaskParams {
    pub fn validate(&self) -> Result<()> {
        let range_u = |name: &str, (lo, hi): (u32, u32)| {
            if lo > hi {
                Err(Error::config(name, format!("empty range ({lo}, {hi})")))
            } else {
                Ok(())
            }
        };
        let range_f = |name: &str, (lo, hi): (f64, f64), min: f64, max: f64| {
            if !(lo.is_finite() && hi.is_finite() && min <= lo && lo <= hi && hi <= max) {
                Err(Error::config(name, format!("range ({lo}, {hi}) must lie within [{min}, {max}]")))
            } else {
                Ok(())
            }
        };
        if self.canvases.is_empty() {
            return Err(Error::config("params.canvases", "at least one canvas size is required"));
        }
        for &(w, h) in &self.canvases {
            if !(64..=4096).contains(&w) || !(64..=4096).contains(&h) {
                return Err(Error::config("params.canvases", format!("{w}x{h} outside 64..=4096")));
            }
        }
        range_u("params.stickers.count", self.stickers.count)?;
        range_f("params.stickers.size_frac", self.stickers.size_frac, 0.01, 1.0)?;
        range_u("params.shapes.count", self.shapes.count)?;
        range_f("params.shapes.size_frac", self.shapes.size_frac, 0.02, 0.5)?;
        if self.shapes.colors.is_empty() {
            return Err(Error::config("params.shapes.colors", "must not be empty"));
        }
        range_u("params.text.word_count", self.text.word_count)?;
        range_u("params.text.size", self.text.size)?;
        if self.text.size.0 < 8 || self.text.size.1 > 256 {
            return Err(Error::config("params.text.size", "must lie within 8..=256"));
        }
        range_u("params.text.thickness", self.text.thickness)?;
        if self.text.thickness.0 < 1 || self.text.thickness.1 > 8 {
            return Err(Error::config("params.text.thickness", "must lie within 1..=8"));
        }
        if self.text.colors.is_empty() {
            return Err(Error::config("params.text.colors", "must not be empty"));
        }
        let m = &self.masks;
        range_u("params.masks.strokes", m.strokes)?;
        range_f("params.masks.radius_frac", m.radius_frac, 0.0, 0.5)?;
        range_u("params.masks.steps", m.steps)?;
        range_u("params.masks.rects", m.rects)?;
        range_f("params.masks.rect_area_frac", m.rect_area_frac, 0.0, 1.0)?;
        range_u("params.masks.sides", m.sides)?;
        if m.sides.0 < 1 || m.sides.1 > 4 {
            return Err(Error::config("params.masks.sides", "must lie within 1..=4"));
        }
        range_f("params.masks.band_frac", m.band_frac, 0.01, 0.45)?;
        range_f("params.masks.fraction", m.fraction, 0.0, 1.0)?;
        if self.inpaint_masks.is_empty() || self.inpaint_masks.contains(&MaskKind::Edge) {
            return Err(Error::config("params.inpaint_masks", "must be a non-empty subset of smear/block"));
        }
        if self.edit_ops.is_empty() {
            return Err(Error::config("params.edit_ops", "must not be empty"));
        }
        let d = &self.drag;
        if d.kinds.is_empty() {
            return Err(Error::config("params.drag.kinds", "must not be empty"));
        }
        range_u("params.drag.points", d.points)?;
        if d.points.0 < 1 || d.points.1 > crate::prompts::MAX_DRAG_POINTS as u32 {
            return Err(Error::config("params.drag.points", "must lie within 1..=8"));
        }
        range_f("params.drag.translate_frac", d.translate_frac, 0.0, 1.0)?;
        range_f("params.drag.scale", d.scale, 0.5, 2.0)?;
        range_f("params.drag.size_frac", d.size_frac, 0.01, 1.0)?;
        if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&d.max_rotation) {
            return Err(Error::config("params.drag.max_rotation", "must lie within [0, pi/2]"));
        }
        range_u("params.drag.distractors", d.distractors)?;
        if self.map_kinds.is_empty() {
            return Err(Error::config("params.map_kinds", "must not be empty"));
        }
        if self.segdet_modes.is_empty() {
            return Err(Error::config("params.segdet_modes", "must not be empty"));
        }
        if !(0.0..=1.0).contains(&self.highlight_opacity) {
            return Err(Error::config("params.highlight_opacity", "must lie within [0, 1]"));
        }
        if self.box_thickness == 0 {
            return Err(Error::config("params.box_thickness", "must be at least 1"));
        }
        range_u("params.subject_count", self.subject_count)?;
        if self.subject_count.0 < 1 {
            return Err(Error::config("params.subject_count", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.caption_prob) {
            return Err(Error::config("params.caption_prob", "must lie within [0, 1]"));
        }
        range_u("params.pool_count", self.pool_count)?;
        Ok(())
    }
}

/// Pixels where source and target may legitimately differ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditRegion {
    Boxes(Vec<BBox>),
    /// The sample's mask.
    Mask,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskDetail {
    T2iText {
        scene: Scene,
        text: TextSpec,
    },
    T2iShapes {
        scene: Scene,
        facts: SceneFacts,
        claims: Vec<Claim>,
    },
    T2iStickers {
        scene: Scene,
        facts: SceneFacts,
        claims: Vec<Claim>,
    },
    InstructEdit {
        edit: EditKind,
        op: EditOp,
        source_scene: Scene,
        target_scene: Scene,
    },
    DragEdit {
        drag: DragKind,
        object: usize,
        transform: DragTransform,
        source_scene: Scene,
        target_scene: Scene,
        points: Vec<PixelDrag>,
        spec: DragSpec,
    },
    Masked {
        mask_kind: MaskKind,
        scene: Scene,
        caption: String,
        caption_included: bool,
    },
    ImageCond {
        map: MapKind,
        scene: Scene,
        facts: SceneFacts,
        claims: Vec<Claim>,
    },
    SubjectDriven {
        source_scene: Scene,
        target_scene: Scene,
        subject: usize,
        tag: String,
    },
    SegDet {
        mode: SegDetMode,
        scene: Scene,
        object: usize,
        color: Rgb,
        bbox: BBox,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub canvas: (u32, u32),
    pub bucket: u8,
    pub detail: TaskDetail,
    pub edit_region: Option<EditRegion>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub task: TaskKind,
    pub seed: u64,
    pub sources: Vec<RgbImage>,
    pub mask: Option<Mask>,
    pub target: RgbImage,
    pub prompt: String,
    pub raw_prompt: String,
    pub meta: SampleMeta,
}

impl Sample {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        task: TaskKind,
        seed: u64,
        sources: Vec<RgbImage>,
        mask: Option<Mask>,
        target: RgbImage,
        prompt: String,
        detail: TaskDetail,
        edit_region: Option<EditRegion>,
    ) -> Self {
        let canvas = target.dimensions();
        Sample {
            task,
            seed,
            sources,
            mask,
            target,
            raw_prompt: prompt.clone(),
            prompt,
            meta: SampleMeta {
                canvas,
                bucket: bucket_of(canvas.0, canvas.1),
                detail,
                edit_region,
            },
        }
    }

    /// Mask of pixels where source and target are allowed to differ, if the
    /// task declares one.
    pub fn edit_mask(&self) -> Option<Mask> {
        let (w, h) = self.meta.canvas;
        match self.meta.edit_region.as_ref()? {
            EditRegion::Boxes(b) => Some(Mask::from_rects(w, h, b)),
            EditRegion::Mask => self.mask.clone(),
        }
    }

    /// Checks that every image shares the canvas and that the first source
    /// equals the target outside the declared edit region.
    pub fn check_locality(&self) -> std::result::Result<(), String> {
        let canvas = self.meta.canvas;
        if self.target.dimensions() != canvas
            || self.sources.iter().any(|s| s.dimensions() != canvas)
            || self.mask.as_ref().is_some_and(|m| m.dimensions() != canvas)
        {
            return Err("image dimensions differ from the canvas".into());
        }
        let Some(region) = self.edit_mask() else {
            return Ok(());
        };
        let src = self.sources.first().ok_or("edit region declared without a source image")?;
        for (x, y, p) in src.enumerate_pixels() {
            if !region.get(x, y) && p != self.target.get_pixel(x, y) {
                return Err(format!("source and target differ at ({x}, {y}) outside the edit region"));
            }
        }
        Ok(())
    }
}

pub(crate) fn gray_to_rgb(g: &GrayImage) -> RgbImage {
    RgbImage::from_fn(g.width(), g.height(), |x, y| {
        let v = g.get_pixel(x, y)[0];
        image::Rgb([v, v, v])
    })
}

pub(crate) fn choose<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T], what: &str) -> Result<&'a T> {
    items
        .choose(rng)
        .ok_or_else(|| Error::config(what, "must not be empty"))
}

/// Generates one sample. Pure: equal inputs give bit-identical output.
pub fn generate(task: TaskKind, seed: u64, params: &TaskParams, catalog: &AssetCatalog) -> Result<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let canvas = *choose(&mut rng, &params.canvases, "params.canvases")?;
    let ctx = Ctx {
        seed,
        canvas,
        params,
        catalog,
    };
    match task {
        TaskKind::T2iText => t2i::text(&mut rng, &ctx),
        TaskKind::T2iShapes => t2i::shapes(&mut rng, &ctx),
        TaskKind::T2iStickers => t2i::stickers(&mut rng, &ctx),
        TaskKind::InstructEdit => {
            let op = *choose(&mut rng, &params.edit_ops, "params.edit_ops")?;
            edit::instruct(&mut rng, &ctx, op)
        }
        TaskKind::DragEdit => {
            let kind = *choose(&mut rng, &params.drag.kinds, "params.drag.kinds")?;
            drag::drag(&mut rng, &ctx, kind)
        }
        TaskKind::Inpaint => {
            let kind = *choose(&mut rng, &params.inpaint_masks, "params.inpaint_masks")?;
            fill::masked(&mut rng, &ctx, TaskKind::Inpaint, kind)
        }
        TaskKind::Outpaint => fill::masked(&mut rng, &ctx, TaskKind::Outpaint, MaskKind::Edge),
        TaskKind::ImageCond => {
            let map = *choose(&mut rng, &params.map_kinds, "params.map_kinds")?;
            reference::image_cond(&mut rng, &ctx, map)
        }
        TaskKind::SubjectDriven => reference::subject(&mut rng, &ctx),
        TaskKind::SegDet => {
            let mode = *choose(&mut rng, &params.segdet_modes, "params.segdet_modes")?;
            reference::segdet(&mut rng, &ctx, mode)
        }
    }
}

pub(crate) struct Ctx<'a> {
    pub seed: u64,
    pub canvas: (u32, u32),
    pub params: &'a TaskParams,
    pub catalog: &'a AssetCatalog,
}

pub(crate) fn non_overlapping() -> OverlapPolicy {
    OverlapPolicy::non_overlapping()
}
