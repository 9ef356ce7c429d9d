use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{choose, Ctx, Sample, TaskDetail, TaskKind};
use crate::assets::procedural::{shape_id, text_id, ShapeKind, TextStyle};
use crate::error::Result;
use crate::prompts::{background_phrase, describe_scene, render_text_spec, text_prompt};
use crate::render::composite;
use crate::scene::{
    pick_background, place_objects, random_center, sample_scene, uniform, uniform_u32, BackgroundChoice,
    ObjectRequest, ObjectSize, OverlapPolicy, Placement, Scene, SceneParams,
};

const TEXT_FIT: f64 = 0.9;

pub(super) fn text(rng: &mut ChaCha8Rng, ctx: &Ctx) -> Result<Sample> {
    let (w, h) = ctx.canvas;
    let mut spec = render_text_spec(rng, ctx.catalog, &ctx.params.text)?;
    let background = pick_background(rng, ctx.catalog, &BackgroundChoice::RandomAsset)?;
    // shrink the type until the line fits comfortably on the canvas
    let asset = loop {
        let style = TextStyle {
            font: spec.font.clone(),
            size: spec.size,
            thickness: spec.thickness,
            color: spec.color.anchor(),
        };
        let id = text_id(&style, &spec.text);
        let asset = ctx.catalog.resolve(&id)?.into_owned();
        let limit = TEXT_FIT * w as f64;
        if (asset.width() as f64 <= limit && asset.height() as f64 <= TEXT_FIT * h as f64) || spec.size <= 8 {
            break asset;
        }
        let shrink = (limit / asset.width() as f64).min(TEXT_FIT * h as f64 / asset.height() as f64);
        spec.size = ((spec.size as f64 * shrink).floor() as u32).clamp(8, spec.size - 1);
    };
    // tiny canvases: the smallest type may still be too wide
    let scale = (TEXT_FIT * w as f64 / asset.width() as f64)
        .min(TEXT_FIT * h as f64 / asset.height() as f64)
        .min(1.0);
    let probe = Placement::new(asset.id.clone(), (0.0, 0.0), scale, 0.0, 0);
    let placement = random_center(rng, &probe, &asset, ctx.canvas).ok_or(crate::Error::CanvasTooCrowded {
        index: 0,
        attempts: 1,
    })?;
    let mut scene = Scene::empty(w, h, background);
    scene.placements.push(placement);
    let target = composite(&scene, ctx.catalog)?;
    let bg = background_phrase(&scene.background, ctx.catalog);
    let prompt = text_prompt(&spec, &bg, rng);
    Ok(Sample::new(
        TaskKind::T2iText,
        ctx.seed,
        Vec::new(),
        None,
        target,
        prompt,
        TaskDetail::T2iText { scene, text: spec },
        None,
    ))
}

pub(super) fn shapes(rng: &mut ChaCha8Rng, ctx: &Ctx) -> Result<Sample> {
    let p = &ctx.params.shapes;
    let (w, h) = ctx.canvas;
    let n = uniform_u32(rng, p.count);
    let min_side = w.min(h) as f64;
    let mut requests = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let kind = ShapeKind::ALL[rng.random_range(0..ShapeKind::ALL.len())];
        let color = *choose(rng, &p.colors, "params.shapes.colors")?;
        let size = ((uniform(rng, p.size_frac) * min_side).round() as u32).max(6);
        requests.push(ObjectRequest {
            asset_id: shape_id(kind, color.anchor(), size),
            size: ObjectSize::Scale(1.0),
        });
    }
    let placements = place_objects(rng, ctx.catalog, ctx.canvas, &requests, 0.0, &OverlapPolicy::Separated { gap: 2 })?;
    let scene = Scene {
        width: w,
        height: h,
        background: crate::scene::Background::Solid(p.background),
        placements,
    };
    let target = composite(&scene, ctx.catalog)?;
    let d = describe_scene(&scene, ctx.catalog, rng)?;
    Ok(Sample::new(
        TaskKind::T2iShapes,
        ctx.seed,
        Vec::new(),
        None,
        target,
        d.prompt,
        TaskDetail::T2iShapes {
            scene,
            facts: d.facts,
            claims: d.claims,
        },
        None,
    ))
}

pub(crate) fn sticker_scene_params(ctx: &Ctx) -> SceneParams {
    let s = &ctx.params.stickers;
    SceneParams {
        width: ctx.canvas.0,
        height: ctx.canvas.1,
        count: s.count,
        size_frac: s.size_frac,
        max_rotation: s.max_rotation,
        overlap: OverlapPolicy::non_overlapping(),
        background: BackgroundChoice::RandomAsset,
    }
}

pub(super) fn stickers(rng: &mut ChaCha8Rng, ctx: &Ctx) -> Result<Sample> {
    let scene = sample_scene(rng, ctx.catalog, &sticker_scene_params(ctx))?;
    let target = composite(&scene, ctx.catalog)?;
    let d = describe_scene(&scene, ctx.catalog, rng)?;
    Ok(Sample::new(
        TaskKind::T2iStickers,
        ctx.seed,
        Vec::new(),
        None,
        target,
        d.prompt,
        TaskDetail::T2iStickers {
            scene,
            facts: d.facts,
            claims: d.claims,
        },
        None,
    ))
}
