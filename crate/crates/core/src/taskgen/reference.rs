use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::edit::object_noun;
use super::{gray_to_rgb, Ctx, EditRegion, MapKind, SegDetMode, Sample, SegDetMode as Mode, TaskDetail, TaskKind};
use crate::assets::AssetKind;
use crate::condmaps::{canny, color_highlight, depth_from_owners, draw_bbox, seg_from_owners, CANNY_HIGH, CANNY_LOW, PALETTE};
use crate::error::Result;
use crate::prompts::{background_phrase, describe_scene, ColorName};
use crate::render::{composite, composite_layers, rasterize_layers, render_background, OwnerMap};
use crate::scene::{
    bbox_of, pick_background, place_objects, sample_scene, uniform_u32, BackgroundChoice, ObjectRequest, Scene,
};

pub(super) fn image_cond(rng: &mut ChaCha8Rng, ctx: &Ctx, map: MapKind) -> Result<Sample> {
    let scene = sample_scene(rng, ctx.catalog, &super::t2i::sticker_scene_params(ctx))?;
    let base = render_background(&scene.background, ctx.canvas, ctx.catalog)?;
    let layers = rasterize_layers(&scene, ctx.catalog)?;
    let target = composite_layers(base, &layers);
    let n = scene.placements.len();
    let source = match map {
        MapKind::Canny => gray_to_rgb(canny(&target, CANNY_LOW, CANNY_HIGH).as_image()),
        MapKind::Depth => gray_to_rgb(&depth_from_owners(&OwnerMap::build(ctx.canvas, &layers), ctx.canvas, n)),
        MapKind::Seg => seg_from_owners(&OwnerMap::build(ctx.canvas, &layers), n, &PALETTE)?,
    };
    let d = describe_scene(&scene, ctx.catalog, rng)?;
    Ok(Sample::new(
        TaskKind::ImageCond,
        ctx.seed,
        vec![source],
        None,
        target,
        d.prompt,
        TaskDetail::ImageCond {
            map,
            scene,
            facts: d.facts,
            claims: d.claims,
        },
        None,
    ))
}

const SUBJECT_TEMPLATES: [&str; 5] = [
    "The {tag} from the image, shown on {bg}.",
    "Place the {tag} from the reference image on {bg}.",
    "Show the {tag} from the image against {bg}.",
    "The same {tag} as in the image, now on {bg}.",
    "Take the {tag} from the image and put it on {bg}.",
];

pub(super) fn subject(rng: &mut ChaCha8Rng, ctx: &Ctx) -> Result<Sample> {
    let (w, h) = ctx.canvas;
    let ids = ctx.catalog.require(AssetKind::Sticker, 3)?;
    let n = uniform_u32(rng, ctx.params.subject_count) as usize;
    let requests: Vec<ObjectRequest> = (0..n)
        .map(|_| ObjectRequest::frac(ids[rng.random_range(0..ids.len())].clone(), (0.1, 0.2)))
        .collect();
    let source_bg = pick_background(rng, ctx.catalog, &BackgroundChoice::RandomAsset)?;
    let placements = place_objects(
        rng,
        ctx.catalog,
        ctx.canvas,
        &requests,
        ctx.params.stickers.max_rotation,
        &super::non_overlapping(),
    )?;
    let source_scene = Scene {
        width: w,
        height: h,
        background: source_bg,
        placements,
    };
    let subject = rng.random_range(0..n);
    let subject_id = source_scene.placements[subject].asset_id.clone();
    let target_bg = pick_background(rng, ctx.catalog, &BackgroundChoice::RandomAsset)?;
    let placed = place_objects(
        rng,
        ctx.catalog,
        ctx.canvas,
        &[ObjectRequest::frac(subject_id.clone(), (0.3, 0.5))],
        ctx.params.stickers.max_rotation,
        &super::non_overlapping(),
    )?;
    let target_scene = Scene {
        width: w,
        height: h,
        background: target_bg,
        placements: placed,
    };
    let tag = ctx.catalog.resolve(&subject_id)?.primary_tag().to_owned();
    let bg = background_phrase(&target_scene.background, ctx.catalog);
    let prompt = SUBJECT_TEMPLATES
        .choose(rng)
        .expect("non-empty")
        .replace("{tag}", &tag)
        .replace("{bg}", &bg);
    let source = composite(&source_scene, ctx.catalog)?;
    let target = composite(&target_scene, ctx.catalog)?;
    Ok(Sample::new(
        TaskKind::SubjectDriven,
        ctx.seed,
        vec![source],
        None,
        target,
        prompt,
        TaskDetail::SubjectDriven {
            source_scene,
            target_scene,
            subject,
            tag,
        },
        None,
    ))
}

const SEGMENT_TEMPLATES: [&str; 5] = [
    "Highlight the {o} in {c}.",
    "Segment the {o} and tint it {c}.",
    "Mark the {o} with a {c} overlay.",
    "Color the region of the {o} {c}.",
    "Show the mask of the {o} in {c}.",
];

const DETECT_TEMPLATES: [&str; 5] = [
    "Draw a {c} box around the {o}.",
    "Detect the {o} and frame it in {c}.",
    "Put a {c} bounding box on the {o}.",
    "Locate the {o} with a {c} rectangle.",
    "Outline the {o} with a {c} box.",
];

pub(super) fn segdet(rng: &mut ChaCha8Rng, ctx: &Ctx, mode: SegDetMode) -> Result<Sample> {
    let (w, h) = ctx.canvas;
    let ids = ctx.catalog.require(AssetKind::Sticker, 1)?;
    let n = rng.random_range(1..=3usize.min(ids.len()));
    // distinct assets keep the referenced object unambiguous
    let chosen: Vec<&String> = ids.choose_multiple(rng, n).collect();
    let requests: Vec<ObjectRequest> = chosen
        .iter()
        .map(|id| ObjectRequest::frac((*id).clone(), ctx.params.stickers.size_frac))
        .collect();
    let background = pick_background(rng, ctx.catalog, &BackgroundChoice::RandomAsset)?;
    let placements = place_objects(
        rng,
        ctx.catalog,
        ctx.canvas,
        &requests,
        ctx.params.stickers.max_rotation,
        &super::non_overlapping(),
    )?;
    let scene = Scene {
        width: w,
        height: h,
        background,
        placements,
    };
    let object = rng.random_range(0..n);
    let color_name = ColorName::ALL[rng.random_range(0..ColorName::ALL.len())];
    let color = color_name.anchor();
    let asset = ctx.catalog.resolve(&scene.placements[object].asset_id)?;
    let bbox = bbox_of(&scene.placements[object], &asset, ctx.canvas)?;
    let base = render_background(&scene.background, ctx.canvas, ctx.catalog)?;
    let layers = rasterize_layers(&scene, ctx.catalog)?;
    let source = composite_layers(base, &layers);
    let target = match mode {
        Mode::Segment => {
            let vm = OwnerMap::build(ctx.canvas, &layers).visible_mask(object);
            color_highlight(&source, &vm, color, ctx.params.highlight_opacity)?
        }
        Mode::Detect => draw_bbox(&source, &bbox, color, ctx.params.box_thickness)?,
    };
    let templates = match mode {
        Mode::Segment => &SEGMENT_TEMPLATES,
        Mode::Detect => &DETECT_TEMPLATES,
    };
    let prompt = templates
        .choose(rng)
        .expect("non-empty")
        .replace("{o}", &object_noun(&asset))
        .replace("{c}", color_name.name());
    Ok(Sample::new(
        TaskKind::SegDet,
        ctx.seed,
        vec![source],
        None,
        target,
        prompt,
        TaskDetail::SegDet {
            mode,
            scene,
            object,
            color,
            bbox,
        },
        Some(EditRegion::Boxes(vec![bbox])),
    ))
}
