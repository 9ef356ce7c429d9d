use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Ctx, EditKind, EditRegion, Sample, TaskDetail, TaskKind};
use crate::assets::{Asset, AssetKind};
use crate::error::{Error, Result};
use crate::prompts::{edit_instruction, name_color, EditOp};
use crate::render::composite;
use crate::scene::{
    bbox_of, fits_on_canvas, pick_background, place_objects, random_center, random_rotation, scale_for, uniform,
    Background, BackgroundChoice, ObjectRequest, Placement, Scene, MAX_PLACEMENT_ATTEMPTS,
};

/// "red apple" style noun phrase without an article.
pub(crate) fn object_noun(asset: &Asset) -> String {
    match asset.mean_opaque_color() {
        Some(c) => format!("{} {}", name_color(c), asset.primary_tag()),
        None => asset.primary_tag().to_owned(),
    }
}

pub(crate) fn indefinite(noun: &str) -> String {
    let article = if noun.starts_with(['a', 'e', 'i', 'o', 'u']) { "an" } else { "a" };
    format!("{article} {noun}")
}

pub(super) fn random_sticker(rng: &mut ChaCha8Rng, ctx: &Ctx) -> Result<String> {
    let ids = ctx.catalog.require(AssetKind::Sticker, 1)?;
    Ok(ids[rng.random_range(0..ids.len())].clone())
}

pub(super) fn instruct(rng: &mut ChaCha8Rng, ctx: &Ctx, edit: EditKind) -> Result<Sample> {
    let (w, h) = ctx.canvas;
    let sp = &ctx.params.stickers;
    let (source_scene, target_scene, op, boxes) = match edit {
        EditKind::Remove => {
            let bg = pick_background(rng, ctx.catalog, &BackgroundChoice::RandomAsset)?;
            let id = random_sticker(rng, ctx)?;
            let placed = place_objects(
                rng,
                ctx.catalog,
                ctx.canvas,
                &[ObjectRequest::frac(id.clone(), sp.size_frac)],
                sp.max_rotation,
                &super::non_overlapping(),
            )?;
            let asset = ctx.catalog.resolve(&id)?;
            let bbox = bbox_of(&placed[0], &asset, ctx.canvas)?;
            let target = Scene::empty(w, h, bg);
            let source = Scene {
                placements: placed,
                ..target.clone()
            };
            let op = EditOp::Remove {
                object: format!("the {}", object_noun(&asset)),
            };
            (source, target, op, vec![bbox])
        }
        EditKind::Add => {
            let source = Scene::empty(w, h, Background::Solid(ctx.params.blank));
            let id = random_sticker(rng, ctx)?;
            let placed = place_objects(
                rng,
                ctx.catalog,
                ctx.canvas,
                &[ObjectRequest::frac(id.clone(), sp.size_frac)],
                sp.max_rotation,
                &super::non_overlapping(),
            )?;
            let asset = ctx.catalog.resolve(&id)?;
            let bbox = bbox_of(&placed[0], &asset, ctx.canvas)?;
            let target = Scene {
                placements: placed,
                ..source.clone()
            };
            let op = EditOp::Add {
                object: indefinite(&object_noun(&asset)),
            };
            (source, target, op, vec![bbox])
        }
        EditKind::Replace => {
            let ids = ctx.catalog.require(AssetKind::Sticker, 2)?;
            let bg = pick_background(rng, ctx.catalog, &BackgroundChoice::RandomAsset)?;
            let old_id = ids[rng.random_range(0..ids.len())].clone();
            let old = ctx.catalog.resolve(&old_id)?;
            // prefer a replacement with a different tag so the edit is visible in words too
            let other_tag: Vec<&String> = ids
                .iter()
                .filter(|i| ctx.catalog.get(i).is_some_and(|a| a.primary_tag() != old.primary_tag()))
                .collect();
            let pool: Vec<&String> = if other_tag.is_empty() {
                ids.iter().filter(|i| **i != old_id).collect()
            } else {
                other_tag
            };
            let new_id = pool[rng.random_range(0..pool.len())].clone();
            let new = ctx.catalog.resolve(&new_id)?;
            let mut pose = None;
            for _ in 0..MAX_PLACEMENT_ATTEMPTS {
                let scale = scale_for(&old, ctx.canvas, uniform(rng, sp.size_frac));
                let rotation = random_rotation(rng, sp.max_rotation);
                let probe = Placement::new(old_id.clone(), (0.0, 0.0), scale, rotation, 0);
                let Some(p) = random_center(rng, &probe, &old, ctx.canvas) else {
                    continue;
                };
                let q = Placement {
                    asset_id: new_id.clone(),
                    ..p.clone()
                };
                if fits_on_canvas(&q, &new, ctx.canvas) {
                    pose = Some((p, q));
                    break;
                }
            }
            let (p, q) = pose.ok_or(Error::CanvasTooCrowded {
                index: 0,
                attempts: MAX_PLACEMENT_ATTEMPTS,
            })?;
            let boxes = vec![bbox_of(&p, &old, ctx.canvas)?, bbox_of(&q, &new, ctx.canvas)?];
            let source = Scene {
                width: w,
                height: h,
                background: bg.clone(),
                placements: vec![p],
            };
            let target = Scene {
                placements: vec![q],
                ..source.clone()
            };
            let op = EditOp::Replace {
                old: format!("the {}", object_noun(&old)),
                new: indefinite(&object_noun(&new)),
            };
            (source, target, op, boxes)
        }
    };
    let source = composite(&source_scene, ctx.catalog)?;
    let target = composite(&target_scene, ctx.catalog)?;
    let prompt = edit_instruction(&op, rng);
    Ok(Sample::new(
        TaskKind::InstructEdit,
        ctx.seed,
        vec![source],
        None,
        target,
        prompt,
        TaskDetail::InstructEdit {
            edit,
            op,
            source_scene,
            target_scene,
        },
        Some(EditRegion::Boxes(boxes)),
    ))
}
