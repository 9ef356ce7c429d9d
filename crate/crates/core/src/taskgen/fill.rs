use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Ctx, EditRegion, Sample, TaskDetail, TaskKind};
use crate::condmaps::{apply_fill, gen_mask, MaskKind};
use crate::error::Result;
use crate::prompts::describe_scene;
use crate::render::composite;
use crate::scene::sample_scene;

// stream id of the caption coin, kept apart from the main sample stream
const CAPTION_STREAM: u64 = 0xC0FFEE;

/// The caption coin for a sample: a pure function of its seed.
pub fn caption_included(seed: u64, prob: f64) -> bool {
    let mut coin = ChaCha8Rng::seed_from_u64(seed);
    coin.set_stream(CAPTION_STREAM);
    coin.random_bool(prob)
}

pub(super) fn masked(rng: &mut ChaCha8Rng, ctx: &Ctx, task: TaskKind, kind: MaskKind) -> Result<Sample> {
    let mut params = super::t2i::sticker_scene_params(ctx);
    params.count = ctx.params.pool_count;
    let scene = sample_scene(rng, ctx.catalog, &params)?;
    let image = composite(&scene, ctx.catalog)?;
    let caption = describe_scene(&scene, ctx.catalog, rng)?.prompt;
    let mask = gen_mask(kind, rng, ctx.canvas, &ctx.params.masks);
    let source = apply_fill(&image, &mask)?;
    let include = caption_included(ctx.seed, ctx.params.caption_prob);
    let prompt = if include { caption.clone() } else { String::new() };
    Ok(Sample::new(
        task,
        ctx.seed,
        vec![source],
        Some(mask),
        image,
        prompt,
        TaskDetail::Masked {
            mask_kind: kind,
            scene,
            caption,
            caption_included: include,
        },
        Some(EditRegion::Mask),
    ))
}
