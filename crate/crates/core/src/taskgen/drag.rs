use std::f64::consts::PI;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Ctx, DragKind, EditRegion, Sample, TaskDetail, TaskKind};
use crate::error::{Error, Result};
use crate::prompts::{encode_drag, PixelDrag};
use crate::raster::Mask;
use crate::render::{composite_layers, rasterize_layers, render_background, OwnerMap};
use crate::scene::{
    bbox_of, fits_on_canvas, pick_background, place_objects, uniform, uniform_u32, ObjectRequest, Placement, Scene,
    MAX_SCALE, MIN_SCALE,
};

pub const TRANSFORM_ATTEMPTS: usize = 100;

/// Motion of one object about its own center: translate by (dx, dy), scale
/// by `scale`, rotate by `rotation`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DragTransform {
    pub dx: f64,
    pub dy: f64,
    pub scale: f64,
    pub rotation: f64,
}

impl DragTransform {
    pub const IDENTITY: DragTransform = DragTransform {
        dx: 0.0,
        dy: 0.0,
        scale: 1.0,
        rotation: 0.0,
    };

    pub fn apply(&self, p: &Placement) -> Placement {
        let mut rotation = p.rotation + self.rotation;
        if rotation > PI {
            rotation -= 2.0 * PI;
        } else if rotation <= -PI {
            rotation += 2.0 * PI;
        }
        Placement {
            center: (p.center.0 + self.dx, p.center.1 + self.dy),
            scale: p.scale * self.scale,
            rotation,
            ..p.clone()
        }
    }

    /// Image of canvas point (x, y) under the motion of an object centered at `c`.
    pub fn map_point(&self, c: (f64, f64), x: f64, y: f64) -> (f64, f64) {
        let (s, co) = self.rotation.sin_cos();
        let (ux, uy) = ((x - c.0) * self.scale, (y - c.1) * self.scale);
        (c.0 + self.dx + co * ux - s * uy, c.1 + self.dy + s * ux + co * uy)
    }
}

pub fn apply_drag(scene: &Scene, object: usize, transform: &DragTransform) -> Scene {
    let mut out = scene.clone();
    out.placements[object] = transform.apply(&scene.placements[object]);
    out
}

/// `k` distinct pixel centers drawn uniformly from `mask`, each paired with
/// its displacement under `transform`.
pub fn drag_points(
    rng: &mut impl Rng,
    mask: &Mask,
    center: (f64, f64),
    transform: &DragTransform,
    k: usize,
) -> Vec<PixelDrag> {
    let on: Vec<(u32, u32)> = mask.iter_on().collect();
    let k = k.min(on.len());
    sample_indices(rng, on.len(), k)
        .into_iter()
        .map(|i| {
            let (x, y) = (on[i].0 as f64 + 0.5, on[i].1 as f64 + 0.5);
            let (tx, ty) = transform.map_point(center, x, y);
            PixelDrag {
                x,
                y,
                dx: tx - x,
                dy: ty - y,
            }
        })
        .collect()
}

fn sample_transform(rng: &mut ChaCha8Rng, ctx: &Ctx, kind: DragKind) -> DragTransform {
    let d = &ctx.params.drag;
    let mut t = DragTransform::IDENTITY;
    match kind {
        DragKind::Translate => {
            let min_side = ctx.canvas.0.min(ctx.canvas.1) as f64;
            let len = (uniform(rng, d.translate_frac) * min_side).max(1.0);
            let angle = rng.random_range(0.0..2.0 * PI);
            t.dx = (len * angle.cos()).round();
            t.dy = (len * angle.sin()).round();
            if t.dx == 0.0 && t.dy == 0.0 {
                t.dx = 1.0;
            }
        }
        DragKind::Scale => {
            let (lo, hi) = (d.scale.0.ln(), d.scale.1.ln());
            loop {
                let s = uniform(rng, (lo, hi)).exp();
                if (s - 1.0).abs() >= 0.1 || d.scale.1 - d.scale.0 < 0.2 {
                    t.scale = s;
                    break;
                }
            }
        }
        DragKind::Rotate => loop {
            let r = uniform(rng, (-d.max_rotation, d.max_rotation));
            if r.abs() >= 0.1 || d.max_rotation < 0.2 {
                t.rotation = r;
                break;
            }
        },
    }
    t
}

pub(super) fn drag(rng: &mut ChaCha8Rng, ctx: &Ctx, kind: DragKind) -> Result<Sample> {
    let d = &ctx.params.drag;
    let (w, h) = ctx.canvas;
    let background = pick_background(rng, ctx.catalog, &d.background)?;
    let n_distractors = uniform_u32(rng, d.distractors);
    let mut requests = Vec::new();
    for _ in 0..n_distractors {
        requests.push(ObjectRequest::frac(super::edit::random_sticker(rng, ctx)?, ctx.params.stickers.size_frac));
    }
    let object_id = super::edit::random_sticker(rng, ctx)?;
    requests.push(ObjectRequest::frac(object_id.clone(), d.size_frac));
    let placements = place_objects(
        rng,
        ctx.catalog,
        ctx.canvas,
        &requests,
        ctx.params.stickers.max_rotation,
        &super::non_overlapping(),
    )?;
    let object = placements.len() - 1;
    let source_scene = Scene {
        width: w,
        height: h,
        background,
        placements,
    };
    let asset = ctx.catalog.resolve(&object_id)?;
    let before = &source_scene.placements[object];
    let mut chosen = None;
    for _ in 0..TRANSFORM_ATTEMPTS {
        let t = sample_transform(rng, ctx, kind);
        let after = t.apply(before);
        if (MIN_SCALE..=MAX_SCALE).contains(&after.scale) && fits_on_canvas(&after, &asset, ctx.canvas) {
            chosen = Some(t);
            break;
        }
    }
    let transform = chosen.ok_or(Error::TransformRetriesExhausted(TRANSFORM_ATTEMPTS))?;
    let target_scene = apply_drag(&source_scene, object, &transform);

    let base = render_background(&source_scene.background, ctx.canvas, ctx.catalog)?;
    let src_layers = rasterize_layers(&source_scene, ctx.catalog)?;
    let mut tgt_layers = src_layers.clone();
    tgt_layers[object] = crate::render::render_sprite(&target_scene.placements[object], &asset, ctx.canvas)?;
    let visible = OwnerMap::build(ctx.canvas, &src_layers).visible_mask(object);
    let k = uniform_u32(rng, d.points) as usize;
    let points = drag_points(rng, &visible, before.center, &transform, k);
    let (spec, prompt) = encode_drag(&points, ctx.canvas)?;
    let boxes = vec![
        bbox_of(before, &asset, ctx.canvas)?,
        bbox_of(&target_scene.placements[object], &asset, ctx.canvas)?,
    ];
    let source = composite_layers(base.clone(), &src_layers);
    let target = composite_layers(base, &tgt_layers);
    Ok(Sample::new(
        TaskKind::DragEdit,
        ctx.seed,
        vec![source],
        None,
        target,
        prompt,
        TaskDetail::DragEdit {
            drag: kind,
            object,
            transform,
            source_scene,
            target_scene,
            points,
            spec,
        },
        Some(EditRegion::Boxes(boxes)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_map_matches_placement_transform() {
        let p = Placement::new("x", (100.0, 80.0), 1.2, 0.4, 0);
        let t = DragTransform {
            dx: 7.0,
            dy: -3.0,
            scale: 1.5,
            rotation: -0.9,
        };
        let q = t.apply(&p);
        // a point at the object's center moves with the center
        assert_eq!(t.map_point(p.center, 100.0, 80.0), q.center);
        // a point offset along the object's local x axis stays on that axis
        let (s, c) = p.rotation.sin_cos();
        let (x, y) = (100.0 + 10.0 * c, 80.0 + 10.0 * s);
        let (mx, my) = t.map_point(p.center, x, y);
        let (s2, c2) = q.rotation.sin_cos();
        assert!((mx - (q.center.0 + 15.0 * c2)).abs() < 1e-9);
        assert!((my - (q.center.1 + 15.0 * s2)).abs() < 1e-9);
    }

    #[test]
    fn identity_transform_changes_nothing() {
        let p = Placement::new("x", (10.0, 20.0), 1.0, 0.5, 3);
        assert_eq!(DragTransform::IDENTITY.apply(&p), p);
    }
}
