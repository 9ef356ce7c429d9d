//! Orchestration: sharded parallel generation and preview contact sheets.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use image::imageops::{self, FilterType};
use image::{Rgb as RgbPx, RgbImage};
use rayon::prelude::*;
use serde::Serialize;

use crate::assets::{builtin_catalog, load_catalog, AssetCatalog};
use crate::config::GenConfig;
use crate::dataset::{derive_seed, shard_dir_name, write_shard, RunInfo, ShardEntry};
use crate::error::{Error, Result};
use crate::prompts::{polish, HttpPolisher, IdentityPolisher, Polisher};
use crate::taskgen::{generate, Sample, TaskDetail, TaskKind};

/// Failed samples above this fraction fail the run.
pub const MAX_ERROR_RATE: f64 = 0.01;
pub const MAX_PREVIEW: usize = 64;
pub const PREVIEW_CELL: u32 = 256;
const PREVIEW_GAP: u32 = 4;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SampleFailure {
    pub task: TaskKind,
    pub task_index: u64,
    pub sample_id: u64,
    pub error: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub config_hash: String,
    pub requested: BTreeMap<TaskKind, u64>,
    pub written: BTreeMap<TaskKind, u64>,
    pub failures: Vec<SampleFailure>,
    pub shards_written: u64,
    pub shards_skipped: u64,
    pub polish_warnings: u64,
    pub elapsed: Duration,
}

impl RunSummary {
    pub fn generated(&self) -> u64 {
        self.written.values().sum()
    }

    pub fn samples_per_sec(&self) -> f64 {
        let secs = self.elapsed.as_secs_f64();
        if secs > 0.0 {
            self.generated() as f64 / secs
        } else {
            0.0
        }
    }

    pub fn error_rate(&self) -> f64 {
        let attempted = self.generated() + self.failures.len() as u64;
        if attempted == 0 {
            0.0
        } else {
            self.failures.len() as f64 / attempted as f64
        }
    }

    pub fn succeeded(&self) -> bool {
        self.error_rate() <= MAX_ERROR_RATE
    }
}

pub fn load_assets(cfg: &GenConfig) -> Result<AssetCatalog> {
    match &cfg.asset_root {
        Some(root) => {
            let (cat, warnings) = load_catalog(root)?;
            for w in &warnings {
                log::warn!("{w}");
            }
            Ok(cat)
        }
        None => Ok(builtin_catalog()),
    }
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::config("jobs", e.to_string()))
}

/// The global sample order: tasks in a fixed order, indices ascending.
fn sample_stream(counts: &BTreeMap<TaskKind, u64>) -> Vec<(TaskKind, u64)> {
    TaskKind::ALL
        .iter()
        .flat_map(|t| (0..counts.get(t).copied().unwrap_or(0)).map(move |i| (*t, i)))
        .collect()
}

/// Generates the configured dataset. Existing complete shards of the same
/// configuration are kept, so an interrupted run can be resumed.
pub fn run(cfg: &GenConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let catalog = load_assets(cfg)?;
    let polisher: Box<dyn Polisher + Sync> = match HttpPolisher::from_config(&cfg.polisher) {
        Some(p) => Box::new(p),
        None => Box::new(IdentityPolisher),
    };
    let polishing = cfg.polisher.url.is_some();
    let run_info = RunInfo::new(cfg.canonical(), &catalog, cfg.asset_root.clone());
    let out = &cfg.out_dir;
    if out.join(crate::dataset::RUN_FILE).exists() {
        let existing = RunInfo::load(out)?;
        if existing.config_hash != run_info.config_hash {
            return Err(Error::config(
                "out_dir",
                format!("{} holds a run with config hash {}", out.display(), existing.config_hash),
            ));
        }
    }
    run_info.save(out)?;

    let start = Instant::now();
    let stream = sample_stream(&run_info.config.counts);
    let shard_size = run_info.config.shard_size as usize;
    let pool = thread_pool(cfg.jobs)?;
    let mut summary = RunSummary {
        out_dir: out.clone(),
        config_hash: run_info.config_hash.clone(),
        requested: run_info.config.counts.clone(),
        written: TaskKind::ALL.iter().map(|t| (*t, 0)).collect(),
        failures: Vec::new(),
        shards_written: 0,
        shards_skipped: 0,
        polish_warnings: 0,
        elapsed: Duration::ZERO,
    };
    for (shard_id, chunk) in stream.chunks(shard_size.max(1)).enumerate() {
        let shard_id = shard_id as u32;
        let first_id = (shard_id as usize * shard_size) as u64;
        let dir = out.join(shard_dir_name(shard_id));
        if dir.is_dir() {
            // shards appear atomically, so an existing one is complete
            let records = crate::dataset::read_manifest(&dir)?;
            for r in &records {
                *summary.written.entry(r.task).or_default() += 1;
            }
            summary.shards_skipped += 1;
            log::info!("shard {shard_id}: kept {} existing samples", records.len());
            continue;
        }
        let results: Vec<std::result::Result<ShardEntry, SampleFailure>> = pool.install(|| {
            chunk
                .par_iter()
                .enumerate()
                .map(|(k, &(task, task_index))| {
                    let sample_id = first_id + k as u64;
                    let seed = derive_seed(run_info.config.master_seed, task, task_index);
                    match generate(task, seed, &run_info.config.params, &catalog) {
                        Ok(mut sample) => {
                            let mut polish_warning = None;
                            if polishing && !sample.raw_prompt.is_empty() {
                                let p = polish(&sample.raw_prompt, polisher.as_ref());
                                sample.prompt = p.text;
                                polish_warning = p.warning;
                            }
                            Ok(ShardEntry {
                                sample_id,
                                task_index,
                                sample,
                                polish_warning,
                            })
                        }
                        Err(e) => Err(SampleFailure {
                            task,
                            task_index,
                            sample_id,
                            error: e.to_string(),
                        }),
                    }
                })
                .collect()
        });
        let mut entries = Vec::with_capacity(results.len());
        for r in results {
            match r {
                Ok(e) => entries.push(e),
                Err(f) => {
                    log::warn!("{} #{}: {}", f.task, f.task_index, f.error);
                    summary.failures.push(f);
                }
            }
        }
        summary.polish_warnings += entries.iter().filter(|e| e.polish_warning.is_some()).count() as u64;
        let manifest = pool.install(|| write_shard(&entries, out, shard_id, &run_info))?;
        for r in &manifest.records {
            *summary.written.entry(r.task).or_default() += 1;
        }
        summary.shards_written += 1;
        log::info!("shard {shard_id}: wrote {} samples", manifest.records.len());
    }
    summary.elapsed = start.elapsed();
    Ok(summary)
}

fn fit_cell(img: &RgbImage, cell: u32) -> (RgbImage, f64) {
    let (w, h) = img.dimensions();
    let k = (cell as f64 / w as f64).min(cell as f64 / h as f64);
    let nw = ((w as f64 * k).round() as u32).max(1);
    let nh = ((h as f64 * k).round() as u32).max(1);
    (imageops::resize(img, nw, nh, FilterType::Triangle), k)
}

fn put(img: &mut RgbImage, x: i64, y: i64, c: [u8; 3]) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, RgbPx(c));
    }
}

fn line(img: &mut RgbImage, (x0, y0): (f64, f64), (x1, y1): (f64, f64), c: [u8; 3]) {
    let n = (x1 - x0).abs().max((y1 - y0).abs()).ceil().max(1.0) as usize;
    for i in 0..=n {
        let t = i as f64 / n as f64;
        let x = (x0 + (x1 - x0) * t).round() as i64;
        let y = (y0 + (y1 - y0) * t).round() as i64;
        for (ox, oy) in [(0, 0), (1, 0), (0, 1)] {
            put(img, x + ox, y + oy, c);
        }
    }
}

/// Draws a handle dot at `from` and an arrow to `to`.
pub fn draw_arrow(img: &mut RgbImage, from: (f64, f64), to: (f64, f64), color: [u8; 3]) {
    line(img, from, to, color);
    for dy in -2..=2i64 {
        for dx in -2..=2i64 {
            if dx * dx + dy * dy <= 5 {
                put(img, from.0.round() as i64 + dx, from.1.round() as i64 + dy, color);
            }
        }
    }
    let (vx, vy) = (to.0 - from.0, to.1 - from.1);
    let len = (vx * vx + vy * vy).sqrt();
    if len < 1e-9 {
        return;
    }
    let (ux, uy) = (vx / len, vy / len);
    let head = 6.0f64.min(len * 0.5).max(3.0);
    for s in [1.0, -1.0] {
        // 30 degree barbs
        let (c, sn) = (0.866_025_403_784_438_6, 0.5 * s);
        let bx = -(ux * c - uy * sn);
        let by = -(ux * sn + uy * c);
        line(img, to, (to.0 + bx * head, to.1 + by * head), color);
    }
}

const ARROW: [u8; 3] = [255, 40, 40];

/// Renders `n` samples of one task as rows of source | target. Tasks
/// without a source image show the mask or an empty panel on the left.
pub fn preview(cfg: &GenConfig, task: TaskKind, n: usize) -> Result<RgbImage> {
    if n == 0 || n > MAX_PREVIEW {
        return Err(Error::config("n", format!("must be in 1..={MAX_PREVIEW}, got {n}")));
    }
    cfg.validate()?;
    let catalog = load_assets(cfg)?;
    let counts = cfg.canonical();
    let samples: Vec<Sample> = (0..n as u64)
        .into_par_iter()
        .map(|i| generate(task, derive_seed(counts.master_seed, task, i), &counts.params, &catalog))
        .collect::<Result<_>>()?;
    Ok(contact_sheet(&samples))
}

pub fn contact_sheet(samples: &[Sample]) -> RgbImage {
    let cell = PREVIEW_CELL;
    let rows = samples.len() as u32;
    let width = 2 * cell + 3 * PREVIEW_GAP;
    let height = rows * cell + (rows + 1) * PREVIEW_GAP;
    let mut sheet = RgbImage::from_pixel(width, height, RgbPx([32, 32, 32]));
    for (r, s) in samples.iter().enumerate() {
        let y = PREVIEW_GAP + r as u32 * (cell + PREVIEW_GAP);
        let left = match (s.sources.first(), &s.mask) {
            (Some(src), _) => Some(src.clone()),
            (None, Some(m)) => Some(crate::taskgen::gray_to_rgb(m.as_image())),
            (None, None) => None,
        };
        if let Some(left) = left {
            let (mut panel, k) = fit_cell(&left, cell);
            if let TaskDetail::DragEdit { points, .. } = &s.meta.detail {
                for p in points {
                    draw_arrow(&mut panel, (p.x * k, p.y * k), ((p.x + p.dx) * k, (p.y + p.dy) * k), ARROW);
                }
            }
            imageops::overlay(&mut sheet, &panel, PREVIEW_GAP as i64, y as i64);
        }
        let (panel, _) = fit_cell(&s.target, cell);
        imageops::overlay(&mut sheet, &panel, (2 * PREVIEW_GAP + cell) as i64, y as i64);
    }
    sheet
}
