//! On-disk dataset: aspect buckets, per-sample seeds, sharded PNG + JSONL
//! output and replay validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{ExtendedColorType, GrayImage, ImageEncoder, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assets::{builtin_catalog, load_catalog, AssetCatalog};
use crate::config::CanonicalConfig;
use crate::error::{Error, Result};
use crate::taskgen::{generate, Sample, SampleMeta, TaskKind};

pub const BUCKETS: u8 = 31;
pub const RUN_FILE: &str = "run.json";
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const MAX_REPORTED_FAILURES: usize = 10;

/// Log-uniform aspect bucket in [0, 30]; 15 is square. Ties round to even,
/// which keeps `bucket_of(w, h) + bucket_of(h, w) == 30`.
pub fn bucket_of(width: u32, height: u32) -> u8 {
    let log_ratio = ((width as f64).log2() - (height as f64).log2()).clamp(-2.0, 2.0);
    (15.0 + 7.5 * log_ratio).round_ties_even().clamp(0.0, 30.0) as u8
}

/// Aspect interval `[lo, hi)` covered by a bucket (the last is closed).
pub fn bucket_interval(index: u8) -> (f64, f64) {
    let edge = |k: f64| 2f64.powf(((k - 15.0) / 7.5).clamp(-2.0, 2.0));
    let i = index.min(BUCKETS - 1) as f64;
    (edge(i - 0.5), edge(i + 0.5))
}

fn fnv1a(s: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable per-sample seed. For fixed master seed and task the map from
/// index to seed is a bijection, so seeds never collide within a task.
pub fn derive_seed(master_seed: u64, task: TaskKind, sample_index: u64) -> u64 {
    let h = mix(mix(master_seed) ^ fnv1a(task.tag()));
    mix(h ^ sample_index)
}

pub fn shard_dir_name(shard_id: u32) -> String {
    format!("shard-{shard_id:05}")
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileSet {
    pub src: Option<String>,
    pub src2: Option<String>,
    pub mask: Option<String>,
    pub tgt: Option<String>,
}

impl FileSet {
    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &String)> {
        [("src", &self.src), ("src2", &self.src2), ("mask", &self.mask), ("tgt", &self.tgt)]
            .into_iter()
            .filter_map(|(r, f)| f.as_ref().map(|f| (r, f)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub config_hash: String,
    pub master_seed: u64,
    pub task_index: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub polish_warning: Option<String>,
    #[serde(flatten)]
    pub sample: SampleMeta,
}

/// One manifest line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub sample_id: u64,
    pub task: TaskKind,
    pub seed: u64,
    pub bucket: u8,
    pub prompt: String,
    pub raw_prompt: String,
    pub files: FileSet,
    pub meta: RecordMeta,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShardManifest {
    pub shard_id: u32,
    pub config_hash: String,
    pub master_seed: u64,
    pub records: Vec<ManifestRecord>,
}

/// A generated sample with its run coordinates.
#[derive(Clone, Debug)]
pub struct ShardEntry {
    pub sample_id: u64,
    pub task_index: u64,
    pub sample: Sample,
    pub polish_warning: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub config_hash: String,
    pub catalog_fingerprint: String,
    pub asset_root: Option<PathBuf>,
    pub config: CanonicalConfig,
}

impl RunInfo {
    pub fn new(config: CanonicalConfig, catalog: &AssetCatalog, asset_root: Option<PathBuf>) -> Self {
        RunInfo {
            config_hash: config.hash(),
            catalog_fingerprint: catalog.fingerprint(),
            asset_root,
            config,
        }
    }

    pub fn load(out_dir: &Path) -> Result<Self> {
        let path = out_dir.join(RUN_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Manifest {
            path,
            message: e.to_string(),
        })
    }

    pub fn save(&self, out_dir: &Path) -> Result<()> {
        fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let path = out_dir.join(RUN_FILE);
        let tmp = out_dir.join(".run.json.tmp");
        let text = serde_json::to_string_pretty(&serde_json::to_value(self)?)? + "\n";
        fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }

    pub fn catalog(&self) -> Result<AssetCatalog> {
        match &self.asset_root {
            Some(root) => Ok(load_catalog(root)?.0),
            None => Ok(builtin_catalog()),
        }
    }
}

pub fn encode_png_rgb(img: &RgbImage) -> Vec<u8> {
    encode_png(img.as_raw(), img.dimensions(), ExtendedColorType::Rgb8)
}

pub fn encode_png_gray(img: &GrayImage) -> Vec<u8> {
    encode_png(img.as_raw(), img.dimensions(), ExtendedColorType::L8)
}

fn encode_png(raw: &[u8], (w, h): (u32, u32), color: ExtendedColorType) -> Vec<u8> {
    let mut buf = Vec::with_capacity(raw.len() / 4);
    PngEncoder::new_with_quality(&mut buf, CompressionType::Fast, FilterType::Sub)
        .write_image(raw, w, h, color)
        .expect("in-memory PNG encoding");
    buf
}

struct Encoded {
    record: ManifestRecord,
    files: Vec<(String, Vec<u8>)>,
}

fn encode_entry(entry: &ShardEntry, shard: &str, run: &RunInfo) -> Encoded {
    let s = &entry.sample;
    let name = |role: &str| format!("{:08}_{role}.png", entry.sample_id);
    let mut files = Vec::new();
    let mut set = FileSet::default();
    if let Some(src) = s.sources.first() {
        files.push((name("src"), encode_png_rgb(src)));
        set.src = Some(format!("{shard}/{}", name("src")));
    }
    if let Some(src2) = s.sources.get(1) {
        files.push((name("src2"), encode_png_rgb(src2)));
        set.src2 = Some(format!("{shard}/{}", name("src2")));
    }
    if let Some(mask) = &s.mask {
        files.push((name("mask"), encode_png_gray(mask.as_image())));
        set.mask = Some(format!("{shard}/{}", name("mask")));
    }
    files.push((name("tgt"), encode_png_rgb(&s.target)));
    set.tgt = Some(format!("{shard}/{}", name("tgt")));
    Encoded {
        record: ManifestRecord {
            sample_id: entry.sample_id,
            task: s.task,
            seed: s.seed,
            bucket: s.meta.bucket,
            prompt: s.prompt.clone(),
            raw_prompt: s.raw_prompt.clone(),
            files: set,
            meta: RecordMeta {
                config_hash: run.config_hash.clone(),
                master_seed: run.config.master_seed,
                task_index: entry.task_index,
                polish_warning: entry.polish_warning.clone(),
                sample: s.meta.clone(),
            },
        },
        files,
    }
}

/// Writes a shard atomically: everything goes to a temporary directory that
/// is renamed into place only after the manifest is complete.
pub fn write_shard(entries: &[ShardEntry], out_dir: &Path, shard_id: u32, run: &RunInfo) -> Result<ShardManifest> {
    write_shard_inner(entries, out_dir, shard_id, run, None)
}

pub(crate) fn write_shard_inner(
    entries: &[ShardEntry],
    out_dir: &Path,
    shard_id: u32,
    run: &RunInfo,
    fail_after_files: Option<usize>,
) -> Result<ShardManifest> {
    if entries.windows(2).any(|w| w[0].sample_id >= w[1].sample_id) {
        return Err(Error::Manifest {
            path: out_dir.join(shard_dir_name(shard_id)),
            message: "sample ids must be strictly increasing".into(),
        });
    }
    let shard = shard_dir_name(shard_id);
    let final_dir = out_dir.join(&shard);
    let tmp_dir = out_dir.join(format!(".{shard}.tmp"));
    let encoded: Vec<Encoded> = entries.par_iter().map(|e| encode_entry(e, &shard, run)).collect();
    let result = (|| -> Result<()> {
        if tmp_dir.exists() {
            fs::remove_dir_all(&tmp_dir).map_err(|e| Error::io(&tmp_dir, e))?;
        }
        fs::create_dir_all(&tmp_dir).map_err(|e| Error::io(&tmp_dir, e))?;
        let mut written = 0usize;
        for enc in &encoded {
            for (name, bytes) in &enc.files {
                if fail_after_files.is_some_and(|n| written >= n) {
                    return Err(Error::io(&tmp_dir, std::io::Error::other("injected write failure")));
                }
                let path = tmp_dir.join(name);
                fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
                written += 1;
            }
        }
        let path = tmp_dir.join(MANIFEST_FILE);
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        for enc in &encoded {
            serde_json::to_writer(&mut w, &enc.record)?;
            w.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        if final_dir.exists() {
            fs::remove_dir_all(&final_dir).map_err(|e| Error::io(&final_dir, e))?;
        }
        fs::rename(&tmp_dir, &final_dir).map_err(|e| Error::io(&final_dir, e))
    })();
    if let Err(e) = result {
        let _ = fs::remove_dir_all(&tmp_dir);
        return Err(e);
    }
    Ok(ShardManifest {
        shard_id,
        config_hash: run.config_hash.clone(),
        master_seed: run.config.master_seed,
        records: encoded.into_iter().map(|e| e.record).collect(),
    })
}

pub fn read_manifest(shard_dir: &Path) -> Result<Vec<ManifestRecord>> {
    let path = shard_dir.join(MANIFEST_FILE);
    let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ManifestRecord = serde_json::from_str(&line).map_err(|e| Error::Manifest {
            path: path.clone(),
            message: format!("line {}: {e}", n + 1),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Shard directories of a run, in name order.
pub fn shard_dirs(out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(out_dir).map_err(|e| Error::io(out_dir, e))? {
        let entry = entry.map_err(|e| Error::io(out_dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with("shard-") && entry.path().is_dir() {
            dirs.push(entry.path());
        }
    }
    dirs.sort();
    Ok(dirs)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub shard: String,
    pub sample_id: Option<u64>,
    pub task: Option<TaskKind>,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TaskTally {
    pub passed: u64,
    pub total: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub shards: usize,
    pub records: u64,
    pub per_task: BTreeMap<TaskKind, TaskTally>,
    pub failure_count: u64,
    /// The first failures, in shard and record order.
    pub failures: Vec<Failure>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.failure_count == 0
    }

    fn fail(&mut self, f: Failure) {
        self.failure_count += 1;
        if self.failures.len() < MAX_REPORTED_FAILURES {
            self.failures.push(f);
        }
    }
}

fn decode_rgb(path: &Path) -> std::result::Result<RgbImage, String> {
    let img = image::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    match img {
        image::DynamicImage::ImageRgb8(i) => Ok(i),
        other => Err(format!("{}: expected RGB8, found {:?}", path.display(), other.color())),
    }
}

fn decode_gray(path: &Path) -> std::result::Result<GrayImage, String> {
    let img = image::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    match img {
        image::DynamicImage::ImageLuma8(i) => Ok(i),
        other => Err(format!("{}: expected L8, found {:?}", path.display(), other.color())),
    }
}

fn check_record(out_dir: &Path, rec: &ManifestRecord, run: &RunInfo, catalog: &AssetCatalog) -> std::result::Result<(), String> {
    if rec.meta.config_hash != run.config_hash {
        return Err(format!("config hash {} differs from the run's {}", rec.meta.config_hash, run.config_hash));
    }
    if rec.meta.master_seed != run.config.master_seed {
        return Err("master seed differs from the run's".into());
    }
    let expected_seed = derive_seed(run.config.master_seed, rec.task, rec.meta.task_index);
    if rec.seed != expected_seed {
        return Err(format!("seed {} does not derive from task index {}", rec.seed, rec.meta.task_index));
    }
    let sample = generate(rec.task, rec.seed, &run.config.params, catalog).map_err(|e| format!("replay failed: {e}"))?;
    if rec.raw_prompt != sample.raw_prompt {
        return Err("raw prompt differs from replay".into());
    }
    if rec.bucket != sample.meta.bucket {
        return Err("bucket differs from replay".into());
    }
    if rec.meta.sample != sample.meta {
        return Err("metadata differs from replay".into());
    }
    let expect_files = [
        ("src", !sample.sources.is_empty(), &rec.files.src),
        ("src2", sample.sources.get(1).is_some(), &rec.files.src2),
        ("mask", sample.mask.is_some(), &rec.files.mask),
        ("tgt", true, &rec.files.tgt),
    ];
    for (role, present, file) in expect_files {
        if present != file.is_some() {
            return Err(format!("file role `{role}` presence differs from replay"));
        }
    }
    let mut decoded = sample.clone();
    decoded.sources.clear();
    if let Some(f) = &rec.files.src {
        let img = decode_rgb(&out_dir.join(f))?;
        if Some(&img) != sample.sources.first() {
            return Err(format!("{f} differs from replay"));
        }
        decoded.sources.push(img);
    }
    if let Some(f) = &rec.files.src2 {
        let img = decode_rgb(&out_dir.join(f))?;
        if Some(&img) != sample.sources.get(1) {
            return Err(format!("{f} differs from replay"));
        }
        decoded.sources.push(img);
    }
    if let Some(f) = &rec.files.mask {
        let img = decode_gray(&out_dir.join(f))?;
        if Some(&img) != sample.mask.as_ref().map(|m| m.as_image()) {
            return Err(format!("{f} differs from replay"));
        }
    }
    if let Some(f) = &rec.files.tgt {
        let img = decode_rgb(&out_dir.join(f))?;
        if img != sample.target {
            return Err(format!("{f} differs from replay"));
        }
        decoded.target = img;
    }
    decoded.check_locality()
}

/// Replays every record of a run and checks files, seeds, hashes and
/// pair locality.
pub fn validate_run(out_dir: &Path) -> Result<ValidationReport> {
    let run = RunInfo::load(out_dir)?;
    let recomputed = run.config.hash();
    if recomputed != run.config_hash {
        return Err(Error::Manifest {
            path: out_dir.join(RUN_FILE),
            message: format!("stored config hash {} does not match config ({recomputed})", run.config_hash),
        });
    }
    let catalog = run.catalog()?;
    if catalog.fingerprint() != run.catalog_fingerprint {
        return Err(Error::Manifest {
            path: out_dir.join(RUN_FILE),
            message: "asset catalog changed since generation".into(),
        });
    }
    let dirs = shard_dirs(out_dir)?;
    if dirs.is_empty() {
        return Err(Error::Manifest {
            path: out_dir.to_owned(),
            message: "no shard directories".into(),
        });
    }
    let mut report = ValidationReport {
        shards: dirs.len(),
        ..ValidationReport::default()
    };
    for dir in &dirs {
        let shard = dir.file_name().expect("named").to_string_lossy().into_owned();
        let records = read_manifest(dir)?;
        // structural checks first, in record order
        let mut structural: BTreeMap<usize, String> = BTreeMap::new();
        let mut referenced = BTreeSet::new();
        for (i, rec) in records.iter().enumerate() {
            if i > 0 && records[i - 1].sample_id >= rec.sample_id {
                structural.entry(i).or_insert_with(|| "sample ids not strictly increasing".into());
            }
            for (_, f) in rec.files.iter() {
                let in_shard = Path::new(f).parent().is_some_and(|p| p == Path::new(&shard));
                if !in_shard || !referenced.insert(f.clone()) {
                    structural.entry(i).or_insert_with(|| format!("file {f} is outside the shard or referenced twice"));
                }
                if !out_dir.join(f).is_file() {
                    structural.entry(i).or_insert_with(|| format!("missing file {f}"));
                }
            }
        }
        let results: Vec<std::result::Result<(), String>> = records
            .par_iter()
            .enumerate()
            .map(|(i, rec)| match structural.get(&i) {
                Some(reason) => Err(reason.clone()),
                None => check_record(out_dir, rec, &run, &catalog),
            })
            .collect();
        for (rec, res) in records.iter().zip(results) {
            report.records += 1;
            let tally = report.per_task.entry(rec.task).or_default();
            tally.total += 1;
            match res {
                Ok(()) => tally.passed += 1,
                Err(reason) => report.fail(Failure {
                    shard: shard.clone(),
                    sample_id: Some(rec.sample_id),
                    task: Some(rec.task),
                    reason,
                }),
            }
        }
        for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name == MANIFEST_FILE {
                continue;
            }
            if !referenced.contains(&format!("{shard}/{name}")) {
                report.fail(Failure {
                    shard: shard.clone(),
                    sample_id: None,
                    task: None,
                    reason: format!("unreferenced file {name}"),
                });
            }
        }
    }
    Ok(report)
}
