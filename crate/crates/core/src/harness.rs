//! Experiment driver: encrypt every image under several keys, send the
//! ciphertext through the JPEG channel, attack it and score the assembly.
//!
//! Keys are derived per attempt so any subset of a plan re-runs identically:
//!
//! ```text
//! digest = SHA-256("etc-jigsaw key v1" || u64le(master_seed)
//!                  || u64le(len(image_id)) || image_id || u64le(key_index))
//! k1..k4 = u64le(digest[0..8]), u64le(digest[8..16]), ...
//! ```

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{transmit, ChannelConfig, Quality, Subsampling};
use crate::cipher::{decrypt_with, encrypt_with, expand_key, CipherConfig, PuzzleType, SecretKey};
use crate::error::{Error, Result};
use crate::metrics::{ground_truth, score, score_image, ScoreTriple};
use crate::raster::{grid_dims, RasterImage};
use crate::solver::{attack, AttackConfig};

fn default_keys() -> usize {
    3
}

fn default_block() -> usize {
    32
}

fn default_true() -> bool {
    true
}

/// An experiment description, usually read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    /// Directory of lossless images (PPM or PNG), relative to the plan file.
    pub images: PathBuf,
    pub types: Vec<PuzzleType>,
    pub qualities: Vec<Quality>,
    #[serde(default = "default_keys")]
    pub keys_per_image: usize,
    #[serde(default = "default_block")]
    pub block: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub subsampling: Subsampling,
    /// Quality of a second, provider-side recompression. Absent means the
    /// ciphertext is compressed once.
    #[serde(default)]
    pub sns_quality: Option<Quality>,
    /// Largest number of blocks attacked per image; bigger grids are center-cropped.
    #[serde(default)]
    pub budget: Option<usize>,
    /// Use confidence-weighted merge orders in the solver.
    #[serde(default = "default_true")]
    pub confidence: bool,
}

impl ExperimentPlan {
    pub fn from_json(text: &str) -> Result<Self> {
        let plan: ExperimentPlan = serde_json::from_str(text)?;
        plan.validate()?;
        Ok(plan)
    }

    /// Reads a plan; a relative image directory is taken relative to the file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut plan = ExperimentPlan::from_json(&text)?;
        if plan.images.is_relative() {
            if let Some(dir) = path.parent() {
                plan.images = dir.join(&plan.images);
            }
        }
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.keys_per_image == 0 {
            return Err(Error::Config("keys_per_image must be at least 1".into()));
        }
        if self.types.is_empty() || self.qualities.is_empty() {
            return Err(Error::Config("plan needs at least one type and one quality".into()));
        }
        if self.block < 2 {
            return Err(Error::Config(format!("block {} is smaller than 2", self.block)));
        }
        if self.budget.is_some_and(|b| b < 4) {
            return Err(Error::Config("budget below 4 blocks".into()));
        }
        Ok(())
    }

    pub fn channel(&self, quality: Quality) -> ChannelConfig {
        ChannelConfig {
            user_quality: quality,
            sns_quality: self.sns_quality.unwrap_or(Quality::Bypass),
            chroma_subsampling: self.subsampling,
        }
    }
}

/// The key for attempt `key_index` on image `image_id`.
pub fn derive_key(master_seed: u64, image_id: &str, key_index: usize) -> SecretKey {
    let mut h = Sha256::new();
    h.update(b"etc-jigsaw key v1");
    h.update(master_seed.to_le_bytes());
    h.update((image_id.len() as u64).to_le_bytes());
    h.update(image_id.as_bytes());
    h.update((key_index as u64).to_le_bytes());
    let d = h.finalize();
    let word = |k: usize| u64::from_le_bytes(d[8 * k..8 * k + 8].try_into().unwrap());
    SecretKey::new(word(0), word(1), word(2), word(3))
}

/// Lossless images in `dir`, sorted by file name, keyed by file stem.
pub fn load_images(dir: &Path) -> Result<Vec<(String, RasterImage)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "ppm" | "png"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!("no PPM or PNG images in {}", dir.display())));
    }
    paths
        .into_iter()
        .map(|p| {
            let id = p.file_stem().and_then(|s| s.to_str()).unwrap_or("image").to_string();
            RasterImage::read(&p).map(|img| (id, img))
        })
        .collect()
}

/// The block-aligned region attacked under `budget`: the full grid, shrunk
/// one row or column at a time (the longer side first) and centered.
pub fn budget_crop(image: &RasterImage, block: usize, budget: Option<usize>) -> Result<RasterImage> {
    let (mut rows, mut cols) = grid_dims(image.width(), image.height(), block, block);
    if rows * cols < 4 {
        return Err(Error::Dimension(format!(
            "{}x{} image holds fewer than 4 blocks of {block}",
            image.width(),
            image.height()
        )));
    }
    if let Some(limit) = budget {
        while rows * cols > limit {
            if cols >= rows {
                cols -= 1;
            } else {
                rows -= 1;
            }
        }
    }
    let (w, h) = (cols * block, rows * block);
    let x0 = (image.width() - w) / 2 / block * block;
    let y0 = (image.height() - h) / 2 / block * block;
    image.crop(x0, y0, w, h)
}

/// One attack attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub image: String,
    pub puzzle_type: PuzzleType,
    pub quality: Quality,
    pub key_index: usize,
    pub score: Option<ScoreTriple>,
    pub selected: bool,
    pub error: Option<String>,
    /// Seconds; kept out of the results CSV so reruns compare byte for byte.
    #[serde(skip)]
    pub wall_time: f64,
}

/// Mean of a (type, quality) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub puzzle_type: PuzzleType,
    pub quality: Quality,
    /// `true` for the mean of best-of-k rows, `false` for all scored rows.
    pub selected_only: bool,
    pub count: usize,
    pub mean: ScoreTriple,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResults {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
}

/// Encrypts, transmits, attacks and scores one image.
pub fn run_attempt(
    image: &RasterImage,
    key: &SecretKey,
    puzzle_type: PuzzleType,
    channel: &ChannelConfig,
    block: usize,
    confidence: bool,
) -> Result<ScoreTriple> {
    let config = CipherConfig::for_type(puzzle_type, block);
    let (rows, cols) = grid_dims(image.width(), image.height(), block, block);
    let expansion = expand_key(key, rows * cols, &config);
    let encrypted = encrypt_with(image, &expansion, &config)?;
    let received = transmit(&encrypted, channel)?;
    let mut attack_config = AttackConfig::new(puzzle_type, block);
    attack_config.confidence = confidence;
    let result = attack(&received, &attack_config)?;
    score(&result.assembly, &ground_truth(&expansion, rows, cols)?)
}

struct Job<'a> {
    image: &'a str,
    pixels: &'a Result<RasterImage>,
    puzzle_type: PuzzleType,
    quality: Quality,
    key_index: usize,
}

/// Runs every attempt of `plan` on `images`. Attempts run in parallel on the
/// current rayon pool; the output order does not depend on scheduling.
pub fn run_on_images(plan: &ExperimentPlan, images: &[(String, RasterImage)]) -> Result<ExperimentResults> {
    plan.validate()?;
    if images.is_empty() {
        return Err(Error::Config("empty image set".into()));
    }
    let cropped: Vec<(String, Result<RasterImage>)> = images
        .iter()
        .map(|(id, img)| (id.clone(), budget_crop(img, plan.block, plan.budget)))
        .collect();
    let mut jobs = Vec::new();
    for (id, img) in &cropped {
        for &puzzle_type in &plan.types {
            for &quality in &plan.qualities {
                for key_index in 0..plan.keys_per_image {
                    jobs.push(Job {
                        image: id,
                        pixels: img,
                        puzzle_type,
                        quality,
                        key_index,
                    });
                }
            }
        }
    }
    let mut rows: Vec<ResultRow> = jobs
        .par_iter()
        .map(|job| {
            let start = Instant::now();
            let outcome = job.pixels.as_ref().map_err(|e| e.to_string()).and_then(|img| {
                let key = derive_key(plan.master_seed, job.image, job.key_index);
                run_attempt(img, &key, job.puzzle_type, &plan.channel(job.quality), plan.block, plan.confidence)
                    .map_err(|e| e.to_string())
            });
            ResultRow {
                image: job.image.to_string(),
                puzzle_type: job.puzzle_type,
                quality: job.quality,
                key_index: job.key_index,
                score: outcome.as_ref().ok().copied(),
                selected: false,
                error: outcome.err(),
                wall_time: start.elapsed().as_secs_f64(),
            }
        })
        .collect();
    select_best(&mut rows);
    let summary = summarize(&rows, plan);
    Ok(ExperimentResults { rows, summary })
}

/// Loads the plan's images and runs it.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentResults> {
    let images = load_images(&plan.images)?;
    run_on_images(plan, &images)
}

/// Marks the highest `dc + nc + lc` attempt of each (image, type, quality)
/// cell, the lowest key index on ties. Failed attempts are never selected.
pub fn select_best(rows: &mut [ResultRow]) {
    let mut best: BTreeMap<(String, PuzzleType, Quality), (f64, usize, usize)> = BTreeMap::new();
    for (k, r) in rows.iter_mut().enumerate() {
        r.selected = false;
        let Some(s) = r.score else { continue };
        let cell = (r.image.clone(), r.puzzle_type, r.quality);
        let candidate = (s.sum(), r.key_index, k);
        best.entry(cell)
            .and_modify(|b| {
                if candidate.0 > b.0 || (candidate.0 == b.0 && candidate.1 < b.1) {
                    *b = candidate;
                }
            })
            .or_insert(candidate);
    }
    for (_, _, k) in best.into_values() {
        rows[k].selected = true;
    }
}

fn mean(scores: &[ScoreTriple]) -> Option<ScoreTriple> {
    if scores.is_empty() {
        return None;
    }
    let n = scores.len() as f64;
    Some(ScoreTriple {
        dc: scores.iter().map(|s| s.dc).sum::<f64>() / n,
        nc: scores.iter().map(|s| s.nc).sum::<f64>() / n,
        lc: scores.iter().map(|s| s.lc).sum::<f64>() / n,
    })
}

/// Means per (type, quality), in plan order, over selected rows and over
/// all scored rows. Cells without scored rows are left out.
pub fn summarize(rows: &[ResultRow], plan: &ExperimentPlan) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for &puzzle_type in &plan.types {
        for &quality in &plan.qualities {
            for selected_only in [true, false] {
                let scores: Vec<ScoreTriple> = rows
                    .iter()
                    .filter(|r| r.puzzle_type == puzzle_type && r.quality == quality)
                    .filter(|r| !selected_only || r.selected)
                    .filter_map(|r| r.score)
                    .collect();
                if let Some(m) = mean(&scores) {
                    out.push(SummaryRow {
                        puzzle_type,
                        quality,
                        selected_only,
                        count: scores.len(),
                        mean: m,
                    });
                }
            }
        }
    }
    out
}

impl ExperimentResults {
    pub fn summary_for(&self, puzzle_type: PuzzleType, quality: Quality, selected_only: bool) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|s| s.puzzle_type == puzzle_type && s.quality == quality && s.selected_only == selected_only)
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    /// Attempt rows then summary rows.
    ///
    /// Columns: `row,image,type,quality,key,dc,nc,lc,selected,count,error`.
    /// Attempt rows have `row = attempt`; summary rows have `row` set to
    /// `mean_selected` or `mean_all`, `image` and `key` set to `*`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Config(format!("writing CSV: {e}"));
        w.write_record(["row", "image", "type", "quality", "key", "dc", "nc", "lc", "selected", "count", "error"])
            .map_err(csv_err)?;
        let fmt = |v: f64| format!("{v:.3}");
        for r in &self.rows {
            let (dc, nc, lc) = r.score.map_or_else(
                || (String::new(), String::new(), String::new()),
                |s| (fmt(s.dc), fmt(s.nc), fmt(s.lc)),
            );
            w.write_record([
                "attempt".to_string(),
                r.image.clone(),
                r.puzzle_type.to_string(),
                r.quality.to_string(),
                r.key_index.to_string(),
                dc,
                nc,
                lc,
                u8::from(r.selected).to_string(),
                "1".to_string(),
                r.error.clone().unwrap_or_default(),
            ])
            .map_err(csv_err)?;
        }
        for s in &self.summary {
            w.write_record([
                if s.selected_only { "mean_selected" } else { "mean_all" }.to_string(),
                "*".to_string(),
                s.puzzle_type.to_string(),
                s.quality.to_string(),
                "*".to_string(),
                fmt(s.mean.dc),
                fmt(s.mean.nc),
                fmt(s.mean.lc),
                String::new(),
                s.count.to_string(),
                String::new(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Config(format!("writing CSV: {e}")))?;
        Ok(())
    }

    /// `image,type,quality,key,seconds` per attempt.
    pub fn write_timings(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Config(format!("writing CSV: {e}"));
        w.write_record(["image", "type", "quality", "key", "seconds"]).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.image.clone(),
                r.puzzle_type.to_string(),
                r.quality.to_string(),
                r.key_index.to_string(),
                format!("{:.3}", r.wall_time),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Config(format!("writing CSV: {e}")))?;
        Ok(())
    }
}

/// Decrypts with the right key over a lossless channel and scores the result
/// against the original, for every image and type of the plan. Anything
/// below a perfect score means the pipeline itself is broken.
pub fn integrity_check(plan: &ExperimentPlan, images: &[(String, RasterImage)]) -> Result<Vec<(String, PuzzleType, ScoreTriple)>> {
    let mut out = Vec::new();
    for (id, img) in images {
        let img = budget_crop(img, plan.block, plan.budget)?;
        for &puzzle_type in &plan.types {
            let config = CipherConfig::for_type(puzzle_type, plan.block);
            let (rows, cols) = grid_dims(img.width(), img.height(), plan.block, plan.block);
            let expansion = expand_key(&derive_key(plan.master_seed, id, 0), rows * cols, &config);
            let received = transmit(&encrypt_with(&img, &expansion, &config)?, &ChannelConfig::bypass())?;
            let decrypted = decrypt_with(&received, &expansion, &config)?;
            out.push((id.clone(), puzzle_type, score_image(&decrypted, &img, plan.block)?));
        }
    }
    Ok(out)
}

/// A rayon pool with `ETC_WORKERS` threads, or the default size when unset.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("ETC_WORKERS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("ETC_WORKERS={v:?} is not a positive integer")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan() -> ExperimentPlan {
        ExperimentPlan::from_json(
            r#"{"images": "x", "types": ["1"], "qualities": ["bypass"], "master_seed": 7}"#,
        )
        .unwrap()
    }

    fn smooth(w: usize, h: usize) -> RasterImage {
        RasterImage::from_fn(w, h, |x, y| {
            let (fx, fy) = (x as f64, y as f64);
            [
                (40.0 + 2.0 * fx + 0.02 * fx * fy) as u8,
                (30.0 + 3.0 * fy) as u8,
                (120.0 + 50.0 * (fx / 11.0).sin() + 0.5 * fy) as u8,
            ]
        })
    }

    #[test]
    fn plan_defaults() {
        let p = plan();
        assert_eq!((p.keys_per_image, p.block, p.budget, p.sns_quality), (3, 32, None, None));
        assert!(ExperimentPlan::from_json(r#"{"images": "x", "types": ["1"], "qualities": [], "master_seed": 1}"#).is_err());
        assert!(ExperimentPlan::from_json(r#"{"images": "x", "types": ["1"], "qualities": [95], "master_seed": 1, "keys_per_image": 0}"#).is_err());
        assert!(ExperimentPlan::from_json(r#"{"images": "x", "types": ["1"], "qualities": [95], "master_seed": 1, "bogus": 0}"#).is_err());
    }

    #[test]
    fn keys_depend_on_every_input() {
        let k = derive_key(1, "a", 0);
        assert_eq!(k, derive_key(1, "a", 0));
        assert_ne!(k, derive_key(2, "a", 0));
        assert_ne!(k, derive_key(1, "b", 0));
        assert_ne!(k, derive_key(1, "a", 1));
    }

    #[test]
    fn budget_shrinks_and_centers() {
        let img = smooth(672, 480);
        assert_eq!(budget_crop(&img, 32, None).unwrap().width(), 672);
        let c = budget_crop(&img, 32, Some(63)).unwrap();
        let (r, k) = (c.height() / 32, c.width() / 32);
        assert!(r * k <= 63 && r * k >= 50, "{r}x{k}");
        assert!(budget_crop(&smooth(40, 40), 32, None).is_err());
    }

    #[test]
    fn smooth_image_solves_and_selects_one_row_per_cell() {
        let mut p = plan();
        p.block = 8;
        p.keys_per_image = 2;
        let images = vec![("s".to_string(), smooth(24, 24))];
        let res = run_on_images(&p, &images).unwrap();
        assert_eq!(res.rows.len(), 2);
        assert_eq!(res.rows.iter().filter(|r| r.selected).count(), 1);
        let s = res.summary_for(PuzzleType::Type1, Quality::Bypass, true).unwrap();
        assert_eq!(s.mean.nc, 1.0);
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let mut p = plan();
        p.block = 8;
        p.keys_per_image = 1;
        let images = vec![("tiny".to_string(), smooth(8, 8)), ("ok".to_string(), smooth(16, 16))];
        let res = run_on_images(&p, &images).unwrap();
        assert_eq!(res.failures(), 1);
        assert!(res.rows.iter().any(|r| r.image == "ok" && r.selected));
        assert!(run_on_images(&p, &[]).is_err());
    }

    #[test]
    fn summary_means() {
        let row = |k: usize, v: f64| ResultRow {
            image: "a".into(),
            puzzle_type: PuzzleType::Type1,
            quality: Quality::Bypass,
            key_index: k,
            score: Some(ScoreTriple { dc: v, nc: v, lc: v }),
            selected: false,
            error: None,
            wall_time: 0.0,
        };
        let mut rows = vec![row(0, 0.0), row(1, 1.0)];
        select_best(&mut rows);
        assert!(rows[1].selected && !rows[0].selected);
        let s = summarize(&rows, &plan());
        assert_eq!(s[0].mean.nc, 1.0);
        assert_eq!(s[1].mean.nc, 0.5);
    }

    #[test]
    fn integrity_is_perfect() {
        let mut p = plan();
        p.block = 8;
        p.types = PuzzleType::ALL.to_vec();
        for (_, _, s) in integrity_check(&p, &[("s".into(), smooth(32, 24))]).unwrap() {
            assert_eq!((s.dc, s.nc, s.lc), (1.0, 1.0, 1.0));
        }
    }
}
