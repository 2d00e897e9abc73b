//! Experiment runner: embeds manifest entries, measures stego quality,
//! extracts with the correct and two wrong keys, and writes a CSV report
//! plus histogram and edge-map data files.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use crate::config::{validated, SecretKey};
use crate::error::{Error, Result};
use crate::image_io::{load_gray, resize, save_pgm, GrayImage};
use crate::metrics::{entropy, histogram, histogram_l1, mse, mssim, nae, ncc, psnr_from_mse, SsimParams};
use crate::pipeline::{capacity, EmbedOptions, Sabmis, Slot};

/// First line of every report; bump when columns change.
pub const CSV_SCHEMA: &str = "# sabmis-experiment-csv v1";

/// XOR mask producing the wrong-seed key.
pub const WRONG_SEED_MASK: u64 = 0x9E37_79B9_7F4A_7C15;

pub const COLUMNS: [&str; 19] = [
    "cover",
    "secrets",
    "slots",
    "n_secrets",
    "bpp",
    "mse",
    "psnr_db",
    "mssim",
    "ncc",
    "entropy_cover",
    "entropy_stego",
    "nae_stego",
    "nae_correct",
    "nae_wrong_constants",
    "nae_wrong_seed",
    "hist_l1_correct",
    "solver_blocks",
    "solver_median_iters",
    "solver_unconverged",
];

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub cover: PathBuf,
    pub secrets: Vec<PathBuf>,
    pub slots: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Parses a manifest; relative paths are resolved against `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self> {
        let mut entries: Vec<ManifestEntry> =
            serde_json::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;
        for (i, e) in entries.iter_mut().enumerate() {
            if e.secrets.is_empty() || e.secrets.len() > 4 {
                return Err(Error::Manifest(format!(
                    "entry {i}: expected 1 to 4 secrets, got {}",
                    e.secrets.len()
                )));
            }
            if e.slots.len() != e.secrets.len() {
                return Err(Error::Manifest(format!(
                    "entry {i}: {} secrets but {} slots",
                    e.secrets.len(),
                    e.slots.len()
                )));
            }
            let mut seen = [false; 4];
            for &s in &e.slots {
                let slot = Slot::new(s).map_err(|_| Error::Manifest(format!("entry {i}: bad slot {s}")))?;
                if std::mem::replace(&mut seen[slot.number() - 1], true) {
                    return Err(Error::Manifest(format!("entry {i}: slot {s} repeated")));
                }
            }
            e.cover = base.join(&e.cover);
            for s in &mut e.secrets {
                *s = base.join(&*s);
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new("")))
    }

    /// Every referenced file that does not exist, in manifest order.
    pub fn missing_inputs(&self) -> Vec<PathBuf> {
        let mut missing = Vec::new();
        for e in &self.entries {
            for p in std::iter::once(&e.cover).chain(&e.secrets) {
                if !p.is_file() && !missing.contains(p) {
                    missing.push(p.clone());
                }
            }
        }
        missing
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRow {
    pub cover: String,
    pub secrets: Vec<String>,
    pub slots: Vec<usize>,
    pub bpp: f64,
    pub mse: f64,
    pub psnr_db: f64,
    pub mssim: f64,
    pub ncc: f64,
    pub entropy_cover: f64,
    pub entropy_stego: f64,
    pub nae_stego: f64,
    /// Mean NAE between original and extracted secrets.
    pub nae_correct: f64,
    pub nae_wrong_constants: f64,
    pub nae_wrong_seed: f64,
    pub hist_l1_correct: f64,
    pub solver_blocks: usize,
    pub solver_median_iters: usize,
    pub solver_unconverged: usize,
}

impl ExperimentRow {
    fn record(&self) -> Vec<String> {
        let f = |v: f64| {
            if v.is_infinite() {
                if v > 0.0 { "inf" } else { "-inf" }.to_string()
            } else {
                format!("{v:.6}")
            }
        };
        vec![
            self.cover.clone(),
            self.secrets.join(";"),
            self.slots.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(";"),
            self.secrets.len().to_string(),
            format!("{:.3}", self.bpp),
            f(self.mse),
            f(self.psnr_db),
            f(self.mssim),
            f(self.ncc),
            f(self.entropy_cover),
            f(self.entropy_stego),
            f(self.nae_stego),
            f(self.nae_correct),
            f(self.nae_wrong_constants),
            f(self.nae_wrong_seed),
            f(self.hist_l1_correct),
            self.solver_blocks.to_string(),
            self.solver_median_iters.to_string(),
            self.solver_unconverged.to_string(),
        ]
    }
}

/// Loads an image and resizes it to `side×side` when needed.
pub fn load_resized(path: &Path, side: usize) -> Result<GrayImage> {
    let img = load_gray(path)?;
    if img.width() == side && img.height() == side {
        Ok(img)
    } else {
        resize(&img, side, side)
    }
}

/// Keys used by the security experiment: the common all-ones guess for
/// the constants, and the correct constants with a different seed.
pub fn wrong_keys(key: &SecretKey) -> (SecretKey, SecretKey) {
    let constants = key.with_unit_constants();
    let seed = SecretKey {
        seed: key.seed ^ WRONG_SEED_MASK,
        ..*key
    };
    (constants, seed)
}

/// Sobel gradient magnitude with replicated borders.
pub fn sobel_magnitude(img: &GrayImage) -> Vec<f64> {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let px = |r: isize, c: isize| f64::from(img.get(r.clamp(0, h - 1) as usize, c.clamp(0, w - 1) as usize));
    let mut out = Vec::with_capacity((w * h) as usize);
    for r in 0..h {
        for c in 0..w {
            let gx = px(r - 1, c + 1) + 2.0 * px(r, c + 1) + px(r + 1, c + 1)
                - px(r - 1, c - 1)
                - 2.0 * px(r, c - 1)
                - px(r + 1, c - 1);
            let gy = px(r + 1, c - 1) + 2.0 * px(r + 1, c) + px(r + 1, c + 1)
                - px(r - 1, c - 1)
                - 2.0 * px(r - 1, c)
                - px(r - 1, c + 1);
            out.push(gx.hypot(gy));
        }
    }
    out
}

/// Otsu threshold over a 256-bin histogram of `values` spanning `[0, max]`.
pub fn otsu_threshold(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return 0.0;
    }
    let bin = |v: f64| ((v / max) * 255.0).round() as usize;
    let mut hist = [0u64; 256];
    for &v in values {
        hist[bin(v)] += 1;
    }
    let total = values.len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let (mut best, mut best_t) = (-1.0, 0usize);
    for (t, &c) in hist.iter().enumerate() {
        w0 += c as f64;
        sum0 += t as f64 * c as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let (m0, m1) = (sum0 / w0, (sum_all - sum0) / w1);
        let between = w0 * w1 * (m0 - m1).powi(2);
        if between > best {
            best = between;
            best_t = t;
        }
    }
    (best_t as f64 + 0.5) / 255.0 * max
}

/// Binary edge map: 255 where the Sobel magnitude exceeds the Otsu threshold.
pub fn edge_map(img: &GrayImage) -> GrayImage {
    let mag = sobel_magnitude(img);
    let t = otsu_threshold(&mag);
    let data = mag.iter().map(|&m| if m > t { 255 } else { 0 }).collect();
    GrayImage::new(img.width(), img.height(), data).expect("same shape")
}

fn write_histogram(img: &GrayImage, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["level", "count"])?;
    for (level, count) in histogram(img).iter().enumerate() {
        w.write_record([level.to_string(), count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

struct RowData {
    cover: GrayImage,
    stego: GrayImage,
    secrets: Vec<GrayImage>,
    extracted: Vec<GrayImage>,
}

fn write_row_data(dir: &Path, index: usize, data: &RowData) -> Result<()> {
    let dir = dir.join(format!("row{index:03}"));
    std::fs::create_dir_all(&dir)?;
    write_histogram(&data.cover, &dir.join("cover_hist.csv"))?;
    write_histogram(&data.stego, &dir.join("stego_hist.csv"))?;
    save_pgm(&edge_map(&data.cover), dir.join("cover_edges.pgm"))?;
    save_pgm(&edge_map(&data.stego), dir.join("stego_edges.pgm"))?;
    for (k, (s, e)) in data.secrets.iter().zip(&data.extracted).enumerate() {
        write_histogram(s, &dir.join(format!("secret{}_hist.csv", k + 1)))?;
        write_histogram(e, &dir.join(format!("extracted{}_hist.csv", k + 1)))?;
    }
    Ok(())
}

fn mean_nae(originals: &[GrayImage], extracted: &[GrayImage]) -> Result<f64> {
    let mut total = 0.0;
    for (a, b) in originals.iter().zip(extracted) {
        total += nae(a, b)?;
    }
    Ok(total / originals.len() as f64)
}

struct Schemes {
    correct: Sabmis,
    wrong_constants: Sabmis,
    wrong_seed: Sabmis,
}

fn run_entry(entry: &ManifestEntry, schemes: &Schemes) -> Result<(ExperimentRow, RowData)> {
    let cfg = schemes.correct.config();
    let cover = load_resized(&entry.cover, cfg.r)?;
    let secrets = entry
        .secrets
        .iter()
        .map(|p| load_resized(p, cfg.m))
        .collect::<Result<Vec<_>>>()?;
    let slots = entry
        .slots
        .iter()
        .map(|&s| Slot::new(s))
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(Slot, &GrayImage)> = slots.iter().copied().zip(&secrets).collect();

    let out = schemes.correct.embed_real(&cover, &pairs, EmbedOptions::default())?;
    let stego = out.stego_gray();
    let extracted = schemes.correct.extract(&stego, &slots)?;
    let wrong_c = schemes.wrong_constants.extract(&stego, &slots)?;
    let wrong_s = schemes.wrong_seed.extract(&stego, &slots)?;

    let e = mse(&cover, &stego)?;
    let row = ExperimentRow {
        cover: entry.cover.display().to_string(),
        secrets: entry.secrets.iter().map(|p| p.display().to_string()).collect(),
        slots: entry.slots.clone(),
        bpp: capacity(cfg, secrets.len())?,
        mse: e,
        psnr_db: psnr_from_mse(e),
        mssim: mssim(&cover, &stego, &SsimParams::default())?,
        ncc: ncc(&cover, &stego)?,
        entropy_cover: entropy(&cover),
        entropy_stego: entropy(&stego),
        nae_stego: nae(&cover, &stego)?,
        nae_correct: mean_nae(&secrets, &extracted)?,
        nae_wrong_constants: mean_nae(&secrets, &wrong_c)?,
        nae_wrong_seed: mean_nae(&secrets, &wrong_s)?,
        hist_l1_correct: secrets
            .iter()
            .zip(&extracted)
            .map(|(a, b)| histogram_l1(a, b))
            .sum::<f64>()
            / secrets.len() as f64,
        solver_blocks: out.stats.blocks(),
        solver_median_iters: out.stats.median_iterations().unwrap_or(0),
        solver_unconverged: out.stats.blocks() - out.stats.converged,
    };
    Ok((
        row,
        RowData {
            cover,
            stego,
            secrets,
            extracted,
        },
    ))
}

/// Runs every manifest entry. Missing inputs are reported together before
/// any work starts. Rows come back in manifest order.
pub fn run_rows(manifest: &Manifest, key: &SecretKey, data_dir: Option<&Path>) -> Result<Vec<ExperimentRow>> {
    let missing = manifest.missing_inputs();
    if !missing.is_empty() {
        return Err(Error::MissingInputs(missing));
    }
    let (wc, ws) = wrong_keys(key);
    let schemes = Schemes {
        correct: Sabmis::new(validated(key)?)?,
        wrong_constants: Sabmis::new(validated(&wc)?)?,
        wrong_seed: Sabmis::new(validated(&ws)?)?,
    };
    manifest
        .entries
        .par_iter()
        .enumerate()
        .map(|(i, entry)| {
            let (row, data) = run_entry(entry, &schemes)?;
            if let Some(dir) = data_dir {
                write_row_data(dir, i, &data)?;
            }
            Ok(row)
        })
        .collect()
}

pub fn write_csv<W: Write>(rows: &[ExperimentRow], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_SCHEMA}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush()?;
    Ok(())
}

/// Loads the manifest, runs it and writes the CSV report to `out`.
pub fn run_experiment<W: Write>(
    manifest_path: &Path,
    key: &SecretKey,
    out: W,
    data_dir: Option<&Path>,
) -> Result<Vec<ExperimentRow>> {
    let manifest = Manifest::load(manifest_path)?;
    let rows = run_rows(&manifest, key, data_dir)?;
    write_csv(&rows, out)?;
    Ok(rows)
}
