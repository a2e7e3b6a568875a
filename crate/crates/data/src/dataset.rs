use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use uwnet_loss::BBox;

use crate::error::{Error, Result};
use crate::ppm::{read_ppm, write_ppm};
use crate::scene::{generate_scene, LabeledImage, SceneSpec};

pub fn label_lines(labels: &[(BBox, usize)]) -> String {
    let mut out = String::new();
    for (b, class) in labels {
        writeln!(out, "{class} {:.6} {:.6} {:.6} {:.6}", b.cx, b.cy, b.w, b.h).unwrap();
    }
    out
}

pub fn parse_labels(text: &str, path: &Path) -> Result<Vec<(BBox, usize)>> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = |msg: &str| Error::Parse {
            path: path.to_path_buf(),
            msg: format!("line {}: {msg}", ln + 1),
        };
        if fields.len() != 5 {
            return Err(bad("expected 'class cx cy w h'"));
        }
        let class: usize = fields[0].parse().map_err(|_| bad("bad class id"))?;
        let nums: Vec<f64> = fields[1..]
            .iter()
            .map(|f| f.parse().map_err(|_| bad("bad coordinate")))
            .collect::<Result<_>>()?;
        out.push((BBox::new(nums[0], nums[1], nums[2], nums[3]), class));
    }
    Ok(out)
}

fn image_path(dir: &Path, i: u64) -> PathBuf {
    dir.join("images").join(format!("{i:06}.ppm"))
}

fn label_path(dir: &Path, i: u64) -> PathBuf {
    dir.join("labels").join(format!("{i:06}.txt"))
}

/// Writes `count` generated scenes plus labels and a manifest under `dir`.
/// Images are independent, so generation runs in parallel; determinism
/// comes from per-image RNG streams.
pub fn generate_dataset(spec: &SceneSpec, count: u64, dir: &Path) -> Result<()> {
    if count < 1 {
        return Err(Error::invalid("generate_dataset", "count must be >= 1"));
    }
    for sub in ["images", "labels"] {
        let p = dir.join(sub);
        std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }

    (0..count).into_par_iter().try_for_each(|i| -> Result<()> {
        let scene = generate_scene(spec, i);
        write_ppm(&image_path(dir, i), &scene.image)?;
        let lp = label_path(dir, i);
        std::fs::write(&lp, label_lines(&scene.labels)).map_err(|e| Error::io(&lp, e))
    })?;

    let manifest = format!(
        "seed {}\nsize {}\nclasses {}\ncount {}\ntargets {}..{}\nscale {}..{}\nocclusion_prob {}\ncontrast {}..{}\nturbidity {}\n",
        spec.seed,
        spec.size,
        spec.classes,
        count,
        spec.targets_min,
        spec.targets_max,
        spec.scale_min,
        spec.scale_max,
        spec.occlusion_prob,
        spec.contrast_min,
        spec.contrast_max,
        spec.turbidity,
    );
    let mp = dir.join("manifest.txt");
    std::fs::write(&mp, manifest).map_err(|e| Error::io(&mp, e))
}

/// Indices of all images present under `dir`, ascending.
pub fn list_dataset(dir: &Path) -> Result<Vec<u64>> {
    let images = dir.join("images");
    let mut ids = Vec::new();
    let entries = std::fs::read_dir(&images).map_err(|e| Error::io(&images, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(&images, e))?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if let Some(stem) = name.strip_suffix(".ppm") {
            if let Ok(id) = stem.parse::<u64>() {
                ids.push(id);
            }
        }
    }
    ids.sort_unstable();
    Ok(ids)
}

pub fn load_labeled(dir: &Path, id: u64) -> Result<LabeledImage> {
    let image = read_ppm(&image_path(dir, id))?;
    let lp = label_path(dir, id);
    let text = std::fs::read_to_string(&lp).map_err(|e| Error::io(&lp, e))?;
    Ok(LabeledImage { image, labels: parse_labels(&text, &lp)? })
}

/// Deterministic 9:1 shuffled split. Train size is round(0.9 * n).
pub fn split_dataset(dir: &Path, seed: u64) -> Result<(Vec<u64>, Vec<u64>)> {
    let mut ids = list_dataset(dir)?;
    if ids.len() < 10 {
        return Err(Error::invalid(
            "split_dataset",
            format!("need at least 10 images, found {}", ids.len()),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let train_n = (0.9 * ids.len() as f64).round() as usize;
    let val = ids.split_off(train_n);
    Ok((ids, val))
}
