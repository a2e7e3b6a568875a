use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uwnet_data::Image;
use uwnet_tensor::{Error, Result};

/// Paired-view augmentation recipe: flip, random-resized crop, resize,
/// color distortion, optional grayscale.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentationSpec {
    pub hflip_prob: f64,
    /// Area fraction range of the random crop.
    pub crop_min: f64,
    pub crop_max: f64,
    pub out_size: usize,
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
    pub hue: f64,
    pub grayscale_prob: f64,
}

impl Default for AugmentationSpec {
    fn default() -> Self {
        AugmentationSpec {
            hflip_prob: 0.5,
            crop_min: 0.4,
            crop_max: 1.0,
            out_size: 64,
            brightness: 0.4,
            contrast: 0.4,
            saturation: 0.4,
            hue: 0.1,
            grayscale_prob: 0.2,
        }
    }
}

impl AugmentationSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.crop_min > 0.0 && self.crop_min <= self.crop_max && self.crop_max <= 1.0) {
            return Err(Error::invalid(
                "AugmentationSpec",
                format!("crop scale range ({}, {}) must satisfy 0 < min <= max <= 1", self.crop_min, self.crop_max),
            ));
        }
        if self.out_size == 0 {
            return Err(Error::invalid("AugmentationSpec", "output size must be positive"));
        }
        Ok(())
    }
}

fn jitter(rng: &mut ChaCha8Rng, strength: f64) -> f64 {
    if strength == 0.0 {
        0.0
    } else {
        rng.gen_range(-strength..strength)
    }
}

fn bilinear(img: &Image, c: usize, y: f64, x: f64) -> f32 {
    let yc = y.clamp(0.0, (img.h - 1) as f64);
    let xc = x.clamp(0.0, (img.w - 1) as f64);
    let (y0, x0) = (yc.floor() as usize, xc.floor() as usize);
    let (y1, x1) = ((y0 + 1).min(img.h - 1), (x0 + 1).min(img.w - 1));
    let (dy, dx) = ((yc - y0 as f64) as f32, (xc - x0 as f64) as f32);
    let a = img.get(c, y0, x0) * (1.0 - dx) + img.get(c, y0, x1) * dx;
    let b = img.get(c, y1, x0) * (1.0 - dx) + img.get(c, y1, x1) * dx;
    a * (1.0 - dy) + b * dy
}

fn luma(r: f32, g: f32, b: f32) -> f32 {
    0.299 * r + 0.587 * g + 0.114 * b
}

/// RGB hue rotation around the gray diagonal (Rodrigues form).
fn hue_matrix(theta: f64) -> [[f32; 3]; 3] {
    let (c, s) = (theta.cos(), theta.sin());
    let k = 1.0 / 3.0 * (1.0 - c);
    let a = 1.0f64 / 3.0f64.sqrt();
    let mut m = [[0.0f32; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let ident = if i == j { c } else { 0.0 };
            let cross = s * a * if (j + 1) % 3 == i { 1.0 } else if (i + 1) % 3 == j { -1.0 } else { 0.0 };
            m[i][j] = (ident + k + cross) as f32;
        }
    }
    m
}

fn augment_view(img: &Image, spec: &AugmentationSpec, rng: &mut ChaCha8Rng) -> Image {
    let area = if spec.crop_min == spec.crop_max {
        spec.crop_min
    } else {
        rng.gen_range(spec.crop_min..spec.crop_max)
    };
    let side = area.sqrt();
    let cw = (side * img.w as f64).max(1.0);
    let ch = (side * img.h as f64).max(1.0);
    let x0 = if img.w as f64 - cw > 0.0 { rng.gen_range(0.0..img.w as f64 - cw) } else { 0.0 };
    let y0 = if img.h as f64 - ch > 0.0 { rng.gen_range(0.0..img.h as f64 - ch) } else { 0.0 };

    let flip = spec.hflip_prob > 0.0 && rng.gen_bool(spec.hflip_prob.min(1.0));
    let brightness = 1.0 + jitter(rng, spec.brightness);
    let contrast = 1.0 + jitter(rng, spec.contrast);
    let saturation = (1.0 + jitter(rng, spec.saturation)) as f32;
    let theta = jitter(rng, spec.hue) * std::f64::consts::PI;
    let hue_m = hue_matrix(theta);
    let gray = spec.grayscale_prob > 0.0 && rng.gen_bool(spec.grayscale_prob.min(1.0));

    let n = spec.out_size;
    let mut out = Image::new(n, n);
    for y in 0..n {
        for x in 0..n {
            let sx = if flip { n - 1 - x } else { x };
            // map output pixel centers onto the crop window
            let u = x0 + (sx as f64 + 0.5) / n as f64 * cw - 0.5;
            let v = y0 + (y as f64 + 0.5) / n as f64 * ch - 0.5;
            let mut rgb = [
                bilinear(img, 0, v, u),
                bilinear(img, 1, v, u),
                bilinear(img, 2, v, u),
            ];
            // identity factors are skipped exactly so a degenerate spec
            // reproduces the input bit for bit
            if theta != 0.0 {
                rgb = [
                    hue_m[0][0] * rgb[0] + hue_m[0][1] * rgb[1] + hue_m[0][2] * rgb[2],
                    hue_m[1][0] * rgb[0] + hue_m[1][1] * rgb[1] + hue_m[1][2] * rgb[2],
                    hue_m[2][0] * rgb[0] + hue_m[2][1] * rgb[1] + hue_m[2][2] * rgb[2],
                ];
            }
            if saturation != 1.0 {
                let l = luma(rgb[0], rgb[1], rgb[2]);
                for v in rgb.iter_mut() {
                    *v = l + (*v - l) * saturation;
                }
            }
            if brightness != 1.0 {
                for v in rgb.iter_mut() {
                    *v *= brightness as f32;
                }
            }
            if gray {
                let l = luma(rgb[0], rgb[1], rgb[2]);
                rgb = [l, l, l];
            }
            for (c, v) in rgb.iter().enumerate() {
                out.set(c, y, x, v.clamp(0.0, 1.0));
            }
        }
    }
    if contrast != 1.0 {
        // contrast relative to the view mean, applied uniformly
        let mean = out.data.iter().sum::<f32>() / out.data.len() as f32;
        for v in out.data.iter_mut() {
            *v = (mean + (*v - mean) * contrast as f32).clamp(0.0, 1.0);
        }
    }
    out
}

/// Two independently augmented views of one image; deterministic in
/// (spec, seed). The views use distinct RNG streams of the same seed.
pub fn augment_pair(img: &Image, spec: &AugmentationSpec, seed: u64) -> Result<(Image, Image)> {
    spec.validate()?;
    let mut ra = ChaCha8Rng::seed_from_u64(seed);
    ra.set_stream(1);
    let mut rb = ChaCha8Rng::seed_from_u64(seed);
    rb.set_stream(2);
    Ok((augment_view(img, spec, &mut ra), augment_view(img, spec, &mut rb)))
}
