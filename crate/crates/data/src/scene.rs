use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uwnet_loss::{iou, BBox};

use crate::ppm::Image;

/// Generation recipe for one synthetic underwater-like scene corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub size: usize,
    pub classes: usize,
    pub targets_min: usize,
    pub targets_max: usize,
    /// Box side as a fraction of image size.
    pub scale_min: f64,
    pub scale_max: f64,
    pub occlusion_prob: f64,
    /// Contrast multiplier range; values below 1 compress toward the mean.
    pub contrast_min: f64,
    pub contrast_max: f64,
    /// Peak amplitude of the additive turbidity noise.
    pub turbidity: f64,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            size: 128,
            classes: 9,
            targets_min: 2,
            targets_max: 6,
            scale_min: 0.04,
            scale_max: 0.40,
            occlusion_prob: 0.3,
            contrast_min: 0.35,
            contrast_max: 0.65,
            turbidity: 0.06,
            seed: 0,
        }
    }
}

/// One image plus its normalized boxes and class ids.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledImage {
    pub image: Image,
    pub labels: Vec<(BBox, usize)>,
}

/// Class silhouette: inside test over normalized box coordinates
/// (u, v) in [0, 1]^2 centered at (0.5, 0.5). Nine distinct shapes.
fn inside_silhouette(class: usize, u: f64, v: f64) -> bool {
    let (du, dv) = (u - 0.5, v - 0.5);
    match class % 9 {
        0 => du * du + dv * dv <= 0.25,                                   // disc
        1 => du.abs() <= 0.45 && dv.abs() <= 0.45,                        // square
        2 => v >= 0.1 && du.abs() <= 0.45 * (v - 0.1) / 0.9,              // triangle
        3 => (du * du) / 0.25 + (dv * dv) / 0.09 <= 1.0,                  // wide ellipse
        4 => du.abs() + dv.abs() <= 0.5,                                  // diamond
        5 => {
            let r2 = du * du + dv * dv;
            (0.06..=0.25).contains(&r2)                                   // ring
        }
        6 => du.abs() <= 0.14 || dv.abs() <= 0.14,                        // cross
        7 => dv.abs() <= 0.18 && du.abs() <= 0.48,                        // bar
        _ => {
            let angle = dv.atan2(du);
            let r = (du * du + dv * dv).sqrt();
            r <= 0.28 + 0.20 * (5.0 * angle).cos().abs()                  // rosette
        }
    }
}

/// Distinct hue per class, converted from HSV with fixed saturation;
/// shared by the generator and any renderer.
pub fn class_color(class: usize, classes: usize) -> [f32; 3] {
    let h = class as f64 / classes as f64 * 6.0;
    let (s, v) = (0.85, 0.9);
    let i = h.floor() as usize % 6;
    let f = h - h.floor();
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    let (r, g, b) = match i {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [r as f32, g as f32, b as f32]
}

fn draw_target(img: &mut Image, b: &BBox, class: usize, classes: usize, alpha: f32, size: usize) {
    let color = class_color(class, classes);
    let s = size as f64;
    let (x1, y1) = ((b.x1() * s).floor().max(0.0) as usize, (b.y1() * s).floor().max(0.0) as usize);
    let (x2, y2) = (
        ((b.x2() * s).ceil() as usize).min(size),
        ((b.y2() * s).ceil() as usize).min(size),
    );
    for y in y1..y2 {
        for x in x1..x2 {
            let u = ((x as f64 + 0.5) / s - b.x1()) / b.w;
            let v = ((y as f64 + 0.5) / s - b.y1()) / b.h;
            if (0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v) && inside_silhouette(class, u, v)
            {
                for c in 0..3 {
                    let old = img.get(c, y, x);
                    img.set(c, y, x, old * (1.0 - alpha) + color[c] * alpha);
                }
            }
        }
    }
}

/// Deterministic scene for (spec.seed, index): turbid gradient background,
/// occluding alpha-blended class shapes, contrast compression, noise.
pub fn generate_scene(spec: &SceneSpec, index: u64) -> LabeledImage {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index.wrapping_add(1));
    let s = spec.size;
    let mut img = Image::new(s, s);

    // bluish-green water column, darker with depth
    let base = [
        0.05 + rng.gen_range(0.0..0.05),
        0.28 + rng.gen_range(0.0..0.10),
        0.33 + rng.gen_range(0.0..0.12),
    ];
    for y in 0..s {
        let depth = 1.0 - 0.35 * (y as f32 / s as f32);
        for x in 0..s {
            for c in 0..3 {
                img.set(c, y, x, base[c] * depth);
            }
        }
    }

    let count = rng.gen_range(spec.targets_min..=spec.targets_max);
    let mut labels: Vec<(BBox, usize)> = Vec::new();
    for _ in 0..count {
        let class = rng.gen_range(0..spec.classes);
        let occlude = rng.gen_bool(spec.occlusion_prob.clamp(0.0, 1.0));
        let mut placed = None;
        for _attempt in 0..50 {
            let w = rng.gen_range(spec.scale_min..spec.scale_max);
            let h = (w * rng.gen_range(0.7..1.4)).clamp(spec.scale_min, spec.scale_max);
            let cx = rng.gen_range(w / 2.0..1.0 - w / 2.0);
            let cy = rng.gen_range(h / 2.0..1.0 - h / 2.0);
            let b = BBox::new(cx, cy, w, h);
            if occlude || labels.iter().all(|(other, _)| iou(&b, other) <= 0.3) {
                placed = Some(b);
                break;
            }
        }
        if let Some(b) = placed {
            draw_target(&mut img, &b, class, spec.classes, 0.88, s);
            labels.push((b, class));
        }
    }

    // global contrast compression toward the frame mean
    let factor = rng.gen_range(spec.contrast_min..spec.contrast_max) as f32;
    let mean = img.data.iter().sum::<f32>() / img.data.len() as f32;
    for v in img.data.iter_mut() {
        *v = mean + (*v - mean) * factor;
    }

    // additive turbidity noise, slightly green-tinted
    let tint = [0.8f32, 1.0, 0.95];
    for c in 0..3 {
        for y in 0..s {
            for x in 0..s {
                let n = (rng.gen_range(-1.0..1.0f64) * spec.turbidity) as f32;
                let i = img.idx(c, y, x);
                img.data[i] = (img.data[i] + n * tint[c]).clamp(0.0, 1.0);
            }
        }
    }

    LabeledImage { image: img, labels }
}
