use serde::{Deserialize, Serialize};
use uwnet_tensor::{Error, Result};

pub const STRIDES: [usize; 3] = [8, 16, 32];
pub const ANCHORS_PER_SCALE: usize = 3;

/// Normalized (w, h) box priors, three per pyramid scale, sorted by area
/// within each scale; scale order follows STRIDES (fine to coarse).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchorSet {
    pub anchors: [[(f64, f64); ANCHORS_PER_SCALE]; 3],
}

impl Default for AnchorSet {
    /// Hand-picked priors spanning box sides 4%-40% of the image.
    fn default() -> Self {
        AnchorSet {
            anchors: [
                [(0.05, 0.05), (0.08, 0.06), (0.07, 0.10)],
                [(0.12, 0.12), (0.18, 0.14), (0.15, 0.22)],
                [(0.25, 0.25), (0.36, 0.28), (0.34, 0.38)],
            ],
        }
    }
}

impl AnchorSet {
    pub fn validate(&self) -> Result<()> {
        for row in &self.anchors {
            let mut prev = 0.0;
            for &(w, h) in row {
                if w <= 0.0 || h <= 0.0 {
                    return Err(Error::invalid("AnchorSet", format!("non-positive anchor ({w}, {h})")));
                }
                let area = w * h;
                if area < prev {
                    return Err(Error::invalid("AnchorSet", "anchors not sorted by area within a scale"));
                }
                prev = area;
            }
        }
        Ok(())
    }

    pub fn flat(&self) -> Vec<(usize, usize, (f64, f64))> {
        let mut out = Vec::with_capacity(9);
        for (s, row) in self.anchors.iter().enumerate() {
            for (a, &wh) in row.iter().enumerate() {
                out.push((s, a, wh));
            }
        }
        out
    }

    /// Lloyd k-means (k = 9, Euclidean on (w, h)) over the dataset's box
    /// sizes, deterministically initialized from area quantiles. Centers
    /// are sorted by area and chunked three per scale, smallest first.
    pub fn kmeans(whs: &[(f64, f64)]) -> Result<AnchorSet> {
        const K: usize = 9;
        if whs.len() < K {
            return Err(Error::invalid(
                "AnchorSet::kmeans",
                format!("need at least {K} boxes, got {}", whs.len()),
            ));
        }
        for &(w, h) in whs {
            if w <= 0.0 || h <= 0.0 {
                return Err(Error::invalid("AnchorSet::kmeans", format!("non-positive box ({w}, {h})")));
            }
        }
        let mut sorted: Vec<(f64, f64)> = whs.to_vec();
        sorted.sort_by(|a, b| (a.0 * a.1).partial_cmp(&(b.0 * b.1)).unwrap());
        let mut centers: Vec<(f64, f64)> = (0..K)
            .map(|i| sorted[(i * (sorted.len() - 1)) / (K - 1)])
            .collect();

        let mut labels = vec![0usize; whs.len()];
        for _ in 0..100 {
            let mut changed = false;
            for (i, &(w, h)) in whs.iter().enumerate() {
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (k, &(cw, ch)) in centers.iter().enumerate() {
                    let d = (w - cw) * (w - cw) + (h - ch) * (h - ch);
                    if d < best_d {
                        best_d = d;
                        best = k;
                    }
                }
                if labels[i] != best {
                    labels[i] = best;
                    changed = true;
                }
            }
            for k in 0..K {
                let members: Vec<(f64, f64)> =
                    whs.iter().zip(&labels).filter(|(_, &l)| l == k).map(|(&v, _)| v).collect();
                if !members.is_empty() {
                    let n = members.len() as f64;
                    centers[k] = (
                        members.iter().map(|v| v.0).sum::<f64>() / n,
                        members.iter().map(|v| v.1).sum::<f64>() / n,
                    );
                }
            }
            if !changed {
                break;
            }
        }

        centers.sort_by(|a, b| (a.0 * a.1).partial_cmp(&(b.0 * b.1)).unwrap());
        let mut anchors = [[(0.0, 0.0); ANCHORS_PER_SCALE]; 3];
        for s in 0..3 {
            for a in 0..ANCHORS_PER_SCALE {
                anchors[s][a] = centers[s * ANCHORS_PER_SCALE + a];
            }
        }
        let set = AnchorSet { anchors };
        set.validate()?;
        Ok(set)
    }
}
