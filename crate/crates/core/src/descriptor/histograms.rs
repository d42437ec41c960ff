use std::f64::consts::{FRAC_PI_2, PI, TAU};

use super::flow::FlowField;
use super::geometry::{PatchGeometry, N_CELLS};
use super::{FeatureKind, FeatureVector, Norm};
use crate::scalespace::GradientField;
use crate::ScalarVolume;

pub const HOG_BINS: usize = 4;
pub const HOF_BINS: usize = 5;
pub const HUE_BINS: usize = 36;
/// Flow magnitudes below this (px/frame) count towards the no-motion bin.
pub const NO_MOTION_THRESHOLD: f64 = 0.25;

/// Nearest of the four directions {0, π/2, π, 3π/2} to the angle of
/// (dx, dy); exact ties go to the lower bin.
#[inline]
pub fn orientation_bin(dx: f64, dy: f64) -> usize {
    let mut theta = dy.atan2(dx);
    if theta < 0.0 {
        theta += TAU;
    }
    let q = theta / FRAC_PI_2;
    ((q - 0.5).ceil() as usize) % HOG_BINS
}

/// Normalizes every consecutive `block`-sized chunk of `values` in place;
/// all-zero chunks stay zero.
pub fn normalize_blocks(values: &mut [f64], block: usize, norm: Norm) {
    for chunk in values.chunks_mut(block) {
        let mass = match norm {
            Norm::L1 => chunk.iter().sum::<f64>(),
            Norm::L2 => chunk.iter().map(|v| v * v).sum::<f64>().sqrt(),
        };
        if mass > 0.0 {
            chunk.iter_mut().for_each(|v| *v /= mass);
        }
    }
}

/// Per-cell 4-bin histograms of spatial gradient orientation weighted by
/// gradient magnitude; 18 cells × 4 bins.
pub fn hog(grad: &GradientField, geom: &PatchGeometry, norm: Norm) -> FeatureVector {
    let mut hist = vec![0.0; N_CELLS * HOG_BINS];
    for (x, y, t) in geom.voxels() {
        let gx = grad.lx.get_abs(x, y, t);
        let gy = grad.ly.get_abs(x, y, t);
        let mag = gx.hypot(gy);
        if mag > 0.0 {
            hist[geom.cell_of(x, y, t) * HOG_BINS + orientation_bin(gx, gy)] += mag;
        }
    }
    normalize_blocks(&mut hist, HOG_BINS, norm);
    FeatureVector::new(FeatureKind::Hog, hist).expect("length fixed by the cell grid")
}

/// Per-cell 5-bin histograms of optical flow: four directions weighted by
/// flow magnitude plus a count of near-static pixels; 18 cells × 5 bins.
pub fn hof(flow: &FlowField, geom: &PatchGeometry, no_motion: f64, norm: Norm) -> FeatureVector {
    let mut hist = vec![0.0; N_CELLS * HOF_BINS];
    for (x, y, t) in geom.voxels() {
        let u = flow.u.get_abs(x, y, t);
        let v = flow.v.get_abs(x, y, t);
        let mag = u.hypot(v);
        let base = geom.cell_of(x, y, t) * HOF_BINS;
        if mag < no_motion {
            hist[base + HOG_BINS] += 1.0;
        } else {
            hist[base + orientation_bin(u, v)] += mag;
        }
    }
    normalize_blocks(&mut hist, HOF_BINS, norm);
    FeatureVector::new(FeatureKind::Hof, hist).expect("length fixed by the cell grid")
}

/// Opponent-colour hue angle in `[0, 2π)` and saturation.
///
/// hue = atan2(√3(R−G), R+G−2B); sat = √(2(R²+G²+B²−RG−RB−GB)/3).
/// On the grey axis both are 0.
#[inline]
pub fn hue_sat(r: f64, g: f64, b: f64) -> (f64, f64) {
    let num = 3f64.sqrt() * (r - g);
    let den = r + g - 2.0 * b;
    let hue = if num == 0.0 && den == 0.0 {
        0.0
    } else {
        let h = num.atan2(den);
        let h = if h < 0.0 { h + TAU } else { h };
        if h >= TAU {
            0.0
        } else {
            h
        }
    };
    // 2(R²+G²+B²−RG−RB−GB)/3 written as a sum of squares
    let s2 = ((r - g).powi(2) + (r - b).powi(2) + (g - b).powi(2)) / 3.0;
    (hue, s2.sqrt())
}

/// Histogram bin ⌊hue·36/2π⌋ of a hue in `[0, 2π)`.
#[inline]
pub fn hue_bin(hue: f64) -> usize {
    ((hue * HUE_BINS as f64 / (2.0 * PI)).floor() as usize).min(HUE_BINS - 1)
}

/// Separable Gaussian weight of a voxel offset from the patch centre.
#[inline]
fn mask_weight(d: (f64, f64, f64), std: (f64, f64, f64)) -> f64 {
    (-(d.0 * d.0 / (2.0 * std.0 * std.0)
        + d.1 * d.1 / (2.0 * std.1 * std.1)
        + d.2 * d.2 / (2.0 * std.2 * std.2)))
        .exp()
}

fn accumulate_hue(
    planes: &[ScalarVolume; 3],
    geom: &PatchGeometry,
    mask_std: (f64, f64, f64),
    mut sink: impl FnMut(usize, usize, usize, usize, f64),
) {
    let (cx, cy, ct) = geom.center;
    for (x, y, t) in geom.voxels() {
        let (hue, sat) = hue_sat(
            planes[0].get_abs(x, y, t),
            planes[1].get_abs(x, y, t),
            planes[2].get_abs(x, y, t),
        );
        if sat > 0.0 {
            let d = (
                x as f64 - cx as f64,
                y as f64 - cy as f64,
                t as f64 - ct as f64,
            );
            sink(x, y, t, hue_bin(hue), sat * mask_weight(d, mask_std));
        }
    }
}

/// Default Gaussian mask standard deviations: half the half-extents.
pub fn default_mask_std(geom: &PatchGeometry) -> (f64, f64, f64) {
    let (hx, hy, ht) = geom.half_extent;
    (hx as f64 / 2.0, hy as f64 / 2.0, ht as f64 / 2.0)
}

/// One 36-bin hue histogram over the whole patch, each voxel adding its
/// saturation times a Gaussian mask centred on the interest point.
pub fn hue_histogram(
    planes: &[ScalarVolume; 3],
    geom: &PatchGeometry,
    mask_std: (f64, f64, f64),
    norm: Norm,
) -> FeatureVector {
    let mut hist = vec![0.0; HUE_BINS];
    accumulate_hue(planes, geom, mask_std, |_, _, _, bin, w| hist[bin] += w);
    normalize_blocks(&mut hist, HUE_BINS, norm);
    FeatureVector::new(FeatureKind::Hue, hist).expect("36 bins")
}

/// Per-cell variant of [`hue_histogram`]: 18 cells × 36 bins, each cell
/// normalized on its own.
pub fn hue_cell_histograms(
    planes: &[ScalarVolume; 3],
    geom: &PatchGeometry,
    mask_std: (f64, f64, f64),
    norm: Norm,
) -> Vec<f64> {
    let mut hist = vec![0.0; N_CELLS * HUE_BINS];
    accumulate_hue(planes, geom, mask_std, |x, y, t, bin, w| {
        hist[geom.cell_of(x, y, t) * HUE_BINS + bin] += w
    });
    normalize_blocks(&mut hist, HUE_BINS, norm);
    hist
}
