//! Brute-force reference implementations shared by the integration tests.
//! They restate each quantity from its definition and avoid the library's
//! own helpers wherever possible.
#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stvision::descriptor::{FlowField, PatchGeometry};
use stvision::scalespace::{GradientField, ScalePair};
use stvision::{Dims, ScalarVolume};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_volume(rng: &mut ChaCha8Rng, dims: Dims, lo: f64, hi: f64) -> ScalarVolume {
    ScalarVolume::from_fn(dims, |_, _, _| rng.random_range(lo..hi))
}

pub fn random_dims(rng: &mut ChaCha8Rng, min: usize, max: usize) -> Dims {
    Dims::new(
        rng.random_range(min..=max),
        rng.random_range(min..=max),
        rng.random_range(min..=max),
    )
}

/// Mirror an index into [0, n) about the half-sample points −½ and n−½.
fn mirror(mut i: i64, n: usize) -> usize {
    let n = n as i64;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

fn gaussian_weights(variance: f64) -> Vec<f64> {
    let r = (4.0 * variance.sqrt()).ceil() as i64;
    let w: Vec<f64> = (-r..=r)
        .map(|u| (-(u as f64).powi(2) / (2.0 * variance)).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Full 3-D convolution with the product kernel, one output voxel at a time.
pub fn direct_smooth(vol: &ScalarVolume, scale: ScalePair) -> ScalarVolume {
    let ks = gaussian_weights(scale.sigma2);
    let kt = gaussian_weights(scale.tau2);
    let (rs, rt) = ((ks.len() / 2) as i64, (kt.len() / 2) as i64);
    let d = vol.dims();
    ScalarVolume::from_fn(d, |x, y, t| {
        let mut acc = 0.0;
        for (c, wt) in kt.iter().enumerate() {
            let tt = mirror(t as i64 + c as i64 - rt, d.frames);
            for (b, wy) in ks.iter().enumerate() {
                let yy = mirror(y as i64 + b as i64 - rs, d.height);
                for (a, wx) in ks.iter().enumerate() {
                    let xx = mirror(x as i64 + a as i64 - rs, d.width);
                    acc += wx * wy * wt * vol.get(xx, yy, tt);
                }
            }
        }
        acc
    })
}

/// λ1λ2λ3 − k(λ1+λ2+λ3)³ from a symmetric eigendecomposition.
pub fn harris_from_eigenvalues(m: [[f64; 3]; 3], k: f64) -> f64 {
    let mat = nalgebra::Matrix3::from_fn(|i, j| m[i][j]);
    let eig = nalgebra::SymmetricEigen::new(mat).eigenvalues;
    let (a, b, c) = (eig[0], eig[1], eig[2]);
    a * b * c - k * (a + b + c).powi(3)
}

/// Random symmetric positive semi-definite matrix AᵀA.
pub fn random_psd(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    let rank = rng.random_range(1..=3);
    let a: Vec<[f64; 3]> = (0..rank)
        .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
        .collect();
    let mut m = [[0.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = a.iter().map(|r| r[i] * r[j]).sum();
        }
    }
    m
}

/// Cell index along one axis: the i with lo + ⌊i·len/n⌋ ≤ v < lo + ⌊(i+1)·len/n⌋.
fn cell_along(v: usize, lo: usize, hi: usize, n: usize) -> usize {
    let len = hi - lo + 1;
    let d = v - lo;
    ((d + 1) * n).div_ceil(len) - 1
}

pub fn cell_index(geom: &PatchGeometry, x: usize, y: usize, t: usize) -> usize {
    let cx = cell_along(x, geom.lo.0, geom.hi.0, 3);
    let cy = cell_along(y, geom.lo.1, geom.hi.1, 3);
    let ct = cell_along(t, geom.lo.2, geom.hi.2, 2);
    ct * 9 + cy * 3 + cx
}

/// Bin whose centre k·π/2 is circularly closest to the angle; lowest k wins
/// exact ties.
pub fn nearest_direction(dx: f64, dy: f64) -> usize {
    let theta = dy.atan2(dx).rem_euclid(TAU);
    let mut best = (0, f64::INFINITY);
    for k in 0..4 {
        let c = k as f64 * PI / 2.0;
        let d = (theta - c).abs();
        let d = d.min(TAU - d);
        if d < best.1 {
            best = (k, d);
        }
    }
    best.0
}

fn l1_blocks(mut v: Vec<f64>, block: usize) -> Vec<f64> {
    for chunk in v.chunks_mut(block) {
        let s: f64 = chunk.iter().sum();
        if s > 0.0 {
            chunk.iter_mut().for_each(|x| *x /= s);
        }
    }
    v
}

fn patch_voxels(geom: &PatchGeometry) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for t in geom.lo.2..=geom.hi.2 {
        for y in geom.lo.1..=geom.hi.1 {
            for x in geom.lo.0..=geom.hi.0 {
                out.push((x, y, t));
            }
        }
    }
    out
}

pub fn brute_hog(grad: &GradientField, geom: &PatchGeometry) -> Vec<f64> {
    let mut h = vec![0.0; 72];
    for (x, y, t) in patch_voxels(geom) {
        let (gx, gy) = (grad.lx.get_abs(x, y, t), grad.ly.get_abs(x, y, t));
        let mag = (gx * gx + gy * gy).sqrt();
        if mag > 0.0 {
            h[cell_index(geom, x, y, t) * 4 + nearest_direction(gx, gy)] += mag;
        }
    }
    l1_blocks(h, 4)
}

pub fn brute_hof(flow: &FlowField, geom: &PatchGeometry, no_motion: f64) -> Vec<f64> {
    let mut h = vec![0.0; 90];
    for (x, y, t) in patch_voxels(geom) {
        let (u, v) = (flow.u.get_abs(x, y, t), flow.v.get_abs(x, y, t));
        let mag = (u * u + v * v).sqrt();
        let cell = cell_index(geom, x, y, t);
        if mag < no_motion {
            h[cell * 5 + 4] += 1.0;
        } else {
            h[cell * 5 + nearest_direction(u, v)] += mag;
        }
    }
    l1_blocks(h, 5)
}

/// Opponent-colour angle and chroma, written exactly as their definitions.
pub fn direct_hue_sat(r: f64, g: f64, b: f64) -> (f64, f64) {
    let hue = (3f64.sqrt() * (r - g))
        .atan2(r + g - 2.0 * b)
        .rem_euclid(TAU);
    let sat2 = 2.0 * (r * r + g * g + b * b - r * g - r * b - g * b) / 3.0;
    (hue, sat2.max(0.0).sqrt())
}

pub fn brute_hue(
    planes: &[ScalarVolume; 3],
    geom: &PatchGeometry,
    std: (f64, f64, f64),
) -> Vec<f64> {
    let mut h = vec![0.0; 36];
    let c = geom.center;
    for (x, y, t) in patch_voxels(geom) {
        let (hue, sat) = direct_hue_sat(
            planes[0].get_abs(x, y, t),
            planes[1].get_abs(x, y, t),
            planes[2].get_abs(x, y, t),
        );
        let dx = x as f64 - c.0 as f64;
        let dy = y as f64 - c.1 as f64;
        let dt = t as f64 - c.2 as f64;
        let mask =
            (-0.5 * ((dx / std.0).powi(2) + (dy / std.1).powi(2) + (dt / std.2).powi(2))).exp();
        let bin = ((hue / (TAU / 36.0)) as usize).min(35);
        h[bin] += sat * mask;
    }
    l1_blocks(h, 36)
}

/// Soft-margin primal objective ½‖w‖² + C Σ max(0, 1 − yᵢ(w·xᵢ + b)).
pub fn svm_primal(w: &[f64], b: f64, x: &[Vec<f64>], y: &[f64], c: f64) -> f64 {
    let mut p = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    for (xi, yi) in x.iter().zip(y) {
        let s: f64 = w.iter().zip(xi).map(|(a, b)| a * b).sum();
        p += c * (1.0 - yi * (s + b)).max(0.0);
    }
    p
}

/// min over b for fixed w: the hinge sum is piecewise linear and convex in
/// b, so its minimum sits at one of the breakpoints b = yᵢ − w·xᵢ.
fn best_over_b(w: &[f64], x: &[Vec<f64>], y: &[f64], c: f64) -> f64 {
    x.iter()
        .zip(y)
        .map(|(xi, yi)| {
            let s: f64 = w.iter().zip(xi).map(|(a, b)| a * b).sum();
            svm_primal(w, yi - s, x, y, c)
        })
        .fold(f64::INFINITY, f64::min)
}

fn ternary(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..90 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    f(0.5 * (lo + hi))
}

/// Global minimum of the primal for 2-D inputs by nested ternary search
/// over (w₁, w₂) with exact b. The partial minima stay convex, so each
/// search is exact up to its bracket width.
pub fn svm_reference_objective(x: &[Vec<f64>], y: &[f64], c: f64) -> f64 {
    let bound = (2.0 * c * x.len() as f64).sqrt() + 1.0;
    ternary(-bound, bound, |w1| {
        ternary(-bound, bound, |w2| best_over_b(&[w1, w2], x, y, c))
    })
}
