//! Anisotropic spatiotemporal Gaussian scale space.
//!
//! The 3D kernel factors as g(x)·g(y)·g(t), so smoothing runs as three 1D
//! passes. Borders use half-sample symmetric reflection
//! (`… f1 f0 | f0 f1 … fn-1 | fn-1 fn-2 …`), which keeps the volume mean
//! exactly. Derivatives are central differences of the smoothed volume.

use rayon::prelude::*;

use crate::{Dims, Error, Result, ScalarVolume};

/// Default kernel radius, in standard deviations.
pub const DEFAULT_TRUNCATION: f64 = 4.0;

/// Spatial and temporal variances (σ², τ²) of an anisotropic Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalePair {
    pub sigma2: f64,
    pub tau2: f64,
}

impl ScalePair {
    pub fn new(sigma2: f64, tau2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite() && tau2 > 0.0 && tau2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "scale variances must be positive, got σ²={sigma2}, τ²={tau2}"
            )));
        }
        Ok(ScalePair { sigma2, tau2 })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    pub fn tau(&self) -> f64 {
        self.tau2.sqrt()
    }

    /// Both variances multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> ScalePair {
        ScalePair {
            sigma2: self.sigma2 * factor,
            tau2: self.tau2 * factor,
        }
    }
}

/// First partial derivatives of a volume.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub lx: ScalarVolume,
    pub ly: ScalarVolume,
    pub lt: ScalarVolume,
}

impl GradientField {
    pub fn dims(&self) -> Dims {
        self.lx.dims()
    }
}

/// Normalized samples of exp(−u²/2v) for integer u in [−r, r],
/// r = ceil(truncation·√v).
pub fn gauss_kernel_1d(variance: f64, truncation: f64) -> Result<Vec<f64>> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "kernel variance must be positive, got {variance}"
        )));
    }
    if !(truncation > 0.0 && truncation.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "kernel truncation must be positive, got {truncation}"
        )));
    }
    let radius = (truncation * variance.sqrt()).ceil() as i64;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|u| (-((u * u) as f64) / (2.0 * variance)).exp())
        .collect();
    let sum: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= sum);
    Ok(kernel)
}

/// Maps a possibly out-of-range index onto `[0, n)` by half-sample
/// symmetric reflection, repeated as often as needed.
#[inline]
pub fn reflect_index(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Separable Gaussian smoothing with the default truncation.
pub fn smooth(vol: &ScalarVolume, scale: ScalePair) -> ScalarVolume {
    smooth_with(vol, scale, DEFAULT_TRUNCATION)
}

pub fn smooth_with(vol: &ScalarVolume, scale: ScalePair, truncation: f64) -> ScalarVolume {
    let spatial = gauss_kernel_1d(scale.sigma2, truncation).expect("ScalePair is positive");
    let temporal = gauss_kernel_1d(scale.tau2, truncation).expect("ScalePair is positive");
    let mut out = convolve_axis(vol, &spatial, 0);
    out = convolve_axis(&out, &spatial, 1);
    convolve_axis(&out, &temporal, 2)
}

/// Convolves every line along `axis` (0 = x, 1 = y, 2 = t) with a symmetric
/// odd-length kernel under reflected borders.
pub fn convolve_axis(vol: &ScalarVolume, kernel: &[f64], axis: usize) -> ScalarVolume {
    assert!(kernel.len() % 2 == 1, "kernel length must be odd");
    let dims = vol.dims();
    let n = dims.axis(axis);
    let radius = (kernel.len() / 2) as i64;
    let padded_index: Vec<usize> = (-radius..n as i64 + radius)
        .map(|i| reflect_index(i, n))
        .collect();

    let (w, h, f) = dims.as_tuple();
    let stride = match axis {
        0 => 1,
        1 => w,
        _ => w * h,
    };
    // Lines along `axis` are enumerated by (outer, inner) start offsets.
    let starts: Vec<usize> = match axis {
        0 => (0..f)
            .flat_map(|t| (0..h).map(move |y| (t * h + y) * w))
            .collect(),
        1 => (0..f)
            .flat_map(|t| (0..w).map(move |x| t * h * w + x))
            .collect(),
        _ => (0..h * w).collect(),
    };

    let src = vol.data();
    let lines: Vec<Vec<f64>> = starts
        .par_iter()
        .map(|&start| {
            let line: Vec<f64> = padded_index
                .iter()
                .map(|&i| src[start + i * stride])
                .collect();
            (0..n)
                .map(|i| {
                    kernel
                        .iter()
                        .zip(&line[i..i + kernel.len()])
                        .map(|(k, v)| k * v)
                        .sum()
                })
                .collect()
        })
        .collect();

    let mut out = vec![0.0; dims.len()];
    for (start, line) in starts.iter().zip(lines) {
        for (i, v) in line.into_iter().enumerate() {
            out[start + i * stride] = v;
        }
    }
    ScalarVolume::from_vec(dims, out)
        .expect("same dims")
        .with_origin(vol.origin())
}

/// Central differences inside, one-sided differences on the faces.
pub fn gradient(vol: &ScalarVolume) -> Result<GradientField> {
    let dims = vol.dims();
    if dims.width < 3 || dims.height < 3 || dims.frames < 3 {
        return Err(Error::VolumeTooSmall {
            dims: dims.as_tuple(),
            message: "gradient needs at least 3 samples along every axis".into(),
        });
    }
    let diff = |axis: usize| {
        let n = dims.axis(axis);
        ScalarVolume::from_fn(dims, |x, y, t| {
            let at = |i: usize| match axis {
                0 => vol.get(i, y, t),
                1 => vol.get(x, i, t),
                _ => vol.get(x, y, i),
            };
            let i = [x, y, t][axis];
            if i == 0 {
                at(1) - at(0)
            } else if i == n - 1 {
                at(n - 1) - at(n - 2)
            } else {
                (at(i + 1) - at(i - 1)) / 2.0
            }
        })
        .with_origin(vol.origin())
    };
    Ok(GradientField {
        lx: diff(0),
        ly: diff(1),
        lt: diff(2),
    })
}
