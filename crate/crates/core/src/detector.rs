//! Harris3D spatiotemporal interest points.
//!
//! For every scale (σ², τ²) the grey volume is smoothed, differentiated and
//! the outer product of the gradient is integrated at (s·σ², s·τ²) into the
//! second-moment matrix μ. The response `H = det(μ) − k·trace(μ)³` is
//! positive only where μ has three significant eigenvalues, i.e. where the
//! image varies strongly along x, y and t at once. Points with a constant
//! velocity span only a rank-2 subspace, so detections concentrate on
//! changes of motion.
//!
//! With eigenvalue ratios α = λ2/λ1 and β = λ3/λ1, a positive response
//! requires `k ≤ αβ / (1 + α + β)³`, i.e. at most 1/27 for isotropic
//! structure. The default `k` sits well below that bound.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::scalespace::{gradient, smooth, GradientField, ScalePair};
use crate::{Dims, Error, Result, ScalarVolume};

pub const DEFAULT_K: f64 = 0.0005;
pub const DEFAULT_INTEGRATION_FACTOR: f64 = 4.0;
pub const DEFAULT_THRESHOLD: f64 = 1e-9;
pub const DEFAULT_SIGMA2: [f64; 4] = [4.0, 8.0, 16.0, 32.0];
pub const DEFAULT_TAU2: [f64; 2] = [2.0, 4.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterestPoint {
    pub x: usize,
    pub y: usize,
    pub t: usize,
    pub sigma2: f64,
    pub tau2: f64,
    pub response: f64,
}

impl InterestPoint {
    pub fn scale(&self) -> ScalePair {
        ScalePair {
            sigma2: self.sigma2,
            tau2: self.tau2,
        }
    }
}

/// The six distinct entries of the symmetric 3×3 second-moment matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentField {
    pub xx: ScalarVolume,
    pub yy: ScalarVolume,
    pub tt: ScalarVolume,
    pub xy: ScalarVolume,
    pub xt: ScalarVolume,
    pub yt: ScalarVolume,
}

impl MomentField {
    pub fn dims(&self) -> Dims {
        self.xx.dims()
    }

    /// μ assembled at one voxel, row-major.
    pub fn matrix_at(&self, x: usize, y: usize, t: usize) -> [[f64; 3]; 3] {
        let (xx, yy, tt) = (
            self.xx.get(x, y, t),
            self.yy.get(x, y, t),
            self.tt.get(x, y, t),
        );
        let (xy, xt, yt) = (
            self.xy.get(x, y, t),
            self.xt.get(x, y, t),
            self.yt.get(x, y, t),
        );
        [[xx, xy, xt], [xy, yy, yt], [xt, yt, tt]]
    }
}

/// Non-maximum suppression half-widths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NmsRadius {
    /// (⌈2σ⌉, ⌈2σ⌉, ⌈2τ⌉) of each detection scale.
    ScaleProportional,
    Fixed {
        rx: usize,
        ry: usize,
        rt: usize,
    },
}

impl NmsRadius {
    pub fn for_scale(&self, scale: ScalePair) -> (usize, usize, usize) {
        match *self {
            NmsRadius::ScaleProportional => {
                let rs = (2.0 * scale.sigma()).ceil() as usize;
                (rs, rs, (2.0 * scale.tau()).ceil() as usize)
            }
            NmsRadius::Fixed { rx, ry, rt } => (rx, ry, rt),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorParams {
    /// Harris constant.
    pub k: f64,
    pub scales: Vec<ScalePair>,
    /// Integration variances are `integration_factor` times the local ones.
    pub integration_factor: f64,
    /// Minimum response kept.
    pub threshold: f64,
    pub nms_radius: NmsRadius,
    /// Keep only the strongest `n` points per clip.
    pub top_n: Option<usize>,
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams {
            k: DEFAULT_K,
            scales: cartesian_scales(&DEFAULT_SIGMA2, &DEFAULT_TAU2),
            integration_factor: DEFAULT_INTEGRATION_FACTOR,
            threshold: DEFAULT_THRESHOLD,
            nms_radius: NmsRadius::ScaleProportional,
            top_n: None,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.k > 0.0 && self.k.is_finite()) {
            return bad(format!("k must be positive, got {}", self.k));
        }
        if !(self.integration_factor > 0.0 && self.integration_factor.is_finite()) {
            return bad(format!(
                "integration factor must be positive, got {}",
                self.integration_factor
            ));
        }
        if !(self.threshold >= 0.0) {
            return bad(format!("threshold must be ≥ 0, got {}", self.threshold));
        }
        if self.scales.is_empty() {
            return bad("scale set is empty".into());
        }
        for s in &self.scales {
            ScalePair::new(s.sigma2, s.tau2)?;
        }
        Ok(())
    }
}

/// Every (σ², τ²) combination, spatial scale varying slowest.
pub fn cartesian_scales(sigma2: &[f64], tau2: &[f64]) -> Vec<ScalePair> {
    sigma2
        .iter()
        .flat_map(|&s| tau2.iter().map(move |&t| ScalePair { sigma2: s, tau2: t }))
        .collect()
}

/// Gaussian-integrated products of the gradient components.
pub fn second_moment(g: &GradientField, integration: ScalePair) -> MomentField {
    let pairs: [(&ScalarVolume, &ScalarVolume); 6] = [
        (&g.lx, &g.lx),
        (&g.ly, &g.ly),
        (&g.lt, &g.lt),
        (&g.lx, &g.ly),
        (&g.lx, &g.lt),
        (&g.ly, &g.lt),
    ];
    let mut smoothed: Vec<ScalarVolume> = pairs
        .par_iter()
        .map(|(a, b)| smooth(&a.zip_map(b, |p, q| p * q), integration))
        .collect();
    let yt = smoothed.pop().unwrap();
    let xt = smoothed.pop().unwrap();
    let xy = smoothed.pop().unwrap();
    let tt = smoothed.pop().unwrap();
    let yy = smoothed.pop().unwrap();
    let xx = smoothed.pop().unwrap();
    MomentField {
        xx,
        yy,
        tt,
        xy,
        xt,
        yt,
    }
}

/// det(μ) − k·trace(μ)³ from the closed-form 3×3 determinant.
#[inline]
pub fn harris_value(m: [[f64; 3]; 3], k: f64) -> f64 {
    let [[a, b, c], [_, d, e], [_, _, f]] = m;
    let det = a * (d * f - e * e) - b * (b * f - e * c) + c * (b * e - d * c);
    let trace = a + d + f;
    det - k * trace * trace * trace
}

pub fn harris_response(m: &MomentField, k: f64) -> ScalarVolume {
    let data = (0..m.dims().len())
        .map(|i| {
            let (a, b, c) = (m.xx.data()[i], m.xy.data()[i], m.xt.data()[i]);
            let (d, e, f) = (m.yy.data()[i], m.yt.data()[i], m.tt.data()[i]);
            harris_value([[a, b, c], [b, d, e], [c, e, f]], k)
        })
        .collect();
    ScalarVolume::from_vec(m.dims(), data)
        .expect("same dims")
        .with_origin(m.xx.origin())
}

/// Response volume of one scale.
pub fn response_at_scale(
    vol: &ScalarVolume,
    scale: ScalePair,
    params: &DetectorParams,
) -> Result<ScalarVolume> {
    let smoothed = smooth(vol, scale);
    let grad = gradient(&smoothed)?;
    let moments = second_moment(&grad, scale.scaled(params.integration_factor));
    Ok(harris_response(&moments, params.k))
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    point: InterestPoint,
    scale: usize,
}

/// Detects interest points over every scale of `params`.
///
/// A voxel is kept at its scale when `H ≥ threshold` and it is the strict
/// maximum of the (2rx+1)×(2ry+1)×(2rt+1) neighbourhood, which must lie
/// entirely inside the volume. A candidate is then dropped when a candidate
/// with higher response at an adjacent scale (one step in σ² and/or τ²)
/// lies inside the larger of the two NMS windows. Results are sorted by
/// response, strongest first.
pub fn detect(vol: &ScalarVolume, params: &DetectorParams) -> Result<Vec<InterestPoint>> {
    params.validate()?;
    let dims = vol.dims();
    for s in &params.scales {
        let (rx, ry, rt) = params.nms_radius.for_scale(*s);
        if dims.width < 2 * rx + 1 || dims.height < 2 * ry + 1 || dims.frames < 2 * rt + 1 {
            return Err(Error::VolumeTooSmall {
                dims: dims.as_tuple(),
                message: format!(
                    "NMS window {}x{}x{} at σ²={}, τ²={}",
                    2 * rx + 1,
                    2 * ry + 1,
                    2 * rt + 1,
                    s.sigma2,
                    s.tau2
                ),
            });
        }
    }

    let per_scale: Vec<Vec<Candidate>> = params
        .scales
        .par_iter()
        .enumerate()
        .map(|(si, &scale)| {
            let h = response_at_scale(vol, scale, params)?;
            let radius = params.nms_radius.for_scale(scale);
            Ok(local_maxima(&h, radius, params.threshold)
                .into_iter()
                .map(|(x, y, t, response)| Candidate {
                    point: InterestPoint {
                        x,
                        y,
                        t,
                        sigma2: scale.sigma2,
                        tau2: scale.tau2,
                        response,
                    },
                    scale: si,
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut points = suppress_across_scales(&params.scales, &params.nms_radius, per_scale);
    points.sort_by(|a, b| {
        b.response
            .total_cmp(&a.response)
            .then(a.t.cmp(&b.t))
            .then(a.y.cmp(&b.y))
            .then(a.x.cmp(&b.x))
            .then(a.sigma2.total_cmp(&b.sigma2))
            .then(a.tau2.total_cmp(&b.tau2))
    });
    if let Some(n) = params.top_n {
        points.truncate(n);
    }
    Ok(points)
}

/// Strict local maxima of `h` at or above `threshold` whose full window
/// fits inside the volume.
pub fn local_maxima(
    h: &ScalarVolume,
    (rx, ry, rt): (usize, usize, usize),
    threshold: f64,
) -> Vec<(usize, usize, usize, f64)> {
    let dims = h.dims();
    if dims.width < 2 * rx + 1 || dims.height < 2 * ry + 1 || dims.frames < 2 * rt + 1 {
        return Vec::new();
    }
    let mut m = max_filter_axis(h, rx, 0);
    m = max_filter_axis(&m, ry, 1);
    m = max_filter_axis(&m, rt, 2);

    let mut out = Vec::new();
    for t in rt..dims.frames - rt {
        for y in ry..dims.height - ry {
            for x in rx..dims.width - rx {
                let v = h.get(x, y, t);
                if v >= threshold
                    && v == m.get(x, y, t)
                    && is_unique_max(h, (x, y, t), (rx, ry, rt))
                {
                    out.push((x, y, t, v));
                }
            }
        }
    }
    out
}

fn is_unique_max(
    h: &ScalarVolume,
    (x, y, t): (usize, usize, usize),
    r: (usize, usize, usize),
) -> bool {
    let v = h.get(x, y, t);
    for tt in t - r.2..=t + r.2 {
        for yy in y - r.1..=y + r.1 {
            for xx in x - r.0..=x + r.0 {
                if (xx, yy, tt) != (x, y, t) && h.get(xx, yy, tt) >= v {
                    return false;
                }
            }
        }
    }
    true
}

/// Running maximum over a window clipped to the volume.
fn max_filter_axis(vol: &ScalarVolume, radius: usize, axis: usize) -> ScalarVolume {
    let dims = vol.dims();
    let n = dims.axis(axis);
    ScalarVolume::from_fn(dims, |x, y, t| {
        let i = [x, y, t][axis];
        let lo = i.saturating_sub(radius);
        let hi = (i + radius).min(n - 1);
        (lo..=hi)
            .map(|j| match axis {
                0 => vol.get(j, y, t),
                1 => vol.get(x, j, t),
                _ => vol.get(x, y, j),
            })
            .fold(f64::NEG_INFINITY, f64::max)
    })
}

fn rank_of(values: &[f64], v: f64) -> usize {
    values.iter().position(|&u| u == v).expect("value present")
}

fn suppress_across_scales(
    scales: &[ScalePair],
    nms: &NmsRadius,
    per_scale: Vec<Vec<Candidate>>,
) -> Vec<InterestPoint> {
    let unique = |f: fn(&ScalePair) -> f64| -> Vec<f64> {
        let set: BTreeSet<u64> = scales.iter().map(|s| f(s).to_bits()).collect();
        let mut v: Vec<f64> = set.into_iter().map(f64::from_bits).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let sigmas = unique(|s| s.sigma2);
    let taus = unique(|s| s.tau2);
    let grid: Vec<(usize, usize)> = scales
        .iter()
        .map(|s| (rank_of(&sigmas, s.sigma2), rank_of(&taus, s.tau2)))
        .collect();
    let adjacent = |a: usize, b: usize| {
        a != b && grid[a].0.abs_diff(grid[b].0) <= 1 && grid[a].1.abs_diff(grid[b].1) <= 1
    };
    let radii: Vec<(usize, usize, usize)> = scales.iter().map(|s| nms.for_scale(*s)).collect();

    let mut kept = Vec::new();
    for (si, cands) in per_scale.iter().enumerate() {
        for c in cands {
            let suppressed = (0..scales.len())
                .filter(|&sj| adjacent(si, sj))
                .flat_map(|sj| per_scale[sj].iter())
                .any(|o| {
                    let (ax, ay, at) = radii[c.scale];
                    let (bx, by, bt) = radii[o.scale];
                    o.point.response > c.point.response
                        && c.point.x.abs_diff(o.point.x) <= ax.max(bx)
                        && c.point.y.abs_diff(o.point.y) <= ay.max(by)
                        && c.point.t.abs_diff(o.point.t) <= at.max(bt)
                });
            if !suppressed {
                kept.push(c.point);
            }
        }
    }
    kept
}

/// One `clip-id x y t sigma2 tau2 response` line per point.
pub fn format_points_tsv(clip_id: &str, points: &[InterestPoint]) -> String {
    let mut s = String::new();
    for p in points {
        writeln!(
            s,
            "{clip_id}\t{}\t{}\t{}\t{}\t{}\t{}",
            p.x, p.y, p.t, p.sigma2, p.tau2, p.response
        )
        .unwrap();
    }
    s
}

pub fn parse_points_tsv(text: &str) -> Result<Vec<(String, InterestPoint)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let err = || Error::malformed("interest point TSV", format!("line {}", n + 1));
        if f.len() != 7 {
            return Err(err());
        }
        let u = |s: &str| s.parse::<usize>().map_err(|_| err());
        let r = |s: &str| s.parse::<f64>().map_err(|_| err());
        out.push((
            f[0].to_owned(),
            InterestPoint {
                x: u(f[1])?,
                y: u(f[2])?,
                t: u(f[3])?,
                sigma2: r(f[4])?,
                tau2: r(f[5])?,
                response: r(f[6])?,
            },
        ));
    }
    Ok(out)
}
