//! Local space-time descriptors around interest points: HoG, HoF, a hue
//! histogram and their concatenations HoGHoF (STIP) and HueSTIP.

mod flow;
mod geometry;
mod histograms;
mod io;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

pub use flow::{optical_flow, FlowField, FLOW_WINDOW_RADIUS, MAX_CONDITION, MIN_EIGENVALUE};
pub use geometry::{
    half_extent, patch_bounds, patch_bounds_with, PatchGeometry, CELL_GRID, DEFAULT_EXTENT_FACTOR,
    N_CELLS,
};
pub use histograms::{
    default_mask_std, hof, hog, hue_bin, hue_cell_histograms, hue_histogram, hue_sat,
    normalize_blocks, orientation_bin, HOF_BINS, HOG_BINS, HUE_BINS, NO_MOTION_THRESHOLD,
};
pub(crate) use io::Reader;
pub use io::{
    format_descriptors_tsv, parse_descriptors_tsv, read_descriptors_binary,
    write_descriptors_binary, DescriptorRecord, BINARY_MAGIC, BINARY_VERSION,
};

use crate::detector::InterestPoint;
use crate::scalespace::{gradient, smooth, GradientField, ScalePair};
use crate::video_io::{rgb_planes, to_grayscale, Clip};
use crate::{Error, Result, ScalarVolume};

/// Histogram normalization applied per block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Norm {
    #[default]
    L1,
    L2,
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Norm::L1),
            "l2" => Ok(Norm::L2),
            _ => Err(Error::InvalidParameter(format!("unknown norm {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureKind {
    Hog,
    Hof,
    Hue,
    HogHof,
    HueStip,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 5] = [
        FeatureKind::Hog,
        FeatureKind::Hof,
        FeatureKind::Hue,
        FeatureKind::HogHof,
        FeatureKind::HueStip,
    ];

    pub fn len(self) -> usize {
        match self {
            FeatureKind::Hog => N_CELLS * HOG_BINS,
            FeatureKind::Hof => N_CELLS * HOF_BINS,
            FeatureKind::Hue => HUE_BINS,
            FeatureKind::HogHof => N_CELLS * (HOG_BINS + HOF_BINS),
            FeatureKind::HueStip => N_CELLS * (HOG_BINS + HOF_BINS) + HUE_BINS,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Hog => "hog",
            FeatureKind::Hof => "hof",
            FeatureKind::Hue => "hue",
            FeatureKind::HogHof => "hoghof",
            FeatureKind::HueStip => "huestip",
        }
    }

    /// Byte tag used in binary files.
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Self::ALL
            .get(code as usize)
            .copied()
            .ok_or_else(|| Error::malformed("descriptor kind", format!("unknown code {code}")))
    }

    /// Lengths of the normalized sub-histograms, in order.
    pub fn blocks(self) -> Vec<usize> {
        let hog = vec![HOG_BINS; N_CELLS];
        let hof = vec![HOF_BINS; N_CELLS];
        match self {
            FeatureKind::Hog => hog,
            FeatureKind::Hof => hof,
            FeatureKind::Hue => vec![HUE_BINS],
            FeatureKind::HogHof => [hog, hof].concat(),
            FeatureKind::HueStip => [hog, hof, vec![HUE_BINS]].concat(),
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    /// Accepts the canonical names plus `stip` for HoGHoF.
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hog" => Ok(FeatureKind::Hog),
            "hof" => Ok(FeatureKind::Hof),
            "hue" => Ok(FeatureKind::Hue),
            "hoghof" | "stip" => Ok(FeatureKind::HogHof),
            "huestip" => Ok(FeatureKind::HueStip),
            _ => Err(Error::InvalidParameter(format!(
                "unknown descriptor kind {s:?}"
            ))),
        }
    }
}

/// A descriptor whose length always matches its kind.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    kind: FeatureKind,
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(kind: FeatureKind, values: Vec<f64>) -> Result<Self> {
        if values.len() != kind.len() {
            return Err(Error::DimensionMismatch {
                expected: kind.len(),
                got: values.len(),
            });
        }
        Ok(FeatureVector { kind, values })
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Concatenation of several vectors, validated against `kind`.
    pub fn concat(kind: FeatureKind, parts: &[&FeatureVector]) -> Result<Self> {
        let values = parts
            .iter()
            .flat_map(|p| p.values.iter().copied())
            .collect();
        FeatureVector::new(kind, values)
    }

    /// The HoGHoF part of a HueSTIP vector.
    pub fn hoghof_prefix(&self) -> Result<Self> {
        match self.kind {
            FeatureKind::HogHof => Ok(self.clone()),
            FeatureKind::HueStip => FeatureVector::new(
                FeatureKind::HogHof,
                self.values[..FeatureKind::HogHof.len()].to_vec(),
            ),
            k => Err(Error::KindMismatch {
                expected: FeatureKind::HueStip.to_string(),
                got: k.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorParams {
    /// Patch half extent in standard deviations of the detection scale.
    pub extent_factor: f64,
    pub norm: Norm,
    /// Scale whose patch size sets the hue mask; `None` uses the detection scale.
    pub hue_scale: Option<ScalePair>,
    pub no_motion_threshold: f64,
}

impl Default for DescriptorParams {
    fn default() -> Self {
        DescriptorParams {
            extent_factor: DEFAULT_EXTENT_FACTOR,
            norm: Norm::L1,
            hue_scale: None,
            no_motion_threshold: NO_MOTION_THRESHOLD,
        }
    }
}

impl DescriptorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.extent_factor > 0.0 && self.extent_factor.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "extent factor must be positive, got {}",
                self.extent_factor
            )));
        }
        if !(self.no_motion_threshold >= 0.0 && self.no_motion_threshold.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "no-motion threshold must be non-negative, got {}",
                self.no_motion_threshold
            )));
        }
        if let Some(s) = self.hue_scale {
            ScalePair::new(s.sigma2, s.tau2)?;
        }
        Ok(())
    }
}

struct ScaleData {
    smoothed: ScalarVolume,
    grad: GradientField,
}

/// Descriptor computation for one clip. Smoothed volumes and gradients are
/// computed once per detection scale and shared between points.
pub struct Extractor<'a> {
    clip: &'a Clip,
    gray: ScalarVolume,
    planes: [ScalarVolume; 3],
    params: DescriptorParams,
    cache: Mutex<HashMap<(u64, u64), Arc<ScaleData>>>,
}

impl<'a> Extractor<'a> {
    pub fn new(clip: &'a Clip, params: DescriptorParams) -> Result<Self> {
        params.validate()?;
        Ok(Extractor {
            clip,
            gray: to_grayscale(clip),
            planes: rgb_planes(clip),
            params,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn clip(&self) -> &Clip {
        self.clip
    }

    fn scale_data(&self, scale: ScalePair) -> Result<Arc<ScaleData>> {
        let key = (scale.sigma2.to_bits(), scale.tau2.to_bits());
        if let Some(d) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(d.clone());
        }
        let smoothed = smooth(&self.gray, scale);
        let grad = gradient(&smoothed)?;
        let data = Arc::new(ScaleData { smoothed, grad });
        Ok(self
            .cache
            .lock()
            .expect("cache lock")
            .entry(key)
            .or_insert(data)
            .clone())
    }

    fn hoghof_parts(
        &self,
        p: &InterestPoint,
        geom: &PatchGeometry,
    ) -> Result<(FeatureVector, FeatureVector)> {
        let data = self.scale_data(p.scale())?;
        let hog_v = hog(&data.grad, geom, self.params.norm);
        let dims = self.gray.dims();
        let m = (FLOW_WINDOW_RADIUS, FLOW_WINDOW_RADIUS, 1);
        let region = data.smoothed.crop(
            (
                geom.lo.0.saturating_sub(m.0),
                (geom.hi.0 + m.0 + 1).min(dims.width),
            ),
            (
                geom.lo.1.saturating_sub(m.1),
                (geom.hi.1 + m.1 + 1).min(dims.height),
            ),
            (
                geom.lo.2.saturating_sub(m.2),
                (geom.hi.2 + m.2 + 1).min(dims.frames),
            ),
        );
        let flow = optical_flow(&region)?;
        let hof_v = hof(
            &flow,
            geom,
            self.params.no_motion_threshold,
            self.params.norm,
        );
        Ok((hog_v, hof_v))
    }

    fn hue_part(&self, p: &InterestPoint, geom: &PatchGeometry) -> FeatureVector {
        let mask_std = match self.params.hue_scale {
            None => default_mask_std(geom),
            Some(s) => {
                let (hx, hy, ht) = half_extent(s.sigma2, s.tau2, self.params.extent_factor);
                (hx as f64 / 2.0, hy as f64 / 2.0, ht as f64 / 2.0)
            }
        };
        debug_assert!(self.clip.dims().contains(p.x, p.y, p.t));
        hue_histogram(&self.planes, geom, mask_std, self.params.norm)
    }

    pub fn geometry(&self, p: &InterestPoint) -> Result<PatchGeometry> {
        patch_bounds_with(p, self.clip.dims(), self.params.extent_factor)
    }

    /// HoGHoF or HueSTIP descriptor of one point.
    pub fn describe(&self, p: &InterestPoint, kind: FeatureKind) -> Result<FeatureVector> {
        let geom = self.geometry(p)?;
        match kind {
            FeatureKind::HogHof => {
                let (g, f) = self.hoghof_parts(p, &geom)?;
                FeatureVector::concat(kind, &[&g, &f])
            }
            FeatureKind::HueStip => {
                let (g, f) = self.hoghof_parts(p, &geom)?;
                let h = self.hue_part(p, &geom);
                FeatureVector::concat(kind, &[&g, &f, &h])
            }
            k => Err(Error::InvalidParameter(format!(
                "describe produces hoghof or huestip, not {k}"
            ))),
        }
    }

    /// Both descriptors of one point; the HoGHoF vector is the prefix of the
    /// HueSTIP vector.
    pub fn describe_both(&self, p: &InterestPoint) -> Result<(FeatureVector, FeatureVector)> {
        let full = self.describe(p, FeatureKind::HueStip)?;
        Ok((full.hoghof_prefix()?, full))
    }

    fn warm(&self, points: &[InterestPoint]) -> Result<()> {
        let mut scales: Vec<ScalePair> = Vec::new();
        for p in points {
            if !scales.contains(&p.scale()) {
                scales.push(p.scale());
            }
        }
        scales
            .par_iter()
            .map(|s| self.scale_data(*s).map(|_| ()))
            .collect()
    }

    pub fn describe_all(
        &self,
        points: &[InterestPoint],
        kind: FeatureKind,
    ) -> Result<Vec<FeatureVector>> {
        self.warm(points)?;
        points.par_iter().map(|p| self.describe(p, kind)).collect()
    }

    pub fn describe_all_both(
        &self,
        points: &[InterestPoint],
    ) -> Result<Vec<(FeatureVector, FeatureVector)>> {
        self.warm(points)?;
        points.par_iter().map(|p| self.describe_both(p)).collect()
    }
}

/// One-off descriptor of a single point with default parameters.
pub fn describe(clip: &Clip, p: &InterestPoint, kind: FeatureKind) -> Result<FeatureVector> {
    Extractor::new(clip, DescriptorParams::default())?.describe(p, kind)
}
