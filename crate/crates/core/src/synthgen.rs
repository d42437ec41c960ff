//! Deterministic synthetic clips with known ground truth.
//!
//! Every generator is a pure function of its [`SynthSpec`] (seed included):
//! the same `SynthSpec` always yields bit-identical pixels.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::video_io::{self, Clip, ManifestEntry, Split, LUMA_WEIGHTS};
use crate::{Dims, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// Hard-edged square that reverses direction once.
    MovingCorner,
    /// Gaussian blob at constant velocity.
    TranslatingBlob,
    /// Soft-edged square oscillating back and forth, for classification data.
    ColorAction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    /// Displacement per frame, px.
    pub velocity: (f64, f64),
    /// Frame of the direction reversal; for `ColorAction` the half period of
    /// the oscillation.
    pub turnaround: usize,
    /// Top-left corner of the square (blob centre for `TranslatingBlob`) at t = 0.
    pub start: (f64, f64),
    /// Square side, or blob standard deviation.
    pub size: f64,
    pub foreground: [f64; 3],
    pub background: [f64; 3],
    pub noise_std: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// The 64×64×40 moving-corner setup: a bright 16 px square moving right
    /// at 2 px/frame, reversing at frame 20.
    pub fn moving_corner(seed: u64) -> Self {
        SynthSpec {
            kind: SynthKind::MovingCorner,
            width: 64,
            height: 64,
            frames: 40,
            velocity: (2.0, 0.0),
            turnaround: 20,
            start: (2.0, 24.0),
            size: 16.0,
            foreground: [0.9; 3],
            background: [0.1; 3],
            noise_std: 0.0,
            seed,
        }
    }

    pub fn translating_blob(velocity: (f64, f64)) -> Self {
        SynthSpec {
            kind: SynthKind::TranslatingBlob,
            width: 32,
            height: 32,
            frames: 9,
            velocity,
            turnaround: 1,
            start: (12.0, 16.0),
            size: 3.0,
            foreground: [0.9; 3],
            background: [0.1; 3],
            noise_std: 0.0,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.frames == 0 {
            return Err(Error::InvalidParameter(
                "synthetic clip dims must be positive".into(),
            ));
        }
        if self.kind != SynthKind::TranslatingBlob
            && (self.turnaround == 0 || self.turnaround >= self.frames)
        {
            return Err(Error::InvalidParameter(format!(
                "turnaround {} must lie in (0, {})",
                self.turnaround, self.frames
            )));
        }
        if !(self.velocity.0.is_finite() && self.velocity.1.is_finite()) {
            return Err(Error::InvalidParameter("velocity must be finite".into()));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::InvalidParameter("noise std must be ≥ 0".into()));
        }
        let in_unit = |c: &[f64; 3]| c.iter().all(|v| (0.0..=1.0).contains(v));
        if !in_unit(&self.foreground) || !in_unit(&self.background) {
            return Err(Error::InvalidParameter("colours must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Offset of the square from `start` at frame `t`.
    fn displacement(&self, t: usize) -> (f64, f64) {
        let steps = match self.kind {
            SynthKind::TranslatingBlob => t as f64,
            SynthKind::MovingCorner => {
                if t <= self.turnaround {
                    t as f64
                } else {
                    (2 * self.turnaround - t) as f64
                }
            }
            SynthKind::ColorAction => {
                let period = 2 * self.turnaround;
                let m = t % period;
                (if m <= self.turnaround { m } else { period - m }) as f64
            }
        };
        (self.velocity.0 * steps, self.velocity.1 * steps)
    }
}

/// Where and when the moving square reverses.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Leading corner (in pixel-centre coordinates) at the turnaround frame.
    pub x: f64,
    pub y: f64,
    pub t: usize,
    /// All four corners of the square at the turnaround frame.
    pub corners: [(f64, f64); 4],
}

impl GroundTruth {
    /// Distance from (x, y) to the closest square corner.
    pub fn corner_distance(&self, x: f64, y: f64) -> f64 {
        self.corners
            .iter()
            .map(|&(cx, cy)| (cx - x).hypot(cy - y))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Length of the overlap of `[a, a+1)` with `[lo, hi)`.
fn overlap(a: f64, lo: f64, hi: f64) -> f64 {
    ((a + 1.0).min(hi) - a.max(lo)).max(0.0)
}

fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

fn render(spec: &SynthSpec, alpha: impl Fn(usize, usize, usize) -> f64) -> Result<Clip> {
    let dims = Dims::new(spec.width, spec.height, spec.frames);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_std.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let grey_noise = spec.foreground.iter().all(|&c| c == spec.foreground[0])
        && spec.background.iter().all(|&c| c == spec.background[0]);
    let mut rgb = Vec::with_capacity(dims.len());
    for t in 0..dims.frames {
        for y in 0..dims.height {
            for x in 0..dims.width {
                let a = alpha(x, y, t);
                let mut p = [0.0; 3];
                for c in 0..3 {
                    p[c] = spec.background[c] + a * (spec.foreground[c] - spec.background[c]);
                }
                if spec.noise_std > 0.0 {
                    if grey_noise {
                        let n = noise.sample(&mut rng);
                        p.iter_mut().for_each(|v| *v += n);
                    } else {
                        p.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
                    }
                    p.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
                }
                rgb.push(p);
            }
        }
    }
    Clip::from_rgb(format!("synth-{}", spec.seed), dims, rgb)
}

fn check_trajectory(spec: &SynthSpec, margin: f64) -> Result<()> {
    for t in 0..spec.frames {
        let (dx, dy) = spec.displacement(t);
        let (x0, y0) = (spec.start.0 + dx, spec.start.1 + dy);
        let (x1, y1) = match spec.kind {
            SynthKind::TranslatingBlob => (x0, y0),
            _ => (x0 + spec.size, y0 + spec.size),
        };
        if x0 < margin
            || y0 < margin
            || x1 > spec.width as f64 - margin
            || y1 > spec.height as f64 - margin
        {
            return Err(Error::InvalidParameter(format!(
                "trajectory leaves the frame at t={t}"
            )));
        }
    }
    Ok(())
}

/// A hard-edged (area-antialiased) square that moves with `velocity` up to
/// the turnaround frame and returns along the same path afterwards.
pub fn moving_corner_clip(spec: &SynthSpec) -> Result<(Clip, GroundTruth)> {
    spec.validate()?;
    check_trajectory(spec, 0.0)?;
    let pos = |t: usize| {
        let (dx, dy) = spec.displacement(t);
        (spec.start.0 + dx, spec.start.1 + dy)
    };
    let clip = render(spec, |x, y, t| {
        let (px, py) = pos(t);
        overlap(x as f64, px, px + spec.size) * overlap(y as f64, py, py + spec.size)
    })?;
    let (px, py) = pos(spec.turnaround);
    // Pixel centres sit at integer coordinates; an edge at p lies at p − 0.5.
    let (l, r) = (px - 0.5, px + spec.size - 0.5);
    let (top, bottom) = (py - 0.5, py + spec.size - 0.5);
    let lead_x = if spec.velocity.0 >= 0.0 { r } else { l };
    let lead_y = if spec.velocity.1 > 0.0 { bottom } else { top };
    Ok((
        clip,
        GroundTruth {
            x: lead_x,
            y: lead_y,
            t: spec.turnaround,
            corners: [(l, top), (r, top), (l, bottom), (r, bottom)],
        },
    ))
}

/// A Gaussian blob of standard deviation `size` moving at constant velocity.
pub fn translating_blob_clip(spec: &SynthSpec) -> Result<Clip> {
    spec.validate()?;
    let s2 = 2.0 * spec.size * spec.size;
    render(spec, |x, y, t| {
        let (dx, dy) = spec.displacement(t);
        let (cx, cy) = (spec.start.0 + dx, spec.start.1 + dy);
        let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
        (-d2 / s2).exp()
    })
}

/// Edge softness (logistic scale, px) of [`SynthKind::ColorAction`] squares.
pub const SOFT_EDGE: f64 = 1.0;

/// A soft-edged square oscillating with a triangle-wave trajectory.
pub fn color_action_clip(spec: &SynthSpec) -> Result<Clip> {
    spec.validate()?;
    check_trajectory(spec, 0.0)?;
    render(spec, |x, y, t| {
        let (dx, dy) = spec.displacement(t);
        let (px, py) = (spec.start.0 + dx - 0.5, spec.start.1 + dy - 0.5);
        let along = |v: f64, lo: f64| {
            logistic((v - lo) / SOFT_EDGE) - logistic((v - lo - spec.size) / SOFT_EDGE)
        };
        along(x as f64, px) * along(y as f64, py)
    })
}

/// Renders any `SynthSpec` according to its kind.
pub fn generate(spec: &SynthSpec) -> Result<Clip> {
    match spec.kind {
        SynthKind::MovingCorner => moving_corner_clip(spec).map(|(c, _)| c),
        SynthKind::TranslatingBlob => translating_blob_clip(spec),
        SynthKind::ColorAction => color_action_clip(spec),
    }
}

/// RGB colour with BT.601 luminance `luma` and the given red and blue
/// components; green is solved for.
pub fn iso_luminant(luma: f64, r: f64, b: f64) -> Result<[f64; 3]> {
    let [wr, wg, wb] = LUMA_WEIGHTS;
    let g = (luma - wr * r - wb * b) / wg;
    let c = [r, g, b];
    if c.iter().all(|v| (0.0..=1.0).contains(v)) {
        Ok(c)
    } else {
        Err(Error::InvalidParameter(format!(
            "no iso-luminant colour with luma {luma}, r {r}, b {b}"
        )))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthClass {
    pub label: String,
    /// Template; start position and phase are randomized per clip.
    pub spec: SynthSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthClip {
    pub id: String,
    pub label: String,
    pub split: Split,
    pub clip: Clip,
}

/// Foreground luminance shared by every class of the default dataset.
pub const ACTION_LUMA: f64 = 0.65;
/// Grey background of the default dataset.
pub const ACTION_BACKGROUND: f64 = 0.05;

/// Four classes: `red` and `teal` share motion and luminance and differ only
/// in (iso-luminant) colour; `horizontal` and `vertical` share colour and
/// differ only in motion direction.
pub fn default_action_classes() -> Vec<SynthClass> {
    let template = |velocity: (f64, f64), fg: [f64; 3]| SynthSpec {
        kind: SynthKind::ColorAction,
        width: 48,
        height: 48,
        frames: 32,
        velocity,
        turnaround: 8,
        start: (0.0, 0.0),
        size: 12.0,
        foreground: fg,
        background: [ACTION_BACKGROUND; 3],
        noise_std: 0.01,
        seed: 0,
    };
    let red = iso_luminant(ACTION_LUMA, 0.95, 0.2).unwrap();
    let teal = iso_luminant(ACTION_LUMA, 0.1, 0.75).unwrap();
    let yellow = iso_luminant(ACTION_LUMA, 0.6, 0.1).unwrap();
    vec![
        SynthClass {
            label: "red".into(),
            spec: template((1.5, 1.5), red),
        },
        SynthClass {
            label: "teal".into(),
            spec: template((1.5, 1.5), teal),
        },
        SynthClass {
            label: "horizontal".into(),
            spec: template((2.0, 0.0), yellow),
        },
        SynthClass {
            label: "vertical".into(),
            spec: template((0.0, 2.0), yellow),
        },
    ]
}

/// `n_per_class` clips per class; the first half of every class goes to
/// the training split. Start position and oscillation phase are drawn from
/// a generator seeded with `seed`.
pub fn color_action_dataset(
    n_per_class: usize,
    classes: &[SynthClass],
    seed: u64,
) -> Result<Vec<SynthClip>> {
    if classes.len() < 2 {
        return Err(Error::InvalidParameter("need at least two classes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_per_class * classes.len());
    for class in classes {
        for i in 0..n_per_class {
            let mut spec = class.spec.clone();
            spec.seed = rng.random();
            let phase = rng.random_range(0..2 * spec.turnaround);
            // Shift the trajectory so that frame 0 shows phase `phase`.
            let span = |v: f64| v.abs() * spec.turnaround as f64;
            let (sx, sy) = (span(spec.velocity.0), span(spec.velocity.1));
            let room_x = spec.width as f64 - spec.size - sx - 4.0;
            let room_y = spec.height as f64 - spec.size - sy - 4.0;
            if room_x < 0.0 || room_y < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "class {} does not fit its frame",
                    class.label
                )));
            }
            let base = (
                2.0 + rng.random_range(0.0..=room_x).round(),
                2.0 + rng.random_range(0.0..=room_y).round(),
            );
            let neg = |v: f64, s: f64| if v < 0.0 { s } else { 0.0 };
            spec.start = (
                base.0 + neg(spec.velocity.0, sx),
                base.1 + neg(spec.velocity.1, sy),
            );
            let mut clip = color_action_phase_shifted(&spec, phase)?;
            let id = format!("{}_{i:03}", class.label);
            clip = clip.with_id(id.clone()).with_label(class.label.clone());
            out.push(SynthClip {
                id,
                label: class.label.clone(),
                split: if i < n_per_class.div_ceil(2) {
                    Split::Train
                } else {
                    Split::Test
                },
                clip,
            });
        }
    }
    Ok(out)
}

fn color_action_phase_shifted(spec: &SynthSpec, phase: usize) -> Result<Clip> {
    // Render `frames + phase` frames and keep the tail.
    let long = SynthSpec {
        frames: spec.frames + phase,
        ..spec.clone()
    };
    let clip = color_action_clip(&long)?;
    let dims = Dims::new(spec.width, spec.height, spec.frames);
    let per_frame = spec.width * spec.height;
    let rgb = clip.pixels()[phase * per_frame..].to_vec();
    Clip::from_rgb(clip.id().to_owned(), dims, rgb)
}

/// Writes every clip as a PNG sequence under `dir/<id>/` plus `dir/manifest.tsv`.
pub fn write_dataset(dir: &Path, clips: &[SynthClip]) -> Result<Vec<ManifestEntry>> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(clips.len());
    for c in clips {
        video_io::write_image_sequence(&dir.join(&c.id), &c.clip)?;
        entries.push(ManifestEntry {
            path: c.id.clone(),
            label: c.label.clone(),
            split: c.split,
        });
    }
    std::fs::write(
        dir.join("manifest.tsv"),
        video_io::format_manifest(&entries),
    )?;
    Ok(entries)
}
