//! Local least-squares (Lucas–Kanade) optical flow over small windows.

use crate::scalespace::gradient;
use crate::{Dims, Error, Result, ScalarVolume};

/// Half width of the square flow window (5×5).
pub const FLOW_WINDOW_RADIUS: usize = 2;
/// Normal matrices with a smaller eigenvalue than this are treated as singular.
pub const MIN_EIGENVALUE: f64 = 1e-9;
/// Normal matrices with a larger condition number are treated as singular.
pub const MAX_CONDITION: f64 = 1e6;

/// Horizontal and vertical flow, px/frame, sharing the source volume's grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub u: ScalarVolume,
    pub v: ScalarVolume,
}

impl FlowField {
    pub fn dims(&self) -> Dims {
        self.u.dims()
    }
}

/// Solves `[a b; b c]·(u, v) = −(p, q)`, or returns zero flow when the
/// matrix is too close to singular.
fn solve_2x2(a: f64, b: f64, c: f64, p: f64, q: f64) -> (f64, f64) {
    let half_trace = 0.5 * (a + c);
    let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let (lmax, lmin) = (half_trace + disc, half_trace - disc);
    if !(lmin >= MIN_EIGENVALUE) || lmax / lmin > MAX_CONDITION {
        return (0.0, 0.0);
    }
    let det = a * c - b * b;
    ((-c * p + b * q) / det, (b * p - a * q) / det)
}

/// Flow at every voxel from spatiotemporal central differences summed over a
/// 5×5 spatial window of the same frame (clipped at the volume border).
pub fn optical_flow(vol: &ScalarVolume) -> Result<FlowField> {
    let dims = vol.dims();
    let w = 2 * FLOW_WINDOW_RADIUS + 1;
    if dims.width < w || dims.height < w || dims.frames < 3 {
        return Err(Error::VolumeTooSmall {
            dims: dims.as_tuple(),
            message: format!("optical flow needs at least {w}x{w}x3"),
        });
    }
    let g = gradient(vol)?;
    let r = FLOW_WINDOW_RADIUS;
    let mut u = ScalarVolume::zeros(dims).with_origin(vol.origin());
    let mut v = ScalarVolume::zeros(dims).with_origin(vol.origin());
    for t in 0..dims.frames {
        for y in 0..dims.height {
            for x in 0..dims.width {
                let (mut a, mut b, mut c, mut p, mut q) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for yy in y.saturating_sub(r)..=(y + r).min(dims.height - 1) {
                    for xx in x.saturating_sub(r)..=(x + r).min(dims.width - 1) {
                        let (gx, gy, gt) = (
                            g.lx.get(xx, yy, t),
                            g.ly.get(xx, yy, t),
                            g.lt.get(xx, yy, t),
                        );
                        a += gx * gx;
                        b += gx * gy;
                        c += gy * gy;
                        p += gx * gt;
                        q += gy * gt;
                    }
                }
                let (fu, fv) = solve_2x2(a, b, c, p, q);
                u.set(x, y, t, fu);
                v.set(x, y, t, fv);
            }
        }
    }
    Ok(FlowField { u, v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{translating_blob_clip, SynthSpec};
    use crate::video_io::to_grayscale;

    #[test]
    fn static_and_textureless_volumes_have_zero_flow() {
        let blob =
            to_grayscale(&translating_blob_clip(&SynthSpec::translating_blob((0.0, 0.0))).unwrap());
        let f = optical_flow(&blob).unwrap();
        assert!(f.u.data().iter().chain(f.v.data()).all(|&x| x == 0.0));

        let flat = ScalarVolume::filled(Dims::new(9, 9, 5), 0.4);
        let f = optical_flow(&flat).unwrap();
        assert!(f.u.data().iter().chain(f.v.data()).all(|&x| x == 0.0));
    }

    #[test]
    fn translating_blob_recovers_velocity() {
        for (vx, vy) in [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0)] {
            let clip = translating_blob_clip(&SynthSpec::translating_blob((vx, vy))).unwrap();
            let f = optical_flow(&to_grayscale(&clip)).unwrap();
            let mut checked = 0;
            for t in 2..7 {
                let cx = 12.0 + vx * t as f64;
                let cy = 16.0 + vy * t as f64;
                for y in 0..32 {
                    for x in 0..32 {
                        let d = (x as f64 - cx).hypot(y as f64 - cy);
                        if d <= 4.0 && (2..30).contains(&x) && (2..30).contains(&y) {
                            assert!((f.u.get(x, y, t) - vx).abs() < 0.15, "u at ({x},{y},{t})");
                            assert!((f.v.get(x, y, t) - vy).abs() < 0.15, "v at ({x},{y},{t})");
                            checked += 1;
                        }
                    }
                }
            }
            assert!(checked > 100);
        }
    }

    #[test]
    fn rejects_small_patch() {
        let r = optical_flow(&ScalarVolume::zeros(Dims::new(4, 9, 5)));
        assert!(matches!(r, Err(Error::VolumeTooSmall { .. })));
        let r = optical_flow(&ScalarVolume::zeros(Dims::new(9, 9, 2)));
        assert!(matches!(r, Err(Error::VolumeTooSmall { .. })));
    }
}
