use crate::{Error, Result};

/// Extent of a volume: width (x), height (y) and number of frames (t).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
}

impl Dims {
    pub const fn new(width: usize, height: usize, frames: usize) -> Self {
        Dims {
            width,
            height,
            frames,
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height * self.frames
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_tuple(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.frames)
    }

    /// Extent along axis 0 (x), 1 (y) or 2 (t).
    pub fn axis(&self, axis: usize) -> usize {
        match axis {
            0 => self.width,
            1 => self.height,
            2 => self.frames,
            _ => panic!("axis {axis} out of range"),
        }
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, t: usize) -> usize {
        assert!(
            x < self.width && y < self.height && t < self.frames,
            "index ({x}, {y}, {t}) outside {self:?}"
        );
        (t * self.height + y) * self.width + x
    }

    pub fn contains(&self, x: usize, y: usize, t: usize) -> bool {
        x < self.width && y < self.height && t < self.frames
    }
}

/// A dense x/y/t grid of `f64` samples.
///
/// Samples are stored frame-major, row-major inside a frame. `origin` places
/// the volume inside a parent clip so that crops can be addressed in clip
/// coordinates through [`ScalarVolume::get_abs`]. Out-of-bounds access panics.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarVolume {
    dims: Dims,
    origin: (usize, usize, usize),
    data: Vec<f64>,
}

impl ScalarVolume {
    pub fn from_vec(dims: Dims, data: Vec<f64>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "volume dimensions must be positive, got {dims:?}"
            )));
        }
        if data.len() != dims.len() {
            return Err(Error::InvalidParameter(format!(
                "volume {dims:?} needs {} samples, got {}",
                dims.len(),
                data.len()
            )));
        }
        Ok(ScalarVolume {
            dims,
            origin: (0, 0, 0),
            data,
        })
    }

    pub fn filled(dims: Dims, value: f64) -> Self {
        assert!(!dims.is_empty(), "volume dimensions must be positive");
        ScalarVolume {
            dims,
            origin: (0, 0, 0),
            data: vec![value; dims.len()],
        }
    }

    pub fn zeros(dims: Dims) -> Self {
        Self::filled(dims, 0.0)
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        assert!(!dims.is_empty(), "volume dimensions must be positive");
        let mut data = Vec::with_capacity(dims.len());
        for t in 0..dims.frames {
            for y in 0..dims.height {
                for x in 0..dims.width {
                    data.push(f(x, y, t));
                }
            }
        }
        ScalarVolume {
            dims,
            origin: (0, 0, 0),
            data,
        }
    }

    pub fn with_origin(mut self, origin: (usize, usize, usize)) -> Self {
        self.origin = origin;
        self
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn origin(&self) -> (usize, usize, usize) {
        self.origin
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, t: usize) -> f64 {
        self.data[self.dims.index(x, y, t)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, t: usize, value: f64) {
        let i = self.dims.index(x, y, t);
        self.data[i] = value;
    }

    /// Sample addressed in parent-clip coordinates.
    #[inline]
    pub fn get_abs(&self, x: usize, y: usize, t: usize) -> f64 {
        let (x0, y0, t0) = self.origin;
        assert!(
            x >= x0 && y >= y0 && t >= t0,
            "clip coordinate ({x}, {y}, {t}) before volume origin {:?}",
            self.origin
        );
        self.get(x - x0, y - y0, t - t0)
    }

    /// Copy of the half-open box `[x0, x1) × [y0, y1) × [t0, t1)` given in
    /// local coordinates; the crop's origin is expressed in clip coordinates.
    pub fn crop(&self, x: (usize, usize), y: (usize, usize), t: (usize, usize)) -> ScalarVolume {
        assert!(
            x.0 < x.1 && y.0 < y.1 && t.0 < t.1,
            "empty crop {x:?} {y:?} {t:?}"
        );
        assert!(
            x.1 <= self.dims.width && y.1 <= self.dims.height && t.1 <= self.dims.frames,
            "crop {x:?} {y:?} {t:?} exceeds {:?}",
            self.dims
        );
        let dims = Dims::new(x.1 - x.0, y.1 - y.0, t.1 - t.0);
        let mut data = Vec::with_capacity(dims.len());
        for tt in t.0..t.1 {
            for yy in y.0..y.1 {
                let start = self.dims.index(x.0, yy, tt);
                data.extend_from_slice(&self.data[start..start + dims.width]);
            }
        }
        ScalarVolume {
            dims,
            origin: (
                self.origin.0 + x.0,
                self.origin.1 + y.0,
                self.origin.2 + t.0,
            ),
            data,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarVolume {
        ScalarVolume {
            dims: self.dims,
            origin: self.origin,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Element-wise combination of two volumes of equal dimensions.
    pub fn zip_map(&self, other: &ScalarVolume, f: impl Fn(f64, f64) -> f64) -> ScalarVolume {
        assert_eq!(
            self.dims, other.dims,
            "zip_map on volumes of different size"
        );
        ScalarVolume {
            dims: self.dims,
            origin: self.origin,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn max_abs_diff(&self, other: &ScalarVolume) -> f64 {
        assert_eq!(self.dims, other.dims);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_dims() {
        assert!(ScalarVolume::from_vec(Dims::new(0, 2, 2), vec![]).is_err());
        assert!(ScalarVolume::from_vec(Dims::new(2, 2, 2), vec![0.0; 7]).is_err());
    }

    #[test]
    #[should_panic(expected = "outside")]
    fn out_of_bounds_panics() {
        let v = ScalarVolume::zeros(Dims::new(2, 2, 2));
        v.get(2, 0, 0);
    }

    #[test]
    fn crop_tracks_origin() {
        let v = ScalarVolume::from_fn(Dims::new(5, 4, 3), |x, y, t| (x + 10 * y + 100 * t) as f64);
        let c = v.crop((1, 4), (2, 4), (1, 3));
        assert_eq!(c.dims(), Dims::new(3, 2, 2));
        assert_eq!(c.origin(), (1, 2, 1));
        assert_eq!(c.get_abs(3, 3, 2), 233.0);
        let cc = c.crop((1, 2), (0, 1), (1, 2));
        assert_eq!(cc.origin(), (2, 2, 2));
        assert_eq!(cc.get(0, 0, 0), 222.0);
    }
}
