use crate::detector::InterestPoint;
use crate::{Dims, Error, Result};

/// Cells per patch along x, y and t.
pub const CELL_GRID: (usize, usize, usize) = (3, 3, 2);

/// Total number of cells in a patch.
pub const N_CELLS: usize = CELL_GRID.0 * CELL_GRID.1 * CELL_GRID.2;

/// Half extent of a patch in units of the detection scale's standard deviation.
pub const DEFAULT_EXTENT_FACTOR: f64 = 4.5;

/// The neighbourhood of an interest point and its split into cells.
///
/// Bounds are inclusive and in clip coordinates. Cells are enumerated with
/// x varying fastest, then y, then t.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchGeometry {
    pub center: (usize, usize, usize),
    pub half_extent: (usize, usize, usize),
    pub lo: (usize, usize, usize),
    pub hi: (usize, usize, usize),
    cells_x: Vec<usize>,
    cells_y: Vec<usize>,
    cells_t: Vec<usize>,
}

/// Start offsets of `n` near-equal integer cells over `[lo, hi]`, plus the
/// one-past-end sentinel.
fn split(lo: usize, hi: usize, n: usize, axis: char) -> Result<Vec<usize>> {
    let len = hi - lo + 1;
    if len < n {
        return Err(Error::EmptyCell { axis });
    }
    Ok((0..=n).map(|i| lo + i * len / n).collect())
}

impl PatchGeometry {
    pub fn new(
        center: (usize, usize, usize),
        half_extent: (usize, usize, usize),
        dims: Dims,
    ) -> Result<Self> {
        let (x, y, t) = center;
        if !dims.contains(x, y, t) {
            return Err(Error::PointOutsideClip { x, y, t });
        }
        let lo = (
            x.saturating_sub(half_extent.0),
            y.saturating_sub(half_extent.1),
            t.saturating_sub(half_extent.2),
        );
        let hi = (
            (x + half_extent.0).min(dims.width - 1),
            (y + half_extent.1).min(dims.height - 1),
            (t + half_extent.2).min(dims.frames - 1),
        );
        Ok(PatchGeometry {
            center,
            half_extent,
            lo,
            hi,
            cells_x: split(lo.0, hi.0, CELL_GRID.0, 'x')?,
            cells_y: split(lo.1, hi.1, CELL_GRID.1, 'y')?,
            cells_t: split(lo.2, hi.2, CELL_GRID.2, 't')?,
        })
    }

    pub fn extent(&self) -> (usize, usize, usize) {
        (
            self.hi.0 - self.lo.0 + 1,
            self.hi.1 - self.lo.1 + 1,
            self.hi.2 - self.lo.2 + 1,
        )
    }

    /// Cell containing a clip coordinate inside the patch.
    pub fn cell_of(&self, x: usize, y: usize, t: usize) -> usize {
        let find = |bounds: &[usize], v: usize| {
            debug_assert!(v >= bounds[0] && v < *bounds.last().unwrap());
            bounds[1..]
                .iter()
                .position(|&b| v < b)
                .expect("inside patch")
        };
        let cx = find(&self.cells_x, x);
        let cy = find(&self.cells_y, y);
        let ct = find(&self.cells_t, t);
        (ct * CELL_GRID.1 + cy) * CELL_GRID.0 + cx
    }

    /// Every voxel of the patch in t, y, x order.
    pub fn voxels(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (self.lo.2..=self.hi.2).flat_map(move |t| {
            (self.lo.1..=self.hi.1)
                .flat_map(move |y| (self.lo.0..=self.hi.0).map(move |x| (x, y, t)))
        })
    }
}

/// Half extents ⌈f·σ⌉, ⌈f·σ⌉, ⌈f·τ⌉ for extent factor `f`.
pub fn half_extent(sigma2: f64, tau2: f64, extent_factor: f64) -> (usize, usize, usize) {
    let s = (extent_factor * sigma2.sqrt()).ceil() as usize;
    (s, s, (extent_factor * tau2.sqrt()).ceil() as usize)
}

/// Patch of the default 9σ × 9σ × 9τ size around a point.
pub fn patch_bounds(p: &InterestPoint, dims: Dims) -> Result<PatchGeometry> {
    patch_bounds_with(p, dims, DEFAULT_EXTENT_FACTOR)
}

pub fn patch_bounds_with(
    p: &InterestPoint,
    dims: Dims,
    extent_factor: f64,
) -> Result<PatchGeometry> {
    PatchGeometry::new(
        (p.x, p.y, p.t),
        half_extent(p.sigma2, p.tau2, extent_factor),
        dims,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(x: usize, y: usize, t: usize, sigma2: f64, tau2: f64) -> InterestPoint {
        InterestPoint {
            x,
            y,
            t,
            sigma2,
            tau2,
            response: 1.0,
        }
    }

    #[test]
    fn centred_patch_extents() {
        let g = patch_bounds(
            &point(50, 50, 30, 4.0, 1.41 * 1.41),
            Dims::new(100, 100, 60),
        )
        .unwrap();
        assert_eq!(g.half_extent, (9, 9, 7));
        assert_eq!(g.lo, (41, 41, 23));
        assert_eq!(g.hi, (59, 59, 37));
        assert_eq!(g.extent(), (19, 19, 15));
    }

    #[test]
    fn corner_patch_is_clipped() {
        let g = patch_bounds(&point(0, 0, 0, 4.0, 2.0), Dims::new(40, 40, 20)).unwrap();
        assert_eq!(g.lo, (0, 0, 0));
        assert_eq!(g.hi, (9, 9, 7));
        assert_eq!(g.cell_of(0, 0, 0), 0);
        assert_eq!(g.cell_of(9, 9, 7), N_CELLS - 1);
    }

    #[test]
    fn tiny_clip_has_empty_cell() {
        let r = patch_bounds(&point(0, 0, 0, 4.0, 2.0), Dims::new(2, 40, 20));
        assert!(matches!(r, Err(Error::EmptyCell { axis: 'x' })));
        let r = patch_bounds(&point(0, 0, 0, 4.0, 2.0), Dims::new(20, 20, 1));
        assert!(matches!(r, Err(Error::EmptyCell { axis: 't' })));
    }

    #[test]
    fn point_outside_clip() {
        let r = patch_bounds(&point(40, 0, 0, 4.0, 2.0), Dims::new(40, 40, 20));
        assert!(matches!(r, Err(Error::PointOutsideClip { .. })));
    }

    #[test]
    fn cells_partition_the_patch() {
        let g = PatchGeometry::new((10, 10, 5), (4, 5, 3), Dims::new(30, 30, 20)).unwrap();
        let mut counts = [0usize; N_CELLS];
        for (x, y, t) in g.voxels() {
            counts[g.cell_of(x, y, t)] += 1;
        }
        assert_eq!(counts.iter().sum::<usize>(), 9 * 11 * 7);
        assert!(counts.iter().all(|&c| c > 0));
        // 9 px split 3/3/3, 11 px split 3/4/4, 7 frames split 3/4
        assert_eq!(counts[0], 3 * 3 * 3);
        assert_eq!(counts[N_CELLS - 1], 3 * 4 * 4);
    }
}
