//! Uniform phase-space grid: periodic in `x`, truncated in `v`.

use crate::error::{Error, Result};

/// Index pair `(i, j)` of a phase-space cell: `i` along `x`, `j` along `v`.
///
/// `i` is allowed to run outside `0..nx` while clipping upstream cells that
/// straddle the periodic seam; [`PhaseMesh::wrap_index`] folds it back.
pub type CellIndex = (i64, i64);

/// Result of locating a point in the mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Inside(usize, usize),
    /// `|v| > v_max`; the distribution vanishes there.
    OutsideV,
}

/// Cartesian partition of `[0, lx] x [-v_max, v_max]` into `nx * nv` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMesh {
    lx: f64,
    v_max: f64,
    nx: usize,
    nv: usize,
    dx: f64,
    dv: f64,
}

impl PhaseMesh {
    pub fn new(lx: f64, v_max: f64, nx: usize, nv: usize) -> Result<Self> {
        if !(lx > 0.0 && lx.is_finite()) || !(v_max > 0.0 && v_max.is_finite()) {
            return Err(Error::InvalidMesh(format!(
                "domain extents must be positive and finite (lx={lx}, v_max={v_max})"
            )));
        }
        if nx == 0 || nv == 0 {
            return Err(Error::InvalidMesh(format!(
                "cell counts must be positive (nx={nx}, nv={nv})"
            )));
        }
        Ok(Self {
            lx,
            v_max,
            nx,
            nv,
            dx: lx / nx as f64,
            dv: 2.0 * v_max / nv as f64,
        })
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nv(&self) -> usize {
        self.nv
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dv(&self) -> f64 {
        self.dv
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.nv
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dv
    }

    /// Flat storage index of cell `(i, j)`, row-major in `v`.
    #[inline]
    pub fn flat(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Position of the vertical grid line with (unbounded) index `i`.
    #[inline]
    pub fn x_face(&self, i: i64) -> f64 {
        i as f64 * self.dx
    }

    /// Position of the horizontal grid line with (unbounded) index `j`.
    #[inline]
    pub fn v_face(&self, j: i64) -> f64 {
        -self.v_max + j as f64 * self.dv
    }

    pub fn x_center(&self, i: i64) -> f64 {
        (i as f64 + 0.5) * self.dx
    }

    pub fn v_center(&self, j: i64) -> f64 {
        -self.v_max + (j as f64 + 0.5) * self.dv
    }

    /// Folds `x` into `[0, lx)`.
    pub fn wrap_x(&self, x: f64) -> f64 {
        let r = x.rem_euclid(self.lx);
        // rem_euclid can round up to lx for tiny negative inputs
        if r >= self.lx {
            0.0
        } else {
            r
        }
    }

    /// Folds an unbounded column index into `0..nx`.
    #[inline]
    pub fn wrap_index(&self, i: i64) -> usize {
        i.rem_euclid(self.nx as i64) as usize
    }

    /// Unbounded column index `i` with `x_face(i) <= x < x_face(i + 1)`.
    ///
    /// The comparison is made against the same face positions used by the
    /// clipper, so a point exactly on a face always lands in the higher cell.
    pub fn column_of(&self, x: f64) -> i64 {
        let mut i = (x / self.dx).floor() as i64;
        if x < self.x_face(i) {
            i -= 1;
        } else if x >= self.x_face(i + 1) {
            i += 1;
        }
        i
    }

    /// Unbounded row index `j` with `v_face(j) <= v < v_face(j + 1)`.
    pub fn row_of(&self, v: f64) -> i64 {
        let mut j = ((v + self.v_max) / self.dv).floor() as i64;
        if v < self.v_face(j) {
            j -= 1;
        } else if v >= self.v_face(j + 1) {
            j += 1;
        }
        j
    }

    /// Cell owning `(x, v)` after periodic wrapping of `x`.
    ///
    /// Points on interior faces belong to the higher-index cell. The upper
    /// velocity boundary `v = v_max` is closed and belongs to the last row.
    pub fn locate_cell(&self, x: f64, v: f64) -> Location {
        if !(v >= -self.v_max && v <= self.v_max) {
            return Location::OutsideV;
        }
        let i = self.wrap_index(self.column_of(x));
        let j = self.row_of(v).clamp(0, self.nv as i64 - 1) as usize;
        Location::Inside(i, j)
    }

    /// Maps `(x, v)` into the reference square `[-1, 1]^2` of cell `(i, j)`
    /// where `i` may be unbounded.
    #[inline]
    pub fn to_reference(&self, cell: CellIndex, x: f64, v: f64) -> (f64, f64) {
        (
            (x - self.x_center(cell.0)) * 2.0 / self.dx,
            (v - self.v_center(cell.1)) * 2.0 / self.dv,
        )
    }

    pub fn contains_row(&self, j: i64) -> bool {
        j >= 0 && j < self.nv as i64
    }
}
