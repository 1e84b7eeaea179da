//! Staggered grid layout, grid fields and the shared difference operators.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{CellMask, FaceClass};

/// Where a field lives on the staggered grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Location {
    /// Cell centers `((i+1/2)h1, (j+1/2)h2)`: pressure, density.
    Center,
    /// Vertical faces `(i h1, (j+1/2)h2)`: first velocity component.
    UFace,
    /// Horizontal faces `((i+1/2)h1, j h2)`: second velocity component.
    VFace,
}

/// Unit-square MAC grid with one ghost layer around every field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StaggeredGrid {
    pub nx: usize,
    pub ny: usize,
    pub h1: f64,
    pub h2: f64,
}

impl StaggeredGrid {
    pub const GHOST_LAYERS: usize = 1;

    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidGrid { nx, ny });
        }
        Ok(Self { nx, ny, h1: 1.0 / nx as f64, h2: 1.0 / ny as f64 })
    }

    pub fn dims(&self, loc: Location) -> (usize, usize) {
        match loc {
            Location::Center => (self.nx, self.ny),
            Location::UFace => (self.nx + 1, self.ny),
            Location::VFace => (self.nx, self.ny + 1),
        }
    }

    /// Physical position of slot `(i, j)` of a field at `loc`; ghosts allowed.
    pub fn position(&self, loc: Location, i: isize, j: isize) -> (f64, f64) {
        let (i, j) = (i as f64, j as f64);
        match loc {
            Location::Center => ((i + 0.5) * self.h1, (j + 0.5) * self.h2),
            Location::UFace => (i * self.h1, (j + 0.5) * self.h2),
            Location::VFace => ((i + 0.5) * self.h1, j * self.h2),
        }
    }

    pub fn h_min(&self) -> f64 {
        self.h1.min(self.h2)
    }

    pub fn cell_area(&self) -> f64 {
        self.h1 * self.h2
    }

    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
}

/// Scalar values on one staggering, stored with a ghost frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    loc: Location,
    ni: usize,
    nj: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &StaggeredGrid, loc: Location) -> Self {
        Self::constant(grid, loc, 0.0)
    }

    pub fn constant(grid: &StaggeredGrid, loc: Location, value: f64) -> Self {
        let (ni, nj) = grid.dims(loc);
        Self { loc, ni, nj, data: vec![value; (ni + 2) * (nj + 2)] }
    }

    /// Samples `f(x1, x2)` at every slot, ghosts included.
    pub fn from_fn(grid: &StaggeredGrid, loc: Location, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(grid, loc);
        for j in -1..=out.nj as isize {
            for i in -1..=out.ni as isize {
                let (x1, x2) = grid.position(loc, i, j);
                out.set(i, j, f(x1, x2));
            }
        }
        out
    }

    /// Builds a field from row-major interior values (`j` outer, `i` inner).
    pub fn from_interior(grid: &StaggeredGrid, loc: Location, values: &[f64]) -> Result<Self> {
        let (ni, nj) = grid.dims(loc);
        if values.len() != ni * nj {
            return Err(Error::Shape { loc, found: (values.len(), 1) });
        }
        let mut out = Self::zeros(grid, loc);
        for j in 0..nj {
            for i in 0..ni {
                out[(i, j)] = values[j * ni + i];
            }
        }
        Ok(out)
    }

    pub fn location(&self) -> Location {
        self.loc
    }

    /// Interior extent `(ni, nj)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.ni, self.nj)
    }

    fn offset(&self, i: isize, j: isize) -> usize {
        debug_assert!(i >= -1 && j >= -1 && i <= self.ni as isize && j <= self.nj as isize);
        (j + 1) as usize * (self.ni + 2) + (i + 1) as usize
    }

    pub fn in_interior(&self, i: isize, j: isize) -> bool {
        i >= 0 && j >= 0 && (i as usize) < self.ni && (j as usize) < self.nj
    }

    /// Value at slot `(i, j)`; `-1` and `n` address the ghost frame.
    pub fn get(&self, i: isize, j: isize) -> f64 {
        self.data[self.offset(i, j)]
    }

    pub fn set(&mut self, i: isize, j: isize, value: f64) {
        let k = self.offset(i, j);
        self.data[k] = value;
    }

    /// Row-major interior values.
    pub fn interior(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.ni * self.nj);
        for j in 0..self.nj {
            for i in 0..self.ni {
                out.push(self[(i, j)]);
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for j in 0..self.nj {
            for i in 0..self.ni {
                m = m.max(self[(i, j)].abs());
            }
        }
        m
    }

    pub fn fits(&self, grid: &StaggeredGrid) -> bool {
        grid.dims(self.loc) == (self.ni, self.nj)
    }

    pub(crate) fn expect(&self, grid: &StaggeredGrid, loc: Location) -> Result<()> {
        if self.loc != loc {
            return Err(Error::Staggering { expected: loc, found: self.loc });
        }
        if !self.fits(grid) {
            return Err(Error::Shape { loc, found: (self.ni, self.nj) });
        }
        Ok(())
    }

    /// Interior slots scaled and added: `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Field) {
        debug_assert_eq!((self.loc, self.ni, self.nj), (other.loc, other.ni, other.nj));
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field { loc: self.loc, ni: self.ni, nj: self.nj, data: self.data.iter().map(|&x| f(x)).collect() }
    }
}

impl core::ops::Index<(usize, usize)> for Field {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[(j + 1) * (self.ni + 2) + i + 1]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Field {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[(j + 1) * (self.ni + 2) + i + 1]
    }
}

/// Boundary treatment of the tangential component.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BcKind {
    /// Ghost = −inner, so the wall-interpolated tangential value is zero.
    NoSlip,
    /// Ghost = inner.
    ImpermeabilitySlip,
}

/// Cell divergence `(u_{i+1} − u_i)/h1 + (v_{j+1} − v_j)/h2`.
pub fn divergence(u: &Field, v: &Field, grid: &StaggeredGrid) -> Result<Field> {
    u.expect(grid, Location::UFace)?;
    v.expect(grid, Location::VFace)?;
    let mut out = Field::zeros(grid, Location::Center);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            out[(i, j)] = (u[(i + 1, j)] - u[(i, j)]) / grid.h1 + (v[(i, j + 1)] - v[(i, j)]) / grid.h2;
        }
    }
    Ok(out)
}

/// Face gradient of a center field; boundary faces are left at zero.
pub fn gradient(p: &Field, grid: &StaggeredGrid) -> Result<(Field, Field)> {
    p.expect(grid, Location::Center)?;
    let mut gu = Field::zeros(grid, Location::UFace);
    let mut gv = Field::zeros(grid, Location::VFace);
    for j in 0..grid.ny {
        for i in 1..grid.nx {
            gu[(i, j)] = (p[(i, j)] - p[(i - 1, j)]) / grid.h1;
        }
    }
    for j in 1..grid.ny {
        for i in 0..grid.nx {
            gv[(i, j)] = (p[(i, j)] - p[(i, j - 1)]) / grid.h2;
        }
    }
    Ok((gu, gv))
}

/// Five-point Laplacian at the faces of class `phase` (fluid or solid), zero
/// elsewhere. Ghost and boundary values must already be in place.
pub fn masked_vector_laplacian(f: &Field, mask: &CellMask, grid: &StaggeredGrid, phase: FaceClass) -> Result<Field> {
    let loc = f.location();
    if loc == Location::Center {
        return Err(Error::Staggering { expected: Location::UFace, found: loc });
    }
    f.expect(grid, loc)?;
    let (ni, nj) = f.dims();
    let mut out = Field::zeros(grid, loc);
    let (c1, c2) = (1.0 / (grid.h1 * grid.h1), 1.0 / (grid.h2 * grid.h2));
    for j in 0..nj as isize {
        for i in 0..ni as isize {
            if mask.face_class(loc, i as usize, j as usize) != phase {
                continue;
            }
            let x = f.get(i, j);
            let lap = (f.get(i - 1, j) - 2.0 * x + f.get(i + 1, j)) * c1 + (f.get(i, j - 1) - 2.0 * x + f.get(i, j + 1)) * c2;
            out.set(i, j, lap);
        }
    }
    Ok(out)
}

/// Imposes the wall conditions on a velocity component.
///
/// Normal values on outer and interface faces become zero. Tangential slots
/// next to a fluid face that fall outside the domain or inside the solid are
/// set by reflection (`NoSlip`) or copy (`ImpermeabilitySlip`).
pub fn apply_bc(f: &Field, mask: &CellMask, grid: &StaggeredGrid, kind: BcKind) -> Result<Field> {
    let loc = f.location();
    if loc == Location::Center {
        return Err(Error::Staggering { expected: Location::UFace, found: loc });
    }
    f.expect(grid, loc)?;
    let mut out = f.clone();
    let (ni, nj) = f.dims();
    for j in 0..nj {
        for i in 0..ni {
            if matches!(mask.face_class(loc, i, j), FaceClass::Outer | FaceClass::Interface) {
                out[(i, j)] = 0.0;
            }
        }
    }
    let sign = match kind {
        BcKind::NoSlip => -1.0,
        BcKind::ImpermeabilitySlip => 1.0,
    };
    // Tangential neighbours: along x2 for u, along x1 for v.
    let tangential: [(isize, isize); 2] = match loc {
        Location::UFace => [(0, -1), (0, 1)],
        _ => [(-1, 0), (1, 0)],
    };
    for j in 0..nj as isize {
        for i in 0..ni as isize {
            if mask.face_class(loc, i as usize, j as usize) != FaceClass::Fluid {
                continue;
            }
            let x = out.get(i, j);
            for (di, dj) in tangential {
                let (a, b) = (i + di, j + dj);
                let ghost = !out.in_interior(a, b) || mask.face_class(loc, a as usize, b as usize) == FaceClass::Solid;
                if ghost {
                    out.set(a, b, sign * x);
                }
            }
        }
    }
    Ok(out)
}

/// Pairwise summation in a fixed order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        n if n <= 8 => values.iter().fold(0.0, |a, &b| a + b),
        n => {
            let (l, r) = values.split_at(n / 2);
            pairwise_sum(l) + pairwise_sum(r)
        }
    }
}
