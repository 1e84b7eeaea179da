//! Periodic pore-space masks and face classification.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{Location, StaggeredGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum GeometryKind {
    /// Vertical pore strips `[εk, εk + εm)`, one per period.
    Capillaries,
    /// A centered solid square in every `ε × ε` period cell.
    DisjointSquares,
    AllFluid,
}

/// Meaning of the porosity `m` for the squares geometry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SquaresConvention {
    /// `m` is the fluid fraction, solid side `√(1−m)`.
    #[default]
    FluidFraction,
    /// `m` is the solid fraction, solid side `√m` (literal `2β = 1 − √m`).
    SolidFraction,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FaceClass {
    Fluid,
    Solid,
    /// Between a fluid and a solid cell.
    Interface,
    /// On the boundary of the unit square.
    Outer,
}

/// Pore indicator per cell plus the face classification derived from it.
#[derive(Clone, Debug, PartialEq)]
pub struct CellMask {
    pub nx: usize,
    pub ny: usize,
    chi: Vec<bool>,
    u_class: Vec<FaceClass>,
    v_class: Vec<FaceClass>,
}

impl CellMask {
    /// Mask from row-major cell flags (`true` = fluid), faces classified.
    pub fn from_chi(nx: usize, ny: usize, chi: Vec<bool>) -> Result<Self> {
        if nx == 0 || ny == 0 || chi.len() != nx * ny {
            return Err(Error::InvalidGrid { nx, ny });
        }
        Ok(classify_faces(Self { nx, ny, chi, u_class: Vec::new(), v_class: Vec::new() }))
    }

    pub fn all_fluid(nx: usize, ny: usize) -> Self {
        Self::from_chi(nx, ny, vec![true; nx * ny]).expect("non-empty grid")
    }

    pub fn all_solid(nx: usize, ny: usize) -> Self {
        Self::from_chi(nx, ny, vec![false; nx * ny]).expect("non-empty grid")
    }

    pub fn is_fluid(&self, i: usize, j: usize) -> bool {
        self.chi[j * self.nx + i]
    }

    /// Fluid flag for possibly out-of-range indices (outside counts as neither).
    pub fn cell(&self, i: isize, j: isize) -> Option<bool> {
        if i < 0 || j < 0 || i as usize >= self.nx || j as usize >= self.ny {
            None
        } else {
            Some(self.is_fluid(i as usize, j as usize))
        }
    }

    pub fn chi(&self) -> &[bool] {
        &self.chi
    }

    pub fn face_class(&self, loc: Location, i: usize, j: usize) -> FaceClass {
        match loc {
            Location::UFace => self.u_class[j * (self.nx + 1) + i],
            Location::VFace => self.v_class[j * self.nx + i],
            Location::Center => panic!("cells have no face class"),
        }
    }

    pub fn fluid_fraction(&self) -> f64 {
        self.chi.iter().filter(|&&c| c).count() as f64 / self.chi.len() as f64
    }

    pub fn count_faces(&self, class: FaceClass) -> usize {
        self.u_class.iter().chain(&self.v_class).filter(|&&c| c == class).count()
    }

    /// Outer faces touching a fluid cell; together with the interface faces
    /// these bound the pore space.
    pub fn fluid_wall_faces(&self) -> usize {
        let mut n = 0;
        for j in 0..self.ny {
            n += self.is_fluid(0, j) as usize + self.is_fluid(self.nx - 1, j) as usize;
        }
        for i in 0..self.nx {
            n += self.is_fluid(i, 0) as usize + self.is_fluid(i, self.ny - 1) as usize;
        }
        n
    }

    /// 4-connected components of the solid cells: per-cell label and count.
    pub fn solid_blocks(&self) -> (Vec<Option<usize>>, usize) {
        let mut label = vec![None; self.nx * self.ny];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.chi.len() {
            if self.chi[start] || label[start].is_some() {
                continue;
            }
            label[start] = Some(count);
            stack.push(start);
            while let Some(c) = stack.pop() {
                let (i, j) = ((c % self.nx) as isize, (c / self.nx) as isize);
                for (a, b) in [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)] {
                    if self.cell(a, b) == Some(false) {
                        let k = b as usize * self.nx + a as usize;
                        if label[k].is_none() {
                            label[k] = Some(count);
                            stack.push(k);
                        }
                    }
                }
            }
            count += 1;
        }
        (label, count)
    }
}

/// Fills the face classes of `mask` from its cell flags.
pub fn classify_faces(mut mask: CellMask) -> CellMask {
    let (nx, ny) = (mask.nx, mask.ny);
    let pair = |a: bool, b: bool| match (a, b) {
        (true, true) => FaceClass::Fluid,
        (false, false) => FaceClass::Solid,
        _ => FaceClass::Interface,
    };
    let mut u = Vec::with_capacity((nx + 1) * ny);
    for j in 0..ny {
        for i in 0..=nx {
            u.push(if i == 0 || i == nx { FaceClass::Outer } else { pair(mask.is_fluid(i - 1, j), mask.is_fluid(i, j)) });
        }
    }
    let mut v = Vec::with_capacity(nx * (ny + 1));
    for j in 0..=ny {
        for i in 0..nx {
            v.push(if j == 0 || j == ny { FaceClass::Outer } else { pair(mask.is_fluid(i, j - 1), mask.is_fluid(i, j)) });
        }
    }
    mask.u_class = u;
    mask.v_class = v;
    mask
}

fn cells_per_period(cells: usize, n: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::InvalidParameter { name: "n", reason: "at least one period".into() });
    }
    if cells % n != 0 {
        return Err(Error::GridNotAligned { cells, n });
    }
    let p = cells / n;
    if p < 4 {
        return Err(Error::ResolutionTooCoarse { cells: p });
    }
    Ok(p)
}

/// Builds the pore mask with cell-center membership.
pub fn build_mask(kind: GeometryKind, n: usize, m: f64, convention: SquaresConvention, grid: &StaggeredGrid) -> Result<CellMask> {
    let (nx, ny) = (grid.nx, grid.ny);
    if kind == GeometryKind::AllFluid {
        return Ok(CellMask::all_fluid(nx, ny));
    }
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::InvalidParameter { name: "porosity", reason: alloc::format!("{m} is outside (0, 1)") });
    }
    let px = cells_per_period(nx, n)?;
    // Local center coordinate inside the period, in period units.
    let local = |q: usize, p: usize| (q as f64 + 0.5) / p as f64;
    let chi: Vec<bool> = match kind {
        GeometryKind::Capillaries => {
            let fluid_cells = (0..px).filter(|&q| local(q, px) < m).count();
            if fluid_cells == 0 {
                return Err(Error::StripTooThin { cells: fluid_cells });
            }
            (0..nx * ny).map(|c| local((c % nx) % px, px) < m).collect()
        }
        GeometryKind::DisjointSquares => {
            let py = cells_per_period(ny, n)?;
            let side = match convention {
                SquaresConvention::FluidFraction => libm::sqrt(1.0 - m),
                SquaresConvention::SolidFraction => libm::sqrt(m),
            };
            let inside = |q: usize, p: usize| (local(q, p) - 0.5).abs() < 0.5 * side;
            for p in [px, py] {
                let solid = (0..p).filter(|&q| inside(q, p)).count();
                if solid == 0 || solid == p {
                    return Err(Error::StripTooThin { cells: solid.min(p - solid) });
                }
            }
            (0..nx * ny).map(|c| !(inside((c % nx) % px, px) && inside((c / nx) % py, py))).collect()
        }
        GeometryKind::AllFluid => unreachable!(),
    };
    CellMask::from_chi(nx, ny, chi)
}
