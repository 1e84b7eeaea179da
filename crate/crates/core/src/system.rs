//! Assembly of the masked, variable-coefficient viscous operator acting on one
//! velocity component. Each solver supplies rules that say which faces are
//! unknowns and how a stencil link to a neighbouring slot is closed.

use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{CellMask, FaceClass};
use crate::grid::{Field, Location, StaggeredGrid};
use crate::linalg::SparseRows;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Dir {
    W,
    E,
    N,
    S,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::W, Dir::E, Dir::N, Dir::S];

    pub fn step(self) -> (isize, isize) {
        match self {
            Dir::W => (-1, 0),
            Dir::E => (1, 0),
            Dir::N => (0, -1),
            Dir::S => (0, 1),
        }
    }

    /// Whether the link runs along the component's own axis.
    pub fn is_normal(self, loc: Location) -> bool {
        match loc {
            Location::UFace => matches!(self, Dir::W | Dir::E),
            _ => matches!(self, Dir::N | Dir::S),
        }
    }
}

/// Closure of one stencil link.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Link {
    Unknown,
    /// Neighbour value is known data.
    Known(f64),
    /// Ghost reflected about the wall value `g`: ghost = 2g − self.
    Reflect(f64),
    /// No contribution.
    Closed,
    /// Traction ghost supplied by the caller through the right-hand side.
    Neumann,
}

/// Row type of an unknown face.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum RowKind {
    Stencil,
    /// One-sided normal-stress row: single link to `inner` through the
    /// adjacent cell with coefficient `eta`.
    OneSided { inner: (isize, isize), dir: Dir, eta: f64 },
}

pub(crate) trait Rules {
    fn is_unknown(&self, loc: Location, i: usize, j: usize) -> bool;
    fn link(&self, loc: Location, i: usize, j: usize, dir: Dir, nb: (isize, isize), in_range: bool) -> Link;
    /// Coefficient of a participating cell, `None` if the cell does not take
    /// part in this operator.
    fn eta(&self, i: usize, j: usize) -> Option<f64>;
    fn row_kind(&self, _loc: Location, _i: usize, _j: usize) -> RowKind {
        RowKind::Stencil
    }
}

/// Operator `−∇·(η∇·)` restricted to the unknown faces of one component.
#[derive(Clone, Debug)]
pub(crate) struct FaceSystem {
    pub loc: Location,
    pub ni: usize,
    pub index: Vec<Option<usize>>,
    pub faces: Vec<(usize, usize)>,
    pub matrix: SparseRows,
    /// Contribution of known and reflected boundary data.
    pub rhs_bc: Vec<f64>,
    /// `(row, dir, coefficient)` of every traction link.
    pub neumann: Vec<(usize, Dir, f64)>,
}

impl FaceSystem {
    pub fn len(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn id(&self, i: usize, j: usize) -> Option<usize> {
        self.index[j * self.ni + i]
    }

    /// Values of the unknowns read from a field.
    pub fn gather(&self, f: &Field) -> Vec<f64> {
        self.faces.iter().map(|&(i, j)| f[(i, j)]).collect()
    }

    /// Writes unknown values into a field.
    pub fn scatter(&self, x: &[f64], f: &mut Field) {
        for (&(i, j), &v) in self.faces.iter().zip(x) {
            f[(i, j)] = v;
        }
    }
}

/// Coefficient of the link leaving face `(i, j)` in direction `dir`.
pub(crate) fn link_coefficient(grid: &StaggeredGrid, loc: Location, i: usize, j: usize, dir: Dir, rules: &impl Rules) -> f64 {
    let (i, j) = (i as isize, j as isize);
    let (h2x, h2y) = (grid.h1 * grid.h1, grid.h2 * grid.h2);
    let cell = |a: isize, b: isize| -> Option<f64> {
        if a < 0 || b < 0 || a as usize >= grid.nx || b as usize >= grid.ny {
            None
        } else {
            rules.eta(a as usize, b as usize)
        }
    };
    // Node (a, b) sits at (a h1, b h2); average over its participating cells.
    let node = |a: isize, b: isize| -> f64 {
        let mut s = 0.0;
        let mut n = 0;
        for (c, d) in [(a - 1, b - 1), (a, b - 1), (a - 1, b), (a, b)] {
            if let Some(e) = cell(c, d) {
                s += e;
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            s / n as f64
        }
    };
    match (loc, dir) {
        (Location::UFace, Dir::W) => cell(i - 1, j).unwrap_or(0.0) / h2x,
        (Location::UFace, Dir::E) => cell(i, j).unwrap_or(0.0) / h2x,
        (Location::UFace, Dir::N) => node(i, j) / h2y,
        (Location::UFace, Dir::S) => node(i, j + 1) / h2y,
        (Location::VFace, Dir::N) => cell(i, j - 1).unwrap_or(0.0) / h2y,
        (Location::VFace, Dir::S) => cell(i, j).unwrap_or(0.0) / h2y,
        (Location::VFace, Dir::W) => node(i, j) / h2x,
        (Location::VFace, Dir::E) => node(i + 1, j) / h2x,
        (Location::Center, _) => unreachable!(),
    }
}

pub(crate) fn assemble(grid: &StaggeredGrid, loc: Location, rules: &impl Rules) -> FaceSystem {
    let (ni, nj) = grid.dims(loc);
    let mut index = vec![None; ni * nj];
    let mut faces = Vec::new();
    for j in 0..nj {
        for i in 0..ni {
            if rules.is_unknown(loc, i, j) {
                index[j * ni + i] = Some(faces.len());
                faces.push((i, j));
            }
        }
    }
    let mut matrix = SparseRows::new();
    let mut rhs_bc = vec![0.0; faces.len()];
    let mut neumann = Vec::new();
    let mut offs = Vec::with_capacity(4);
    let id_of = |a: isize, b: isize| -> Option<usize> {
        if a < 0 || b < 0 || a as usize >= ni || b as usize >= nj {
            None
        } else {
            index[b as usize * ni + a as usize]
        }
    };
    for (row, &(i, j)) in faces.iter().enumerate() {
        offs.clear();
        let mut diag = 0.0;
        let mut close = |c: f64, link: Link, nb: (isize, isize), dir: Dir, diag: &mut f64, offs: &mut Vec<(usize, f64)>| match link {
            Link::Unknown => {
                let col = id_of(nb.0, nb.1).expect("unknown neighbour must be an unknown face");
                *diag += c;
                offs.push((col, -c));
            }
            Link::Known(g) => {
                *diag += c;
                rhs_bc[row] += c * g;
            }
            Link::Reflect(g) => {
                *diag += 2.0 * c;
                rhs_bc[row] += 2.0 * c * g;
            }
            Link::Closed => {}
            Link::Neumann => neumann.push((row, dir, c)),
        };
        match rules.row_kind(loc, i, j) {
            RowKind::Stencil => {
                for dir in Dir::ALL {
                    let (di, dj) = dir.step();
                    let nb = (i as isize + di, j as isize + dj);
                    let in_range = nb.0 >= 0 && nb.1 >= 0 && (nb.0 as usize) < ni && (nb.1 as usize) < nj;
                    let link = rules.link(loc, i, j, dir, nb, in_range);
                    let c = link_coefficient(grid, loc, i, j, dir, rules);
                    close(c, link, nb, dir, &mut diag, &mut offs);
                }
            }
            RowKind::OneSided { inner, dir, eta } => {
                let h = if loc == Location::UFace { grid.h1 } else { grid.h2 };
                let c = eta / (h * h);
                let link = rules.link(loc, i, j, dir, inner, true);
                close(c, link, inner, dir, &mut diag, &mut offs);
            }
        }
        matrix.push_row(diag, &offs);
    }
    FaceSystem { loc, ni, index, faces, matrix, rhs_bc, neumann }
}

/// Applies the assembled stencil `Σ c (x_nb − x)` to a full field, treating
/// every link as interior (used for explicit source terms).
pub(crate) fn apply_links(grid: &StaggeredGrid, loc: Location, rules: &impl Rules, f: &Field) -> Field {
    let (ni, nj) = grid.dims(loc);
    let mut out = Field::zeros(grid, loc);
    for j in 0..nj {
        for i in 0..ni {
            if !rules.is_unknown(loc, i, j) {
                continue;
            }
            let x = f[(i, j)];
            let mut s = 0.0;
            for dir in Dir::ALL {
                let (di, dj) = dir.step();
                let nb = (i as isize + di, j as isize + dj);
                let in_range = nb.0 >= 0 && nb.1 >= 0 && (nb.0 as usize) < ni && (nb.1 as usize) < nj;
                let c = link_coefficient(grid, loc, i, j, dir, rules);
                s += match rules.link(loc, i, j, dir, nb, in_range) {
                    Link::Unknown => c * (f.get(nb.0, nb.1) - x),
                    Link::Known(g) => c * (g - x),
                    Link::Reflect(g) => 2.0 * c * (g - x),
                    Link::Closed | Link::Neumann => 0.0,
                };
            }
            out[(i, j)] = s;
        }
    }
    out
}

/// Fluid faces with no-slip walls: the rigid skeleton.
pub(crate) struct NoSlipRules<'a> {
    pub mask: &'a CellMask,
    pub eta: &'a [f64],
}

impl Rules for NoSlipRules<'_> {
    fn is_unknown(&self, loc: Location, i: usize, j: usize) -> bool {
        self.mask.face_class(loc, i, j) == FaceClass::Fluid
    }

    fn link(&self, loc: Location, _i: usize, _j: usize, _dir: Dir, nb: (isize, isize), in_range: bool) -> Link {
        if !in_range {
            return Link::Reflect(0.0);
        }
        match self.mask.face_class(loc, nb.0 as usize, nb.1 as usize) {
            FaceClass::Fluid => Link::Unknown,
            FaceClass::Interface | FaceClass::Outer => Link::Known(0.0),
            FaceClass::Solid => Link::Reflect(0.0),
        }
    }

    fn eta(&self, i: usize, j: usize) -> Option<f64> {
        self.mask.is_fluid(i, j).then(|| self.eta[j * self.mask.nx + i])
    }
}

/// Solid faces with Dirichlet data read from a pair of face fields; ghost
/// slots of the data fields hold the wall values on the outer boundary.
pub(crate) struct DirichletSolidRules<'a> {
    pub mask: &'a CellMask,
    pub coef: f64,
    pub data_u: &'a Field,
    pub data_v: &'a Field,
}

impl DirichletSolidRules<'_> {
    fn data(&self, loc: Location) -> &Field {
        if loc == Location::UFace {
            self.data_u
        } else {
            self.data_v
        }
    }
}

impl Rules for DirichletSolidRules<'_> {
    fn is_unknown(&self, loc: Location, i: usize, j: usize) -> bool {
        self.mask.face_class(loc, i, j) == FaceClass::Solid
    }

    fn link(&self, loc: Location, _i: usize, _j: usize, _dir: Dir, nb: (isize, isize), in_range: bool) -> Link {
        let g = self.data(loc).get(nb.0, nb.1);
        if !in_range {
            return Link::Reflect(g);
        }
        match self.mask.face_class(loc, nb.0 as usize, nb.1 as usize) {
            FaceClass::Solid => Link::Unknown,
            _ => Link::Known(g),
        }
    }

    fn eta(&self, i: usize, j: usize) -> Option<f64> {
        (!self.mask.is_fluid(i, j)).then_some(self.coef)
    }
}

/// Every non-outer face is an unknown; walls of the box are no-slip.
pub(crate) struct WholeDomainRules<'a> {
    pub mask: &'a CellMask,
    pub eta: &'a [f64],
}

impl Rules for WholeDomainRules<'_> {
    fn is_unknown(&self, loc: Location, i: usize, j: usize) -> bool {
        self.mask.face_class(loc, i, j) != FaceClass::Outer
    }

    fn link(&self, loc: Location, _i: usize, _j: usize, _dir: Dir, nb: (isize, isize), in_range: bool) -> Link {
        if !in_range {
            return Link::Reflect(0.0);
        }
        match self.mask.face_class(loc, nb.0 as usize, nb.1 as usize) {
            FaceClass::Outer => Link::Known(0.0),
            _ => Link::Unknown,
        }
    }

    fn eta(&self, i: usize, j: usize) -> Option<f64> {
        Some(self.eta[j * self.mask.nx + i])
    }
}

/// Fluid plus interface faces; interface faces carry a one-sided
/// normal-stress row and tangential links into the solid are traction links.
pub(crate) struct TractionRules<'a> {
    pub mask: &'a CellMask,
    pub eta: &'a [f64],
}

impl TractionRules<'_> {
    /// Fluid cell next to an interface face and the face across that cell.
    pub fn fluid_side(&self, loc: Location, i: usize, j: usize) -> ((usize, usize), (isize, isize), Dir) {
        let (i, j) = (i as isize, j as isize);
        match loc {
            Location::UFace => {
                if self.mask.cell(i - 1, j) == Some(true) {
                    ((i as usize - 1, j as usize), (i - 1, j), Dir::W)
                } else {
                    ((i as usize, j as usize), (i + 1, j), Dir::E)
                }
            }
            _ => {
                if self.mask.cell(i, j - 1) == Some(true) {
                    ((i as usize, j as usize - 1), (i, j - 1), Dir::N)
                } else {
                    ((i as usize, j as usize), (i, j + 1), Dir::S)
                }
            }
        }
    }
}

impl Rules for TractionRules<'_> {
    fn is_unknown(&self, loc: Location, i: usize, j: usize) -> bool {
        matches!(self.mask.face_class(loc, i, j), FaceClass::Fluid | FaceClass::Interface)
    }

    fn link(&self, loc: Location, i: usize, j: usize, dir: Dir, nb: (isize, isize), in_range: bool) -> Link {
        if !in_range {
            return Link::Reflect(0.0);
        }
        let own = self.mask.face_class(loc, i, j);
        match self.mask.face_class(loc, nb.0 as usize, nb.1 as usize) {
            FaceClass::Fluid => Link::Unknown,
            FaceClass::Interface if dir.is_normal(loc) => Link::Unknown,
            FaceClass::Interface => Link::Closed,
            FaceClass::Outer => Link::Known(0.0),
            FaceClass::Solid if own == FaceClass::Fluid => Link::Neumann,
            FaceClass::Solid => Link::Closed,
        }
    }

    fn eta(&self, i: usize, j: usize) -> Option<f64> {
        self.mask.is_fluid(i, j).then(|| self.eta[j * self.mask.nx + i])
    }

    fn row_kind(&self, loc: Location, i: usize, j: usize) -> RowKind {
        if self.mask.face_class(loc, i, j) != FaceClass::Interface {
            return RowKind::Stencil;
        }
        let ((ci, cj), inner, dir) = self.fluid_side(loc, i, j);
        RowKind::OneSided { inner, dir, eta: self.eta[cj * self.mask.nx + ci] }
    }
}
