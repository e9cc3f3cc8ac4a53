//! Uniform Cartesian subdivisions of the unit square.
//!
//! Level `ℓ` has `2^ℓ × 2^ℓ` congruent square cells. Cells are numbered
//! row-major from the lower-left corner. Faces come in two blocks: first the
//! vertical faces (normal `+x`), then the horizontal ones (normal `+y`).
//! Every interior face is oriented from its lower-index neighbour `T₋` to the
//! higher one `T₊`, so the face normal always points in a positive lattice
//! direction.

use crate::error::{Error, Result};

/// Largest supported refinement level.
pub const MAX_LEVEL: i64 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn unit(self) -> [f64; 2] {
        match self {
            Axis::X => [1.0, 0.0],
            Axis::Y => [0.0, 1.0],
        }
    }
}

/// One of the four sides of the unit square (and of each cell).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
            Side::Bottom => 2,
            Side::Top => 3,
        }
    }

    pub fn outward_normal(self) -> [f64; 2] {
        match self {
            Side::Left => [-1.0, 0.0],
            Side::Right => [1.0, 0.0],
            Side::Bottom => [0.0, -1.0],
            Side::Top => [0.0, 1.0],
        }
    }

    /// Unit tangent, the outward normal rotated counter-clockwise.
    pub fn tangent(self) -> [f64; 2] {
        let [nx, ny] = self.outward_normal();
        [-ny, nx]
    }

    pub fn axis(self) -> Axis {
        match self {
            Side::Left | Side::Right => Axis::X,
            Side::Bottom | Side::Top => Axis::Y,
        }
    }
}

/// Pressure-side boundary condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PressureBc {
    /// `p = p_D`.
    Dirichlet,
    /// `w·n = 0`, imposed on the flux space.
    Neumann,
}

/// Displacement-side boundary condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DisplacementBc {
    /// `u = u_D`; the normal trace is constrained in the space, the rest is
    /// imposed weakly.
    Dirichlet,
    /// `(σ − αpI)n = σ_N`.
    Neumann,
    /// `u×n = 0` with the normal displacement left free.
    Slip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoundaryTag {
    pub pressure: PressureBc,
    pub displacement: DisplacementBc,
}

impl BoundaryTag {
    pub fn new(pressure: PressureBc, displacement: DisplacementBc) -> Self {
        Self {
            pressure,
            displacement,
        }
    }
}

/// Per-side boundary condition assignment for the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BoundarySpec {
    sides: [Option<BoundaryTag>; 4],
}

impl BoundarySpec {
    /// Leaves every side untagged.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn uniform(pressure: PressureBc, displacement: DisplacementBc) -> Self {
        Self {
            sides: [Some(BoundaryTag::new(pressure, displacement)); 4],
        }
    }

    pub fn with_side(mut self, side: Side, pressure: PressureBc, displacement: DisplacementBc) -> Self {
        self.sides[side.index()] = Some(BoundaryTag::new(pressure, displacement));
        self
    }

    pub fn side(&self, side: Side) -> Option<BoundaryTag> {
        self.sides[side.index()]
    }

    pub fn validate(&self) -> Result<()> {
        for side in Side::ALL {
            if self.side(side).is_none() {
                return Err(Error::UntaggedSide(side));
            }
        }
        Ok(())
    }

    /// Whether the no-flux condition covers all of `∂Ω`.
    pub fn all_pressure_neumann(&self) -> bool {
        self.sides
            .iter()
            .all(|t| matches!(t, Some(t) if t.pressure == PressureBc::Neumann))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceCells {
    Interior { minus: usize, plus: usize },
    Boundary { cell: usize, side: Side },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    /// Direction of the face normal `n_F`.
    pub axis: Axis,
    pub cells: FaceCells,
    /// Lower (or left) end point.
    pub origin: [f64; 2],
    pub length: f64,
}

impl Face {
    pub fn normal(&self) -> [f64; 2] {
        self.axis.unit()
    }

    pub fn is_boundary(&self) -> bool {
        matches!(self.cells, FaceCells::Boundary { .. })
    }

    /// Point on the face at parameter `s ∈ [0, 1]`.
    pub fn point(&self, s: f64) -> [f64; 2] {
        match self.axis {
            Axis::X => [self.origin[0], self.origin[1] + s * self.length],
            Axis::Y => [self.origin[0] + s * self.length, self.origin[1]],
        }
    }
}

/// Faces of one cell, indexed by [`Side::index`].
pub type CellFaces = [usize; 4];

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    level: u32,
    n: usize,
    h: f64,
    faces: Vec<Face>,
    tags: Vec<Option<BoundaryTag>>,
    boundary: Option<BoundarySpec>,
}

/// Builds the level-`level` subdivision of the unit square.
pub fn build_cartesian_mesh(level: i64) -> Result<Mesh> {
    Mesh::cartesian(level)
}

/// Attaches per-side boundary tags to every boundary face.
pub fn classify_boundary(mesh: Mesh, spec: &BoundarySpec) -> Result<Mesh> {
    mesh.classify_boundary(spec)
}

impl Mesh {
    pub fn cartesian(level: i64) -> Result<Self> {
        if !(0..=MAX_LEVEL).contains(&level) {
            return Err(Error::InvalidLevel(level));
        }
        let level = level as u32;
        let n = 1usize << level;
        let h = 1.0 / n as f64;
        let mut faces = Vec::with_capacity(2 * n * (n + 1));

        // vertical faces: x = i h, row j
        for j in 0..n {
            for i in 0..=n {
                let cells = if i == 0 {
                    FaceCells::Boundary {
                        cell: j * n,
                        side: Side::Left,
                    }
                } else if i == n {
                    FaceCells::Boundary {
                        cell: j * n + n - 1,
                        side: Side::Right,
                    }
                } else {
                    FaceCells::Interior {
                        minus: j * n + i - 1,
                        plus: j * n + i,
                    }
                };
                faces.push(Face {
                    axis: Axis::X,
                    cells,
                    origin: [i as f64 * h, j as f64 * h],
                    length: h,
                });
            }
        }
        // horizontal faces: y = j h, column i
        for j in 0..=n {
            for i in 0..n {
                let cells = if j == 0 {
                    FaceCells::Boundary {
                        cell: i,
                        side: Side::Bottom,
                    }
                } else if j == n {
                    FaceCells::Boundary {
                        cell: (n - 1) * n + i,
                        side: Side::Top,
                    }
                } else {
                    FaceCells::Interior {
                        minus: (j - 1) * n + i,
                        plus: j * n + i,
                    }
                };
                faces.push(Face {
                    axis: Axis::Y,
                    cells,
                    origin: [i as f64 * h, j as f64 * h],
                    length: h,
                });
            }
        }

        let tags = vec![None; faces.len()];
        Ok(Self {
            level,
            n,
            h,
            faces,
            tags,
            boundary: None,
        })
    }

    pub fn classify_boundary(mut self, spec: &BoundarySpec) -> Result<Self> {
        spec.validate()?;
        for (face, tag) in self.faces.iter().zip(self.tags.iter_mut()) {
            *tag = match face.cells {
                FaceCells::Boundary { side, .. } => spec.side(side),
                FaceCells::Interior { .. } => None,
            };
        }
        self.boundary = Some(*spec);
        Ok(self)
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Cells per side.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn num_cells(&self) -> usize {
        self.n * self.n
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> &Face {
        &self.faces[f]
    }

    pub fn boundary_spec(&self) -> Option<&BoundarySpec> {
        self.boundary.as_ref()
    }

    pub fn face_tag(&self, f: usize) -> Option<BoundaryTag> {
        self.tags[f]
    }

    /// Lattice coordinates `(i, j)` of a cell.
    pub fn cell_ij(&self, cell: usize) -> (usize, usize) {
        (cell % self.n, cell / self.n)
    }

    /// Lower-left corner of a cell.
    pub fn cell_origin(&self, cell: usize) -> [f64; 2] {
        let (i, j) = self.cell_ij(cell);
        [i as f64 * self.h, j as f64 * self.h]
    }

    pub fn cell_area(&self) -> f64 {
        self.h * self.h
    }

    pub fn cell_faces(&self, cell: usize) -> CellFaces {
        let n = self.n;
        let (i, j) = self.cell_ij(cell);
        let vertical = |i: usize, j: usize| j * (n + 1) + i;
        let horizontal = |i: usize, j: usize| n * (n + 1) + j * n + i;
        [
            vertical(i, j),
            vertical(i + 1, j),
            horizontal(i, j),
            horizontal(i, j + 1),
        ]
    }

    /// Cell containing `x` (points on cell boundaries go to the upper cell,
    /// except on the top and right edges of the domain).
    pub fn locate(&self, x: [f64; 2]) -> usize {
        let clamp = |v: f64| ((v * self.n as f64).floor().max(0.0) as usize).min(self.n - 1);
        clamp(x[1]) * self.n + clamp(x[0])
    }

    /// Index of the cell in the next coarser mesh containing `cell`.
    pub fn parent_cell(&self, cell: usize) -> Option<usize> {
        if self.level == 0 {
            return None;
        }
        let (i, j) = self.cell_ij(cell);
        Some((j / 2) * (self.n / 2) + i / 2)
    }

    /// Boundary faces lying on the given side of the square.
    pub fn boundary_faces(&self, side: Side) -> impl Iterator<Item = usize> + '_ {
        self.faces
            .iter()
            .enumerate()
            .filter_map(move |(f, face)| match face.cells {
                FaceCells::Boundary { side: s, .. } if s == side => Some(f),
                _ => None,
            })
    }
}
