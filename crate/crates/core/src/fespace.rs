//! Global finite element spaces on a [`Mesh`].
//!
//! RT degrees of freedom are numbered face block first (`k + 1` per face, in
//! mesh face order) followed by `2k(k + 1)` interior values per cell. The
//! face values are the component of the field along the face's lattice
//! normal, so neighbouring cells share them without sign flips.

use std::sync::Arc;

use faer::prelude::*;
use faer::Mat;

use crate::element::{Family, LocalDof, ReferenceElement};
use crate::error::{Error, Result};
use crate::mesh::{Axis, DisplacementBc, FaceCells, Mesh, PressureBc, Side};
use crate::quadrature::QuadratureRule;

/// Boundary part on which the normal trace of an RT space vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constraint {
    None,
    /// `z·n = 0` on `Γ_pN` (the flux space `W_h`).
    NoFlux,
    /// `v·n = 0` on `Γ_uD` (the displacement space `V_h`).
    DisplacementDirichlet,
}

#[derive(Debug, Clone)]
pub struct FESpace {
    mesh: Arc<Mesh>,
    element: ReferenceElement,
    constraint: Constraint,
    n_dofs: usize,
    cell_dofs: Vec<usize>,
    constrained: Vec<bool>,
}

/// Builds a space, enforcing `k ≥ 1`.
pub fn build_space(
    mesh: Arc<Mesh>,
    family: Family,
    degree: usize,
    constraint: Constraint,
) -> Result<FESpace> {
    FESpace::new(mesh, family, degree, constraint)
}

/// Which neighbour of a face a trace is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceSide {
    Minus,
    Plus,
}

/// Shape functions of one cell tabulated at physical quadrature points.
///
/// Entries are stored point-major: index `q * shape_count + i`. For DQ
/// spaces the scalar value is stored in the first vector slot.
#[derive(Debug, Clone)]
pub struct CellTable {
    pub cell: usize,
    pub dofs: Vec<usize>,
    pub points: Vec<[f64; 2]>,
    pub jxw: Vec<f64>,
    pub shape_count: usize,
    pub values: Vec<[f64; 2]>,
    pub divergence: Vec<f64>,
    pub gradient: Vec<[[f64; 2]; 2]>,
}

impl CellTable {
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn value(&self, q: usize, i: usize) -> [f64; 2] {
        self.values[q * self.shape_count + i]
    }

    pub fn scalar(&self, q: usize, i: usize) -> f64 {
        self.values[q * self.shape_count + i][0]
    }

    pub fn div(&self, q: usize, i: usize) -> f64 {
        self.divergence[q * self.shape_count + i]
    }

    pub fn grad(&self, q: usize, i: usize) -> [[f64; 2]; 2] {
        self.gradient[q * self.shape_count + i]
    }

    /// Field value `Σ c_i φ_i` at point `q` (vector spaces).
    pub fn eval_vector(&self, coeffs: &[f64], q: usize) -> [f64; 2] {
        let mut v = [0.0; 2];
        for (i, &d) in self.dofs.iter().enumerate() {
            let phi = self.value(q, i);
            v[0] += coeffs[d] * phi[0];
            v[1] += coeffs[d] * phi[1];
        }
        v
    }

    pub fn eval_scalar(&self, coeffs: &[f64], q: usize) -> f64 {
        self.dofs
            .iter()
            .enumerate()
            .map(|(i, &d)| coeffs[d] * self.scalar(q, i))
            .sum()
    }

    pub fn eval_div(&self, coeffs: &[f64], q: usize) -> f64 {
        self.dofs
            .iter()
            .enumerate()
            .map(|(i, &d)| coeffs[d] * self.div(q, i))
            .sum()
    }

    pub fn eval_grad(&self, coeffs: &[f64], q: usize) -> [[f64; 2]; 2] {
        let mut g = [[0.0; 2]; 2];
        for (i, &d) in self.dofs.iter().enumerate() {
            let gi = self.grad(q, i);
            for a in 0..2 {
                for b in 0..2 {
                    g[a][b] += coeffs[d] * gi[a][b];
                }
            }
        }
        g
    }
}

/// One-sided traces of a cell's shape functions on a face.
#[derive(Debug, Clone)]
pub struct FaceTable {
    pub face: usize,
    pub cell: usize,
    /// Side of `cell` the face lies on.
    pub local_side: Side,
    pub dofs: Vec<usize>,
    pub points: Vec<[f64; 2]>,
    pub jxw: Vec<f64>,
    /// `n_F` on interior faces, the outward normal on boundary faces.
    pub normal: [f64; 2],
    pub shape_count: usize,
    pub values: Vec<[f64; 2]>,
    pub gradient: Vec<[[f64; 2]; 2]>,
}

impl FaceTable {
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn value(&self, q: usize, i: usize) -> [f64; 2] {
        self.values[q * self.shape_count + i]
    }

    pub fn grad(&self, q: usize, i: usize) -> [[f64; 2]; 2] {
        self.gradient[q * self.shape_count + i]
    }

    pub fn normal_component(&self, q: usize, i: usize) -> f64 {
        let v = self.value(q, i);
        v[0] * self.normal[0] + v[1] * self.normal[1]
    }

    /// `D(φ_i) n`.
    pub fn sym_grad_normal(&self, q: usize, i: usize) -> [f64; 2] {
        sym_grad_times(self.grad(q, i), self.normal)
    }

    pub fn eval_vector(&self, coeffs: &[f64], q: usize) -> [f64; 2] {
        let mut v = [0.0; 2];
        for (i, &d) in self.dofs.iter().enumerate() {
            let phi = self.value(q, i);
            v[0] += coeffs[d] * phi[0];
            v[1] += coeffs[d] * phi[1];
        }
        v
    }
}

/// `½(G + Gᵀ) n`.
pub fn sym_grad_times(g: [[f64; 2]; 2], n: [f64; 2]) -> [f64; 2] {
    let d01 = 0.5 * (g[0][1] + g[1][0]);
    [g[0][0] * n[0] + d01 * n[1], d01 * n[0] + g[1][1] * n[1]]
}

/// Outcome of the `div W_h ⊂ Q_h` check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivCompatReport {
    pub functions_checked: usize,
    /// Largest `‖div φ − Π_Q div φ‖_T / ‖div φ‖_T` over all cells and shape
    /// functions.
    pub max_residual: f64,
}

impl DivCompatReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual <= tol
    }
}

impl FESpace {
    pub fn new(mesh: Arc<Mesh>, family: Family, degree: usize, constraint: Constraint) -> Result<Self> {
        if !(1..=3).contains(&degree) {
            return Err(Error::InvalidDegree(degree));
        }
        Self::build(mesh, family, degree, constraint)
    }

    /// Discontinuous `Q_k` space without the `k ≥ 1` restriction; degree 0
    /// is useful as a control in compatibility checks.
    pub fn discontinuous(mesh: Arc<Mesh>, degree: usize) -> Result<Self> {
        if degree > 3 {
            return Err(Error::InvalidDegree(degree));
        }
        Self::build(mesh, Family::DiscontinuousQ, degree, Constraint::None)
    }

    fn build(mesh: Arc<Mesh>, family: Family, degree: usize, constraint: Constraint) -> Result<Self> {
        if family == Family::DiscontinuousQ && constraint != Constraint::None {
            return Err(Error::SpaceMismatch(
                "discontinuous spaces carry no normal-trace constraint".into(),
            ));
        }
        if constraint != Constraint::None && mesh.boundary_spec().is_none() {
            return Err(Error::SpaceMismatch(
                "boundary constraint requested on an untagged mesh".into(),
            ));
        }
        let element = ReferenceElement::new(family, degree);
        let per_cell = element.dofs_per_cell();
        let n_cells = mesh.num_cells();
        let mut cell_dofs = Vec::with_capacity(n_cells * per_cell);
        let n_dofs;
        let mut constrained;

        match family {
            Family::DiscontinuousQ => {
                n_dofs = n_cells * per_cell;
                cell_dofs.extend(0..n_dofs);
                constrained = vec![false; n_dofs];
            }
            Family::RaviartThomas => {
                let per_face = element.dofs_per_face();
                let per_interior = element.interior_dofs();
                let face_block = mesh.num_faces() * per_face;
                n_dofs = face_block + n_cells * per_interior;
                let local = element.local_dofs();
                for cell in 0..n_cells {
                    let faces = mesh.cell_faces(cell);
                    for dof in &local {
                        cell_dofs.push(match *dof {
                            LocalDof::Face { side, index } => faces[side.index()] * per_face + index,
                            LocalDof::Interior { index } => face_block + cell * per_interior + index,
                        });
                    }
                }
                constrained = vec![false; n_dofs];
                for f in 0..mesh.num_faces() {
                    let Some(tag) = mesh.face_tag(f) else { continue };
                    let fixed = match constraint {
                        Constraint::None => false,
                        Constraint::NoFlux => tag.pressure == PressureBc::Neumann,
                        Constraint::DisplacementDirichlet => {
                            tag.displacement == DisplacementBc::Dirichlet
                        }
                    };
                    if fixed {
                        for d in f * per_face..(f + 1) * per_face {
                            constrained[d] = true;
                        }
                    }
                }
            }
        }

        Ok(Self {
            mesh,
            element,
            constraint,
            n_dofs,
            cell_dofs,
            constrained,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn element(&self) -> &ReferenceElement {
        &self.element
    }

    pub fn family(&self) -> Family {
        self.element.family()
    }

    pub fn degree(&self) -> usize {
        self.element.degree()
    }

    pub fn constraint(&self) -> Constraint {
        self.constraint
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn dofs_per_cell(&self) -> usize {
        self.element.dofs_per_cell()
    }

    pub fn cell_dofs(&self, cell: usize) -> &[usize] {
        let n = self.dofs_per_cell();
        &self.cell_dofs[cell * n..(cell + 1) * n]
    }

    /// Global indices of the normal-trace values on a face (RT only).
    pub fn face_dofs(&self, face: usize) -> std::ops::Range<usize> {
        let n = self.element.dofs_per_face();
        face * n..(face + 1) * n
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.constrained[dof]
    }

    pub fn constrained_mask(&self) -> &[bool] {
        &self.constrained
    }

    pub fn n_free(&self) -> usize {
        self.constrained.iter().filter(|c| !**c).count()
    }

    /// Zeroes the constrained entries of a coefficient vector.
    pub fn apply_constraints(&self, coeffs: &mut [f64]) {
        for (c, &fixed) in coeffs.iter_mut().zip(&self.constrained) {
            if fixed {
                *c = 0.0;
            }
        }
    }

    fn map_point(&self, cell: usize, p: [f64; 2]) -> [f64; 2] {
        let o = self.mesh.cell_origin(cell);
        let h = self.mesh.h();
        [o[0] + h * p[0], o[1] + h * p[1]]
    }

    /// Shape function values, divergences and physical gradients at
    /// reference points. Identical for every cell of a uniform mesh.
    fn table_at(&self, ref_points: &[[f64; 2]]) -> (Vec<[f64; 2]>, Vec<f64>, Vec<[[f64; 2]; 2]>) {
        let n = self.dofs_per_cell();
        let inv_h = 1.0 / self.mesh.h();
        let mut values = Vec::with_capacity(ref_points.len() * n);
        let mut div = Vec::new();
        let mut grad = Vec::with_capacity(ref_points.len() * n);
        match self.family() {
            Family::RaviartThomas => {
                div.reserve(ref_points.len() * n);
                for &p in ref_points {
                    let s = self.element.eval_vector(p);
                    for (v, g) in s.values.into_iter().zip(s.grads) {
                        let g = [
                            [g[0][0] * inv_h, g[0][1] * inv_h],
                            [g[1][0] * inv_h, g[1][1] * inv_h],
                        ];
                        values.push(v);
                        div.push(g[0][0] + g[1][1]);
                        grad.push(g);
                    }
                }
            }
            Family::DiscontinuousQ => {
                for &p in ref_points {
                    let (v, g) = self.element.eval_scalar(p);
                    for (v, g) in v.into_iter().zip(g) {
                        values.push([v, 0.0]);
                        grad.push([[g[0] * inv_h, g[1] * inv_h], [0.0, 0.0]]);
                    }
                }
            }
        }
        (values, div, grad)
    }

    /// Tabulates the shape functions of `cell` at the rule's points.
    pub fn tabulate(&self, cell: usize, rule: &QuadratureRule) -> CellTable {
        assert!(cell < self.mesh.num_cells(), "cell {cell} out of range");
        let area = self.mesh.cell_area();
        let (values, divergence, gradient) = self.table_at(&rule.points);
        CellTable {
            cell,
            dofs: self.cell_dofs(cell).to_vec(),
            points: rule.points.iter().map(|&p| self.map_point(cell, p)).collect(),
            jxw: rule.weights.iter().map(|w| w * area).collect(),
            shape_count: self.dofs_per_cell(),
            values,
            divergence,
            gradient,
        }
    }

    /// Resolves the cell and local side a face trace is taken from.
    pub fn face_neighbor(&self, face: usize, side: FaceSide) -> Result<(usize, Side)> {
        let f = self.mesh.face(face);
        match (f.cells, side) {
            (FaceCells::Interior { minus, .. }, FaceSide::Minus) => Ok((
                minus,
                match f.axis {
                    Axis::X => Side::Right,
                    Axis::Y => Side::Top,
                },
            )),
            (FaceCells::Interior { plus, .. }, FaceSide::Plus) => Ok((
                plus,
                match f.axis {
                    Axis::X => Side::Left,
                    Axis::Y => Side::Bottom,
                },
            )),
            (FaceCells::Boundary { cell, side }, FaceSide::Minus) => Ok((cell, side)),
            (FaceCells::Boundary { .. }, FaceSide::Plus) => Err(Error::SpaceMismatch(format!(
                "face {face} is a boundary face and has no T+ neighbour"
            ))),
        }
    }

    /// One-sided trace of the shape functions on a face.
    pub fn trace_eval(&self, face: usize, side: FaceSide, rule: &QuadratureRule) -> Result<FaceTable> {
        let (cell, local_side) = self.face_neighbor(face, side)?;
        let f = self.mesh.face(face);
        let ref_points: Vec<[f64; 2]> = rule
            .line
            .points
            .iter()
            .map(|&s| match local_side {
                Side::Left => [0.0, s],
                Side::Right => [1.0, s],
                Side::Bottom => [s, 0.0],
                Side::Top => [s, 1.0],
            })
            .collect();
        let (values, _, gradient) = self.table_at(&ref_points);
        let normal = if f.is_boundary() {
            local_side.outward_normal()
        } else {
            f.normal()
        };
        Ok(FaceTable {
            face,
            cell,
            local_side,
            dofs: self.cell_dofs(cell).to_vec(),
            points: rule.line.points.iter().map(|&s| f.point(s)).collect(),
            jxw: rule.line.weights.iter().map(|w| w * f.length).collect(),
            normal,
            shape_count: self.dofs_per_cell(),
            values,
            gradient,
        })
    }

    /// Nodal interpolant of a vector field (RT) into this space. Constrained
    /// entries are left at the field's value; call
    /// [`FESpace::apply_constraints`] to project onto the constrained space.
    pub fn interpolate_vector(&self, field: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
        assert_eq!(self.family(), Family::RaviartThomas);
        let nodes = self.element.rt_nodes();
        let mut coeffs = vec![0.0; self.n_dofs];
        for cell in 0..self.mesh.num_cells() {
            for ((p, comp), &d) in nodes.iter().zip(self.cell_dofs(cell)) {
                coeffs[d] = field(self.map_point(cell, *p))[*comp];
            }
        }
        coeffs
    }

    /// Nodal interpolant of a scalar field (DQ).
    pub fn interpolate_scalar(&self, field: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        assert_eq!(self.family(), Family::DiscontinuousQ);
        let nodes = self.element.dq_nodes();
        let mut coeffs = vec![0.0; self.n_dofs];
        for cell in 0..self.mesh.num_cells() {
            for (p, &d) in nodes.iter().zip(self.cell_dofs(cell)) {
                coeffs[d] = field(self.map_point(cell, *p));
            }
        }
        coeffs
    }

    /// Default rule for this space's degree.
    pub fn rule(&self) -> QuadratureRule {
        QuadratureRule::for_degree(self.degree())
    }
}

/// Cell-local `L²` projector onto a DQ space. The mesh is uniform, so one
/// factorized reference mass matrix serves every cell.
pub struct LocalProjector {
    rule: QuadratureRule,
    lu: faer::linalg::solvers::PartialPivLu<f64>,
    n: usize,
}

impl LocalProjector {
    pub fn new(space: &FESpace, rule: QuadratureRule) -> Self {
        assert_eq!(space.family(), Family::DiscontinuousQ);
        let t = space.tabulate(0, &rule);
        let n = t.shape_count;
        let mut m = Mat::<f64>::zeros(n, n);
        for q in 0..t.n_points() {
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] += t.jxw[q] * t.scalar(q, i) * t.scalar(q, j);
                }
            }
        }
        Self {
            rule,
            lu: m.partial_piv_lu(),
            n,
        }
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// Solves the local mass system for the moments `b_i = (g, φ_i)_T`.
    pub fn solve_moments(&self, moments: &[f64]) -> Vec<f64> {
        assert_eq!(moments.len(), self.n);
        let rhs = Mat::<f64>::from_fn(self.n, 1, |i, _| moments[i]);
        let x = self.lu.solve(&rhs);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }
}

/// `L²` projection of a scalar function onto a DQ space.
pub fn project_l2(space: &FESpace, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    let proj = LocalProjector::new(space, QuadratureRule::for_degree(space.degree() + 1));
    let mut coeffs = vec![0.0; space.n_dofs()];
    for cell in 0..space.mesh().num_cells() {
        let t = space.tabulate(cell, proj.rule());
        let mut b = vec![0.0; t.shape_count];
        for q in 0..t.n_points() {
            let fq = f(t.points[q]) * t.jxw[q];
            for (i, bi) in b.iter_mut().enumerate() {
                *bi += fq * t.scalar(q, i);
            }
        }
        for (&d, c) in t.dofs.iter().zip(proj.solve_moments(&b)) {
            coeffs[d] = c;
        }
    }
    coeffs
}

/// `L²` projection of `div w` onto `Q`. For compatible pairs this is exact.
pub fn project_divergence(w_space: &FESpace, q_space: &FESpace, w: &[f64]) -> Vec<f64> {
    let rule = QuadratureRule::for_degree(w_space.degree().max(q_space.degree()));
    let proj = LocalProjector::new(q_space, rule);
    let mut coeffs = vec![0.0; q_space.n_dofs()];
    for cell in 0..w_space.mesh().num_cells() {
        let tw = w_space.tabulate(cell, proj.rule());
        let tq = q_space.tabulate(cell, proj.rule());
        let mut b = vec![0.0; tq.shape_count];
        for q in 0..tw.n_points() {
            let d = tw.eval_div(w, q) * tw.jxw[q];
            for (i, bi) in b.iter_mut().enumerate() {
                *bi += d * tq.scalar(q, i);
            }
        }
        for (&d, c) in tq.dofs.iter().zip(proj.solve_moments(&b)) {
            coeffs[d] = c;
        }
    }
    coeffs
}

/// Checks that the divergence of every RT shape function lies in `Q`.
pub fn check_div_compat(w_space: &FESpace, q_space: &FESpace) -> Result<DivCompatReport> {
    if w_space.family() != Family::RaviartThomas || q_space.family() != Family::DiscontinuousQ {
        return Err(Error::SpaceMismatch("expected an RT space and a DQ space".into()));
    }
    if !Arc::ptr_eq(w_space.mesh(), q_space.mesh()) && **w_space.mesh() != **q_space.mesh() {
        return Err(Error::SpaceMismatch("spaces live on different meshes".into()));
    }
    let rule = QuadratureRule::for_degree(w_space.degree().max(q_space.degree()) + 1);
    let proj = LocalProjector::new(q_space, rule);
    let mut max_residual: f64 = 0.0;
    let mut checked = 0;
    for cell in 0..w_space.mesh().num_cells() {
        let tw = w_space.tabulate(cell, proj.rule());
        let tq = q_space.tabulate(cell, proj.rule());
        for i in 0..tw.shape_count {
            let mut b = vec![0.0; tq.shape_count];
            let mut norm2 = 0.0;
            for q in 0..tw.n_points() {
                let d = tw.div(q, i);
                norm2 += tw.jxw[q] * d * d;
                for (j, bj) in b.iter_mut().enumerate() {
                    *bj += tw.jxw[q] * d * tq.scalar(q, j);
                }
            }
            checked += 1;
            if norm2 == 0.0 {
                continue;
            }
            let c = proj.solve_moments(&b);
            let mut res2 = 0.0;
            for q in 0..tw.n_points() {
                let proj_q: f64 = c.iter().enumerate().map(|(j, cj)| cj * tq.scalar(q, j)).sum();
                let r = tw.div(q, i) - proj_q;
                res2 += tw.jxw[q] * r * r;
            }
            max_residual = max_residual.max((res2 / norm2).sqrt());
        }
    }
    Ok(DivCompatReport {
        functions_checked: checked,
        max_residual,
    })
}

/// `‖Σ c_i φ_i‖_Ω` for a DQ coefficient vector.
pub fn l2_norm_scalar(space: &FESpace, coeffs: &[f64]) -> f64 {
    let rule = QuadratureRule::for_degree(space.degree());
    let mut sum = 0.0;
    for cell in 0..space.mesh().num_cells() {
        let t = space.tabulate(cell, &rule);
        for q in 0..t.n_points() {
            let v = t.eval_scalar(coeffs, q);
            sum += t.jxw[q] * v * v;
        }
    }
    sum.sqrt()
}
