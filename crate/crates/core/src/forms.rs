//! Bilinear forms and load functionals of the semi-discrete scheme.
//!
//! All matrices are assembled on the full (unconstrained) index range of
//! their spaces; boundary constraints are applied when the block system is
//! composed.

use std::sync::Arc;

use faer::{Mat, Side as MatSide};

use crate::error::{Error, Result};
use crate::fespace::{sym_grad_times, CellTable, FESpace, FaceSide, FaceTable};
use crate::element::Family;
use crate::mesh::{BoundarySpec, BoundaryTag, DisplacementBc, FaceCells, PressureBc};
use crate::quadrature::QuadratureRule;
use crate::sparse::{SparseMatrix, TripletBuilder};

/// Source terms and boundary/initial data. Every method defaults to zero.
pub trait BiotData: Send + Sync {
    /// Mass source `f₁`.
    fn f1(&self, _x: [f64; 2], _t: f64) -> f64 {
        0.0
    }

    /// Body force `f₂`.
    fn f2(&self, _x: [f64; 2], _t: f64) -> [f64; 2] {
        [0.0; 2]
    }

    /// Pressure `p_D` on `Γ_pD`.
    fn pressure_boundary(&self, _x: [f64; 2], _t: f64) -> f64 {
        0.0
    }

    /// Displacement `u_D` on `Γ_uD`; only the tangential part is used on slip
    /// faces.
    fn displacement_boundary(&self, _x: [f64; 2], _t: f64) -> [f64; 2] {
        [0.0; 2]
    }

    /// Total traction `σ_N` on `Γ_uN` with outward normal `n`; on slip faces
    /// only its normal component enters.
    fn traction(&self, _x: [f64; 2], _t: f64, _n: [f64; 2]) -> [f64; 2] {
        [0.0; 2]
    }

    fn initial_pressure(&self, _x: [f64; 2]) -> f64 {
        0.0
    }

    fn initial_displacement(&self, _x: [f64; 2]) -> [f64; 2] {
        [0.0; 2]
    }

    fn initial_displacement_gradient(&self, _x: [f64; 2]) -> [[f64; 2]; 2] {
        [[0.0; 2]; 2]
    }
}

/// Homogeneous data.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroData;

impl BiotData for ZeroData {}

/// Material and penalty parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parameters {
    /// Constrained specific storage `c_s`.
    pub storage: f64,
    /// Biot–Willis constant `α`.
    pub biot_willis: f64,
    pub lambda: f64,
    pub mu: f64,
    pub permeability: [[f64; 2]; 2],
    /// Interior penalty `γ`; `None` selects [`default_penalty`].
    pub penalty: Option<f64>,
}

impl Default for Parameters {
    fn default() -> Self {
        Self {
            storage: 0.0,
            biot_willis: 1.0,
            lambda: 1.0,
            mu: 1.0,
            permeability: [[1.0, 0.0], [0.0, 1.0]],
            penalty: None,
        }
    }
}

/// `γ = 4(k + 1)(k + 2)`.
pub fn default_penalty(k: usize) -> f64 {
    4.0 * ((k + 1) * (k + 2)) as f64
}

/// Penalty below which [`BiotProblem::penalty_warning`] fires. On Cartesian
/// meshes the measured coercivity constant turns negative near half of it.
pub fn min_penalty(k: usize) -> f64 {
    ((k + 1) * (k + 2)) as f64
}

#[derive(Clone)]
pub struct BiotProblem {
    params: Parameters,
    boundary: BoundarySpec,
    data: Arc<dyn BiotData>,
    permeability_inv: [[f64; 2]; 2],
}

impl std::fmt::Debug for BiotProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BiotProblem")
            .field("params", &self.params)
            .field("boundary", &self.boundary)
            .finish_non_exhaustive()
    }
}

impl BiotProblem {
    pub fn new(params: Parameters, boundary: BoundarySpec, data: Arc<dyn BiotData>) -> Result<Self> {
        let p = &params;
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(p.storage >= 0.0) {
            return bad(format!("storage coefficient must be >= 0, got {}", p.storage));
        }
        if !(p.biot_willis > 0.0 && p.biot_willis <= 1.0) {
            return bad(format!("Biot-Willis constant must lie in (0, 1], got {}", p.biot_willis));
        }
        if !(p.mu > 0.0) {
            return bad(format!("mu must be > 0, got {}", p.mu));
        }
        if !(p.lambda >= 0.0) {
            return bad(format!("lambda must be >= 0, got {}", p.lambda));
        }
        if let Some(g) = p.penalty {
            if !(g > 0.0) {
                return bad(format!("penalty must be > 0, got {g}"));
            }
        }
        let k = p.permeability;
        if (k[0][1] - k[1][0]).abs() > 1e-14 * (k[0][1].abs() + k[1][0].abs()).max(1.0) {
            return bad("permeability must be symmetric".into());
        }
        let det = k[0][0] * k[1][1] - k[0][1] * k[1][0];
        if !(k[0][0] > 0.0 && det > 0.0) {
            return bad("permeability must be positive definite".into());
        }
        boundary.validate()?;
        let permeability_inv = [[k[1][1] / det, -k[0][1] / det], [-k[1][0] / det, k[0][0] / det]];
        Ok(Self {
            params,
            boundary,
            data,
            permeability_inv,
        })
    }

    pub fn params(&self) -> &Parameters {
        &self.params
    }

    pub fn boundary(&self) -> &BoundarySpec {
        &self.boundary
    }

    pub fn data(&self) -> &dyn BiotData {
        self.data.as_ref()
    }

    pub fn permeability_inv(&self) -> [[f64; 2]; 2] {
        self.permeability_inv
    }

    pub fn penalty(&self, k: usize) -> f64 {
        self.params.penalty.unwrap_or_else(|| default_penalty(k))
    }

    /// Warning text when `γ` is below [`min_penalty`].
    pub fn penalty_warning(&self, k: usize) -> Option<String> {
        let g = self.penalty(k);
        (g < min_penalty(k)).then(|| {
            format!(
                "penalty {g} is below the coercivity threshold {} for k = {k}",
                min_penalty(k)
            )
        })
    }
}

/// Matrices of the semi-discrete scheme.
#[derive(Debug, Clone)]
pub struct SystemBlocks {
    /// `(K⁻¹ w, z)`.
    pub darcy_mass: SparseMatrix,
    /// `(div w, q)`, rows in `Q_h`.
    pub div_w: SparseMatrix,
    /// `(div u, q)`, rows in `Q_h`.
    pub div_u: SparseMatrix,
    /// `a_h(u, v)`.
    pub elasticity: SparseMatrix,
    /// `(p, q)`.
    pub pressure_mass: SparseMatrix,
    pub w_constrained: Vec<bool>,
    pub u_constrained: Vec<bool>,
}

impl SystemBlocks {
    pub fn assemble(problem: &BiotProblem, q: &FESpace, w: &FESpace, v: &FESpace) -> Result<Self> {
        Ok(Self {
            darcy_mass: assemble_darcy_mass(problem, w)?,
            div_w: assemble_div(w, q)?,
            div_u: assemble_div(v, q)?,
            elasticity: assemble_ah(problem, v)?,
            pressure_mass: assemble_pressure_mass(q)?,
            w_constrained: w.constrained_mask().to_vec(),
            u_constrained: v.constrained_mask().to_vec(),
        })
    }
}

fn expect_family(space: &FESpace, family: Family) -> Result<()> {
    if space.family() != family {
        return Err(Error::SpaceMismatch(format!(
            "expected a {family:?} space, got {:?}",
            space.family()
        )));
    }
    Ok(())
}

fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn matvec2(m: [[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

fn scale2(a: f64, v: [f64; 2]) -> [f64; 2] {
    [a * v[0], a * v[1]]
}

/// `D(u) : D(v)` from full gradients.
fn sym_contract(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> f64 {
    let a01 = 0.5 * (a[0][1] + a[1][0]);
    let b01 = 0.5 * (b[0][1] + b[1][0]);
    a[0][0] * b[0][0] + a[1][1] * b[1][1] + 2.0 * a01 * b01
}

fn full_contract(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

/// Cell-by-cell assembly of `Σ_q w_q F(q, i, j)` into a square matrix.
fn assemble_cells(
    space: &FESpace,
    rule: &QuadratureRule,
    mut kernel: impl FnMut(&CellTable, usize, usize, usize) -> f64,
) -> SparseMatrix {
    let n = space.n_dofs();
    let mut b = TripletBuilder::new(n, n);
    for cell in 0..space.mesh().num_cells() {
        let t = space.tabulate(cell, rule);
        for i in 0..t.shape_count {
            for j in 0..t.shape_count {
                let v: f64 = (0..t.n_points()).map(|q| t.jxw[q] * kernel(&t, q, i, j)).sum();
                if v != 0.0 {
                    b.add(t.dofs[i], t.dofs[j], v);
                }
            }
        }
    }
    b.build()
}

/// `(K⁻¹ w, z)_Ω`.
pub fn assemble_darcy_mass(problem: &BiotProblem, w: &FESpace) -> Result<SparseMatrix> {
    expect_family(w, Family::RaviartThomas)?;
    let kinv = problem.permeability_inv();
    Ok(assemble_cells(w, &w.rule(), |t, q, i, j| {
        dot2(t.value(q, i), matvec2(kinv, t.value(q, j)))
    }))
}

/// `(p, q)_Ω`.
pub fn assemble_pressure_mass(q: &FESpace) -> Result<SparseMatrix> {
    expect_family(q, Family::DiscontinuousQ)?;
    Ok(assemble_cells(q, &q.rule(), |t, p, i, j| t.scalar(p, i) * t.scalar(p, j)))
}

/// `(div z, q)_Ω` with rows indexed by `Q_h` and columns by the RT space.
pub fn assemble_div(rt: &FESpace, q: &FESpace) -> Result<SparseMatrix> {
    expect_family(rt, Family::RaviartThomas)?;
    expect_family(q, Family::DiscontinuousQ)?;
    if rt.mesh().as_ref() != q.mesh().as_ref() {
        return Err(Error::SpaceMismatch("spaces live on different meshes".into()));
    }
    let rule = QuadratureRule::for_degree(rt.degree().max(q.degree()));
    let mut b = TripletBuilder::new(q.n_dofs(), rt.n_dofs());
    for cell in 0..rt.mesh().num_cells() {
        let tz = rt.tabulate(cell, &rule);
        let tq = q.tabulate(cell, &rule);
        for i in 0..tq.shape_count {
            for j in 0..tz.shape_count {
                let v: f64 = (0..tz.n_points())
                    .map(|p| tz.jxw[p] * tz.div(p, j) * tq.scalar(p, i))
                    .sum();
                if v != 0.0 {
                    b.add(tq.dofs[i], tz.dofs[j], v);
                }
            }
        }
    }
    Ok(b.build())
}

/// How a shape function enters a face integral: its (signed) trace `J` and
/// the traction-like quantity `A` paired with it.
struct FaceShape {
    dof: usize,
    jump: Vec<[f64; 2]>,
    flux: Vec<[f64; 2]>,
}

/// Face quadrature weights and the shapes active on one face.
struct FaceTerms {
    jxw: Vec<f64>,
    shapes: Vec<FaceShape>,
}

enum BoundaryKind {
    Dirichlet,
    Slip([f64; 2]),
}

fn tangential(v: [f64; 2], tau: [f64; 2]) -> [f64; 2] {
    scale2(dot2(v, tau), tau)
}

fn interior_face_terms(a: &FaceTable, b: &FaceTable) -> FaceTerms {
    let n = a.normal;
    let mut shapes = Vec::with_capacity(a.shape_count + b.shape_count);
    for (t, sign) in [(a, 1.0), (b, -1.0)] {
        for i in 0..t.shape_count {
            shapes.push(FaceShape {
                dof: t.dofs[i],
                jump: (0..t.n_points()).map(|q| scale2(sign, t.value(q, i))).collect(),
                flux: (0..t.n_points())
                    .map(|q| scale2(0.5, sym_grad_times(t.grad(q, i), n)))
                    .collect(),
            });
        }
    }
    FaceTerms {
        jxw: a.jxw.clone(),
        shapes,
    }
}

fn boundary_face_terms(t: &FaceTable, kind: &BoundaryKind) -> FaceTerms {
    let n = t.normal;
    let shapes = (0..t.shape_count)
        .map(|i| {
            let (jump, flux) = (0..t.n_points())
                .map(|q| {
                    let v = t.value(q, i);
                    let dn = sym_grad_times(t.grad(q, i), n);
                    match kind {
                        BoundaryKind::Dirichlet => (v, dn),
                        BoundaryKind::Slip(tau) => (tangential(v, *tau), tangential(dn, *tau)),
                    }
                })
                .unzip();
            FaceShape {
                dof: t.dofs[i],
                jump,
                flux,
            }
        })
        .collect();
    FaceTerms {
        jxw: t.jxw.clone(),
        shapes,
    }
}

fn displacement_kind(tag: BoundaryTag, side: crate::mesh::Side) -> Option<BoundaryKind> {
    match tag.displacement {
        DisplacementBc::Dirichlet => Some(BoundaryKind::Dirichlet),
        DisplacementBc::Slip => Some(BoundaryKind::Slip(side.tangent())),
        DisplacementBc::Neumann => None,
    }
}

/// Visits every face carrying displacement face terms.
fn for_each_dg_face(
    problem: &BiotProblem,
    v: &FESpace,
    rule: &QuadratureRule,
    mut visit: impl FnMut(FaceTerms),
) -> Result<()> {
    let mesh = v.mesh();
    for (f, face) in mesh.faces().iter().enumerate() {
        match face.cells {
            FaceCells::Interior { .. } => {
                let a = v.trace_eval(f, FaceSide::Minus, rule)?;
                let b = v.trace_eval(f, FaceSide::Plus, rule)?;
                visit(interior_face_terms(&a, &b));
            }
            FaceCells::Boundary { side, .. } => {
                let tag = mesh
                    .face_tag(f)
                    .or_else(|| problem.boundary().side(side))
                    .ok_or(Error::UntaggedSide(side))?;
                if let Some(kind) = displacement_kind(tag, side) {
                    let t = v.trace_eval(f, FaceSide::Minus, rule)?;
                    visit(boundary_face_terms(&t, &kind));
                }
            }
        }
    }
    Ok(())
}

/// Symmetric interior penalty form `d_h` (without the factor `μ`).
pub fn assemble_dh(problem: &BiotProblem, v: &FESpace) -> Result<SparseMatrix> {
    expect_family(v, Family::RaviartThomas)?;
    let k = v.degree();
    let sigma = problem.penalty(k) / v.mesh().h();
    let rule = v.rule();
    let n = v.n_dofs();
    let mut b = TripletBuilder::new(n, n);

    for cell in 0..v.mesh().num_cells() {
        let t = v.tabulate(cell, &rule);
        for i in 0..t.shape_count {
            for j in 0..t.shape_count {
                let val: f64 = (0..t.n_points())
                    .map(|q| 2.0 * t.jxw[q] * sym_contract(t.grad(q, i), t.grad(q, j)))
                    .sum();
                if val != 0.0 {
                    b.add(t.dofs[i], t.dofs[j], val);
                }
            }
        }
    }

    for_each_dg_face(problem, v, &rule, |terms| {
        for si in &terms.shapes {
            for sj in &terms.shapes {
                let val: f64 = terms
                    .jxw
                    .iter()
                    .enumerate()
                    .map(|(q, w)| {
                        w * (sigma * dot2(sj.jump[q], si.jump[q])
                            - 2.0 * dot2(sj.flux[q], si.jump[q])
                            - 2.0 * dot2(si.flux[q], sj.jump[q]))
                    })
                    .sum();
                if val != 0.0 {
                    b.add(si.dof, sj.dof, val);
                }
            }
        }
    })?;
    Ok(b.build())
}

/// `(div u, div v)_Ω`.
pub fn assemble_div_div(v: &FESpace) -> Result<SparseMatrix> {
    expect_family(v, Family::RaviartThomas)?;
    Ok(assemble_cells(v, &v.rule(), |t, q, i, j| t.div(q, i) * t.div(q, j)))
}

/// `a_h = μ d_h + λ (div, div)`.
pub fn assemble_ah(problem: &BiotProblem, v: &FESpace) -> Result<SparseMatrix> {
    let p = problem.params();
    let dh = assemble_dh(problem, v)?;
    let dd = assemble_div_div(v)?;
    Ok(dh.linear_combination(p.mu, &dd, p.lambda))
}

/// Gram matrix of the broken norm `‖·‖_{1,h}`: cellwise gradients, `γ/h`
/// weighted interior jumps and boundary traces on Dirichlet (full) and slip
/// (tangential) faces.
pub fn assemble_broken_h1_gram(problem: &BiotProblem, v: &FESpace) -> Result<SparseMatrix> {
    expect_family(v, Family::RaviartThomas)?;
    let sigma = problem.penalty(v.degree()) / v.mesh().h();
    let rule = v.rule();
    let n = v.n_dofs();
    let mut b = TripletBuilder::new(n, n);
    let vol = assemble_cells(v, &rule, |t, q, i, j| full_contract(t.grad(q, i), t.grad(q, j)));
    b.add_block(0, 0, &vol, 1.0);
    for_each_dg_face(problem, v, &rule, |terms| {
        for si in &terms.shapes {
            for sj in &terms.shapes {
                let val: f64 = terms
                    .jxw
                    .iter()
                    .enumerate()
                    .map(|(q, w)| w * sigma * dot2(sj.jump[q], si.jump[q]))
                    .sum();
                if val != 0.0 {
                    b.add(si.dof, sj.dof, val);
                }
            }
        }
    })?;
    Ok(b.build())
}

/// Smallest `κ` with `d_h(v, v) ≥ κ ‖v‖²_{1,h}` on the free degrees of
/// freedom, from the generalized symmetric eigenproblem.
pub fn coercivity_constant(problem: &BiotProblem, v: &FESpace) -> Result<f64> {
    let dh = assemble_dh(problem, v)?;
    let gram = assemble_broken_h1_gram(problem, v)?;
    let free: Vec<usize> = (0..v.n_dofs()).filter(|&d| !v.is_constrained(d)).collect();
    let d = dh.dense_submatrix(&free);
    let g = gram.dense_submatrix(&free);
    let llt = g
        .llt(MatSide::Lower)
        .map_err(|e| Error::Factorization(format!("broken H1 Gram matrix: {e:?}")))?;
    // C = L⁻¹ D L⁻ᵀ
    let mut y = d;
    llt.L().solve_lower_triangular_in_place(y.as_mut());
    let mut c: Mat<f64> = y.transpose().to_owned();
    llt.L().solve_lower_triangular_in_place(c.as_mut());
    let sym = Mat::<f64>::from_fn(c.nrows(), c.ncols(), |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));
    let eig = sym
        .self_adjoint_eigenvalues(MatSide::Lower)
        .map_err(|e| Error::Factorization(format!("eigenvalues: {e:?}")))?;
    Ok(eig.into_iter().fold(f64::INFINITY, f64::min))
}

/// Load vectors of one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct RhsVectors {
    /// `(f₁, q)`.
    pub mass: Vec<f64>,
    /// `−(p_D, z·n)_{Γ_pD}`.
    pub darcy: Vec<f64>,
    /// `R(v)`.
    pub momentum: Vec<f64>,
}

/// `(f₁(t), q)_Ω`.
pub fn assemble_mass_source(problem: &BiotProblem, q: &FESpace, t: f64) -> Vec<f64> {
    let rule = QuadratureRule::for_degree(q.degree() + 1);
    let mut out = vec![0.0; q.n_dofs()];
    for cell in 0..q.mesh().num_cells() {
        let tab = q.tabulate(cell, &rule);
        for p in 0..tab.n_points() {
            let f = tab.jxw[p] * problem.data().f1(tab.points[p], t);
            for i in 0..tab.shape_count {
                out[tab.dofs[i]] += f * tab.scalar(p, i);
            }
        }
    }
    out
}

/// `−(p_D(t), z·n)_{Γ_pD}`.
pub fn assemble_darcy_rhs(problem: &BiotProblem, w: &FESpace, t: f64) -> Result<Vec<f64>> {
    let rule = QuadratureRule::for_degree(w.degree() + 1);
    let mesh = w.mesh();
    let mut out = vec![0.0; w.n_dofs()];
    for (f, face) in mesh.faces().iter().enumerate() {
        let FaceCells::Boundary { side, .. } = face.cells else { continue };
        let tag = mesh.face_tag(f).or_else(|| problem.boundary().side(side));
        if !matches!(tag, Some(t) if t.pressure == PressureBc::Dirichlet) {
            continue;
        }
        let tab = w.trace_eval(f, FaceSide::Minus, &rule)?;
        for q in 0..tab.n_points() {
            let pd = tab.jxw[q] * problem.data().pressure_boundary(tab.points[q], t);
            for i in 0..tab.shape_count {
                out[tab.dofs[i]] -= pd * tab.normal_component(q, i);
            }
        }
    }
    Ok(out)
}

/// `R(v)` at time `t`.
pub fn assemble_momentum_rhs(problem: &BiotProblem, v: &FESpace, t: f64) -> Result<Vec<f64>> {
    let p = problem.params();
    let rule = QuadratureRule::for_degree(v.degree() + 1);
    let sigma = problem.penalty(v.degree()) / v.mesh().h();
    let mesh = v.mesh();
    let data = problem.data();
    let mut out = vec![0.0; v.n_dofs()];

    for cell in 0..mesh.num_cells() {
        let tab = v.tabulate(cell, &rule);
        for q in 0..tab.n_points() {
            let f = scale2(tab.jxw[q], data.f2(tab.points[q], t));
            for i in 0..tab.shape_count {
                out[tab.dofs[i]] += dot2(f, tab.value(q, i));
            }
        }
    }

    for (f, face) in mesh.faces().iter().enumerate() {
        let FaceCells::Boundary { side, .. } = face.cells else { continue };
        let tag = mesh
            .face_tag(f)
            .or_else(|| problem.boundary().side(side))
            .ok_or(Error::UntaggedSide(side))?;
        let tab = v.trace_eval(f, FaceSide::Minus, &rule)?;
        let n = tab.normal;
        let tau = side.tangent();
        for q in 0..tab.n_points() {
            let x = tab.points[q];
            let w = tab.jxw[q];
            match tag.displacement {
                DisplacementBc::Neumann => {
                    let s = data.traction(x, t, n);
                    for i in 0..tab.shape_count {
                        out[tab.dofs[i]] += w * dot2(s, tab.value(q, i));
                    }
                }
                DisplacementBc::Dirichlet => {
                    let ud = data.displacement_boundary(x, t);
                    for i in 0..tab.shape_count {
                        let dn = tab.sym_grad_normal(q, i);
                        out[tab.dofs[i]] +=
                            w * p.mu * (sigma * dot2(ud, tab.value(q, i)) - 2.0 * dot2(dn, ud));
                    }
                }
                DisplacementBc::Slip => {
                    let ud_t = dot2(data.displacement_boundary(x, t), tau);
                    let s_n = dot2(data.traction(x, t, n), n);
                    for i in 0..tab.shape_count {
                        let v_t = dot2(tab.value(q, i), tau);
                        let v_n = dot2(tab.value(q, i), n);
                        let dn_t = dot2(tab.sym_grad_normal(q, i), tau);
                        out[tab.dofs[i]] +=
                            w * (p.mu * (sigma * ud_t * v_t - 2.0 * dn_t * ud_t) + s_n * v_n);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// All three load vectors at time `t`.
pub fn assemble_rhs(
    problem: &BiotProblem,
    t: f64,
    q: &FESpace,
    w: &FESpace,
    v: &FESpace,
) -> Result<RhsVectors> {
    Ok(RhsVectors {
        mass: assemble_mass_source(problem, q, t),
        darcy: assemble_darcy_rhs(problem, w, t)?,
        momentum: assemble_momentum_rhs(problem, v, t)?,
    })
}

/// `a_h(u, v)` for every shape function `v`, with `u` a smooth field given by
/// its value and gradient. Jumps of `u` vanish, so interior faces keep only
/// the consistency term.
pub fn apply_ah_to_field(
    problem: &BiotProblem,
    v: &FESpace,
    value: impl Fn([f64; 2]) -> [f64; 2],
    gradient: impl Fn([f64; 2]) -> [[f64; 2]; 2],
) -> Result<Vec<f64>> {
    let p = problem.params();
    let rule = QuadratureRule::for_degree(v.degree() + 1);
    let sigma = problem.penalty(v.degree()) / v.mesh().h();
    let mesh = v.mesh();
    let mut out = vec![0.0; v.n_dofs()];

    for cell in 0..mesh.num_cells() {
        let t = v.tabulate(cell, &rule);
        for q in 0..t.n_points() {
            let g = gradient(t.points[q]);
            let div = g[0][0] + g[1][1];
            for i in 0..t.shape_count {
                out[t.dofs[i]] += t.jxw[q]
                    * (2.0 * p.mu * sym_contract(g, t.grad(q, i)) + p.lambda * div * t.div(q, i));
            }
        }
    }

    for (f, face) in mesh.faces().iter().enumerate() {
        match face.cells {
            FaceCells::Interior { .. } => {
                let a = v.trace_eval(f, FaceSide::Minus, &rule)?;
                let b = v.trace_eval(f, FaceSide::Plus, &rule)?;
                for q in 0..a.n_points() {
                    let dn = sym_grad_times(gradient(a.points[q]), a.normal);
                    for (t, sign) in [(&a, 1.0), (&b, -1.0)] {
                        for i in 0..t.shape_count {
                            out[t.dofs[i]] -= t.jxw[q] * p.mu * 2.0 * sign * dot2(dn, t.value(q, i));
                        }
                    }
                }
            }
            FaceCells::Boundary { side, .. } => {
                let tag = mesh
                    .face_tag(f)
                    .or_else(|| problem.boundary().side(side))
                    .ok_or(Error::UntaggedSide(side))?;
                let Some(kind) = displacement_kind(tag, side) else { continue };
                let t = v.trace_eval(f, FaceSide::Minus, &rule)?;
                for q in 0..t.n_points() {
                    let x = t.points[q];
                    let (u, dn) = match kind {
                        BoundaryKind::Dirichlet => (value(x), sym_grad_times(gradient(x), t.normal)),
                        BoundaryKind::Slip(tau) => (
                            tangential(value(x), tau),
                            tangential(sym_grad_times(gradient(x), t.normal), tau),
                        ),
                    };
                    for i in 0..t.shape_count {
                        let (vi, dvi) = match kind {
                            BoundaryKind::Dirichlet => (t.value(q, i), t.sym_grad_normal(q, i)),
                            BoundaryKind::Slip(tau) => (
                                tangential(t.value(q, i), tau),
                                tangential(t.sym_grad_normal(q, i), tau),
                            ),
                        };
                        out[t.dofs[i]] += t.jxw[q]
                            * p.mu
                            * (sigma * dot2(u, vi) - 2.0 * dot2(dn, vi) - 2.0 * dot2(dvi, u));
                    }
                }
            }
        }
    }
    Ok(out)
}
