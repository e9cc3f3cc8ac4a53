//! Manufactured solution, error norms and convergence studies.
//!
//! With `φ = sin 2πx sin 2πy` and
//! `ψ(t) = (8π² sin 2πt − 2π cos 2πt + 2π e^{−8π²t}) / (64π⁴ + 4π²)`
//! the fields
//!
//! ```text
//! p = ψφ,   w = −ψ∇φ,   u = −(ψ/8π²)∇φ
//! ```
//!
//! solve the problem with `K = I`, `c_s = 0`, `α = 1`, `f₁ = φ sin 2πt` and
//! `f₂ = (α − λ − 2μ)ψ∇φ`, because `ψ′ + 8π²ψ = sin 2πt`. On the boundary of
//! the unit square `p = 0`, `u·τ = 0` and the normal component of the total
//! traction vanishes.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::element::Family;
use crate::error::{Error, Result};
use crate::fespace::{l2_norm_scalar, project_l2, FESpace, FaceSide};
use crate::forms::{coercivity_constant, BiotData, BiotProblem, Parameters};
use crate::mesh::{BoundarySpec, DisplacementBc, FaceCells, Mesh, PressureBc};
use crate::quadrature::QuadratureRule;
use crate::stepper::{build_spaces, initial_state, steps_to_reach, BiotState, Discretization, Stepper};

const TWO_PI: f64 = 2.0 * PI;
const EIGHT_PI2: f64 = 8.0 * PI * PI;

/// Final time of the verification runs.
pub const DEFAULT_END_TIME: f64 = 0.5;
/// θ of the verification runs.
pub const DEFAULT_THETA: f64 = 0.501;

/// Closed-form fields and sources.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactSolution {
    lambda: f64,
    mu: f64,
    alpha: f64,
}

impl ExactSolution {
    /// Exact solution for `params`; requires `K = I`, `c_s = 0` and `α = 1`.
    pub fn new(params: &Parameters) -> Result<Self> {
        if params.storage != 0.0 {
            return Err(Error::InvalidParameter(format!(
                "manufactured solution needs c_s = 0, got {}",
                params.storage
            )));
        }
        if params.biot_willis != 1.0 {
            return Err(Error::InvalidParameter(format!(
                "manufactured solution needs alpha = 1, got {}",
                params.biot_willis
            )));
        }
        if params.permeability != [[1.0, 0.0], [0.0, 1.0]] {
            return Err(Error::InvalidParameter("manufactured solution needs K = I".into()));
        }
        Ok(Self::sources(params))
    }

    /// The same source terms for arbitrary parameters. They are exact only
    /// under the conditions checked by [`ExactSolution::new`].
    pub fn sources(params: &Parameters) -> Self {
        Self {
            lambda: params.lambda,
            mu: params.mu,
            alpha: params.biot_willis,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn psi(t: f64) -> f64 {
        (EIGHT_PI2 * (TWO_PI * t).sin() - TWO_PI * (TWO_PI * t).cos()
            + TWO_PI * (-EIGHT_PI2 * t).exp())
            / (64.0 * PI.powi(4) + 4.0 * PI * PI)
    }

    pub fn psi_dot(t: f64) -> f64 {
        (EIGHT_PI2 * TWO_PI * (TWO_PI * t).cos()
            + TWO_PI * TWO_PI * (TWO_PI * t).sin()
            - TWO_PI * EIGHT_PI2 * (-EIGHT_PI2 * t).exp())
            / (64.0 * PI.powi(4) + 4.0 * PI * PI)
    }

    pub fn phi(x: [f64; 2]) -> f64 {
        (TWO_PI * x[0]).sin() * (TWO_PI * x[1]).sin()
    }

    pub fn grad_phi(x: [f64; 2]) -> [f64; 2] {
        let (sx, cx) = (TWO_PI * x[0]).sin_cos();
        let (sy, cy) = (TWO_PI * x[1]).sin_cos();
        [TWO_PI * cx * sy, TWO_PI * sx * cy]
    }

    pub fn hess_phi(x: [f64; 2]) -> [[f64; 2]; 2] {
        let (sx, cx) = (TWO_PI * x[0]).sin_cos();
        let (sy, cy) = (TWO_PI * x[1]).sin_cos();
        let a2 = TWO_PI * TWO_PI;
        [[-a2 * sx * sy, a2 * cx * cy], [a2 * cx * cy, -a2 * sx * sy]]
    }

    /// `∇Δφ`.
    pub fn grad_laplace_phi(x: [f64; 2]) -> [f64; 2] {
        let g = Self::grad_phi(x);
        [-EIGHT_PI2 * g[0], -EIGHT_PI2 * g[1]]
    }

    pub fn pressure(&self, x: [f64; 2], t: f64) -> f64 {
        Self::psi(t) * Self::phi(x)
    }

    pub fn pressure_grad(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let g = Self::grad_phi(x);
        let s = Self::psi(t);
        [s * g[0], s * g[1]]
    }

    pub fn flux(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let g = Self::grad_phi(x);
        let s = -Self::psi(t);
        [s * g[0], s * g[1]]
    }

    pub fn flux_div(&self, x: [f64; 2], t: f64) -> f64 {
        EIGHT_PI2 * Self::psi(t) * Self::phi(x)
    }

    pub fn displacement(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let g = Self::grad_phi(x);
        let s = -Self::psi(t) / EIGHT_PI2;
        [s * g[0], s * g[1]]
    }

    pub fn displacement_grad(&self, x: [f64; 2], t: f64) -> [[f64; 2]; 2] {
        let h = Self::hess_phi(x);
        let s = -Self::psi(t) / EIGHT_PI2;
        [[s * h[0][0], s * h[0][1]], [s * h[1][0], s * h[1][1]]]
    }

    pub fn displacement_div(&self, x: [f64; 2], t: f64) -> f64 {
        Self::psi(t) * Self::phi(x)
    }

    /// Total stress `σ(u) − αpI`.
    pub fn total_stress(&self, x: [f64; 2], t: f64) -> [[f64; 2]; 2] {
        let g = self.displacement_grad(x, t);
        let div = g[0][0] + g[1][1];
        let off = self.mu * (g[0][1] + g[1][0]);
        let iso = self.lambda * div - self.alpha * self.pressure(x, t);
        [[2.0 * self.mu * g[0][0] + iso, off], [off, 2.0 * self.mu * g[1][1] + iso]]
    }

    /// Residuals of the mass, Darcy (two components) and momentum (two
    /// components) equations, computed from the closed-form derivatives.
    pub fn pde_residuals(&self, x: [f64; 2], t: f64) -> [f64; 5] {
        let phi = Self::phi(x);
        let lap_phi = -EIGHT_PI2 * phi;
        let div_u_t = -Self::psi_dot(t) / EIGHT_PI2 * lap_phi;
        let mass = self.alpha * div_u_t + self.flux_div(x, t) - self.f1(x, t);

        let w = self.flux(x, t);
        let gp = self.pressure_grad(x, t);

        // u = ∇g with g = −ψφ/8π², so div σ(u) = (2μ + λ)∇Δg
        let gl = Self::grad_laplace_phi(x);
        let s = -Self::psi(t) / EIGHT_PI2 * (2.0 * self.mu + self.lambda);
        let f2 = self.f2(x, t);
        let m0 = -(s * gl[0] - self.alpha * gp[0]) - f2[0];
        let m1 = -(s * gl[1] - self.alpha * gp[1]) - f2[1];
        [mass, w[0] + gp[0], w[1] + gp[1], m0, m1]
    }

    /// Boundary conditions of the verification problem.
    pub fn boundary() -> BoundarySpec {
        BoundarySpec::uniform(PressureBc::Dirichlet, DisplacementBc::Slip)
    }

    /// Problem with this data and the verification boundary conditions.
    pub fn problem(&self, params: Parameters) -> Result<BiotProblem> {
        BiotProblem::new(params, Self::boundary(), Arc::new(*self))
    }
}

impl BiotData for ExactSolution {
    fn f1(&self, x: [f64; 2], t: f64) -> f64 {
        Self::phi(x) * (TWO_PI * t).sin()
    }

    fn f2(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let g = Self::grad_phi(x);
        let s = (self.alpha - self.lambda - 2.0 * self.mu) * Self::psi(t);
        [s * g[0], s * g[1]]
    }

    fn pressure_boundary(&self, x: [f64; 2], t: f64) -> f64 {
        self.pressure(x, t)
    }

    fn displacement_boundary(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        self.displacement(x, t)
    }

    fn traction(&self, x: [f64; 2], t: f64, n: [f64; 2]) -> [f64; 2] {
        let s = self.total_stress(x, t);
        [s[0][0] * n[0] + s[0][1] * n[1], s[1][0] * n[0] + s[1][1] * n[1]]
    }

    fn initial_pressure(&self, x: [f64; 2]) -> f64 {
        self.pressure(x, 0.0)
    }

    fn initial_displacement(&self, x: [f64; 2]) -> [f64; 2] {
        self.displacement(x, 0.0)
    }

    fn initial_displacement_gradient(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        self.displacement_grad(x, 0.0)
    }
}

/// Point `i` of the 2-D Halton sequence in the unit square.
fn halton(i: usize) -> [f64; 2] {
    let radical = |mut n: usize, b: usize| {
        let mut f = 1.0;
        let mut r = 0.0;
        while n > 0 {
            f /= b as f64;
            r += f * (n % b) as f64;
            n /= b;
        }
        r
    };
    [radical(i + 1, 2), radical(i + 1, 3)]
}

/// Largest PDE residual over `samples` deterministic space-time points in
/// `Ω × [0, 1]`.
pub fn max_pde_residual(exact: &ExactSolution, samples: usize) -> f64 {
    (0..samples)
        .map(|i| {
            let x = halton(i);
            let t = (i as f64 + 0.5) / samples as f64;
            exact
                .pde_residuals(x, t)
                .iter()
                .fold(0.0f64, |m, r| m.max(r.abs()))
        })
        .fold(0.0, f64::max)
}

/// Error norms of a discrete state against the exact fields.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorReport {
    pub time: f64,
    /// `‖p_h − p‖_Ω`.
    pub p: f64,
    /// `‖p_h − Π p‖_Ω` with `Π` the L² projection onto `Q_h`.
    pub p_projection: f64,
    /// `‖w_h − w‖_Ω`.
    pub w: f64,
    /// `‖K^{-1/2}(w_h − w)‖_Ω`.
    pub w_weighted: f64,
    /// `‖u_h − u‖_Ω`.
    pub u: f64,
    /// `‖u_h − u‖_{1,h}`.
    pub u_broken: f64,
    /// `‖div(u_h − u)‖_Ω`.
    pub div_u: f64,
}

/// The norms reported by a convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Norm {
    P,
    PProjection,
    W,
    WWeighted,
    U,
    UBroken,
    DivU,
}

impl Norm {
    pub const ALL: [Norm; 7] = [
        Norm::P,
        Norm::PProjection,
        Norm::W,
        Norm::WWeighted,
        Norm::U,
        Norm::UBroken,
        Norm::DivU,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Norm::P => "p",
            Norm::PProjection => "p_proj",
            Norm::W => "w",
            Norm::WWeighted => "w_k",
            Norm::U => "u",
            Norm::UBroken => "u_1h",
            Norm::DivU => "div_u",
        }
    }

    /// Asymptotic order for degree `k`.
    pub fn expected_rate(self, k: usize) -> f64 {
        match self {
            Norm::UBroken => k as f64,
            _ => (k + 1) as f64,
        }
    }

    pub fn of(self, e: &ErrorReport) -> f64 {
        match self {
            Norm::P => e.p,
            Norm::PProjection => e.p_projection,
            Norm::W => e.w,
            Norm::WWeighted => e.w_weighted,
            Norm::U => e.u,
            Norm::UBroken => e.u_broken,
            Norm::DivU => e.div_u,
        }
    }
}

fn sub2(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Error norms of `state` at `state.time`, with quadrature of order `2k + 5`.
pub fn compute_errors(disc: &Discretization, state: &BiotState, exact: &ExactSolution) -> Result<ErrorReport> {
    let t = state.time;
    let (q, w, v) = (disc.pressure_space(), disc.flux_space(), disc.displacement_space());
    let problem = disc.problem();
    let kinv = problem.permeability_inv();
    let w_h = match &state.w {
        Some(w) => w.clone(),
        None => disc.darcy_flux(&state.p, t)?,
    };
    let rule = QuadratureRule::for_degree(disc.degree() + 1);
    let mut e = ErrorReport {
        time: t,
        ..Default::default()
    };
    let mut grad2 = 0.0;

    for cell in 0..disc.mesh().num_cells() {
        let tq = q.tabulate(cell, &rule);
        let tw = w.tabulate(cell, &rule);
        let tv = v.tabulate(cell, &rule);
        for i in 0..tq.n_points() {
            let x = tq.points[i];
            let jxw = tq.jxw[i];
            let ep = tq.eval_scalar(&state.p, i) - exact.pressure(x, t);
            e.p += jxw * ep * ep;

            let ew = sub2(tw.eval_vector(&w_h, i), exact.flux(x, t));
            e.w += jxw * dot2(ew, ew);
            let kw = [
                kinv[0][0] * ew[0] + kinv[0][1] * ew[1],
                kinv[1][0] * ew[0] + kinv[1][1] * ew[1],
            ];
            e.w_weighted += jxw * dot2(ew, kw);

            let eu = sub2(tv.eval_vector(&state.u, i), exact.displacement(x, t));
            e.u += jxw * dot2(eu, eu);
            let gh = tv.eval_grad(&state.u, i);
            let g = exact.displacement_grad(x, t);
            for a in 0..2 {
                for b in 0..2 {
                    grad2 += jxw * (gh[a][b] - g[a][b]).powi(2);
                }
            }
            let ed = tv.eval_div(&state.u, i) - exact.displacement_div(x, t);
            e.div_u += jxw * ed * ed;
        }
    }

    // jumps of u_h − u equal those of u_h on interior faces
    let sigma = problem.penalty(disc.degree()) / disc.mesh().h();
    let mut jump2 = 0.0;
    let mesh = disc.mesh();
    for (f, face) in mesh.faces().iter().enumerate() {
        match face.cells {
            FaceCells::Interior { .. } => {
                let a = v.trace_eval(f, FaceSide::Minus, &rule)?;
                let b = v.trace_eval(f, FaceSide::Plus, &rule)?;
                for i in 0..a.n_points() {
                    let j = sub2(a.eval_vector(&state.u, i), b.eval_vector(&state.u, i));
                    jump2 += a.jxw[i] * dot2(j, j);
                }
            }
            FaceCells::Boundary { side, .. } => {
                let Some(tag) = mesh.face_tag(f).or_else(|| problem.boundary().side(side)) else {
                    continue;
                };
                let tangential_only = match tag.displacement {
                    DisplacementBc::Dirichlet => false,
                    DisplacementBc::Slip => true,
                    DisplacementBc::Neumann => continue,
                };
                let a = v.trace_eval(f, FaceSide::Minus, &rule)?;
                let tau = side.tangent();
                for i in 0..a.n_points() {
                    let err = sub2(a.eval_vector(&state.u, i), exact.displacement(a.points[i], t));
                    let val = if tangential_only {
                        dot2(err, tau).powi(2)
                    } else {
                        dot2(err, err)
                    };
                    jump2 += a.jxw[i] * val;
                }
            }
        }
    }

    let proj = project_l2(q, |x| exact.pressure(x, t));
    let diff: Vec<f64> = state.p.iter().zip(&proj).map(|(a, b)| a - b).collect();
    e.p_projection = l2_norm_scalar(q, &diff);
    e.p = e.p.sqrt();
    e.w = e.w.sqrt();
    e.w_weighted = e.w_weighted.sqrt();
    e.u = e.u.sqrt();
    e.div_u = e.div_u.sqrt();
    e.u_broken = (grad2 + sigma * jump2).sqrt();
    Ok(e)
}

/// Default time step per level (levels 2–7) for `k ∈ {1, 2}`.
pub fn table_time_step(k: usize, level: i64) -> Option<f64> {
    let table: &[f64] = match k {
        1 => &[0.08, 0.04, 0.02, 0.01, 0.005, 0.002],
        2 => &[0.02, 0.006, 0.002, 0.0007, 0.0003, 0.0001],
        _ => return None,
    };
    let i = usize::try_from(level - 2).ok()?;
    table.get(i).copied()
}

/// Settings of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub k: usize,
    pub levels: Vec<i64>,
    /// Per-level time steps; `None` uses [`table_time_step`].
    pub time_steps: Option<Vec<f64>>,
    pub theta: f64,
    pub lambda: f64,
    pub end_time: f64,
    pub penalty: Option<f64>,
}

impl StudyConfig {
    pub fn new(k: usize, levels: Vec<i64>) -> Self {
        Self {
            k,
            levels,
            time_steps: None,
            theta: DEFAULT_THETA,
            lambda: 1.0,
            end_time: DEFAULT_END_TIME,
            penalty: None,
        }
    }

    pub fn params(&self) -> Parameters {
        Parameters {
            lambda: self.lambda,
            penalty: self.penalty,
            ..Parameters::default()
        }
    }

    fn validate(&self) -> Result<Vec<f64>> {
        if self.levels.is_empty() {
            return Err(Error::InvalidLevels("no levels given".into()));
        }
        if let Some(l) = self.levels.iter().find(|l| !(2..=7).contains(*l)) {
            return Err(Error::InvalidLevels(format!("level {l} outside 2..=7")));
        }
        if self.levels.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::InvalidLevels("levels must be strictly increasing".into()));
        }
        if !(self.end_time > 0.0) {
            return Err(Error::InvalidTimeStep(format!("end time must be > 0, got {}", self.end_time)));
        }
        match &self.time_steps {
            Some(dts) if dts.len() != self.levels.len() => Err(Error::DimensionMismatch {
                expected: self.levels.len(),
                got: dts.len(),
            }),
            Some(dts) => Ok(dts.clone()),
            None => self
                .levels
                .iter()
                .map(|&l| {
                    table_time_step(self.k, l).ok_or_else(|| {
                        Error::InvalidTimeStep(format!(
                            "no default time step for k = {} at level {l}; pass one explicitly",
                            self.k
                        ))
                    })
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub level: i64,
    pub h: f64,
    /// Step size actually used (the requested one shortened to land on `T`).
    pub dt: f64,
    pub steps: usize,
    pub dofs: usize,
    pub errors: ErrorReport,
    /// Largest per-step conservation residual of the run.
    pub max_conservation_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub k: usize,
    pub rows: Vec<ConvergenceRow>,
    pub warnings: Vec<String>,
}

/// Solves the verification problem on one level and reports the errors at
/// `end_time`.
pub fn solve_level(
    exact: &ExactSolution,
    params: Parameters,
    k: usize,
    level: i64,
    dt: f64,
    theta: f64,
    end_time: f64,
) -> Result<ConvergenceRow> {
    let disc = Discretization::new(exact.problem(params)?, level, k)?;
    let (steps, dt) = steps_to_reach(end_time, dt)?;
    let stepper = Stepper::new(&disc, dt, theta)?;
    let mut state = initial_state(&disc, 0.0)?;
    if theta < 1.0 {
        stepper.ensure_flux(&mut state)?;
    }
    let mut worst: f64 = 0.0;
    for i in 0..steps {
        let (mut next, report) = stepper.step(&state)?;
        if i + 1 == steps {
            next.time = end_time;
        }
        worst = worst.max(report.conservation_residual);
        state = next;
    }
    Ok(ConvergenceRow {
        level,
        h: disc.mesh().h(),
        dt,
        steps,
        dofs: disc.n_dofs(),
        errors: compute_errors(&disc, &state, exact)?,
        max_conservation_residual: worst,
    })
}

/// Runs every level (concurrently) and collects the table.
pub fn convergence_study(config: &StudyConfig) -> Result<ConvergenceTable> {
    let dts = config.validate()?;
    let params = config.params();
    let exact = ExactSolution::new(&params)?;
    let results: Vec<Result<ConvergenceRow>> = std::thread::scope(|s| {
        let handles: Vec<_> = config
            .levels
            .iter()
            .zip(&dts)
            .map(|(&level, &dt)| {
                s.spawn(move || {
                    solve_level(&exact, params, config.k, level, dt, config.theta, config.end_time)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("convergence worker panicked"))
            .collect()
    });
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    let mut table = ConvergenceTable {
        k: config.k,
        rows,
        warnings: Vec::new(),
    };
    table.warnings = table.plateau_warnings();
    Ok(table)
}

impl ConvergenceTable {
    /// Pairwise observed orders `log(e₀/e₁)/log(h₀/h₁)`; the first entry is
    /// `None`.
    pub fn rates(&self, norm: Norm) -> Vec<Option<f64>> {
        let mut out = vec![None; self.rows.len().min(1)];
        for pair in self.rows.windows(2) {
            let (a, b) = (norm.of(&pair[0].errors), norm.of(&pair[1].errors));
            out.push(Some((a / b).ln() / (pair[0].h / pair[1].h).ln()));
        }
        out
    }

    /// Observed order between the last two levels.
    pub fn last_rate(&self, norm: Norm) -> Option<f64> {
        self.rates(norm).last().copied().flatten()
    }

    /// Messages for norms whose last observed order falls clearly short of
    /// the expected one, which usually means the time step is too large.
    pub fn plateau_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.rows.len() < 2 {
            return out;
        }
        let (a, b) = (self.rows[self.rows.len() - 2].level, self.rows[self.rows.len() - 1].level);
        for norm in Norm::ALL {
            if norm == Norm::PProjection {
                continue;
            }
            let expected = norm.expected_rate(self.k);
            if let Some(r) = self.last_rate(norm) {
                if r < expected - 0.5 {
                    out.push(format!(
                        "rate of {} between levels {a} and {b} is {r:.2}, expected about {expected}; \
                         the time step may dominate the error",
                        norm.name()
                    ));
                }
            }
        }
        out
    }

    /// Whether every norm decreases from each level to the next.
    pub fn is_monotone(&self) -> bool {
        self.rows.windows(2).all(|p| {
            Norm::ALL
                .iter()
                .all(|n| n.of(&p[1].errors) < n.of(&p[0].errors))
        })
    }

    /// CSV with full-precision scientific floats and one row per level.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,h,dt,steps,dofs");
        for n in Norm::ALL {
            let _ = write!(s, ",err_{}", n.name());
        }
        for n in Norm::ALL {
            let _ = write!(s, ",rate_{}", n.name());
        }
        s.push('\n');
        let rates: Vec<Vec<Option<f64>>> = Norm::ALL.iter().map(|&n| self.rates(n)).collect();
        for (i, r) in self.rows.iter().enumerate() {
            let _ = write!(s, "{},{:.16e},{:.16e},{},{}", r.level, r.h, r.dt, r.steps, r.dofs);
            for n in Norm::ALL {
                let _ = write!(s, ",{:.16e}", n.of(&r.errors));
            }
            for rate in &rates {
                match rate[i] {
                    Some(v) => {
                        let _ = write!(s, ",{v:.16e}");
                    }
                    None => s.push(','),
                }
            }
            s.push('\n');
        }
        s
    }

    /// Log-log plot of the L², flux, broken-gradient and divergence errors
    /// against `h`, with reference slope triangles of orders `k + 1` and `k`.
    pub fn to_svg(&self) -> String {
        let (w, h) = (640.0, 480.0);
        let (left, right, top, bottom) = (70.0, 150.0, 30.0, 60.0);
        let norms = [Norm::P, Norm::W, Norm::U, Norm::UBroken, Norm::DivU];
        let colors = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"];
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .flat_map(|r| norms.iter().map(move |n| (r.h, n.of(&r.errors))))
            .filter(|(_, e)| *e > 0.0)
            .collect();
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        if pts.is_empty() {
            s.push_str("</svg>\n");
            return s;
        }
        let lx: Vec<f64> = pts.iter().map(|p| p.0.log10()).collect();
        let ly: Vec<f64> = pts.iter().map(|p| p.1.log10()).collect();
        let (x0, x1) = (
            lx.iter().cloned().fold(f64::INFINITY, f64::min) - 0.1,
            lx.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 0.1,
        );
        let (y0, y1) = (
            ly.iter().cloned().fold(f64::INFINITY, f64::min).floor(),
            ly.iter().cloned().fold(f64::NEG_INFINITY, f64::max).ceil(),
        );
        let pw = w - left - right;
        let ph = h - top - bottom;
        let sx = |v: f64| left + (v.log10() - x0) / (x1 - x0) * pw;
        let sy = |v: f64| top + (y1 - v.log10()) / (y1 - y0).max(1e-12) * ph;

        let _ = writeln!(
            s,
            r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for d in (y0 as i32)..=(y1 as i32) {
            let y = sy(10f64.powi(d));
            let _ = writeln!(
                s,
                r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">1e{d}</text>"##,
                left + pw,
                left - 5.0,
                y + 4.0
            );
        }
        for r in &self.rows {
            let x = sx(r.h);
            let _ = writeln!(
                s,
                r#"<text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">1/{}</text>"#,
                top + ph + 16.0,
                (1.0 / r.h).round()
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">h</text>"#,
            left + pw / 2.0,
            h - 20.0
        );

        for (i, n) in norms.iter().enumerate() {
            let line: Vec<String> = self
                .rows
                .iter()
                .filter(|r| n.of(&r.errors) > 0.0)
                .map(|r| format!("{:.2},{:.2}", sx(r.h), sy(n.of(&r.errors))))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                line.join(" "),
                colors[i]
            );
            for p in &line {
                let (x, y) = p.split_once(',').unwrap_or(("0", "0"));
                let _ = writeln!(s, r#"<circle cx="{x}" cy="{y}" r="3" fill="{}"/>"#, colors[i]);
            }
            let ly = top + 15.0 + 18.0 * i as f64;
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="2"/><text x="{:.2}" y="{:.2}" font-size="12">{}</text>"#,
                left + pw + 10.0,
                left + pw + 30.0,
                colors[i],
                left + pw + 35.0,
                ly + 4.0,
                n.name()
            );
        }

        // slope triangles anchored below the smallest errors
        let hmin = self.rows.iter().map(|r| r.h).fold(f64::INFINITY, f64::min);
        let emin = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        for (j, order) in [(self.k + 1) as f64, self.k as f64].into_iter().enumerate() {
            if order <= 0.0 {
                continue;
            }
            let ha = hmin * if j == 0 { 1.0 } else { 2.0 };
            let hb = ha * 2.0;
            let ea = emin * 10f64.powf(-0.3 - 0.6 * j as f64).max(10f64.powf(y0));
            let eb = ea * 2f64.powf(order);
            let (xa, xb, ya, yb) = (sx(ha), sx(hb), sy(ea), sy(eb));
            let _ = writeln!(
                s,
                r#"<polygon points="{xa:.2},{ya:.2} {xb:.2},{ya:.2} {xb:.2},{yb:.2}" fill="none" stroke="black"/><text x="{:.2}" y="{:.2}" font-size="11">{order}</text>"#,
                xb + 4.0,
                (ya + yb) / 2.0
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

/// `κ` on levels `levels` with Dirichlet displacement on every side.
pub fn coercivity_scan(k: usize, levels: &[i64], penalty: Option<f64>) -> Result<Vec<(i64, f64)>> {
    let spec = BoundarySpec::uniform(PressureBc::Dirichlet, DisplacementBc::Dirichlet);
    let params = Parameters {
        penalty,
        ..Parameters::default()
    };
    let problem = BiotProblem::new(params, spec, Arc::new(crate::forms::ZeroData))?;
    levels
        .iter()
        .map(|&level| {
            let mesh = Arc::new(Mesh::cartesian(level)?.classify_boundary(&spec)?);
            let (_, _, v) = build_spaces(&mesh, k)?;
            Ok((level, coercivity_constant(&problem, &v)?))
        })
        .collect()
}

/// Worst divergence-compatibility residual over the given levels.
pub fn div_compat_residual(k: usize, levels: &[i64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &level in levels {
        let mesh = Arc::new(Mesh::cartesian(level)?);
        let w = FESpace::new(mesh.clone(), Family::RaviartThomas, k, crate::fespace::Constraint::None)?;
        let q = FESpace::new(mesh, Family::DiscontinuousQ, k, crate::fespace::Constraint::None)?;
        worst = worst.max(crate::fespace::check_div_compat(&w, &q)?.max_residual);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact() -> ExactSolution {
        ExactSolution::new(&Parameters::default()).unwrap()
    }

    #[test]
    fn psi_vanishes_initially() {
        assert!(ExactSolution::psi(0.0).abs() < 1e-18);
        assert!((ExactSolution::phi([0.25, 0.25]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn psi_identity() {
        for t in [0.0, 0.013, 0.2, 0.5, 0.77] {
            let lhs = ExactSolution::psi_dot(t) + EIGHT_PI2 * ExactSolution::psi(t);
            assert!((lhs - (TWO_PI * t).sin()).abs() < 1e-14);
        }
    }

    #[test]
    fn psi_derivative_matches_difference_quotient() {
        let h = 1e-6;
        for t in [0.05, 0.3, 0.6] {
            let fd = (ExactSolution::psi(t + h) - ExactSolution::psi(t - h)) / (2.0 * h);
            assert!((fd - ExactSolution::psi_dot(t)).abs() < 1e-8);
        }
    }

    #[test]
    fn mass_residual_at_sample_point() {
        let r = exact().pde_residuals([0.3, 0.7], 0.2);
        assert!(r.iter().all(|v| v.abs() <= 1e-10), "{r:?}");
    }

    #[test]
    fn residuals_small_everywhere() {
        for lambda in [1.0, 1000.0] {
            let e = ExactSolution::new(&Parameters { lambda, ..Default::default() }).unwrap();
            assert!(max_pde_residual(&e, 500) <= 1e-10);
        }
    }

    #[test]
    fn rejects_outside_family() {
        assert!(ExactSolution::new(&Parameters { storage: 0.1, ..Default::default() }).is_err());
        assert!(ExactSolution::new(&Parameters { biot_willis: 0.9, ..Default::default() }).is_err());
        let k = Parameters { permeability: [[2.0, 0.0], [0.0, 2.0]], ..Default::default() };
        assert!(ExactSolution::new(&k).is_err());
    }

    #[test]
    fn boundary_values_of_exact_fields() {
        let e = exact();
        for s in [0.1, 0.37, 0.8] {
            for (x, n, tau) in [
                ([0.0, s], [-1.0, 0.0], [0.0, -1.0]),
                ([1.0, s], [1.0, 0.0], [0.0, 1.0]),
                ([s, 0.0], [0.0, -1.0], [1.0, 0.0]),
                ([s, 1.0], [0.0, 1.0], [-1.0, 0.0]),
            ] {
                let t = 0.3;
                assert!(e.pressure(x, t).abs() < 1e-15);
                assert!(dot2(e.displacement(x, t), tau).abs() < 1e-15);
                assert!(dot2(e.traction(x, t, n), n).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn interpolated_state_at_zero_time_has_zero_error() {
        let e = exact();
        let disc = Discretization::new(e.problem(Parameters::default()).unwrap(), 2, 1).unwrap();
        let state = BiotState::zero(&disc, 0.0);
        let r = compute_errors(&disc, &state, &e).unwrap();
        for n in Norm::ALL {
            assert!(n.of(&r) < 1e-15, "{}", n.name());
        }
    }

    #[test]
    fn pressure_perturbation_on_one_cell() {
        let e = exact();
        let disc = Discretization::new(e.problem(Parameters::default()).unwrap(), 2, 1).unwrap();
        let mut state = BiotState::zero(&disc, 0.0);
        let c = 0.3;
        for &d in disc.pressure_space().cell_dofs(3) {
            state.p[d] = c;
        }
        let r = compute_errors(&disc, &state, &e).unwrap();
        let area = disc.mesh().cell_area();
        assert!((r.p * r.p - c * c * area).abs() < 1e-14);
    }

    #[test]
    fn continuous_field_has_no_jump_contribution() {
        let e = exact();
        let disc = Discretization::new(e.problem(Parameters::default()).unwrap(), 2, 2).unwrap();
        let mut state = BiotState::zero(&disc, 0.0);
        // tangential trace zero on every side and continuous
        state.u = disc
            .displacement_space()
            .interpolate_vector(|x| [x[1] * (1.0 - x[1]), x[0] * (1.0 - x[0])]);
        let r = compute_errors(&disc, &state, &e).unwrap();
        // ∫ |∇u|² = ∫ (1 − 2x)² + (1 − 2y)² = 2/3
        assert!((r.u_broken * r.u_broken - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn time_step_table() {
        assert_eq!(table_time_step(1, 2), Some(0.08));
        assert_eq!(table_time_step(2, 7), Some(0.0001));
        assert_eq!(table_time_step(1, 8), None);
        assert_eq!(table_time_step(3, 2), None);
    }

    #[test]
    fn study_validation() {
        let mut c = StudyConfig::new(1, vec![3, 2]);
        assert!(convergence_study(&c).is_err());
        c.levels = vec![1, 2];
        assert!(convergence_study(&c).is_err());
        c.levels = vec![2];
        c.k = 3;
        assert!(matches!(convergence_study(&c), Err(Error::InvalidTimeStep(_))));
    }

    #[test]
    fn single_level_table_has_empty_rates() {
        let table = convergence_study(&StudyConfig::new(1, vec![2])).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.rates(Norm::P), vec![None]);
        let csv = table.to_csv();
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.lines().nth(1).unwrap().ends_with(",,,,,,,"));
        assert_eq!(table.rows[0].dofs, 352);
        assert!(table.to_svg().starts_with("<svg"));
    }

    #[test]
    fn short_study_converges() {
        let c = StudyConfig {
            end_time: 0.1,
            ..StudyConfig::new(1, vec![2, 3])
        };
        let table = convergence_study(&c).unwrap();
        assert!(table.is_monotone());
        assert!(table.last_rate(Norm::P).unwrap() > 1.0);
        assert!(table.rows.iter().all(|r| r.max_conservation_residual <= 1e-12));
    }
}
