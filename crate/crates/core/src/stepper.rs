//! Time integration and conservation audits.

use std::io::{self, Write};
use std::sync::{Arc, OnceLock};

use crate::element::Family;
use crate::error::{Error, Result};
use crate::fespace::{project_l2, Constraint, FESpace};
use crate::forms::{
    apply_ah_to_field, assemble_darcy_rhs, assemble_mass_source, assemble_rhs, BiotProblem,
    SystemBlocks,
};
use crate::linalg::{compose, BlockLayout, BlockSystem, PreviousLevel};
use crate::mesh::Mesh;
use crate::quadrature::QuadratureRule;
use crate::sparse::{SparseLu, SparseMatrix, TripletBuilder};

/// Mesh, spaces and assembled matrices of one problem instance.
#[derive(Debug)]
pub struct Discretization {
    problem: BiotProblem,
    mesh: Arc<Mesh>,
    q: FESpace,
    w: FESpace,
    v: FESpace,
    blocks: SystemBlocks,
}

/// The three spaces `(Q_h, W_h, V_h)` on a tagged mesh, without assembly.
pub fn build_spaces(mesh: &Arc<Mesh>, k: usize) -> Result<(FESpace, FESpace, FESpace)> {
    Ok((
        FESpace::new(mesh.clone(), Family::DiscontinuousQ, k, Constraint::None)?,
        FESpace::new(mesh.clone(), Family::RaviartThomas, k, Constraint::NoFlux)?,
        FESpace::new(mesh.clone(), Family::RaviartThomas, k, Constraint::DisplacementDirichlet)?,
    ))
}

/// `dim Q_h + dim W_h + dim V_h` on level `level`, constrained dofs included.
pub fn system_dofs(level: i64, k: usize) -> Result<usize> {
    let mesh = Mesh::cartesian(level)?;
    let rt = FESpace::new(Arc::new(mesh.clone()), Family::RaviartThomas, k, Constraint::None)?;
    let dq = FESpace::new(Arc::new(mesh), Family::DiscontinuousQ, k, Constraint::None)?;
    Ok(2 * rt.n_dofs() + dq.n_dofs())
}

impl Discretization {
    pub fn new(problem: BiotProblem, level: i64, k: usize) -> Result<Self> {
        let mesh = Arc::new(Mesh::cartesian(level)?.classify_boundary(problem.boundary())?);
        let (q, w, v) = build_spaces(&mesh, k)?;
        let blocks = SystemBlocks::assemble(&problem, &q, &w, &v)?;
        Ok(Self {
            problem,
            mesh,
            q,
            w,
            v,
            blocks,
        })
    }

    pub fn problem(&self) -> &BiotProblem {
        &self.problem
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.q.degree()
    }

    pub fn pressure_space(&self) -> &FESpace {
        &self.q
    }

    pub fn flux_space(&self) -> &FESpace {
        &self.w
    }

    pub fn displacement_space(&self) -> &FESpace {
        &self.v
    }

    pub fn blocks(&self) -> &SystemBlocks {
        &self.blocks
    }

    pub fn layout(&self) -> BlockLayout {
        BlockLayout {
            n_p: self.q.n_dofs(),
            n_w: self.w.n_dofs(),
            n_u: self.v.n_dofs(),
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.layout().total()
    }

    /// `w` solving the Darcy row `M_w w − B_wᵀ p = ℓ_w(t)` for given `p`.
    pub fn darcy_flux(&self, p: &[f64], t: f64) -> Result<Vec<f64>> {
        let lu = constrained_lu(&self.blocks.darcy_mass, &self.blocks.w_constrained)?;
        let mut rhs = assemble_darcy_rhs(&self.problem, &self.w, t)?;
        let bt = self.blocks.div_w.matvec_transposed(p);
        for (r, b) in rhs.iter_mut().zip(bt) {
            *r += b;
        }
        zero_masked(&mut rhs, &self.blocks.w_constrained);
        lu.solve(&rhs)
    }

    /// Coefficients of the `Q_h` projection of `div z` for `z` in the
    /// displacement (`displacement = true`) or flux space.
    fn projected_div(&self, mass: &SparseLu, z: &[f64], displacement: bool) -> Result<Vec<f64>> {
        let b = if displacement {
            &self.blocks.div_u
        } else {
            &self.blocks.div_w
        };
        mass.solve(&b.matvec(z))
    }
}

fn zero_masked(x: &mut [f64], mask: &[bool]) {
    for (v, m) in x.iter_mut().zip(mask) {
        if *m {
            *v = 0.0;
        }
    }
}

/// LU of `a` with constrained rows and columns replaced by the identity.
fn constrained_lu(a: &SparseMatrix, mask: &[bool]) -> Result<SparseLu> {
    let mut b = TripletBuilder::new(a.nrows(), a.ncols());
    for (i, j, v) in a.iter() {
        if !mask[i] && !mask[j] {
            b.add(i, j, v);
        }
    }
    for (i, _) in mask.iter().enumerate().filter(|(_, m)| **m) {
        b.add(i, i, 1.0);
    }
    SparseLu::factor(b.build())
}

/// Discrete solution at one time level. `w` is unset at the initial time
/// until a θ-step or an audit needs it.
#[derive(Debug, Clone, PartialEq)]
pub struct BiotState {
    pub time: f64,
    pub p: Vec<f64>,
    pub w: Option<Vec<f64>>,
    pub u: Vec<f64>,
}

impl BiotState {
    pub fn zero(disc: &Discretization, time: f64) -> Self {
        let l = disc.layout();
        Self {
            time,
            p: vec![0.0; l.n_p],
            w: Some(vec![0.0; l.n_w]),
            u: vec![0.0; l.n_u],
        }
    }

    /// Writes `time,field,index,value` lines.
    pub fn write_snapshot<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "time,field,index,value")?;
        let mut field = |name: &str, v: &[f64]| -> io::Result<()> {
            for (i, x) in v.iter().enumerate() {
                writeln!(out, "{:.16e},{name},{i},{x:.16e}", self.time)?;
            }
            Ok(())
        };
        field("p", &self.p)?;
        if let Some(w) = &self.w {
            field("w", w)?;
        }
        field("u", &self.u)
    }
}

/// `p_h(0)` as the L² projection of `p₀`; `u_h(0)` as the elliptic projection
/// `a_h(u_h(0), v) = a_h(u₀, v)`.
pub fn initial_state(disc: &Discretization, t0: f64) -> Result<BiotState> {
    let data = disc.problem.data();
    let p = project_l2(&disc.q, |x| data.initial_pressure(x));
    let mut rhs = apply_ah_to_field(
        &disc.problem,
        &disc.v,
        |x| data.initial_displacement(x),
        |x| data.initial_displacement_gradient(x),
    )?;
    zero_masked(&mut rhs, &disc.blocks.u_constrained);
    let lu = constrained_lu(&disc.blocks.elasticity, &disc.blocks.u_constrained)?;
    let u = lu.solve(&rhs)?;
    Ok(BiotState {
        time: t0,
        p,
        w: None,
        u,
    })
}

/// Number of steps and the step size that land exactly on `span`, using the
/// largest step not exceeding `dt`.
pub fn steps_to_reach(span: f64, dt: f64) -> Result<(usize, f64)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidTimeStep(format!("time step must be > 0, got {dt}")));
    }
    if !(span >= 0.0 && span.is_finite()) {
        return Err(Error::InvalidTimeStep(format!("time span must be >= 0, got {span}")));
    }
    let n = (span / dt * (1.0 - 1e-12)).ceil() as usize;
    if n == 0 {
        return Ok((0, dt));
    }
    Ok((n, span / n as f64))
}

/// Diagnostics of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub time: f64,
    /// `‖Ax − b‖₂ / ‖b‖₂` of the monolithic solve.
    pub solver_residual: f64,
    /// Max over quadrature points of the discrete mass-equation residual in
    /// `Q_h`, relative to the largest term in that equation.
    pub conservation_residual: f64,
    /// `‖r_h‖_Ω` of the same residual field.
    pub conservation_l2: f64,
}

/// Fixed-step integrator with a cached factorization.
#[derive(Debug)]
pub struct Stepper<'a> {
    disc: &'a Discretization,
    system: BlockSystem,
    pressure_mass: SparseLu,
    darcy: OnceLock<SparseLu>,
}

impl<'a> Stepper<'a> {
    pub fn new(disc: &'a Discretization, dt: f64, theta: f64) -> Result<Self> {
        let system = compose(&disc.blocks, &disc.problem, dt, theta)?;
        let pressure_mass = SparseLu::factor(disc.blocks.pressure_mass.clone())?;
        Ok(Self {
            disc,
            system,
            pressure_mass,
            darcy: OnceLock::new(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.system.dt()
    }

    pub fn theta(&self) -> f64 {
        self.system.theta()
    }

    pub fn system(&self) -> &BlockSystem {
        &self.system
    }

    /// Fills `state.w` from the Darcy equation when it is unset.
    pub fn ensure_flux(&self, state: &mut BiotState) -> Result<()> {
        if state.w.is_none() {
            let d = self.disc;
            let lu = match self.darcy.get() {
                Some(lu) => lu,
                None => {
                    let lu = constrained_lu(&d.blocks.darcy_mass, &d.blocks.w_constrained)?;
                    self.darcy.get_or_init(|| lu)
                }
            };
            let mut rhs = assemble_darcy_rhs(&d.problem, &d.w, state.time)?;
            let bt = d.blocks.div_w.matvec_transposed(&state.p);
            for (r, b) in rhs.iter_mut().zip(bt) {
                *r += b;
            }
            zero_masked(&mut rhs, &d.blocks.w_constrained);
            state.w = Some(lu.solve(&rhs)?);
        }
        Ok(())
    }

    /// Advances `state` by one step.
    pub fn step(&self, state: &BiotState) -> Result<(BiotState, StepReport)> {
        let d = self.disc;
        let theta = self.theta();
        let t_new = state.time + self.dt();
        let mut prev = state.clone();
        if theta < 1.0 {
            self.ensure_flux(&mut prev)?;
        }
        let zeros;
        let w_prev = match &prev.w {
            Some(w) => w.as_slice(),
            None => {
                zeros = vec![0.0; d.w.n_dofs()];
                zeros.as_slice()
            }
        };
        let next = assemble_rhs(&d.problem, t_new, &d.q, &d.w, &d.v)?;
        let source_prev = if theta < 1.0 {
            assemble_mass_source(&d.problem, &d.q, state.time)
        } else {
            vec![0.0; d.q.n_dofs()]
        };
        let rhs = self.system.rhs(
            &d.blocks,
            &next,
            &PreviousLevel {
                p: &prev.p,
                w: w_prev,
                u: &prev.u,
                mass_source: &source_prev,
            },
        )?;
        let x = self.system.solve(&rhs)?;
        let solver_residual = if rhs.iter().all(|v| *v == 0.0) {
            0.0
        } else {
            self.system.relative_residual(&x, &rhs)
        };
        let (p, w, u) = self.system.layout().split(&x);
        let new = BiotState {
            time: t_new,
            p,
            w: Some(w),
            u,
        };
        let (conservation_residual, conservation_l2) =
            self.conservation_residual(&prev, &new, &source_prev, &next.mass)?;
        Ok((
            new,
            StepReport {
                time: t_new,
                solver_residual,
                conservation_residual,
                conservation_l2,
            },
        ))
    }

    /// Residual of
    /// `σ(c_s δp + α Π div δu) + Π div wⁿ⁺¹ − f̃ⁿ⁺¹ + ((1−θ)/θ)(Π div wⁿ − f̃ⁿ)`
    /// with `σ = 1/(θΔt)`, evaluated at quadrature points.
    fn conservation_residual(
        &self,
        prev: &BiotState,
        new: &BiotState,
        source_prev: &[f64],
        source_next: &[f64],
    ) -> Result<(f64, f64)> {
        let d = self.disc;
        let params = d.problem.params();
        let theta = self.theta();
        let sigma = 1.0 / (theta * self.dt());
        let explicit = (1.0 - theta) / theta;
        let mass = &self.pressure_mass;

        let du: Vec<f64> = new.u.iter().zip(&prev.u).map(|(a, b)| a - b).collect();
        let div_du = d.projected_div(mass, &du, true)?;
        let div_w = d.projected_div(mass, new.w.as_deref().unwrap_or_default(), false)?;
        let f_next = mass.solve(source_next)?;
        let mut terms: Vec<Vec<f64>> = vec![
            new.p.iter().zip(&prev.p).map(|(a, b)| sigma * params.storage * (a - b)).collect(),
            div_du.iter().map(|v| sigma * params.biot_willis * v).collect(),
            div_w,
            f_next.iter().map(|v| -v).collect(),
        ];
        if explicit != 0.0 {
            if let Some(w) = &prev.w {
                let div_w_prev = d.projected_div(mass, w, false)?;
                terms.push(div_w_prev.iter().map(|v| explicit * v).collect());
            }
            let f_prev = mass.solve(source_prev)?;
            terms.push(f_prev.iter().map(|v| -explicit * v).collect());
        }
        let n = d.q.n_dofs();
        let r: Vec<f64> = (0..n).map(|i| terms.iter().map(|t| t[i]).sum()).collect();

        let rule = QuadratureRule::for_degree(d.q.degree());
        let mut max_r: f64 = 0.0;
        let mut scale: f64 = 0.0;
        let mut l2 = 0.0;
        for cell in 0..d.mesh.num_cells() {
            let tab = d.q.tabulate(cell, &rule);
            for qp in 0..tab.n_points() {
                let rv = tab.eval_scalar(&r, qp);
                max_r = max_r.max(rv.abs());
                l2 += tab.jxw[qp] * rv * rv;
                for t in &terms {
                    scale = scale.max(tab.eval_scalar(t, qp).abs());
                }
            }
        }
        let rel = if scale > 0.0 { max_r / scale } else { max_r };
        Ok((rel, l2.sqrt()))
    }

    /// Steps from `state` to `t_end`; the step size must divide the span.
    /// Returns every state including the initial one (with `w` filled in when
    /// `θ < 1`) and one report per step.
    pub fn run(&self, state: BiotState, t_end: f64) -> Result<(Vec<BiotState>, Vec<StepReport>)> {
        let span = t_end - state.time;
        let n = (span / self.dt()).round();
        if !(n >= 0.0) || (n * self.dt() - span).abs() > 1e-9 * span.abs().max(1.0) {
            return Err(Error::InvalidTimeStep(format!(
                "time step {} does not divide the interval of length {span}",
                self.dt()
            )));
        }
        let mut first = state;
        if self.theta() < 1.0 {
            self.ensure_flux(&mut first)?;
        }
        let mut history = vec![first];
        let mut reports = Vec::with_capacity(n as usize);
        for i in 0..n as usize {
            let (mut next, report) = self.step(&history[i])?;
            if i + 1 == n as usize {
                next.time = t_end;
            }
            history.push(next);
            reports.push(report);
        }
        Ok((history, reports))
    }
}

/// One row of the mass ledger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassEntry {
    pub time: f64,
    /// `‖Δm(t)‖_Ω`.
    pub delta_m: f64,
    /// `‖r_h‖_Ω` of the step ending at `time` (zero for the initial entry).
    pub step_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassLedger {
    pub entries: Vec<MassEntry>,
    /// `Δm` at the final time, in `Q_h` coefficients.
    pub final_delta_m: Vec<f64>,
}

impl MassLedger {
    pub fn final_norm(&self) -> f64 {
        self.entries.last().map_or(0.0, |e| e.delta_m)
    }
}

/// `Δmⁿ = mⁿ − m⁰ − Δt Σ [θ(Π div wʲ⁺¹ − f̃ʲ⁺¹) + (1−θ)(Π div wʲ − f̃ʲ)]` with
/// `m = c_s p + α Π div u`.
pub fn mass_audit(disc: &Discretization, history: &[BiotState], theta: f64) -> Result<MassLedger> {
    if history.is_empty() {
        return Err(Error::NonUniformHistory("empty history".into()));
    }
    let dt = if history.len() > 1 {
        history[1].time - history[0].time
    } else {
        0.0
    };
    for pair in history.windows(2) {
        let step = pair[1].time - pair[0].time;
        if !(step > 0.0) || (step - dt).abs() > 1e-9 * dt {
            return Err(Error::NonUniformHistory(format!(
                "step {step} at t = {} differs from {dt}",
                pair[0].time
            )));
        }
    }

    let params = disc.problem.params();
    let mass = SparseLu::factor(disc.blocks.pressure_mass.clone())?;
    let n = disc.q.n_dofs();
    let flux = |s: &BiotState| -> Result<Vec<f64>> {
        let w = match &s.w {
            Some(w) => w.clone(),
            None if theta < 1.0 => disc.darcy_flux(&s.p, s.time)?,
            None => vec![0.0; disc.w.n_dofs()],
        };
        disc.projected_div(&mass, &w, false)
    };
    let content = |s: &BiotState| -> Result<Vec<f64>> {
        let div_u = disc.projected_div(&mass, &s.u, true)?;
        Ok((0..n).map(|i| params.storage * s.p[i] + params.biot_willis * div_u[i]).collect())
    };
    let source = |t: f64| mass.solve(&assemble_mass_source(&disc.problem, &disc.q, t));
    let l2 = |v: &[f64]| crate::fespace::l2_norm_scalar(&disc.q, v);

    let m0 = content(&history[0])?;
    let mut integral = vec![0.0; n];
    let mut g_prev: Vec<f64> = {
        let div = flux(&history[0])?;
        let f = source(history[0].time)?;
        div.iter().zip(&f).map(|(a, b)| a - b).collect()
    };
    let mut entries = vec![MassEntry {
        time: history[0].time,
        delta_m: 0.0,
        step_residual: 0.0,
    }];
    let mut m_prev = m0.clone();
    let mut delta = vec![0.0; n];
    for s in &history[1..] {
        let div = flux(s)?;
        let f = source(s.time)?;
        let g: Vec<f64> = div.iter().zip(&f).map(|(a, b)| a - b).collect();
        let m = content(s)?;
        let mut step_r = vec![0.0; n];
        for i in 0..n {
            let incr = dt * (theta * g[i] + (1.0 - theta) * g_prev[i]);
            integral[i] += incr;
            delta[i] = m[i] - m0[i] + integral[i];
            step_r[i] = (m[i] - m_prev[i] + incr) / (theta * dt);
        }
        entries.push(MassEntry {
            time: s.time,
            delta_m: l2(&delta),
            step_residual: l2(&step_r),
        });
        g_prev = g;
        m_prev = m;
    }
    Ok(MassLedger {
        entries,
        final_delta_m: delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::{BiotData, Parameters, ZeroData};
    use crate::mesh::{BoundarySpec, DisplacementBc, PressureBc};

    fn disc(data: Arc<dyn BiotData>, params: Parameters, level: i64, k: usize) -> Discretization {
        let spec = BoundarySpec::uniform(PressureBc::Dirichlet, DisplacementBc::Slip);
        let problem = BiotProblem::new(params, spec, data).unwrap();
        Discretization::new(problem, level, k).unwrap()
    }

    struct Source;
    impl BiotData for Source {
        fn f1(&self, x: [f64; 2], t: f64) -> f64 {
            (x[0] * 3.0).sin() * (1.0 + x[1]) * (1.0 + t)
        }
        fn f2(&self, x: [f64; 2], t: f64) -> [f64; 2] {
            [x[1] * t, -x[0]]
        }
    }

    #[test]
    fn steps_land_on_end_time() {
        assert_eq!(steps_to_reach(0.5, 0.1).unwrap(), (5, 0.1));
        let (n, dt) = steps_to_reach(0.5, 0.08).unwrap();
        assert_eq!(n, 7);
        assert!((dt * n as f64 - 0.5).abs() < 1e-15);
        assert!(steps_to_reach(0.5, 0.0).is_err());
        assert_eq!(steps_to_reach(0.0, 0.1).unwrap().0, 0);
    }

    #[test]
    fn system_dofs_match_reference_counts() {
        assert_eq!(system_dofs(2, 1).unwrap(), 352);
        assert_eq!(system_dofs(3, 1).unwrap(), 1344);
        assert_eq!(system_dofs(2, 2).unwrap(), 768);
        assert_eq!(system_dofs(3, 2).unwrap(), 2976);
    }

    #[test]
    fn zero_data_keeps_zero_state() {
        let d = disc(Arc::new(ZeroData), Parameters::default(), 2, 1);
        let s0 = initial_state(&d, 0.0).unwrap();
        assert!(s0.p.iter().chain(&s0.u).all(|v| *v == 0.0));
        for theta in [1.0, 0.501] {
            let st = Stepper::new(&d, 0.1, theta).unwrap();
            let (s1, rep) = st.step(&s0).unwrap();
            let max = s1
                .p
                .iter()
                .chain(s1.w.as_ref().unwrap())
                .chain(&s1.u)
                .fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(max <= 1e-12);
            assert_eq!(rep.conservation_residual, 0.0);
        }
    }

    #[test]
    fn pointwise_conservation_each_step() {
        for (c_s, alpha, lambda) in [(0.0, 1.0, 1.0), (0.1, 0.9, 1000.0)] {
            let params = Parameters {
                storage: c_s,
                biot_willis: alpha,
                lambda,
                ..Default::default()
            };
            let d = disc(Arc::new(Source), params, 2, 1);
            for theta in [1.0, 0.501] {
                let st = Stepper::new(&d, 0.1, theta).unwrap();
                let s0 = initial_state(&d, 0.0).unwrap();
                let (_, reports) = st.run(s0, 0.3).unwrap();
                for r in reports {
                    assert!(r.solver_residual <= 1e-11);
                    assert!(r.conservation_residual <= 1e-12, "{r:?}");
                }
            }
        }
    }

    #[test]
    fn mass_audit_closes() {
        let params = Parameters {
            storage: 0.1,
            biot_willis: 0.9,
            ..Default::default()
        };
        let d = disc(Arc::new(Source), params, 2, 1);
        for theta in [1.0, 0.501] {
            let st = Stepper::new(&d, 0.1, theta).unwrap();
            let (hist, _) = st.run(initial_state(&d, 0.0).unwrap(), 0.5).unwrap();
            let ledger = mass_audit(&d, &hist, theta).unwrap();
            assert_eq!(ledger.entries.len(), 6);
            assert!(ledger.final_norm() <= 1e-12, "{}", ledger.final_norm());
            assert!(ledger.entries.windows(2).all(|e| e[0].time < e[1].time));
        }
    }

    #[test]
    fn audit_with_wrong_theta_does_not_close() {
        let d = disc(Arc::new(Source), Parameters::default(), 2, 1);
        let st = Stepper::new(&d, 0.1, 0.501).unwrap();
        let (hist, _) = st.run(initial_state(&d, 0.0).unwrap(), 0.3).unwrap();
        assert!(mass_audit(&d, &hist, 1.0).unwrap().final_norm() > 1e-8);
    }

    #[test]
    fn audit_rejects_nonuniform_history() {
        let d = disc(Arc::new(ZeroData), Parameters::default(), 1, 1);
        let mk = |t| BiotState::zero(&d, t);
        let hist = vec![mk(0.0), mk(0.1), mk(0.3)];
        assert!(matches!(mass_audit(&d, &hist, 1.0), Err(Error::NonUniformHistory(_))));
        let ok = vec![mk(0.0), mk(0.1), mk(0.2)];
        assert_eq!(mass_audit(&d, &ok, 1.0).unwrap().final_norm(), 0.0);
    }

    #[test]
    fn run_rejects_non_dividing_step() {
        let d = disc(Arc::new(ZeroData), Parameters::default(), 1, 1);
        let st = Stepper::new(&d, 0.08, 1.0).unwrap();
        assert!(st.run(initial_state(&d, 0.0).unwrap(), 0.5).is_err());
    }

    struct Steady;
    impl BiotData for Steady {
        fn initial_pressure(&self, x: [f64; 2]) -> f64 {
            x[0] - 0.5
        }
        fn pressure_boundary(&self, x: [f64; 2], _t: f64) -> f64 {
            x[0] - 0.5
        }
        fn f2(&self, _x: [f64; 2], _t: f64) -> [f64; 2] {
            // momentum balance for u = 0 with p = x − 1/2
            [1.0, 0.0]
        }
        fn traction(&self, x: [f64; 2], _t: f64, n: [f64; 2]) -> [f64; 2] {
            let p = x[0] - 0.5;
            [-p * n[0], -p * n[1]]
        }
    }

    #[test]
    fn frozen_data_keeps_steady_state() {
        // p = x − 1/2, w = (−1, 0), u = 0 solves the problem with f₁ = 0
        let d = disc(Arc::new(Steady), Parameters::default(), 2, 1);
        let s0 = initial_state(&d, 0.0).unwrap();
        let st = Stepper::new(&d, 0.1, 1.0).unwrap();
        let (hist, _) = st.run(s0.clone(), 0.3).unwrap();
        let last = hist.last().unwrap();
        for (a, b) in last.p.iter().zip(&s0.p) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(last.u.iter().all(|v| v.abs() < 1e-10));
        let w_exact = d.flux_space().interpolate_vector(|_| [-1.0, 0.0]);
        for (a, b) in last.w.as_ref().unwrap().iter().zip(&w_exact) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    struct LinearDisplacement;
    impl BiotData for LinearDisplacement {
        fn initial_displacement(&self, x: [f64; 2]) -> [f64; 2] {
            [x[0] - 0.5, 0.5 - x[1]]
        }
        fn initial_displacement_gradient(&self, _x: [f64; 2]) -> [[f64; 2]; 2] {
            [[1.0, 0.0], [0.0, -1.0]]
        }
    }

    #[test]
    fn initial_projection_reproduces_members() {
        let d = disc(Arc::new(LinearDisplacement), Parameters::default(), 2, 1);
        let s0 = initial_state(&d, 0.0).unwrap();
        let expect = d.displacement_space().interpolate_vector(|x| [x[0] - 0.5, 0.5 - x[1]]);
        for (a, b) in s0.u.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn theta_one_is_backward_euler() {
        let d = disc(Arc::new(Source), Parameters::default(), 2, 1);
        let s0 = initial_state(&d, 0.0).unwrap();
        let (a, _) = Stepper::new(&d, 0.1, 1.0).unwrap().step(&s0).unwrap();
        let (b, _) = Stepper::new(&d, 0.1, 1.0).unwrap().step(&s0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn snapshot_lists_every_coefficient() {
        let d = disc(Arc::new(ZeroData), Parameters::default(), 1, 1);
        let s = BiotState::zero(&d, 0.25);
        let mut buf = Vec::new();
        s.write_snapshot(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + d.n_dofs());
        assert!(text.lines().nth(1).unwrap().starts_with("2.5000000000000000e-1,p,0,"));
    }
}
