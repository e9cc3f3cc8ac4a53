//! Monolithic one-step system in the unknown ordering `p | w | u`.
//!
//! With `σ = 1/(θΔt)` the rows read
//!
//! ```text
//! p:  σ c_s M_p p + σ α B_u u + B_w w
//! w:  M_w w − B_wᵀ p
//! u:  A_u u − α B_uᵀ p
//! ```
//!
//! Only the mass equation is θ-weighted; the Darcy and momentum rows hold at
//! the new time level. For `θ = 1` this is the backward Euler system.
//! Constrained rows and columns are replaced by the identity.

use crate::error::{Error, Result};
use crate::forms::{BiotProblem, RhsVectors, SystemBlocks};
use crate::sparse::{SparseLu, SparseMatrix, TripletBuilder};

/// Offsets of the three unknown blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockLayout {
    pub n_p: usize,
    pub n_w: usize,
    pub n_u: usize,
}

impl BlockLayout {
    pub fn total(&self) -> usize {
        self.n_p + self.n_w + self.n_u
    }

    pub fn w_offset(&self) -> usize {
        self.n_p
    }

    pub fn u_offset(&self) -> usize {
        self.n_p + self.n_w
    }

    /// Concatenates block vectors.
    pub fn join(&self, p: &[f64], w: &[f64], u: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.total());
        x.extend_from_slice(p);
        x.extend_from_slice(w);
        x.extend_from_slice(u);
        x
    }

    /// Splits a monolithic vector into `(p, w, u)`.
    pub fn split(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (p, rest) = x.split_at(self.n_p);
        let (w, u) = rest.split_at(self.n_w);
        (p.to_vec(), w.to_vec(), u.to_vec())
    }
}

/// Values at the previous time level entering the right-hand side.
#[derive(Debug, Clone, Copy)]
pub struct PreviousLevel<'a> {
    pub p: &'a [f64],
    pub w: &'a [f64],
    pub u: &'a [f64],
    /// `(f₁(tⁿ), q)`.
    pub mass_source: &'a [f64],
}

#[derive(Debug)]
pub struct BlockSystem {
    layout: BlockLayout,
    dt: f64,
    theta: f64,
    storage: f64,
    biot_willis: f64,
    constrained: Vec<bool>,
    lu: SparseLu,
}

/// Checks `Δt > 0` and `θ ∈ (0, 1]`.
pub fn validate_time_step(dt: f64, theta: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidTimeStep(format!("time step must be > 0, got {dt}")));
    }
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidTimeStep(format!("theta must lie in (0, 1], got {theta}")));
    }
    Ok(())
}

/// Composes and factorizes the one-step matrix.
pub fn compose(blocks: &SystemBlocks, problem: &BiotProblem, dt: f64, theta: f64) -> Result<BlockSystem> {
    validate_time_step(dt, theta)?;
    if problem.boundary().all_pressure_neumann() {
        return Err(Error::AllFluxBoundary);
    }
    let layout = BlockLayout {
        n_p: blocks.pressure_mass.nrows(),
        n_w: blocks.darcy_mass.nrows(),
        n_u: blocks.elasticity.nrows(),
    };
    let shapes = [
        (blocks.div_w.nrows(), layout.n_p),
        (blocks.div_w.ncols(), layout.n_w),
        (blocks.div_u.nrows(), layout.n_p),
        (blocks.div_u.ncols(), layout.n_u),
        (blocks.w_constrained.len(), layout.n_w),
        (blocks.u_constrained.len(), layout.n_u),
    ];
    for (got, expected) in shapes {
        if got != expected {
            return Err(Error::DimensionMismatch { expected, got });
        }
    }

    let p = problem.params();
    let sigma = 1.0 / (theta * dt);
    let (ow, ou) = (layout.w_offset(), layout.u_offset());
    let mut constrained = vec![false; layout.n_p];
    constrained.extend_from_slice(&blocks.w_constrained);
    constrained.extend_from_slice(&blocks.u_constrained);

    let mut b = TripletBuilder::new(layout.total(), layout.total());
    b.add_block(0, 0, &blocks.pressure_mass, sigma * p.storage);
    b.add_block(0, ou, &blocks.div_u, sigma * p.biot_willis);
    b.add_block(0, ow, &blocks.div_w, 1.0);
    b.add_block(ow, ow, &blocks.darcy_mass, 1.0);
    b.add_block_transposed(ow, 0, &blocks.div_w, -1.0);
    b.add_block(ou, ou, &blocks.elasticity, 1.0);
    b.add_block_transposed(ou, 0, &blocks.div_u, -p.biot_willis);
    let raw = b.build();

    let mut b = TripletBuilder::new(layout.total(), layout.total());
    for (i, j, v) in raw.iter() {
        if !constrained[i] && !constrained[j] && v != 0.0 {
            b.add(i, j, v);
        }
    }
    for (i, _) in constrained.iter().enumerate().filter(|(_, c)| **c) {
        b.add(i, i, 1.0);
    }
    let lu = SparseLu::factor(b.build())?;

    Ok(BlockSystem {
        layout,
        dt,
        theta,
        storage: p.storage,
        biot_willis: p.biot_willis,
        constrained,
        lu,
    })
}

impl BlockSystem {
    pub fn layout(&self) -> BlockLayout {
        self.layout
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn matrix(&self) -> &SparseMatrix {
        self.lu.matrix()
    }

    pub fn constrained(&self) -> &[bool] {
        &self.constrained
    }

    /// Right-hand side for the step to `tⁿ⁺¹` given loads at `tⁿ⁺¹` and the
    /// previous level.
    pub fn rhs(&self, blocks: &SystemBlocks, next: &RhsVectors, prev: &PreviousLevel) -> Result<Vec<f64>> {
        let l = self.layout;
        let check = |got: usize, expected: usize| {
            if got == expected {
                Ok(())
            } else {
                Err(Error::DimensionMismatch { expected, got })
            }
        };
        check(next.mass.len(), l.n_p)?;
        check(next.darcy.len(), l.n_w)?;
        check(next.momentum.len(), l.n_u)?;
        check(prev.p.len(), l.n_p)?;
        check(prev.w.len(), l.n_w)?;
        check(prev.u.len(), l.n_u)?;
        check(prev.mass_source.len(), l.n_p)?;

        let sigma = 1.0 / (self.theta * self.dt);
        let explicit = (1.0 - self.theta) / self.theta;
        let mp = blocks.pressure_mass.matvec(prev.p);
        let bu = blocks.div_u.matvec(prev.u);
        let mut row_p = next.mass.clone();
        if explicit != 0.0 {
            let bw = blocks.div_w.matvec(prev.w);
            for i in 0..l.n_p {
                row_p[i] += explicit * (prev.mass_source[i] - bw[i]);
            }
        }
        for i in 0..l.n_p {
            row_p[i] += sigma * (self.storage * mp[i] + self.biot_willis * bu[i]);
        }
        let mut b = l.join(&row_p, &next.darcy, &next.momentum);
        for (v, c) in b.iter_mut().zip(&self.constrained) {
            if *c {
                *v = 0.0;
            }
        }
        Ok(b)
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.lu.solve(rhs)
    }

    pub fn relative_residual(&self, x: &[f64], rhs: &[f64]) -> f64 {
        self.lu.relative_residual(x, rhs)
    }
}
