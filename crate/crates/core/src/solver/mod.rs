//! Implicit variational time stepping for the regularized Cauchy-Dirichlet problem.
//!
//! Each step minimizes
//! `E(v) = Σₓ |v − uᵏ|²/(2Δt) hⁿ + Σ_cells F_ε(D⁺v) hⁿ`
//! over interior nodes with the lateral values taken from the reference field.

mod newton;
mod sweep;
mod weak;

pub use newton::implicit_step;
pub use sweep::{epsilon_sweep, SweepEntry};
pub use weak::weak_residual;

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::params::ProblemParams;

/// Regularized problem on `Ω′ × J` with lateral and initial values from `reference`.
#[derive(Clone, Debug)]
pub struct CauchyDirichletProblem {
    params: ProblemParams,
    reference: Field,
}

impl CauchyDirichletProblem {
    pub fn new(params: ProblemParams, reference: Field) -> Result<Self> {
        if params.n() != reference.grid().n() {
            return Err(Error::GridMismatch(format!(
                "parameters are {}-dimensional, reference data is {}-dimensional",
                params.n(),
                reference.grid().n()
            )));
        }
        if !params.is_regularized() && !params.is_heat_mode() {
            return Err(Error::param(
                "epsilon",
                "epsilon = 0 is only solvable in the heat mode p = 2, delta = 0",
            ));
        }
        Ok(CauchyDirichletProblem { params, reference })
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn grid(&self) -> &Grid {
        self.reference.grid()
    }

    pub fn reference(&self) -> &Field {
        &self.reference
    }

    /// Same data, different regularization level.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        CauchyDirichletProblem::new(self.params.with_epsilon(epsilon)?, self.reference.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Target for the max-norm of the step residual `(v − uᵏ) − Δt div_h D_ξF(D⁺v)`.
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    /// Relative residual target of the inner conjugate gradient solve.
    pub linear_tol: f64,
    pub max_linear_iters: usize,
    /// Backtracking factor of the line search.
    pub damping: f64,
    /// Sequential reductions, so repeated runs agree bit for bit.
    pub determinism_mode: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            newton_tol: 1e-10,
            max_newton_iters: 50,
            linear_tol: 1e-12,
            max_linear_iters: 20_000,
            damping: 0.5,
            determinism_mode: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0 && self.newton_tol.is_finite()) {
            return Err(Error::param("newton_tol", "must be positive"));
        }
        if !(self.linear_tol > 0.0 && self.linear_tol < 1.0) {
            return Err(Error::param("linear_tol", "must lie in (0, 1)"));
        }
        if self.max_newton_iters < 1 {
            return Err(Error::param("max_newton_iters", "must be at least 1"));
        }
        if self.max_linear_iters < 1 {
            return Err(Error::param("max_linear_iters", "must be at least 1"));
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::param("damping", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Per-step solver record. Energies are in unscaled units `Σ[|v−uᵏ|²/(2Δt) + F(D⁺v)]hⁿ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Index of the time slice this step produced.
    pub step: usize,
    pub newton_iterations: usize,
    pub cg_iterations: usize,
    pub residual: f64,
    pub energy_before: f64,
    pub energy_after: f64,
    /// Step energy after every accepted Newton iterate, starting from the initial guess.
    pub energy_trace: Vec<f64>,
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl StepRecord {
    /// Whether the energy never increased across accepted iterates, up to rounding.
    pub fn energy_monotone(&self) -> bool {
        self.energy_trace
            .windows(2)
            .all(|w| w[1] <= w[0] + 1e-13 * w[0].abs().max(1.0))
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub params: ProblemParams,
    pub solution: Field,
    pub diagnostics: Vec<StepRecord>,
    pub newton_tol: f64,
}

impl SolveResult {
    pub fn grid(&self) -> &Grid {
        self.solution.grid()
    }

    pub fn is_converged(&self) -> bool {
        self.diagnostics.len() == self.grid().time_steps()
            && self.diagnostics.iter().all(|d| d.residual <= self.newton_tol)
    }

    pub(crate) fn require_converged(&self) -> Result<()> {
        if self.is_converged() {
            Ok(())
        } else {
            Err(Error::NotConverged(
                "some step residual exceeds the Newton tolerance".into(),
            ))
        }
    }

    /// One JSON object per time step.
    pub fn write_diagnostics_jsonl(&self, mut out: impl Write) -> Result<()> {
        for record in &self.diagnostics {
            serde_json::to_writer(&mut out, record)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn total_wall_time_s(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.wall_time_s).sum()
    }
}

/// Marches every step of the problem's grid from the initial slice of the reference data.
pub fn solve(problem: &CauchyDirichletProblem, config: &SolverConfig) -> Result<SolveResult> {
    config.validate()?;
    let grid = problem.grid().clone();
    let mut solution = Field::zeros(grid.clone());
    solution
        .slice_mut(0)
        .copy_from_slice(problem.reference().slice(0));
    let mut workspace = newton::Workspace::new(&grid);
    let mut diagnostics = Vec::with_capacity(grid.time_steps());
    for k in 1..grid.slices() {
        let start = Instant::now();
        let (prev, rest) = solution.values_split(k);
        let mut record = newton::step_into(
            prev,
            rest,
            problem.reference().slice(k),
            grid.dt(),
            &grid,
            problem.params(),
            config,
            &mut workspace,
        )
        .map_err(|e| newton::with_step(e, k))?;
        record.step = k;
        record.wall_time_s = start.elapsed().as_secs_f64();
        diagnostics.push(record);
    }
    Ok(SolveResult {
        params: problem.params().clone(),
        solution,
        diagnostics,
        newton_tol: config.newton_tol,
    })
}

impl Field {
    /// Slice `k − 1` and a mutable slice `k`.
    fn values_split(&mut self, k: usize) -> (&[f64], &mut [f64]) {
        let m = self.grid().spatial_len();
        let (head, tail) = self.values_mut().split_at_mut(k * m);
        (&head[(k - 1) * m..], &mut tail[..m])
    }
}
