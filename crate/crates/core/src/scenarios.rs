//! Ready-made problems: the heat-mode product-sine benchmark and the default
//! degenerate test problem.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, SpaceCube};
use crate::params::ProblemParams;
use crate::solver::{solve, CauchyDirichletProblem, SolveResult, SolverConfig};

/// `e^{−2π²t} sin(πx₁) sin(πx₂)`, the heat flow of the product sine on the unit square.
pub fn heat_oracle(x: &[f64], t: f64) -> f64 {
    (-(x.len() as f64) * PI * PI * t).exp() * x.iter().map(|xi| (PI * xi).sin()).product::<f64>()
}

/// Heat mode on `(0,1)ⁿ × (0, t_end)` with the analytic solution as reference data.
pub fn heat_problem(n: usize, nodes: usize, t_end: f64, steps: usize) -> Result<CauchyDirichletProblem> {
    let params = ProblemParams::new(2.0, vec![0.0; n], 0.0)?;
    let grid = Grid::new(SpaceCube::new(vec![0.5; n], 0.5)?, nodes, (0.0, t_end), steps)?;
    let reference = Field::from_fn(grid, heat_oracle)?;
    CauchyDirichletProblem::new(params, reference)
}

/// Max-norm error of a heat-mode solve against [`heat_oracle`] on the final slice.
pub fn heat_final_error(result: &SolveResult) -> f64 {
    let grid = result.grid();
    let last = grid.time_steps();
    let t = grid.time(last);
    let mut x = vec![0.0; grid.n()];
    result
        .solution
        .slice(last)
        .iter()
        .enumerate()
        .map(|(node, v)| {
            grid.node_coords(node, &mut x);
            (v - heat_oracle(&x, t)).abs()
        })
        .fold(0.0, f64::max)
}

/// The default degenerate test problem: `n = 2`, `p = 3`, `δ = (1, 1)` on `(−1, 1)²`,
/// with time-independent data `a sin(πx₁) sin(πx₂) + b x₁`.
///
/// The sine bump pushes `|Du|` above and below the thresholds; the tilt `b` keeps the
/// maximal slope above the level where the Moser measure vanishes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DefaultScenario {
    pub p: f64,
    pub delta: Vec<f64>,
    pub half_side: f64,
    pub time_window: (f64, f64),
    pub nodes_per_axis: usize,
    pub time_steps: Option<usize>,
    pub amplitude: f64,
    pub tilt: f64,
    /// Regularization of the fine reference solve that plays the role of `u`.
    pub reference_epsilon: f64,
}

impl Default for DefaultScenario {
    fn default() -> Self {
        DefaultScenario {
            p: 3.0,
            delta: vec![1.0, 1.0],
            half_side: 1.0,
            time_window: (0.0, 0.25),
            nodes_per_axis: 33,
            time_steps: Some(50),
            amplitude: 0.9,
            tilt: 2.2,
            reference_epsilon: 0.0025,
        }
    }
}

impl DefaultScenario {
    pub fn n(&self) -> usize {
        self.delta.len()
    }

    pub fn params(&self, epsilon: f64) -> Result<ProblemParams> {
        ProblemParams::new(self.p, self.delta.clone(), epsilon)
    }

    pub fn grid(&self) -> Result<Grid> {
        let cube = SpaceCube::new(vec![0.0; self.n()], self.half_side)?;
        let grid = Grid::new(cube, self.nodes_per_axis, self.time_window, 1)?;
        let steps = self
            .time_steps
            .unwrap_or_else(|| grid.natural_time_steps(self.p));
        grid.with_time_steps(steps)
    }

    /// The same scenario with `h` and `Δt` halved.
    pub fn refined(&self) -> Self {
        let mut next = self.clone();
        next.nodes_per_axis = 2 * self.nodes_per_axis - 1;
        next.time_steps = self.time_steps.map(|s| 2 * s);
        next
    }

    pub fn validate(&self) -> Result<()> {
        self.params(self.reference_epsilon)?;
        self.grid()?;
        if !(self.amplitude.is_finite() && self.tilt.is_finite()) {
            return Err(Error::param("amplitude", "data coefficients must be finite"));
        }
        Ok(())
    }

    pub fn data(&self) -> Result<Field> {
        let (a, b, half) = (self.amplitude, self.tilt, self.half_side);
        Field::from_fn(self.grid()?, |x, _| {
            a * x.iter().map(|xi| (PI * xi / half).sin()).product::<f64>() + b * x[0]
        })
    }

    /// Solves with `reference_epsilon` on the raw data; the result is the reference `u`.
    pub fn reference_solution(&self, config: &SolverConfig) -> Result<SolveResult> {
        let problem = CauchyDirichletProblem::new(self.params(self.reference_epsilon)?, self.data()?)?;
        solve(&problem, config)
    }

    /// The regularized problem at `epsilon` with `reference` as data.
    pub fn problem(&self, epsilon: f64, reference: &Field) -> Result<CauchyDirichletProblem> {
        CauchyDirichletProblem::new(self.params(epsilon)?, reference.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_and_degeneracy() {
        let s = DefaultScenario::default();
        let g = s.grid().unwrap();
        assert_eq!(g.h(), 1.0 / 16.0);
        assert_eq!(g.time_steps(), 50);
        let data = s.data().unwrap();
        let grad = crate::grid::gradient(&data, 0).unwrap();
        let below = (0..g.spatial_len())
            .filter(|&i| grad.at(i).iter().all(|v| v.abs() <= 1.0))
            .count();
        let above = (0..g.spatial_len())
            .filter(|&i| grad.at(i).iter().any(|v| v.abs() > 2.0))
            .count();
        assert!(below > 0 && above > 0);
        let fine = s.refined();
        assert_eq!(fine.nodes_per_axis, 65);
        assert_eq!(fine.time_steps, Some(100));
    }

    #[test]
    fn heat_oracle_values() {
        assert!((heat_oracle(&[0.5, 0.5], 0.0) - 1.0).abs() < 1e-15);
        assert!(heat_oracle(&[0.0, 0.3], 0.1).abs() < 1e-15);
    }
}
