use rayon::prelude::*;

use super::{solve, CauchyDirichletProblem, SolveResult, SolverConfig};
use crate::error::Result;

/// Outcome of one regularization level in a sweep.
#[derive(Debug)]
pub struct SweepEntry {
    pub epsilon: f64,
    pub result: Result<SolveResult>,
}

/// Independent solves sharing the template's reference data, one per `ε`, ordered by
/// `ε` descending. A failing level does not abort the others.
pub fn epsilon_sweep(
    template: &CauchyDirichletProblem,
    epsilons: &[f64],
    config: &SolverConfig,
) -> Vec<SweepEntry> {
    let mut sorted = epsilons.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted
        .into_par_iter()
        .map(|epsilon| SweepEntry {
            epsilon,
            result: template
                .with_epsilon(epsilon)
                .and_then(|problem| solve(&problem, config)),
        })
        .collect()
}
