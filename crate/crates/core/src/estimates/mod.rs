//! Checks of the quantitative statements on computed fields: energy estimates,
//! strong convergence, Caccioppoli inequalities, the Moser scheme and the
//! gradient bound.
//!
//! Inequalities are evaluated, never asserted: each check returns both sides and
//! leaves thresholds to the caller.

mod caccioppoli;
mod energy;
mod gradient_bound;
mod moser;
mod report;
mod slope;

pub use caccioppoli::{
    caccioppoli_standard_check, caccioppoli_weird_check, weird_alpha, CaccioppoliKind,
    CaccioppoliReport,
};
pub use energy::{
    convergence_diagnostic, energy_estimate_check, reference_residual, ConvergenceRow,
    ConvergenceTable, EnergyReport, GapKind,
};
pub use gradient_bound::{default_theta, gradient_bound_check, resolve_theta, GradientBoundReport};
pub use moser::{moser_ledger, moser_recursion_check, MoserEntry, MoserLedger, MoserRecursionReport, GAMMA_CAP};
pub use report::{write_csv, CsvRecord, REPORT_SCHEMA_VERSION};
pub use slope::{
    compute_max_slope, envelope_sides, slope_control_check, slope_control_violation, MeasureKind,
    SlopeMode, WeightedMeasure,
};

use crate::grid::ops::full_weights;
use crate::grid::Grid;

/// `∬_{Ω×J} f`: trapezoid in space over the whole grid, left endpoint in time.
pub(crate) fn integrate_domain(grid: &Grid, f: impl Fn(usize, usize) -> f64 + Sync) -> f64 {
    use rayon::prelude::*;
    let weights = full_weights(grid);
    let per_slice: Vec<f64> = (0..grid.time_steps())
        .into_par_iter()
        .map(|k| weights.iter().map(|&(node, w)| w * f(k, node)).sum())
        .collect();
    grid.dt() * per_slice.iter().sum::<f64>()
}
