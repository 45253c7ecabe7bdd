use rayon::prelude::*;

use super::SolveResult;
use crate::error::{Error, Result};
use crate::flux_models::flux_into;
use crate::grid::ops::{full_weights, gradient_slice};
use crate::grid::Field;

/// Discrete `∬ (u ∂ₜφ − ⟨D_ξF(Du), Dφ⟩) dx dt` with left-endpoint time quadrature,
/// forward differences for `∂ₜφ` and centered analysis gradients.
///
/// `phi` must vanish on the lateral boundary and on the first and last slices.
pub fn weak_residual(result: &SolveResult, phi: &Field) -> Result<f64> {
    let u = &result.solution;
    u.check_same_grid(phi)?;
    let grid = u.grid();
    let scale = phi.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let last = grid.time_steps();
    for k in 0..grid.slices() {
        for (node, v) in phi.slice(k).iter().enumerate() {
            if (k == 0 || k == last || grid.is_boundary(node)) && v.abs() > tol {
                return Err(Error::param(
                    "phi",
                    format!("test function does not vanish on the boundary (slice {k}, node {node})"),
                ));
            }
        }
    }
    let n = grid.n();
    let dt = grid.dt();
    let weights = full_weights(grid);
    let params = &result.params;
    let per_slice: Vec<f64> = (0..last)
        .into_par_iter()
        .map(|k| {
            let du = gradient_slice(grid, u.slice(k));
            let dphi = gradient_slice(grid, phi.slice(k));
            let (uk, p0, p1) = (u.slice(k), phi.slice(k), phi.slice(k + 1));
            let mut flux = vec![0.0; n];
            weights
                .iter()
                .map(|&(node, w)| {
                    flux_into(du.at(node), params, &mut flux);
                    let pairing: f64 = flux.iter().zip(dphi.at(node)).map(|(a, b)| a * b).sum();
                    w * (uk[node] * (p1[node] - p0[node]) / dt - pairing)
                })
                .sum()
        })
        .collect();
    Ok(dt * per_slice.iter().sum::<f64>())
}
