use rayon::prelude::*;

use super::{CauchyDirichletProblem, SolverConfig, StepRecord};
use crate::error::{Error, Result};
use crate::flux_models::{hessian_into_unchecked, potential_total};
use crate::grid::ops::{
    cell_fluxes_into, divergence_from_cell_fluxes, forward_gradient, with_scratch,
};
use crate::grid::Grid;
use crate::params::ProblemParams;

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-12;

pub(crate) struct Workspace {
    fluxes: Vec<f64>,
    hess: Vec<f64>,
    residual: Vec<f64>,
    trial_residual: Vec<f64>,
    dir: Vec<f64>,
    trial: Vec<f64>,
    diag: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    p: Vec<f64>,
    ap: Vec<f64>,
    cell_values: Vec<f64>,
    boundary: Vec<bool>,
}

impl Workspace {
    pub(crate) fn new(grid: &Grid) -> Self {
        let m = grid.spatial_len();
        let n = grid.n();
        Workspace {
            fluxes: vec![0.0; m * n],
            hess: vec![0.0; m * n * n],
            residual: vec![0.0; m],
            trial_residual: vec![0.0; m],
            dir: vec![0.0; m],
            trial: vec![0.0; m],
            diag: vec![1.0; m],
            r: vec![0.0; m],
            z: vec![0.0; m],
            p: vec![0.0; m],
            ap: vec![0.0; m],
            cell_values: vec![0.0; m],
            boundary: (0..m).map(|i| grid.is_boundary(i)).collect(),
        }
    }
}

pub(crate) fn with_step(e: Error, k: usize) -> Error {
    match e {
        Error::NewtonDivergence {
            iterations,
            residual,
            ..
        } => Error::NewtonDivergence {
            step: k,
            iterations,
            residual,
        },
        Error::SingularSystem { detail, .. } => Error::SingularSystem { step: k, detail },
        other => other,
    }
}

fn dot(a: &[f64], b: &[f64], deterministic: bool) -> f64 {
    if deterministic {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    } else {
        a.par_iter().zip(b).map(|(x, y)| x * y).sum()
    }
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Scaled residual `(v − prev) − dt div_h D_ξF(D⁺v)`, zero on the boundary. Returns its max norm.
fn residual_into(
    grid: &Grid,
    v: &[f64],
    prev: &[f64],
    dt: f64,
    params: &ProblemParams,
    fluxes: &mut [f64],
    out: &mut [f64],
) -> f64 {
    cell_fluxes_into(grid, v, params, fluxes);
    divergence_from_cell_fluxes(grid, fluxes, out);
    out.par_iter_mut().enumerate().for_each(|(i, r)| {
        *r = if grid.is_boundary(i) {
            0.0
        } else {
            (v[i] - prev[i]) - dt * *r
        };
    });
    max_abs(out)
}

/// Scaled step energy `Σ ½(v − prev)² + dt Σ_cells F(D⁺v)`.
fn energy(
    grid: &Grid,
    v: &[f64],
    prev: &[f64],
    dt: f64,
    params: &ProblemParams,
    cell_values: &mut [f64],
) -> f64 {
    let n = grid.n();
    cell_values.par_iter_mut().enumerate().for_each(|(c, slot)| {
        *slot = if grid.is_cell(c) {
            with_scratch(n, |xi| {
                forward_gradient(grid, v, c, xi);
                potential_total(xi, params)
            })
        } else {
            0.0
        };
    });
    let kinetic: f64 = v
        .iter()
        .zip(prev)
        .map(|(a, b)| 0.5 * (a - b) * (a - b))
        .sum();
    kinetic + dt * cell_values.iter().sum::<f64>()
}

fn assemble_hessians(grid: &Grid, v: &[f64], params: &ProblemParams, hess: &mut [f64]) {
    let n = grid.n();
    hess.par_chunks_mut(n * n).enumerate().for_each(|(c, block)| {
        if grid.is_cell(c) {
            with_scratch(n, |xi| {
                forward_gradient(grid, v, c, xi);
                hessian_into_unchecked(xi, params, block);
            });
        } else {
            block.iter_mut().for_each(|b| *b = 0.0);
        }
    });
}

/// `1 + (dt/h²)[1ᵀH_x 1 + Σᵢ (H_{x−eᵢ})ᵢᵢ]` on interior nodes, one on the boundary.
fn jacobi_diagonal(grid: &Grid, dt: f64, hess: &[f64], diag: &mut [f64]) {
    let n = grid.n();
    let scale = dt / (grid.h() * grid.h());
    diag.par_iter_mut().enumerate().for_each(|(x, slot)| {
        if grid.is_boundary(x) {
            *slot = 1.0;
            return;
        }
        let own: f64 = hess[x * n * n..(x + 1) * n * n].iter().sum();
        let behind: f64 = (0..n)
            .map(|i| hess[(x - grid.stride(i)) * n * n + i * n + i])
            .sum();
        *slot = 1.0 + scale * (own + behind);
    });
}

/// `out = d − dt div_h(H D⁺d)` on interior nodes, zero on the boundary.
fn apply_operator(grid: &Grid, dt: f64, hess: &[f64], d: &[f64], w: &mut [f64], out: &mut [f64]) {
    let n = grid.n();
    w.par_chunks_mut(n).enumerate().for_each(|(c, row)| {
        if grid.is_cell(c) {
            let block = &hess[c * n * n..(c + 1) * n * n];
            with_scratch(n, |z| {
                forward_gradient(grid, d, c, z);
                for i in 0..n {
                    row[i] = (0..n).map(|j| block[i * n + j] * z[j]).sum();
                }
            });
        } else {
            row.iter_mut().for_each(|r| *r = 0.0);
        }
    });
    divergence_from_cell_fluxes(grid, w, out);
    out.par_iter_mut().enumerate().for_each(|(i, o)| {
        *o = if grid.is_boundary(i) { 0.0 } else { d[i] - dt * *o };
    });
}

/// Jacobi-preconditioned conjugate gradients for `A x = −residual`; `x` lands in `ws.dir`.
fn conjugate_gradient(
    grid: &Grid,
    dt: f64,
    config: &SolverConfig,
    ws: &mut Workspace,
) -> Result<usize> {
    let det = config.determinism_mode;
    let Workspace {
        fluxes,
        hess,
        residual,
        dir,
        diag,
        r,
        z,
        p,
        ap,
        ..
    } = ws;
    dir.iter_mut().for_each(|x| *x = 0.0);
    for i in 0..r.len() {
        r[i] = -residual[i];
        z[i] = r[i] / diag[i];
        p[i] = z[i];
    }
    let b_norm = dot(r, r, det).sqrt();
    if b_norm == 0.0 {
        return Ok(0);
    }
    let mut rz = dot(r, z, det);
    for it in 1..=config.max_linear_iters {
        apply_operator(grid, dt, hess, p, fluxes, ap);
        let pap = dot(p, ap, det);
        if !(pap > 0.0) || !pap.is_finite() {
            return Err(Error::SingularSystem {
                step: 0,
                detail: format!("conjugate gradient curvature {pap:e} at iteration {it}"),
            });
        }
        let alpha = rz / pap;
        for i in 0..r.len() {
            dir[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if dot(r, r, det).sqrt() <= config.linear_tol * b_norm {
            return Ok(it);
        }
        for i in 0..r.len() {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(r, z, det);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..r.len() {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok(config.max_linear_iters)
}

/// One Newton-minimized implicit step from `prev` into `out` with lateral values `bc`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn step_into(
    prev: &[f64],
    out: &mut [f64],
    bc: &[f64],
    dt: f64,
    grid: &Grid,
    params: &ProblemParams,
    config: &SolverConfig,
    ws: &mut Workspace,
) -> Result<StepRecord> {
    let det = config.determinism_mode;
    let to_unscaled = grid.h().powi(grid.n() as i32) / dt;
    for i in 0..out.len() {
        out[i] = if ws.boundary[i] { bc[i] } else { prev[i] };
    }
    let mut rnorm = residual_into(grid, out, prev, dt, params, &mut ws.fluxes, &mut ws.residual);
    let mut e = energy(grid, out, prev, dt, params, &mut ws.cell_values);
    let mut record = StepRecord {
        step: 0,
        newton_iterations: 0,
        cg_iterations: 0,
        residual: rnorm,
        energy_before: e * to_unscaled,
        energy_after: e * to_unscaled,
        energy_trace: vec![e * to_unscaled],
        wall_time_s: 0.0,
    };
    for it in 0..config.max_newton_iters {
        if rnorm <= config.newton_tol {
            break;
        }
        assemble_hessians(grid, out, params, &mut ws.hess);
        jacobi_diagonal(grid, dt, &ws.hess, &mut ws.diag);
        record.cg_iterations += conjugate_gradient(grid, dt, config, ws)?;
        let mut slope = dot(&ws.residual, &ws.dir, det);
        if !(slope < 0.0) {
            // Inexact direction; fall back to the preconditioned gradient.
            for i in 0..ws.dir.len() {
                ws.dir[i] = -ws.residual[i] / ws.diag[i];
            }
            slope = dot(&ws.residual, &ws.dir, det);
        }
        let mut alpha = 1.0;
        loop {
            for i in 0..out.len() {
                ws.trial[i] = out[i] + alpha * ws.dir[i];
            }
            let e_trial = energy(grid, &ws.trial, prev, dt, params, &mut ws.cell_values);
            let mut accept = e_trial <= e + ARMIJO * alpha * slope;
            let mut trial_rnorm = None;
            if !accept && e_trial - e <= 1e-13 * e.abs().max(1.0) {
                // Energy differences are at rounding level: judge by the residual.
                let r = residual_into(
                    grid,
                    &ws.trial,
                    prev,
                    dt,
                    params,
                    &mut ws.fluxes,
                    &mut ws.trial_residual,
                );
                accept = r < rnorm;
                trial_rnorm = Some(r);
            }
            if accept {
                out.copy_from_slice(&ws.trial);
                e = e_trial;
                rnorm = match trial_rnorm {
                    Some(r) => {
                        std::mem::swap(&mut ws.residual, &mut ws.trial_residual);
                        r
                    }
                    None => residual_into(
                        grid,
                        out,
                        prev,
                        dt,
                        params,
                        &mut ws.fluxes,
                        &mut ws.residual,
                    ),
                };
                break;
            }
            alpha *= config.damping;
            if alpha < MIN_STEP {
                return Err(Error::NewtonDivergence {
                    step: 0,
                    iterations: it + 1,
                    residual: rnorm,
                });
            }
        }
        record.newton_iterations = it + 1;
        record.energy_trace.push(e * to_unscaled);
    }
    record.residual = rnorm;
    record.energy_after = e * to_unscaled;
    if rnorm > config.newton_tol {
        return Err(Error::NewtonDivergence {
            step: 0,
            iterations: record.newton_iterations,
            residual: rnorm,
        });
    }
    Ok(record)
}

/// Minimizer of the step energy starting from `previous` over `dt`, with lateral values
/// from the reference data at `slice`.
pub fn implicit_step(
    previous: &[f64],
    dt: f64,
    slice: usize,
    problem: &CauchyDirichletProblem,
    config: &SolverConfig,
) -> Result<(Vec<f64>, StepRecord)> {
    config.validate()?;
    let grid = problem.grid();
    if previous.len() != grid.spatial_len() {
        return Err(Error::GridMismatch(format!(
            "previous slice has {} values, grid has {} nodes",
            previous.len(),
            grid.spatial_len()
        )));
    }
    if slice >= grid.slices() {
        return Err(Error::param("slice", format!("time index {slice} out of range")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    let mut ws = Workspace::new(grid);
    let mut out = vec![0.0; previous.len()];
    let mut record = step_into(
        previous,
        &mut out,
        problem.reference().slice(slice),
        dt,
        grid,
        problem.params(),
        config,
        &mut ws,
    )
    .map_err(|e| with_step(e, slice))?;
    record.step = slice;
    Ok((out, record))
}
