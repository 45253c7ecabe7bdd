use serde::{Deserialize, Serialize};

use super::integrate_domain;
use super::report::{fmt_f, fmt_o, CsvRecord};
use crate::error::{Error, Result};
use crate::flux_models::{map_h, map_k_unchecked, pow_nonneg};
use crate::grid::ops::{cell_fluxes_into, divergence_from_cell_fluxes, full_weights};
use crate::grid::{gradient_all, Field};
use crate::params::ProblemParams;
use crate::solver::SolveResult;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GapKind {
    /// `Σᵢ ∬ |H_{δᵢ}(∂ᵢu_ε) − H_{δᵢ}(∂ᵢu)|²`.
    H,
    /// `Σᵢ ∬ |K_{i,ε}(∂ᵢu_ε) − K_{i,ε}(∂ᵢu)|²`.
    K,
}

/// Terms of the uniform energy estimate for one regularization level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub epsilon: f64,
    pub p: f64,
    /// `∫|u_ε − u|²` on the last slice.
    pub term_final_l2: f64,
    pub gap_kind: GapKind,
    pub term_gap: f64,
    /// `ε∬|Du_ε|^p`, or `ε∬|Du_ε − Du|²` when `p = 2`.
    pub term_eps_energy: f64,
    pub lhs_total: f64,
    /// `|Ω′ × J| + ∬|Du|^p`.
    pub rhs_base: f64,
    /// `lhs_total / (ε rhs_base)`; absent when `ε = 0`.
    pub c_fit: Option<f64>,
    /// Max-norm of `∂ₜu − div D_ξF₀(Du)` for the reference, discretized like the solver.
    pub reference_residual: f64,
}

fn check_pair(u_eps: &SolveResult, u_ref: &Field, params: &ProblemParams) -> Result<()> {
    u_eps.solution.check_same_grid(u_ref)?;
    if params.n() != u_ref.grid().n() {
        return Err(Error::GridMismatch("parameter and grid dimensions differ".into()));
    }
    Ok(())
}

/// Consistency residual of `u` against the limit equation, in time-derivative units.
pub fn reference_residual(u: &Field, params: &ProblemParams) -> Result<f64> {
    let limit = params.with_epsilon(0.0)?;
    let grid = u.grid();
    let n = grid.n();
    let dt = grid.dt();
    let mut fluxes = vec![0.0; grid.spatial_len() * n];
    let mut div = vec![0.0; grid.spatial_len()];
    let mut worst: f64 = 0.0;
    for k in 1..grid.slices() {
        cell_fluxes_into(grid, u.slice(k), &limit, &mut fluxes);
        divergence_from_cell_fluxes(grid, &fluxes, &mut div);
        let (prev, cur) = (u.slice(k - 1), u.slice(k));
        for node in 0..grid.spatial_len() {
            if !grid.is_boundary(node) {
                worst = worst.max(((cur[node] - prev[node]) / dt - div[node]).abs());
            }
        }
    }
    Ok(worst)
}

fn norm_pow(v: &[f64], p: f64) -> f64 {
    pow_nonneg(v.iter().map(|x| x * x).sum::<f64>().sqrt(), p)
}

/// Evaluates both sides of the uniform energy estimate for `u_eps` against the reference `u_ref`.
///
/// `H`-gaps are used for `p > 2`; for `p = 2` the gaps use `K_{i,ε}` at the same `ε`.
pub fn energy_estimate_check(
    u_eps: &SolveResult,
    u_ref: &Field,
    params: &ProblemParams,
) -> Result<EnergyReport> {
    check_pair(u_eps, u_ref, params)?;
    let grid = u_ref.grid();
    let p = params.p();
    let eps = params.epsilon();
    let quadratic = p == 2.0;
    let du_eps = gradient_all(&u_eps.solution);
    let du_ref = gradient_all(u_ref);
    let last = grid.time_steps();
    let weights = full_weights(grid);
    let term_final_l2: f64 = weights
        .iter()
        .map(|&(node, w)| {
            let d = u_eps.solution.slice(last)[node] - u_ref.slice(last)[node];
            w * d * d
        })
        .sum();
    let gap_kind = if quadratic { GapKind::K } else { GapKind::H };
    let transform = |i: usize, s: f64| -> f64 {
        if quadratic {
            map_k_unchecked(i, s, params)
        } else {
            map_h(s, params.delta()[i], p)
        }
    };
    let term_gap = integrate_domain(grid, |k, node| {
        let (a, b) = (du_eps[k].at(node), du_ref[k].at(node));
        (0..a.len())
            .map(|i| {
                let d = transform(i, a[i]) - transform(i, b[i]);
                d * d
            })
            .sum()
    });
    let term_eps_energy = eps
        * integrate_domain(grid, |k, node| {
            let a = du_eps[k].at(node);
            if quadratic {
                let b = du_ref[k].at(node);
                a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
            } else {
                norm_pow(a, p)
            }
        });
    let volume = integrate_domain(grid, |_, _| 1.0);
    let ref_energy = integrate_domain(grid, |k, node| norm_pow(du_ref[k].at(node), p));
    let rhs_base = volume + ref_energy;
    let lhs_total = term_final_l2 + term_gap + term_eps_energy;
    Ok(EnergyReport {
        epsilon: eps,
        p,
        term_final_l2,
        gap_kind,
        term_gap,
        term_eps_energy,
        lhs_total,
        rhs_base,
        c_fit: (eps > 0.0).then(|| lhs_total / (eps * rhs_base)),
        reference_residual: reference_residual(u_ref, params)?,
    })
}

/// One row of the strong-convergence table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    pub component: usize,
    /// `‖H_{δⱼ}(∂ⱼu_ε) − H_{δⱼ}(∂ⱼu)‖_{L²}` (`p > 2`) or `‖K_{j,ε}(∂ⱼu_ε) − H_{δⱼ}(∂ⱼu)‖_{L²}` (`p = 2`).
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Distances of component `j` in sweep order.
    pub fn component(&self, j: usize) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.component == j)
            .map(|r| r.distance)
            .collect()
    }

    /// Whether every component decreases along the sweep up to a relative `slack`.
    pub fn is_decreasing(&self, slack: f64) -> bool {
        let n = self.rows.iter().map(|r| r.component + 1).max().unwrap_or(0);
        (0..n).all(|j| {
            self.component(j)
                .windows(2)
                .all(|w| w[1] <= w[0] * (1.0 + slack))
        })
    }
}

/// `L²(Ω′ × J)` distances per `ε` and component along a sweep ordered by decreasing `ε`.
pub fn convergence_diagnostic(
    sweep: &[&SolveResult],
    u_ref: &Field,
    params: &ProblemParams,
) -> Result<ConvergenceTable> {
    if sweep.is_empty() {
        return Err(Error::param("sweep", "needs at least one solve"));
    }
    if sweep
        .windows(2)
        .any(|w| w[1].params.epsilon() > w[0].params.epsilon())
    {
        return Err(Error::param("sweep", "must be ordered by decreasing epsilon"));
    }
    let grid = u_ref.grid();
    let du_ref = gradient_all(u_ref);
    let p = params.p();
    let mut rows = Vec::new();
    for result in sweep {
        check_pair(result, u_ref, params)?;
        let du = gradient_all(&result.solution);
        let run = &result.params;
        for j in 0..params.n() {
            let d = params.delta()[j];
            let sq = integrate_domain(grid, |k, node| {
                let a = du[k].component(node, j);
                let b = du_ref[k].component(node, j);
                let left = if p == 2.0 && run.epsilon() > 0.0 {
                    map_k_unchecked(j, a, run)
                } else {
                    map_h(a, d, p)
                };
                let diff = left - map_h(b, d, p);
                diff * diff
            });
            rows.push(ConvergenceRow {
                epsilon: run.epsilon(),
                component: j,
                distance: sq.sqrt(),
            });
        }
    }
    Ok(ConvergenceTable { rows })
}

impl CsvRecord for EnergyReport {
    fn header() -> Vec<&'static str> {
        vec![
            "epsilon", "p", "term_final_l2", "gap_kind", "term_gap", "term_eps_energy",
            "lhs_total", "rhs_base", "c_fit", "reference_residual",
        ]
    }

    fn record(&self) -> Vec<String> {
        vec![
            fmt_f(self.epsilon),
            fmt_f(self.p),
            fmt_f(self.term_final_l2),
            format!("{:?}", self.gap_kind),
            fmt_f(self.term_gap),
            fmt_f(self.term_eps_energy),
            fmt_f(self.lhs_total),
            fmt_f(self.rhs_base),
            fmt_o(self.c_fit),
            fmt_f(self.reference_residual),
        ]
    }
}

impl CsvRecord for ConvergenceRow {
    fn header() -> Vec<&'static str> {
        vec!["epsilon", "component", "distance"]
    }

    fn record(&self) -> Vec<String> {
        vec![fmt_f(self.epsilon), self.component.to_string(), fmt_f(self.distance)]
    }
}
