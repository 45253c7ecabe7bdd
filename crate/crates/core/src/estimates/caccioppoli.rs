use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{fmt_f, CsvRecord};
use crate::error::{Error, Result};
use crate::flux_models::{hessian_into_unchecked, pow_nonneg, quad_form};
use crate::grid::ops::{full_weights, gradient_slice};
use crate::grid::{CutoffPair, Grid, VectorField};
use crate::solver::SolveResult;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum CaccioppoliKind {
    /// `h(y) = |y|^{M+1}/(M+1)` applied to `∂ⱼu`.
    Standard { m_power: u32, j: usize },
    /// `Φ(t) = tˢ`, `Ψ(t) = tᵐ` applied to `(∂ⱼu)²` and `(∂ₖu)²`.
    Weird { s: f64, m: f64, alpha: f64, j: usize, k: usize },
}

/// Both sides of a discrete Caccioppoli inequality up to time `tau`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaccioppoliReport {
    pub kind: CaccioppoliKind,
    pub epsilon: f64,
    pub inner: f64,
    pub outer: f64,
    /// Slice time the requested `tau` was snapped to.
    pub tau: f64,
    pub h: f64,
    pub dt: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`.
    pub slack: f64,
    pub terms: BTreeMap<String, f64>,
}

impl CaccioppoliReport {
    /// `max(0, −slack)`.
    pub fn violation(&self) -> f64 {
        (-self.slack).max(0.0)
    }
}

/// `α = (m − s)/(m − 1)`, or `1` when `m = 1`.
pub fn weird_alpha(s: f64, m: f64) -> Result<f64> {
    check_exponents(s, m)?;
    Ok(if m == 1.0 { 1.0 } else { (m - s) / (m - 1.0) })
}

fn check_exponents(s: f64, m: f64) -> Result<()> {
    if !(s.is_finite() && s >= 1.0) {
        return Err(Error::param("s", format!("need s >= 1, got {s}")));
    }
    if !(m.is_finite() && m >= s) {
        return Err(Error::param("m", format!("need m >= s, got s = {s}, m = {m}")));
    }
    Ok(())
}

struct Setup<'a> {
    grid: &'a Grid,
    last: usize,
    chi: Vec<f64>,
    dchi: Vec<f64>,
    weights: Vec<(usize, f64)>,
}

fn setup<'a>(result: &'a SolveResult, cutoffs: &CutoffPair, tau: f64) -> Result<Setup<'a>> {
    result.require_converged()?;
    if !result.params.is_regularized() {
        return Err(Error::param("epsilon", "Caccioppoli checks need a regularized solve"));
    }
    let grid = result.grid();
    if cutoffs.eta.len() != grid.spatial_len() || cutoffs.chi.len() != grid.slices() {
        return Err(Error::GridMismatch("cutoffs were built on a different grid".into()));
    }
    let (t0, t1) = grid.time_interval();
    if !(tau > t0 && tau <= t1 + 1e-9 * (t1 - t0)) {
        return Err(Error::param("tau", format!("must lie in ({t0}, {t1}], got {tau}")));
    }
    let last = (((tau - t0) / grid.dt()).round() as usize).clamp(1, grid.time_steps());
    let dt = grid.dt();
    // backward differences, like the implicit scheme
    let dchi = (0..grid.slices())
        .map(|k| if k == 0 { 0.0 } else { (cutoffs.chi[k] - cutoffs.chi[k - 1]) / dt })
        .collect();
    Ok(Setup {
        grid,
        last,
        chi: cutoffs.chi.clone(),
        dchi,
        weights: full_weights(grid),
    })
}

/// Per-slice sums of several integrands over `k = 1..=last`, each weighted by `dt`.
fn time_sums<const T: usize>(
    s: &Setup,
    per_slice: impl Fn(usize) -> [f64; T] + Sync + Send,
) -> [f64; T] {
    let parts: Vec<[f64; T]> = (1..=s.last).into_par_iter().map(per_slice).collect();
    let mut out = [0.0; T];
    for part in parts {
        for (o, v) in out.iter_mut().zip(part) {
            *o += s.grid.dt() * v;
        }
    }
    out
}

fn component_slice(grad: &VectorField, j: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
    (0..grad.nodes()).map(|node| f(grad.component(node, j))).collect()
}

/// Discrete standard Caccioppoli inequality with `h(y) = |y|^{M+1}/(M+1)` on `∂ⱼu_ε`.
///
/// Spatial integrals use the trapezoid rule; time integrals use right endpoints over
/// slices `1..=K` with a backward-difference `∂ₜχ`. `D[h(∂ⱼu)]` is the centered
/// gradient of the composed slice.
pub fn caccioppoli_standard_check(
    result: &SolveResult,
    cutoffs: &CutoffPair,
    m_power: u32,
    j: usize,
    tau: f64,
) -> Result<CaccioppoliReport> {
    if m_power < 1 {
        return Err(Error::param("M", "need M >= 1"));
    }
    let n = result.grid().n();
    if j >= n {
        return Err(Error::param("j", format!("component {j} out of range for n = {n}")));
    }
    let s = setup(result, cutoffs, tau)?;
    let params = &result.params;
    let e = f64::from(m_power) + 1.0;
    let h_of = |y: f64| pow_nonneg(y.abs(), e) / e;
    let u = &result.solution;
    let eta = &cutoffs.eta;
    let deta = &cutoffs.eta_grad;

    let at_slice = |k: usize| -> (VectorField, Vec<f64>, VectorField) {
        let grad = gradient_slice(s.grid, u.slice(k));
        let hj = component_slice(&grad, j, h_of);
        let dh = gradient_slice(s.grid, &hj);
        (grad, hj, dh)
    };

    let [energy, time_term, cut_term] = time_sums(&s, |k| {
        let (grad, hj, dh) = at_slice(k);
        let mut a = vec![0.0; n * n];
        let mut acc = [0.0; 3];
        for &(node, w) in &s.weights {
            let e2 = eta[node] * eta[node];
            if e2 == 0.0 && deta.magnitude(node) == 0.0 {
                continue;
            }
            hessian_into_unchecked(grad.at(node), params, &mut a);
            let h2 = hj[node] * hj[node];
            acc[0] += w * quad_form(&a, dh.at(node)) * s.chi[k] * e2;
            acc[1] += w * s.dchi[k] * e2 * h2;
            acc[2] += w * 4.0 * quad_form(&a, deta.at(node)) * h2 * s.chi[k];
        }
        acc
    });
    let (_, h_last, _) = at_slice(s.last);
    let top = s.chi[s.last]
        * s.weights
            .iter()
            .map(|&(node, w)| w * h_last[node] * h_last[node] * eta[node] * eta[node])
            .sum::<f64>();

    let lhs = top + energy;
    let rhs = time_term + cut_term;
    let terms = BTreeMap::from([
        ("lhs_final_slice".to_string(), top),
        ("lhs_energy".to_string(), energy),
        ("rhs_time_cutoff".to_string(), time_term),
        ("rhs_space_cutoff".to_string(), cut_term),
    ]);
    Ok(report(
        CaccioppoliKind::Standard { m_power, j },
        result,
        cutoffs,
        &s,
        lhs,
        rhs,
        terms,
    ))
}

fn report(
    kind: CaccioppoliKind,
    result: &SolveResult,
    cutoffs: &CutoffPair,
    s: &Setup,
    lhs: f64,
    rhs: f64,
    terms: BTreeMap<String, f64>,
) -> CaccioppoliReport {
    CaccioppoliReport {
        kind,
        epsilon: result.params.epsilon(),
        inner: cutoffs.inner,
        outer: cutoffs.outer,
        tau: s.grid.time(s.last),
        h: s.grid.h(),
        dt: s.grid.dt(),
        lhs,
        rhs,
        slack: rhs - lhs,
        terms,
    }
}

/// Discrete weird Caccioppoli inequality with `Φ(t) = tˢ`, `Ψ(t) = tᵐ` on components `j`, `k`.
///
/// `alpha = None` uses [`weird_alpha`]; an explicit value must lie in `[0, 1]`.
/// Discretized like [`caccioppoli_standard_check`]; `Du_{xⱼ}` is the centered gradient
/// of the centered derivative.
#[allow(clippy::too_many_arguments)]
pub fn caccioppoli_weird_check(
    result: &SolveResult,
    cutoffs: &CutoffPair,
    s_exp: f64,
    m_exp: f64,
    alpha: Option<f64>,
    j: usize,
    k_comp: usize,
    tau: f64,
) -> Result<CaccioppoliReport> {
    let default_alpha = weird_alpha(s_exp, m_exp)?;
    let alpha = match alpha {
        None => default_alpha,
        Some(a) if (0.0..=1.0).contains(&a) => a,
        Some(a) => return Err(Error::param("alpha", format!("need 0 <= alpha <= 1, got {a}"))),
    };
    let n = result.grid().n();
    if j >= n || k_comp >= n {
        return Err(Error::param("j", format!("components ({j}, {k_comp}) out of range for n = {n}")));
    }
    let s = setup(result, cutoffs, tau)?;
    let params = &result.params;
    let u = &result.solution;
    let eta = &cutoffs.eta;
    let deta = &cutoffs.eta_grad;
    let phi = |t: f64| pow_nonneg(t, s_exp);
    let dphi = |t: f64| s_exp * pow_nonneg(t, s_exp - 1.0);
    let psi = |t: f64| pow_nonneg(t, m_exp);
    let dpsi = |t: f64| m_exp * pow_nonneg(t, m_exp - 1.0);

    let [energy, t1, t2, t3a, t3b] = time_sums(&s, |k| {
        let grad = gradient_slice(s.grid, u.slice(k));
        let uj = component_slice(&grad, j, |v| v);
        let duj = gradient_slice(s.grid, &uj);
        let mut a = vec![0.0; n * n];
        let mut acc = [0.0; 5];
        let (chi, dchi) = (s.chi[k], s.dchi[k]);
        for &(node, w) in &s.weights {
            let e2 = eta[node] * eta[node];
            if e2 == 0.0 && deta.magnitude(node) == 0.0 {
                continue;
            }
            hessian_into_unchecked(grad.at(node), params, &mut a);
            let xj = grad.component(node, j);
            let xk = grad.component(node, k_comp);
            let (tj, tk) = (xj * xj, xk * xk);
            let qj = quad_form(&a, duj.at(node));
            let qe = quad_form(&a, deta.at(node));
            acc[0] += w * qj * dphi(tj) * psi(tk) * chi * e2;
            acc[1] += w * phi(tj) * psi(tk) * dchi * e2;
            acc[2] += w * 4.0 * qe * (tj * dphi(tj) * psi(tk) + tk * phi(tj) * dpsi(tk)) * chi;
            acc[3] += w * qj * tj * dphi(tj).powi(2) * pow_nonneg(dpsi(tk), alpha) * chi * e2;
            acc[4] += w
                * (0.25 * dchi * e2 + qe * chi)
                * pow_nonneg(xk.abs(), 2.0 * alpha)
                * pow_nonneg(psi(tk), 2.0 - alpha);
        }
        acc
    });
    let grad_last = gradient_slice(s.grid, u.slice(s.last));
    let top = s.chi[s.last]
        * s.weights
            .iter()
            .map(|&(node, w)| {
                let xj = grad_last.component(node, j);
                let xk = grad_last.component(node, k_comp);
                w * phi(xj * xj) * psi(xk * xk) * eta[node] * eta[node]
            })
            .sum::<f64>();
    // t3b can dip below zero only through rounding; the square root needs it clipped
    let t3 = 8.0 * (t3a.max(0.0) * t3b.max(0.0)).sqrt();
    let lhs = top + energy;
    let rhs = t1 + t2 + t3;
    let terms = BTreeMap::from([
        ("lhs_final_slice".to_string(), top),
        ("lhs_energy".to_string(), energy),
        ("rhs_time_cutoff".to_string(), t1),
        ("rhs_space_cutoff".to_string(), t2),
        ("rhs_product_first".to_string(), t3a),
        ("rhs_product_second".to_string(), t3b),
        ("rhs_product".to_string(), t3),
    ]);
    Ok(report(
        CaccioppoliKind::Weird { s: s_exp, m: m_exp, alpha, j, k: k_comp },
        result,
        cutoffs,
        &s,
        lhs,
        rhs,
        terms,
    ))
}

impl CsvRecord for CaccioppoliReport {
    fn header() -> Vec<&'static str> {
        vec!["kind", "epsilon", "inner", "outer", "tau", "h", "dt", "lhs", "rhs", "slack"]
    }

    fn record(&self) -> Vec<String> {
        let kind = match self.kind {
            CaccioppoliKind::Standard { m_power, j } => format!("standard(M={m_power};j={j})"),
            CaccioppoliKind::Weird { s, m, alpha, j, k } => {
                format!("weird(s={s};m={m};alpha={alpha};j={j};k={k})")
            }
        };
        vec![
            kind,
            fmt_f(self.epsilon),
            fmt_f(self.inner),
            fmt_f(self.outer),
            fmt_f(self.tau),
            fmt_f(self.h),
            fmt_f(self.dt),
            fmt_f(self.lhs),
            fmt_f(self.rhs),
            fmt_f(self.slack),
        ]
    }
}
