use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::gradient_bound::resolve_theta;
use super::report::{fmt_f, CsvRecord};
use super::slope::WeightedMeasure;
use crate::error::{Error, Result};
use crate::grid::{snap_cylinder, ParabolicCylinder};
use crate::params::ProblemParams;
use crate::solver::SolveResult;

/// Largest exponent `γⱼ` the recursion check evaluates.
pub const GAMMA_CAP: u64 = 64;
/// Above this exponent, integrals of `𝒰^γ` are accumulated in the log domain.
const LOG_DOMAIN_FROM: u64 = 32;

fn rat(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// Exponents of level `j` of the Moser scheme, exact.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MoserEntry {
    pub j: usize,
    /// `Mⱼ = 2^{j+1} − 1`.
    pub m: BigInt,
    /// `γⱼ = 2Mⱼ`.
    pub gamma: BigRational,
    /// `γ̂ⱼ = 2Mⱼ + 4(Mⱼ + 1)/n`.
    pub gamma_hat: BigRational,
    /// `τⱼ = (γ̂ⱼ − γⱼ)/(γ̂ⱼ − γⱼ₋₁) · γⱼ₋₁/γⱼ`, for `j ≥ 1`.
    pub tau: Option<BigRational>,
    /// `τⱼγⱼ/γⱼ₋₁`.
    pub first_identity: Option<BigRational>,
    /// `(1 − τⱼ)γⱼ/γ̂ⱼ`.
    pub second_identity: Option<BigRational>,
    /// Whether `1/γⱼ = τⱼ/γⱼ₋₁ + (1 − τⱼ)/γ̂ⱼ` holds exactly.
    pub interpolation_exact: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MoserLedger {
    pub n: usize,
    pub entries: Vec<MoserEntry>,
}

impl MoserLedger {
    /// `4/(n + 4)`.
    pub fn first_target(&self) -> BigRational {
        BigRational::new(BigInt::from(4), BigInt::from(self.n + 4))
    }

    /// `n/(n + 4)`.
    pub fn second_target(&self) -> BigRational {
        BigRational::new(BigInt::from(self.n), BigInt::from(self.n + 4))
    }

    /// Ordering, interpolation and both closed forms at every `j ≥ 1`.
    pub fn identities_hold(&self) -> bool {
        let (a, b) = (self.first_target(), self.second_target());
        self.entries.iter().skip(1).all(|e| {
            let prev = &self.entries[e.j - 1].gamma;
            prev < &e.gamma
                && e.gamma < e.gamma_hat
                && e.tau.as_ref().is_some_and(|t| t > &BigRational::zero() && t < &BigRational::one())
                && e.first_identity.as_ref() == Some(&a)
                && e.second_identity.as_ref() == Some(&b)
                && e.interpolation_exact == Some(true)
        })
    }

    pub fn gamma_f64(&self, j: usize) -> f64 {
        self.entries[j].gamma.to_f64().unwrap_or(f64::INFINITY)
    }

    /// Rows `j, M_j, gamma_j, gamma_hat_j, tau_j, first, second, interpolation`, rationals as `a/b`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "schema_version,n,j,M_j,gamma_j,gamma_hat_j,tau_j,tau_gamma_over_prev,rest_gamma_over_hat,interpolation_exact\n",
        );
        let show = |r: &Option<BigRational>| r.as_ref().map(|v| v.to_string()).unwrap_or_default();
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                super::REPORT_SCHEMA_VERSION,
                self.n,
                e.j,
                e.m,
                e.gamma,
                e.gamma_hat,
                show(&e.tau),
                show(&e.first_identity),
                show(&e.second_identity),
                e.interpolation_exact.map(|b| b.to_string()).unwrap_or_default(),
            ));
        }
        out
    }
}

/// Exact exponents for `j = 0..=j_max`.
pub fn moser_ledger(n: usize, j_max: usize) -> Result<MoserLedger> {
    if n < 2 {
        return Err(Error::param("n", format!("need n >= 2, got {n}")));
    }
    if j_max < 1 {
        return Err(Error::param("j_max", "need j_max >= 1"));
    }
    if j_max > 60 {
        return Err(Error::param("j_max", format!("need j_max <= 60, got {j_max}")));
    }
    let nn = rat(n as i64);
    let mut entries: Vec<MoserEntry> = Vec::with_capacity(j_max + 1);
    for j in 0..=j_max {
        let m: BigInt = (BigInt::one() << (j + 1)) - 1;
        let mr = BigRational::from_integer(m.clone());
        let gamma = rat(2) * &mr;
        let gamma_hat = &gamma + rat(4) * (&mr + rat(1)) / &nn;
        let (mut tau, mut first, mut second, mut exact) = (None, None, None, None);
        if let Some(prev) = entries.last().map(|e| e.gamma.clone()) {
            let t = (&gamma_hat - &gamma) / (&gamma_hat - &prev) * &prev / &gamma;
            first = Some(&t * &gamma / &prev);
            second = Some((rat(1) - &t) * &gamma / &gamma_hat);
            exact = Some(gamma.recip() == &t / &prev + (rat(1) - &t) / &gamma_hat);
            tau = Some(t);
        }
        entries.push(MoserEntry {
            j,
            m,
            gamma,
            gamma_hat,
            tau,
            first_identity: first,
            second_identity: second,
            interpolation_exact: exact,
        });
    }
    Ok(MoserLedger { n, entries })
}

/// `Yⱼ` and the fitted recursion constants on shrinking cylinders `Q_{Rⱼ}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoserRecursionReport {
    pub inner: f64,
    pub outer: f64,
    pub theta: f64,
    /// `Rⱼ = r + (R − r)/2^{j−1}` for `j = 1..=j_max+1`.
    pub radii: Vec<f64>,
    /// `ln Yⱼ` for `j = 1..=j_max+1`.
    pub log_y: Vec<f64>,
    /// `ln Cⱼ` for `j = 1..=j_max`, where `Cⱼ = Yⱼ₊₁(R − r)^{ϑp} / (2^{3p(n+2)j} Yⱼ²)`.
    pub log_c: Vec<f64>,
    pub c: Vec<f64>,
    pub max_c: f64,
    pub snap_distance: f64,
}

impl MoserRecursionReport {
    pub fn is_finite(&self) -> bool {
        self.max_c.is_finite() && self.log_c.iter().all(|v| v.is_finite())
    }
}

/// `ln ∫_Q 𝒰^γ dμ` (or with `𝒱`, `σ` when `p = 2`); `−∞` when the weight vanishes on `Q`.
fn log_moment(measure: &WeightedMeasure, cyl: &ParabolicCylinder, gamma: f64) -> Result<(f64, f64)> {
    let grid = measure.base.grid();
    let snapped = snap_cylinder(grid, cyl)?;
    let nodes = snapped.weighted_nodes(grid);
    let dt = grid.dt();
    let log_domain = gamma > LOG_DOMAIN_FROM as f64;
    let mut logs = Vec::new();
    let mut plain = 0.0;
    for k in snapped.k_lo..snapped.k_hi {
        let base = measure.base.slice(k);
        for &(node, w) in &nodes {
            let b = base[node];
            let weight = measure.weight_at(b);
            if weight == 0.0 || w == 0.0 {
                continue;
            }
            if log_domain {
                logs.push((w * dt * weight).ln() + gamma * b.ln());
            } else {
                plain += w * dt * weight * b.powf(gamma);
            }
        }
    }
    let value = if log_domain {
        match logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) {
            top if top == f64::NEG_INFINITY => f64::NEG_INFINITY,
            top => top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln(),
        }
    } else if plain > 0.0 {
        plain.ln()
    } else {
        f64::NEG_INFINITY
    };
    Ok((value, snapped.snap_distance))
}

/// `ln(1 + eˣ)` without overflow.
fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Evaluates `Yⱼ` for `j = 1..=j_max+1` and the per-level constants of the Moser recursion
/// inside `outer` shrinking to radius `inner`.
pub fn moser_recursion_check(
    result: &SolveResult,
    outer: &ParabolicCylinder,
    inner: f64,
    ledger: &MoserLedger,
    params: &ProblemParams,
    j_max: usize,
    theta: Option<f64>,
) -> Result<MoserRecursionReport> {
    let big_r = outer.radius();
    if !(inner > 0.0 && inner < big_r) {
        return Err(Error::param("r", format!("need 0 < r < R, got r = {inner}, R = {big_r}")));
    }
    if ledger.n != params.n() || params.n() != result.grid().n() {
        return Err(Error::GridMismatch("ledger, parameters and grid dimensions differ".into()));
    }
    if j_max < 1 || ledger.entries.len() <= j_max {
        return Err(Error::param("j_max", format!("ledger covers j <= {}", ledger.entries.len() - 1)));
    }
    let top_gamma = ledger.gamma_f64(j_max);
    if top_gamma > GAMMA_CAP as f64 {
        return Err(Error::param(
            "j_max",
            format!("gamma_{j_max} = {top_gamma} exceeds the cap {GAMMA_CAP}"),
        ));
    }
    let theta = resolve_theta(params.n(), theta)?;
    let p = params.p();
    let n = params.n() as f64;
    let measure = WeightedMeasure::for_field(&result.solution, params)?;
    let mut radii = Vec::with_capacity(j_max + 1);
    let mut log_y = Vec::with_capacity(j_max + 1);
    let mut snap: f64 = 0.0;
    for j in 1..=j_max + 1 {
        let rj = inner + (big_r - inner) / 2f64.powi(j as i32 - 1);
        let (moment, d) = log_moment(&measure, &outer.with_radius(rj)?, ledger.gamma_f64(j - 1))?;
        radii.push(rj);
        log_y.push(log1p_exp(moment));
        snap = snap.max(d);
    }
    let width_term = theta * p * (big_r - inner).ln();
    let log_c: Vec<f64> = (1..=j_max)
        .map(|j| {
            log_y[j] + width_term - 3.0 * p * (n + 2.0) * j as f64 * std::f64::consts::LN_2
                - 2.0 * log_y[j - 1]
        })
        .collect();
    let c: Vec<f64> = log_c.iter().map(|v| v.exp()).collect();
    let max_c = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(MoserRecursionReport {
        inner,
        outer: big_r,
        theta,
        radii,
        log_y,
        log_c,
        c,
        max_c,
        snap_distance: snap,
    })
}

impl CsvRecord for MoserRecursionReport {
    fn header() -> Vec<&'static str> {
        vec!["inner", "outer", "theta", "j_max", "max_c", "snap_distance"]
    }

    fn record(&self) -> Vec<String> {
        vec![
            fmt_f(self.inner),
            fmt_f(self.outer),
            fmt_f(self.theta),
            self.c.len().to_string(),
            fmt_f(self.max_c),
            fmt_f(self.snap_distance),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n3_first_level() {
        let l = moser_ledger(3, 2).unwrap();
        let e = &l.entries[1];
        assert_eq!(l.entries[0].gamma, rat(2));
        assert_eq!(e.gamma, rat(6));
        assert_eq!(e.gamma_hat, BigRational::new(34.into(), 3.into()));
        assert_eq!(e.tau, Some(BigRational::new(4.into(), 21.into())));
        assert!(l.identities_hold());
    }

    #[test]
    fn csv_has_exact_columns() {
        let csv = moser_ledger(3, 5).unwrap().to_csv();
        for line in csv.lines().skip(2) {
            assert!(line.contains(",4/7,3/7,true"), "{line}");
        }
    }

    #[test]
    fn log1p_exp_extremes() {
        assert!((log1p_exp(800.0) - 800.0).abs() < 1e-12);
        assert_eq!(log1p_exp(f64::NEG_INFINITY), 0.0);
    }
}
