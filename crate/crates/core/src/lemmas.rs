//! Randomized property suites for the potentials and the auxiliary maps.
//!
//! Every suite draws from a `ChaCha8Rng` seeded by [`SuiteConfig::seed`], so a fixed
//! seed reproduces the same samples and the same report.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::flux_models::{
    ellipticity_bounds, flux_into, hessian, map_h, map_j, map_k, potential_component,
    potential_component_derivative, potential_component_smoothed,
    potential_component_smoothed_derivative,
};
use crate::params::ProblemParams;

/// Sample counts and seed shared by all suites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Points per `ε` in the smoothing-gap suite.
    pub smoothing_samples: usize,
    /// Pairs per configuration in the other suites.
    pub pair_samples: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 0,
            smoothing_samples: 100_000,
            pair_samples: 10_000,
        }
    }
}

/// Worst observed margin of one configuration; non-negative means the property held.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigOutcome {
    pub label: String,
    pub samples: usize,
    pub worst_margin: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub seed: u64,
    pub tolerance: f64,
    pub configurations: Vec<ConfigOutcome>,
    pub passed: bool,
}

impl SuiteReport {
    fn new(name: &str, seed: u64, tolerance: f64, configurations: Vec<ConfigOutcome>) -> Self {
        let passed = configurations.iter().all(|c| c.passed);
        SuiteReport {
            name: name.into(),
            seed,
            tolerance,
            configurations,
            passed,
        }
    }

    pub fn worst_margin(&self) -> f64 {
        self.configurations
            .iter()
            .map(|c| c.worst_margin)
            .fold(f64::INFINITY, f64::min)
    }
}

fn outcome(label: String, samples: usize, worst: f64, tol: f64) -> ConfigOutcome {
    ConfigOutcome {
        label,
        samples,
        worst_margin: worst,
        passed: worst >= -tol,
    }
}

/// Absolute rounding allowance for the smoothing-gap bounds and the seam value.
pub const SMOOTHING_TOL: f64 = 1e-12;
/// Absolute slack allowed in the monotonicity and convexity inequalities.
pub const PAIR_TOL: f64 = 1e-12;
/// Relative slack allowed in the ellipticity sandwich.
pub const ELLIPTICITY_TOL: f64 = 1e-10;
/// Relative agreement required between the Hessian and the differenced flux.
pub const HESSIAN_FD_TOL: f64 = 1e-5;

/// `|g_{ε} − g| ≤ ε²/6` and `|g′_{ε} − g′| ≤ ε/4` on `[−5, 5]` for `δ = 1`, plus the
/// exact value gap `ε²/6` at `s = ±(1 + ε)`.
pub fn smoothing_gap_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut configs = Vec::new();
    for eps in [0.5, 0.1, 0.01] {
        let params = ProblemParams::new(2.0, vec![1.0, 1.0], eps)?;
        let value_bound = eps * eps / 6.0;
        let slope_bound = eps / 4.0;
        let (mut worst_value, mut worst_slope) = (f64::INFINITY, f64::INFINITY);
        for _ in 0..cfg.smoothing_samples {
            let s: f64 = rng.gen_range(-5.0..=5.0);
            let dv = (potential_component_smoothed(0, s, &params)? - potential_component(0, s, &params)).abs();
            let dd = (potential_component_smoothed_derivative(0, s, &params)?
                - potential_component_derivative(0, s, &params))
            .abs();
            worst_value = worst_value.min(value_bound - dv);
            worst_slope = worst_slope.min(slope_bound - dd);
        }
        let seam_gap = [1.0 + eps, -1.0 - eps]
            .into_iter()
            .map(|s| {
                Ok((potential_component_smoothed(0, s, &params)? - potential_component(0, s, &params)
                    - value_bound)
                    .abs())
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let n = cfg.smoothing_samples;
        configs.push(outcome(format!("eps={eps}:value"), n, worst_value, SMOOTHING_TOL));
        configs.push(outcome(format!("eps={eps}:derivative"), n, worst_slope, SMOOTHING_TOL));
        configs.push(outcome(format!("eps={eps}:seam"), 2, -seam_gap, SMOOTHING_TOL));
    }
    Ok(SuiteReport::new("smoothing_gap", cfg.seed, SMOOTHING_TOL, configs))
}

/// `(J_λ(s) − J_λ(t))(s − t) ≥ (4/p²)|H_λ(s) − H_λ(t)|²` on `[−10, 10]²`.
pub fn monotonicity_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut configs = Vec::new();
    for p in [2.0, 3.0, 4.0] {
        for lambda in [0.0, 1.0, 2.0] {
            let mut worst = f64::INFINITY;
            for _ in 0..cfg.pair_samples {
                let s: f64 = rng.gen_range(-10.0..=10.0);
                let t: f64 = rng.gen_range(-10.0..=10.0);
                let lhs = (map_j(s, lambda, p) - map_j(t, lambda, p)) * (s - t);
                let dh = map_h(s, lambda, p) - map_h(t, lambda, p);
                worst = worst.min(lhs - 4.0 / (p * p) * dh * dh);
            }
            configs.push(outcome(format!("p={p},lambda={lambda}"), cfg.pair_samples, worst, PAIR_TOL));
        }
    }
    Ok(SuiteReport::new("monotonicity", cfg.seed, PAIR_TOL, configs))
}

/// `(g̃′(a) − g̃′(b))(a − b) ≥ (K(a) − K(b))²` for the smoothed quadratic profiles.
pub fn convexity_surrogate_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut configs = Vec::new();
    for (delta, eps) in [(1.0, 0.5), (1.0, 0.1), (2.0, 0.25), (0.5, 0.01), (0.0, 0.3)] {
        let params = ProblemParams::new(2.0, vec![delta, delta], eps)?;
        let mut worst = f64::INFINITY;
        for _ in 0..cfg.pair_samples {
            let a: f64 = rng.gen_range(-6.0..=6.0);
            let b: f64 = rng.gen_range(-6.0..=6.0);
            let lhs = (potential_component_smoothed_derivative(0, a, &params)?
                - potential_component_smoothed_derivative(0, b, &params)?)
                * (a - b);
            let dk = map_k(0, a, &params)? - map_k(0, b, &params)?;
            worst = worst.min(lhs - dk * dk);
        }
        configs.push(outcome(format!("delta={delta},eps={eps}"), cfg.pair_samples, worst, PAIR_TOL));
    }
    Ok(SuiteReport::new("convexity_surrogate", cfg.seed, PAIR_TOL, configs))
}

fn ellipticity_configs() -> Result<Vec<ProblemParams>> {
    [
        (2.0, vec![1.0, 1.0], 0.1),
        (2.0, vec![0.5, 2.0, 0.0], 0.25),
        (2.5, vec![1.0, 0.0], 0.05),
        (3.0, vec![1.0, 1.0], 0.1),
        (3.0, vec![0.0, 2.0, 0.5], 0.01),
        (4.0, vec![1.0, 1.0], 0.5),
        (4.0, vec![0.3, 0.0, 1.5, 2.0], 0.2),
    ]
    .into_iter()
    .map(|(p, d, e)| ProblemParams::new(p, d, e))
    .collect()
}

fn label(params: &ProblemParams) -> String {
    format!("p={},delta={:?},eps={}", params.p(), params.delta(), params.epsilon())
}

/// Distance of `xi` from the branch points of the one-dimensional profiles.
fn seam_distance(xi: &[f64], params: &ProblemParams) -> f64 {
    let eps = params.epsilon();
    xi.iter()
        .zip(params.delta())
        .flat_map(|(&x, &d)| {
            let r = x.abs() - d;
            let quad = params.p() == 2.0 && d > 0.0;
            [
                if d > 0.0 || params.p() < 3.0 { r.abs() } else { f64::INFINITY },
                if quad { (r - eps).abs() } else { f64::INFINITY },
                if quad { (r + eps).abs() } else { f64::INFINITY },
            ]
        })
        .fold(f64::INFINITY, f64::min)
}

/// Both ellipticity bounds on random `(ξ, ζ)`, and the Hessian against a centered
/// difference of the flux away from branch points.
pub fn ellipticity_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut configs = Vec::new();
    for params in ellipticity_configs()? {
        let n = params.n();
        let mut worst_sandwich = f64::INFINITY;
        let mut worst_fd = f64::INFINITY;
        let mut fd_samples = 0;
        let mut xi = vec![0.0; n];
        let mut zeta = vec![0.0; n];
        let (mut plus, mut minus) = (vec![0.0; n], vec![0.0; n]);
        for _ in 0..cfg.pair_samples {
            xi.iter_mut().for_each(|v| *v = rng.gen_range(-4.0..=4.0));
            zeta.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..=1.0));
            let h = hessian(&xi, &params)?;
            let q = h.quad_form(&zeta);
            let z2: f64 = zeta.iter().map(|v| v * v).sum();
            let (lo, hi) = ellipticity_bounds(&xi, &params);
            let scale = (hi * z2).max(f64::MIN_POSITIVE);
            worst_sandwich = worst_sandwich.min((q - lo * z2).min(hi * z2 - q) / scale);

            if seam_distance(&xi, &params) < 1e-3 {
                continue;
            }
            fd_samples += 1;
            let step = 1e-6;
            let mut err: f64 = 0.0;
            let mut size: f64 = 0.0;
            for c in 0..n {
                let mut x = xi.clone();
                x[c] += step;
                flux_into(&x, &params, &mut plus);
                x[c] -= 2.0 * step;
                flux_into(&x, &params, &mut minus);
                for r in 0..n {
                    let fd = (plus[r] - minus[r]) / (2.0 * step);
                    err = err.max((fd - h.get(r, c)).abs());
                    size = size.max(h.get(r, c).abs());
                }
            }
            worst_fd = worst_fd.min(HESSIAN_FD_TOL - err / size);
        }
        configs.push(outcome(
            format!("{}:sandwich", label(&params)),
            cfg.pair_samples,
            worst_sandwich,
            ELLIPTICITY_TOL,
        ));
        // margin is tolerance minus relative error, so the pass threshold is zero
        configs.push(outcome(format!("{}:hessian_fd", label(&params)), fd_samples, worst_fd, 0.0));
    }
    Ok(SuiteReport::new("ellipticity", cfg.seed, ELLIPTICITY_TOL, configs))
}

/// All four suites in a fixed order.
pub fn run_all(cfg: &SuiteConfig) -> Result<Vec<SuiteReport>> {
    Ok(vec![
        smoothing_gap_suite(cfg)?,
        monotonicity_suite(cfg)?,
        convexity_surrogate_suite(cfg)?,
        ellipticity_suite(cfg)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> SuiteConfig {
        SuiteConfig {
            seed: 3,
            smoothing_samples: 2000,
            pair_samples: 500,
        }
    }

    #[test]
    fn suites_pass_on_small_samples() {
        for rep in run_all(&quick()).unwrap() {
            assert!(rep.passed, "{rep:?}");
        }
    }

    #[test]
    fn same_seed_same_report() {
        assert_eq!(monotonicity_suite(&quick()).unwrap(), monotonicity_suite(&quick()).unwrap());
    }

    #[test]
    fn seams_are_detected() {
        let params = ProblemParams::new(2.0, vec![1.0, 5.0], 0.1).unwrap();
        assert!(seam_distance(&[1.1, 2.0], &params) < 1e-12);
        assert!(seam_distance(&[-0.9, 2.0], &params) < 1e-12);
        assert!(seam_distance(&[2.0, 2.0], &params) > 0.5);
    }
}
