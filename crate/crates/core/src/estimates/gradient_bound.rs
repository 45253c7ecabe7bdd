use serde::{Deserialize, Serialize};

use super::report::{fmt_f, CsvRecord};
use crate::error::{Error, Result};
use crate::flux_models::pow_nonneg;
use crate::grid::ops::{integrate_snapped, snap_cylinder};
use crate::grid::{gradient_all, sup_norm_over_cylinder, Field, ParabolicCylinder, SpaceCube};
use crate::params::ProblemParams;

/// Scaling fit of the local gradient bound on one pair of concentric cylinders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientBoundReport {
    pub inner: f64,
    pub outer: f64,
    pub theta: f64,
    /// `‖Du‖_{L∞(Q_r)}`.
    pub lhs_sup: f64,
    /// `1 + (∬_{Q_R}|Du|^p)^{1/2}`.
    pub rhs_bracket: f64,
    /// `lhs_sup (R − r)^{ϑp} / rhs_bracket`.
    pub c_fit: f64,
    pub snap_distance: f64,
}

/// `(n + 2)/2` for `n ≥ 3` and `2.5` for `n = 2`.
pub fn default_theta(n: usize) -> f64 {
    if n == 2 {
        2.5
    } else {
        (n as f64 + 2.0) / 2.0
    }
}

/// Checks a user exponent: any value `> 2` when `n = 2`, exactly `(n + 2)/2` otherwise.
pub fn resolve_theta(n: usize, theta: Option<f64>) -> Result<f64> {
    let Some(t) = theta else {
        return Ok(default_theta(n));
    };
    if n == 2 {
        if !(t.is_finite() && t > 2.0) {
            return Err(Error::param("theta", format!("need theta > 2 when n = 2, got {t}")));
        }
    } else if t != default_theta(n) {
        return Err(Error::param(
            "theta",
            format!("theta is fixed to {} for n = {n}, got {t}", default_theta(n)),
        ));
    }
    Ok(t)
}

/// One [`GradientBoundReport`] per `(r, R)` pair, cylinders centered at `center` with apex `apex`.
pub fn gradient_bound_check(
    field: &Field,
    center: &[f64],
    apex: f64,
    radii: &[(f64, f64)],
    params: &ProblemParams,
    theta: Option<f64>,
) -> Result<Vec<GradientBoundReport>> {
    let grid = field.grid();
    if params.n() != grid.n() {
        return Err(Error::GridMismatch("parameter and grid dimensions differ".into()));
    }
    let theta = resolve_theta(params.n(), theta)?;
    let p = params.p();
    let grads = gradient_all(field);
    radii
        .iter()
        .map(|&(r, big_r)| {
            if !(r > 0.0 && r < big_r) {
                return Err(Error::param("r", format!("need 0 < r < R, got r = {r}, R = {big_r}")));
            }
            if big_r > 1.0 {
                return Err(Error::param("R", format!("need R <= 1, got {big_r}")));
            }
            let outer = ParabolicCylinder::new(SpaceCube::new(center.to_vec(), big_r)?, apex, p)?;
            let inner = outer.with_radius(r)?;
            let lhs_sup = sup_norm_over_cylinder(grid, &grads, &inner)?;
            let snapped = snap_cylinder(grid, &outer)?;
            let nodes = snapped.weighted_nodes(grid);
            let energy = integrate_snapped(grid, &snapped, &nodes, |k, node| {
                pow_nonneg(grads[k].magnitude(node), p)
            });
            let rhs_bracket = 1.0 + energy.sqrt();
            let snap_distance = snapped.snap_distance.max(snap_cylinder(grid, &inner)?.snap_distance);
            Ok(GradientBoundReport {
                inner: r,
                outer: big_r,
                theta,
                lhs_sup,
                rhs_bracket,
                c_fit: lhs_sup * (big_r - r).powf(theta * p) / rhs_bracket,
                snap_distance,
            })
        })
        .collect()
}

impl CsvRecord for GradientBoundReport {
    fn header() -> Vec<&'static str> {
        vec!["inner", "outer", "theta", "lhs_sup", "rhs_bracket", "c_fit", "snap_distance"]
    }

    fn record(&self) -> Vec<String> {
        [
            self.inner,
            self.outer,
            self.theta,
            self.lhs_sup,
            self.rhs_bracket,
            self.c_fit,
            self.snap_distance,
        ]
        .into_iter()
        .map(fmt_f)
        .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn theta_rules() {
        assert_eq!(resolve_theta(2, None).unwrap(), 2.5);
        assert_eq!(resolve_theta(3, None).unwrap(), 2.5);
        assert_eq!(resolve_theta(4, None).unwrap(), 3.0);
        assert!(resolve_theta(2, Some(2.0)).is_err());
        assert!(resolve_theta(3, Some(2.7)).is_err());
        assert_eq!(resolve_theta(2, Some(3.1)).unwrap(), 3.1);
    }

    #[test]
    fn affine_field_formula() {
        let grid = Grid::new(SpaceCube::new(vec![0.0, 0.0], 1.0).unwrap(), 33, (0.0, 0.5), 32).unwrap();
        let f = Field::from_fn(grid, |x, _| 0.06 * x[0] + 0.08 * x[1]).unwrap();
        let params = ProblemParams::new(2.0, vec![0.0, 0.0], 0.0).unwrap();
        let rep = gradient_bound_check(&f, &[0.0, 0.0], 0.5, &[(0.25, 0.5)], &params, Some(2.5)).unwrap();
        let r = &rep[0];
        assert!((r.lhs_sup - 0.1).abs() < 1e-12);
        // |Q_R| = 1 · 0.25, |Du|² = 0.01
        let bracket = 1.0 + (0.01f64 * 0.25).sqrt();
        assert!((r.rhs_bracket - bracket).abs() < 1e-12);
        assert!((r.c_fit - 0.1 * 0.25f64.powi(5) / bracket).abs() < 1e-14);
        assert!(r.c_fit <= 0.1);
        assert!(gradient_bound_check(&f, &[0.0, 0.0], 0.5, &[(0.5, 0.25)], &params, None).is_err());
        assert!(gradient_bound_check(&f, &[0.0, 0.0], 0.5, &[(0.5, 1.5)], &params, None).is_err());
    }
}
