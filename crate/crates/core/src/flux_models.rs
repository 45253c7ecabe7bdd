//! Closed-form potentials, fluxes and Hessians of the orthotropic energy and of
//! its ε-regularization, together with the scalar auxiliary maps `J_λ`, `H_λ`
//! and `K_{i,ε}` used by the energy estimates.
//!
//! Branch seams of the smoothed quadratic profile (`|s| = δᵢ ± ε`) are evaluated
//! with the closed form of the adjacent outer branch. Value, first and second
//! derivative all agree there, so only one-sided derivative tests can tell.

use crate::error::{Error, Result};
use crate::params::ProblemParams;

/// `x^e` for `x >= 0`, exact for small integer exponents.
#[inline]
pub(crate) fn pow_nonneg(x: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else if e.fract() == 0.0 && e.abs() <= 16.0 {
        x.powi(e as i32)
    } else if x == 0.0 {
        0.0
    } else {
        x.powf(e)
    }
}

#[inline]
fn sign(s: f64) -> f64 {
    if s > 0.0 {
        1.0
    } else if s < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[inline]
fn norm_sq(xi: &[f64]) -> f64 {
    xi.iter().map(|x| x * x).sum()
}

/// `gᵢ(s) = (1/p)(|s| − δᵢ)₊^p`.
pub fn potential_component(i: usize, s: f64, params: &ProblemParams) -> f64 {
    let p = params.p();
    let r = (s.abs() - params.delta()[i]).max(0.0);
    pow_nonneg(r, p) / p
}

/// `gᵢ′(s) = J_{δᵢ}(s)`.
pub fn potential_component_derivative(i: usize, s: f64, params: &ProblemParams) -> f64 {
    map_j(s, params.delta()[i], params.p())
}

/// `gᵢ″(s) = (p − 1)(|s| − δᵢ)₊^{p−2}`; for `p = 2` the indicator of `|s| > δᵢ`
/// (identically one when `δᵢ = 0`).
pub fn potential_component_second(i: usize, s: f64, params: &ProblemParams) -> f64 {
    let p = params.p();
    let d = params.delta()[i];
    if params.is_quadratic() {
        if d == 0.0 || s.abs() > d {
            1.0
        } else {
            0.0
        }
    } else {
        (p - 1.0) * pow_nonneg((s.abs() - d).max(0.0), p - 2.0)
    }
}

/// Value, derivative and second derivative of the C² cubic-matched profile
/// `g_{i,ε}` smoothing `(|s| − δ)₊²/2` for `p = 2`, `0 < ε < δ`.
#[inline]
pub(crate) fn smoothed_quadratic(s: f64, delta: f64, eps: f64) -> (f64, f64, f64) {
    let r = s.abs() - delta;
    if r <= -eps {
        (0.0, 0.0, 0.0)
    } else if r >= eps {
        (eps * eps / 6.0 + 0.5 * r * r, sign(s) * r, 1.0)
    } else {
        let w = r + eps;
        (
            w * w * w / (12.0 * eps),
            sign(s) * w * w / (4.0 * eps),
            w / (2.0 * eps),
        )
    }
}

fn check_smoothed(i: usize, params: &ProblemParams) -> Result<()> {
    if !params.is_quadratic() {
        return Err(Error::param(
            "p",
            format!("the smoothed profile is only defined for p = 2, got {}", params.p()),
        ));
    }
    let d = params.delta()[i];
    let eps = params.epsilon();
    if d > 0.0 && !(eps > 0.0 && eps < d) {
        return Err(Error::param(
            "epsilon",
            format!("smoothing axis {i} needs 0 < epsilon < delta = {d}, got {eps}"),
        ));
    }
    Ok(())
}

/// `(g̃, g̃′, g̃″)` for axis `i` with `p = 2`: the smoothed profile when `δᵢ > 0`, else `s²/2`.
#[inline]
pub(crate) fn smoothed_component_parts(i: usize, s: f64, params: &ProblemParams) -> (f64, f64, f64) {
    let d = params.delta()[i];
    if d > 0.0 {
        smoothed_quadratic(s, d, params.epsilon())
    } else {
        (0.5 * s * s, s, 1.0)
    }
}

/// `g̃_{i,ε}(s)` (`p = 2` only).
pub fn potential_component_smoothed(i: usize, s: f64, params: &ProblemParams) -> Result<f64> {
    check_smoothed(i, params)?;
    Ok(smoothed_component_parts(i, s, params).0)
}

/// `g̃′_{i,ε}(s)` (`p = 2` only).
pub fn potential_component_smoothed_derivative(
    i: usize,
    s: f64,
    params: &ProblemParams,
) -> Result<f64> {
    check_smoothed(i, params)?;
    Ok(smoothed_component_parts(i, s, params).1)
}

/// `g̃″_{i,ε}(s)` (`p = 2` only).
pub fn potential_component_smoothed_second(
    i: usize,
    s: f64,
    params: &ProblemParams,
) -> Result<f64> {
    check_smoothed(i, params)?;
    Ok(smoothed_component_parts(i, s, params).2)
}

/// `G(ξ) = (1/p)(1 + |ξ|²)^{p/2}`.
pub fn isotropic_g(xi: &[f64], p: f64) -> f64 {
    pow_nonneg(1.0 + norm_sq(xi), p / 2.0) / p
}

/// The limit potential `F₀` when `ε = 0`, otherwise the regularized `F_ε`.
pub fn potential_total(xi: &[f64], params: &ProblemParams) -> f64 {
    debug_assert_eq!(xi.len(), params.n());
    let eps = params.epsilon();
    if eps == 0.0 {
        return (0..xi.len())
            .map(|i| potential_component(i, xi[i], params))
            .sum();
    }
    if params.is_quadratic() {
        let orth: f64 = (0..xi.len())
            .map(|i| smoothed_component_parts(i, xi[i], params).0)
            .sum();
        orth + 0.5 * eps * (1.0 + norm_sq(xi))
    } else {
        let orth: f64 = (0..xi.len())
            .map(|i| potential_component(i, xi[i], params))
            .sum();
        orth + eps * isotropic_g(xi, params.p())
    }
}

/// Writes `D_ξ F(ξ)` into `out`.
#[inline]
pub fn flux_into(xi: &[f64], params: &ProblemParams, out: &mut [f64]) {
    let n = xi.len();
    let eps = params.epsilon();
    let p = params.p();
    if eps == 0.0 {
        for i in 0..n {
            out[i] = map_j(xi[i], params.delta()[i], p);
        }
    } else if params.is_quadratic() {
        for i in 0..n {
            out[i] = smoothed_component_parts(i, xi[i], params).1 + eps * xi[i];
        }
    } else {
        let weight = eps * pow_nonneg(1.0 + norm_sq(xi), (p - 2.0) / 2.0);
        for i in 0..n {
            out[i] = map_j(xi[i], params.delta()[i], p) + weight * xi[i];
        }
    }
}

pub fn flux(xi: &[f64], params: &ProblemParams) -> Vec<f64> {
    let mut out = vec![0.0; xi.len()];
    flux_into(xi, params, &mut out);
    out
}

/// Dense symmetric `n × n` matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n);
        SymMatrix { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `⟨Aζ, ζ⟩`.
    pub fn quad_form(&self, z: &[f64]) -> f64 {
        quad_form(&self.data, z)
    }

    pub fn mul_vec(&self, z: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * z[j]).sum())
            .collect()
    }
}

/// `⟨Aζ, ζ⟩` for a row-major square block.
#[inline]
pub(crate) fn quad_form(a: &[f64], z: &[f64]) -> f64 {
    let n = z.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += a[i * n + j] * z[j];
        }
        acc += row * z[i];
    }
    acc
}

/// Writes the Hessian formula into a row-major `n × n` block without rejecting `ε = 0`.
///
/// With `ε = 0` this is the (possibly singular) Hessian of the limit potential away
/// from its kinks; the solver relies on it only in the heat mode, where it is `I`.
#[inline]
pub(crate) fn hessian_into_unchecked(xi: &[f64], params: &ProblemParams, out: &mut [f64]) {
    let n = xi.len();
    let eps = params.epsilon();
    let p = params.p();
    out[..n * n].iter_mut().for_each(|v| *v = 0.0);
    if params.is_quadratic() {
        for i in 0..n {
            let second = if eps > 0.0 {
                smoothed_component_parts(i, xi[i], params).2
            } else {
                potential_component_second(i, xi[i], params)
            };
            out[i * n + i] = second + eps;
        }
        return;
    }
    for i in 0..n {
        out[i * n + i] = potential_component_second(i, xi[i], params);
    }
    if eps > 0.0 {
        let base = 1.0 + norm_sq(xi);
        let scale = eps * pow_nonneg(base, (p - 4.0) / 2.0);
        for i in 0..n {
            for j in 0..n {
                let mut v = (p - 2.0) * xi[i] * xi[j];
                if i == j {
                    v += base;
                }
                out[i * n + j] += scale * v;
            }
        }
    }
}

/// `D²F_ε(ξ)`. Rejects `ε = 0`: the limit potential is not C² across its kinks.
pub fn hessian(xi: &[f64], params: &ProblemParams) -> Result<SymMatrix> {
    if !params.is_regularized() {
        return Err(Error::param(
            "epsilon",
            "the Hessian is only available for a regularized potential (epsilon > 0)",
        ));
    }
    let n = xi.len();
    let mut data = vec![0.0; n * n];
    hessian_into_unchecked(xi, params, &mut data);
    Ok(SymMatrix { n, data })
}

/// Coefficients `(λ, Λ)` with `λ|ζ|² ≤ ⟨D²F_ε(ξ)ζ, ζ⟩ ≤ Λ|ζ|²`.
pub fn ellipticity_bounds(xi: &[f64], params: &ProblemParams) -> (f64, f64) {
    let p = params.p();
    let eps = params.epsilon();
    let w = pow_nonneg(1.0 + norm_sq(xi), (p - 2.0) / 2.0);
    (eps * w, (1.0 + eps) * (p - 1.0) * w)
}

/// `J_λ(s) = (|s| − λ)₊^{p−1} s/|s|`, zero at `s = 0`.
#[inline]
pub fn map_j(s: f64, lambda: f64, p: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    sign(s) * pow_nonneg((s.abs() - lambda).max(0.0), p - 1.0)
}

/// `H_λ(s) = (|s| − λ)₊^{p/2} s/|s|`, zero at `s = 0`.
#[inline]
pub fn map_h(s: f64, lambda: f64, p: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    sign(s) * pow_nonneg((s.abs() - lambda).max(0.0), p / 2.0)
}

#[inline]
pub(crate) fn map_k_unchecked(i: usize, s: f64, params: &ProblemParams) -> f64 {
    let d = params.delta()[i];
    if d == 0.0 {
        return s;
    }
    let eps = params.epsilon();
    let r = s.abs() - d;
    let magnitude = if r <= -eps {
        0.0
    } else if r >= eps {
        4.0 * eps / 3.0 + (r - eps)
    } else {
        let w = r + eps;
        (2.0 / 3.0) * w * (w / (2.0 * eps)).sqrt()
    };
    sign(s) * magnitude
}

/// `K_{i,ε}(s) = ∫₀ˢ √g̃″_{i,ε}(τ) dτ` in closed form (`p = 2` only).
pub fn map_k(i: usize, s: f64, params: &ProblemParams) -> Result<f64> {
    check_smoothed(i, params)?;
    Ok(map_k_unchecked(i, s, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx_eq::assert_close;

    mod approx_eq {
        macro_rules! assert_close {
            ($a:expr, $b:expr, $tol:expr) => {{
                let (a, b, tol): (f64, f64, f64) = ($a, $b, $tol);
                assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
            }};
        }
        pub(crate) use assert_close;
    }

    fn params(p: f64, delta: &[f64], eps: f64) -> ProblemParams {
        ProblemParams::new(p, delta.to_vec(), eps).unwrap()
    }

    #[test]
    fn potential_component_examples() {
        let pr = params(2.0, &[1.0, 0.0], 0.5);
        assert_eq!(potential_component(0, 0.0, &pr), 0.0);
        assert_eq!(potential_component(0, 2.0, &pr), 0.5);
        let pr = params(3.0, &[0.0, 0.0], 0.0);
        assert_close!(potential_component(0, -2.0, &pr), 8.0 / 3.0, 1e-15);
    }

    #[test]
    fn smoothed_component_examples() {
        let pr = params(2.0, &[1.0, 1.0], 0.5);
        assert_eq!(potential_component_smoothed(0, 0.4, &pr).unwrap(), 0.0);
        assert_close!(potential_component_smoothed(0, 1.0, &pr).unwrap(), 1.0 / 48.0, 1e-15);
        assert_close!(
            potential_component_smoothed(0, 1.5, &pr).unwrap(),
            0.25 / 6.0 + 0.125,
            1e-15
        );
        let cubic = params(3.0, &[1.0, 1.0], 0.5);
        assert!(potential_component_smoothed(0, 1.0, &cubic).is_err());
    }

    #[test]
    fn smoothed_profile_is_c2_at_seams() {
        let (d, eps) = (1.0, 0.3);
        for seam in [d - eps, d + eps] {
            let inside = smoothed_quadratic(seam - 1e-9, d, eps);
            let outside = smoothed_quadratic(seam + 1e-9, d, eps);
            assert_close!(inside.0, outside.0, 1e-8);
            assert_close!(inside.1, outside.1, 1e-8);
            assert_close!(inside.2, outside.2, 1e-8);
        }
    }

    #[test]
    fn potential_total_examples() {
        assert_eq!(potential_total(&[0.0, 0.0], &params(3.0, &[1.0, 1.0], 0.0)), 0.0);
        assert_close!(potential_total(&[0.0, 0.0], &params(3.0, &[1.0, 1.0], 0.2)), 0.2 / 3.0, 1e-15);
        assert_close!(potential_total(&[1.0, 1.0], &params(3.0, &[0.0, 0.0], 0.0)), 2.0 / 3.0, 1e-15);
    }

    #[test]
    fn flux_examples() {
        let pr = params(3.0, &[1.0, 1.0], 0.0);
        assert_eq!(flux(&[0.7, -1.0], &pr), vec![0.0, 0.0]);
        assert_eq!(flux(&[2.0, 0.0], &pr), vec![1.0, 0.0]);
    }

    #[test]
    fn hessian_examples() {
        let h = hessian(&[0.0, 0.0], &params(4.0, &[1.0, 1.0], 0.5)).unwrap();
        assert_eq!(h.as_slice(), &[0.5, 0.0, 0.0, 0.5]);
        let h = hessian(&[5.0, 5.0], &params(2.0, &[1.0, 1.0], 0.25)).unwrap();
        assert_eq!(h.as_slice(), &[1.25, 0.0, 0.0, 1.25]);
        assert!(hessian(&[1.0, 1.0], &params(3.0, &[1.0, 1.0], 0.0)).is_err());
    }

    #[test]
    fn maps_examples() {
        assert_eq!(map_j(0.0, 1.0, 3.0), 0.0);
        assert_eq!(map_j(2.0, 1.0, 3.0), 1.0);
        assert_eq!(map_j(-3.0, 1.0, 2.0), -2.0);
        assert_eq!(map_h(0.5, 1.0, 3.0), 0.0);
        assert_eq!(map_h(5.0, 1.0, 2.0), 4.0);
        assert_eq!(map_h(5.0, 1.0, 4.0), 16.0);
        assert_eq!(isotropic_g(&[0.0, 0.0], 2.0), 0.5);
        assert_eq!(isotropic_g(&[0.0, 0.0, 0.0], 3.7), 1.0 / 3.7);
        assert_eq!(isotropic_g(&[1.0, 1.0, 1.0], 4.0), 4.0);
    }

    /// Second derivative of the smoothed profile, written out independently of the module.
    fn oracle_second(tau: f64, d: f64, eps: f64) -> f64 {
        let a = tau.abs();
        if a <= d - eps {
            0.0
        } else if a >= d + eps {
            1.0
        } else {
            (a - d + eps) / (2.0 * eps)
        }
    }

    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 60)
    }

    fn k_by_quadrature(s: f64, d: f64, eps: f64) -> f64 {
        let f = |t: f64| oracle_second(t, d, eps).sqrt();
        // Split at the seams so each piece is smooth up to its endpoints.
        let a = s.abs();
        let mut knots = vec![0.0];
        for k in [d - eps, d + eps] {
            if k > 0.0 && k < a {
                knots.push(k);
            }
        }
        knots.push(a);
        let total: f64 = knots
            .windows(2)
            .map(|w| adaptive_simpson(&f, w[0], w[1], 1e-14))
            .sum();
        s.signum() * total
    }

    #[test]
    fn map_k_examples_against_quadrature() {
        let pr = params(2.0, &[1.0, 1.0], 0.5);
        assert_eq!(map_k(0, 0.4, &pr).unwrap(), 0.0);
        // Frozen from the quadrature oracle: 2/3 and 13/6.
        assert_close!(k_by_quadrature(1.5, 1.0, 0.5), 2.0 / 3.0, 1e-10);
        assert_close!(k_by_quadrature(3.0, 1.0, 0.5), 13.0 / 6.0, 1e-10);
        assert_close!(map_k(0, 1.5, &pr).unwrap(), 2.0 / 3.0, 1e-12);
        assert_close!(map_k(0, 3.0, &pr).unwrap(), 13.0 / 6.0, 1e-12);
        assert!(map_k(0, 1.0, &params(3.0, &[1.0, 1.0], 0.5)).is_err());
    }

    #[test]
    fn map_k_matches_quadrature_densely() {
        for &(d, eps) in &[(1.0, 0.5), (1.0, 0.1), (2.0, 0.01), (0.3, 0.2)] {
            let pr = params(2.0, &[d, d], eps);
            for k in -60..=60 {
                let s = k as f64 * 0.07 + 0.013;
                assert_close!(map_k(0, s, &pr).unwrap(), k_by_quadrature(s, d, eps), 1e-10);
            }
        }
    }

    #[test]
    fn flux_matches_potential_finite_differences() {
        let configs = [
            params(3.0, &[1.0, 0.5], 0.1),
            params(2.0, &[1.0, 0.0], 0.3),
            params(4.0, &[0.0, 2.0], 0.2),
            params(2.5, &[0.7, 0.7, 0.0], 0.05),
        ];
        for pr in &configs {
            let n = pr.n();
            for k in 0..40 {
                let xi: Vec<f64> = (0..n).map(|i| 3.0 * ((k * (i + 3)) as f64 * 0.37).sin()).collect();
                let f = flux(&xi, pr);
                for i in 0..n {
                    let h = 1e-6;
                    let mut plus = xi.clone();
                    let mut minus = xi.clone();
                    plus[i] += h;
                    minus[i] -= h;
                    let fd = (potential_total(&plus, pr) - potential_total(&minus, pr)) / (2.0 * h);
                    let scale = f[i].abs().max(1.0);
                    assert!((fd - f[i]).abs() <= 1e-6 * scale, "{fd} vs {} at {xi:?}", f[i]);
                }
            }
        }
    }

    #[test]
    fn parity() {
        let pr = params(2.0, &[1.0, 0.0], 0.25);
        for k in 0..50 {
            let s = k as f64 * 0.11;
            assert_eq!(potential_component(0, s, &pr), potential_component(0, -s, &pr));
            assert_eq!(
                potential_component_smoothed(0, s, &pr).unwrap(),
                potential_component_smoothed(0, -s, &pr).unwrap()
            );
            assert_eq!(map_j(s, 1.0, 3.0), -map_j(-s, 1.0, 3.0));
            assert_eq!(map_h(s, 1.0, 3.0), -map_h(-s, 1.0, 3.0));
            assert_eq!(map_k(0, s, &pr).unwrap(), -map_k(0, -s, &pr).unwrap());
        }
    }
}
