use super::{snap_cylinder, Grid, ParabolicCylinder, SpaceCube, VectorField};
use crate::error::{Error, Result};

/// Largest slope of the quintic ramp `6t⁵ − 15t⁴ + 10t³`.
const QUINTIC_MAX_SLOPE: f64 = 15.0 / 8.0;
/// Largest slope of the cubic ramp `3t² − 2t³`.
const CUBIC_MAX_SLOPE: f64 = 1.5;

fn quintic(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        (0.0, 0.0)
    } else if t >= 1.0 {
        (1.0, 0.0)
    } else {
        let t2 = t * t;
        (t2 * t * (10.0 + t * (6.0 * t - 15.0)), 30.0 * t2 * (t - 1.0) * (t - 1.0))
    }
}

fn cubic(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        (0.0, 0.0)
    } else if t >= 1.0 {
        (1.0, 0.0)
    } else {
        (t * t * (3.0 - 2.0 * t), 6.0 * t * (1.0 - t))
    }
}

/// Spatial bump `η` and time ramp `χ` adapted to `Q_r ⊂ Q_R` with a shared apex.
///
/// `eta` and `eta_grad` are sampled on every spatial node; `chi` and `chi_dt` on every
/// time slice. The realized constants satisfy `|Dη| ≤ c_eta/(R − r)` and
/// `∂ₜχ ≤ c_chi/(R − r)^p`; `c_tilde` is the larger of the two.
#[derive(Clone, Debug, PartialEq)]
pub struct CutoffPair {
    pub inner: f64,
    pub outer: f64,
    pub outer_cylinder: ParabolicCylinder,
    pub eta: Vec<f64>,
    pub eta_grad: VectorField,
    pub chi: Vec<f64>,
    pub chi_dt: Vec<f64>,
    pub c_eta: f64,
    pub c_chi: f64,
    pub c_tilde: f64,
}

impl CutoffPair {
    /// The same pair with `η ≡ 0`.
    pub fn with_zero_eta(mut self) -> Self {
        self.eta.iter_mut().for_each(|v| *v = 0.0);
        let n = self.eta_grad.dim();
        self.eta_grad = VectorField::new(n, vec![0.0; self.eta_grad.values().len()]);
        self
    }

    /// The same pair with `χ ≡ 0`.
    pub fn with_zero_chi(mut self) -> Self {
        self.chi.iter_mut().for_each(|v| *v = 0.0);
        self.chi_dt.iter_mut().for_each(|v| *v = 0.0);
        self
    }
}

/// Builds the tensor-product quintic bump and the cubic time ramp for the concentric
/// cylinders of radii `r < R ≤ 1` centered at `center` with apex `t0`.
pub fn build_cutoffs(
    r: f64,
    big_r: f64,
    center: &[f64],
    t0: f64,
    p: f64,
    grid: &Grid,
) -> Result<CutoffPair> {
    if !(r > 0.0 && r < big_r) {
        return Err(Error::param("r", format!("need 0 < r < R, got r = {r}, R = {big_r}")));
    }
    if big_r > 1.0 {
        return Err(Error::param("R", format!("need R <= 1, got {big_r}")));
    }
    let outer = ParabolicCylinder::new(SpaceCube::new(center.to_vec(), big_r)?, t0, p)?;
    snap_cylinder(grid, &outer)?;
    let n = grid.n();
    let width = big_r - r;
    let m = grid.spatial_len();
    let mut eta = vec![0.0; m];
    let mut grad = vec![0.0; m * n];
    let mut x = vec![0.0; n];
    let mut ramps = vec![(0.0, 0.0); n];
    for node in 0..m {
        grid.node_coords(node, &mut x);
        for d in 0..n {
            let off = x[d] - center[d];
            let (v, dv) = quintic((big_r - off.abs()) / width);
            ramps[d] = (v, -dv * off.signum() / width);
        }
        eta[node] = ramps.iter().map(|r| r.0).product();
        for d in 0..n {
            let others: f64 = (0..n).filter(|&e| e != d).map(|e| ramps[e].0).product();
            grad[node * n + d] = ramps[d].1 * others;
        }
    }
    let span = big_r.powf(p) - r.powf(p);
    let start = t0 - big_r.powf(p);
    let (chi, chi_dt): (Vec<f64>, Vec<f64>) = (0..grid.slices())
        .map(|k| {
            let (v, dv) = cubic((grid.time(k) - start) / span);
            (v, dv / span)
        })
        .unzip();
    let c_eta = QUINTIC_MAX_SLOPE * (n as f64).sqrt();
    let c_chi = CUBIC_MAX_SLOPE * width.powf(p) / span;
    Ok(CutoffPair {
        inner: r,
        outer: big_r,
        outer_cylinder: outer,
        eta,
        eta_grad: VectorField::new(n, grad),
        chi,
        chi_dt,
        c_eta,
        c_chi,
        c_tilde: c_eta.max(c_chi),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(SpaceCube::new(vec![0.0, 0.0], 1.0).unwrap(), 33, (0.0, 1.0), 64).unwrap()
    }

    #[test]
    fn ramps_are_smooth() {
        for t in [0.0, 0.5, 1.0] {
            let h = 1e-6;
            let fd = (quintic(t + h).0 - quintic(t - h).0) / (2.0 * h);
            assert!((fd - quintic(t).1).abs() < 1e-6);
        }
        assert_eq!(quintic(0.5).1, QUINTIC_MAX_SLOPE);
        assert_eq!(cubic(0.5).1, CUBIC_MAX_SLOPE);
    }

    #[test]
    fn invariants_hold() {
        let g = grid();
        let (r, big_r, p, t0) = (0.25, 0.5, 3.0, 1.0);
        let c = build_cutoffs(r, big_r, &[0.0, 0.0], t0, p, &g).unwrap();
        let mut x = [0.0; 2];
        for node in 0..g.spatial_len() {
            g.node_coords(node, &mut x);
            let e = c.eta[node];
            assert!((0.0..=1.0).contains(&e));
            if x.iter().all(|v| v.abs() <= r) {
                assert_eq!(e, 1.0);
            }
            if x.iter().any(|v| v.abs() >= big_r) {
                assert_eq!(e, 0.0);
            }
            assert!(c.eta_grad.magnitude(node) <= c.c_eta / (big_r - r) + 1e-12);
        }
        for k in 0..g.slices() {
            let t = g.time(k);
            if t <= t0 - big_r.powf(p) {
                assert_eq!(c.chi[k], 0.0);
            }
            if t >= t0 - r.powf(p) {
                assert_eq!(c.chi[k], 1.0);
            }
            assert!(c.chi_dt[k] <= c.c_chi / (big_r - r).powf(p) + 1e-12);
            if k > 0 {
                assert!(c.chi[k] >= c.chi[k - 1]);
            }
        }
        assert!(c.c_tilde <= 4.0);
    }

    #[test]
    fn rejects_bad_radii() {
        let g = grid();
        assert!(build_cutoffs(0.5, 0.5, &[0.0, 0.0], 1.0, 2.0, &g).is_err());
        assert!(build_cutoffs(0.5, 1.5, &[0.0, 0.0], 1.0, 2.0, &g).is_err());
        assert!(build_cutoffs(0.2, 0.5, &[0.0, 0.0], 0.1, 2.0, &g).is_err());
    }
}
