use rayon::prelude::*;

use super::{Field, Grid, ParabolicCylinder, VectorField};
use crate::error::{Error, Result};
use crate::flux_models::flux_into;
use crate::params::ProblemParams;

const SNAP_TOL: f64 = 1e-9;

fn check_slice(grid: &Grid, slice: usize) -> Result<()> {
    if slice >= grid.slices() {
        return Err(Error::param(
            "slice",
            format!("time index {slice} out of range 0..{}", grid.slices()),
        ));
    }
    Ok(())
}

/// Centered differences inside, one-sided second-order differences on the boundary.
pub(crate) fn gradient_slice(grid: &Grid, u: &[f64]) -> VectorField {
    let n = grid.n();
    let nn = grid.nodes_per_axis();
    let inv2h = 1.0 / (2.0 * grid.h());
    let mut values = vec![0.0; u.len() * n];
    values
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(node, out)| {
            let mut rest = node;
            for (d, slot) in out.iter_mut().enumerate() {
                let i = rest % nn;
                rest /= nn;
                let s = grid.stride(d);
                *slot = if i == 0 {
                    (-3.0 * u[node] + 4.0 * u[node + s] - u[node + 2 * s]) * inv2h
                } else if i == nn - 1 {
                    (3.0 * u[node] - 4.0 * u[node - s] + u[node - 2 * s]) * inv2h
                } else {
                    (u[node + s] - u[node - s]) * inv2h
                };
            }
        });
    VectorField::new(n, values)
}

/// Discrete `Du` on one time slice.
pub fn gradient(field: &Field, slice: usize) -> Result<VectorField> {
    check_slice(field.grid(), slice)?;
    Ok(gradient_slice(field.grid(), field.slice(slice)))
}

/// Discrete `Du` on every time slice.
pub fn gradient_all(field: &Field) -> Vec<VectorField> {
    (0..field.grid().slices())
        .map(|k| gradient_slice(field.grid(), field.slice(k)))
        .collect()
}

/// Forward difference `D⁺u` at cell origin `cell`.
#[inline]
pub(crate) fn forward_gradient(grid: &Grid, u: &[f64], cell: usize, out: &mut [f64]) {
    let inv_h = 1.0 / grid.h();
    for (d, slot) in out.iter_mut().enumerate() {
        let s = grid.stride(d);
        *slot = (u[cell + s] - u[cell]) * inv_h;
    }
}

/// Runs `f` on a zeroed scratch buffer of length `n`, on the stack when small.
#[inline]
pub(crate) fn with_scratch<R>(n: usize, f: impl FnOnce(&mut [f64]) -> R) -> R {
    if n <= 8 {
        let mut buf = [0.0; 8];
        f(&mut buf[..n])
    } else {
        f(&mut vec![0.0; n])
    }
}

/// Flux `D_ξF(D⁺u)` at every cell origin, node-major; rows of non-cells are zero.
pub(crate) fn cell_fluxes_into(grid: &Grid, u: &[f64], params: &ProblemParams, out: &mut [f64]) {
    let n = grid.n();
    out.par_chunks_mut(n).enumerate().for_each(|(node, row)| {
        if grid.is_cell(node) {
            with_scratch(n, |xi| {
                forward_gradient(grid, u, node, xi);
                flux_into(xi, params, row);
            });
        } else {
            row.iter_mut().for_each(|r| *r = 0.0);
        }
    });
}

/// Backward differences of the cell fluxes; zero on boundary nodes.
pub(crate) fn divergence_from_cell_fluxes(grid: &Grid, fluxes: &[f64], out: &mut [f64]) {
    let n = grid.n();
    let inv_h = 1.0 / grid.h();
    out.par_iter_mut().enumerate().for_each(|(node, slot)| {
        if grid.is_boundary(node) {
            *slot = 0.0;
            return;
        }
        let mut acc = 0.0;
        for d in 0..n {
            let s = grid.stride(d);
            acc += fluxes[node * n + d] - fluxes[(node - s) * n + d];
        }
        *slot = acc * inv_h;
    });
}

/// Conservative `Σᵢ ∂ᵢ[D_ξF(Du)]ᵢ` on one slice: forward-difference gradients on cells,
/// backward differences of the resulting face fluxes. Boundary nodes get zero.
pub fn divergence_of_flux(field: &Field, params: &ProblemParams, slice: usize) -> Result<Vec<f64>> {
    let grid = field.grid();
    check_slice(grid, slice)?;
    if params.n() != grid.n() {
        return Err(Error::GridMismatch(format!(
            "parameters are {}-dimensional, grid is {}-dimensional",
            params.n(),
            grid.n()
        )));
    }
    let mut fluxes = vec![0.0; grid.spatial_len() * grid.n()];
    cell_fluxes_into(grid, field.slice(slice), params, &mut fluxes);
    let mut out = vec![0.0; grid.spatial_len()];
    divergence_from_cell_fluxes(grid, &fluxes, &mut out);
    Ok(out)
}

/// A cylinder snapped outward to grid nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct SnappedCylinder {
    /// Inclusive node index range per axis.
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
    /// Inclusive time-slice range.
    pub k_lo: usize,
    pub k_hi: usize,
    /// Largest distance any face moved when snapping, in space or time units.
    pub snap_distance: f64,
}

impl SnappedCylinder {
    /// Nodes of the spatial box with their tensor trapezoid weights.
    pub fn weighted_nodes(&self, grid: &Grid) -> Vec<(usize, f64)> {
        let n = grid.n();
        let h = grid.h();
        let mut out = Vec::new();
        let mut idx = self.lo.clone();
        loop {
            let mut w = 1.0;
            for d in 0..n {
                let end = idx[d] == self.lo[d] || idx[d] == self.hi[d];
                w *= if end && self.lo[d] != self.hi[d] { 0.5 * h } else { h };
            }
            out.push((grid.flat_index(&idx), w));
            let mut d = 0;
            loop {
                if d == n {
                    return out;
                }
                if idx[d] < self.hi[d] {
                    idx[d] += 1;
                    break;
                }
                idx[d] = self.lo[d];
                d += 1;
            }
        }
    }

    pub fn nodes(&self, grid: &Grid) -> Vec<usize> {
        self.weighted_nodes(grid).into_iter().map(|(i, _)| i).collect()
    }
}

/// Trapezoid weights of every spatial node of `grid`.
pub(crate) fn full_weights(grid: &Grid) -> Vec<(usize, f64)> {
    let n = grid.n();
    SnappedCylinder {
        lo: vec![0; n],
        hi: vec![grid.nodes_per_axis() - 1; n],
        k_lo: 0,
        k_hi: grid.time_steps(),
        snap_distance: 0.0,
    }
    .weighted_nodes(grid)
}

/// Snaps `cyl` outward to the grid. Fails if the cylinder leaves the grid extent.
pub fn snap_cylinder(grid: &Grid, cyl: &ParabolicCylinder) -> Result<SnappedCylinder> {
    let n = grid.n();
    if cyl.cube.n() != n {
        return Err(Error::GridMismatch(format!(
            "cylinder is {}-dimensional, grid is {n}-dimensional",
            cyl.cube.n()
        )));
    }
    let h = grid.h();
    let last = grid.nodes_per_axis() - 1;
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    let mut snap: f64 = 0.0;
    for d in 0..n {
        let origin = grid.coord(d, 0);
        let a = (cyl.cube.center()[d] - cyl.radius() - origin) / h;
        let b = (cyl.cube.center()[d] + cyl.radius() - origin) / h;
        if a < -SNAP_TOL || b > last as f64 + SNAP_TOL {
            return Err(Error::CylinderOutOfRange(format!(
                "axis {d}: cylinder spans [{}, {}] outside the grid",
                cyl.cube.center()[d] - cyl.radius(),
                cyl.cube.center()[d] + cyl.radius()
            )));
        }
        let i_lo = (a + SNAP_TOL).floor().max(0.0) as usize;
        let i_hi = ((b - SNAP_TOL).ceil() as usize).min(last);
        snap = snap.max((a - i_lo as f64).abs() * h).max((i_hi as f64 - b).abs() * h);
        lo.push(i_lo);
        hi.push(i_hi.max(i_lo));
    }
    let (ta, tb) = cyl.time_extent();
    let (t0, t1) = grid.time_interval();
    let dt = grid.dt();
    let slack = SNAP_TOL * (t1 - t0).max(1.0);
    if ta < t0 - slack || tb > t1 + slack {
        return Err(Error::CylinderOutOfRange(format!(
            "time extent ({ta}, {tb}) leaves the grid window ({t0}, {t1})"
        )));
    }
    let a = (ta - t0) / dt;
    let b = (tb - t0) / dt;
    let k_lo = (a + SNAP_TOL).floor().max(0.0) as usize;
    let k_hi = ((b - SNAP_TOL).ceil() as usize).min(grid.time_steps());
    snap = snap.max((a - k_lo as f64).abs() * dt).max((k_hi as f64 - b).abs() * dt);
    if k_hi <= k_lo {
        return Err(Error::EmptyCylinder);
    }
    Ok(SnappedCylinder {
        lo,
        hi,
        k_lo,
        k_hi,
        snap_distance: snap,
    })
}

/// `∬_Q f [w] dx dt`: tensor trapezoid rule in space, left-endpoint rule in time,
/// over the outward-snapped cylinder.
pub fn integral_over_cylinder(
    integrand: &Field,
    cyl: &ParabolicCylinder,
    weight: Option<&Field>,
) -> Result<f64> {
    let grid = integrand.grid();
    if let Some(w) = weight {
        integrand.check_same_grid(w)?;
    }
    let snapped = snap_cylinder(grid, cyl)?;
    let nodes = snapped.weighted_nodes(grid);
    Ok(integrate_snapped(grid, &snapped, &nodes, |k, node| {
        let f = integrand.slice(k)[node];
        match weight {
            Some(w) => f * w.slice(k)[node],
            None => f,
        }
    }))
}

/// Left-endpoint-in-time, trapezoid-in-space sum of `f(k, node)` over a snapped cylinder.
pub(crate) fn integrate_snapped(
    grid: &Grid,
    snapped: &SnappedCylinder,
    nodes: &[(usize, f64)],
    f: impl Fn(usize, usize) -> f64 + Sync,
) -> f64 {
    let per_slice: Vec<f64> = (snapped.k_lo..snapped.k_hi)
        .into_par_iter()
        .map(|k| nodes.iter().map(|&(node, w)| w * f(k, node)).sum())
        .collect();
    grid.dt() * per_slice.iter().sum::<f64>()
}

/// `max |V|` over nodes of the snapped cylinder, for per-slice vector fields.
pub fn sup_norm_over_cylinder(
    grid: &Grid,
    vectors: &[VectorField],
    cyl: &ParabolicCylinder,
) -> Result<f64> {
    if vectors.len() != grid.slices() {
        return Err(Error::GridMismatch(format!(
            "expected {} slices of vectors, got {}",
            grid.slices(),
            vectors.len()
        )));
    }
    let snapped = snap_cylinder(grid, cyl)?;
    let nodes = snapped.nodes(grid);
    let mut sup: f64 = 0.0;
    for v in &vectors[snapped.k_lo..=snapped.k_hi] {
        for &node in &nodes {
            sup = sup.max(v.magnitude(node));
        }
    }
    Ok(sup)
}

/// `max |f|` over nodes of the snapped cylinder.
pub fn sup_norm_scalar_over_cylinder(field: &Field, cyl: &ParabolicCylinder) -> Result<f64> {
    let grid = field.grid();
    let snapped = snap_cylinder(grid, cyl)?;
    let nodes = snapped.nodes(grid);
    let mut sup: f64 = 0.0;
    for k in snapped.k_lo..=snapped.k_hi {
        let s = field.slice(k);
        for &node in &nodes {
            sup = sup.max(s[node].abs());
        }
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpaceCube;
    use std::f64::consts::PI;

    fn grid(n: usize, nodes: usize, steps: usize) -> Grid {
        Grid::new(SpaceCube::new(vec![0.0; n], 1.0).unwrap(), nodes, (0.0, 1.0), steps).unwrap()
    }

    #[test]
    fn gradient_of_constant_and_affine() {
        let g = grid(2, 6, 1);
        let c = Field::from_fn(g.clone(), |_, _| 3.5).unwrap();
        assert!(gradient(&c, 0).unwrap().values().iter().all(|&v| v == 0.0));
        let a = Field::from_fn(g.clone(), |x, _| 0.3 * x[0] - 1.7 * x[1] + 2.0).unwrap();
        let grad = gradient(&a, 1).unwrap();
        for node in 0..g.spatial_len() {
            assert!((grad.component(node, 0) - 0.3).abs() < 1e-13);
            assert!((grad.component(node, 1) + 1.7).abs() < 1e-13);
        }
        assert!(gradient(&a, 2).is_err());
    }

    #[test]
    fn gradient_exact_on_quadratic_interior() {
        let g = grid(2, 5, 1);
        let f = Field::from_fn(g.clone(), |x, _| x[0] * x[0]).unwrap();
        let grad = gradient(&f, 0).unwrap();
        // x₁ = 0.5 is index 3 with h = 0.5.
        let node = g.flat_index(&[3, 2]);
        assert_eq!(grad.component(node, 0), 1.0);
    }

    #[test]
    fn divergence_vanishes_on_affine_and_degeneracy_set() {
        let g = grid(2, 7, 1);
        let a = Field::from_fn(g.clone(), |x, _| 2.5 * x[0] - 0.5 * x[1]).unwrap();
        for params in [
            ProblemParams::new(3.0, vec![1.0, 1.0], 0.1).unwrap(),
            ProblemParams::new(2.0, vec![1.0, 0.0], 0.5).unwrap(),
        ] {
            let div = divergence_of_flux(&a, &params, 0).unwrap();
            assert!(div.iter().all(|v| v.abs() < 1e-11), "{div:?}");
        }
        let small = Field::from_fn(g.clone(), |x, _| 0.4 * (x[0] * x[1]).sin()).unwrap();
        let params = ProblemParams::new(3.0, vec![1.0, 1.0], 0.0).unwrap();
        let div = divergence_of_flux(&small, &params, 0).unwrap();
        assert!(div.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn divergence_is_second_order_laplacian_in_heat_mode() {
        let params = ProblemParams::new(2.0, vec![0.0, 0.0], 0.0).unwrap();
        let mut errs = Vec::new();
        for nodes in [17, 33] {
            let g = grid(2, nodes, 1);
            let f = Field::from_fn(g.clone(), |x, _| (PI * x[0]).sin()).unwrap();
            let div = divergence_of_flux(&f, &params, 0).unwrap();
            let mut x = [0.0; 2];
            let mut err: f64 = 0.0;
            for node in 0..g.spatial_len() {
                if g.is_boundary(node) {
                    continue;
                }
                g.node_coords(node, &mut x);
                err = err.max((div[node] + PI * PI * (PI * x[0]).sin()).abs());
            }
            errs.push(err);
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.9, "{errs:?}");
    }

    fn cylinder(center: Vec<f64>, r: f64, t0: f64, p: f64) -> ParabolicCylinder {
        ParabolicCylinder::new(SpaceCube::new(center, r).unwrap(), t0, p).unwrap()
    }

    #[test]
    fn integral_of_one_is_volume() {
        let g = grid(2, 9, 8);
        let one = Field::from_fn(g.clone(), |_, _| 1.0).unwrap();
        let cyl = cylinder(vec![0.0, 0.0], 0.5, 1.0, 3.0);
        let vol = integral_over_cylinder(&one, &cyl, None).unwrap();
        assert!((vol - 1.0 * 0.125).abs() < 1e-12 * 0.125, "{vol}");
        let zero = Field::zeros(g);
        assert_eq!(integral_over_cylinder(&zero, &cyl, None).unwrap(), 0.0);
    }

    #[test]
    fn integral_of_quadratic_converges() {
        let g = grid(2, 65, 4);
        let f = Field::from_fn(g.clone(), |x, _| x[0] * x[0]).unwrap();
        let cyl = cylinder(vec![0.0, 0.0], 1.0, 1.0, 2.0);
        let val = integral_over_cylinder(&f, &cyl, None).unwrap();
        assert!((val - 4.0 / 3.0).abs() < 2.0 * g.h() * g.h(), "{val}");
    }

    #[test]
    fn out_of_range_cylinder_is_rejected() {
        let g = grid(2, 9, 8);
        let one = Field::from_fn(g, |_, _| 1.0).unwrap();
        let wide = cylinder(vec![0.8, 0.0], 0.5, 1.0, 2.0);
        assert!(matches!(
            integral_over_cylinder(&one, &wide, None),
            Err(Error::CylinderOutOfRange(_))
        ));
        let early = cylinder(vec![0.0, 0.0], 0.5, 0.1, 2.0);
        assert!(integral_over_cylinder(&one, &early, None).is_err());
    }

    #[test]
    fn snapping_reports_distance() {
        let g = grid(2, 9, 8);
        let cyl = cylinder(vec![0.1, 0.0], 0.5, 1.0, 2.0);
        let s = snap_cylinder(&g, &cyl).unwrap();
        assert!((s.snap_distance - 0.15).abs() < 1e-12, "{}", s.snap_distance);
        let aligned = cylinder(vec![0.0, 0.0], 0.5, 1.0, 2.0);
        assert!(snap_cylinder(&g, &aligned).unwrap().snap_distance < 1e-12);
    }

    #[test]
    fn sup_norms() {
        let g = grid(2, 9, 2);
        let cyl = cylinder(vec![0.0, 0.0], 0.5, 1.0, 2.0);
        let c = VectorField::constant(g.spatial_len(), &[3.0, 4.0]);
        let slices = vec![c; g.slices()];
        assert_eq!(sup_norm_over_cylinder(&g, &slices, &cyl).unwrap(), 5.0);
        let a = Field::from_fn(g.clone(), |x, _| 0.06 * x[0] + 0.08 * x[1]).unwrap();
        let grads = gradient_all(&a);
        assert!((sup_norm_over_cylinder(&g, &grads, &cyl).unwrap() - 0.1).abs() < 1e-14);
        assert_eq!(sup_norm_scalar_over_cylinder(&Field::zeros(g), &cyl).unwrap(), 0.0);
    }
}
