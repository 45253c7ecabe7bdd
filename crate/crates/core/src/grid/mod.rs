//! Cubes, anisotropic parabolic cylinders, uniform space-time grids and the
//! fields that live on them.

mod cutoffs;
mod io;
pub(crate) mod ops;

pub use cutoffs::{build_cutoffs, CutoffPair};
pub use io::{read_field, write_field, FieldFormat, FieldHeader, FIELD_SCHEMA_VERSION};
pub use ops::{
    divergence_of_flux, gradient, gradient_all, integral_over_cylinder, snap_cylinder,
    sup_norm_over_cylinder, sup_norm_scalar_over_cylinder, SnappedCylinder,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `Q_R(x₀) = x₀ + (−R, R)ⁿ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCube", into = "RawCube")]
pub struct SpaceCube {
    center: Vec<f64>,
    half_side: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCube {
    center: Vec<f64>,
    half_side: f64,
}

impl TryFrom<RawCube> for SpaceCube {
    type Error = Error;
    fn try_from(raw: RawCube) -> Result<Self> {
        SpaceCube::new(raw.center, raw.half_side)
    }
}

impl From<SpaceCube> for RawCube {
    fn from(c: SpaceCube) -> Self {
        RawCube {
            center: c.center,
            half_side: c.half_side,
        }
    }
}

impl SpaceCube {
    pub fn new(center: Vec<f64>, half_side: f64) -> Result<Self> {
        if !(half_side.is_finite() && half_side > 0.0) {
            return Err(Error::param(
                "half_side",
                format!("must be a positive finite number, got {half_side}"),
            ));
        }
        if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::param("center", "must be a non-empty finite vector"));
        }
        Ok(SpaceCube { center, half_side })
    }

    pub fn n(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn half_side(&self) -> f64 {
        self.half_side
    }

    /// Same center, different half side.
    pub fn with_half_side(&self, half_side: f64) -> Result<Self> {
        SpaceCube::new(self.center.clone(), half_side)
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.center)
            .all(|(xi, ci)| (xi - ci).abs() < self.half_side)
    }

    /// Whether the closure of `self` lies in the closure of `other`, up to `tol`.
    pub fn is_inside(&self, other: &SpaceCube, tol: f64) -> bool {
        self.n() == other.n()
            && (0..self.n()).all(|d| {
                self.center[d] - self.half_side >= other.center[d] - other.half_side - tol
                    && self.center[d] + self.half_side <= other.center[d] + other.half_side + tol
            })
    }
}

/// `Q_R(x₀, t₀) = Q_R(x₀) × (t₀ − R^p, t₀)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParabolicCylinder {
    pub cube: SpaceCube,
    pub t0: f64,
    pub p: f64,
}

impl ParabolicCylinder {
    pub fn new(cube: SpaceCube, t0: f64, p: f64) -> Result<Self> {
        if !t0.is_finite() {
            return Err(Error::param("t0", "apex time must be finite"));
        }
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::param("p", format!("time scaling exponent must be >= 1, got {p}")));
        }
        Ok(ParabolicCylinder { cube, t0, p })
    }

    pub fn radius(&self) -> f64 {
        self.cube.half_side()
    }

    pub fn time_extent(&self) -> (f64, f64) {
        (self.t0 - self.radius().powf(self.p), self.t0)
    }

    /// The concentric cylinder of radius `r` with the same apex.
    pub fn with_radius(&self, r: f64) -> Result<Self> {
        ParabolicCylinder::new(self.cube.with_half_side(r)?, self.t0, self.p)
    }

    /// `Q_r(x₀,t₀) ⊂ Q_R(x₀,t₀)` for concentric cylinders with a shared apex.
    pub fn is_inside(&self, other: &ParabolicCylinder) -> bool {
        let (a, b) = self.time_extent();
        let (c, d) = other.time_extent();
        self.cube.is_inside(&other.cube, 0.0) && a >= c && b <= d
    }
}

/// Uniform tensor grid over a cube times a time interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct Grid {
    cube: SpaceCube,
    nodes_per_axis: usize,
    time_interval: (f64, f64),
    time_steps: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    cube: SpaceCube,
    nodes_per_axis: usize,
    time_interval: (f64, f64),
    time_steps: usize,
}

impl TryFrom<RawGrid> for Grid {
    type Error = Error;
    fn try_from(raw: RawGrid) -> Result<Self> {
        Grid::new(raw.cube, raw.nodes_per_axis, raw.time_interval, raw.time_steps)
    }
}

impl From<Grid> for RawGrid {
    fn from(g: Grid) -> Self {
        RawGrid {
            cube: g.cube,
            nodes_per_axis: g.nodes_per_axis,
            time_interval: g.time_interval,
            time_steps: g.time_steps,
        }
    }
}

impl Grid {
    pub fn new(
        cube: SpaceCube,
        nodes_per_axis: usize,
        time_interval: (f64, f64),
        time_steps: usize,
    ) -> Result<Self> {
        if nodes_per_axis < 3 {
            return Err(Error::param(
                "nodes_per_axis",
                format!("need at least 3 nodes per axis, got {nodes_per_axis}"),
            ));
        }
        if time_steps < 1 {
            return Err(Error::param("time_steps", "need at least one time step"));
        }
        let (a, b) = time_interval;
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::param(
                "time_interval",
                format!("need a finite interval with t1 > t0, got ({a}, {b})"),
            ));
        }
        (nodes_per_axis as u64)
            .checked_pow(cube.n() as u32)
            .filter(|&len| len <= (1 << 32))
            .ok_or_else(|| Error::param("nodes_per_axis", "grid is too large"))?;
        Ok(Grid {
            cube,
            nodes_per_axis,
            time_interval,
            time_steps,
        })
    }

    pub fn cube(&self) -> &SpaceCube {
        &self.cube
    }

    pub fn n(&self) -> usize {
        self.cube.n()
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes_per_axis
    }

    pub fn time_interval(&self) -> (f64, f64) {
        self.time_interval
    }

    pub fn time_steps(&self) -> usize {
        self.time_steps
    }

    /// Same space grid and time interval with `steps` time steps.
    pub fn with_time_steps(&self, steps: usize) -> Result<Self> {
        Grid::new(self.cube.clone(), self.nodes_per_axis, self.time_interval, steps)
    }

    pub fn h(&self) -> f64 {
        2.0 * self.cube.half_side() / (self.nodes_per_axis - 1) as f64
    }

    pub fn dt(&self) -> f64 {
        (self.time_interval.1 - self.time_interval.0) / self.time_steps as f64
    }

    pub fn spatial_len(&self) -> usize {
        self.nodes_per_axis.pow(self.n() as u32)
    }

    pub fn slices(&self) -> usize {
        self.time_steps + 1
    }

    pub fn len(&self) -> usize {
        self.spatial_len() * self.slices()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat-index stride of axis `d`; axis 0 varies fastest.
    pub fn stride(&self, d: usize) -> usize {
        self.nodes_per_axis.pow(d as u32)
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.cube.center()[axis] - self.cube.half_side() + i as f64 * self.h()
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.time_steps {
            self.time_interval.1
        } else {
            self.time_interval.0 + k as f64 * self.dt()
        }
    }

    pub fn multi_index(&self, flat: usize, out: &mut [usize]) {
        let mut rest = flat;
        for slot in out.iter_mut().take(self.n()) {
            *slot = rest % self.nodes_per_axis;
            rest /= self.nodes_per_axis;
        }
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .enumerate()
            .map(|(d, &i)| i * self.stride(d))
            .sum()
    }

    pub fn node_coords(&self, flat: usize, out: &mut [f64]) {
        let mut rest = flat;
        for (d, slot) in out.iter_mut().enumerate().take(self.n()) {
            *slot = self.coord(d, rest % self.nodes_per_axis);
            rest /= self.nodes_per_axis;
        }
    }

    pub fn is_boundary(&self, flat: usize) -> bool {
        let last = self.nodes_per_axis - 1;
        let mut rest = flat;
        for _ in 0..self.n() {
            let i = rest % self.nodes_per_axis;
            if i == 0 || i == last {
                return true;
            }
            rest /= self.nodes_per_axis;
        }
        false
    }

    /// Whether `flat` is a cell origin, i.e. every coordinate index is at most `N − 2`.
    pub fn is_cell(&self, flat: usize) -> bool {
        let last = self.nodes_per_axis - 1;
        let mut rest = flat;
        for _ in 0..self.n() {
            if rest % self.nodes_per_axis == last {
                return false;
            }
            rest /= self.nodes_per_axis;
        }
        true
    }

    /// Step count giving `Δt ≈ h^p`, the scaling of the anisotropic cylinders.
    pub fn natural_time_steps(&self, p: f64) -> usize {
        let span = self.time_interval.1 - self.time_interval.0;
        ((span / self.h().powf(p)).ceil() as usize).max(1)
    }
}

/// Scalar values on every node of every time slice, slice-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param("values", format!("non-finite value at index {pos}")));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        let len = grid.len();
        Field {
            grid,
            values: vec![0.0; len],
        }
    }

    /// Samples `f(x, t)` at every node.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64], f64) -> f64) -> Result<Self> {
        let m = grid.spatial_len();
        let mut values = Vec::with_capacity(grid.len());
        let mut x = vec![0.0; grid.n()];
        for k in 0..grid.slices() {
            let t = grid.time(k);
            for node in 0..m {
                grid.node_coords(node, &mut x);
                values.push(f(&x, t));
            }
        }
        Field::new(grid, values)
    }

    /// The same spatial profile repeated on every slice.
    pub fn constant_in_time(grid: Grid, slice: &[f64]) -> Result<Self> {
        if slice.len() != grid.spatial_len() {
            return Err(Error::GridMismatch(format!(
                "slice has {} values, grid has {} nodes",
                slice.len(),
                grid.spatial_len()
            )));
        }
        let values = slice.repeat(grid.slices());
        Field::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let m = self.grid.spatial_len();
        &self.values[k * m..(k + 1) * m]
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub(crate) fn slice_mut(&mut self, k: usize) -> &mut [f64] {
        let m = self.grid.spatial_len();
        &mut self.values[k * m..(k + 1) * m]
    }

    /// Pointwise map into a new field on the same grid.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Field> {
        Field::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub(crate) fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        Ok(())
    }
}

/// `n` components per spatial node, stored node-major.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    n: usize,
    values: Vec<f64>,
}

impl VectorField {
    pub fn new(n: usize, values: Vec<f64>) -> Self {
        assert!(n > 0 && values.len() % n == 0);
        VectorField { n, values }
    }

    pub fn constant(n_nodes: usize, v: &[f64]) -> Self {
        VectorField {
            n: v.len(),
            values: v.repeat(n_nodes),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> usize {
        self.values.len() / self.n
    }

    pub fn at(&self, node: usize) -> &[f64] {
        &self.values[node * self.n..(node + 1) * self.n]
    }

    pub fn component(&self, node: usize, d: usize) -> f64 {
        self.values[node * self.n + d]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn magnitude(&self, node: usize) -> f64 {
        self.at(node).iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid(n: usize, nodes: usize) -> Grid {
        Grid::new(SpaceCube::new(vec![0.0; n], 1.0).unwrap(), nodes, (0.0, 1.0), 4).unwrap()
    }

    #[test]
    fn grid_validation() {
        let cube = SpaceCube::new(vec![0.0, 0.0], 1.0).unwrap();
        assert!(Grid::new(cube.clone(), 2, (0.0, 1.0), 1).is_err());
        assert!(Grid::new(cube.clone(), 3, (0.0, 1.0), 0).is_err());
        assert!(Grid::new(cube.clone(), 3, (1.0, 1.0), 1).is_err());
        assert!(SpaceCube::new(vec![0.0, 0.0], 0.0).is_err());
        let g = Grid::new(cube, 5, (0.0, 1.0), 4).unwrap();
        assert_eq!(g.h(), 0.5);
        assert_eq!(g.dt(), 0.25);
        assert_eq!(g.spatial_len(), 25);
    }

    #[test]
    fn indexing_round_trips() {
        let g = unit_grid(3, 4);
        let mut idx = [0usize; 3];
        for flat in 0..g.spatial_len() {
            g.multi_index(flat, &mut idx);
            assert_eq!(g.flat_index(&idx), flat);
            let boundary = idx.iter().any(|&i| i == 0 || i == 3);
            assert_eq!(g.is_boundary(flat), boundary);
            assert_eq!(g.is_cell(flat), idx.iter().all(|&i| i <= 2));
        }
        let mut x = [0.0; 3];
        g.node_coords(g.flat_index(&[3, 0, 1]), &mut x);
        assert_eq!(&x[..2], &[1.0, -1.0]);
        assert!((x[2] + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn cylinder_nesting() {
        let cube = SpaceCube::new(vec![0.0, 0.0], 0.5).unwrap();
        let outer = ParabolicCylinder::new(cube, 1.0, 3.0).unwrap();
        let inner = outer.with_radius(0.25).unwrap();
        assert!(inner.is_inside(&outer));
        assert!(!outer.is_inside(&inner));
        assert_eq!(outer.time_extent(), (1.0 - 0.125, 1.0));
    }

    #[test]
    fn field_rejects_bad_values() {
        let g = unit_grid(2, 3);
        assert!(Field::new(g.clone(), vec![0.0; 3]).is_err());
        let mut v = vec![0.0; g.len()];
        v[4] = f64::NAN;
        assert!(Field::new(g, v).is_err());
    }

    #[test]
    fn grid_serde_validates() {
        let g = unit_grid(2, 5);
        let json = serde_json::to_string(&g).unwrap();
        let back: Grid = serde_json::from_str(&json).unwrap();
        assert_eq!(back, g);
        let bad = json.replace("\"nodes_per_axis\":5", "\"nodes_per_axis\":2");
        assert!(serde_json::from_str::<Grid>(&bad).is_err());
    }
}
