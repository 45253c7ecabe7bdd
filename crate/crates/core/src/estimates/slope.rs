use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux_models::pow_nonneg;
use crate::grid::ops::gradient_slice;
use crate::grid::Field;
use crate::params::ProblemParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlopeMode {
    /// `𝒰 = maxᵢ|uₓᵢ| / (2δ)`.
    U,
    /// `𝒱 = maxᵢ|uₓᵢ| / (2(δ + 1))`.
    V,
}

impl SlopeMode {
    pub fn scale(self, params: &ProblemParams) -> f64 {
        match self {
            SlopeMode::U => 2.0 * params.delta_bar(),
            SlopeMode::V => 2.0 * (params.delta_bar() + 1.0),
        }
    }

    /// `U` for `p > 2`, `V` for `p = 2`.
    pub fn for_params(params: &ProblemParams) -> Self {
        if params.p() == 2.0 {
            SlopeMode::V
        } else {
            SlopeMode::U
        }
    }
}

/// Nodewise normalized maximal slope of `field`, on every slice.
pub fn compute_max_slope(field: &Field, params: &ProblemParams, mode: SlopeMode) -> Result<Field> {
    let grid = field.grid();
    if grid.n() != params.n() {
        return Err(Error::GridMismatch("parameter and grid dimensions differ".into()));
    }
    let scale = mode.scale(params);
    let mut values = Vec::with_capacity(grid.len());
    for k in 0..grid.slices() {
        let grad = gradient_slice(grid, field.slice(k));
        values.extend((0..grid.spatial_len()).map(|node| {
            grad.at(node).iter().fold(0.0_f64, |m, v| m.max(v.abs())) / scale
        }));
    }
    Field::new(grid.clone(), values)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeasureKind {
    /// Weight `(𝒰 − ½)₊^p`.
    Mu,
    /// Weight `(𝒱 − ½)₊²`.
    Sigma,
}

/// Absolutely continuous measure built from a max-slope field.
#[derive(Clone, Debug)]
pub struct WeightedMeasure {
    pub kind: MeasureKind,
    pub base: Field,
    pub p: f64,
}

impl WeightedMeasure {
    pub fn new(kind: MeasureKind, base: Field, p: f64) -> Self {
        WeightedMeasure { kind, base, p }
    }

    /// `μ` from `𝒰` for `p > 2`, `σ` from `𝒱` for `p = 2`.
    pub fn for_field(field: &Field, params: &ProblemParams) -> Result<Self> {
        let mode = SlopeMode::for_params(params);
        let base = compute_max_slope(field, params, mode)?;
        let kind = match mode {
            SlopeMode::U => MeasureKind::Mu,
            SlopeMode::V => MeasureKind::Sigma,
        };
        Ok(WeightedMeasure::new(kind, base, params.p()))
    }

    pub fn exponent(&self) -> f64 {
        match self.kind {
            MeasureKind::Mu => self.p,
            MeasureKind::Sigma => 2.0,
        }
    }

    pub fn weight_at(&self, base_value: f64) -> f64 {
        pow_nonneg((base_value - 0.5).max(0.0), self.exponent())
    }

    pub fn weight(&self) -> Result<Field> {
        self.base.map(|b| self.weight_at(b))
    }
}

/// Largest relative violation of `s·M ≤ |ξ| ≤ √n·s·M` where `s·M = maxᵢ|ξᵢ|` is rebuilt
/// from the normalized value `m` with scale `s`. Non-positive means the bounds hold.
pub fn slope_control_violation(xi: &[f64], m: f64, scale: f64) -> f64 {
    let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    let lower = scale * m;
    let upper = (xi.len() as f64).sqrt() * scale * m;
    let size = norm.max(f64::MIN_POSITIVE);
    ((lower - norm) / size).max((norm - upper) / size)
}

/// Worst violation of the slope control over every node and slice of `field`.
pub fn slope_control_check(field: &Field, params: &ProblemParams, mode: SlopeMode) -> Result<f64> {
    let slope = compute_max_slope(field, params, mode)?;
    let grid = field.grid();
    let scale = mode.scale(params);
    let mut worst = f64::NEG_INFINITY;
    for k in 0..grid.slices() {
        let grad = gradient_slice(grid, field.slice(k));
        let s = slope.slice(k);
        for node in 0..grid.spatial_len() {
            if grad.at(node).iter().all(|&v| v == 0.0) {
                worst = worst.max(if s[node] == 0.0 { 0.0 } else { 1.0 });
                continue;
            }
            worst = worst.max(slope_control_violation(grad.at(node), s[node], scale));
        }
    }
    Ok(worst)
}

/// Both sides of `Σₖ(|ξₖ| − δₖ)₊^p |ξₖ|^{2M} ≥ (2δ)^{p+2M} (𝒰 − ½)₊^p 𝒰^{2M}`.
pub fn envelope_sides(xi: &[f64], params: &ProblemParams, m: u32) -> (f64, f64) {
    let p = params.p();
    let lhs: f64 = xi
        .iter()
        .zip(params.delta())
        .map(|(v, d)| pow_nonneg((v.abs() - d).max(0.0), p) * v.abs().powi(2 * m as i32))
        .sum();
    let two_delta = 2.0 * params.delta_bar();
    let u = xi.iter().fold(0.0_f64, |a, v| a.max(v.abs())) / two_delta;
    let rhs = two_delta.powf(p + 2.0 * m as f64)
        * pow_nonneg((u - 0.5).max(0.0), p)
        * u.powi(2 * m as i32);
    (lhs, rhs)
}
