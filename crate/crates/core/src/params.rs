use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent, per-axis degeneracy thresholds and regularization level of the equation
/// `∂ₜu = Σᵢ ∂ᵢ[(|∂ᵢu| − δᵢ)₊^{p−1} sign(∂ᵢu)]` and of its ε-regularization.
///
/// The spatial dimension is the number of thresholds. `epsilon == 0` describes the
/// unregularized (limit) potential; the solver only accepts it in the heat mode
/// `p = 2, δ = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ProblemParams {
    p: f64,
    delta: Vec<f64>,
    epsilon: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    p: f64,
    delta: Vec<f64>,
    epsilon: f64,
}

impl TryFrom<RawParams> for ProblemParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        ProblemParams::new(raw.p, raw.delta, raw.epsilon)
    }
}

impl From<ProblemParams> for RawParams {
    fn from(params: ProblemParams) -> Self {
        RawParams {
            p: params.p,
            delta: params.delta,
            epsilon: params.epsilon,
        }
    }
}

/// Indices with a positive threshold (`e_plus`) and with a zero threshold (`e_minus`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSets {
    pub e_plus: Vec<usize>,
    pub e_minus: Vec<usize>,
}

impl ProblemParams {
    pub fn new(p: f64, delta: Vec<f64>, epsilon: f64) -> Result<Self> {
        if delta.len() < 2 {
            return Err(Error::param(
                "delta",
                format!("dimension must be at least 2, got {}", delta.len()),
            ));
        }
        if !p.is_finite() || p < 2.0 {
            return Err(Error::param("p", format!("exponent must be >= 2, got {p}")));
        }
        for (i, &d) in delta.iter().enumerate() {
            if !d.is_finite() || d < 0.0 {
                return Err(Error::param(
                    format!("delta[{i}]"),
                    format!("threshold must be finite and >= 0, got {d}"),
                ));
            }
        }
        let params = ProblemParams { p, delta, epsilon };
        let upper = params.epsilon_upper_bound();
        if !epsilon.is_finite() || epsilon < 0.0 || epsilon >= upper {
            return Err(Error::param(
                "epsilon",
                format!("must lie in [0, {upper}), got {epsilon}"),
            ));
        }
        Ok(params)
    }

    /// Same `p` and thresholds with a different regularization level.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        ProblemParams::new(self.p, self.delta.clone(), epsilon)
    }

    pub fn n(&self) -> usize {
        self.delta.len()
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `min{1, inf Δ⁺}` with `inf ∅ = +∞`; regularization levels must stay strictly below it.
    pub fn epsilon_upper_bound(&self) -> f64 {
        self.delta
            .iter()
            .copied()
            .filter(|&d| d > 0.0)
            .fold(1.0, f64::min)
    }

    /// `1 + max δᵢ`, the slope scale of the max-slope field.
    pub fn delta_bar(&self) -> f64 {
        1.0 + self.delta.iter().copied().fold(0.0, f64::max)
    }

    pub fn index_sets(&self) -> IndexSets {
        let (e_plus, e_minus) = (0..self.n()).partition(|&i| self.delta[i] > 0.0);
        IndexSets { e_plus, e_minus }
    }

    pub fn is_regularized(&self) -> bool {
        self.epsilon > 0.0
    }

    /// `p = 2`, all thresholds zero, no regularization: the heat equation.
    pub fn is_heat_mode(&self) -> bool {
        self.epsilon == 0.0 && self.p == 2.0 && self.delta.iter().all(|&d| d == 0.0)
    }

    pub(crate) fn is_quadratic(&self) -> bool {
        self.p == 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_errors_name_the_field() {
        let err = ProblemParams::new(3.0, vec![1.0, -0.5], 0.1).unwrap_err();
        assert!(err.to_string().contains("delta[1]"), "{err}");
        let err = ProblemParams::new(1.5, vec![1.0, 1.0], 0.1).unwrap_err();
        assert!(err.to_string().contains("p"), "{err}");
        assert!(ProblemParams::new(3.0, vec![1.0], 0.1).is_err());
    }

    #[test]
    fn epsilon_must_stay_below_smallest_positive_threshold() {
        assert!(ProblemParams::new(2.0, vec![0.5, 0.0], 0.4).is_ok());
        assert!(ProblemParams::new(2.0, vec![0.5, 0.0], 0.5).is_err());
        assert!(ProblemParams::new(2.0, vec![0.0, 0.0], 0.99).is_ok());
        assert!(ProblemParams::new(2.0, vec![0.0, 0.0], 1.0).is_err());
        assert!(ProblemParams::new(2.0, vec![0.0, 0.0], -1e-3).is_err());
    }

    #[test]
    fn derived_quantities() {
        let params = ProblemParams::new(3.0, vec![1.0, 0.0, 2.0], 0.1).unwrap();
        assert_eq!(params.delta_bar(), 3.0);
        let sets = params.index_sets();
        assert_eq!(sets.e_plus, vec![0, 2]);
        assert_eq!(sets.e_minus, vec![1]);
        assert!(!params.is_heat_mode());
        assert!(ProblemParams::new(2.0, vec![0.0, 0.0], 0.0).unwrap().is_heat_mode());
    }

    #[test]
    fn serde_rejects_invalid_and_unknown() {
        let ok: ProblemParams =
            serde_json::from_str(r#"{"p":3.0,"delta":[1.0,1.0],"epsilon":0.1}"#).unwrap();
        assert_eq!(ok.n(), 2);
        assert!(serde_json::from_str::<ProblemParams>(r#"{"p":3.0,"delta":[1.0,-1.0],"epsilon":0.1}"#).is_err());
        assert!(serde_json::from_str::<ProblemParams>(r#"{"p":3.0,"delta":[1.0,1.0],"epsilon":0.1,"x":1}"#).is_err());
    }
}
