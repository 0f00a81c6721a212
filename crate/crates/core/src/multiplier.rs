use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar multiplier `m(x)` weighting the auxiliary functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum MultiplierSpec {
    /// `m(x) = x - x0`
    Linear { x0: f64 },
    /// `m(x) = C exp(beta (x - a))`, `a` the left end of the domain.
    Exponential { scale: f64, beta: f64 },
    /// `m(x) = q x + d`
    Affine { q: f64, d: f64 },
    /// Tabulated values and derivatives, linearly interpolated.
    Sampled { x: Vec<f64>, values: Vec<f64>, derivatives: Vec<f64> },
}

impl MultiplierSpec {
    pub fn linear(x0: f64) -> Self {
        MultiplierSpec::Linear { x0 }
    }

    pub fn exponential(beta: f64) -> Self {
        MultiplierSpec::Exponential { scale: 1.0, beta }
    }

    pub fn sampled(x: Vec<f64>, values: Vec<f64>, derivatives: Vec<f64>) -> Result<Self> {
        if x.len() < 2 || values.len() != x.len() || derivatives.len() != x.len() {
            return Err(Error::Structural("sampled multiplier needs >= 2 matching samples".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Structural("sampled multiplier grid must be strictly increasing".into()));
        }
        Ok(MultiplierSpec::Sampled { x, values, derivatives })
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            MultiplierSpec::Linear { .. } => "linear",
            MultiplierSpec::Exponential { .. } => "exponential",
            MultiplierSpec::Affine { .. } => "affine",
            MultiplierSpec::Sampled { .. } => "sampled",
        }
    }

    /// `(m(x), m'(x))` on a domain whose left end is `a`.
    pub fn eval(&self, a: f64, x: f64) -> (f64, f64) {
        match self {
            MultiplierSpec::Linear { x0 } => (x - x0, 1.0),
            MultiplierSpec::Exponential { scale, beta } => {
                let v = scale * (beta * (x - a)).exp();
                (v, beta * v)
            }
            MultiplierSpec::Affine { q, d } => (q * x + d, *q),
            MultiplierSpec::Sampled { x: grid, values, derivatives } => {
                let last = grid.len() - 1;
                if x <= grid[0] {
                    return (values[0], derivatives[0]);
                }
                if x >= grid[last] {
                    return (values[last], derivatives[last]);
                }
                let k = grid.partition_point(|&g| g <= x).min(last) - 1;
                let t = (x - grid[k]) / (grid[k + 1] - grid[k]);
                (
                    values[k] * (1.0 - t) + values[k + 1] * t,
                    derivatives[k] * (1.0 - t) + derivatives[k + 1] * t,
                )
            }
        }
    }

    /// Sampled tables must cover `[a, b]`.
    pub fn check_domain(&self, a: f64, b: f64) -> Result<()> {
        if let MultiplierSpec::Sampled { x, .. } = self {
            let tol = 1e-12 * (b - a);
            if x[0] > a + tol || x[x.len() - 1] < b - tol {
                return Err(Error::Domain(format!(
                    "sampled multiplier covers [{}, {}], domain is [{a}, {b}]",
                    x[0],
                    x[x.len() - 1]
                )));
            }
        }
        Ok(())
    }
}
