//! Matrix-valued coefficient functions of `x`, used for the Hamiltonian density.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::linalg::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeMode {
    #[default]
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientFunction {
    /// Entry-wise closed-form expressions.
    Expr { entries: Vec<Vec<Expr>>, mode: DerivativeMode },
    /// Uniform sample table, linearly interpolated.
    Samples { x: Vec<f64>, values: Vec<Mat>, slopes: Vec<Mat> },
}

impl CoefficientFunction {
    pub fn from_exprs(entries: &[&[&str]]) -> Result<Self> {
        let rows = entries
            .iter()
            .map(|row| row.iter().map(|s| Expr::parse(s)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::from_parsed(rows, DerivativeMode::Analytic)
    }

    pub fn from_parsed(entries: Vec<Vec<Expr>>, mode: DerivativeMode) -> Result<Self> {
        let n = entries.len();
        if n == 0 || entries.iter().any(|r| r.len() != n) {
            return Err(Error::Structural("expression matrix must be square and non-empty".into()));
        }
        Ok(CoefficientFunction::Expr { entries, mode })
    }

    /// Diagonal matrix of constants.
    pub fn constant_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let entries = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| Expr::constant(if i == j { diag[i] } else { 0.0 }))
                    .collect()
            })
            .collect();
        CoefficientFunction::Expr { entries, mode: DerivativeMode::Analytic }
    }

    /// Sample table on a uniform, strictly increasing grid.
    pub fn from_samples(x: Vec<f64>, values: Vec<Mat>) -> Result<Self> {
        if x.len() < 2 || x.len() != values.len() {
            return Err(Error::Structural(format!(
                "sample table needs >= 2 points and matching values ({} x, {} values)",
                x.len(),
                values.len()
            )));
        }
        let n = values[0].nrows();
        if values.iter().any(|v| v.nrows() != n || v.ncols() != n) {
            return Err(Error::Structural("sample matrices must all be n x n".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Structural("sample grid must be strictly increasing".into()));
        }
        let h = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
        if x.iter().enumerate().any(|(i, &xi)| (xi - (x[0] + i as f64 * h)).abs() > 1e-9 * h.max(1.0)) {
            return Err(Error::Structural("sample grid must be uniform".into()));
        }
        let slopes = nodal_derivatives(&values, h);
        Ok(CoefficientFunction::Samples { x, values, slopes })
    }

    pub fn dim(&self) -> usize {
        match self {
            CoefficientFunction::Expr { entries, .. } => entries.len(),
            CoefficientFunction::Samples { values, .. } => values[0].nrows(),
        }
    }

    /// Interval covered by a sample table; `None` for expressions.
    pub fn sample_span(&self) -> Option<(f64, f64)> {
        match self {
            CoefficientFunction::Samples { x, .. } => Some((x[0], x[x.len() - 1])),
            CoefficientFunction::Expr { .. } => None,
        }
    }

    pub fn eval(&self, x: f64) -> Mat {
        match self {
            CoefficientFunction::Expr { entries, .. } => {
                let n = entries.len();
                Mat::from_fn(n, n, |i, j| entries[i][j].eval(x))
            }
            CoefficientFunction::Samples { x: grid, values, .. } => interp(grid, values, x),
        }
    }

    /// `dL/dx` at `x`.
    pub fn derivative(&self, x: f64) -> Mat {
        match self {
            CoefficientFunction::Expr { entries, mode: DerivativeMode::Analytic } => {
                let n = entries.len();
                Mat::from_fn(n, n, |i, j| entries[i][j].eval_with_derivative(x).1)
            }
            CoefficientFunction::Expr { .. } => {
                // fourth-order central difference
                let h = 1e-3 * x.abs().max(1.0);
                let f = |s: f64| self.eval(x + s * h);
                (f(-2.0) - f(-1.0) * 8.0 + f(1.0) * 8.0 - f(2.0)) / (12.0 * h)
            }
            CoefficientFunction::Samples { x: grid, slopes, .. } => interp(grid, slopes, x),
        }
    }

    pub fn derivative_mode(&self) -> DerivativeMode {
        match self {
            CoefficientFunction::Expr { mode, .. } => *mode,
            CoefficientFunction::Samples { .. } => DerivativeMode::FiniteDifference,
        }
    }

    /// `Some((L, D))` with `self(x) = L x + D` when every entry is structurally affine.
    pub fn as_affine(&self) -> Option<(Mat, Mat)> {
        let CoefficientFunction::Expr { entries, .. } = self else {
            return None;
        };
        let n = entries.len();
        let mut slope = Mat::zeros(n, n);
        let mut offset = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let (s, d) = entries[i][j].as_affine()?;
                slope[(i, j)] = s;
                offset[(i, j)] = d;
            }
        }
        Some((slope, offset))
    }
}

fn interp(grid: &[f64], values: &[Mat], x: f64) -> Mat {
    let last = grid.len() - 1;
    if x <= grid[0] {
        return values[0].clone();
    }
    if x >= grid[last] {
        return values[last].clone();
    }
    let k = grid.partition_point(|&g| g <= x).min(last) - 1;
    let t = (x - grid[k]) / (grid[k + 1] - grid[k]);
    &values[k] * (1.0 - t) + &values[k + 1] * t
}

/// Fourth-order differences at the nodes (one-sided near the ends); lower order
/// when fewer than five samples are available.
fn nodal_derivatives(f: &[Mat], h: f64) -> Vec<Mat> {
    let m = f.len();
    if m == 2 {
        let d = (&f[1] - &f[0]) / h;
        return vec![d.clone(), d];
    }
    if m < 5 {
        return (0..m)
            .map(|i| {
                if i == 0 {
                    (&f[0] * -3.0 + &f[1] * 4.0 - &f[2]) / (2.0 * h)
                } else if i == m - 1 {
                    (&f[m - 1] * 3.0 - &f[m - 2] * 4.0 + &f[m - 3]) / (2.0 * h)
                } else {
                    (&f[i + 1] - &f[i - 1]) / (2.0 * h)
                }
            })
            .collect();
    }
    (0..m)
        .map(|i| {
            let c = 12.0 * h;
            if i == 0 {
                (&f[0] * -25.0 + &f[1] * 48.0 - &f[2] * 36.0 + &f[3] * 16.0 - &f[4] * 3.0) / c
            } else if i == 1 {
                (&f[0] * -3.0 - &f[1] * 10.0 + &f[2] * 18.0 - &f[3] * 6.0 + &f[4]) / c
            } else if i == m - 2 {
                (&f[m - 1] * 3.0 + &f[m - 2] * 10.0 - &f[m - 3] * 18.0 + &f[m - 4] * 6.0 - &f[m - 5]) / c
            } else if i == m - 1 {
                (&f[m - 1] * 25.0 - &f[m - 2] * 48.0 + &f[m - 3] * 36.0 - &f[m - 4] * 16.0 + &f[m - 5] * 3.0)
                    / c
            } else {
                (&f[i - 2] - &f[i - 1] * 8.0 + &f[i + 1] * 8.0 - &f[i + 2]) / c
            }
        })
        .collect()
}
