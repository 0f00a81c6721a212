//! The port-Hamiltonian system class and the matrix-valued quantities built from it.
//!
//! A system is `dz/dt = (P1 d/dx + P0 - G0) L(x) z` on `[a, b]` with boundary
//! ports `u_b = W1 L(b) z(b)`, `y_b = Wt1 L(b) z(b)`, `u_a = W2 L(a) z(a)` and
//! the closure `u_a = 0`, `u_b + K y_b = 0`.

use serde::Serialize;

use crate::coefficient::CoefficientFunction;
use crate::error::{Error, Result};
use crate::linalg::{self, vstack, Mat};
use crate::multiplier::MultiplierSpec;
use crate::simulator::SimulationTrace;

/// Relative tolerance for the algebraic structure checks.
pub const STRUCTURE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PhSystem {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub p1: Mat,
    pub p0: Mat,
    pub g0: Mat,
    pub l: CoefficientFunction,
    pub w1: Mat,
    pub w2: Mat,
    pub wt1: Mat,
    pub k: Mat,
}

impl PhSystem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: f64,
        b: f64,
        p1: Mat,
        p0: Mat,
        g0: Mat,
        l: CoefficientFunction,
        w1: Mat,
        w2: Mat,
        wt1: Mat,
        k: Mat,
    ) -> Result<Self> {
        let sys = PhSystem { n: p1.nrows(), a, b, p1, p0, g0, l, w1, w2, wt1, k };
        sys.check_shapes()?;
        Ok(sys)
    }

    pub fn ports(&self) -> usize {
        self.n / 2
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn check_shapes(&self) -> Result<()> {
        let n = self.n;
        let h = n / 2;
        let want = |name: &str, m: &Mat, r: usize, c: usize| -> Result<()> {
            if m.shape() != (r, c) {
                return Err(Error::Structural(format!(
                    "{name} is {}x{}, expected {r}x{c}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            Ok(())
        };
        if n == 0 {
            return Err(Error::Structural("state dimension must be positive".into()));
        }
        want("P1", &self.p1, n, n)?;
        want("P0", &self.p0, n, n)?;
        want("G0", &self.g0, n, n)?;
        want("W1", &self.w1, h, n)?;
        want("W2", &self.w2, h, n)?;
        want("Wt1", &self.wt1, h, n)?;
        want("K", &self.k, h, h)?;
        if self.l.dim() != n {
            return Err(Error::Structural(format!("L is {0}x{0}, expected {n}x{n}", self.l.dim())));
        }
        if !(self.a.is_finite() && self.b.is_finite()) {
            return Err(Error::Structural("domain endpoints must be finite".into()));
        }
        Ok(())
    }

    pub(crate) fn check_point(&self, x: f64) -> Result<()> {
        let tol = 1e-12 * self.length().abs();
        if !(x >= self.a - tol && x <= self.b + tol) {
            return Err(Error::Domain(format!("x = {x} outside [{}, {}]", self.a, self.b)));
        }
        Ok(())
    }

    /// `[W1; Wt1]`
    pub fn port_matrix(&self) -> Mat {
        vstack(&self.w1, &self.wt1)
    }

    /// Uniform samples `a + i (b - a) / (count - 1)`.
    pub fn grid(&self, count: usize) -> Vec<f64> {
        uniform_grid(self.a, self.b, count)
    }
}

pub fn uniform_grid(a: f64, b: f64, count: usize) -> Vec<f64> {
    let h = (b - a) / (count - 1) as f64;
    (0..count)
        .map(|i| if i == count - 1 { b } else { a + i as f64 * h })
        .collect()
}

/// State samples `z(x_i)` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct StateField {
    pub grid: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl StateField {
    pub fn new(grid: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        let z = StateField { grid, values };
        z.check()?;
        Ok(z)
    }

    pub fn zeros(grid: Vec<f64>, n: usize) -> Self {
        let values = vec![vec![0.0; n]; grid.len()];
        StateField { grid, values }
    }

    pub fn check(&self) -> Result<()> {
        if self.grid.len() < 2 {
            return Err(Error::Structural("state grid needs at least two nodes".into()));
        }
        if self.grid.len() != self.values.len() {
            return Err(Error::Structural(format!(
                "state has {} nodes but {} values",
                self.grid.len(),
                self.values.len()
            )));
        }
        if self.grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Structural("state grid must be strictly increasing".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

/// Check every structural invariant of the system class.
///
/// Shape problems are returned as `Err(Structural)`; everything else is a
/// pass/fail entry in the report.
pub fn validate_system(sys: &PhSystem, grid_size: usize) -> Result<ValidationReport> {
    if grid_size < 2 {
        return Err(Error::Domain("grid_size must be at least 2".into()));
    }
    sys.check_shapes()?;
    let n = sys.n;
    let mut checks = Vec::new();
    let mut warnings = Vec::new();
    let mut push = |name: &'static str, passed: bool, detail: String| {
        checks.push(Check { name, passed, detail });
    };

    push("dimension", n % 2 == 0, format!("n = {n}"));
    push("domain", sys.a < sys.b, format!("[a, b] = [{}, {}]", sys.a, sys.b));

    let asym = linalg::asymmetry(&sys.p1);
    push("P1 symmetric", asym <= STRUCTURE_TOL, format!("relative asymmetry {asym:.3e}"));
    let r = linalg::rank(&sys.p1);
    push("P1 invertible", r == n, format!("rank {r} of {n}"));

    let skew = {
        let d = (&sys.p0 + sys.p0.transpose()).norm();
        let s = sys.p0.norm();
        if s == 0.0 { d } else { d / s }
    };
    push("P0 skew-symmetric", skew <= STRUCTURE_TOL, format!("relative symmetric part {skew:.3e}"));

    let asym = linalg::asymmetry(&sys.g0);
    push("G0 symmetric", asym <= STRUCTURE_TOL, format!("relative asymmetry {asym:.3e}"));
    let g_min = linalg::min_eig(&sys.g0);
    let g_tol = STRUCTURE_TOL * sys.g0.norm().max(1.0);
    push("G0 positive semidefinite", g_min >= -g_tol, format!("min eigenvalue {g_min:.6e}"));

    let asym = linalg::asymmetry(&sys.k);
    push("K symmetric", asym <= STRUCTURE_TOL, format!("relative asymmetry {asym:.3e}"));
    let k_min = linalg::min_eig(&sys.k);
    push("K positive definite", k_min > 0.0, format!("min eigenvalue {k_min:.6e}"));

    let xs = sys.grid(grid_size);
    let mut worst_asym: f64 = 0.0;
    let mut worst_eig = (f64::INFINITY, sys.a);
    for &x in &xs {
        let l = sys.l.eval(x);
        worst_asym = worst_asym.max(linalg::asymmetry(&l));
        let e = linalg::min_eig(&l);
        if e < worst_eig.0 || e.is_nan() {
            worst_eig = (e, x);
        }
    }
    push("L symmetric", worst_asym <= STRUCTURE_TOL, format!("max relative asymmetry {worst_asym:.3e} over {grid_size} samples"));
    push(
        "L positive definite",
        worst_eig.0 > 0.0,
        format!("min eigenvalue {:.6e} at x = {}", worst_eig.0, worst_eig.1),
    );
    if let Some((lo, hi)) = sys.l.sample_span() {
        let tol = 1e-12 * sys.length();
        push(
            "L covers domain",
            lo <= sys.a + tol && hi >= sys.b - tol,
            format!("samples span [{lo}, {hi}]"),
        );
    }

    let h = n / 2;
    let mut boundary = Mat::zeros(n, 2 * n);
    boundary.view_mut((0, n), (h, n)).copy_from(&sys.w2);
    boundary.view_mut((h, 0), (h, n)).copy_from(&sys.w1);
    let r = linalg::rank(&boundary);
    push("boundary rank", r == n, format!("rank [[0, W2], [W1, 0]] = {r} of {n}"));
    let r = linalg::rank(&sys.port_matrix());
    push("port rank", r == n, format!("rank [W1; Wt1] = {r} of {n}"));

    let cross = sys.w1.transpose() * &sys.wt1;
    let scale = sys.p1.norm().max(1.0);
    let sym_err = (&cross + cross.transpose() - &sys.p1).norm() / scale;
    push(
        "port compatibility",
        sym_err <= 1e-10,
        format!("|W1'Wt1 + Wt1'W1 - P1| / |P1| = {sym_err:.3e}"),
    );
    let lit_err = (&cross - &sys.p1).norm() / scale;
    if lit_err > 1e-10 {
        warnings.push(format!(
            "W1'Wt1 != P1 (relative error {lit_err:.3e}); only the symmetrized identity holds"
        ));
    }
    if crate::simulator::left_closure(sys).is_err() {
        warnings.push(
            "P1 does not vanish on ker W2: the left boundary is not energy-neutral and the system cannot be simulated"
                .into(),
        );
    }

    Ok(ValidationReport { checks, warnings })
}

/// `(1/2) int z' L z dx` by the composite trapezoid rule on the state grid.
pub fn energy(sys: &PhSystem, z: &StateField) -> Result<f64> {
    z.check()?;
    if z.values.iter().any(|v| v.len() != sys.n) {
        return Err(Error::Structural(format!("state vectors must have length {}", sys.n)));
    }
    let tol = 1e-9 * sys.length();
    if (z.grid[0] - sys.a).abs() > tol || (z.grid[z.grid.len() - 1] - sys.b).abs() > tol {
        return Err(Error::Domain("state grid must span [a, b]".into()));
    }
    let density: Vec<f64> = z
        .grid
        .iter()
        .zip(&z.values)
        .map(|(&x, v)| {
            let l = sys.l.eval(x);
            let v = linalg::Vector::from_column_slice(v);
            v.dot(&(&l * &v))
        })
        .collect();
    let mut acc = 0.0;
    for i in 0..density.len() - 1 {
        acc += 0.5 * (z.grid[i + 1] - z.grid[i]) * (density[i] + density[i + 1]);
    }
    Ok(0.5 * acc)
}

/// `B(x) = dL/dx - L (P0 + G0) P1^{-1} + P1^{-1} (P0 - G0) L`.
pub fn compute_b(sys: &PhSystem, x: f64) -> Result<Mat> {
    sys.check_point(x)?;
    let p1_inv = sys
        .p1
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Precondition("P1 is singular".into()))?;
    let l = sys.l.eval(x);
    let dl = sys.l.derivative(x);
    Ok(dl - &l * (&sys.p0 + &sys.g0) * &p1_inv + &p1_inv * (&sys.p0 - &sys.g0) * &l)
}

/// `Psi(x) = R' L(x)^{-1} R` with `R = [W1; Wt1]^{-1} [-K; I]`.
pub fn compute_psi(sys: &PhSystem, x: f64) -> Result<Mat> {
    sys.check_point(x)?;
    let r = boundary_map(sys)?;
    psi_with(sys, &r, x)
}

pub(crate) fn boundary_map(sys: &PhSystem) -> Result<Mat> {
    let h = sys.ports();
    let rhs = vstack(&(-&sys.k), &Mat::identity(h, h));
    sys.port_matrix()
        .lu()
        .solve(&rhs)
        .filter(|r| r.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Precondition("[W1; Wt1] is singular".into()))
}

pub(crate) fn psi_with(sys: &PhSystem, r: &Mat, x: f64) -> Result<Mat> {
    let chol = sys
        .l
        .eval(x)
        .cholesky()
        .ok_or_else(|| Error::Precondition(format!("L({x}) is not positive definite")))?;
    // Psi = Y'Y with Y = C^{-1} R, L = C C'
    let y = chol.l().solve_lower_triangular(r).ok_or_else(|| Error::Numerical("triangular solve".into()))?;
    Ok(y.transpose() * y)
}

/// `A_s(x) = m'(x) L(x) - m(x) B(x)`.
pub fn compute_as(sys: &PhSystem, m: &MultiplierSpec, x: f64) -> Result<Mat> {
    let bx = compute_b(sys, x)?;
    let (mv, md) = m.eval(sys.a, x);
    Ok(sys.l.eval(x) * md - bx * mv)
}

/// Discrete energy-balance residual per time step:
/// `(H_{k+1} - H_k)/dt + int e'G0 e - (u_b'y_b + y_b'u_b)/2`, the last two at the step midpoint.
pub fn energy_balance_residual(sys: &PhSystem, trace: &SimulationTrace) -> Result<Vec<f64>> {
    let h = sys.ports();
    if trace.n != sys.n || trace.yb.iter().any(|y| y.len() != h) || trace.ub.iter().any(|u| u.len() != h) {
        return Err(Error::Structural("trace was not produced for this system".into()));
    }
    let steps = trace.energy.len().saturating_sub(1);
    if trace.dissipation.len() != steps || trace.yb.len() != steps + 1 || trace.ub.len() != steps + 1 {
        return Err(Error::Structural("trace arrays have inconsistent lengths".into()));
    }
    Ok((0..steps)
        .map(|k| {
            let dh = (trace.energy[k + 1] - trace.energy[k]) / trace.dt;
            let supply: f64 = (0..h)
                .map(|j| {
                    let y = 0.5 * (trace.yb[k][j] + trace.yb[k + 1][j]);
                    let u = 0.5 * (trace.ub[k][j] + trace.ub[k + 1][j]);
                    u * y
                })
                .sum();
            dh + trace.dissipation[k] - supply
        })
        .collect())
}
