//! Extremal system parameters over the spatial domain.
//!
//! Every sup/inf over `x` is a uniform-grid scan followed by golden-section
//! refinement inside the two cells around the best sample.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg;
use crate::multiplier::MultiplierSpec;
use crate::system::{boundary_map, compute_b, psi_with, uniform_grid, PhSystem};

pub const DEFAULT_GRID: usize = 1001;
/// Golden-section stops at this fraction of the domain length.
pub const REFINE_WIDTH: f64 = 1e-10;
/// Relative change tolerated between `grid` and `2 grid - 1` samples.
pub const CONVERGENCE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremum {
    Min,
    Max,
}

impl Extremum {
    fn better(self, a: f64, b: f64) -> bool {
        match self {
            Extremum::Min => a < b,
            Extremum::Max => a > b,
        }
    }
}

/// Best value and its location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Located {
    pub value: f64,
    pub x: f64,
}

/// Extremum of `f` over the given sample points only (no refinement).
/// Ties go to the first sample.
pub fn extremum_over<F>(xs: &[f64], kind: Extremum, f: F) -> Located
where
    F: Fn(f64) -> f64 + Sync,
{
    let vals: Vec<f64> = xs.par_iter().map(|&x| f(x)).collect();
    let mut best = Located { value: vals[0], x: xs[0] };
    for (&x, &v) in xs.iter().zip(&vals).skip(1) {
        if kind.better(v, best.value) || v.is_nan() {
            best = Located { value: v, x };
        }
    }
    best
}

/// Grid scan on `[a, b]` with `grid_size` samples, then golden-section search
/// in the bracket around the best sample.
pub fn refined_extremum<F>(a: f64, b: f64, grid_size: usize, kind: Extremum, f: F) -> Located
where
    F: Fn(f64) -> f64 + Sync,
{
    let xs = uniform_grid(a, b, grid_size.max(2));
    let vals: Vec<f64> = xs.par_iter().map(|&x| f(x)).collect();
    let mut i_best = 0;
    for i in 1..vals.len() {
        if kind.better(vals[i], vals[i_best]) {
            i_best = i;
        }
    }
    let mut best = Located { value: vals[i_best], x: xs[i_best] };
    let lo = xs[i_best.saturating_sub(1)];
    let hi = xs[(i_best + 1).min(xs.len() - 1)];
    let refined = golden(lo, hi, REFINE_WIDTH * (b - a), kind, &f);
    if kind.better(refined.value, best.value) {
        best = refined;
    }
    best
}

fn golden<F: Fn(f64) -> f64>(mut lo: f64, mut hi: f64, width: f64, kind: Extremum, f: &F) -> Located {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > width {
        if kind.better(fc, fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
    }
    // the bracket ends are candidates too (extrema at the domain boundary)
    let mut best = if kind.better(fc, fd) { Located { value: fc, x: c } } else { Located { value: fd, x: d } };
    for x in [lo, hi] {
        let v = f(x);
        if kind.better(v, best.value) {
            best = Located { value: v, x };
        }
    }
    best
}

/// Extremal scalars of the system and multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParameters {
    /// max over x of max eig L(x)
    pub mu_l: f64,
    /// min over x of min eig L(x)
    pub eta_l: f64,
    /// max over x of max eig B(x)
    pub mu_b: f64,
    /// max over x of max eig Psi(x)
    pub mu_psi: f64,
    /// sqrt(max eig P1^{-2})
    pub mu_p1: f64,
    /// max over x of m(x)
    pub mu_m: f64,
    /// min eig K
    pub eta_k: f64,
    /// Internal-dissipation constant of the energy inequality; diagnostic only.
    pub c1: f64,
    pub grid_size: usize,
}

impl SystemParameters {
    pub fn table(&self) -> [(&'static str, f64); 7] {
        [
            ("mu_L", self.mu_l),
            ("eta_L", self.eta_l),
            ("mu_B", self.mu_b),
            ("mu_Psi", self.mu_psi),
            ("mu_P1", self.mu_p1),
            ("mu_m", self.mu_m),
            ("eta_K", self.eta_k),
        ]
    }
}

/// Table of extremal parameters for `sys` with multiplier `m`.
pub fn extremal_parameters(sys: &PhSystem, m: &MultiplierSpec, grid_size: usize) -> Result<SystemParameters> {
    let (a, b) = (sys.a, sys.b);
    let l_max = refined_extremum(a, b, grid_size, Extremum::Max, |x| linalg::max_eig(&sys.l.eval(x)));
    let l_min = refined_extremum(a, b, grid_size, Extremum::Min, |x| linalg::min_eig(&sys.l.eval(x)));
    // B and Psi are checked for evaluability once; the scans below cannot fail after that
    compute_b(sys, a)?;
    let r = boundary_map(sys)?;
    psi_with(sys, &r, a)?;
    let mu_b = refined_extremum(a, b, grid_size, Extremum::Max, |x| {
        compute_b(sys, x).map(|m| linalg::max_eig(&m)).unwrap_or(f64::NAN)
    });
    let mu_psi = refined_extremum(a, b, grid_size, Extremum::Max, |x| {
        psi_with(sys, &r, x).map(|m| linalg::max_eig(&m)).unwrap_or(f64::NAN)
    });
    let mu_m = refined_extremum(a, b, grid_size, Extremum::Max, |x| m.eval(a, x).0);

    let p1_inv = sys
        .p1
        .clone()
        .try_inverse()
        .ok_or_else(|| crate::Error::Precondition("P1 is singular".into()))?;
    let mu_p1 = linalg::max_eig(&(&p1_inv * &p1_inv)).sqrt();
    let eta_k = linalg::min_eig(&sys.k);

    let c1 = if linalg::min_eig(&sys.g0) > 0.0 {
        refined_extremum(a, b, grid_size, Extremum::Min, |x| {
            let l = sys.l.eval(x);
            linalg::min_eig(&(&l * &sys.g0 * &l)) / linalg::max_eig(&l)
        })
        .value
    } else {
        0.0
    };

    Ok(SystemParameters {
        mu_l: l_max.value,
        eta_l: l_min.value,
        mu_b: mu_b.value,
        mu_psi: mu_psi.value,
        mu_p1,
        mu_m: mu_m.value,
        eta_k,
        c1,
        grid_size,
    })
}

/// `|x - y| < tol * max(|x|, |y|)`, with exact equality accepted.
pub fn relatively_close(x: f64, y: f64, tol: f64) -> bool {
    x == y || (x - y).abs() < tol * x.abs().max(y.abs())
}

/// Grid with twice the resolution of `grid_size` (nested: every old sample is kept).
pub fn doubled(grid_size: usize) -> usize {
    2 * grid_size - 1
}
