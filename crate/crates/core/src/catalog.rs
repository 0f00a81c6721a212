//! Built-in example systems: constant and variable-area wave equations and the
//! Timoshenko beam, with the certificate values they are known to produce.

use serde::Serialize;

use crate::coefficient::CoefficientFunction;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::multiplier::MultiplierSpec;
use crate::system::PhSystem;

pub const NAMES: [&str; 4] = ["wave-unit", "wave-variable", "timoshenko-inviscid", "timoshenko-normalized"];

/// A known value with a note on where it comes from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Expected {
    pub quantity: &'static str,
    pub value: f64,
    pub note: &'static str,
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: String,
    pub system: PhSystem,
    /// Recommended multipliers, best first.
    pub multipliers: Vec<MultiplierSpec>,
    pub xi: f64,
    pub expected: Vec<Expected>,
}

impl CatalogEntry {
    pub fn expected(&self, quantity: &str) -> Option<f64> {
        self.expected.iter().find(|e| e.quantity == quantity).map(|e| e.value)
    }
}

fn mat(rows: &[&[f64]]) -> Mat {
    let r = rows.len();
    let c = rows[0].len();
    Mat::from_fn(r, c, |i, j| rows[i][j])
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {v} must be positive")))
    }
}

fn wave_system(l: CoefficientFunction, k: f64, a: f64, b: f64) -> PhSystem {
    PhSystem {
        n: 2,
        a,
        b,
        p1: mat(&[&[0.0, 1.0], &[1.0, 0.0]]),
        p0: Mat::zeros(2, 2),
        g0: Mat::zeros(2, 2),
        l,
        w1: mat(&[&[1.0, 0.0]]),
        w2: mat(&[&[1.0, 0.0]]),
        wt1: mat(&[&[0.0, 1.0]]),
        k: mat(&[&[k]]),
    }
}

/// Wave equation with constant tension `tau`, density `rho` and boundary gain `k`.
pub fn wave_constant(tau: f64, rho: f64, k: f64, a: f64, b: f64) -> Result<CatalogEntry> {
    positive("tau", tau)?;
    positive("rho", rho)?;
    positive("k", k)?;
    if !(a < b) {
        return Err(Error::Domain(format!("need a < b, got [{a}, {b}]")));
    }
    let system = wave_system(CoefficientFunction::constant_diagonal(&[tau, 1.0 / rho]), k, a, b);
    let mut expected = Vec::new();
    if tau == 1.0 && rho == 1.0 && b - a == 1.0 {
        let q = k * k + k + 1.0;
        expected.push(Expected { quantity: "alpha", value: k / q, note: "linear multiplier, xi = 1/2: k/(k^2+k+1)" });
        expected.push(Expected {
            quantity: "M",
            value: q / (k * k - k + 1.0),
            note: "linear multiplier, xi = 1/2: (k^2+k+1)/(k^2-k+1)",
        });
        expected.push(Expected {
            quantity: "alpha_exponential",
            value: k * (-1.0f64).exp() / q,
            note: "exponential multiplier at beta = 1, xi = 1/2",
        });
        expected.push(Expected { quantity: "mu_Psi", value: k * k + 1.0, note: "closed form" });
    }
    Ok(CatalogEntry {
        name: "wave-unit".into(),
        system,
        multipliers: vec![MultiplierSpec::linear(a), MultiplierSpec::exponential(1.0 / (b - a))],
        xi: 0.5,
        expected,
    })
}

/// String with cross-section `A(x) = (10 - x)/10` on `[0, 1]`, `k = 1/2`.
pub fn wave_variable_area() -> CatalogEntry {
    let l = CoefficientFunction::from_exprs(&[&["(10 - x)/10", "0"], &["0", "10/(10 - x)"]])
        .expect("built-in expressions parse");
    CatalogEntry {
        name: "wave-variable".into(),
        system: wave_system(l, 0.5, 0.0, 1.0),
        multipliers: vec![MultiplierSpec::linear(0.0)],
        // epsilon = eps1 = min(eps0, eps1)
        xi: 1.0,
        expected: vec![
            Expected { quantity: "c", value: 8.0 / 9.0, note: "attained at x = 1" },
            Expected { quantity: "eps0", value: 0.9, note: "eta_L / (mu_m mu_P1)" },
            Expected { quantity: "eps1", value: 0.8, note: "2 eta_K / (mu_m mu_Psi)" },
            Expected { quantity: "alpha", value: 32.0 / 85.0, note: "xi = 1" },
            Expected { quantity: "M", value: 17.0, note: "xi = 1" },
        ],
    }
}

/// Constant Timoshenko beam coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimoshenkoParams {
    /// mass per unit length
    pub rho: f64,
    /// bending stiffness (Young's modulus times moment of inertia)
    pub ei: f64,
    /// shear modulus
    pub kappa: f64,
    /// mass moment of inertia
    pub iota_rho: f64,
    /// viscous damping, transverse
    pub gamma: f64,
    /// viscous damping, rotational
    pub delta: f64,
}

impl TimoshenkoParams {
    pub const INVISCID: TimoshenkoParams =
        TimoshenkoParams { rho: 0.2, ei: 1.2e-2, kappa: 4e-3, iota_rho: 2e-2, gamma: 0.0, delta: 0.0 };
    pub const NORMALIZED: TimoshenkoParams =
        TimoshenkoParams { rho: 1.0, ei: 1.0, kappa: 1.0, iota_rho: 1.0, gamma: 1.0, delta: 1.0 };
}

pub fn timoshenko(p: TimoshenkoParams, k1: f64, k2: f64, a: f64, b: f64) -> Result<CatalogEntry> {
    for (name, v) in [("rho", p.rho), ("ei", p.ei), ("kappa", p.kappa), ("iota_rho", p.iota_rho), ("k1", k1), ("k2", k2)] {
        positive(name, v)?;
    }
    for (name, v) in [("gamma", p.gamma), ("delta", p.delta)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::Domain(format!("{name} = {v} must be nonnegative")));
        }
    }
    if !(a < b) {
        return Err(Error::Domain(format!("need a < b, got [{a}, {b}]")));
    }
    let system = PhSystem {
        n: 4,
        a,
        b,
        p1: mat(&[&[0.0, 0.0, 1.0, 0.0], &[0.0, 0.0, 0.0, 1.0], &[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0]]),
        p0: mat(&[&[0.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 0.0], &[0.0, -1.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 0.0]]),
        g0: Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![p.gamma, p.delta, 0.0, 0.0])),
        l: CoefficientFunction::constant_diagonal(&[1.0 / p.rho, 1.0 / p.iota_rho, p.kappa, p.ei]),
        w1: mat(&[&[0.0, 0.0, 1.0, 0.0], &[0.0, 0.0, 0.0, 1.0]]),
        w2: mat(&[&[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0]]),
        wt1: mat(&[&[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0]]),
        k: mat(&[&[k1, 0.0], &[0.0, k2]]),
    };
    Ok(CatalogEntry { name: "timoshenko".into(), system, multipliers: vec![], xi: 0.5, expected: vec![] })
}

/// Inviscid beam on `[0, 0.1]` with equal boundary gains `k`.
pub fn timoshenko_inviscid(k: f64) -> CatalogEntry {
    let mut e = timoshenko(TimoshenkoParams::INVISCID, k, k, 0.0, 0.1).expect("fixed parameters are valid");
    e.name = "timoshenko-inviscid".into();
    e.multipliers = vec![MultiplierSpec::linear(0.0)];
    e.expected = vec![
        Expected { quantity: "eps0", value: 1.0 / 25.0, note: "eta_L / (mu_m mu_P1)" },
        Expected { quantity: "eps1", value: 100.0 * k / (1250.0 * k * k + 1.0), note: "2 eta_K / (mu_m mu_Psi)" },
        Expected { quantity: "min_eig_As", value: 3.9e-3, note: "lower bound (65 - sqrt(1234))/7500" },
        Expected { quantity: "M", value: 3.0, note: "at eps = 1/50" },
        Expected { quantity: "alpha", value: 4.5e-3, note: "reference value; computed c gives about twice this" },
    ];
    e
}

/// Unit parameters, `gamma = delta = k1 = k2 = 1` on `[0, 1]`.
pub fn timoshenko_normalized() -> CatalogEntry {
    let mut e = timoshenko(TimoshenkoParams::NORMALIZED, 1.0, 1.0, 0.0, 1.0).expect("fixed parameters are valid");
    e.name = "timoshenko-normalized".into();
    e.multipliers = vec![MultiplierSpec::exponential(1.0 + 2f64.sqrt())];
    e.expected = vec![
        Expected { quantity: "mu_B", value: 2f64.sqrt(), note: "closed form" },
        Expected { quantity: "mu_Psi", value: 2.0, note: "closed form" },
        Expected { quantity: "beta_op", value: 1.0 + 2f64.sqrt(), note: "1/(b - a) + mu_B/eta_L" },
        Expected { quantity: "alpha", value: 0.0298, note: "xi = 1/2, 3 significant digits" },
        Expected { quantity: "M", value: 3.0, note: "xi = 1/2" },
    ];
    e
}

/// Look up a catalog entry; `k` sets the boundary gain where the entry has one.
pub fn by_name(name: &str, k: Option<f64>) -> Result<CatalogEntry> {
    match name {
        "wave-unit" => wave_constant(1.0, 1.0, k.unwrap_or(1.0), 0.0, 1.0),
        "wave-variable" => Ok(wave_variable_area()),
        "timoshenko-inviscid" => {
            let k = k.unwrap_or(1.0);
            positive("k", k)?;
            Ok(timoshenko_inviscid(k))
        }
        "timoshenko-normalized" => Ok(timoshenko_normalized()),
        _ => Err(Error::Domain(format!("unknown catalog entry '{name}' (known: {})", NAMES.join(", ")))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::validate_system;

    #[test]
    fn every_entry_validates() {
        for name in NAMES {
            let e = by_name(name, None).unwrap();
            let r = validate_system(&e.system, 201).unwrap();
            assert!(r.passed(), "{name}: {:?}", r.failures());
        }
    }

    #[test]
    fn nonpositive_parameters_are_domain_errors() {
        assert!(matches!(wave_constant(0.0, 1.0, 1.0, 0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(wave_constant(1.0, 1.0, -1.0, 0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(wave_constant(1.0, 1.0, 1.0, 1.0, 1.0), Err(Error::Domain(_))));
        let bad = TimoshenkoParams { kappa: 0.0, ..TimoshenkoParams::NORMALIZED };
        assert!(matches!(timoshenko(bad, 1.0, 1.0, 0.0, 1.0), Err(Error::Domain(_))));
        let bad = TimoshenkoParams { gamma: -1.0, ..TimoshenkoParams::NORMALIZED };
        assert!(matches!(timoshenko(bad, 1.0, 1.0, 0.0, 1.0), Err(Error::Domain(_))));
        assert!(by_name("beam", None).is_err());
    }

    #[test]
    fn inviscid_density_matches_parameters() {
        let l = timoshenko_inviscid(1.0).system.l.eval(0.05);
        let d: Vec<f64> = (0..4).map(|i| l[(i, i)]).collect();
        let want = [5.0, 50.0, 1.0 / 250.0, 1.2e-2];
        for (x, y) in d.iter().zip(want) {
            assert!((x - y).abs() < 1e-12 * y);
        }
    }
}
