//! Multiplier-method decay certificates.
//!
//! With `A_s(x) = m' L - m B` positive definite on `[a, b]` and `c` the largest
//! constant with `A_s >= c L`, the energy obeys `H(t) <= M exp(-alpha t) H(0)`
//! where, for `eps = xi * min(eps0, eps1)`,
//!
//! ```text
//! eps0 = eta_L / (mu_m mu_P1),  eps1 = 2 eta_K / (mu_m mu_Psi)
//! M = (eps0 + eps) / (eps0 - eps),  alpha = c eps eps0 / (eps0 + eps)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::multiplier::MultiplierSpec;
use crate::params::{
    doubled, extremal_parameters, refined_extremum, relatively_close, Extremum, SystemParameters,
    CONVERGENCE_TOL,
};
use crate::system::{compute_as, PhSystem};

/// Positivity margins at or below this (relative to `mu_L`) are not accepted.
pub const POSITIVITY_DELTA: f64 = 1e-10;

/// Largest `beta (b - a)` for which `exp` stays finite with room to spare.
const MAX_EXPONENT: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Positivity {
    Positive,
    Inconclusive,
    NotPositive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub status: Positivity,
    /// `min_x min eig A_s(x)` divided by `mu_L`.
    pub margin: f64,
    pub argmin: f64,
}

impl PositivityReport {
    pub fn is_positive(&self) -> bool {
        self.status == Positivity::Positive
    }
}

pub fn check_positivity(sys: &PhSystem, m: &MultiplierSpec, grid_size: usize) -> Result<PositivityReport> {
    m.check_domain(sys.a, sys.b)?;
    compute_as(sys, m, sys.a)?;
    let scale = refined_extremum(sys.a, sys.b, grid_size, Extremum::Max, |x| linalg::max_eig(&sys.l.eval(x))).value;
    let worst = refined_extremum(sys.a, sys.b, grid_size, Extremum::Min, |x| {
        compute_as(sys, m, x).map(|a| linalg::min_eig(&a)).unwrap_or(f64::NAN)
    });
    let margin = worst.value / scale;
    let status = if margin > POSITIVITY_DELTA {
        Positivity::Positive
    } else if margin > 0.0 {
        Positivity::Inconclusive
    } else {
        Positivity::NotPositive
    };
    Ok(PositivityReport { status, margin, argmin: worst.x })
}

/// Largest `c` with `A_s(x) - c L(x) >= 0` over the refined grid.
pub fn compute_c(sys: &PhSystem, m: &MultiplierSpec, grid_size: usize) -> Result<f64> {
    let pos = check_positivity(sys, m, grid_size)?;
    if !pos.is_positive() {
        return Err(Error::Precondition(format!(
            "A_s is not positive definite: margin {:.6e} at x = {}",
            pos.margin, pos.argmin
        )));
    }
    Ok(c_scan(sys, m, grid_size)?.value)
}

fn c_scan(sys: &PhSystem, m: &MultiplierSpec, grid_size: usize) -> Result<crate::params::Located> {
    let gen = |x: f64| -> Result<f64> {
        let s = linalg::inv_sqrt_spd(&sys.l.eval(x))?;
        let a = compute_as(sys, m, x)?;
        Ok(linalg::min_eig(&(&s * a * &s)))
    };
    gen(sys.a)?;
    Ok(refined_extremum(sys.a, sys.b, grid_size, Extremum::Min, |x| gen(x).unwrap_or(f64::NAN)))
}

/// `(eps0, eps1)` from the extremal parameters.
pub fn epsilons(p: &SystemParameters) -> Result<(f64, f64)> {
    let named = [
        ("eta_L", p.eta_l),
        ("mu_m", p.mu_m),
        ("mu_P1", p.mu_p1),
        ("eta_K", p.eta_k),
        ("mu_Psi", p.mu_psi),
    ];
    if let Some((name, v)) = named.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Domain(format!("{name} = {v} must be positive")));
    }
    Ok((p.eta_l / (p.mu_m * p.mu_p1), 2.0 * p.eta_k / (p.mu_m * p.mu_psi)))
}

/// `(M, alpha)` for perturbation strength `eps`.
pub fn decay_pair(c: f64, eps0: f64, eps: f64) -> (f64, f64) {
    ((eps0 + eps) / (eps0 - eps), c * eps * eps0 / (eps0 + eps))
}

fn check_xi(xi: f64) -> Result<()> {
    if !(xi > 0.0 && xi <= 1.0) {
        return Err(Error::Domain(format!("xi = {xi} must lie in (0, 1]")));
    }
    Ok(())
}

/// An exponential decay certificate `H(t) <= M exp(-alpha t) H(0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub c: f64,
    pub eps0: f64,
    pub eps1: f64,
    pub xi: f64,
    pub eps: f64,
    #[serde(rename = "M")]
    pub overshoot: f64,
    pub alpha: f64,
    pub multiplier: MultiplierSpec,
    pub positivity_margin: f64,
    pub grid_size: usize,
    pub converged: bool,
    pub params: SystemParameters,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl Certificate {
    /// Recompute `M` and `alpha` from the stored `c`, `eps0`, `eps`.
    pub fn chain_consistent(&self) -> bool {
        let (m, a) = decay_pair(self.c, self.eps0, self.eps);
        m == self.overshoot && a == self.alpha
    }
}

pub fn assemble_certificate(sys: &PhSystem, m: &MultiplierSpec, xi: f64, grid_size: usize) -> Result<Certificate> {
    assemble(sys, m, xi, grid_size, true)
}

fn assemble(sys: &PhSystem, m: &MultiplierSpec, xi: f64, grid_size: usize, convergence: bool) -> Result<Certificate> {
    check_xi(xi)?;
    let mut warnings = Vec::new();
    if xi == 1.0 {
        warnings.push("xi = 1 puts eps on the admissible boundary; M is finite only because eps1 < eps0".into());
    }
    let pos = check_positivity(sys, m, grid_size)?;
    if !pos.is_positive() {
        return Err(Error::Uncertifiable {
            failures: vec![format!(
                "{} multiplier: A_s not positive definite ({:?}, margin {:.6e} at x = {})",
                m.family_name(),
                pos.status,
                pos.margin,
                pos.argmin
            )],
        });
    }
    check_multiplier_sign(sys, m, grid_size)?;
    let params = extremal_parameters(sys, m, grid_size)?;
    let c = c_scan(sys, m, grid_size)?.value;
    let (eps0, eps1) = epsilons(&params)?;
    let eps = xi * eps0.min(eps1);
    if eps >= eps0 {
        return Err(Error::Domain(format!(
            "eps = {eps} reaches eps0 = {eps0}: M is unbounded (use xi < 1 when eps0 <= eps1)"
        )));
    }
    let (overshoot, alpha) = decay_pair(c, eps0, eps);

    let converged = if convergence {
        let fine = doubled(grid_size);
        let p2 = extremal_parameters(sys, m, fine)?;
        let c2 = c_scan(sys, m, fine)?.value;
        let mut ok = relatively_close(c, c2, CONVERGENCE_TOL);
        for ((name, v1), (_, v2)) in params.table().iter().zip(p2.table().iter()) {
            if !close_or_tiny(*v1, *v2, params.mu_l) {
                warnings.push(format!("{name} moved from {v1} to {v2} when the grid was doubled"));
                ok = false;
            }
        }
        if !ok {
            warnings.push(format!("parameters not converged at grid_size = {grid_size}"));
        }
        ok
    } else {
        true
    };

    Ok(Certificate {
        c,
        eps0,
        eps1,
        xi,
        eps,
        overshoot,
        alpha,
        multiplier: m.clone(),
        positivity_margin: pos.margin,
        grid_size,
        converged,
        params,
        warnings,
    })
}

// Round-off sized values (e.g. mu_B of a constant system) are compared absolutely.
fn close_or_tiny(v1: f64, v2: f64, scale: f64) -> bool {
    relatively_close(v1, v2, CONVERGENCE_TOL) || (v1 - v2).abs() <= 1e-14 * scale.abs().max(1.0)
}

fn check_multiplier_sign(sys: &PhSystem, m: &MultiplierSpec, grid_size: usize) -> Result<()> {
    let at_a = m.eval(sys.a, sys.a).0;
    let inner = refined_extremum(sys.a, sys.b, grid_size, Extremum::Min, |x| {
        if x == sys.a { f64::INFINITY } else { m.eval(sys.a, x).0 }
    });
    if at_a < 0.0 || inner.value <= 0.0 {
        return Err(Error::Domain(format!(
            "{} multiplier must be positive on (a, b]: m = {} at x = {}",
            m.family_name(),
            inner.value.min(at_a),
            if at_a < 0.0 { sys.a } else { inner.x }
        )));
    }
    Ok(())
}

/// Exponential-multiplier bound with the closed-form `c = C (beta eta_L - mu_B) / mu_L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialRate {
    pub beta: f64,
    pub scale: f64,
    pub c: f64,
    pub mu_m: f64,
    pub eps0: f64,
    pub eps1: f64,
    #[serde(rename = "M")]
    pub overshoot: f64,
    pub alpha: f64,
    /// `eps0 <= eps1`
    pub first_branch: bool,
}

pub fn exponential_bound(
    sys: &PhSystem,
    p: &SystemParameters,
    beta: f64,
    xi: f64,
    scale: f64,
) -> Result<ExponentialRate> {
    check_xi(xi)?;
    if !(scale > 0.0) {
        return Err(Error::Domain(format!("multiplier scale C = {scale} must be positive")));
    }
    let threshold = p.mu_b / p.eta_l;
    if !(beta > threshold) {
        return Err(Error::Domain(format!(
            "beta = {beta} must exceed mu_B / eta_L = {threshold}"
        )));
    }
    let len = sys.length();
    // eps0 and eps1 both carry 1/mu_m = exp(-beta len)/C; factor it out so large
    // beta underflows to alpha = 0 instead of producing inf * 0.
    let decay = (-beta * len).exp();
    let e0 = p.eta_l / (scale * p.mu_p1);
    let e1 = 2.0 * p.eta_k / (scale * p.mu_psi);
    let first_branch = e0 <= e1;
    let e = xi * e0.min(e1);
    let c = scale * (beta * p.eta_l - p.mu_b) / p.mu_l;
    let overshoot = (e0 + e) / (e0 - e);
    let alpha = decay * c * e * e0 / (e0 + e);
    Ok(ExponentialRate {
        beta,
        scale,
        c,
        mu_m: scale * (beta * len).exp(),
        eps0: e0 * decay,
        eps1: e1 * decay,
        overshoot,
        alpha,
        first_branch,
    })
}

/// Decay rate of the exponential multiplier `m = exp(beta (x - a))`; independent of the scale `C`.
pub fn exponential_alpha(sys: &PhSystem, p: &SystemParameters, beta: f64, xi: f64) -> Result<f64> {
    Ok(exponential_bound(sys, p, beta, xi, 1.0)?.alpha)
}

/// `1/(b - a) + mu_B/eta_L`, the maximiser of `alpha(beta)`.
pub fn optimal_beta(sys: &PhSystem, p: &SystemParameters) -> f64 {
    1.0 / sys.length() + p.mu_b / p.eta_l
}

/// Closed-form rate at the optimal `beta`, obtained by substituting it into the
/// parameter chain.
pub fn optimal_alpha_closed_form(sys: &PhSystem, p: &SystemParameters, xi: f64) -> f64 {
    let len = sys.length();
    let decay = (-(1.0 + p.mu_b * len / p.eta_l)).exp();
    if p.eta_l / p.mu_p1 <= 2.0 * p.eta_k / p.mu_psi {
        xi / (xi + 1.0) * p.eta_l * p.eta_l * decay / (len * p.mu_l * p.mu_p1)
    } else {
        2.0 * xi * p.eta_k * p.eta_l * p.eta_l * decay
            / (len * p.mu_l * (p.eta_l * p.mu_psi + 2.0 * xi * p.eta_k * p.mu_p1))
    }
}

/// The same closed form with the second-branch denominator written as
/// `mu_P1 eta_K + 2 xi eta_L mu_Psi`. It agrees with [`optimal_alpha_closed_form`]
/// only in special cases (e.g. unit parameters at `xi = 1/2`).
pub fn optimal_alpha_swapped_denominator(sys: &PhSystem, p: &SystemParameters, xi: f64) -> f64 {
    let len = sys.length();
    let decay = (-(1.0 + p.mu_b * len / p.eta_l)).exp();
    if p.eta_l / p.mu_p1 <= 2.0 * p.eta_k / p.mu_psi {
        xi / (xi + 1.0) * p.eta_l * p.eta_l * decay / (len * p.mu_l * p.mu_p1)
    } else {
        2.0 * xi * p.eta_k * p.eta_l * p.eta_l * decay
            / (len * p.mu_l * (p.mu_p1 * p.eta_k + 2.0 * xi * p.eta_l * p.mu_psi))
    }
}

pub const BETA_SCAN_POINTS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaOptimum {
    pub beta_op: f64,
    pub alpha_op: f64,
    #[serde(rename = "M")]
    pub overshoot: f64,
    pub alpha_closed_form: f64,
    pub alpha_swapped_denominator: f64,
    /// Closed form and swapped-denominator form differ by more than 1e-9 relative.
    pub forms_disagree: bool,
    pub scan_beta: f64,
    pub scan_alpha: f64,
    pub scan_cell: f64,
    /// Scan maximiser within one cell of `beta_op`.
    pub scan_confirms: bool,
    pub params: SystemParameters,
}

/// Scan of `exponential_alpha` over `(mu_B/eta_L, hi]` with `points` samples; returns `(beta, alpha)` pairs.
pub fn beta_scan(sys: &PhSystem, p: &SystemParameters, xi: f64, hi: f64, points: usize) -> Result<Vec<(f64, f64)>> {
    let lo = p.mu_b / p.eta_l;
    (1..=points)
        .map(|j| {
            let beta = lo + j as f64 * (hi - lo) / points as f64;
            Ok((beta, exponential_alpha(sys, p, beta, xi)?))
        })
        .collect()
}

pub fn optimize_beta(sys: &PhSystem, xi: f64, grid_size: usize) -> Result<BetaOptimum> {
    let p = extremal_parameters(sys, &MultiplierSpec::linear(sys.a), grid_size)?;
    let beta_op = optimal_beta(sys, &p);
    let at_op = exponential_bound(sys, &p, beta_op, xi, 1.0)?;
    let closed = optimal_alpha_closed_form(sys, &p, xi);
    let swapped = optimal_alpha_swapped_denominator(sys, &p, xi);

    let lo = p.mu_b / p.eta_l;
    let hi = 3.0 * beta_op;
    let scan = beta_scan(sys, &p, xi, hi, BETA_SCAN_POINTS)?;
    let (scan_beta, scan_alpha) = scan
        .iter()
        .copied()
        .fold((f64::NAN, f64::NEG_INFINITY), |best, (b, a)| if a > best.1 { (b, a) } else { best });
    let cell = (hi - lo) / BETA_SCAN_POINTS as f64;

    Ok(BetaOptimum {
        beta_op,
        alpha_op: at_op.alpha,
        overshoot: at_op.overshoot,
        alpha_closed_form: closed,
        alpha_swapped_denominator: swapped,
        forms_disagree: !relatively_close(closed, swapped, 1e-9),
        scan_beta,
        scan_alpha,
        scan_cell: cell,
        scan_confirms: (scan_beta - beta_op).abs() <= cell * (1.0 + 1e-12),
        params: p,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AffineRoute {
    /// `L(x) = L x + D` with `P0 = G0 = 0`, so `A_s = q D - d L` is constant.
    ClosedForm,
    /// Positivity checked by scanning `A_s(x)`.
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineCheck {
    pub route: AffineRoute,
    /// `A_s` positive definite and `m >= 0` on the domain.
    pub holds: bool,
    /// The ratio test `q/d > max(mu_L/eta_D, -1/a)`, meaningful for `d > 0` on the closed-form route.
    pub ratio_condition: Option<bool>,
    pub c: Option<f64>,
}

pub fn affine_multiplier_check(sys: &PhSystem, q: f64, d: f64, grid_size: usize) -> Result<AffineCheck> {
    if d == 0.0 {
        return Err(Error::Domain("affine multiplier needs d != 0 (q/d undefined)".into()));
    }
    let m = MultiplierSpec::Affine { q, d };
    let structural = sys.p0.iter().all(|&v| v == 0.0) && sys.g0.iter().all(|&v| v == 0.0);
    let affine = if structural { sys.l.as_affine() } else { None };

    let (route, holds, ratio_condition) = match affine {
        Some((slope, offset)) => {
            let a_s = &offset * q - &slope * d;
            let sign_ok = q * sys.a + d >= 0.0 && q * sys.b + d > 0.0;
            let holds = sign_ok && linalg::min_eig(&a_s) > 0.0;
            let ratio = (d > 0.0).then(|| {
                let mut thr = linalg::max_eig(&slope) / linalg::min_eig(&offset);
                if sys.a != 0.0 {
                    thr = thr.max(-1.0 / sys.a);
                }
                q / d > thr
            });
            (AffineRoute::ClosedForm, holds, ratio)
        }
        None => {
            let pos = check_positivity(sys, &m, grid_size)?;
            let sign_ok = check_multiplier_sign(sys, &m, grid_size).is_ok();
            (AffineRoute::Numeric, pos.is_positive() && sign_ok, None)
        }
    };
    let c = if holds { Some(compute_c(sys, &m, grid_size)?) } else { None };
    Ok(AffineCheck { route, holds, ratio_condition, c })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Linear,
    Affine,
    Exponential,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Linear, Family::Affine, Family::Exponential];
}

pub const AFFINE_SEARCH_POINTS: usize = 64;

/// Ratios `q/d` tried for the affine family.
pub fn affine_search_ratios(sys: &PhSystem) -> Vec<f64> {
    let structural = sys.p0.iter().all(|&v| v == 0.0) && sys.g0.iter().all(|&v| v == 0.0);
    let mut lo = match (structural, sys.l.as_affine()) {
        (true, Some((slope, offset))) => (linalg::max_eig(&slope) / linalg::min_eig(&offset)).max(0.0),
        _ => 0.0,
    };
    if !(lo > 0.0 && lo.is_finite()) {
        lo = 1e-3 / sys.a.abs().max(sys.b.abs()).max(sys.length());
    }
    (1..=AFFINE_SEARCH_POINTS)
        .map(|j| lo * 1e3f64.powf(j as f64 / AFFINE_SEARCH_POINTS as f64))
        .collect()
}

/// Try each requested family and keep the largest `alpha` (then smaller `M`, then family order).
pub fn best_certificate(sys: &PhSystem, xi: f64, families: &[Family], grid_size: usize) -> Result<Certificate> {
    check_xi(xi)?;
    let mut failures = Vec::new();
    let mut best: Option<(Family, Certificate)> = None;
    let mut families = families.to_vec();
    families.sort();
    families.dedup();

    let mut consider = |fam: Family, res: Result<Certificate>, failures: &mut Vec<String>| match res {
        Ok(cert) if cert.alpha > 0.0 => {
            let better = match &best {
                None => true,
                Some((_, b)) => {
                    if relatively_close(cert.alpha, b.alpha, 1e-12) {
                        cert.overshoot < b.overshoot
                    } else {
                        cert.alpha > b.alpha
                    }
                }
            };
            if better {
                best = Some((fam, cert));
            }
        }
        Ok(cert) => failures.push(format!("{}: alpha = {} is not positive", cert.multiplier.family_name(), cert.alpha)),
        Err(Error::Uncertifiable { failures: f }) => failures.extend(f),
        Err(e) => failures.push(format!("{fam:?}: {e}")),
    };

    for fam in families {
        match fam {
            Family::Linear => {
                let r = assemble(sys, &MultiplierSpec::linear(sys.a), xi, grid_size, false);
                consider(fam, r, &mut failures);
            }
            Family::Affine => {
                let mut any = false;
                let mut last_err = None;
                for ratio in affine_search_ratios(sys) {
                    let m = MultiplierSpec::Affine { q: ratio, d: 1.0 };
                    if ratio * sys.a + 1.0 < 0.0 || ratio * sys.b + 1.0 <= 0.0 {
                        continue;
                    }
                    match assemble(sys, &m, xi, grid_size, false) {
                        Ok(c) => {
                            any = true;
                            consider(fam, Ok(c), &mut failures);
                        }
                        Err(e) => last_err = Some(e),
                    }
                }
                if !any {
                    let detail = last_err.map(|e| e.to_string()).unwrap_or_else(|| "no admissible ratio".into());
                    failures.push(format!("affine multiplier: no candidate certified ({detail})"));
                }
            }
            Family::Exponential => {
                let r = extremal_parameters(sys, &MultiplierSpec::linear(sys.a), grid_size).and_then(|p| {
                    let beta = optimal_beta(sys, &p);
                    if beta * sys.length() > MAX_EXPONENT {
                        return Err(Error::Uncertifiable {
                            failures: vec![format!(
                                "exponential multiplier: beta_op (b - a) = {:.1} overflows exp()",
                                beta * sys.length()
                            )],
                        });
                    }
                    assemble(sys, &MultiplierSpec::exponential(beta), xi, grid_size, false)
                });
                consider(fam, r, &mut failures);
            }
        }
    }

    match best {
        Some((_, cert)) => assemble(sys, &cert.multiplier, xi, grid_size, true),
        None => Err(Error::Uncertifiable { failures }),
    }
}
