use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Admissible friction set of the closed-form rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum MuWindow {
    Interval { lo: f64, hi: f64 },
    Point { mu: f64 },
}

impl MuWindow {
    /// A representative friction: the point, or the lower interval end.
    pub fn representative(&self) -> f64 {
        match *self {
            MuWindow::Interval { lo, .. } => lo,
            MuWindow::Point { mu } => mu,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalRate {
    /// Rate in numerical time.
    pub m: f64,
    pub mu_window: MuWindow,
    pub kappa: f64,
}

/// Branch for `κ < 9/8`: an interval of optimal frictions, rate `√(2L)`.
pub fn theo2_interval_branch(l: f64, kappa: f64) -> (f64, f64, f64) {
    let root = (9.0 - 8.0 * kappa).max(0.0).sqrt();
    let s = l.sqrt() / 8f64.sqrt();
    ((5.0 - root) * s, (5.0 + root) * s, (2.0 * l).sqrt())
}

/// Branch for `κ ≥ 9/8`: a single optimal friction and its rate.
pub fn theo2_point_branch(l: f64, kappa: f64) -> (f64, f64) {
    let (sk, skm) = (kappa.sqrt(), (kappa - 1.0).max(0.0).sqrt());
    ((2.0 * sk - skm) * l.sqrt(), 2.0 * (sk - skm) * l.sqrt())
}

/// Optimal friction and small-step rate as a function of `κ = C_L / L`.
pub fn optimal_friction_discrete(l: f64, c_l: f64) -> Result<TheoreticalRate> {
    if !(l > 0.0) || !(c_l >= l) || !c_l.is_finite() {
        return Err(Error::invalid(format!("need C_L >= L > 0, got L = {l}, C_L = {c_l}")));
    }
    let kappa = c_l / l;
    if kappa < 9.0 / 8.0 {
        let (lo, hi, m) = theo2_interval_branch(l, kappa);
        Ok(TheoreticalRate { m, mu_window: MuWindow::Interval { lo, hi }, kappa })
    } else {
        let (mu, m) = theo2_point_branch(l, kappa);
        Ok(TheoreticalRate { m, mu_window: MuWindow::Point { mu }, kappa })
    }
}

/// Output of the small-step construction `a = b + 2C_L/b − μ + ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasiblePair {
    pub a: f64,
    pub mu_minus: f64,
    pub mu_plus: f64,
    /// Whether `ab ≥ C_L` holds as well (needed when paths may exit).
    pub ab_ok: bool,
}

fn mu_roots(b: f64, c_l: f64, l: f64, eps: f64) -> (f64, f64) {
    let centre = b + 3.0 * c_l / b + 1.5 * eps;
    let disc = (b + c_l / b + eps / 2.0).powi(2) - 4.0 * l;
    let root = disc.max(0.0).sqrt();
    (0.5 * (centre - root), 0.5 * (centre + root))
}

pub fn feasible_pair(mu: f64, c_l: f64, l: f64, eps: f64, b: f64) -> Result<FeasiblePair> {
    if !(eps > 0.0) || !(b > 0.0) {
        return Err(Error::invalid("eps and b must be > 0"));
    }
    let (mu_minus, mu_plus) = mu_roots(b, c_l, l, eps);
    let lower = c_l / b + eps / 2.0;
    let upper = b + 2.0 * c_l / b + eps;
    if mu <= lower {
        return Err(Error::invalid(format!("mu = {mu} <= C_L/b + eps/2 = {lower}")));
    }
    if mu >= upper {
        return Err(Error::invalid(format!("mu = {mu} >= b + 2C_L/b + eps = {upper}")));
    }
    if mu >= mu_minus && mu <= mu_plus {
        return Err(Error::invalid(format!(
            "mu = {mu} lies in the excluded window [{mu_minus}, {mu_plus}]"
        )));
    }
    let a = b + 2.0 * c_l / b - mu + eps;
    Ok(FeasiblePair { a, mu_minus, mu_plus, ab_ok: a * b >= c_l })
}

/// Which term of `min(a, μ − a + b)` binds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Binding {
    /// `m = a` (position / objective branch).
    Position,
    /// `m = μ − a + b` (velocity branch).
    Velocity,
    /// Both terms are equal.
    Tie,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallStepRate {
    pub m: f64,
    pub binding: Binding,
    pub boundary_flag: bool,
}

/// `m = min(a, μ − a + b)` under the strict small-step conditions.
pub fn small_step_rate(a: f64, b: f64, mu: f64, l: f64, c_l: f64) -> Result<SmallStepRate> {
    let c1 = mu - a + b;
    let c2 = a * mu - a * a + a * b - 2.0 * l;
    let c3 = c_l - b / 2.0 * (mu + a - b);
    let mut violated = Vec::new();
    if !(c1 > 0.0) {
        violated.push(format!("mu - a + b = {c1} must be > 0"));
    }
    if !(c2 < 0.0) {
        violated.push(format!("a mu - a^2 + ab - 2L = {c2} must be < 0"));
    }
    if !(c3 < 0.0) {
        violated.push(format!("C_L - (b/2)(mu + a - b) = {c3} must be < 0"));
    }
    if !violated.is_empty() {
        return Err(Error::Infeasible(violated.join("; ")));
    }
    let (m, binding) = if a < c1 {
        (a, Binding::Position)
    } else if c1 < a {
        (c1, Binding::Velocity)
    } else {
        (a, Binding::Tie)
    };
    Ok(SmallStepRate { m, binding, boundary_flag: binding == Binding::Tie })
}

/// Small-step rate for fixed technical parameters `(b, ε)` and friction `μ`.
///
/// The friction must lie in `(C_L/b + ε/2, μ₋] ∪ [μ₊, b + 2C_L/b + ε)`;
/// the root edges are admitted as limits of the open window.
pub fn rate_lem49378(b: f64, mu: f64, eps: f64, c_l: f64, l: f64) -> Result<f64> {
    if !(b > 0.0) || !(eps >= 0.0) {
        return Err(Error::invalid("need b > 0 and eps >= 0"));
    }
    let (mu_minus, mu_plus) = mu_roots(b, c_l, l, eps);
    let lower = c_l / b + eps / 2.0;
    let upper = b + 2.0 * c_l / b + eps;
    if !(mu > lower && mu < upper) || (mu > mu_minus && mu < mu_plus) {
        return Err(Error::invalid(format!(
            "mu = {mu} not in ({lower}, {mu_minus}] U [{mu_plus}, {upper})"
        )));
    }
    let branch = (b + 4.0 * c_l / b + 2.0 * eps) / 3.0;
    Ok(if mu < branch {
        2.0 * (mu - c_l / b - eps)
    } else {
        b + 2.0 * c_l / b - mu
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdFactor {
    /// Per-step contraction `1 − 2Lγ + γ² C_L (2L + σ) / 2`.
    pub rho: f64,
    pub convergent: bool,
    /// Largest convergent step `4L / (C_L (2L + σ))` (exclusive).
    pub gamma_threshold: f64,
    /// Comparison rate `1/ρ`.
    pub r: f64,
}

pub fn sgd_step_factor(l: f64, c_l: f64, sigma: f64, gamma: f64) -> SgdFactor {
    let rho = 1.0 - 2.0 * l * gamma + gamma * gamma * c_l * (2.0 * l + sigma) / 2.0;
    SgdFactor {
        rho,
        convergent: rho < 1.0,
        gamma_threshold: 4.0 * l / (c_l * (2.0 * l + sigma)),
        r: 1.0 / rho,
    }
}

/// Condition number above which SGD with step `γ` stops converging.
pub fn sgd_kappa_threshold(l: f64, sigma: f64, gamma: f64) -> f64 {
    4.0 / (gamma * (2.0 * l + sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::SQRT_2;

    #[test]
    fn theo2_isotropic() {
        let t = optimal_friction_discrete(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(t.m, SQRT_2, epsilon = 1e-14);
        match t.mu_window {
            MuWindow::Interval { lo, hi } => {
                assert_abs_diff_eq!(lo, 4.0 / 8f64.sqrt(), epsilon = 1e-14);
                assert_abs_diff_eq!(hi, 6.0 / 8f64.sqrt(), epsilon = 1e-14);
                assert_abs_diff_eq!(hi, 2.12132, epsilon = 1e-5);
            }
            w => panic!("unexpected window {w:?}"),
        }
    }

    #[test]
    fn theo2_point_branch_kappa_two() {
        let t = optimal_friction_discrete(1.0, 2.0).unwrap();
        assert_abs_diff_eq!(t.mu_window.representative(), 2.0 * SQRT_2 - 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(t.m, 2.0 * (SQRT_2 - 1.0), epsilon = 1e-14);
        assert_abs_diff_eq!(t.m, 0.82843, epsilon = 1e-5);
    }

    #[test]
    fn theo2_continuous_at_nine_eighths() {
        for &l in &[0.01, 0.5, 1.0, 3.0] {
            let k = 9.0 / 8.0;
            let (lo, hi, m1) = theo2_interval_branch(l, k);
            let (mu, m2) = theo2_point_branch(l, k);
            let expected = 5.0 * l.sqrt() / 8f64.sqrt();
            assert!((lo - hi).abs() <= 1e-12 && (lo - mu).abs() <= 1e-12 && (mu - expected).abs() <= 1e-12);
            assert!((m1 - m2).abs() <= 1e-12 && (m1 - (2.0 * l).sqrt()).abs() <= 1e-12);
        }
        assert!(optimal_friction_discrete(1.0, 0.9).is_err());
    }

    #[test]
    fn feasible_pair_isotropic_example() {
        let p = feasible_pair(SQRT_2, 1.0, 1.0, 0.01, SQRT_2).unwrap();
        assert_abs_diff_eq!(p.a, SQRT_2 + 0.01, epsilon = 1e-14);
        assert!(p.ab_ok);
        let s = small_step_rate(p.a, SQRT_2, SQRT_2, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(s.m, 2.0 * (SQRT_2 - 1.0 / SQRT_2) - 0.01, epsilon = 1e-14);
        assert_abs_diff_eq!(s.m, 1.40421, epsilon = 1e-5);
        assert_eq!(s.binding, Binding::Velocity);
    }

    #[test]
    fn feasible_pair_rejects_low_friction() {
        assert!(feasible_pair(1.0 / SQRT_2, 1.0, 1.0, 0.01, SQRT_2).is_err());
        assert!(feasible_pair(0.5, 1.0, 1.0, 0.01, 2.0).is_err());
    }

    #[test]
    fn small_step_tie_and_strictness() {
        // a = μ − a + b = 1.375 with dyadic inputs, L = C_L = 1.
        let s = small_step_rate(1.375, 1.0, 1.75, 1.0, 1.0).unwrap();
        assert!(s.boundary_flag);
        assert_eq!(s.m, 1.375);
        // a μ − a² + ab − 2L = 0 exactly.
        assert!(matches!(small_step_rate(2.0, 2.0, 1.0, 1.0, 1.0), Err(Error::Infeasible(_))));
    }

    #[test]
    fn lem49378_branches() {
        assert_abs_diff_eq!(rate_lem49378(1.0, 1.5, 0.0, 1.0, 1.0).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(rate_lem49378(1.0, 2.0, 0.0, 1.0, 1.0).unwrap(), 1.0, epsilon = 1e-14);
        let at_branch = rate_lem49378(1.0, 5.0 / 3.0, 0.0, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(at_branch, 4.0 / 3.0, epsilon = 1e-14);
        let below = 2.0 * (5.0 / 3.0 - 1.0);
        assert_abs_diff_eq!(below, 4.0 / 3.0, epsilon = 1e-14);
        assert!(rate_lem49378(1.0, 0.9, 0.0, 1.0, 1.0).is_err());
        // Inside the excluded window when L < C_L.
        assert!(rate_lem49378(1.0, 2.0, 0.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn sgd_factor_examples() {
        let f = sgd_step_factor(1.0, 1.0, 0.0, 0.01);
        assert_abs_diff_eq!(f.rho, 0.9801, epsilon = 1e-14);
        assert!(f.convergent);
        assert_eq!(sgd_step_factor(1.0, 1.0, 0.0, 0.0).rho, 1.0);
        assert_abs_diff_eq!(sgd_kappa_threshold(0.001, 100.0, 0.01), 3.99992, epsilon = 1e-5);
    }

    #[test]
    fn discriminant_is_nonnegative() {
        for i in 1..200 {
            let b = 0.05 * i as f64;
            for &(l, c_l) in &[(1.0, 1.0), (0.1, 2.0), (0.5, 0.5)] {
                let disc = (b + c_l / b).powi(2) - 4.0 * l;
                assert!(disc >= 0.0);
            }
        }
    }
}
