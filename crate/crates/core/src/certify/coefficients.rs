use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Allowed gap between the polynomial and the coefficient formulation of the
/// feasibility system, relative to the magnitude of the terms involved.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-12;

/// One-step coefficients of the Lyapunov recursion
/// `E[E'] ≤ E[α f + β|∇f|² + δ⟨∇f, v⟩ + ε|v|²]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub epsilon: f64,
}

pub fn step_coefficients(a: f64, b: f64, gamma: f64, mu: f64, c_l: f64, sigma: f64) -> CoefficientSet {
    let big_b = b / 2.0 + c_l * gamma * (1.0 + gamma * a / 2.0);
    let g2 = gamma * gamma;
    let damped = gamma - g2 * mu;
    CoefficientSet {
        alpha: a + big_b * g2 * sigma,
        beta: -gamma - a * g2 + big_b * g2,
        delta: 1.0 - mu * gamma + a * damped - 2.0 * big_b * damped,
        epsilon: big_b * (1.0 - 2.0 * gamma * mu + g2 * mu * mu),
    }
}

/// Required direction of a residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// Feasible when the residual is `≤ 0`.
    NonPositive,
    /// Feasible when the residual is `≥ 0`.
    NonNegative,
}

/// Residuals of the six relations, stored as printed:
///
/// * `r1, r2, r3`: the three γ-polynomials, each required `≤ 0`;
/// * `r4 = δ`, required `≥ 0`;
/// * `r5 = ab − C_L`, required `≥ 0`;
/// * `r6 = γ − b / C_L`, required `≤ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResiduals {
    pub r: [f64; 6],
    pub feasible: bool,
}

impl ConstraintResiduals {
    pub const RELATIONS: [Relation; 6] = [
        Relation::NonPositive,
        Relation::NonPositive,
        Relation::NonPositive,
        Relation::NonNegative,
        Relation::NonNegative,
        Relation::NonPositive,
    ];

    pub(crate) fn evaluate(a: f64, b: f64, gamma: f64, mu: f64, c_l: f64, l: f64, sigma: f64) -> Self {
        let g = gamma;
        let g2 = g * g;
        let g3 = g2 * g;
        let r1 = -1.0 + g * (b / 2.0 - a) + g2 * c_l + g3 * c_l * a / 2.0;
        let r2 = a * mu + a * b - a * a - 2.0 * l
            + g * (b * sigma / 2.0 + a * (2.0 * c_l - mu * b + mu * a) - 2.0 * l * (a - b / 2.0))
            + g2 * c_l * (sigma + a * a - 2.0 * a * mu + 2.0 * l)
            + g3 * c_l * a * (sigma / 2.0 - a * mu + l);
        let r3 = c_l - b / 2.0 * (mu + a - b)
            + g * (b * mu * mu / 2.0 + c_l * a / 2.0 - 2.0 * c_l * mu + b * a * mu / 2.0
                - b * b * mu / 2.0
                + c_l * b)
            + g2 * c_l * (mu * mu - a * mu + b * a / 2.0 - b * mu)
            + g3 * c_l * a * mu / 2.0 * (mu - b);
        let delta = 1.0
            + g * (a - mu - b)
            + g2 * (b * mu - a * mu - 2.0 * c_l)
            + g3 * (2.0 * c_l * mu - c_l * a)
            + g2 * g2 * c_l * a * mu;
        let r = [r1, r2, r3, delta, a * b - c_l, gamma - b / c_l];
        let feasible = r
            .iter()
            .zip(Self::RELATIONS)
            .all(|(v, rel)| satisfies(*v, rel));
        Self { r, feasible }
    }

    pub fn delta(&self) -> f64 {
        self.r[3]
    }

    /// 1-based indices of violated relations.
    pub fn violated(&self) -> Vec<usize> {
        self.r
            .iter()
            .zip(Self::RELATIONS)
            .enumerate()
            .filter(|(_, (v, rel))| !satisfies(**v, *rel))
            .map(|(i, _)| i + 1)
            .collect()
    }
}

fn satisfies(v: f64, rel: Relation) -> bool {
    match rel {
        Relation::NonPositive => v <= 0.0,
        Relation::NonNegative => v >= 0.0,
    }
}

/// Evaluate the feasibility system and cross-check it against the sign
/// conditions on the step coefficients (`β`, `α − aδ + 2βL`,
/// `ε − (b/2)δ` all equal `γ` times the corresponding polynomial).
pub fn constraint_residuals(
    a: f64,
    b: f64,
    gamma: f64,
    mu: f64,
    c_l: f64,
    l: f64,
    sigma: f64,
) -> Result<ConstraintResiduals> {
    let params = [a, b, gamma, mu, c_l, l, sigma];
    if params.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("all parameters must be finite"));
    }
    if !(gamma > 0.0) {
        return Err(Error::invalid(format!("gamma must be > 0, got {gamma}")));
    }
    let res = ConstraintResiduals::evaluate(a, b, gamma, mu, c_l, l, sigma);
    let c = step_coefficients(a, b, gamma, mu, c_l, sigma);
    let coefficient_form = [
        c.beta,
        c.alpha - a * c.delta + 2.0 * c.beta * l,
        c.epsilon - b / 2.0 * c.delta,
    ];
    let scale = 1.0 + params.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (i, (&coef, &poly)) in coefficient_form.iter().zip(&res.r[..3]).enumerate() {
        let gap = (coef - gamma * poly).abs();
        // Terms reach degree four in the parameters.
        if gap > CONSISTENCY_TOLERANCE * scale.powi(4) {
            return Err(Error::InternalConsistency(format!(
                "relation {} differs between coefficient and polynomial form by {gap:e}",
                i + 1
            )));
        }
    }
    let delta_gap = (c.delta - res.delta()).abs();
    if delta_gap > CONSISTENCY_TOLERANCE * scale.powi(4) {
        return Err(Error::InternalConsistency(format!("delta differs by {delta_gap:e}")));
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn zero_step_limit() {
        let c = step_coefficients(1.3, 0.7, 0.0, 2.0, 5.0, 3.0);
        assert_eq!(c, CoefficientSet { alpha: 1.3, beta: 0.0, delta: 1.0, epsilon: 0.35 });
    }

    #[test]
    fn hand_evaluated_coefficients() {
        // B = 1 + 0.1·(1 + 0.05) = 1.105
        let c = step_coefficients(1.0, 2.0, 0.1, 1.0, 1.0, 0.0);
        assert_abs_diff_eq!(c.alpha, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(c.beta, -0.09895, epsilon = 1e-14);
        assert_abs_diff_eq!(c.delta, 0.7911, epsilon = 1e-14);
        assert_abs_diff_eq!(c.epsilon, 0.89505, epsilon = 1e-14);

        let noisy = step_coefficients(1.0, 2.0, 0.1, 1.0, 1.0, 2.0);
        assert_abs_diff_eq!(noisy.alpha, 1.0221, epsilon = 1e-14);
        assert_eq!((noisy.beta, noisy.delta, noisy.epsilon), (c.beta, c.delta, c.epsilon));
    }

    #[test]
    fn trivial_infeasibility() {
        let r = constraint_residuals(0.0, 0.0, 0.01, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert!(!r.feasible);
        assert!(r.violated().contains(&5));

        let r = constraint_residuals(2.0, 1.0, 1.5, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert!(!r.feasible);
        assert!(r.violated().contains(&6));
    }

    #[test]
    fn small_step_construction_is_feasible() {
        let s2 = 2f64.sqrt();
        let r = constraint_residuals(s2 + 0.01, s2, 1e-5, s2, 1.0, 1.0, 0.0).unwrap();
        assert!(r.feasible, "{r:?}");
    }

    #[test]
    fn rejects_non_positive_step() {
        assert!(constraint_residuals(1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0).is_err());
        assert!(constraint_residuals(f64::NAN, 1.0, 0.1, 1.0, 1.0, 1.0, 0.0).is_err());
    }

    fn coefficient_feasible(a: f64, b: f64, g: f64, mu: f64, c_l: f64, l: f64, s: f64) -> bool {
        let c = step_coefficients(a, b, g, mu, c_l, s);
        c.beta <= 0.0
            && c.alpha - a * c.delta + 2.0 * c.beta * l <= 0.0
            && c.epsilon - b / 2.0 * c.delta <= 0.0
            && c.delta >= 0.0
            && a * b >= c_l
            && c_l / 2.0 * g * g - b / 2.0 * g <= 0.0
    }

    fn min_margin(r: &ConstraintResiduals, gamma: f64) -> f64 {
        r.r[..3]
            .iter()
            .map(|v| (v * gamma).abs())
            .chain([r.r[3].abs(), r.r[4].abs(), (r.r[5] * gamma).abs()])
            .fold(f64::INFINITY, f64::min)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn formulations_agree(
            a in 0.0f64..5.0,
            b in 0.0f64..5.0,
            gamma in 1e-4f64..0.5,
            mu in 0.01f64..5.0,
            l in 0.01f64..2.0,
            kappa in 1.0f64..5.0,
            sigma in 0.0f64..10.0,
        ) {
            let c_l = l * kappa;
            let r = constraint_residuals(a, b, gamma, mu, c_l, l, sigma).unwrap();
            // Only compare away from the boundary where rounding decides.
            prop_assume!(min_margin(&r, gamma) > 1e-10);
            prop_assert_eq!(r.feasible, coefficient_feasible(a, b, gamma, mu, c_l, l, sigma));
        }
    }
}
