//! The one-exercise perpetual problem in closed form.
//!
//! With a single exercise right the optimal rule is a first-passage time:
//! stop when the log price reaches a level `b`. The discounted payoff of the
//! rule stopping at level `b` is available from the Wiener–Hopf factor, the
//! optimal level is `x₁⋆ = log(K·ψ_α⁺(−1))`, and the value function below
//! the threshold is a mixture of the exponentials `e^{ρ_i(x − x₁⋆)}`.
//!
//! Everything downstream leans on this module: the multiple-stopping
//! recursion starts from the single-stop value and its thresholds never
//! exceed `x₁⋆`.

use crate::error::{Error, Result};
use crate::exppoly::ExpPoly;
use crate::factor::{build_factor, first_passage_transform, WienerHopfFactor};
use crate::model::{Contract, LevyModel};

/// Solution of the single-exercise problem.
#[derive(Debug, Clone)]
pub struct SingleResult {
    /// Optimal log-price threshold `x₁⋆`.
    pub x_star: f64,
    /// The same threshold in price units, `e^{x₁⋆}`.
    pub s_star: f64,
    /// The value function `v₁` of the log price: the exercise payoff
    /// `e^x − K` at and above `x₁⋆`, an exponential mixture below.
    pub value: ExpPoly,
}

/// The optimal single-exercise threshold `log(K·ψ_α⁺(−1))`.
///
/// # Errors
///
/// [`Error::OutOfStrip`] when `Φ(α) ≤ 1` (the transform has no value at
/// `β = −1`, so perpetual payoffs grow without bound), and
/// [`Error::BelowStrike`] in the degenerate case `ψ_α⁺(−1) ≤ 1` where the
/// formula would put the threshold at or below the strike.
pub fn threshold_x1(factor: &WienerHopfFactor, strike: f64) -> Result<f64> {
    let psi_m1 = factor.psi_plus(-1.0)?;
    let level = (strike * psi_m1).ln();
    if psi_m1 <= 1.0 {
        return Err(Error::BelowStrike {
            level,
            log_strike: strike.ln(),
        });
    }
    Ok(level)
}

/// Discounted expected payoff of exercising at the first passage of the log
/// price above `level`, started from `x`:
/// `E_x[e^{−ατ}(e^{X_τ} − K); τ < ∞]`, with immediate exercise when
/// `x ≥ level`.
///
/// # Errors
///
/// [`Error::OutOfStrip`] when `Φ(α) ≤ 1`.
pub fn stopping_value(
    factor: &WienerHopfFactor,
    strike: f64,
    x: f64,
    level: f64,
) -> Result<f64> {
    if x >= level {
        return Ok(x.exp() - strike);
    }
    let on_exp = first_passage_transform(factor, x, level, -1.0)?;
    let on_one = first_passage_transform(factor, x, level, 0.0)?;
    Ok(level.exp() * on_exp - strike * on_one)
}

/// Solve the single-exercise problem.
///
/// # Errors
///
/// Root-solver and strip failures as for [`threshold_x1`].
pub fn solve_single(model: &LevyModel, contract: &Contract) -> Result<SingleResult> {
    let factor = build_factor(model, contract.alpha())?;
    single_from_factor(&factor, contract.strike())
}

/// The same solution from a prebuilt factor (the recursion reuses one).
pub(crate) fn single_from_factor(
    factor: &WienerHopfFactor,
    strike: f64,
) -> Result<SingleResult> {
    let x_star = threshold_x1(factor, strike)?;
    // Below the threshold v₁(x) = Σ_i K·A_i/(ρ_i − 1) · e^{ρ_i(x − x₁⋆)};
    // above it the payoff e^x − K is exercised immediately.
    let below: Vec<(f64, Vec<f64>)> = factor
        .rho()
        .iter()
        .zip(factor.a())
        .map(|(&r, &a)| (r, vec![strike * a / (r - 1.0)]))
        .collect();
    let above = vec![(1.0, vec![x_star.exp()]), (0.0, vec![-strike])];
    let value = ExpPoly::from_term_lists(vec![x_star], vec![below, above])?;
    Ok(SingleResult {
        x_star,
        s_star: x_star.exp(),
        value,
    })
}

#[cfg(test)]
// Frozen reference values keep the full printed precision of the tools
// that produced them, even where that exceeds what f64 can resolve.
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use crate::model::MixturePhase;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn worked_model() -> LevyModel {
        LevyModel::spectrally_negative(0.36, 0.2, 1.0, vec![MixturePhase::new(1.0, 1.0)]).unwrap()
    }

    fn two_sided_model() -> LevyModel {
        LevyModel::new(
            0.36,
            0.2,
            1.0,
            vec![MixturePhase::new(1.0, 1.0)],
            0.1,
            vec![MixturePhase::new(1.0, 3.0)],
        )
        .unwrap()
    }

    fn worked_contract() -> Contract {
        Contract::new(50.0, -0.02, 1).unwrap()
    }

    #[test]
    fn worked_threshold_and_value_match_frozen_numbers() {
        let sol = solve_single(&worked_model(), &worked_contract()).unwrap();
        assert_relative_eq!(sol.x_star, 5.0371236047524124, max_relative = 1e-12);
        assert_relative_eq!(sol.s_star, 154.02633661191956, max_relative = 1e-12);
        let v = &sol.value;
        assert_relative_eq!(
            v.evaluate(50f64.ln()),
            19.663550612349417,
            max_relative = 1e-12
        );
        assert_relative_eq!(v.evaluate(3.0), 5.0956238577613474, max_relative = 1e-12);
        assert_relative_eq!(
            v.evaluate(sol.x_star - 1.0),
            23.664986444113633,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            v.evaluate(sol.x_star),
            104.02633661191956,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            v.evaluate(sol.x_star + 1.0),
            368.68699191629709,
            max_relative = 1e-12
        );
    }

    #[test]
    fn two_sided_threshold_matches_frozen_number() {
        let sol = solve_single(&two_sided_model(), &worked_contract()).unwrap();
        assert_relative_eq!(sol.x_star, 5.6671745812434113, max_relative = 1e-12);
    }

    #[test]
    fn value_is_continuous_and_smooth_at_the_threshold() {
        for model in [worked_model(), two_sided_model()] {
            let sol = solve_single(&model, &worked_contract()).unwrap();
            let b = sol.x_star;
            let v = &sol.value;
            assert_relative_eq!(
                v.evaluate(b - 1e-12),
                v.evaluate(b),
                max_relative = 1e-9
            );
            // σ > 0: smooth fit, and in this family it is exact because
            // Σ A_i ρ_i/(ρ_i − 1) = ψ_α⁺(−1).
            let dv = v.derivative().unwrap();
            assert_relative_eq!(dv.evaluate(b - 1e-13), b.exp(), max_relative = 1e-10);
        }
    }

    #[test]
    fn threshold_maximizes_the_level_value() {
        for model in [worked_model(), two_sided_model()] {
            let factor = crate::factor::build_factor(&model, -0.02).unwrap();
            let b_star = threshold_x1(&factor, 50.0).unwrap();
            let x = 50f64.ln();
            let best = stopping_value(&factor, 50.0, x, b_star).unwrap();
            for k in 0..=80 {
                let b = b_star - 0.4 + 0.01 * k as f64;
                let g = stopping_value(&factor, 50.0, x, b).unwrap();
                assert!(
                    g <= best + 1e-12,
                    "level {b} beats the threshold: {g} > {best}"
                );
            }
            // First-order condition via a central difference.
            let h = 1e-5;
            let d = (stopping_value(&factor, 50.0, x, b_star + h).unwrap()
                - stopping_value(&factor, 50.0, x, b_star - h).unwrap())
                / (2.0 * h);
            assert_abs_diff_eq!(d / best, 0.0, epsilon = 1e-8);
            // And the sign pattern of the slope away from the optimum.
            let up = (stopping_value(&factor, 50.0, x, b_star - 0.2 + h).unwrap()
                - stopping_value(&factor, 50.0, x, b_star - 0.2 - h).unwrap())
                / (2.0 * h);
            let down = (stopping_value(&factor, 50.0, x, b_star + 0.2 + h).unwrap()
                - stopping_value(&factor, 50.0, x, b_star + 0.2 - h).unwrap())
                / (2.0 * h);
            assert!(up > 0.0 && down < 0.0);
        }
    }

    #[test]
    fn value_dominates_the_payoff_and_is_convex_in_price() {
        let sol = solve_single(&worked_model(), &worked_contract()).unwrap();
        let k: f64 = 50.0;
        let lo = k.ln() - 2.0;
        let hi = sol.x_star + 2.0;
        let n = 200;
        let mut prev = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let x = lo + (hi - lo) * i as f64 / n as f64;
            let v = sol.value.evaluate(x);
            let payoff = (x.exp() - k).max(0.0);
            assert!(v >= payoff - 1e-9, "value {v} below payoff {payoff} at {x}");
            prev.push((x.exp(), v));
        }
        // Convexity in the price s = e^x: nonnegative second differences on
        // an even s-grid.
        let s_lo = prev.first().unwrap().0;
        let s_hi = prev.last().unwrap().0;
        let m = 400;
        let h = (s_hi - s_lo) / m as f64;
        for i in 1..m {
            let s = s_lo + h * i as f64;
            let f = |s: f64| sol.value.evaluate(s.ln());
            let second = f(s - h) - 2.0 * f(s) + f(s + h);
            assert!(second >= -1e-7 * s, "concave spot at s = {s}");
        }
    }

    #[test]
    fn shallow_strip_is_reported() {
        // Strong upward drift at a low discount level: Φ(α) < 1 and the
        // perpetual value diverges.
        let drifty =
            LevyModel::spectrally_negative(2.0, 0.2, 1.0, vec![MixturePhase::new(1.0, 1.0)])
                .unwrap();
        let factor = crate::factor::build_factor(&drifty, 0.5).unwrap();
        assert!(matches!(
            threshold_x1(&factor, 50.0),
            Err(Error::OutOfStrip { .. })
        ));
    }
}
