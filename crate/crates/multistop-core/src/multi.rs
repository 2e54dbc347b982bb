//! The multiple-stopping recursion with Erlang refraction periods.
//!
//! With `n` exercise rights and a mandatory Erlang(m, q) wait δ after each
//! exercise, the value functions satisfy a downward recursion: holding `k`
//! rights, exercising pays `φ⁽ᵏ⁾(x) = (e^x − K)⁺ + R[v⁽ᵏ⁻¹⁾](x)` where `R`
//! averages the next value over the refraction period,
//!
//! ```text
//! R[f](x) = E[e^{−αδ} f(x + X_δ)] = (q/(q+α))^m · (f ∗ r_{q+α}∗ ⋯ ∗ r_{q+α})(x),
//! ```
//!
//! an `m`-fold convolution with the resolvent kernel of the process. Each
//! stage is optimally exercised at a first-passage threshold `x_k⋆`, the
//! root of a one-dimensional first-order-condition function that obeys its
//! own recursion through `R`. Thresholds decrease in `k` (the more rights
//! remain, the earlier one exercises) and never exceed the single-exercise
//! threshold `x₁⋆`.
//!
//! All functions stay inside the exponential-polynomial class, so the
//! recursion is exact up to root-finding: no grids, no quadrature.

use crate::error::{Error, Result};
use crate::exppoly::ExpPoly;
use crate::factor::{
    build_factor, integrate_measure, resolvent_density, WienerHopfFactor,
};
use crate::model::{validate, Contract, LevyModel, RefractionSpec};
use crate::single::threshold_x1;

/// Iteration count for the threshold bisection: 60 halvings of a bracket of
/// width ≲ x₁⋆ − log K take it to machine precision (well below the 1e-10
/// absolute accuracy the thresholds are quoted at), so the first-order
/// condition residual is limited only by evaluation round-off.
const THRESHOLD_ITERS: usize = 60;

/// The refraction-period averaging operator `R`.
#[derive(Debug, Clone)]
pub struct RefractionOperator {
    kernel: ExpPoly,
    scale: f64,
    shape: u32,
}

impl RefractionOperator {
    /// Build `R` for a model, discount rate and refraction law.
    ///
    /// # Errors
    ///
    /// [`Error::AssumptionViolated`] when `q + α ≤ 0` (the discounted wait
    /// has no finite transform) or when `Φ(q+α) ≤ 1`, plus root-solver
    /// failures from the resolvent construction.
    pub fn new(model: &LevyModel, alpha: f64, spec: &RefractionSpec) -> Result<Self> {
        let p = spec.rate() + alpha;
        if p <= 0.0 {
            return Err(Error::AssumptionViolated {
                check: "refraction-rate",
                detail: format!(
                    "q + alpha = {p} must be positive for the refraction discount to be finite"
                ),
            });
        }
        Ok(RefractionOperator {
            kernel: resolvent_density(model, p)?,
            scale: (spec.rate() / p).powi(spec.shape() as i32),
            shape: spec.shape(),
        })
    }

    /// The convolution kernel `r_{q+α}` (a two-sided exponential mixture).
    pub fn kernel(&self) -> &ExpPoly {
        &self.kernel
    }

    /// The discount factor `(q/(q+α))^m` applied after the convolutions.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Apply `R` to a function.
    ///
    /// # Errors
    ///
    /// [`Error::DivergentConvolution`] when a tail of `f` outgrows the
    /// kernel, [`Error::DegreeCap`] when repeated application piles too many
    /// coincident exponential rates on top of each other.
    pub fn apply(&self, f: &ExpPoly) -> Result<ExpPoly> {
        if f.is_zero() {
            return Ok(ExpPoly::zero());
        }
        let mut g = f.convolve_density(&self.kernel)?;
        for _ in 1..self.shape {
            g = g.convolve_density(&self.kernel)?;
        }
        g.scale(self.scale)
    }
}

/// Per-stage numerical diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct StageDiagnostics {
    /// |first-order-condition function| at the accepted threshold.
    pub foc_residual: f64,
    /// |left limit − right value| of `v⁽ᵏ⁾` at its threshold.
    pub continuity_gap: f64,
}

/// Solution of the `n`-exercise problem.
#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Optimal log-price thresholds `x_k⋆`, `k = 1..=n` (decreasing).
    pub thresholds: Vec<f64>,
    /// Value functions `v⁽ᵏ⁾` of the log price, `k = 1..=n`.
    pub values: Vec<ExpPoly>,
    /// Exercise payoffs `φ⁽ᵏ⁾ = (e^x − K)⁺ + R[v⁽ᵏ⁻¹⁾]`.
    pub phi_functions: Vec<ExpPoly>,
    /// First-order-condition functions restricted to `[x_k⋆, ∞)` (the
    /// carriers of the threshold recursion).
    pub u_functions: Vec<ExpPoly>,
    /// Per-stage residuals.
    pub diagnostics: Vec<StageDiagnostics>,
}

impl SolveResult {
    /// Thresholds in price units, `e^{x_k⋆}`.
    pub fn price_thresholds(&self) -> Vec<f64> {
        self.thresholds.iter().map(|x| x.exp()).collect()
    }
}

/// Stateful solver carrying the factor, the refraction operator and the
/// stage-independent pieces of the recursion.
#[derive(Debug, Clone)]
pub struct MultiSolver {
    contract: Contract,
    factor: WienerHopfFactor,
    refraction: RefractionOperator,
    x1_star: f64,
    /// `(e^{x₁⋆} − e^x)/ψ_α⁺(−1)`: the single-exercise first-order-condition
    /// function, the base case of the threshold recursion.
    base: ExpPoly,
    /// `(e^x − K)⁺`.
    payoff_plus: ExpPoly,
}

impl MultiSolver {
    /// Validate the inputs and precompute the recursion's fixed data.
    ///
    /// # Errors
    ///
    /// [`Error::AssumptionViolated`] from a failed validation check, plus
    /// factor/threshold construction failures.
    pub fn new(
        model: &LevyModel,
        contract: &Contract,
        refraction: &RefractionSpec,
    ) -> Result<MultiSolver> {
        validate(model, contract, refraction).ensure()?;
        let factor = build_factor(model, contract.alpha())?;
        let x1_star = threshold_x1(&factor, contract.strike())?;
        let w = 1.0 / factor.psi_plus(-1.0)?;
        let base = ExpPoly::single(&[(0.0, w * x1_star.exp()), (1.0, -w)])?;
        let k = contract.strike();
        let payoff_plus = ExpPoly::from_term_lists(
            vec![k.ln()],
            vec![vec![], vec![(1.0, vec![k]), (0.0, vec![-k])]],
        )?;
        let refraction = RefractionOperator::new(model, contract.alpha(), refraction)?;
        Ok(MultiSolver {
            contract: *contract,
            factor,
            refraction,
            x1_star,
            base,
            payoff_plus,
        })
    }

    /// The single-exercise threshold `x₁⋆`.
    pub fn x1_star(&self) -> f64 {
        self.x1_star
    }

    /// The Wiener–Hopf factor at the discount rate.
    pub fn factor(&self) -> &WienerHopfFactor {
        &self.factor
    }

    /// The refraction operator `R`.
    pub fn refraction(&self) -> &RefractionOperator {
        &self.refraction
    }

    /// The base first-order-condition function.
    pub fn base(&self) -> &ExpPoly {
        &self.base
    }

    /// Run the recursion for all `n` stages.
    pub fn run(&self) -> Result<SolveResult> {
        let n = self.contract.n_exercises();
        let mut out = SolveResult {
            thresholds: Vec::with_capacity(n),
            values: Vec::with_capacity(n),
            phi_functions: Vec::with_capacity(n),
            u_functions: Vec::with_capacity(n),
            diagnostics: Vec::with_capacity(n),
        };
        for k in 1..=n {
            let u_tilde = match out.u_functions.last() {
                None => self.base.clone(),
                Some(u_prev) => self.base.add(&self.refraction.apply(u_prev)?)?,
            };
            let x_k = if k == 1 {
                self.x1_star
            } else {
                self.solve_threshold(&u_tilde)?
            };
            let phi_k = match out.values.last() {
                None => self.payoff_plus.clone(),
                Some(v_prev) => self.payoff_plus.add(&self.refraction.apply(v_prev)?)?,
            };
            let (v_k, continuity_gap) = self.crossing_value(&phi_k, x_k)?;
            out.diagnostics.push(StageDiagnostics {
                foc_residual: u_tilde.evaluate(x_k).abs(),
                continuity_gap,
            });
            out.thresholds.push(x_k);
            out.u_functions.push(u_tilde.zero_below(x_k)?);
            out.phi_functions.push(phi_k);
            out.values.push(v_k);
        }
        Ok(out)
    }

    /// Locate the root of the first-order-condition function in
    /// `(log K, x₁⋆]` by bisection. The function is positive deep below the
    /// strike and nonpositive at `x₁⋆`; when it is still nonnegative at
    /// `x₁⋆` (the base case, up to rounding) the threshold is `x₁⋆` itself.
    fn solve_threshold(&self, f: &ExpPoly) -> Result<f64> {
        let mut lo = self.contract.log_strike() + 1e-12;
        let mut hi = self.x1_star;
        if f.evaluate(hi) >= 0.0 {
            return Ok(hi);
        }
        let f_lo = f.evaluate(lo);
        if f_lo <= 0.0 {
            return Err(Error::BracketFailure {
                what: "refraction-threshold",
                lo,
                hi,
                f_lo,
                f_hi: f.evaluate(hi),
            });
        }
        for _ in 0..THRESHOLD_ITERS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f.evaluate(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// The value of exercising `φ` at the first passage above `b`: equal to
    /// `φ` on `[b, ∞)`, and to `Σ_i A_i e^{ρ_i(x−b)} ∫ φ(b+y) ν̄_i(dy)`
    /// below. Also returns the continuity gap at `b` (zero in exact
    /// arithmetic whenever the supremum creeps).
    fn crossing_value(&self, phi: &ExpPoly, b: f64) -> Result<(ExpPoly, f64)> {
        let mut below_terms = Vec::with_capacity(self.factor.rho().len());
        let mut at_b = 0.0;
        for (i, (&r, &a)) in self
            .factor
            .rho()
            .iter()
            .zip(self.factor.a())
            .enumerate()
        {
            let c = a * integrate_measure(phi, &self.factor.nu_bar()[i], b)?;
            at_b += c;
            below_terms.push((r, vec![c]));
        }
        let below = ExpPoly::from_term_lists(vec![b], vec![below_terms, vec![]])?;
        let v = below.add(&phi.zero_below(b)?)?;
        Ok((v, (at_b - phi.evaluate(b)).abs()))
    }
}

/// Solve the full `n`-exercise problem.
///
/// # Errors
///
/// See [`MultiSolver::new`] and [`MultiSolver::run`].
pub fn solve_all(
    model: &LevyModel,
    contract: &Contract,
    refraction: &RefractionSpec,
) -> Result<SolveResult> {
    MultiSolver::new(model, contract, refraction)?.run()
}

#[cfg(test)]
// Frozen reference values keep the full printed precision of the tools
// that produced them, even where that exceeds what f64 can resolve.
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use crate::model::MixturePhase;
    use crate::single::solve_single;
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

    fn contract(n: usize) -> Contract {
        Contract::new(50.0, -0.02, n).unwrap()
    }

    #[test]
    fn refraction_identities_on_exponentials() {
        let m = worked_model();
        // R[e^x] = e^x · (q/(q+α−ψ(1)))^m and R[1] = (q/(q+α))^m.
        let r1 = RefractionOperator::new(&m, -0.02, &RefractionSpec::new(1, 1.0).unwrap()).unwrap();
        let e = ExpPoly::single(&[(1.0, 1.0)]).unwrap();
        let ge = r1.apply(&e).unwrap();
        assert_relative_eq!(ge.evaluate(0.0), 1.0 / 1.1, max_relative = 1e-12);
        assert_relative_eq!(
            ge.evaluate(2.0),
            (2f64).exp() / 1.1,
            max_relative = 1e-12
        );
        let one = ExpPoly::constant(1.0);
        assert_relative_eq!(
            r1.apply(&one).unwrap().evaluate(0.3),
            1.0 / 0.98,
            max_relative = 1e-13
        );
        // Erlang-2 at q = 2.
        let r2 = RefractionOperator::new(&m, -0.02, &RefractionSpec::new(2, 2.0).unwrap()).unwrap();
        assert_relative_eq!(
            r2.apply(&e).unwrap().evaluate(1.3),
            3.3281602427385435,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            r2.apply(&one).unwrap().evaluate(0.0),
            (2.0f64 / 1.98).powi(2),
            max_relative = 1e-13
        );
        // Applying R to zero stays zero.
        assert!(r1.apply(&ExpPoly::zero()).unwrap().is_zero());
    }

    #[test]
    fn two_exercises_match_frozen_values() {
        let result = solve_all(
            &worked_model(),
            &contract(2),
            &RefractionSpec::new(1, 1.0).unwrap(),
        )
        .unwrap();
        assert_relative_eq!(result.thresholds[0], 5.0371236047524124, max_relative = 1e-12);
        assert_abs_diff_eq!(result.thresholds[1], 4.9241411674869178, epsilon = 2e-10);
        let v2 = &result.values[1];
        let frozen = [
            (50f64.ln(), 38.540790914273222),
            (4.9241411674869178, 172.48450811348081),
            (3.0, 9.9874828077296890),
            (4.2, 59.033767196484954),
            (5.2, 254.32972708068626),
            (6.0, 675.19542350860533),
        ];
        for (x, v) in frozen {
            assert_relative_eq!(v2.evaluate(x), v, max_relative = 1e-9);
        }
        for d in &result.diagnostics {
            assert!(d.foc_residual < 1e-9, "FOC residual {}", d.foc_residual);
            assert!(d.continuity_gap < 1e-8, "continuity gap {}", d.continuity_gap);
        }
    }

    #[test]
    fn recursion_internals_match_frozen_values() {
        // The first-order-condition machinery: u⁽¹⁾ is the base function
        // restricted to [x₁⋆, ∞), R[u⁽¹⁾] and ũ₀⁽²⁾ = base + R[u⁽¹⁾] follow.
        let solver = MultiSolver::new(
            &worked_model(),
            &contract(2),
            &RefractionSpec::new(1, 1.0).unwrap(),
        )
        .unwrap();
        let result = solver.run().unwrap();
        let ru1 = solver.refraction().apply(&result.u_functions[0]).unwrap();
        let frozen_ru1 = [
            (4.5, -0.96208366668801400),
            (4.9241411674869178, -5.3416826789160369),
            (5.2, -15.142288127005757),
            (50f64.ln(), -0.08936718158455864),
        ];
        for (x, v) in frozen_ru1 {
            assert_relative_eq!(ru1.evaluate(x), v, max_relative = 1e-9);
        }
        let u_tilde2 = solver.base().add(&ru1).unwrap();
        let frozen_ut2 = [
            (4.5, 19.816572347404416),
            (5.0, -5.4360320438868216),
            (5.2, -23.986848694553253),
            (50f64.ln(), 33.679642359303699),
        ];
        for (x, v) in frozen_ut2 {
            assert_relative_eq!(u_tilde2.evaluate(x), v, max_relative = 1e-9);
        }
        // u functions vanish below their thresholds and are nonpositive
        // (up to the root-finding residual at the threshold itself).
        for (u, &x) in result.u_functions.iter().zip(&result.thresholds) {
            assert_abs_diff_eq!(u.evaluate(x - 0.3), 0.0);
            for t in [0.0, 0.4, 1.1] {
                assert!(u.evaluate(x + t) <= 1e-11);
            }
        }
    }

    #[test]
    fn erlang_two_refraction_matches_frozen_values() {
        let result = solve_all(
            &worked_model(),
            &contract(2),
            &RefractionSpec::new(2, 2.0).unwrap(),
        )
        .unwrap();
        assert_abs_diff_eq!(result.thresholds[1], 4.9150794103255454, epsilon = 2e-10);
        assert_relative_eq!(
            result.values[1].evaluate(50f64.ln()),
            38.610897081043873,
            max_relative = 1e-9
        );
    }

    #[test]
    fn two_sided_three_exercises_match_frozen_values() {
        let result = solve_all(
            &two_sided_model(),
            &Contract::new(50.0, -0.02, 3).unwrap(),
            &RefractionSpec::new(2, 2.0).unwrap(),
        )
        .unwrap();
        let frozen = [5.6671745812434113, 5.5209167942095224, 5.4032585756182553];
        for (got, expect) in result.thresholds.iter().zip(frozen.iter()) {
            assert_abs_diff_eq!(got, expect, epsilon = 2e-10);
        }
        assert_relative_eq!(
            result.values[2].evaluate(50f64.ln()),
            85.978611259234857,
            max_relative = 1e-9
        );
    }

    #[test]
    fn first_stage_agrees_with_the_closed_form() {
        let single = solve_single(&worked_model(), &contract(1)).unwrap();
        let result = solve_all(
            &worked_model(),
            &contract(1),
            &RefractionSpec::new(1, 1.0).unwrap(),
        )
        .unwrap();
        assert_relative_eq!(result.thresholds[0], single.x_star, max_relative = 1e-14);
        let lo = 50f64.ln() - 2.0;
        let hi = single.x_star + 2.0;
        for i in 0..=50 {
            let x = lo + (hi - lo) * i as f64 / 50.0;
            assert_relative_eq!(
                result.values[0].evaluate(x),
                single.value.evaluate(x),
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn five_exercises_match_frozen_threshold_rows() {
        // Mean refraction time 1, exponential and Erlang-2 variants.
        let cases = [
            (
                RefractionSpec::from_mean(1, 1.0).unwrap(),
                [
                    5.03712360475241,
                    4.92414116748692,
                    4.83550113501245,
                    4.76189989425691,
                    4.6992631899826,
                ],
            ),
            (
                RefractionSpec::from_mean(2, 1.0).unwrap(),
                [
                    5.03712360475241,
                    4.91507941032555,
                    4.81932475690798,
                    4.74038740918738,
                    4.67380019456463,
                ],
            ),
            (
                RefractionSpec::from_mean(1, 0.5).unwrap(),
                [
                    5.03712360475241,
                    4.95922038156945,
                    4.89515319242124,
                    4.83946528916242,
                    4.78990803026406,
                ],
            ),
        ];
        for (spec, expect) in cases {
            let result = solve_all(&worked_model(), &contract(5), &spec).unwrap();
            for (got, want) in result.thresholds.iter().zip(expect.iter()) {
                assert_abs_diff_eq!(got, want, epsilon = 1e-9);
            }
            // Strictly decreasing thresholds.
            for w in result.thresholds.windows(2) {
                assert!(w[1] < w[0]);
            }
            // The Erlang-2 five-stage run is the degree stress case: the
            // repeated kernel rates pile up to exactly the degree cap.
            assert!(result.values.iter().all(|v| v.degree() <= 8));
        }
    }

    #[test]
    fn values_are_ordered_and_dominate_their_payoffs() {
        let result = solve_all(
            &worked_model(),
            &contract(3),
            &RefractionSpec::new(1, 1.0).unwrap(),
        )
        .unwrap();
        let lo = 50f64.ln() - 2.0;
        let hi = result.thresholds[0] + 2.0;
        for i in 0..=120 {
            let x = lo + (hi - lo) * i as f64 / 120.0;
            let v1 = result.values[0].evaluate(x);
            let v2 = result.values[1].evaluate(x);
            let v3 = result.values[2].evaluate(x);
            // More rights are worth more, but subadditively.
            assert!(v2 >= v1 - 1e-9);
            assert!(v3 >= v2 - 1e-9);
            assert!(v2 <= 2.0 * v1 + 1e-9);
            assert!(v3 <= 3.0 * v1 + 1e-9);
            // Each value dominates its own exercise payoff.
            for (v, phi) in [
                (v1, &result.phi_functions[0]),
                (v2, &result.phi_functions[1]),
                (v3, &result.phi_functions[2]),
            ] {
                assert!(v >= phi.evaluate(x) - 1e-8);
            }
        }
    }

    #[test]
    fn bracket_failure_is_reported_for_impossible_stages() {
        // A first-order-condition function that is negative on the whole
        // bracket trips the bisection's guard.
        let solver = MultiSolver::new(
            &worked_model(),
            &contract(2),
            &RefractionSpec::new(1, 1.0).unwrap(),
        )
        .unwrap();
        let negative = ExpPoly::constant(-1.0);
        assert!(matches!(
            solver.solve_threshold(&negative),
            Err(Error::BracketFailure { .. })
        ));
    }
}
