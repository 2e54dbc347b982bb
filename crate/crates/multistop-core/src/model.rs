//! The driving process: a jump diffusion with hyper-exponential two-sided
//! jumps, together with the contract and refraction-period descriptions.
//!
//! The log-price X is a Lévy process
//!
//! ```text
//! X_t = c·t + σ·W_t + Σ up jumps − Σ down jumps,
//! ```
//!
//! where both jump streams are compound Poisson and the magnitudes follow
//! finite mixtures of exponentials (hyper-exponential laws). This family is
//! closed under all the transform work the solver does: the Laplace exponent
//!
//! ```text
//! ψ(β) = log E[e^{βX₁}]
//!      = c̃β + ½σ²β² + λ₋(Σᵢ wᵢμᵢ/(μᵢ+β) − 1) + λ₊(Σⱼ pⱼϑⱼ/(ϑⱼ−β) − 1)
//! ```
//!
//! is rational, so first-passage and resolvent quantities reduce to root
//! finding and partial fractions (cf. Kou (2002) for the double-exponential
//! special case and Kyprianou (2014) for the general fluctuation theory).
//!
//! Everything here is immutable after construction and freely shareable
//! across threads.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative tolerance below which an evaluation point is considered to sit
/// on a pole of ψ.
const POLE_TOL: f64 = 1e-12;

/// Relative separation required between rates within one jump mixture.
const RATE_SEP_TOL: f64 = 1e-9;

/// One phase of a hyper-exponential mixture: with probability `weight` the
/// jump magnitude is exponential with the given `rate` (mean `1/rate`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixturePhase {
    pub weight: f64,
    pub rate: f64,
}

impl MixturePhase {
    pub fn new(weight: f64, rate: f64) -> Self {
        Self { weight, rate }
    }
}

/// Jump diffusion with hyper-exponential upward and downward jumps.
///
/// Immutable; construct through [`LevyModel::new`], which enforces the
/// structural invariants (mixture weights summing to one, distinct rates,
/// some source of randomness, and some source of upward motion).
#[derive(Debug, Clone, PartialEq)]
pub struct LevyModel {
    drift: f64,
    sigma: f64,
    down_rate: f64,
    down_mix: Vec<MixturePhase>,
    up_rate: f64,
    up_mix: Vec<MixturePhase>,
}

fn validate_mixture(label: &str, rate: f64, mix: &[MixturePhase]) -> Result<()> {
    if !rate.is_finite() || rate < 0.0 {
        return Err(Error::InvalidModel(format!(
            "{label} jump rate must be finite and non-negative, got {rate}"
        )));
    }
    if (rate > 0.0) != !mix.is_empty() {
        return Err(Error::InvalidModel(format!(
            "{label} jump rate {rate} and mixture size {} are inconsistent \
             (positive rate requires a non-empty mixture and vice versa)",
            mix.len()
        )));
    }
    if mix.is_empty() {
        return Ok(());
    }
    let mut weight_sum = 0.0;
    for (i, phase) in mix.iter().enumerate() {
        if !(phase.weight.is_finite() && phase.weight > 0.0) {
            return Err(Error::InvalidModel(format!(
                "{label} mixture phase {i}: weight must be positive, got {}",
                phase.weight
            )));
        }
        if !(phase.rate.is_finite() && phase.rate > 0.0) {
            return Err(Error::InvalidModel(format!(
                "{label} mixture phase {i}: rate must be positive, got {}",
                phase.rate
            )));
        }
        weight_sum += phase.weight;
    }
    if (weight_sum - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidModel(format!(
            "{label} mixture weights sum to {weight_sum}, expected 1 (within 1e-12)"
        )));
    }
    for i in 0..mix.len() {
        for j in (i + 1)..mix.len() {
            let (a, b) = (mix[i].rate, mix[j].rate);
            if (a - b).abs() <= RATE_SEP_TOL * a.max(b) {
                return Err(Error::InvalidModel(format!(
                    "{label} mixture rates {a} and {b} are not distinct; \
                     merge their weights into a single phase instead"
                )));
            }
        }
    }
    Ok(())
}

impl LevyModel {
    /// Build and validate a model.
    ///
    /// # Errors
    ///
    /// [`Error::InvalidModel`] when a structural invariant fails: negative
    /// volatility or rates, mixture weights not summing to one, duplicate
    /// rates within a mixture, a model with no randomness at all
    /// (`sigma == 0 && drift == 0`, which would give the refraction
    /// displacement an atom), or a model with no source of upward motion
    /// (`sigma == 0 && drift <= 0` and no upward jumps), whose supremum
    /// never rises.
    pub fn new(
        drift: f64,
        sigma: f64,
        down_rate: f64,
        down_mix: Vec<MixturePhase>,
        up_rate: f64,
        up_mix: Vec<MixturePhase>,
    ) -> Result<Self> {
        if !drift.is_finite() {
            return Err(Error::InvalidModel(format!("drift must be finite, got {drift}")));
        }
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidModel(format!(
                "sigma must be finite and non-negative, got {sigma}"
            )));
        }
        validate_mixture("downward", down_rate, &down_mix)?;
        validate_mixture("upward", up_rate, &up_mix)?;
        if sigma == 0.0 && drift == 0.0 {
            return Err(Error::InvalidModel(
                "need sigma > 0 or drift != 0 so that the displacement over a \
                 refraction period has a continuous distribution"
                    .into(),
            ));
        }
        if sigma == 0.0 && drift <= 0.0 && up_rate == 0.0 {
            return Err(Error::InvalidModel(
                "the process has no upward motion (sigma = 0, drift <= 0, no upward \
                 jumps); its negative is a subordinator and no exercise level is ever reached"
                    .into(),
            ));
        }
        Ok(Self {
            drift,
            sigma,
            down_rate,
            down_mix,
            up_rate,
            up_mix,
        })
    }

    /// Convenience constructor for a spectrally negative model (no upward
    /// jumps).
    pub fn spectrally_negative(
        drift: f64,
        sigma: f64,
        down_rate: f64,
        down_mix: Vec<MixturePhase>,
    ) -> Result<Self> {
        Self::new(drift, sigma, down_rate, down_mix, 0.0, Vec::new())
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn down_rate(&self) -> f64 {
        self.down_rate
    }

    pub fn down_mix(&self) -> &[MixturePhase] {
        &self.down_mix
    }

    pub fn up_rate(&self) -> f64 {
        self.up_rate
    }

    pub fn up_mix(&self) -> &[MixturePhase] {
        &self.up_mix
    }

    /// Upper boundary β₀ of the strip on which ψ is finite: the smallest
    /// upward-jump rate, or +∞ for spectrally negative models.
    pub fn beta0(&self) -> f64 {
        self.up_mix
            .iter()
            .map(|p| p.rate)
            .fold(f64::INFINITY, f64::min)
    }

    /// True when the model has no upward jumps.
    pub fn is_spectrally_negative(&self) -> bool {
        self.up_rate == 0.0
    }

    /// True when the running supremum increases only by jumps (no Brownian
    /// part and non-positive drift). In this case the ascending ladder height
    /// has an atom at zero and the Wiener–Hopf factor does not vanish at ∞.
    pub fn supremum_is_pure_jump(&self) -> bool {
        self.sigma == 0.0 && self.drift <= 0.0
    }

    /// Degree of the polynomial obtained by clearing the denominators of
    /// ψ(β) − q, which equals the number of roots of ψ(β) = q counted with
    /// multiplicity over ℂ.
    pub fn poly_degree(&self) -> usize {
        let base = if self.sigma > 0.0 {
            2
        } else if self.drift != 0.0 {
            1
        } else {
            0
        };
        base + self.down_mix.len() + self.up_mix.len()
    }

    /// E[X₁] = ψ′(0).
    pub fn mean(&self) -> f64 {
        self.psi_deriv(0.0)
    }

    /// All poles of ψ on the real axis, ascending: the −μᵢ then the ϑⱼ.
    pub fn poles(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self
            .down_mix
            .iter()
            .map(|ph| -ph.rate)
            .chain(self.up_mix.iter().map(|ph| ph.rate))
            .collect();
        p.sort_by(|a, b| a.partial_cmp(b).unwrap());
        p
    }

    fn nearest_pole(&self, beta: f64) -> Option<f64> {
        self.poles()
            .into_iter()
            .min_by(|a, b| (a - beta).abs().partial_cmp(&(b - beta).abs()).unwrap())
    }

    /// ψ(β), unchecked: the caller must keep β off the poles. Near a pole the
    /// value is large but finite; exactly on a pole it is ±∞ or NaN.
    pub(crate) fn psi(&self, beta: f64) -> f64 {
        let mut v = self.drift * beta + 0.5 * self.sigma * self.sigma * beta * beta;
        if self.down_rate > 0.0 {
            let mut s = 0.0;
            for ph in &self.down_mix {
                s += ph.weight * ph.rate / (ph.rate + beta);
            }
            v += self.down_rate * (s - 1.0);
        }
        if self.up_rate > 0.0 {
            let mut s = 0.0;
            for ph in &self.up_mix {
                s += ph.weight * ph.rate / (ph.rate - beta);
            }
            v += self.up_rate * (s - 1.0);
        }
        v
    }

    /// ψ′(β), unchecked.
    pub(crate) fn psi_deriv(&self, beta: f64) -> f64 {
        let mut v = self.drift + self.sigma * self.sigma * beta;
        for ph in &self.down_mix {
            let d = ph.rate + beta;
            v -= self.down_rate * ph.weight * ph.rate / (d * d);
        }
        for ph in &self.up_mix {
            let d = ph.rate - beta;
            v += self.up_rate * ph.weight * ph.rate / (d * d);
        }
        v
    }

    /// ψ″(β), unchecked. Positive wherever all denominators are positive,
    /// which is what makes ψ strictly convex between its innermost poles.
    pub(crate) fn psi_second(&self, beta: f64) -> f64 {
        let mut v = self.sigma * self.sigma;
        for ph in &self.down_mix {
            let d = ph.rate + beta;
            v += 2.0 * self.down_rate * ph.weight * ph.rate / (d * d * d);
        }
        for ph in &self.up_mix {
            let d = ph.rate - beta;
            v += 2.0 * self.up_rate * ph.weight * ph.rate / (d * d * d);
        }
        v
    }

    fn check_pole_distance(&self, beta: f64) -> Result<()> {
        if let Some(pole) = self.nearest_pole(beta) {
            if (beta - pole).abs() < POLE_TOL * pole.abs().max(1.0) {
                return Err(Error::PoleProximity {
                    beta,
                    pole,
                    tol: POLE_TOL,
                });
            }
        }
        Ok(())
    }

    /// The Laplace exponent ψ(β) = log E[e^{βX₁}].
    ///
    /// # Errors
    ///
    /// [`Error::PoleProximity`] when β is within 1e−12 (relative) of a pole.
    pub fn laplace_exponent(&self, beta: f64) -> Result<f64> {
        self.check_pole_distance(beta)?;
        Ok(self.psi(beta))
    }

    /// Analytic derivative ψ′(β).
    ///
    /// # Errors
    ///
    /// [`Error::PoleProximity`] as for [`LevyModel::laplace_exponent`].
    pub fn laplace_exponent_derivative(&self, beta: f64) -> Result<f64> {
        self.check_pole_distance(beta)?;
        Ok(self.psi_deriv(beta))
    }

    /// Analytic second derivative ψ″(β); strictly positive between the
    /// innermost poles, which is the convexity the root solver relies on.
    ///
    /// # Errors
    ///
    /// [`Error::PoleProximity`] as for [`LevyModel::laplace_exponent`].
    pub fn laplace_exponent_second_derivative(&self, beta: f64) -> Result<f64> {
        self.check_pole_distance(beta)?;
        Ok(self.psi_second(beta))
    }

    /// ψ extended to complex arguments (used by cross-checks against
    /// polynomial root finders; the solver itself works on the real axis).
    pub fn laplace_exponent_complex(&self, beta: Complex64) -> Result<Complex64> {
        if let Some(pole) = self.nearest_pole(beta.re) {
            if (beta - pole).norm() < POLE_TOL * pole.abs().max(1.0) {
                return Err(Error::PoleProximity {
                    beta: beta.re,
                    pole,
                    tol: POLE_TOL,
                });
            }
        }
        let mut v = self.drift * beta + 0.5 * self.sigma * self.sigma * beta * beta;
        for ph in &self.down_mix {
            v += self.down_rate * ph.weight * ph.rate / (ph.rate + beta);
        }
        if self.down_rate > 0.0 {
            v -= self.down_rate;
        }
        for ph in &self.up_mix {
            v += self.up_rate * ph.weight * ph.rate / (ph.rate - beta);
        }
        if self.up_rate > 0.0 {
            v -= self.up_rate;
        }
        Ok(v)
    }
}

/// The perpetual multiple-exercise call contract.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contract {
    strike: f64,
    alpha: f64,
    n_exercises: usize,
}

impl Contract {
    /// # Errors
    ///
    /// [`Error::InvalidContract`] unless `strike > 0` and `n_exercises >= 1`.
    /// `alpha` may be negative (the stock-loan regime) as long as the model
    /// assumptions checked by [`validate`] hold.
    pub fn new(strike: f64, alpha: f64, n_exercises: usize) -> Result<Self> {
        if !(strike.is_finite() && strike > 0.0) {
            return Err(Error::InvalidContract(format!(
                "strike must be positive, got {strike}"
            )));
        }
        if !alpha.is_finite() {
            return Err(Error::InvalidContract(format!("alpha must be finite, got {alpha}")));
        }
        if n_exercises < 1 {
            return Err(Error::InvalidContract(
                "need at least one exercise right".into(),
            ));
        }
        Ok(Self {
            strike,
            alpha,
            n_exercises,
        })
    }

    pub fn strike(&self) -> f64 {
        self.strike
    }

    pub fn log_strike(&self) -> f64 {
        self.strike.ln()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n_exercises(&self) -> usize {
        self.n_exercises
    }
}

/// Maximum Erlang shape; tied to the polynomial-degree cap of the
/// exponential-polynomial algebra (see [`crate::exppoly::DEGREE_CAP`]).
pub const MAX_ERLANG_SHAPE: u32 = 8;

/// Erlang(shape, rate) refraction period: the mandatory random wait between
/// successive exercises, with mean δ̄ = shape / rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefractionSpec {
    shape: u32,
    rate: f64,
}

impl RefractionSpec {
    /// # Errors
    ///
    /// [`Error::InvalidRefraction`] unless `1 <= shape <= 8` and `rate > 0`.
    pub fn new(shape: u32, rate: f64) -> Result<Self> {
        if !(1..=MAX_ERLANG_SHAPE).contains(&shape) {
            return Err(Error::InvalidRefraction(format!(
                "Erlang shape must be in 1..={MAX_ERLANG_SHAPE}, got {shape}"
            )));
        }
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidRefraction(format!(
                "Erlang rate must be positive, got {rate}"
            )));
        }
        Ok(Self { shape, rate })
    }

    /// Build from the mean waiting time δ̄ instead of the rate (q = shape/δ̄).
    pub fn from_mean(shape: u32, mean: f64) -> Result<Self> {
        if !(mean.is_finite() && mean > 0.0) {
            return Err(Error::InvalidRefraction(format!(
                "mean refraction time must be positive, got {mean}"
            )));
        }
        Self::new(shape, f64::from(shape) / mean)
    }

    pub fn shape(&self) -> u32 {
        self.shape
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn mean(&self) -> f64 {
        f64::from(self.shape) / self.rate
    }
}

/// Outcome of one named validation check.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Result of [`validate`]: per-check outcomes plus the quantities they were
/// judged on. Construction never fails; inspect [`ValidationReport::all_passed`]
/// or promote failures to an error with [`ValidationReport::ensure`].
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub psi_one: f64,
    pub psi_prime_one: f64,
    pub beta0: f64,
    pub q_plus_alpha: f64,
    /// E[e^{−αδ + X_δ}] = (q/(q+α−ψ(1)))^m, or +∞ when the base is not positive.
    pub erlang_growth_factor: f64,
    pub checks: Vec<CheckOutcome>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Turn the first failed check into [`Error::AssumptionViolated`].
    pub fn ensure(self) -> Result<Self> {
        if let Some(fail) = self.checks.iter().find(|c| !c.passed) {
            return Err(Error::AssumptionViolated {
                check: fail.name,
                detail: fail.detail.clone(),
            });
        }
        Ok(self)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {:<16} {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            )?;
        }
        Ok(())
    }
}

/// Check the standing assumptions under which the solver's formulas are
/// valid:
///
/// (a) ψ(1) < α, or ψ(1) = α < 0 with ψ′(1) < 0 — the discounted payoff
///     process must not grow;
/// (b) β₀ > 1 — E[e^{X₁}] must be finite;
/// (c) the supremum must actually rise (guaranteed by model construction,
///     reported for completeness);
/// (d) q + α > 0 — the discounted refraction factor E[e^{−αδ}] must be finite;
/// (e) E[e^{−αδ + X_δ}] ≤ 1 — implied by (a) and (d), reported with its value.
pub fn validate(
    model: &LevyModel,
    contract: &Contract,
    refraction: &RefractionSpec,
) -> ValidationReport {
    let alpha = contract.alpha();
    let q = refraction.rate();
    let m = refraction.shape();
    let beta0 = model.beta0();

    // ψ(1) needs β₀ > 1 to be finite; evaluate defensively so a bad model
    // still produces a readable report.
    let (psi_one, psi_prime_one) = if beta0 > 1.0 {
        (model.psi(1.0), model.psi_deriv(1.0))
    } else {
        (f64::INFINITY, f64::INFINITY)
    };

    let eq_tol = 1e-14 * (1.0 + alpha.abs());
    let discount_ok = psi_one < alpha - eq_tol
        || ((psi_one - alpha).abs() <= eq_tol && alpha < 0.0 && psi_prime_one < 0.0);

    let q_plus_alpha = q + alpha;
    let growth_base = q_plus_alpha - psi_one;
    let erlang_growth_factor = if growth_base > 0.0 {
        (q / growth_base).powi(m as i32)
    } else {
        f64::INFINITY
    };

    let checks = vec![
        CheckOutcome {
            name: "discount",
            passed: discount_ok,
            detail: format!("psi(1) = {psi_one:.6e}, alpha = {alpha:.6e}, psi'(1) = {psi_prime_one:.6e}"),
        },
        CheckOutcome {
            name: "beta0",
            passed: beta0 > 1.0,
            detail: format!("beta0 = {beta0}"),
        },
        CheckOutcome {
            name: "upward-motion",
            passed: model.sigma() > 0.0 || model.drift() > 0.0 || model.up_rate() > 0.0,
            detail: format!(
                "sigma = {}, drift = {}, up rate = {}",
                model.sigma(),
                model.drift(),
                model.up_rate()
            ),
        },
        CheckOutcome {
            name: "refraction-rate",
            passed: q_plus_alpha > 0.0,
            detail: format!("q + alpha = {q_plus_alpha:.6e}"),
        },
        CheckOutcome {
            name: "erlang-growth",
            passed: erlang_growth_factor <= 1.0 + 1e-12,
            detail: format!("E[exp(-alpha*delta + X_delta)] = {erlang_growth_factor:.6e}"),
        },
    ];

    ValidationReport {
        psi_one,
        psi_prime_one,
        beta0,
        q_plus_alpha,
        erlang_growth_factor,
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    /// The worked single-sided model used throughout the test suite:
    /// c̃ = 0.36, σ = 0.2, downward jumps at rate 1 with Exp(1) magnitudes.
    pub(crate) fn worked_model() -> LevyModel {
        LevyModel::spectrally_negative(0.36, 0.2, 1.0, vec![MixturePhase::new(1.0, 1.0)]).unwrap()
    }

    #[test]
    fn laplace_exponent_matches_hand_values() {
        let m = worked_model();
        // ψ(1) = 0.36 + 0.02 + (1/2 − 1) = −0.12, so α − ψ(1) = 0.1 for α = −0.02.
        assert_abs_diff_eq!(m.laplace_exponent(1.0).unwrap(), -0.12, epsilon = 1e-12);
        assert_abs_diff_eq!(-0.02 - m.laplace_exponent(1.0).unwrap(), 0.1, epsilon = 1e-12);
        // ψ(0) = 0 exactly.
        assert_eq!(m.laplace_exponent(0.0).unwrap(), 0.0);
        // ψ′(0) = E[X₁] = 0.36 − 1 = −0.64.
        assert_abs_diff_eq!(m.laplace_exponent_derivative(0.0).unwrap(), -0.64, epsilon = 1e-12);
        // ψ′(1) = 0.36 + 0.04 − 1/4 = 0.15.
        assert_abs_diff_eq!(m.laplace_exponent_derivative(1.0).unwrap(), 0.15, epsilon = 1e-12);
    }

    #[test]
    fn pure_brownian_exponent_is_quadratic() {
        // σ = √2 gives ψ(β) = β².
        let m = LevyModel::new(0.0, std::f64::consts::SQRT_2, 0.0, vec![], 0.0, vec![]).unwrap();
        assert_relative_eq!(m.laplace_exponent(2.0).unwrap(), 4.0, max_relative = 1e-14);
        assert_relative_eq!(
            m.laplace_exponent_derivative(3.0).unwrap(),
            6.0,
            max_relative = 1e-14
        );
        assert_eq!(m.beta0(), f64::INFINITY);
        assert_eq!(m.poly_degree(), 2);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let m = worked_model();
        for &beta in &[-0.5, 0.0, 0.3, 1.0, 2.5] {
            let h = 1e-6;
            let fd = (m.psi(beta + h) - m.psi(beta - h)) / (2.0 * h);
            assert_relative_eq!(m.psi_deriv(beta), fd, max_relative = 1e-6);
            let fd2 = (m.psi_deriv(beta + h) - m.psi_deriv(beta - h)) / (2.0 * h);
            assert_relative_eq!(
                m.laplace_exponent_second_derivative(beta).unwrap(),
                fd2,
                max_relative = 1e-6
            );
        }
    }

    #[test]
    fn second_derivative_positive_between_inner_poles() {
        let m = worked_model();
        for &beta in &[-0.9, -0.5, 0.0, 1.0, 5.0] {
            assert!(m.psi_second(beta) > 0.0, "psi'' must be positive at {beta}");
        }
    }

    #[test]
    fn convexity_chord_test_on_inner_interval() {
        let m = worked_model();
        let (a, b) = (-0.8, 3.0);
        let mid = 0.5 * (a + b);
        assert!(m.psi(mid) <= 0.5 * (m.psi(a) + m.psi(b)) + 1e-14);
    }

    #[test]
    fn pole_proximity_is_rejected() {
        let m = worked_model();
        let err = m.laplace_exponent(-1.0 + 1e-15).unwrap_err();
        assert!(matches!(err, Error::PoleProximity { .. }));
        // Just outside the guard band evaluation succeeds.
        assert!(m.laplace_exponent(-1.0 + 1e-9).is_ok());
    }

    #[test]
    fn complex_exponent_agrees_with_real_on_the_axis() {
        let m = worked_model();
        let z = m.laplace_exponent_complex(Complex64::new(0.7, 0.0)).unwrap();
        assert_relative_eq!(z.re, m.psi(0.7), max_relative = 1e-14);
        assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-14);
        // A genuinely complex point evaluates finitely.
        let z = m.laplace_exponent_complex(Complex64::new(0.3, 1.5)).unwrap();
        assert!(z.re.is_finite() && z.im.is_finite());
    }

    #[test]
    fn constructor_rejects_bad_mixtures() {
        // Weights must sum to one.
        assert!(LevyModel::spectrally_negative(
            0.1,
            0.2,
            1.0,
            vec![MixturePhase::new(0.6, 1.0), MixturePhase::new(0.5, 2.0)]
        )
        .is_err());
        // Rates must be distinct.
        assert!(LevyModel::spectrally_negative(
            0.1,
            0.2,
            1.0,
            vec![MixturePhase::new(0.5, 2.0), MixturePhase::new(0.5, 2.0)]
        )
        .is_err());
        // Positive rate with empty mixture is inconsistent.
        assert!(LevyModel::spectrally_negative(0.1, 0.2, 1.0, vec![]).is_err());
        // No randomness at all.
        assert!(LevyModel::new(0.0, 0.0, 1.0, vec![MixturePhase::new(1.0, 1.0)], 0.0, vec![]).is_err());
        // Negative of a subordinator: only downward motion.
        assert!(LevyModel::new(-0.5, 0.0, 1.0, vec![MixturePhase::new(1.0, 1.0)], 0.0, vec![]).is_err());
    }

    #[test]
    fn beta0_is_min_up_rate() {
        let m = LevyModel::new(
            0.36,
            0.2,
            1.0,
            vec![MixturePhase::new(1.0, 1.0)],
            0.1,
            vec![MixturePhase::new(0.4, 3.0), MixturePhase::new(0.6, 7.0)],
        )
        .unwrap();
        assert_eq!(m.beta0(), 3.0);
        assert_eq!(m.poly_degree(), 2 + 1 + 2);
    }

    #[test]
    fn validate_passes_the_worked_configuration() {
        let m = worked_model();
        let c = Contract::new(50.0, -0.02, 5).unwrap();
        let r = RefractionSpec::from_mean(1, 1.0).unwrap();
        let report = validate(&m, &c, &r);
        assert!(report.all_passed(), "report:\n{report}");
        assert_abs_diff_eq!(report.psi_one, -0.12, epsilon = 1e-12);
        // E[e^{−αδ+X_δ}] = (1/1.1)¹.
        assert_relative_eq!(report.erlang_growth_factor, 1.0 / 1.1, max_relative = 1e-12);
        assert!(report.ensure().is_ok());
    }

    #[test]
    fn validate_flags_discount_violation() {
        let m = worked_model();
        // α = −0.2 < ψ(1) = −0.12 violates the discount assumption.
        let c = Contract::new(50.0, -0.2, 1).unwrap();
        let r = RefractionSpec::new(1, 1.0).unwrap();
        let report = validate(&m, &c, &r);
        assert!(!report.all_passed());
        let fail = report.checks.iter().find(|c| !c.passed).unwrap();
        assert_eq!(fail.name, "discount");
        assert!(matches!(
            report.clone().ensure().unwrap_err(),
            Error::AssumptionViolated { check: "discount", .. }
        ));
    }

    #[test]
    fn validate_flags_small_refraction_rate() {
        let m = worked_model();
        let c = Contract::new(50.0, -0.02, 1).unwrap();
        let r = RefractionSpec::new(1, 0.01).unwrap();
        let report = validate(&m, &c, &r);
        let fail = report.checks.iter().find(|c| !c.passed).unwrap();
        assert_eq!(fail.name, "refraction-rate");
    }

    #[test]
    fn validate_flags_heavy_up_jumps() {
        // Up-jump rate 3 with Exp(0.8) magnitudes: β₀ = 0.8 ≤ 1.
        let m = LevyModel::new(
            0.1,
            0.2,
            0.0,
            vec![],
            3.0,
            vec![MixturePhase::new(1.0, 0.8)],
        )
        .unwrap();
        let c = Contract::new(50.0, -0.02, 1).unwrap();
        let r = RefractionSpec::new(1, 1.0).unwrap();
        let report = validate(&m, &c, &r);
        assert!(report.checks.iter().any(|c| c.name == "beta0" && !c.passed));
    }

    #[test]
    fn refraction_spec_round_trips_mean_and_rate() {
        let r = RefractionSpec::from_mean(2, 0.5).unwrap();
        assert_eq!(r.shape(), 2);
        assert_relative_eq!(r.rate(), 4.0, max_relative = 1e-15);
        assert_relative_eq!(r.mean(), 0.5, max_relative = 1e-15);
        assert!(RefractionSpec::new(0, 1.0).is_err());
        assert!(RefractionSpec::new(9, 1.0).is_err());
        assert!(RefractionSpec::new(1, 0.0).is_err());
    }
}
