//! The ascending Wiener–Hopf factor and everything it prices.
//!
//! For a hyper-exponential jump diffusion killed at rate α, the running
//! supremum `S_{e(α)}` has a rational Laplace transform
//!
//! ```text
//! ψ_α⁺(β) = E[e^{−β S_{e(α)}}] = ∏_i ρ_i/(ρ_i + β) · ∏_j (η_j + β)/η_j,
//! ```
//!
//! where the ρ_i are the roots of ψ(β) = α at or beyond Φ(α) and the η_j are
//! the upward jump rates. Partial fractions of that transform produce, in
//! closed form, the first-passage functionals and overshoot laws the
//! stopping recursion consumes: everything here is a finite mixture of a
//! point mass at zero and (possibly signed) exponential densities.
//!
//! The module also exposes the α-resolvent density of the process itself,
//! which is the convolution kernel behind the refraction-period operator.

use crate::error::{Error, Result};
use crate::exppoly::ExpPoly;
use crate::model::LevyModel;
use crate::roots::{solve_roots, RootSet};

/// A measure on `[0, ∞)` of the form `atom0 · δ_0 + Σ coef_j e^{−decay_j y} dy`.
///
/// Coefficients may be negative: several of the supremum measures are signed,
/// and only distinguished combinations of them are probability laws.
#[derive(Debug, Clone)]
pub struct ExpMixtureMeasure {
    atom0: f64,
    terms: Vec<(f64, f64)>, // (coefficient, decay), decay > 0
}

impl ExpMixtureMeasure {
    /// Build a measure, validating decays.
    pub fn new(atom0: f64, terms: Vec<(f64, f64)>) -> Result<ExpMixtureMeasure> {
        if !atom0.is_finite() {
            return Err(Error::Unsupported("non-finite atom".into()));
        }
        for &(c, d) in &terms {
            if !c.is_finite() || !d.is_finite() || d <= 0.0 {
                return Err(Error::Unsupported(format!(
                    "exponential mixture term ({c}, {d}) must be finite with positive decay"
                )));
            }
        }
        Ok(ExpMixtureMeasure { atom0, terms })
    }

    /// Mass of the atom at 0.
    pub fn atom0(&self) -> f64 {
        self.atom0
    }

    /// Density terms `(coefficient, decay)`.
    pub fn terms(&self) -> &[(f64, f64)] {
        &self.terms
    }

    /// Density of the absolutely continuous part at `y > 0`.
    pub fn density(&self, y: f64) -> f64 {
        self.terms.iter().map(|&(c, d)| c * (-d * y).exp()).sum()
    }

    /// Total mass `atom0 + Σ coef/decay`.
    pub fn total_mass(&self) -> f64 {
        self.atom0 + self.terms.iter().map(|&(c, d)| c / d).sum::<f64>()
    }

    /// Laplace transform `∫ e^{−βy} m(dy)` for `β > −min decay`.
    pub fn transform(&self, beta: f64) -> f64 {
        self.atom0
            + self
                .terms
                .iter()
                .map(|&(c, d)| c / (d + beta))
                .sum::<f64>()
    }
}

/// `∫_{[0,∞)} f(from + y) m(dy)`.
///
/// # Errors
///
/// [`Error::DivergentConvolution`] when `f` grows at or beyond one of the
/// measure's decay rates.
pub fn integrate_measure(f: &ExpPoly, m: &ExpMixtureMeasure, from: f64) -> Result<f64> {
    let mut total = m.atom0 * f.evaluate(from);
    for &(c, d) in &m.terms {
        total += c * f.integrate_exp_right(from, d)?;
    }
    Ok(total)
}

/// The ascending Wiener–Hopf factor of a model at level α, with the
/// partial-fraction data and supremum measures derived from it.
#[derive(Debug, Clone)]
pub struct WienerHopfFactor {
    alpha: f64,
    roots: RootSet,
    a: Vec<f64>,
    psi_plus_inf: f64,
    phi_inf: Option<f64>,
    nu: ExpMixtureMeasure,
    nu_bar: Vec<ExpMixtureMeasure>,
}

impl WienerHopfFactor {
    /// The level the factor was built at (usually the discount rate).
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// The full root set behind the factor.
    pub fn roots(&self) -> &RootSet {
        &self.roots
    }

    /// The rates ρ_i of the supremum transform, ascending (ρ_1 = Φ(α)).
    pub fn rho(&self) -> &[f64] {
        self.roots.i_alpha()
    }

    /// The upward pole set η_j, ascending.
    pub fn eta(&self) -> &[f64] {
        self.roots.j_set()
    }

    /// Partial-fraction coefficients A_i, aligned with [`Self::rho`]. They
    /// sum to one.
    pub fn a(&self) -> &[f64] {
        &self.a
    }

    /// `lim_{β→∞} ψ_α⁺(β)`: zero when the supremum has a diffuse or drifting
    /// component, positive when it moves by jumps alone.
    pub fn psi_plus_inf(&self) -> f64 {
        self.psi_plus_inf
    }

    /// `φ_∞ = ∏ρ/∏η` when finite, [`None`] when the product diverges
    /// (equal root and pole counts).
    pub fn phi_inf(&self) -> Option<f64> {
        self.phi_inf
    }

    /// The measure ν: the non-polynomial part of the expansion of
    /// `1/ψ_α⁺(β)`, a point mass plus one exponential per upward rate.
    pub fn nu(&self) -> &ExpMixtureMeasure {
        &self.nu
    }

    /// The measures ν̄_i with transforms `ρ_i / ((ρ_i + β) ψ_α⁺(β))`,
    /// aligned with [`Self::rho`].
    pub fn nu_bar(&self) -> &[ExpMixtureMeasure] {
        &self.nu_bar
    }

    /// Evaluate `ψ_α⁺(β)`; requires `β > −ρ_1`.
    ///
    /// # Errors
    ///
    /// [`Error::OutOfStrip`] at or beyond the first transform pole.
    pub fn psi_plus(&self, beta: f64) -> Result<f64> {
        let rho1 = self.rho()[0];
        if beta <= -rho1 {
            return Err(Error::OutOfStrip { beta, limit: -rho1 });
        }
        let mut v = 1.0;
        for &r in self.rho() {
            v *= r / (r + beta);
        }
        for &e in self.eta() {
            v *= (e + beta) / e;
        }
        Ok(v)
    }

    /// Derivative of ψ_α⁺ at `β = −η_j` (where the factor itself vanishes),
    /// in closed form.
    fn psi_plus_deriv_at_minus_eta(&self, j: usize) -> f64 {
        let eta_j = self.eta()[j];
        let mut v = 1.0 / eta_j;
        for &r in self.rho() {
            v *= r / (r - eta_j);
        }
        for (l, &e) in self.eta().iter().enumerate() {
            if l != j {
                v *= (e - eta_j) / e;
            }
        }
        v
    }
}

/// Build the ascending factor of `model` at level `alpha`.
///
/// # Errors
///
/// Propagates the root solver's failures ([`Error::DegenerateRoots`],
/// [`Error::NoRootInStrip`]).
pub fn build_factor(model: &LevyModel, alpha: f64) -> Result<WienerHopfFactor> {
    let roots = solve_roots(model, alpha)?;
    let rho: Vec<f64> = roots.i_alpha().to_vec();
    let eta: Vec<f64> = roots.j_set().to_vec();

    let a: Vec<f64> = (0..rho.len())
        .map(|i| {
            let mut v = 1.0;
            for (l, &r) in rho.iter().enumerate() {
                if l != i {
                    v *= r / (r - rho[i]);
                }
            }
            for &e in &eta {
                v *= (e - rho[i]) / e;
            }
            v
        })
        .collect();

    let ratio = rho.iter().product::<f64>() / eta.iter().product::<f64>();
    let (phi_inf, psi_plus_inf) = if rho.len() == eta.len() + 1 {
        (Some(ratio), 0.0)
    } else {
        (None, ratio)
    };

    let mut factor = WienerHopfFactor {
        alpha,
        roots,
        a,
        psi_plus_inf,
        phi_inf,
        nu: ExpMixtureMeasure::new(0.0, vec![])?,
        nu_bar: vec![],
    };

    // ν: the measure part of the expansion of 1/ψ_α⁺(β). The constant term
    // is (Σρ − Ση)/φ_∞ when 1/ψ_α⁺ grows linearly, and 1/ψ_α⁺(∞) when it
    // tends to a constant; each pole −η_j contributes its residue as an
    // exponential density.
    let nu_atom = match phi_inf {
        Some(phi) => {
            (rho.iter().sum::<f64>() - eta.iter().sum::<f64>()) / phi
        }
        None => 1.0 / psi_plus_inf,
    };
    let nu_terms: Vec<(f64, f64)> = (0..eta.len())
        .map(|j| (1.0 / factor.psi_plus_deriv_at_minus_eta(j), eta[j]))
        .collect();
    factor.nu = ExpMixtureMeasure::new(nu_atom, nu_terms)?;

    // ν̄_i: transform ρ_i/((ρ_i+β) ψ_α⁺(β)); the numerator cancels the
    // would-be pole at −ρ_i, leaving the η poles plus a constant ρ_i/φ_∞.
    factor.nu_bar = (0..rho.len())
        .map(|i| {
            let atom = match phi_inf {
                Some(phi) => rho[i] / phi,
                None => 0.0,
            };
            let terms: Vec<(f64, f64)> = (0..eta.len())
                .map(|j| {
                    let c = rho[i] / (rho[i] - eta[j])
                        / factor.psi_plus_deriv_at_minus_eta(j);
                    (c, eta[j])
                })
                .collect();
            ExpMixtureMeasure::new(atom, terms)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(factor)
}

/// `E_x[e^{−ατ_b − β(X_{τ_b} − b)}; τ_b < ∞]` for the first passage of `X`
/// above the level `b`. For `x ≥ b` the stopping is immediate and the value
/// is `e^{−β(x−b)}`.
///
/// # Errors
///
/// [`Error::OutOfStrip`] when `β ≤ −ρ_1`.
pub fn first_passage_transform(
    factor: &WienerHopfFactor,
    x: f64,
    b: f64,
    beta: f64,
) -> Result<f64> {
    if x >= b {
        return Ok((-beta * (x - b)).exp());
    }
    let psi_plus = factor.psi_plus(beta)?;
    let mut s = 0.0;
    for (i, &r) in factor.rho().iter().enumerate() {
        s += factor.a()[i] * r / (r + beta) * (-r * (b - x)).exp();
    }
    Ok(s / psi_plus)
}

/// The (defective, α-discounted) law of the overshoot `X_{τ_b} − b` when
/// first passage starts `gap = b − x ≥ 0` below the level: the mixture
/// `Σ_i A_i e^{−ρ_i·gap} ν̄_i`. Its total mass is `E_x[e^{−ατ_b}; τ_b < ∞]`
/// and its atom at zero is the creeping part.
pub fn overshoot_law(factor: &WienerHopfFactor, gap: f64) -> Result<ExpMixtureMeasure> {
    assert!(gap >= 0.0, "gap must be nonnegative");
    let mut atom = 0.0;
    let mut coefs = vec![0.0; factor.eta().len()];
    for (i, &r) in factor.rho().iter().enumerate() {
        let w = factor.a()[i] * (-r * gap).exp();
        atom += w * factor.nu_bar()[i].atom0();
        for (j, &(c, _)) in factor.nu_bar()[i].terms().iter().enumerate() {
            coefs[j] += w * c;
        }
    }
    let terms = coefs
        .into_iter()
        .zip(factor.eta().iter())
        .map(|(c, &e)| (c, e))
        .collect();
    ExpMixtureMeasure::new(atom, terms)
}

/// The α-resolvent density of the process: the two-sided exponential
/// mixture `r_p` with bilateral transform `∫ e^{βy} r_p(y) dy = p/(p − ψ(β))`,
/// normalized to total mass one. Returned as an [`ExpPoly`] kernel ready for
/// [`ExpPoly::convolve_density`].
///
/// # Errors
///
/// Root-solver failures, plus [`Error::AssumptionViolated`] when `Φ(p) ≤ 1`
/// (the kernel could not smooth functions of linear-in-price growth, which
/// every payoff here has).
pub fn resolvent_density(model: &LevyModel, p: f64) -> Result<ExpPoly> {
    if p <= 0.0 {
        return Err(Error::Unsupported(format!(
            "resolvent level must be positive, got {p}"
        )));
    }
    let roots = solve_roots(model, p)?;
    if roots.phi() <= 1.0 {
        return Err(Error::AssumptionViolated {
            check: "resolvent-strip",
            detail: format!(
                "Phi(p) = {} must exceed 1 so the refraction kernel dominates the payoff growth",
                roots.phi()
            ),
        });
    }
    let mut left = Vec::new(); // y < 0: coef · e^{−ζ·y}, ζ < 0 the root
    let mut right = Vec::new(); // y ≥ 0: coef · e^{−ρ·y}, ρ > 0 the root
    for &r in roots.all_roots() {
        let c = model.psi_deriv(r);
        if r > 0.0 {
            right.push((-r, p / c));
        } else if r < 0.0 {
            left.push((-r, -p / c));
        } else {
            return Err(Error::DegenerateRoots {
                q: p,
                detail: "resolvent root at zero".into(),
            });
        }
    }
    ExpPoly::from_term_lists(
        vec![0.0],
        vec![
            left.into_iter().map(|(r, c)| (r, vec![c])).collect(),
            right.into_iter().map(|(r, c)| (r, vec![c])).collect(),
        ],
    )
}

/// The cumulative distribution function of the displacement observed at an
/// independent Exp(p) time (the probability law whose density is
/// [`resolvent_density`], but without that function's strip requirement).
///
/// # Errors
///
/// Root-solver failures.
pub fn resolvent_cdf(model: &LevyModel, p: f64) -> Result<impl Fn(f64) -> f64> {
    if p <= 0.0 {
        return Err(Error::Unsupported(format!(
            "resolvent level must be positive, got {p}"
        )));
    }
    let roots = solve_roots(model, p)?;
    let mut left = Vec::new(); // (root ζ < 0, mass p/(ζ ψ'(ζ)) > 0)
    let mut right = Vec::new();
    for &r in roots.all_roots() {
        let w = p / (r * model.psi_deriv(r));
        if r < 0.0 {
            left.push((r, w));
        } else {
            right.push((r, w));
        }
    }
    let left_mass: f64 = left.iter().map(|&(_, w)| w).sum();
    Ok(move |y: f64| {
        if y < 0.0 {
            left.iter().map(|&(z, w)| w * (-z * y).exp()).sum()
        } else {
            left_mass
                + right
                    .iter()
                    .map(|&(r, w)| w * (1.0 - (-r * y).exp()))
                    .sum::<f64>()
        }
    })
}
