//! Error taxonomy for the solver.
//!
//! Errors fall into two broad classes that front ends care about:
//! *validation* errors (the inputs describe a problem outside the method's
//! standing assumptions) and *numeric* errors (the inputs looked fine but a
//! computation could not be completed to tolerance). [`Error::kind`] exposes
//! the classification so callers can map errors onto exit codes without
//! matching every variant.

use thiserror::Error;

/// Coarse classification of an [`Error`], used by front ends for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// The inputs violate a constructor invariant or a standing assumption.
    Validation,
    /// A numeric procedure failed (lost bracket, degenerate roots, divergent
    /// integral, ...).
    Numeric,
}

/// All failure modes of the analytic machinery.
#[derive(Debug, Error)]
pub enum Error {
    /// Model parameters violate a [`LevyModel`](crate::LevyModel) invariant.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Contract parameters are out of range (strike, exercise count).
    #[error("invalid contract: {0}")]
    InvalidContract(String),

    /// Refraction parameters are out of range (shape, rate).
    #[error("invalid refraction: {0}")]
    InvalidRefraction(String),

    /// Simulation parameters are out of range (paths, step, horizon, workers).
    #[error("invalid simulation config: {0}")]
    InvalidSimulation(String),

    /// A standing assumption required by the solver does not hold.
    #[error("assumption violated ({check}): {detail}")]
    AssumptionViolated {
        /// Short name of the failed check, e.g. `"discount"` or `"beta0"`.
        check: &'static str,
        /// Human-readable diagnosis with the offending values.
        detail: String,
    },

    /// The Erlang rate is too small relative to the discount rate: q + α ≤ 0
    /// makes E[e^{−αδ}] diverge.
    #[error("refraction rate too small: q + alpha = {sum:.6e} must be positive")]
    RateTooSmall {
        /// The offending value of q + α.
        sum: f64,
    },

    /// The Laplace exponent was evaluated too close to one of its poles.
    #[error("beta = {beta:.12e} is within {tol:.1e} (relative) of the pole at {pole:.12e}")]
    PoleProximity { beta: f64, pole: f64, tol: f64 },

    /// Two roots of ψ(β) = q coalesced (or a conjugate pair left the real
    /// axis), so the partial-fraction machinery would be singular.
    #[error("degenerate roots at level q = {q:.12e}: {detail}")]
    DegenerateRoots { q: f64, detail: String },

    /// No root of ψ(β) = q was found in the required interval (0, β₀).
    #[error("no root of psi(beta) = {q:.12e} in (0, {beta0})")]
    NoRootInStrip { q: f64, beta0: f64 },

    /// The Wiener–Hopf factor was evaluated left of its analytic strip.
    #[error("beta = {beta:.12e} is outside the analytic strip (beta > {limit:.12e})")]
    OutOfStrip { beta: f64, limit: f64 },

    /// A candidate exercise level lies below the strike.
    #[error("exercise level {level:.12e} lies below log-strike {log_strike:.12e}")]
    BelowStrike { level: f64, log_strike: f64 },

    /// A convolution or tail integral diverges: the integrand grows at least
    /// as fast as the kernel decays.
    #[error("divergent convolution: tail growth {growth:.6e} vs kernel decay {decay:.6e} on the {side} tail")]
    DivergentConvolution {
        /// `"left"` or `"right"`.
        side: &'static str,
        growth: f64,
        decay: f64,
    },

    /// The exponential-polynomial algebra exceeded its polynomial-degree cap.
    #[error("polynomial degree {degree} exceeds the cap {cap} (Erlang shapes are limited so this cannot occur in supported configurations)")]
    DegreeCap { degree: usize, cap: usize },

    /// A root bracket did not change sign, so bisection cannot start.
    #[error("bracket failure for {what}: f({lo:.12e}) = {f_lo:.6e}, f({hi:.12e}) = {f_hi:.6e} do not bracket a root")]
    BracketFailure {
        what: &'static str,
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    /// An operation received a function outside the supported sub-family
    /// (e.g. a convolution kernel that is not a two-sided exponential
    /// density with a single breakpoint at zero).
    #[error("unsupported operand: {0}")]
    Unsupported(String),
}

impl Error {
    /// Classify this error for exit-code mapping.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidModel(_)
            | Error::InvalidContract(_)
            | Error::InvalidRefraction(_)
            | Error::InvalidSimulation(_)
            | Error::AssumptionViolated { .. }
            | Error::RateTooSmall { .. } => ErrorKind::Validation,
            Error::PoleProximity { .. }
            | Error::DegenerateRoots { .. }
            | Error::NoRootInStrip { .. }
            | Error::OutOfStrip { .. }
            | Error::BelowStrike { .. }
            | Error::DivergentConvolution { .. }
            | Error::DegreeCap { .. }
            | Error::BracketFailure { .. }
            | Error::Unsupported(_) => ErrorKind::Numeric,
        }
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
