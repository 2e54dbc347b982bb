//! Optimal multiple stopping for hyper-exponential jump diffusions.
//!
//! This crate prices contracts that grant `n` exercise rights on an asset
//! `S_t = e^{X_t}`, where `X` is a jump diffusion with hyper-exponential
//! jumps in both directions, and consecutive exercises are separated by a
//! random refraction period with an Erlang law. The solution is a ladder of
//! exercise thresholds `x_n* ≤ … ≤ x_1*`, computed recursively through the
//! Wiener–Hopf factorization of the driving process: every value function in
//! the recursion stays inside a closed algebra of piecewise exponential
//! polynomials, so all operators (expectation under the running supremum,
//! resolvent smoothing over the refraction period, first-passage pricing)
//! are exact up to root-finding tolerances.
//!
//! Module map:
//!
//! * [`model`] — Lévy triplet, contract, refraction law, assumption checks;
//! * [`roots`] — deterministic bracketing/bisection for ψ(β) = q;
//! * [`exppoly`] — the piecewise exponential-polynomial function algebra;
//! * [`factor`] — Wiener–Hopf factors, supremum measures, resolvents, and
//!   the refraction operator;
//! * [`single`] — the one-right optimal stopping problem in closed form;
//! * [`multi`] — the full n-right recursion;
//! * [`mc`] — a Monte Carlo oracle used to validate everything else.

pub mod error;
pub mod exppoly;
pub mod factor;
pub mod mc;
pub mod model;
pub mod multi;
pub mod roots;
pub mod single;

pub use error::{Error, ErrorKind, Result};
pub use exppoly::ExpPoly;
pub use factor::{
    build_factor, first_passage_transform, integrate_measure, overshoot_law, resolvent_cdf,
    resolvent_density, ExpMixtureMeasure, WienerHopfFactor,
};
pub use mc::{
    creep_transform, discounted_passage_transform, kolmogorov_smirnov, sample_displacement,
    sample_erlang_displacement, simulate_first_passage, simulate_strategy_value, McEstimate,
    PassageSample, SimConfig,
};
pub use model::{
    validate, Contract, LevyModel, MixturePhase, RefractionSpec, ValidationReport,
};
pub use multi::{solve_all, MultiSolver, RefractionOperator, SolveResult, StageDiagnostics};
pub use roots::{characteristic_polynomial, phi_alpha, solve_roots, RootSet};
pub use single::{solve_single, stopping_value, threshold_x1, SingleResult};
