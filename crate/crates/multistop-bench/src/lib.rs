//! Benchmark-only crate; the measurements live in `benches/solver.rs`.
//!
//! Shared fixtures for the benchmarks: the worked model and contract used
//! throughout the test suites, so benchmark numbers are directly comparable
//! with the tolerances the tests enforce.

use multistop_core::{Contract, LevyModel, MixturePhase, RefractionSpec};

/// Drift 0.36, volatility 0.2, downward Exp(1) jumps at unit rate.
pub fn worked_model() -> LevyModel {
    LevyModel::spectrally_negative(0.36, 0.2, 1.0, vec![MixturePhase::new(1.0, 1.0)])
        .expect("worked model is valid")
}

/// Strike 50, discount −0.02, `n` exercise rights.
pub fn worked_contract(n: usize) -> Contract {
    Contract::new(50.0, -0.02, n).expect("worked contract is valid")
}

/// Exponential refraction with mean 1.
pub fn exponential_refraction() -> RefractionSpec {
    RefractionSpec::new(1, 1.0).expect("refraction spec is valid")
}
