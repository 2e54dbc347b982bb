//! Monte Carlo cross-checks for the analytic machinery.
//!
//! Nothing in this module feeds back into the solver: it exists so that
//! first-passage transforms, resolvent laws and full exercise strategies can
//! be verified against brute-force simulation. The simulation is built for
//! reproducibility first and speed second:
//!
//! * every path owns an independent [`ChaCha12Rng`] stream derived from
//!   `(seed, path index)` via SplitMix64, so results are bit-identical across
//!   runs and across worker counts;
//! * jump epochs are drawn exactly from the compound-Poisson clock, and the
//!   diffusion between epochs is monitored on an `h`-grid with a Brownian
//!   bridge correction for crossings inside a step, so the only time bias is
//!   the O(h) quantisation of the recorded crossing time;
//! * displacement sampling (no barrier) needs no grid at all: one Gaussian
//!   per inter-jump segment is exact, which makes the refraction-period
//!   fast-forward and the resolvent sampler unbiased.
//!
//! Paths are cut off at `horizon`; a path whose remaining contribution bound
//! is still material at the cutoff is counted in
//! [`McEstimate::truncation_fraction`], and estimates with a material
//! truncated fraction report themselves unusable.

use crate::error::{Error, Result};
use crate::model::{validate, Contract, LevyModel, RefractionSpec};
use crate::roots::phi_alpha;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;

/// Hard upper bound on the diffusion monitoring step.
pub const MAX_STEP: f64 = 1e-2;

/// Relative size below which a path's remaining contribution is abandoned.
const EARLY_STOP_TOL: f64 = 1e-6;

/// Exponent magnitude beyond which the bridge crossing probability is
/// treated as zero (e^{-45} ≈ 3e-20) without calling `exp`.
const BRIDGE_EXP_GUARD: f64 = 45.0;

/// Truncated fractions above this make an estimate unusable.
const USABLE_TRUNCATION: f64 = 1e-3;

/// Simulation parameters shared by all estimators in this module.
#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    /// Number of independent paths.
    pub n_paths: usize,
    /// Diffusion monitoring step; must lie in `(0, MAX_STEP]`. Irrelevant
    /// for models with `sigma == 0`, whose legs are handled exactly.
    pub h: f64,
    /// Hard time cutoff per path.
    pub horizon: f64,
    /// Base seed; each path derives its own stream from `(seed, index)`.
    pub seed: u64,
    /// Worker threads. Estimates are bit-identical for any value ≥ 1.
    pub workers: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_paths: 10_000,
            h: 1e-3,
            horizon: 200.0,
            seed: 12345,
            workers: 1,
        }
    }
}

impl SimConfig {
    fn checked(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::InvalidSimulation("need at least one path".into()));
        }
        if self.h.is_nan() || self.h <= 0.0 || self.h > MAX_STEP {
            return Err(Error::InvalidSimulation(format!(
                "monitoring step must lie in (0, {MAX_STEP}], got {}",
                self.h
            )));
        }
        if self.horizon.is_nan() || self.horizon <= 0.0 || !self.horizon.is_finite() {
            return Err(Error::InvalidSimulation(format!(
                "horizon must be positive and finite, got {}",
                self.horizon
            )));
        }
        if self.workers == 0 {
            return Err(Error::InvalidSimulation("need at least one worker".into()));
        }
        Ok(())
    }
}

/// A Monte Carlo sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    /// Sample mean.
    pub mean: f64,
    /// Standard error of the mean (sample standard deviation / √n).
    pub std_error: f64,
    /// Number of paths.
    pub n: usize,
    /// Fraction of paths cut off at the horizon while their remaining
    /// contribution bound was still material.
    pub truncation_fraction: f64,
}

impl McEstimate {
    /// Whether the estimate can be trusted at its quoted standard error:
    /// the truncated fraction must be negligible.
    pub fn is_usable(&self) -> bool {
        self.truncation_fraction < USABLE_TRUNCATION
    }
}

/// One simulated first passage over a level.
#[derive(Debug, Clone, Copy)]
pub struct PassageSample {
    /// Crossing time when `crossed`, otherwise the abandonment time.
    pub tau: f64,
    /// Overshoot above the level; exactly `0.0` for a creeping (continuous)
    /// crossing. Meaningless when `!crossed`.
    pub overshoot: f64,
    /// Whether the level was reached before the path was abandoned.
    pub crossed: bool,
    /// Whether the path hit the horizon with a material contribution bound.
    pub truncated: bool,
}

/// Expand `(seed, path index)` into a 256-bit ChaCha key through SplitMix64,
/// giving every path an independent stream regardless of scheduling.
fn path_rng(seed: u64, idx: u64) -> ChaCha12Rng {
    const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut state = seed.wrapping_add(idx.wrapping_mul(GAMMA));
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state = state.wrapping_add(GAMMA);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        chunk.copy_from_slice(&z.to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}

/// The compound-Poisson part of the model: epoch clock plus a phase table
/// for jump signs and sizes.
struct JumpLaw {
    epoch: Option<Exp<f64>>,
    /// `(cumulative phase probability, size law, sign)`.
    phases: Vec<(f64, Exp<f64>, f64)>,
}

impl JumpLaw {
    fn new(model: &LevyModel) -> JumpLaw {
        let total = model.down_rate() + model.up_rate();
        let mut phases = Vec::new();
        if total > 0.0 {
            let mut cum = 0.0;
            for ph in model.down_mix() {
                cum += model.down_rate() * ph.weight / total;
                phases.push((cum, Exp::new(ph.rate).expect("positive rate"), -1.0));
            }
            for ph in model.up_mix() {
                cum += model.up_rate() * ph.weight / total;
                phases.push((cum, Exp::new(ph.rate).expect("positive rate"), 1.0));
            }
            // Guard the last slot against cumulative rounding.
            if let Some(last) = phases.last_mut() {
                last.0 = f64::INFINITY;
            }
        }
        JumpLaw {
            epoch: if total > 0.0 {
                Some(Exp::new(total).expect("positive rate"))
            } else {
                None
            },
            phases,
        }
    }

    /// Time to the next jump (∞ when the model has no jumps).
    fn next_epoch(&self, rng: &mut ChaCha12Rng) -> f64 {
        match &self.epoch {
            Some(law) => law.sample(rng),
            None => f64::INFINITY,
        }
    }

    /// A signed jump size.
    fn draw(&self, rng: &mut ChaCha12Rng) -> f64 {
        let u: f64 = rng.random();
        for (cum, law, sign) in &self.phases {
            if u <= *cum {
                return sign * law.sample(rng);
            }
        }
        unreachable!("phase table covers [0, 1]")
    }
}

/// Outcome of one barrier-monitored leg of simulation.
struct PassageOutcome {
    /// Absolute crossing (or abandonment) time.
    tau: f64,
    /// Position at that time: the level itself for a creeping crossing,
    /// level plus overshoot for a jump crossing.
    x: f64,
    crossed: bool,
    truncated: bool,
}

/// Simulate from `(t_start, x0)` until the path first reaches `level`, is
/// abandoned because its remaining contribution bound fell below tolerance,
/// or hits the horizon.
///
/// The abandonment rule is `x ≤ exit_intercept + exit_slope · t`, the log of
/// an exponential supermartingale bound chosen by the caller; a path ending
/// at the horizon above that line is flagged truncated.
#[allow(clippy::too_many_arguments)]
fn passage(
    model: &LevyModel,
    jumps: &JumpLaw,
    cfg: &SimConfig,
    rng: &mut ChaCha12Rng,
    x0: f64,
    level: f64,
    t_start: f64,
    exit_intercept: f64,
    exit_slope: f64,
) -> PassageOutcome {
    let mut t = t_start;
    let mut x = x0;
    if x >= level {
        return PassageOutcome {
            tau: t,
            x,
            crossed: true,
            truncated: false,
        };
    }
    let drift = model.drift();
    let sigma = model.sigma();
    let sig2 = sigma * sigma;
    let sqrt_h = cfg.h.sqrt();
    loop {
        if t >= cfg.horizon {
            let truncated = x > exit_intercept + exit_slope * t;
            return PassageOutcome {
                tau: t,
                x,
                crossed: false,
                truncated,
            };
        }
        if x <= exit_intercept + exit_slope * t {
            return PassageOutcome {
                tau: t,
                x,
                crossed: false,
                truncated: false,
            };
        }
        let epoch = t + jumps.next_epoch(rng);
        let leg_end = epoch.min(cfg.horizon);
        if sigma > 0.0 {
            // Step the diffusion on the h-grid, correcting for crossings
            // inside a step with the Brownian bridge law.
            let mut exited = false;
            while t < leg_end {
                let hs = (leg_end - t).min(cfg.h);
                let z: f64 = rng.sample(StandardNormal);
                let root_h = if hs == cfg.h { sqrt_h } else { hs.sqrt() };
                let xn = x + drift * hs + sigma * root_h * z;
                t += hs;
                if xn >= level {
                    return PassageOutcome {
                        tau: t,
                        x: level,
                        crossed: true,
                        truncated: false,
                    };
                }
                let expo = -2.0 * (level - x) * (level - xn) / (sig2 * hs);
                if expo > -BRIDGE_EXP_GUARD && rng.random::<f64>() < expo.exp() {
                    return PassageOutcome {
                        tau: t,
                        x: level,
                        crossed: true,
                        truncated: false,
                    };
                }
                x = xn;
                if x <= exit_intercept + exit_slope * t {
                    exited = true;
                    break;
                }
            }
            if exited {
                return PassageOutcome {
                    tau: t,
                    x,
                    crossed: false,
                    truncated: false,
                };
            }
        } else {
            // Deterministic drift between jumps: the crossing time is exact.
            if drift > 0.0 && x + drift * (leg_end - t) >= level {
                let tau = t + (level - x) / drift;
                return PassageOutcome {
                    tau,
                    x: level,
                    crossed: true,
                    truncated: false,
                };
            }
            x += drift * (leg_end - t);
            t = leg_end;
        }
        if epoch > cfg.horizon {
            continue; // the horizon branch at the top settles the path
        }
        x += jumps.draw(rng);
        if x >= level {
            return PassageOutcome {
                tau: t,
                x,
                crossed: true,
                truncated: false,
            };
        }
    }
}

/// Advance a path by exactly `dt` with no barrier monitoring: one Gaussian
/// per inter-jump segment, which is exact for any segment length.
fn advance_exact(
    model: &LevyModel,
    jumps: &JumpLaw,
    rng: &mut ChaCha12Rng,
    mut x: f64,
    dt: f64,
) -> f64 {
    let drift = model.drift();
    let sigma = model.sigma();
    let mut rem = dt;
    loop {
        let epoch = jumps.next_epoch(rng);
        let step = epoch.min(rem);
        x += drift * step;
        if sigma > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            x += sigma * step.sqrt() * z;
        }
        if epoch >= rem {
            return x;
        }
        rem -= epoch;
        x += jumps.draw(rng);
    }
}

/// An Erlang(shape, rate) draw as a sum of exponentials.
fn sample_erlang(rng: &mut ChaCha12Rng, shape: u32, rate: f64) -> f64 {
    let law = Exp::new(rate).expect("positive rate");
    (0..shape).map(|_| law.sample(rng)).sum()
}

/// Run one closure per path index on a dedicated pool and collect results in
/// index order, so the outcome is independent of the worker count.
fn run_pool<T: Send>(cfg: &SimConfig, job: impl Fn(u64) -> T + Sync) -> Result<Vec<T>> {
    cfg.checked()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidSimulation(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(|| (0..cfg.n_paths as u64).into_par_iter().map(&job).collect()))
}

/// Mean, standard error and truncation bookkeeping over per-path values,
/// summed in path order for reproducibility.
fn summarize(values: &[f64], truncated: usize) -> McEstimate {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    McEstimate {
        mean,
        std_error: (var / n as f64).sqrt(),
        n,
        truncation_fraction: truncated as f64 / n as f64,
    }
}

/// Simulate first passages of the log-price over `level` starting from `x0`,
/// recording crossing times and overshoots.
///
/// A path is abandoned once `e^{-αt} e^{-Φ(α)(level - x)}` — a martingale
/// bound on its remaining contribution to any transform discounted at `α` —
/// falls below tolerance, so the returned samples price `E[e^{-ατ} g(U)]`
/// functionals for bounded `g` at that discount rate.
///
/// # Errors
///
/// Invalid configuration, or a root-solver failure when Φ(α) does not exist
/// (in which case such transforms need not be finite).
pub fn simulate_first_passage(
    model: &LevyModel,
    alpha: f64,
    x0: f64,
    level: f64,
    config: &SimConfig,
) -> Result<Vec<PassageSample>> {
    let gamma = phi_alpha(model, alpha)?;
    let jumps = JumpLaw::new(model);
    let exit_intercept = level + EARLY_STOP_TOL.ln() / gamma;
    let exit_slope = alpha / gamma;
    run_pool(config, |i| {
        let mut rng = path_rng(config.seed, i);
        let out = passage(
            model,
            &jumps,
            config,
            &mut rng,
            x0,
            level,
            0.0,
            exit_intercept,
            exit_slope,
        );
        PassageSample {
            tau: out.tau,
            overshoot: if out.crossed { out.x - level } else { 0.0 },
            crossed: out.crossed,
            truncated: out.truncated,
        }
    })
}

/// Estimate `E[e^{-α τ - β U}; τ < ∞]` from first-passage samples, where `U`
/// is the overshoot. `beta = 0` gives the plain discounted passage
/// transform.
pub fn discounted_passage_transform(
    samples: &[PassageSample],
    alpha: f64,
    beta: f64,
) -> McEstimate {
    let values: Vec<f64> = samples
        .iter()
        .map(|s| {
            if s.crossed {
                (-alpha * s.tau - beta * s.overshoot).exp()
            } else {
                0.0
            }
        })
        .collect();
    let truncated = samples.iter().filter(|s| s.truncated).count();
    summarize(&values, truncated)
}

/// Estimate `E[e^{-α τ}; τ < ∞, crossing by creeping]`: only continuous
/// crossings (overshoot exactly zero) contribute.
pub fn creep_transform(samples: &[PassageSample], alpha: f64) -> McEstimate {
    let values: Vec<f64> = samples
        .iter()
        .map(|s| {
            if s.crossed && s.overshoot == 0.0 {
                (-alpha * s.tau).exp()
            } else {
                0.0
            }
        })
        .collect();
    let truncated = samples.iter().filter(|s| s.truncated).count();
    summarize(&values, truncated)
}

/// Value the threshold strategy that exercises its k-th right the first time
/// the log-price is at or above `thresholds[k]`, then sits out an
/// Erlang-distributed refraction period.
///
/// `thresholds` is given in order of use: element 0 governs the first
/// exercise (all rights still in hand). Exercise is immediate whenever the
/// decision point is already at or above the current threshold. Remaining
/// rights contribute `e^{-αt}(e^{X_t} - K)` at each exercise time; a path is
/// abandoned once the supermartingale bound
/// `(rights left) · e^{-αt + X_t}` on its remaining value falls below
/// tolerance relative to the strike.
///
/// # Errors
///
/// Invalid configuration, a threshold count different from the contract's
/// exercise count, or a model/contract pair failing validation (validation
/// is what guarantees the abandonment bound above is a supermartingale).
pub fn simulate_strategy_value(
    model: &LevyModel,
    contract: &Contract,
    refraction: &RefractionSpec,
    thresholds: &[f64],
    x0: f64,
    config: &SimConfig,
) -> Result<McEstimate> {
    if thresholds.len() != contract.n_exercises() {
        return Err(Error::InvalidContract(format!(
            "strategy supplies {} thresholds for {} exercise rights",
            thresholds.len(),
            contract.n_exercises()
        )));
    }
    validate(model, contract, refraction).ensure()?;
    let jumps = JumpLaw::new(model);
    let alpha = contract.alpha();
    let strike = contract.strike();
    let n_rights = contract.n_exercises();
    let results: Vec<(f64, bool)> = run_pool(config, |i| {
        let mut rng = path_rng(config.seed, i);
        let mut t = 0.0;
        let mut x = x0;
        let mut total = 0.0;
        let mut truncated = false;
        for (k, &level) in thresholds.iter().enumerate() {
            let rights_left = (n_rights - k) as f64;
            if x < level {
                let exit_intercept = (EARLY_STOP_TOL * strike / rights_left).ln();
                let out = passage(
                    model, &jumps, config, &mut rng, x, level, t, exit_intercept, alpha,
                );
                if !out.crossed {
                    truncated = out.truncated;
                    break;
                }
                t = out.tau;
                x = out.x;
            }
            total += (-alpha * t).exp() * (x.exp() - strike);
            if k + 1 < n_rights {
                let delta = sample_erlang(&mut rng, refraction.shape(), refraction.rate());
                x = advance_exact(model, &jumps, &mut rng, x, delta);
                t += delta;
                if t >= config.horizon {
                    let rights_after = (n_rights - k - 1) as f64;
                    truncated = rights_after * (-alpha * t + x).exp() > EARLY_STOP_TOL * strike;
                    break;
                }
            }
        }
        (total, truncated)
    })?;
    let values: Vec<f64> = results.iter().map(|r| r.0).collect();
    let truncated = results.iter().filter(|r| r.1).count();
    Ok(summarize(&values, truncated))
}

/// Draw exact samples of the displacement `X_t - X_0` over a fixed time.
///
/// # Errors
///
/// Invalid configuration or a non-positive time.
pub fn sample_displacement(model: &LevyModel, t: f64, config: &SimConfig) -> Result<Vec<f64>> {
    if t.is_nan() || t <= 0.0 || !t.is_finite() {
        return Err(Error::InvalidSimulation(format!(
            "displacement time must be positive and finite, got {t}"
        )));
    }
    let jumps = JumpLaw::new(model);
    run_pool(config, |i| {
        let mut rng = path_rng(config.seed, i);
        advance_exact(model, &jumps, &mut rng, 0.0, t)
    })
}

/// Draw exact samples of the displacement over an independent
/// Erlang(shape, rate) time — the law whose density is the (m-fold) resolvent
/// kernel of the refraction operator.
///
/// # Errors
///
/// Invalid configuration, zero shape, or a non-positive rate.
pub fn sample_erlang_displacement(
    model: &LevyModel,
    shape: u32,
    rate: f64,
    config: &SimConfig,
) -> Result<Vec<f64>> {
    if shape == 0 {
        return Err(Error::InvalidSimulation("Erlang shape must be positive".into()));
    }
    if rate.is_nan() || rate <= 0.0 || !rate.is_finite() {
        return Err(Error::InvalidSimulation(format!(
            "Erlang rate must be positive and finite, got {rate}"
        )));
    }
    let jumps = JumpLaw::new(model);
    run_pool(config, |i| {
        let mut rng = path_rng(config.seed, i);
        let delta = sample_erlang(&mut rng, shape, rate);
        advance_exact(model, &jumps, &mut rng, 0.0, delta)
    })
}

/// Two-sided Kolmogorov–Smirnov statistic of a sample against a reference
/// CDF. The usual 99% acceptance bound for a simple hypothesis is
/// `1.63 / √n`.
pub fn kolmogorov_smirnov(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    d
}
