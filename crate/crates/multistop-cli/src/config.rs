//! Run configuration: a flat, sectioned `key = value` file.
//!
//! The format is deliberately plain — human-writable and diff-friendly:
//!
//! ```text
//! # Anything after `#` is a comment.
//! [model]
//! drift          = 0.36
//! sigma          = 0.2
//! down_jump_rate = 1.0
//! down_mix       = 1.0:1.0     # weight:rate phases, comma separated
//! up_jump_rate   = 0.0
//! up_mix         =             # empty list is allowed when the rate is 0
//!
//! [contract]
//! strike      = 50.0
//! alpha       = -0.02
//! n_exercises = 5
//!
//! [refraction]
//! shape = 1
//! mean  = 1.0                  # or `rate = ...`; exactly one of the two
//!
//! [mc]                         # optional, defaults are sensible
//! n_paths = 20000
//! h       = 0.001
//! horizon = 200.0
//! seed    = 12345
//! workers = 1
//!
//! [output]                     # optional
//! grid_points = 401
//!
//! [sweep]                      # optional
//! delta_bars = 0.5,1.0,1.5,2.0
//! ```
//!
//! Parsing is strict: unknown sections or keys, duplicate keys, and
//! malformed values are all rejected with the offending line number.
//! Semantic violations (negative strike, zero volatility with no jumps, …)
//! surface as the solver's own validation errors.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use multistop_core::{Contract, LevyModel, MixturePhase, RefractionSpec, SimConfig};

use crate::{io_err, CliError};

/// The sections a config file may contain.
const SECTIONS: &[&str] = &["model", "contract", "refraction", "mc", "output", "sweep"];

/// Default number of grid points for `values.csv`.
pub const DEFAULT_GRID_POINTS: usize = 401;

/// A config-file problem, with the 1-based line it was found on when the
/// problem is attributable to a specific line.
#[derive(Debug, Clone)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "config error at line {line}: {}", self.message),
            None => write!(f, "config error: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err_at(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line: Some(line),
        message: message.into(),
    }
}

fn err(message: impl Into<String>) -> ConfigError {
    ConfigError {
        line: None,
        message: message.into(),
    }
}

/// Everything a command needs to run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: LevyModel,
    pub contract: Contract,
    pub refraction: RefractionSpec,
    pub sim: SimConfig,
    /// Number of abscissae in `values.csv` (≥ 2).
    pub grid_points: usize,
    /// Optional explicit grid bounds; default is `[log K − 2, x₁⋆ + 2]`.
    pub grid_lo: Option<f64>,
    pub grid_hi: Option<f64>,
    /// Mean refraction times δ̄ for the `sweep` command.
    pub sweep_delta_bars: Vec<f64>,
}

impl RunConfig {
    /// Load and parse a config file.
    pub fn from_file(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| io_err(path, source))?;
        text.parse()
    }

    /// Apply command-line overrides to the simulation settings.
    pub fn apply_overrides(
        &mut self,
        seed: Option<u64>,
        paths: Option<usize>,
        workers: Option<usize>,
    ) {
        if let Some(seed) = seed {
            self.sim.seed = seed;
        }
        if let Some(paths) = paths {
            self.sim.n_paths = paths;
        }
        if let Some(workers) = workers {
            self.sim.workers = workers;
        }
    }
}

impl FromStr for RunConfig {
    type Err = CliError;

    fn from_str(text: &str) -> Result<RunConfig, CliError> {
        let mut entries = Entries::parse(text)?;

        // [model]
        let drift: f64 = entries.require("model", "drift", "a number")?;
        let sigma: f64 = entries.require("model", "sigma", "a number")?;
        let down_rate: f64 = entries.require("model", "down_jump_rate", "a number")?;
        let up_rate: f64 = entries.require("model", "up_jump_rate", "a number")?;
        let down_mix = entries.take_mix("model", "down_mix")?;
        let up_mix = entries.take_mix("model", "up_mix")?;
        let model = LevyModel::new(drift, sigma, down_rate, down_mix, up_rate, up_mix)?;

        // [contract]
        let strike: f64 = entries.require("contract", "strike", "a number")?;
        let alpha: f64 = entries.require("contract", "alpha", "a number")?;
        let n_exercises: usize = entries.require("contract", "n_exercises", "an integer")?;
        let contract = Contract::new(strike, alpha, n_exercises)?;

        // [refraction] — exactly one of `rate` and `mean`.
        let shape: u32 = entries.require("refraction", "shape", "an integer")?;
        let rate = entries.take_parse::<f64>("refraction", "rate", "a number")?;
        let mean = entries.take_parse::<f64>("refraction", "mean", "a number")?;
        let refraction = match (rate, mean) {
            (Some(rate), None) => RefractionSpec::new(shape, rate)?,
            (None, Some(mean)) => RefractionSpec::from_mean(shape, mean)?,
            (None, None) => {
                return Err(err("[refraction] needs one of the keys `rate` or `mean`").into())
            }
            (Some(_), Some(_)) => {
                return Err(
                    err("[refraction] keys `rate` and `mean` are mutually exclusive").into(),
                )
            }
        };

        // [mc] — all optional.
        let defaults = SimConfig::default();
        let sim = SimConfig {
            n_paths: entries
                .take_parse("mc", "n_paths", "an integer")?
                .unwrap_or(defaults.n_paths),
            h: entries.take_parse("mc", "h", "a number")?.unwrap_or(defaults.h),
            horizon: entries
                .take_parse("mc", "horizon", "a number")?
                .unwrap_or(defaults.horizon),
            seed: entries
                .take_parse("mc", "seed", "an integer")?
                .unwrap_or(defaults.seed),
            workers: entries
                .take_parse("mc", "workers", "an integer")?
                .unwrap_or(defaults.workers),
        };

        // [output] — all optional.
        let grid_points = entries
            .take_parse("output", "grid_points", "an integer")?
            .unwrap_or(DEFAULT_GRID_POINTS);
        if grid_points < 2 {
            return Err(err(format!("grid_points must be at least 2, got {grid_points}")).into());
        }
        let grid_lo = entries.take_parse::<f64>("output", "grid_lo", "a number")?;
        let grid_hi = entries.take_parse::<f64>("output", "grid_hi", "a number")?;
        if let (Some(lo), Some(hi)) = (grid_lo, grid_hi) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(err(format!("grid bounds must satisfy lo < hi, got {lo}..{hi}")).into());
            }
        }

        // [sweep] — optional; default δ̄ = 0.5, 1.0, …, 10.0.
        let sweep_delta_bars = match entries.take("sweep", "delta_bars") {
            Some((value, line)) => parse_f64_list(&value, line)?,
            None => (1..=20).map(|i| f64::from(i) * 0.5).collect(),
        };

        entries.finish()?;
        Ok(RunConfig {
            model,
            contract,
            refraction,
            sim,
            grid_points,
            grid_lo,
            grid_hi,
            sweep_delta_bars,
        })
    }
}

/// Raw `(section, key) → (value, line)` map with take-based consumption:
/// every accessor removes the entry it reads, so whatever is left at the end
/// is by construction unknown and can be reported precisely.
struct Entries {
    map: BTreeMap<(String, String), (String, usize)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Entries, ConfigError> {
        let mut map = BTreeMap::new();
        let mut section: Option<&str> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(cut) => &raw[..cut],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err_at(line_no, format!("malformed section header `{line}`")))?
                    .trim();
                section = Some(
                    SECTIONS
                        .iter()
                        .find(|s| **s == name)
                        .ok_or_else(|| err_at(line_no, format!("unknown section [{name}]")))?,
                );
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(err_at(line_no, format!("expected `key = value`, got `{line}`")));
            };
            let key = key.trim();
            let value = value.trim();
            let Some(section) = section else {
                return Err(err_at(
                    line_no,
                    format!("key `{key}` appears before any [section] header"),
                ));
            };
            if key.is_empty() {
                return Err(err_at(line_no, "empty key before `=`"));
            }
            if map
                .insert(
                    (section.to_string(), key.to_string()),
                    (value.to_string(), line_no),
                )
                .is_some()
            {
                return Err(err_at(line_no, format!("duplicate key `{key}` in [{section}]")));
            }
        }
        Ok(Entries { map })
    }

    fn take(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        self.map.remove(&(section.to_string(), key.to_string()))
    }

    /// Remove and parse an optional key.
    fn take_parse<T: FromStr>(
        &mut self,
        section: &str,
        key: &str,
        what: &str,
    ) -> Result<Option<T>, ConfigError> {
        match self.take(section, key) {
            None => Ok(None),
            Some((value, line)) => value.parse::<T>().map(Some).map_err(|_| {
                err_at(line, format!("cannot parse `{value}` as {what} for key `{key}`"))
            }),
        }
    }

    /// Remove and parse a mandatory key.
    fn require<T: FromStr>(
        &mut self,
        section: &str,
        key: &str,
        what: &str,
    ) -> Result<T, ConfigError> {
        self.take_parse(section, key, what)?
            .ok_or_else(|| err(format!("missing required key `{key}` in [{section}]")))
    }

    /// Remove and parse an optional `weight:rate,weight:rate,…` list; an
    /// absent key or an empty value is the empty mixture.
    fn take_mix(&mut self, section: &str, key: &str) -> Result<Vec<MixturePhase>, ConfigError> {
        match self.take(section, key) {
            None => Ok(Vec::new()),
            Some((value, line)) => parse_mix(&value, line),
        }
    }

    /// Error out on the first entry nobody consumed.
    fn finish(self) -> Result<(), ConfigError> {
        match self.map.into_iter().next() {
            Some(((section, key), (_, line))) => {
                Err(err_at(line, format!("unknown key `{key}` in [{section}]")))
            }
            None => Ok(()),
        }
    }
}

fn parse_mix(spec: &str, line: usize) -> Result<Vec<MixturePhase>, ConfigError> {
    let spec = spec.trim();
    if spec.is_empty() {
        return Ok(Vec::new());
    }
    spec.split(',')
        .map(|part| {
            let part = part.trim();
            let (weight, rate) = part.split_once(':').ok_or_else(|| {
                err_at(line, format!("mixture phase `{part}` must be `weight:rate`"))
            })?;
            let weight: f64 = weight.trim().parse().map_err(|_| {
                err_at(line, format!("cannot parse mixture weight `{}`", weight.trim()))
            })?;
            let rate: f64 = rate.trim().parse().map_err(|_| {
                err_at(line, format!("cannot parse mixture rate `{}`", rate.trim()))
            })?;
            Ok(MixturePhase::new(weight, rate))
        })
        .collect()
}

fn parse_f64_list(spec: &str, line: usize) -> Result<Vec<f64>, CliError> {
    let values: Vec<f64> = spec
        .split(',')
        .map(|part| {
            let part = part.trim();
            part.parse::<f64>()
                .map_err(|_| err_at(line, format!("cannot parse `{part}` as a number")))
        })
        .collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err(err_at(line, "delta_bars must list at least one value").into());
    }
    for &v in &values {
        if !(v.is_finite() && v > 0.0) {
            return Err(err_at(line, format!("delta_bars entries must be positive, got {v}")).into());
        }
    }
    Ok(values)
}
