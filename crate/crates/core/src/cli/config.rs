//! Experiment configuration: one TOML file with a section per experiment.
//!
//! Every key has a default, so an empty file (or no file) is a valid
//! configuration. Unknown keys are rejected with their line and column.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::EntropyFunction;
use crate::norms::{Exponent, Rational, RegularityClass};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Rates,
    Endpoint,
    Simulate,
    Verify,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Rates => "rates",
            ExperimentKind::Endpoint => "endpoint",
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Verify => "verify",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads; 0 lets the pool pick.
    pub threads: usize,
    pub rates: RatesConfig,
    pub endpoint: EndpointConfig,
    pub simulate: SimulateConfig,
    pub verify: VerifyConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            output_dir: PathBuf::from("out"),
            threads: 0,
            rates: RatesConfig::default(),
            endpoint: EndpointConfig::default(),
            simulate: SimulateConfig::default(),
            verify: VerifyConfig::default(),
        }
    }
}

/// One mollification-rate series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MollifyClass {
    pub theta: Rational,
    pub p: Exponent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatesConfig {
    pub theta: Rational,
    pub p: Exponent,
    pub kappa: Rational,
    pub q: Exponent,
    pub nx: usize,
    pub ns: usize,
    pub momentum_dim: usize,
    pub x_extent: f64,
    pub s_extent: f64,
    pub epsilon0: f64,
    pub ratio: f64,
    pub levels: usize,
    pub tolerance: f64,
    pub mollify_classes: Vec<MollifyClass>,
    pub mollify_points: usize,
    pub mollify_epsilon0: f64,
    pub mollify_levels: usize,
    pub mollify_tolerance: f64,
}

impl Default for RatesConfig {
    fn default() -> Self {
        let class = |n, d, p| MollifyClass {
            theta: Rational::new(n, d).expect("nonzero denominator"),
            p,
        };
        RatesConfig {
            theta: Rational::new(1, 2).unwrap(),
            p: Exponent::Finite(2.0),
            kappa: Rational::new(1, 2).unwrap(),
            q: Exponent::Finite(2.0),
            nx: 256,
            ns: 128,
            momentum_dim: 1,
            x_extent: 1.0,
            s_extent: 1.5,
            epsilon0: 1.0 / 16.0,
            ratio: 2.0,
            levels: 4,
            tolerance: 0.15,
            mollify_classes: vec![
                class(3, 10, Exponent::Finite(2.0)),
                class(1, 2, Exponent::Finite(2.0)),
                class(7, 10, Exponent::Infinity),
            ],
            mollify_points: 1 << 14,
            mollify_epsilon0: 1.0 / 32.0,
            mollify_levels: 5,
            mollify_tolerance: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointConfig {
    pub theta: Rational,
    pub p: Exponent,
    pub kappa: Rational,
    pub q: Exponent,
    pub nx: usize,
    pub ns: usize,
    pub momentum_dim: usize,
    pub x_extent: f64,
    pub s_extent: f64,
    pub epsilon0: f64,
    pub ratio: f64,
    pub levels: usize,
    /// Lowest admissible combined slope on the critical line.
    pub critical_tolerance: f64,
    /// Allowed shortfall below the predicted slope above the line.
    pub supercritical_tolerance: f64,
    pub entropy: String,
    pub residual_slices: usize,
    pub residual_ns: usize,
    pub residual_s_extent: f64,
    pub residual_translates: usize,
    /// Allowed relative increase between consecutive residual levels.
    pub residual_tolerance: f64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            theta: Rational::new(1, 5).unwrap(),
            p: Exponent::Finite(2.0),
            kappa: Rational::new(1, 3).unwrap(),
            q: Exponent::Finite(2.0),
            nx: 512,
            ns: 256,
            momentum_dim: 1,
            x_extent: 1.0,
            s_extent: 1.5,
            epsilon0: 1.0 / 16.0,
            ratio: 2.0,
            levels: 4,
            critical_tolerance: 0.05,
            supercritical_tolerance: 0.15,
            entropy: "square".into(),
            residual_slices: 32,
            residual_ns: 256,
            residual_s_extent: 4.0,
            residual_translates: 8,
            residual_tolerance: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub nx: usize,
    pub ns: usize,
    pub momentum_dim: usize,
    pub momentum_extent: f64,
    pub wavenumber: f64,
    pub alpha: f64,
    pub temperature: f64,
    pub b0: f64,
    pub wave: f64,
    pub dt: f64,
    pub order: u8,
    pub cfl: f64,
    pub horizon: f64,
    pub output_every: usize,
    pub entropy: String,
    pub mass_budget: f64,
    pub drift_budget: f64,
    pub gauss_budget: f64,
    /// Checkpoint to continue from; empty starts a fresh run.
    pub resume: PathBuf,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            nx: 128,
            ns: 128,
            momentum_dim: 1,
            momentum_extent: 6.0,
            wavenumber: 0.5,
            alpha: 0.05,
            temperature: 0.1,
            b0: 0.0,
            wave: 0.0,
            dt: 0.04,
            order: 2,
            cfl: 1.0,
            horizon: 1.0,
            output_every: 5,
            entropy: "square".into(),
            mass_budget: 1e-8,
            drift_budget: 1e-3,
            gauss_budget: 1e-8,
            resume: PathBuf::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Number of seeds, starting at the run seed.
    pub seeds: usize,
    /// Random point checks per inequality family and seed.
    pub points: usize,
    pub nx: usize,
    pub ns: usize,
    pub identity_tolerance: f64,
    pub slack: f64,
    pub bounds: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seeds: 4,
            points: 250_000,
            nx: 128,
            ns: 64,
            identity_tolerance: 1e-8,
            slack: 1e-10,
            bounds: true,
        }
    }
}

/// Configuration errors, all mapped to exit status 1.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

/// 1-based line and column of a byte offset.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

impl ExperimentConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((1, 1), |s| line_column(text, s.start));
            ConfigError::Parse {
                path: origin.to_string(),
                line,
                column,
                message: e.message().trim().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Checks the section of `kind`; other sections are not inspected.
    pub fn validate(&self, kind: ExperimentKind) -> Result<(), ConfigError> {
        match kind {
            ExperimentKind::Rates => self.rates.validate(),
            ExperimentKind::Endpoint => self.endpoint.validate(),
            ExperimentKind::Simulate => self.simulate.validate(),
            ExperimentKind::Verify => self.verify.validate(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes")
    }
}

/// Maps a library validation error onto the config key it came from.
fn field_error(section: &str, e: Error) -> ConfigError {
    match e {
        Error::InvalidParameter { name, reason } => invalid(format!("{section}.{name}"), reason),
        other => invalid(section, other.to_string()),
    }
}

fn regularity(section: &str, theta: Rational, p: Exponent, kappa: Rational, q: Exponent) -> Result<RegularityClass, ConfigError> {
    RegularityClass::exact(theta, p)
        .and_then(|r| r.with_field_exact(kappa, q))
        .map_err(|e| field_error(section, e))
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("{v} must be positive")))
    }
}

fn points(field: &str, n: usize) -> Result<(), ConfigError> {
    if n >= crate::fields::MIN_AXIS_POINTS {
        Ok(())
    } else {
        Err(invalid(field, format!("{n} is below the minimum of {} points", crate::fields::MIN_AXIS_POINTS)))
    }
}

fn ladder(section: &str, eps0: f64, ratio: f64, levels: usize) -> Result<(), ConfigError> {
    positive(&format!("{section}.epsilon0"), eps0)?;
    if !(ratio.is_finite() && ratio > 1.0) {
        return Err(invalid(format!("{section}.ratio"), format!("{ratio} must exceed 1")));
    }
    if levels < 3 {
        return Err(invalid(format!("{section}.levels"), format!("{levels} is below the minimum of 3 levels")));
    }
    Ok(())
}

fn momentum_dim(field: &str, d: usize) -> Result<(), ConfigError> {
    if d == 1 || d == 2 {
        Ok(())
    } else {
        Err(invalid(field, format!("{d} is not 1 or 2")))
    }
}

pub fn parse_entropy(field: &str, s: &str) -> Result<EntropyFunction, ConfigError> {
    s.parse().map_err(|e: Error| invalid(field, e.to_string()))
}

impl RatesConfig {
    pub fn regularity(&self) -> Result<RegularityClass, ConfigError> {
        regularity("rates", self.theta, self.p, self.kappa, self.q)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        self.regularity()?;
        points("rates.nx", self.nx)?;
        points("rates.ns", self.ns)?;
        momentum_dim("rates.momentum_dim", self.momentum_dim)?;
        positive("rates.x_extent", self.x_extent)?;
        positive("rates.s_extent", self.s_extent)?;
        ladder("rates", self.epsilon0, self.ratio, self.levels)?;
        positive("rates.tolerance", self.tolerance)?;
        for (i, c) in self.mollify_classes.iter().enumerate() {
            RegularityClass::exact(c.theta, c.p).map_err(|e| field_error(&format!("rates.mollify_classes[{i}]"), e))?;
        }
        points("rates.mollify_points", self.mollify_points)?;
        ladder("rates.mollify", self.mollify_epsilon0, 2.0, self.mollify_levels)?;
        positive("rates.mollify_tolerance", self.mollify_tolerance)
    }
}

impl EndpointConfig {
    pub fn regularity(&self) -> Result<RegularityClass, ConfigError> {
        regularity("endpoint", self.theta, self.p, self.kappa, self.q)
    }

    pub fn entropy(&self) -> Result<EntropyFunction, ConfigError> {
        parse_entropy("endpoint.entropy", &self.entropy)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        self.regularity()?;
        self.entropy()?;
        points("endpoint.nx", self.nx)?;
        points("endpoint.ns", self.ns)?;
        points("endpoint.residual_ns", self.residual_ns)?;
        momentum_dim("endpoint.momentum_dim", self.momentum_dim)?;
        positive("endpoint.x_extent", self.x_extent)?;
        positive("endpoint.s_extent", self.s_extent)?;
        positive("endpoint.residual_s_extent", self.residual_s_extent)?;
        ladder("endpoint", self.epsilon0, self.ratio, self.levels)?;
        if self.residual_slices == 0 {
            return Err(invalid("endpoint.residual_slices", "must be at least 1"));
        }
        if self.residual_translates == 0 {
            return Err(invalid("endpoint.residual_translates", "must be at least 1"));
        }
        for (f, v) in [
            ("endpoint.critical_tolerance", self.critical_tolerance),
            ("endpoint.supercritical_tolerance", self.supercritical_tolerance),
            ("endpoint.residual_tolerance", self.residual_tolerance),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(f, format!("{v} must be nonnegative")));
            }
        }
        Ok(())
    }
}

impl SimulateConfig {
    pub fn entropy(&self) -> Result<EntropyFunction, ConfigError> {
        parse_entropy("simulate.entropy", &self.entropy)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        self.entropy()?;
        points("simulate.nx", self.nx)?;
        points("simulate.ns", self.ns)?;
        momentum_dim("simulate.momentum_dim", self.momentum_dim)?;
        for (f, v) in [
            ("simulate.momentum_extent", self.momentum_extent),
            ("simulate.wavenumber", self.wavenumber),
            ("simulate.temperature", self.temperature),
            ("simulate.dt", self.dt),
            ("simulate.cfl", self.cfl),
            ("simulate.mass_budget", self.mass_budget),
            ("simulate.drift_budget", self.drift_budget),
            ("simulate.gauss_budget", self.gauss_budget),
        ] {
            positive(f, v)?;
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(invalid("simulate.horizon", format!("{} must be nonnegative", self.horizon)));
        }
        if !(self.alpha.is_finite() && self.alpha.abs() < 1.0) {
            return Err(invalid("simulate.alpha", format!("{} must lie in (-1, 1)", self.alpha)));
        }
        if self.order != 1 && self.order != 2 {
            return Err(invalid("simulate.order", format!("{} is not 1 or 2", self.order)));
        }
        if self.output_every == 0 {
            return Err(invalid("simulate.output_every", "must be at least 1"));
        }
        if self.momentum_dim == 1 && (self.b0 != 0.0 || self.wave != 0.0) {
            return Err(invalid("simulate.b0", "magnetic fields need momentum_dim = 2"));
        }
        Ok(())
    }
}

impl VerifyConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        if self.seeds == 0 {
            return Err(invalid("verify.seeds", "must be at least 1"));
        }
        if self.points == 0 {
            return Err(invalid("verify.points", "must be at least 1"));
        }
        // The identity suite mollifies at 1/32 on unit axes: two spacings need 64 points.
        for (field, n) in [("verify.nx", self.nx), ("verify.ns", self.ns)] {
            if n < 64 {
                return Err(invalid(field, format!("{n} is below the 64 points the 1/32 identity scales need")));
            }
        }
        positive("verify.identity_tolerance", self.identity_tolerance)?;
        if !(self.slack.is_finite() && self.slack >= 0.0) {
            return Err(invalid("verify.slack", "must be nonnegative"));
        }
        Ok(())
    }
}

/// Key reference: (key, meaning). Defaults come from `Default` so the two
/// cannot drift apart.
const KEY_DOCS: &[(&str, &str)] = &[
    ("seed", "base seed for every synthesized input"),
    ("output_dir", "directory for CSV, JSON and checkpoint files"),
    ("threads", "worker threads, 0 picks the number of cores"),
    ("rates.theta", "regularity of u, strictly between 0 and 1 (fractions like \"1/3\" are exact)"),
    ("rates.p", "integrability of u: a number >= 1 or \"inf\""),
    ("rates.kappa", "regularity of E and B, strictly between 0 and 1"),
    ("rates.q", "integrability of E and B"),
    ("rates.nx", "position points of the commutator ladder"),
    ("rates.ns", "points per momentum axis"),
    ("rates.momentum_dim", "momentum dimension, 1 or 2"),
    ("rates.x_extent", "period of the position axis"),
    ("rates.s_extent", "width of each momentum axis"),
    ("rates.epsilon0", "largest position scale of the balanced ladder"),
    ("rates.ratio", "ratio between consecutive position scales"),
    ("rates.levels", "number of ladder levels (at least 3)"),
    ("rates.tolerance", "allowed distance of commutator slopes from the prediction"),
    ("rates.mollify_classes", "(theta, p) pairs of the mollification-rate series"),
    ("rates.mollify_points", "points of the one-dimensional torus"),
    ("rates.mollify_epsilon0", "largest scale of the dyadic mollification ladder"),
    ("rates.mollify_levels", "dyadic mollification levels"),
    ("rates.mollify_tolerance", "allowed distance of mollification slopes from theta and theta - 1"),
    ("endpoint.theta", "regularity of u"),
    ("endpoint.p", "integrability of u"),
    ("endpoint.kappa", "regularity of E and B"),
    ("endpoint.q", "integrability of E and B"),
    ("endpoint.nx", "position points of the combined-commutator ladder"),
    ("endpoint.ns", "points per momentum axis"),
    ("endpoint.momentum_dim", "1 (E only) or 2 (E and B)"),
    ("endpoint.x_extent", "period of the position axis"),
    ("endpoint.s_extent", "width of each momentum axis"),
    ("endpoint.epsilon0", "largest position scale"),
    ("endpoint.ratio", "ratio between consecutive position scales"),
    ("endpoint.levels", "number of ladder levels"),
    ("endpoint.critical_tolerance", "lowest admissible combined slope is minus this value on the critical line"),
    ("endpoint.supercritical_tolerance", "allowed shortfall below the predicted slope above the line"),
    ("endpoint.entropy", "zero, mass, square, tlog or softmin[:M]"),
    ("endpoint.residual_slices", "time slices of the renormalization residual"),
    ("endpoint.residual_ns", "momentum points of the residual sweep"),
    ("endpoint.residual_s_extent", "momentum width of the residual sweep"),
    ("endpoint.residual_translates", "position translates of the test-function family"),
    ("endpoint.residual_tolerance", "allowed relative increase between consecutive residual levels"),
    ("simulate.nx", "position points"),
    ("simulate.ns", "points per momentum axis"),
    ("simulate.momentum_dim", "1 (1D1V) or 2 (1D2V with magnetic field)"),
    ("simulate.momentum_extent", "width of each momentum axis"),
    ("simulate.wavenumber", "perturbation wavenumber; the period is 2 pi / wavenumber"),
    ("simulate.alpha", "perturbation amplitude"),
    ("simulate.temperature", "temperature of the equilibrium"),
    ("simulate.b0", "uniform magnetic field (1D2V)"),
    ("simulate.wave", "amplitude of the transverse wave in E2 and B (1D2V)"),
    ("simulate.dt", "largest time step"),
    ("simulate.order", "1 for Lie splitting, 2 for Strang splitting"),
    ("simulate.cfl", "dt may not exceed cfl times the smallest grid spacing"),
    ("simulate.horizon", "simulated time"),
    ("simulate.output_every", "steps between checkpoints"),
    ("simulate.entropy", "entropy function of the drift and local residual reports"),
    ("simulate.mass_budget", "largest admissible relative mass drift"),
    ("simulate.drift_budget", "largest admissible relative entropy drift"),
    ("simulate.gauss_budget", "largest admissible Gauss-law residual"),
    ("simulate.resume", "checkpoint to continue from (empty for a fresh start)"),
    ("verify.seeds", "number of seeds, starting at the run seed"),
    ("verify.points", "random point checks per inequality family and seed"),
    ("verify.nx", "position points of the identity suite"),
    ("verify.ns", "points per momentum axis of the identity suite"),
    ("verify.identity_tolerance", "largest admissible relative identity residual"),
    ("verify.slack", "absolute slack of the inequality checks"),
    ("verify.bounds", "also check the frozen commutator-bound constants"),
];

fn lookup<'a>(value: &'a toml::Value, key: &str) -> Option<&'a toml::Value> {
    key.split('.').try_fold(value, |v, k| v.get(k))
}

/// Markdown reference of every key with its default.
pub fn reference_page() -> String {
    let defaults = toml::Value::try_from(ExperimentConfig::default()).expect("defaults serialize");
    let mut out = String::from(
        "# Configuration reference\n\n\
         The configuration is a TOML file. Every key is optional; missing keys take the\n\
         defaults below and unknown keys are rejected. `--seed` and `--out` override\n\
         `seed` and `output_dir`; the `VLASOV_RENORM_OUT` environment variable overrides\n\
         `output_dir` when `--out` is absent.\n\n\
         | key | default | meaning |\n|---|---|---|\n",
    );
    for (key, doc) in KEY_DOCS {
        let default = lookup(&defaults, key).map_or_else(String::new, |v| v.to_string());
        out.push_str(&format!("| `{key}` | `{default}` | {doc} |\n"));
    }
    out
}
