//! Flat key-value configuration: JSON file, flag overrides, one aggregated
//! validation report.
//!
//! Every subcommand declares its keys up front; unknown keys, missing
//! required keys and out-of-range values are all collected into a single
//! error so a broken config is diagnosed in one run.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    SolveSingle,
    SweepScaling,
    KinkbandPath,
    KinkbandMaxwell,
    MultilayerSolve,
    PacketOptimum,
}

impl Subcommand {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "solve-single" => Some(Self::SolveSingle),
            "sweep-scaling" => Some(Self::SweepScaling),
            "kinkband-path" => Some(Self::KinkbandPath),
            "kinkband-maxwell" => Some(Self::KinkbandMaxwell),
            "multilayer-solve" => Some(Self::MultilayerSolve),
            "packet-optimum" => Some(Self::PacketOptimum),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::SolveSingle => "solve-single",
            Self::SweepScaling => "sweep-scaling",
            Self::KinkbandPath => "kinkband-path",
            Self::KinkbandMaxwell => "kinkband-maxwell",
            Self::MultilayerSolve => "multilayer-solve",
            Self::PacketOptimum => "packet-optimum",
        }
    }

    pub const ALL: [Subcommand; 6] = [
        Self::SolveSingle,
        Self::SweepScaling,
        Self::KinkbandPath,
        Self::KinkbandMaxwell,
        Self::MultilayerSolve,
        Self::PacketOptimum,
    ];
}

/// Value range of a numeric key.
#[derive(Debug, Clone, Copy)]
enum Range {
    Positive,
    NonNegative,
    /// Friction: `(0, 2]`.
    Friction,
    /// Integer `min..=max`.
    Count(u64, u64),
    /// Odd integer `>= 5`.
    OddNodes,
    Any,
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Number(Range),
    Integer(Range),
    Mode,
    Independent,
}

struct KeySpec {
    name: &'static str,
    kind: Kind,
    required: bool,
}

const fn req(name: &'static str, kind: Kind) -> KeySpec {
    KeySpec {
        name,
        kind,
        required: true,
    }
}

const fn opt(name: &'static str, kind: Kind) -> KeySpec {
    KeySpec {
        name,
        kind,
        required: false,
    }
}

fn schema(cmd: Subcommand) -> Vec<KeySpec> {
    use Kind::*;
    use Range::*;
    let mut keys = match cmd {
        Subcommand::SolveSingle => vec![
            req("B", Number(Positive)),
            req("q", Number(Positive)),
            req("m", Number(NonNegative)),
            opt("mode", Mode),
            opt("n_nodes", Integer(OddNodes)),
            opt("half_width", Number(Positive)),
            opt("gap_threshold", Number(Positive)),
        ],
        Subcommand::SweepScaling => vec![
            req("B", Number(Positive)),
            req("m", Number(Positive)),
            opt("mode", Mode),
            opt("q_min", Number(Positive)),
            opt("q_max", Number(Positive)),
            opt("n_q", Integer(Count(2, 10_000))),
            opt("min_void_nodes", Integer(Count(8, 100_000))),
            opt("half_width", Number(Positive)),
            opt("independent", Independent),
        ],
        Subcommand::KinkbandPath => vec![
            req("b", Number(Positive)),
            req("t", Number(Positive)),
            req("n_layers", Integer(Count(1, 1_000_000))),
            req("k", Number(Positive)),
            req("q", Number(Positive)),
            req("mu", Number(Friction)),
            opt("alpha_min", Number(Positive)),
            opt("alpha_max", Number(Positive)),
            opt("n_alpha", Integer(Count(2, 10_000_000))),
        ],
        Subcommand::KinkbandMaxwell => vec![
            req("b", Number(Positive)),
            req("t", Number(Positive)),
            req("n_layers", Integer(Count(1, 1_000_000))),
            req("k", Number(Positive)),
            req("q", Number(Positive)),
            req("mu", Number(Friction)),
        ],
        Subcommand::MultilayerSolve => vec![
            req("layers", Integer(Count(1, 16))),
            req("B", Number(Positive)),
            req("t", Number(Positive)),
            req("q", Number(Positive)),
            req("m", Number(NonNegative)),
            opt("mode", Mode),
            opt("n_nodes", Integer(OddNodes)),
            opt("half_width", Number(Positive)),
            opt("gap_threshold", Number(Positive)),
        ],
        Subcommand::PacketOptimum => vec![
            req("c_void", Number(NonNegative)),
            req("c_bend", Number(NonNegative)),
            req("B", Number(Positive)),
            req("q", Number(Positive)),
            req("m", Number(Positive)),
            opt("n_max", Integer(Count(2, 10_000_000))),
        ],
    };
    // accepted everywhere, recorded in the manifest; only randomized
    // property-test drivers consume it
    keys.push(opt("seed", Kind::Integer(Range::Any)));
    keys
}

/// A validated flat configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    values: BTreeMap<String, Value>,
}

#[derive(Debug)]
pub struct ConfigError {
    pub problems: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "invalid configuration ({} problems):",
            self.problems.len()
        )?;
        for p in &self.problems {
            writeln!(f, "  - {p}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    /// Merge a config file (optional) with command-line overrides and
    /// validate against the subcommand's schema. Flag values win.
    pub fn load(
        subcommand: Subcommand,
        config_path: Option<&Path>,
        overrides: &[(String, String)],
    ) -> Result<Self, ConfigError> {
        let mut problems = Vec::new();
        let mut values: BTreeMap<String, Value> = BTreeMap::new();

        if let Some(path) = config_path {
            match std::fs::read_to_string(path) {
                Ok(text) => match serde_json::from_str::<Value>(&text) {
                    Ok(Value::Object(map)) => {
                        for (k, v) in map {
                            values.insert(k, v);
                        }
                    }
                    Ok(other) => problems.push(format!(
                        "config file {} must hold a flat JSON object, got {other}",
                        path.display()
                    )),
                    Err(e) => problems.push(format!("config file {}: {e}", path.display())),
                },
                Err(e) => problems.push(format!("cannot read config file {}: {e}", path.display())),
            }
        }

        for (key, raw) in overrides {
            // flag values parse as JSON scalars when they can, bare strings
            // otherwise ("linearized" needs no quoting on the command line)
            let value =
                serde_json::from_str::<Value>(raw).unwrap_or_else(|_| Value::String(raw.clone()));
            values.insert(key.clone(), value);
        }

        let keys = schema(subcommand);
        for key in values.keys() {
            if !keys.iter().any(|s| s.name == key) {
                problems.push(format!(
                    "unknown key `{key}` for subcommand {}",
                    subcommand.name()
                ));
            }
        }
        for spec in &keys {
            match values.get(spec.name) {
                None => {
                    if spec.required {
                        problems.push(format!("missing required key `{}`", spec.name));
                    }
                }
                Some(v) => {
                    if let Err(p) = check_value(spec, v) {
                        problems.push(p);
                    }
                }
            }
        }

        if problems.is_empty() {
            Ok(Self { subcommand, values })
        } else {
            Err(ConfigError { problems })
        }
    }

    pub fn number(&self, key: &str) -> Option<f64> {
        self.values.get(key).and_then(Value::as_f64)
    }

    pub fn integer(&self, key: &str) -> Option<u64> {
        self.values.get(key).and_then(Value::as_u64)
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        self.values.get(key).and_then(Value::as_str)
    }

    pub fn mode(&self) -> layerfold::Mode {
        match self.text("mode") {
            Some("linearized") => layerfold::Mode::Linearized,
            _ => layerfold::Mode::Nonlinear,
        }
    }

    /// Effective configuration with defaults resolved, for the manifest.
    pub fn effective(&self) -> &BTreeMap<String, Value> {
        &self.values
    }

    pub fn record_default(&mut self, key: &str, value: Value) {
        self.values.entry(key.to_string()).or_insert(value);
    }
}

fn check_value(spec: &KeySpec, v: &Value) -> Result<(), String> {
    match spec.kind {
        Kind::Number(range) => {
            let Some(x) = v.as_f64() else {
                return Err(format!("key `{}`: expected a number, got {v}", spec.name));
            };
            check_range(spec.name, x, range)
        }
        Kind::Integer(range) => {
            let Some(x) = v.as_u64() else {
                return Err(format!(
                    "key `{}`: expected a nonnegative integer, got {v}",
                    spec.name
                ));
            };
            match range {
                Range::Count(lo, hi) => {
                    if x < lo || x > hi {
                        return Err(format!("key `{}`: {x} outside {lo}..={hi}", spec.name));
                    }
                    Ok(())
                }
                Range::OddNodes => {
                    if x < 5 || x % 2 == 0 {
                        return Err(format!(
                            "key `{}`: node count must be odd and at least 5, got {x}",
                            spec.name
                        ));
                    }
                    Ok(())
                }
                _ => Ok(()),
            }
        }
        Kind::Mode => match v.as_str() {
            Some("nonlinear") | Some("linearized") => Ok(()),
            _ => Err(format!(
                "key `{}`: expected \"nonlinear\" or \"linearized\", got {v}",
                spec.name
            )),
        },
        Kind::Independent => match v.as_str() {
            Some("q") | Some("B") | Some("B_over_q") => Ok(()),
            _ => Err(format!(
                "key `{}`: expected \"q\", \"B\" or \"B_over_q\", got {v}",
                spec.name
            )),
        },
    }
}

fn check_range(name: &str, x: f64, range: Range) -> Result<(), String> {
    if !x.is_finite() {
        return Err(format!("key `{name}`: value must be finite, got {x}"));
    }
    match range {
        Range::Positive if x <= 0.0 => Err(format!("key `{name}`: {x} must be positive")),
        Range::NonNegative if x < 0.0 => Err(format!("key `{name}`: {x} must be nonnegative")),
        Range::Friction if x <= 0.0 || x > 2.0 => Err(format!("key `{name}`: {x} outside (0, 2]")),
        _ => Ok(()),
    }
}
