//! Layered run configuration: built-in defaults, then a TOML file, then
//! `WANDERODE_` environment variables, then command-line flags.
//!
//! Every setting has a dotted key such as `model.K` or `walk.seed`. In a
//! file the part before the dot is the table name:
//!
//! ```toml
//! [model]
//! K = 60
//! eps = 0.1
//! ```
//!
//! In the environment the dot becomes a double underscore and case is
//! ignored: `WANDERODE_MODEL__K=60`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::CliError;

pub const ENV_PREFIX: &str = "WANDERODE_";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Float,
    Int,
    Text,
    FloatList,
}

pub struct KeySpec {
    pub key: &'static str,
    pub kind: Kind,
    /// `None` means required, or derived from other keys when unset.
    pub default: Option<&'static str>,
    pub help: &'static str,
}

const fn key(
    key: &'static str,
    kind: Kind,
    default: Option<&'static str>,
    help: &'static str,
) -> KeySpec {
    KeySpec {
        key,
        kind,
        default,
        help,
    }
}

use Kind::*;

pub const KEYS: &[KeySpec] = &[
    key("model.K", Float, None, "cubic gain K"),
    key("model.eps", Float, Some("0.1"), "time-scale ratio ε"),
    key(
        "model.gamma",
        Float,
        Some("1"),
        "rate γ of the slow variable",
    ),
    key("model.a1", Float, Some("-0.01"), "left root of the cubic"),
    key("model.a2", Float, Some("0.1"), "right root of the cubic"),
    key("model.b", Float, Some("11.9"), "slope of the v-nullcline"),
    key(
        "model.c",
        Float,
        Some("6.6e-4"),
        "offset of the v-nullcline",
    ),
    key(
        "integrate.dt",
        Float,
        None,
        "step in ms [default: min(0.01, ε/10)]",
    ),
    key("integrate.t_end", Float, Some("2000"), "final time in ms"),
    key(
        "integrate.stride",
        Int,
        None,
        "keep every n-th step [default: 1, stochastic runs: one sample per 0.1 ms]",
    ),
    key(
        "integrate.transient",
        Float,
        Some("500"),
        "ms ignored by measurements",
    ),
    key(
        "integrate.floor",
        Float,
        Some("1e-12"),
        "lower bound applied to u and v",
    ),
    key("integrate.u0", Float, Some("0.05"), "initial u"),
    key("integrate.v0", Float, Some("0.1"), "initial v"),
    key(
        "period.crossings",
        Int,
        Some("10"),
        "section crossings averaged for the period",
    ),
    key("hopf.K_min", Float, Some("30"), "first K of the Hopf curve"),
    key("hopf.K_max", Float, Some("100"), "last K of the Hopf curve"),
    key("hopf.samples", Int, Some("71"), "rows of the Hopf curve"),
    key(
        "sweep.eps_min",
        Float,
        Some("0.05"),
        "smallest ε of the grid",
    ),
    key(
        "sweep.eps_max",
        Float,
        Some("0.45"),
        "largest ε of the grid",
    ),
    key("sweep.eps_n", Int, Some("9"), "ε grid points"),
    key("sweep.K_min", Float, Some("30"), "smallest K of the grid"),
    key("sweep.K_max", Float, Some("100"), "largest K of the grid"),
    key("sweep.K_n", Int, Some("8"), "K grid points"),
    key("walk.K_min", Float, Some("30"), "lower bound of K"),
    key("walk.K_max", Float, Some("100"), "upper bound of K"),
    key("walk.eps_min", Float, Some("0.04"), "lower bound of ε"),
    key("walk.eps_max", Float, Some("0.1"), "upper bound of ε"),
    key("walk.f_min", Float, Some("0.2"), "lower bound of εγ"),
    key("walk.f_max", Float, Some("0.5"), "upper bound of εγ"),
    key(
        "walk.interval",
        Float,
        Some("0.1"),
        "ms between coefficient updates",
    ),
    key("walk.K_step", Float, Some("0.1"), "relative step of K"),
    key("walk.eps_step", Float, Some("0.01"), "step of ε"),
    key("walk.gamma_step", Float, Some("0.1"), "step of γ"),
    key(
        "walk.max_redraws",
        Int,
        Some("1000"),
        "draws allowed per γ update",
    ),
    key("walk.seed", Int, Some("1"), "random seed"),
    key(
        "walk.runs",
        Int,
        Some("1"),
        "independent runs with seeds seed, seed+1, ...",
    ),
    key(
        "walk.K0",
        Float,
        None,
        "initial K [default: midpoint of the K range]",
    ),
    key(
        "walk.eps0",
        Float,
        None,
        "initial ε [default: midpoint of the ε range]",
    ),
    key(
        "walk.gamma0",
        Float,
        None,
        "initial γ [default: εγ at the midpoint of its range]",
    ),
    key("spectral.window", Float, Some("200"), "window length in ms"),
    key(
        "spectral.shift",
        Float,
        Some("0.1"),
        "shift between windows in ms",
    ),
    key(
        "spectral.t0",
        Float,
        Some("500"),
        "first window start in ms",
    ),
    key(
        "spectral.t1",
        Float,
        Some("2500"),
        "end of the analysed span in ms",
    ),
    key(
        "spectral.sample_dt",
        Float,
        Some("0.1"),
        "sampling step of the analysed signal in ms",
    ),
    key(
        "spectral.channel",
        Text,
        Some("v"),
        "u, v, u_bar or e_current",
    ),
    key(
        "spectral.band_lo",
        Float,
        Some("20"),
        "lower edge of the peak search band in Hz",
    ),
    key(
        "spectral.band_hi",
        Float,
        Some("120"),
        "upper edge of the peak search band in Hz",
    ),
    key("canard.entry_k", Float, Some("1"), "entry point x(0) = k ε"),
    key(
        "canard.eps_list",
        FloatList,
        Some("1e-3,1e-4,1e-5"),
        "decreasing ε values",
    ),
    key(
        "canard.dt_fraction",
        Float,
        Some("0.01"),
        "step as a fraction of ε",
    ),
    key(
        "canard.t_end",
        Float,
        Some("100"),
        "give up after this many ms",
    ),
];

pub fn entry(key: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|k| k.key == key)
}

fn entry_ignore_case(key: &str) -> Option<&'static KeySpec> {
    entry(key).or_else(|| KEYS.iter().find(|k| k.key.eq_ignore_ascii_case(key)))
}

pub fn keys_in<'a>(sections: &'a [&'a str]) -> impl Iterator<Item = &'static KeySpec> + 'a {
    KEYS.iter()
        .filter(move |k| sections.iter().any(|s| k.key.split('.').next() == Some(*s)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Value {
    Float(f64),
    Int(i64),
    Text(String),
    FloatList(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Default,
    File,
    Env,
    Flag,
}

fn parse_as(kind: Kind, key: &str, raw: &str) -> Result<Value, CliError> {
    let bad = |what: &str| CliError::Usage(format!("{key}: expected {what}, got {raw:?}"));
    let raw = raw.trim();
    match kind {
        Float => raw.parse().map(Value::Float).map_err(|_| bad("a number")),
        Int => raw.parse().map(Value::Int).map_err(|_| bad("an integer")),
        Text => Ok(Value::Text(raw.to_string())),
        FloatList => raw
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map(Value::FloatList)
            .map_err(|_| bad("a comma-separated list of numbers")),
    }
}

fn from_toml(kind: Kind, key: &str, v: &toml::Value) -> Result<Value, CliError> {
    let bad = || CliError::Usage(format!("{key}: value {v} has the wrong type"));
    match (kind, v) {
        (Float, toml::Value::Float(x)) => Ok(Value::Float(*x)),
        (Float, toml::Value::Integer(i)) => Ok(Value::Float(*i as f64)),
        (Int, toml::Value::Integer(i)) => Ok(Value::Int(*i)),
        (Text, toml::Value::String(s)) => Ok(Value::Text(s.clone())),
        (FloatList, toml::Value::Array(items)) => items
            .iter()
            .map(|x| match x {
                toml::Value::Float(f) => Ok(*f),
                toml::Value::Integer(i) => Ok(*i as f64),
                _ => Err(bad()),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Value::FloatList),
        (_, toml::Value::String(s)) => parse_as(kind, key, s),
        _ => Err(bad()),
    }
}

/// Effective settings with the layer each one came from.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    values: BTreeMap<&'static str, (Value, Source)>,
}

impl RunConfig {
    pub fn defaults() -> Self {
        let mut values = BTreeMap::new();
        for k in KEYS {
            if let Some(d) = k.default {
                values.insert(
                    k.key,
                    (
                        parse_as(k.kind, k.key, d).expect("valid default"),
                        Source::Default,
                    ),
                );
            }
        }
        Self { values }
    }

    fn set(&mut self, key: &str, value: Value, source: Source) -> Result<(), CliError> {
        let entry = entry_ignore_case(key)
            .ok_or_else(|| CliError::Usage(format!("unknown key {key:?}")))?;
        self.values.insert(entry.key, (value, source));
        Ok(())
    }

    pub fn set_raw(&mut self, key: &str, raw: &str, source: Source) -> Result<(), CliError> {
        let entry = entry_ignore_case(key)
            .ok_or_else(|| CliError::Usage(format!("unknown key {key:?}")))?;
        let value = parse_as(entry.kind, entry.key, raw)?;
        self.set(entry.key, value, source)
    }

    pub fn merge_toml_str(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e| CliError::Usage(format!("{origin}: {e}")))?;
        for (section, body) in &table {
            let toml::Value::Table(body) = body else {
                return Err(CliError::Usage(format!(
                    "{origin}: top-level key {section:?} must be a table"
                )));
            };
            for (name, v) in body {
                let dotted = format!("{section}.{name}");
                let entry = entry_ignore_case(&dotted)
                    .ok_or_else(|| CliError::Usage(format!("{origin}: unknown key {dotted:?}")))?;
                let value = from_toml(entry.kind, entry.key, v)?;
                self.set(entry.key, value, Source::File)?;
            }
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            stage: "reading config",
            path: path.display().to_string(),
            source: e,
        })?;
        self.merge_toml_str(&text, &path.display().to_string())
    }

    pub fn merge_env<I>(&mut self, vars: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        for (name, raw) in vars {
            let Some(rest) = name.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let dotted = rest.replacen("__", ".", 1);
            if entry_ignore_case(&dotted).is_none() {
                return Err(CliError::Usage(format!(
                    "unknown environment variable {name}"
                )));
            }
            self.set_raw(&dotted, &raw, Source::Env)?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        debug_assert!(entry(key).is_some(), "unregistered key {key}");
        self.values.get(key).map(|(v, _)| v)
    }

    pub fn source(&self, key: &str) -> Option<Source> {
        self.values.get(key).map(|(_, s)| *s)
    }

    pub fn float_opt(&self, key: &str) -> Option<f64> {
        match self.get(key) {
            Some(Value::Float(x)) => Some(*x),
            Some(Value::Int(i)) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn float(&self, key: &str) -> Result<f64, CliError> {
        self.float_opt(key)
            .ok_or_else(|| CliError::Usage(format!("missing required key {key} (set --{key})")))
    }

    pub fn int_opt(&self, key: &str) -> Option<i64> {
        match self.get(key) {
            Some(Value::Int(i)) => Some(*i),
            _ => None,
        }
    }

    pub fn int(&self, key: &str) -> Result<i64, CliError> {
        self.int_opt(key)
            .ok_or_else(|| CliError::Usage(format!("missing required key {key} (set --{key})")))
    }

    pub fn count(&self, key: &str) -> Result<usize, CliError> {
        let i = self.int(key)?;
        usize::try_from(i)
            .map_err(|_| CliError::Usage(format!("{key} must be non-negative, got {i}")))
    }

    pub fn text(&self, key: &str) -> Result<&str, CliError> {
        match self.get(key) {
            Some(Value::Text(s)) => Ok(s),
            _ => Err(CliError::Usage(format!("missing required key {key}"))),
        }
    }

    pub fn list(&self, key: &str) -> Result<&[f64], CliError> {
        match self.get(key) {
            Some(Value::FloatList(v)) => Ok(v),
            _ => Err(CliError::Usage(format!("missing required key {key}"))),
        }
    }

    /// The settings of the given sections, for the manifest.
    pub fn echo(&self, sections: &[&str]) -> BTreeMap<String, serde_json::Value> {
        keys_in(sections)
            .filter_map(|k| {
                self.values.get(k.key).map(|(v, s)| {
                    (
                        k.key.to_string(),
                        serde_json::json!({ "value": v, "source": s }),
                    )
                })
            })
            .collect()
    }
}
