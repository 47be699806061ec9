//! Experiment configuration files.
//!
//! A config is TOML with the sections `market`, `policy`, `sim`, `pricing`,
//! `sweep` and `output`. `market` and `policy` override the reference
//! configuration key by key; a `policy` section enables the insured
//! measures. `sweep` maps dotted keys to value lists:
//!
//! ```toml
//! [market]
//! reputation_threshold = 100
//!
//! [market.adoption]
//! p_ba = 0.03
//!
//! [sweep]
//! "market.adoption.p_ba" = [0.01, 0.02, 0.03, 0.04, 0.05]
//! ```
//!
//! Unknown keys anywhere are errors.

use std::path::{Path, PathBuf};

use reputation_core::insurance::InsurancePolicy;
use reputation_core::market::MarketParams;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::{Table, Value};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("sweep entry `{key}`: {reason}")]
    Sweep { key: String, reason: String },
    #[error("invalid `{section}`: {reason}")]
    Invalid {
        section: &'static str,
        reason: String,
    },
}

const SECTIONS: [&str; 6] = ["market", "policy", "sim", "pricing", "sweep", "output"];
const SWEEPABLE: [&str; 4] = ["market", "policy", "sim", "pricing"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub enabled: bool,
    pub runs: u64,
    pub seed: u64,
    pub horizon_slots: u64,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            enabled: false,
            runs: 10_000,
            seed: 1,
            horizon_slots: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PricingSection {
    /// Failure probability for the deposit bound.
    pub epsilon: f64,
}

impl Default for PricingSection {
    fn default() -> Self {
        Self { epsilon: 1e-6 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
}

/// One fully resolved sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentPoint {
    /// `(dotted key, value)` for every swept key, in sweep order.
    pub values: Vec<(String, Value)>,
    pub market: MarketParams,
    pub policy: Option<InsurancePolicy>,
    pub sim: SimSection,
    pub pricing: PricingSection,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    raw: Table,
    sweep: Vec<(String, Vec<Value>)>,
    pub output: OutputSection,
}

/// Writes `overlay` onto `base`, rejecting keys `base` does not have. A
/// subtable whose `kind` changes replaces the base subtable outright.
fn overlay(base: &mut Table, overlay: &Table, prefix: &str) -> Result<(), ConfigError> {
    for (key, value) in overlay {
        let path = format!("{prefix}.{key}");
        let Some(slot) = base.get_mut(key) else {
            return Err(ConfigError::UnknownKey(path));
        };
        match (slot, value) {
            (Value::Table(b), Value::Table(o)) => {
                if o.get("kind").is_some_and(|k| Some(k) != b.get("kind")) {
                    *b = o.clone();
                } else {
                    overlay_table(b, o, &path)?;
                }
            }
            (slot, value) => *slot = value.clone(),
        }
    }
    Ok(())
}

fn overlay_table(base: &mut Table, o: &Table, path: &str) -> Result<(), ConfigError> {
    overlay(base, o, path)
}

fn section<'a>(raw: &'a Table, name: &'static str) -> Result<Option<&'a Table>, ConfigError> {
    match raw.get(name) {
        None => Ok(None),
        Some(Value::Table(t)) => Ok(Some(t)),
        Some(_) => Err(ConfigError::Invalid {
            section: name,
            reason: "must be a table".into(),
        }),
    }
}

fn resolve_over<T>(reference: &T, raw: &Table, name: &'static str) -> Result<T, ConfigError>
where
    T: Serialize + for<'de> Deserialize<'de>,
{
    let Value::Table(mut base) =
        Value::try_from(reference).map_err(|e| ConfigError::Parse(e.to_string()))?
    else {
        unreachable!("structs serialize to tables");
    };
    if let Some(user) = section(raw, name)? {
        overlay(&mut base, user, name)?;
    }
    Value::Table(base)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Invalid {
            section: name,
            reason: e.to_string(),
        })
}

fn resolve_plain<T>(raw: &Table, name: &'static str) -> Result<T, ConfigError>
where
    T: Default + for<'de> Deserialize<'de>,
{
    match section(raw, name)? {
        None => Ok(T::default()),
        Some(t) => Value::Table(t.clone())
            .try_into()
            .map_err(|e: toml::de::Error| {
                let reason = e.to_string();
                if reason.contains("unknown field") {
                    ConfigError::UnknownKey(format!("{name}: {}", reason.trim()))
                } else {
                    ConfigError::Invalid {
                        section: name,
                        reason,
                    }
                }
            }),
    }
}

fn resolve_point(
    raw: &Table,
    values: Vec<(String, Value)>,
) -> Result<ExperimentPoint, ConfigError> {
    let market: MarketParams = resolve_over(&MarketParams::reference(), raw, "market")?;
    market.validate().map_err(|e| ConfigError::Invalid {
        section: "market",
        reason: e.to_string(),
    })?;
    let policy = match section(raw, "policy")? {
        None => None,
        Some(_) => {
            let policy: InsurancePolicy =
                resolve_over(&InsurancePolicy::reference(), raw, "policy")?;
            policy
                .validate_for(&market)
                .map_err(|e| ConfigError::Invalid {
                    section: "policy",
                    reason: e.to_string(),
                })?;
            Some(policy)
        }
    };
    let sim: SimSection = resolve_plain(raw, "sim")?;
    if sim.runs == 0 {
        return Err(ConfigError::Invalid {
            section: "sim",
            reason: "runs must be at least 1".into(),
        });
    }
    let pricing: PricingSection = resolve_plain(raw, "pricing")?;
    if !(pricing.epsilon > 0.0 && pricing.epsilon < 1.0) {
        return Err(ConfigError::Invalid {
            section: "pricing",
            reason: "epsilon must lie in (0, 1)".into(),
        });
    }
    Ok(ExperimentPoint {
        values,
        market,
        policy,
        sim,
        pricing,
    })
}

/// Sets a dotted key, creating intermediate tables.
fn set_dotted(raw: &mut Table, key: &str, value: Value) -> Result<(), String> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().ok_or("empty key")?;
    let mut table = raw;
    for part in parts {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| format!("`{part}` is not a table"))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw: Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        for key in raw.keys() {
            if !SECTIONS.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey(key.clone()));
            }
        }
        let mut sweep = Vec::new();
        if let Some(table) = section(&raw, "sweep")? {
            for (key, values) in table {
                let Value::Array(values) = values else {
                    return Err(ConfigError::Sweep {
                        key: key.clone(),
                        reason: "values must be a list".into(),
                    });
                };
                if values.is_empty() {
                    return Err(ConfigError::Sweep {
                        key: key.clone(),
                        reason: "value list is empty".into(),
                    });
                }
                if !SWEEPABLE.iter().any(|s| key.starts_with(&format!("{s}."))) {
                    return Err(ConfigError::Sweep {
                        key: key.clone(),
                        reason: format!("key must start with one of {SWEEPABLE:?}"),
                    });
                }
                sweep.push((key.clone(), values.clone()));
            }
        }
        let output: OutputSection = resolve_plain(&raw, "output")?;
        let mut raw = raw;
        raw.remove("sweep");
        raw.remove("output");
        let config = Self { raw, sweep, output };
        config.points()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.into(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn sweep_names(&self) -> Vec<String> {
        self.sweep.iter().map(|(k, _)| k.clone()).collect()
    }

    /// Overrides a key for every point, e.g. `("sim.seed", 7)`.
    pub fn set(&mut self, key: &str, value: Value) -> Result<(), ConfigError> {
        set_dotted(&mut self.raw, key, value).map_err(|reason| ConfigError::Invalid {
            section: "override",
            reason,
        })?;
        self.sweep.retain(|(k, _)| k != key);
        self.points().map(|_| ())
    }

    /// All sweep points in row-major order (the first sweep key varies slowest).
    pub fn points(&self) -> Result<Vec<ExperimentPoint>, ConfigError> {
        let mut combos: Vec<Vec<(String, Value)>> = vec![Vec::new()];
        for (key, values) in &self.sweep {
            combos = combos
                .into_iter()
                .flat_map(|prefix| {
                    values.iter().map(move |v| {
                        let mut next = prefix.clone();
                        next.push((key.clone(), v.clone()));
                        next
                    })
                })
                .collect();
        }
        combos
            .into_iter()
            .map(|values| {
                let mut raw = self.raw.clone();
                for (key, value) in &values {
                    set_dotted(&mut raw, key, value.clone()).map_err(|reason| {
                        ConfigError::Sweep {
                            key: key.clone(),
                            reason,
                        }
                    })?;
                }
                resolve_point(&raw, values.clone()).map_err(|e| match values.last() {
                    Some(_) if !values.is_empty() => ConfigError::Sweep {
                        key: values
                            .iter()
                            .map(|(k, v)| format!("{k}={v}"))
                            .collect::<Vec<_>>()
                            .join(", "),
                        reason: e.to_string(),
                    },
                    _ => e,
                })
            })
            .collect()
    }
}
