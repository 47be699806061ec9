//! Evaluates sweep points: analytic measures, pricing bounds and optional
//! Monte Carlo estimates, plus table reproduction and comparison reports.

use std::time::Instant;

use rayon::prelude::*;
use reputation_core::analytics::baseline_measures;
use reputation_core::insurance::{
    deposit_bound_warning, insured_measures, max_insurance_price, min_clearing_time,
    min_deposit_threshold,
};
use reputation_core::simulator::{monte_carlo_measures, MonteCarloMeasures, Regime, SimConfig};
use reputation_core::{AnalyticsError, SimError};
use serde::Serialize;
use thiserror::Error;
use toml::Value;

use crate::config::{ConfigError, ExperimentConfig, ExperimentPoint};
use crate::output::{format_value, ResultRow, SimCell};
use crate::tables::{TableId, Tolerance};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("at {point}: {source}")]
    Analytics {
        point: String,
        source: AnalyticsError,
    },
    #[error("at {point}: {source}")]
    Sim { point: String, source: SimError },
}

impl RunError {
    /// Whether the failure stems from the inputs rather than the computation.
    pub fn is_config(&self) -> bool {
        match self {
            RunError::Config(_) => true,
            RunError::Analytics { source, .. } => matches!(source, AnalyticsError::Params(_)),
            RunError::Sim { source, .. } => {
                matches!(source, SimError::Params(_) | SimError::Config(_))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Fill `runtime_s`. Off by default so output is reproducible byte for byte.
    pub timing: bool,
    /// Simulate even if the config's `sim.enabled` is false.
    pub force_sim: bool,
}

fn describe(point: &ExperimentPoint) -> String {
    if point.values.is_empty() {
        "the base point".into()
    } else {
        point
            .values
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

fn simulate(point: &ExperimentPoint, regime: Regime) -> Result<MonteCarloMeasures, RunError> {
    let config = SimConfig {
        runs: point.sim.runs,
        seed: point.sim.seed,
        horizon_slots: point.sim.horizon_slots,
        regime,
    };
    monte_carlo_measures(&point.market, &config).map_err(|source| RunError::Sim {
        point: describe(point),
        source,
    })
}

fn sim_cells(m: &MonteCarloMeasures) -> [SimCell; 4] {
    let cell = |e: reputation_core::stats::EstimateWithCI| SimCell {
        mean: e.mean,
        stderr: e.stderr,
        n: e.n,
        truncated: 0,
    };
    let ramp = match m.ramp_up {
        Some(e) => cell(e),
        None => SimCell {
            mean: f64::INFINITY,
            stderr: f64::NAN,
            n: m.drop_out.n,
            truncated: m.truncated_runs.len() as u64,
        },
    };
    [
        ramp,
        cell(m.drop_out),
        cell(m.seller_gain),
        cell(m.operator_gain),
    ]
}

/// All rows for one point, in a fixed order: baseline measures, insured
/// measures and pricing bounds (with a policy), then warnings.
pub fn evaluate_point(
    point: &ExperimentPoint,
    options: RunOptions,
) -> Result<Vec<ResultRow>, RunError> {
    let values: Vec<String> = point.values.iter().map(|(_, v)| format_value(v)).collect();
    let analytics_err = |source| RunError::Analytics {
        point: describe(point),
        source,
    };
    let simulate_here = options.force_sim || point.sim.enabled;
    let mut rows = Vec::new();
    let mut push = |measure: &str, analytic: Option<f64>, sim: Option<SimCell>, elapsed: f64| {
        rows.push(ResultRow {
            values: values.clone(),
            measure: measure.to_string(),
            analytic,
            sim,
            runtime_s: options.timing.then_some(elapsed),
        });
    };

    let start = Instant::now();
    let base = baseline_measures(&point.market).map_err(analytics_err)?;
    let analytic_time = start.elapsed().as_secs_f64();
    let sim = if simulate_here {
        let start = Instant::now();
        let m = simulate(point, Regime::Baseline)?;
        Some((sim_cells(&m), start.elapsed().as_secs_f64()))
    } else {
        None
    };
    let base_values = [
        base.expected_ramp_up_days,
        base.drop_out_prob,
        base.seller_gain,
        base.operator_gain,
    ];
    for (i, name) in ["ramp_up", "drop_out", "seller_gain", "operator_gain"]
        .iter()
        .enumerate()
    {
        push(
            name,
            Some(base_values[i]),
            sim.map(|(c, _)| c[i]),
            analytic_time + sim.map_or(0.0, |(_, t)| t),
        );
    }

    let mut warnings = Vec::new();
    if let Some(policy) = &point.policy {
        let start = Instant::now();
        let ins = insured_measures(&point.market, policy).map_err(analytics_err)?;
        let analytic_time = start.elapsed().as_secs_f64();
        let sim = if simulate_here {
            let start = Instant::now();
            let m = simulate(point, Regime::Insured { policy: *policy })?;
            Some((sim_cells(&m), start.elapsed().as_secs_f64()))
        } else {
            None
        };
        let ins_values = [
            ins.expected_ramp_up_days,
            ins.drop_out_prob,
            ins.seller_gain,
            ins.operator_gain,
        ];
        for (i, name) in [
            "insured_ramp_up",
            "insured_drop_out",
            "insured_seller_gain",
            "insured_operator_gain",
        ]
        .iter()
        .enumerate()
        {
            push(
                name,
                Some(ins_values[i]),
                sim.map(|(c, _)| c[i]),
                analytic_time + sim.map_or(0.0, |(_, t)| t),
            );
        }

        let start = Instant::now();
        let price = max_insurance_price(&point.market, policy).map_err(analytics_err)?;
        push(
            "max_insurance_price",
            Some(price),
            None,
            start.elapsed().as_secs_f64(),
        );
        let start = Instant::now();
        let eps = point.pricing.epsilon;
        let deposit = min_deposit_threshold(eps, &point.market, policy).map_err(analytics_err)?;
        push(
            "min_deposit_threshold",
            Some(deposit),
            None,
            start.elapsed().as_secs_f64(),
        );
        push(
            "min_clearing_time",
            Some(min_clearing_time(&point.market)),
            None,
            0.0,
        );
        if let Some(w) = deposit_bound_warning(eps, &point.market, policy).map_err(analytics_err)? {
            log::warn!("{}: {}", describe(point), w.message);
            warnings.push(("warning:deposit_bound".to_string(), Some(deposit)));
        }
    }
    let market_warnings = point
        .market
        .validate()
        .map_err(|e| analytics_err(AnalyticsError::Params(e)))?;
    for w in market_warnings {
        log::warn!("{}: {}: {}", describe(point), w.field, w.message);
        warnings.push((format!("warning:{}", w.field), None));
    }
    for (name, value) in warnings {
        push(&name, value, None, 0.0);
    }
    Ok(rows)
}

/// Rows for every point of the sweep, grouped by point in sweep order.
pub fn evaluate_points(
    points: &[ExperimentPoint],
    options: RunOptions,
) -> Result<Vec<Vec<ResultRow>>, RunError> {
    points
        .par_iter()
        .map(|p| evaluate_point(p, options))
        .collect()
}

pub fn run_experiment(
    config: &ExperimentConfig,
    options: RunOptions,
) -> Result<Vec<ResultRow>, RunError> {
    let points = config.points()?;
    Ok(evaluate_points(&points, options)?
        .into_iter()
        .flatten()
        .collect())
}

/// Analytic value against simulation for one row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub values: Vec<String>,
    pub measure: String,
    pub analytic: f64,
    pub sim: SimCell,
    pub z: f64,
    pub flagged: bool,
    pub note: Option<String>,
}

pub const Z_THRESHOLD: f64 = 3.0;

/// Compares every simulated row. Proportions use the binomial standard
/// error at the analytic value; ramp-up rows with censored runs agree only
/// with an infinite analytic value.
pub fn compare_rows(rows: &[ResultRow]) -> Vec<Comparison> {
    rows.iter()
        .filter_map(|row| Some((row, row.analytic?, row.sim?)))
        .map(|(row, analytic, sim)| {
            let (z, note) = if sim.truncated > 0 {
                if analytic.is_infinite() && sim.truncated == sim.n {
                    (0.0, None)
                } else {
                    let note = format!(
                        "{} of {} runs never ramped up within the horizon",
                        sim.truncated, sim.n
                    );
                    (f64::INFINITY, Some(note))
                }
            } else if analytic.is_infinite() {
                (f64::INFINITY, Some("analytic value is infinite".into()))
            } else {
                let est = reputation_core::stats::EstimateWithCI {
                    mean: sim.mean,
                    stderr: sim.stderr,
                    n: sim.n,
                };
                let z = if row.measure.ends_with("drop_out") {
                    est.proportion_z_score(analytic)
                } else {
                    est.z_score(analytic)
                };
                (z, None)
            };
            Comparison {
                values: row.values.clone(),
                measure: row.measure.clone(),
                analytic,
                sim,
                z,
                flagged: z.is_nan() || z > Z_THRESHOLD,
                note,
            }
        })
        .collect()
}

pub fn compare(
    config: &ExperimentConfig,
    options: RunOptions,
) -> Result<(Vec<ResultRow>, Vec<Comparison>), RunError> {
    for p in config.points()? {
        if p.sim.runs < 100 {
            return Err(ConfigError::Invalid {
                section: "sim",
                reason: format!("comparison needs at least 100 runs, got {}", p.sim.runs),
            }
            .into());
        }
    }
    let rows = run_experiment(
        config,
        RunOptions {
            force_sim: true,
            ..options
        },
    )?;
    let comparisons = compare_rows(&rows);
    Ok((rows, comparisons))
}

/// One table cell against its printed value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellCheck {
    pub values: Vec<String>,
    pub measure: String,
    pub printed: f64,
    pub analytic: f64,
    pub tolerance: Tolerance,
    pub deviation: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct Reproduction {
    pub table: TableId,
    pub names: Vec<String>,
    pub rows: Vec<ResultRow>,
    pub checks: Vec<CellCheck>,
}

impl Reproduction {
    pub fn failures(&self) -> impl Iterator<Item = &CellCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn passed(&self) -> bool {
        self.failures().next().is_none()
    }
}

impl Serialize for Tolerance {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Simulation settings for [`reproduce_table`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOverride {
    pub runs: u64,
    pub seed: u64,
}

pub fn reproduce_table(
    table: TableId,
    sim: Option<SimOverride>,
    options: RunOptions,
) -> Result<Reproduction, RunError> {
    let mut config = table.config()?;
    if let Some(s) = sim {
        config.set("sim.enabled", Value::Boolean(true))?;
        config.set("sim.runs", to_integer("sim.runs", s.runs)?)?;
        config.set("sim.seed", to_integer("sim.seed", s.seed)?)?;
    }
    let points = config.points()?;
    let per_point = evaluate_points(&points, options)?;
    let printed = table.printed();
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for point_rows in per_point {
        for &measure in table.measures() {
            let row = point_rows
                .iter()
                .find(|r| r.measure == measure)
                .expect("every table measure is evaluated")
                .clone();
            let printed = printed[checks.len()];
            let analytic = row.analytic.expect("table measures are analytic");
            let tolerance = table.tolerance(measure);
            checks.push(CellCheck {
                values: row.values.clone(),
                measure: measure.to_string(),
                printed,
                analytic,
                tolerance,
                deviation: tolerance.deviation(analytic, printed),
                pass: tolerance.accepts(analytic, printed),
            });
            rows.push(row);
        }
    }
    Ok(Reproduction {
        table,
        names: config.sweep_names(),
        rows,
        checks,
    })
}

pub fn to_integer(key: &str, v: u64) -> Result<Value, ConfigError> {
    i64::try_from(v)
        .map(Value::Integer)
        .map_err(|_| ConfigError::Invalid {
            section: "override",
            reason: format!("{key} = {v} is too large"),
        })
}

/// The pricing bounds of one point, `(name, value)`.
pub fn price_point(point: &ExperimentPoint) -> Result<Vec<(&'static str, f64)>, RunError> {
    let policy = point.policy.as_ref().ok_or(ConfigError::Invalid {
        section: "policy",
        reason: "pricing needs a [policy] section".into(),
    })?;
    let err = |source| RunError::Analytics {
        point: describe(point),
        source,
    };
    let eps = point.pricing.epsilon;
    Ok(vec![
        (
            "max_insurance_price",
            max_insurance_price(&point.market, policy).map_err(err)?,
        ),
        (
            "min_deposit_threshold",
            min_deposit_threshold(eps, &point.market, policy).map_err(err)?,
        ),
        ("min_clearing_time", min_clearing_time(&point.market)),
    ])
}
