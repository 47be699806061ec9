//! Published values of the four reference tables and their tolerances.

use std::fmt;
use std::str::FromStr;

use crate::config::{ConfigError, ExperimentConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TableId {
    Table2,
    Table3,
    Table4,
    Table5,
}

impl TableId {
    pub const ALL: [TableId; 4] = [
        TableId::Table2,
        TableId::Table3,
        TableId::Table4,
        TableId::Table5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TableId::Table2 => "table2",
            TableId::Table3 => "table3",
            TableId::Table4 => "table4",
            TableId::Table5 => "table5",
        }
    }

    fn source(self) -> &'static str {
        match self {
            TableId::Table2 => include_str!("../configs/table2.toml"),
            TableId::Table3 => include_str!("../configs/table3.toml"),
            TableId::Table4 => include_str!("../configs/table4.toml"),
            TableId::Table5 => include_str!("../configs/table5.toml"),
        }
    }

    /// The sweep that generates the table, one point per column/row pair.
    pub fn config(self) -> Result<ExperimentConfig, ConfigError> {
        ExperimentConfig::parse(self.source())
    }

    /// Measures reported per sweep point, in output order.
    pub fn measures(self) -> &'static [&'static str] {
        match self {
            TableId::Table2 => &["ramp_up"],
            TableId::Table3 => &["drop_out"],
            TableId::Table4 => &["seller_gain", "operator_gain"],
            TableId::Table5 => &[
                "ramp_up",
                "insured_ramp_up",
                "drop_out",
                "insured_drop_out",
                "seller_gain",
                "insured_seller_gain",
                "operator_gain",
                "insured_operator_gain",
            ],
        }
    }

    /// Printed values in sweep-point order; within a point, in the order of
    /// [`measures`](Self::measures).
    pub fn printed(self) -> Vec<f64> {
        match self {
            TableId::Table2 => vec![
                2001.7, 1001.4, 668.2, 501.5, 401.6, //
                1501.4, 751.5, 501.5, 376.5, 301.5, //
                1001.4, 501.5, 334.8, 251.5, 201.5,
            ],
            TableId::Table3 => vec![
                1.00000, 1.00000, 1.00000, 0.99999, 0.92514, //
                1.00000, 1.00000, 0.99992, 0.68056, 0.00991, //
                1.00000, 0.99897, 0.20819, 0.00005, 0.00000,
            ],
            TableId::Table4 => {
                let gs = [
                    [26.833, 53.342, 80.705, 107.312, 198.059],
                    [26.980, 53.594, 80.812, 369.951, 1006.017],
                    [26.941, 54.433, 760.511, 1054.507, 1142.670],
                ];
                let ge = [
                    [2.6833, 5.3342, 8.0705, 10.7312, 19.8059],
                    [2.6980, 5.3594, 8.0812, 36.9951, 100.6017],
                    [2.6941, 5.4433, 76.0511, 105.4507, 114.2670],
                ];
                (0..3)
                    .flat_map(|r| (0..5).flat_map(move |c| [gs[r][c], ge[r][c]]))
                    .collect()
            }
            TableId::Table5 => vec![
                168.1, 21.5, 0.20819, 0.0, 760.51, 1485.04, 76.051, 148.504, //
                251.6, 31.5, 0.99992, 0.0, 80.81, 1485.03, 8.081, 148.503, //
                334.9, 41.5, 1.0, 0.0, 80.71, 1485.01, 8.071, 148.501,
            ],
        }
    }

    /// Acceptable deviation from a printed value.
    pub fn tolerance(self, measure: &str) -> Tolerance {
        match measure {
            "ramp_up" | "insured_ramp_up" => Tolerance::Absolute(0.1),
            "drop_out" => Tolerance::Absolute(1e-4),
            "insured_drop_out" => Tolerance::Absolute(1e-12),
            _ => Tolerance::Relative(0.01),
        }
    }
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TableId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TableId::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| {
                format!("unknown table `{s}`; expected one of table2, table3, table4, table5")
            })
    }
}

/// Slack for values printed with fewer digits than they are compared at,
/// so that an exact difference of 0.1 is not lost to rounding.
const COMPARISON_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance {
    Absolute(f64),
    Relative(f64),
}

impl Tolerance {
    /// Deviation in the tolerance's own units (absolute or relative).
    pub fn deviation(self, value: f64, printed: f64) -> f64 {
        match self {
            Tolerance::Absolute(_) => (value - printed).abs(),
            Tolerance::Relative(_) => {
                if printed == 0.0 {
                    value.abs()
                } else {
                    ((value - printed) / printed).abs()
                }
            }
        }
    }

    pub fn bound(self) -> f64 {
        match self {
            Tolerance::Absolute(t) | Tolerance::Relative(t) => t,
        }
    }

    pub fn accepts(self, value: f64, printed: f64) -> bool {
        self.deviation(value, printed) <= self.bound() * (1.0 + COMPARISON_SLACK)
    }
}

impl fmt::Display for Tolerance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tolerance::Absolute(t) => write!(f, "±{t}"),
            Tolerance::Relative(t) => write!(f, "±{}%", t * 100.0),
        }
    }
}
