//! End-to-end checks of the `repsim` binary and the sweep runner.

use std::path::Path;
use std::process::{Command, Output};

use reputation_experiments::{
    compare, reproduce_table, run_experiment, ExperimentConfig, RunOptions, TableId,
};

fn repsim(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_repsim"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .env_remove("REPSIM_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(
        dir.path(),
        "good.toml",
        "[market]\nreputation_threshold = 50\n",
    );
    let bad = write(
        dir.path(),
        "bad.toml",
        "[market]\nreputation_treshold = 50\n",
    );
    let bad_sweep = write(
        dir.path(),
        "sweep.toml",
        "[sweep]\n\"market.adoption.p_ba\" = [0.05, 0.5]\n",
    );

    let out = repsim(&["run", &good], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("measure,analytic,sim_mean,sim_stderr,runtime_s\n"));

    let out = repsim(&["run", &bad], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("reputation_treshold"));

    let out = repsim(&["run", &bad_sweep], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("market.adoption.p_ba=0.5"));

    let out = repsim(&["run", "missing.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let out = repsim(&["reproduce", "table3"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 16);

    // One cell of this table disagrees with its printed value by 0.2 days.
    let out = repsim(&["reproduce", "table2"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("FAIL ramp_up [200, 5.0000000000000000e0]")
    );
}

#[test]
fn output_is_reproducible_and_lands_in_the_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "sim.toml",
        "[sim]\nenabled = true\nruns = 500\nseed = 3\n[policy]\nduration = 30.0\n[output]\npath = \"out/sim.csv\"\n\
         [sweep]\n\"market.reputation_threshold\" = [40, 80]\n",
    );
    let target = dir.path().join("results");
    let run = || {
        let out = Command::new(env!("CARGO_BIN_EXE_repsim"))
            .args(["run", &config])
            .env("REPSIM_OUTPUT_DIR", &target)
            .env("RUST_LOG", "warn")
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        std::fs::read(target.join("out/sim.csv")).unwrap()
    };
    let first = run();
    assert_eq!(first, run());

    let out = repsim(
        &["--seed", "4", "--output", "other.csv", "run", &config],
        dir.path(),
    );
    assert!(out.status.success());
    let other = std::fs::read(dir.path().join("other.csv")).unwrap();
    assert_ne!(first, other);
    assert_eq!(
        String::from_utf8(other).unwrap().lines().count(),
        1 + 2 * 12
    );
}

#[test]
fn resolved_parameters_are_logged() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "c.toml", "[market]\npatience = 90.0\n");
    let out = Command::new(env!("CARGO_BIN_EXE_repsim"))
        .args(["run", &config])
        .env("RUST_LOG", "info")
        .output()
        .unwrap();
    let log = String::from_utf8_lossy(&out.stderr);
    assert!(log.contains("\"patience\":90.0"), "{log}");
    assert!(log.contains("\"reputation_threshold\":100"));
}

#[test]
fn price_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "p.toml", "[policy]\nduration = 0.0\n");
    let out = repsim(
        &["price", &config, "--epsilon", "4.5399929762484854e-5"],
        dir.path(),
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    // With no coverage the bound is C_S · ln(1/ε) = 0.5 · 10.
    assert!(
        text.contains("min_deposit_threshold = 5.0000000000000"),
        "{text}"
    );
    assert!(
        text.contains("max_insurance_price = 0.0000000000000000e0"),
        "{text}"
    );
    assert!(text.contains("min_clearing_time = 3.0000000000000000e0"));

    let none = write(dir.path(), "n.toml", "");
    assert_eq!(repsim(&["price", &none], dir.path()).status.code(), Some(2));
}

#[test]
fn sweep_reproduces_a_table_row() {
    let config = ExperimentConfig::parse(
        "[market]\nreputation_threshold = 100\n[sweep]\n\"market.adoption.p_ba\" = [0.01, 0.02, 0.03, 0.04, 0.05]\n",
    )
    .unwrap();
    let rows = run_experiment(&config, RunOptions::default()).unwrap();
    let gains: Vec<f64> = rows
        .iter()
        .filter(|r| r.measure == "seller_gain")
        .map(|r| r.analytic.unwrap())
        .collect();
    let printed = [26.941, 54.433, 760.511, 1054.507, 1142.670];
    for (g, p) in gains.iter().zip(printed) {
        assert!((g / p - 1.0).abs() < 0.01, "{g} vs {p}");
    }
}

#[test]
fn zero_duration_policy_matches_baseline() {
    let config = ExperimentConfig::parse(
        "[policy]\nduration = 0.0\n[sweep]\n\"market.reputation_threshold\" = [50, 150]\n",
    )
    .unwrap();
    let rows = run_experiment(&config, RunOptions::default()).unwrap();
    for point in rows.chunks(rows.len() / 2) {
        for m in ["ramp_up", "drop_out", "seller_gain", "operator_gain"] {
            let get = |name: &str| {
                point
                    .iter()
                    .find(|r| r.measure == name)
                    .unwrap()
                    .analytic
                    .unwrap()
            };
            let (a, b) = (get(m), get(&format!("insured_{m}")));
            assert!(
                (a - b).abs() <= 1e-9 * a.abs().max(1e-300),
                "{m}: {a} vs {b}"
            );
        }
    }
}

#[test]
fn zero_rate_seller_agrees_exactly() {
    let config = ExperimentConfig::parse(
        "[market.adoption]\np_ba = 0.0\n[sim]\nruns = 200\nhorizon_slots = 500\n[policy]\nduration = 0.0\n",
    )
    .unwrap();
    let (rows, comparisons) = compare(&config, RunOptions::default()).unwrap();
    assert_eq!(rows[0].analytic, Some(f64::INFINITY));
    assert_eq!(comparisons.len(), 8);
    for c in &comparisons {
        assert!(!c.flagged, "{c:?}");
        assert_eq!(c.z, 0.0, "{c:?}");
    }
}

#[test]
fn table5_matches_with_simulation() {
    let rep = reproduce_table(
        TableId::Table5,
        Some(reputation_experiments::SimOverride {
            runs: 2_000,
            seed: 5,
        }),
        RunOptions::default(),
    )
    .unwrap();
    assert!(rep.passed());
    assert_eq!(rep.rows.len(), 24);
    let flagged: Vec<_> = reputation_experiments::compare_rows(&rep.rows)
        .into_iter()
        .filter(|c| c.flagged)
        .collect();
    assert!(flagged.is_empty(), "{flagged:?}");
}
