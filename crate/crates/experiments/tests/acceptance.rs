//! Acceptance suite: one PASS/FAIL line per criterion, with pinned
//! tolerances and runtime budgets.
//!
//! Two published cells disagree with their exact values (`KNOWN_DEVIATIONS`)
//! and one pinned-seed estimate falls just outside 3 standard errors
//! (`KNOWN_EXCURSIONS`). Their criteria are reported as FAIL, but the process
//! only exits nonzero on failures outside those lists.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use reputation_core::analytics::{drop_out_probability, expected_ramp_up_time};
use reputation_core::insurance::{
    deposit_bound_warning, max_insurance_price, min_clearing_time, min_deposit_threshold,
    InsurancePolicy,
};
use reputation_core::market::{transaction_rate, AdoptionModel, MarketParams, SellerLabel};
use reputation_core::numerics::{
    erlang_pdf, integrate_1d, poisson_cdf, poisson_pmf, poisson_sf, uniform_ceil_discount_mean,
    DiscountSpec,
};
use reputation_core::simulator::{adversarial_protocol_audit, AuditReport, Regime, SimConfig};
use reputation_core::stats::EstimateWithCI;
use reputation_experiments::{compare, reproduce_table, ExperimentConfig, RunOptions, TableId};

include!("../../core/tests/oracle/poisson_table.rs");

/// `(config, measure)` pairs of the cross-validation whose 1e5-run estimate
/// lands just outside 3 standard errors at the pinned seed. Config 0 seller
/// and operator gain: z = 3.60 at seed 1000; independent 4e5-run batches at
/// seeds 1, 2, 3 give z = 1.14, 2.33, 0.52 with mixed signs.
const KNOWN_EXCURSIONS: [(usize, &str); 2] = [(0, "seller_gain"), (0, "operator_gain")];

/// `(table, measure, cell)` whose printed value is off from the exact one
/// by more than the tolerance.
const KNOWN_DEVIATIONS: [(TableId, &str, &str); 3] = [
    // λ1 = 5, r_h = 200: the exact value is 2001.5 (printed 2001.7).
    (TableId::Table2, "ramp_up", "200, 5.0000000000000000e0"),
    // P_ba = 0.05, r_h = 200: the exact G_s is 196.05 (printed 198.059).
    (TableId::Table4, "seller_gain", "200, 5.0000000000000003e-2"),
    (
        TableId::Table4,
        "operator_gain",
        "200, 5.0000000000000003e-2",
    ),
];

#[derive(Default)]
struct Check {
    failures: Vec<String>,
    known: Vec<String>,
    notes: Vec<String>,
}

impl Check {
    fn require(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }
}

fn table_check(check: &mut Check, table: TableId) {
    let rep = reproduce_table(table, None, RunOptions::default()).expect("table evaluates");
    for c in rep.failures() {
        let cell = c.values.join(", ");
        let line = format!(
            "{table} {} [{cell}]: computed {:.6}, printed {} (deviation {:.3e}, tolerance {})",
            c.measure, c.analytic, c.printed, c.deviation, c.tolerance
        );
        if KNOWN_DEVIATIONS
            .iter()
            .any(|&(t, m, v)| t == table && m == c.measure && v == cell)
        {
            check.known.push(line);
        } else {
            check.failures.push(line);
        }
    }
    check.note(format!(
        "{} of {} cells within tolerance",
        rep.checks.len() - rep.failures().count(),
        rep.checks.len()
    ));
}

fn criterion_1() -> Check {
    let mut check = Check::default();
    table_check(&mut check, TableId::Table2);
    check
}

fn criterion_2() -> Check {
    let mut check = Check::default();
    table_check(&mut check, TableId::Table3);
    check
}

fn criterion_3() -> Check {
    let mut check = Check::default();
    table_check(&mut check, TableId::Table4);
    let rep = reproduce_table(TableId::Table4, None, RunOptions::default()).unwrap();
    for pair in rep.checks.chunks(2) {
        let (gs, ge) = (&pair[0], &pair[1]);
        // u = 1, αp = 0.1
        check.require(ge.analytic == 0.1 * gs.analytic, || {
            format!(
                "G_e = {} is not 0.1 · G_s = {} at [{}]",
                ge.analytic,
                gs.analytic,
                gs.values.join(", ")
            )
        });
    }
    check
}

fn criterion_4() -> Check {
    let mut check = Check::default();
    table_check(&mut check, TableId::Table5);
    let rep = reproduce_table(TableId::Table5, None, RunOptions::default()).unwrap();
    let at = |r_h: &str, m: &str| {
        rep.checks
            .iter()
            .find(|c| c.values[0] == r_h && c.measure == m)
            .unwrap()
            .analytic
    };
    let ramp_cut = 1.0 - at("100", "insured_ramp_up") / at("100", "ramp_up");
    let gain_rise = at("100", "insured_seller_gain") / at("100", "seller_gain") - 1.0;
    // The reduction inherits the 0.1-day tolerance (worth under 0.1 points);
    // the improvement is a ratio of two gains and inherits their 1%.
    check.require((ramp_cut - 0.872).abs() <= 0.001, || {
        format!("ramp-up reduction {:.2}% vs 87.2%", 100.0 * ramp_cut)
    });
    check.require(((1.0 + gain_rise) / 1.953 - 1.0).abs() <= 0.01, || {
        format!("G_s improvement {:.2}% vs 95.3%", 100.0 * gain_rise)
    });
    check.note(format!(
        "ramp-up -{:.2}%, G_s +{:.2}% at r_h = 100",
        100.0 * ramp_cut,
        100.0 * gain_rise
    ));
    for r_h in ["100", "150", "200"] {
        let pd = at(r_h, "insured_drop_out");
        check.require(pd <= 1e-12, || format!("P_d^I = {pd:e} at r_h = {r_h}"));
    }
    check
}

fn criterion_5() -> Check {
    let mut check = Check::default();
    let configs = [
        // ramp-up time grid
        "[market]\narrival_before = 10.0\nreputation_threshold = 150\n[market.adoption]\np_ba = 0.02",
        "[market]\narrival_before = 25.0\nreputation_threshold = 100\n[market.adoption]\np_ba = 0.02",
        "[market]\narrival_before = 5.0\nreputation_threshold = 200\n[market.adoption]\np_ba = 0.02",
        // drop-out grid
        "[market]\nreputation_threshold = 150\n[market.adoption]\np_ba = 0.04",
        "[market]\nreputation_threshold = 200\n[market.adoption]\np_ba = 0.05",
        "[market]\nreputation_threshold = 100\n[market.adoption]\np_ba = 0.03",
        // gains grid
        "[market]\nreputation_threshold = 150\n[market.adoption]\np_ba = 0.05",
        "[market]\nreputation_threshold = 100\n[market.adoption]\np_ba = 0.02",
        "[market]\nreputation_threshold = 100\n[market.adoption]\np_ba = 0.04",
        // insured
        "[market]\nreputation_threshold = 100\n[policy]\nduration = 100.0",
        "[market]\nreputation_threshold = 150\n[policy]\nduration = 100.0",
        "[market]\nreputation_threshold = 200\n[policy]\nduration = 100.0",
    ];
    let mut max_z: f64 = 0.0;
    let mut count = 0;
    for (i, text) in configs.iter().enumerate() {
        let config = ExperimentConfig::parse(&format!(
            "{text}\n[sim]\nruns = 100000\nseed = {}",
            1000 + i
        ))
        .unwrap();
        let (_, comparisons) = compare(&config, RunOptions::default()).unwrap();
        for c in comparisons {
            // For the insured configs only the insured rows are new.
            if i >= 9 && !c.measure.starts_with("insured_") {
                continue;
            }
            count += 1;
            max_z = max_z.max(c.z);
            if c.flagged {
                let line = format!(
                    "config {i} {}: analytic {} vs simulated {} ± {} (z = {:.2})",
                    c.measure, c.analytic, c.sim.mean, c.sim.stderr, c.z
                );
                if KNOWN_EXCURSIONS.contains(&(i, c.measure.as_str())) {
                    check.known.push(line);
                } else {
                    check.failures.push(line);
                }
            }
        }
    }
    check.note(format!("{count} measures at 1e5 runs, max z = {max_z:.2}"));
    check
}

fn grid_params(r_h: u64, rate: f64, patience: f64) -> MarketParams {
    let mut p = MarketParams::reference();
    p.reputation_threshold = r_h;
    p.arrival_before = 20.0;
    p.adoption = AdoptionModel::Tabulated {
        p_ba: rate / 20.0,
        p_br: 0.5,
    };
    p.patience = patience;
    p
}

fn criterion_6() -> Check {
    let mut check = Check::default();
    let thresholds = [10u64, 50, 100, 150, 200];
    let rates = [0.2, 0.4, 0.6, 0.8, 1.0];
    let patiences = [30.0, 90.0, 180.0, 270.0, 360.0];
    let mut ramp = [[[0.0; 5]; 5]; 5];
    let mut drop = [[[0.0; 5]; 5]; 5];
    for (i, &r_h) in thresholds.iter().enumerate() {
        for (j, &rate) in rates.iter().enumerate() {
            for (k, &tw) in patiences.iter().enumerate() {
                let p = grid_params(r_h, rate, tw);
                ramp[i][j][k] = expected_ramp_up_time(&p).unwrap();
                drop[i][j][k] = drop_out_probability(&p).unwrap();
            }
        }
    }
    for i in 0..5 {
        for j in 0..5 {
            for k in 0..5 {
                let at = format!(
                    "(r_h, rate, T_w) = ({}, {}, {})",
                    thresholds[i], rates[j], patiences[k]
                );
                if i > 0 {
                    check.require(ramp[i][j][k] >= ramp[i - 1][j][k], || {
                        format!("E[T_r] decreases in r_h at {at}")
                    });
                    check.require(drop[i][j][k] >= drop[i - 1][j][k], || {
                        format!("P_d decreases in r_h at {at}")
                    });
                }
                if j > 0 {
                    check.require(ramp[i][j][k] <= ramp[i][j - 1][k], || {
                        format!("E[T_r] increases in rate at {at}")
                    });
                    check.require(drop[i][j][k] <= drop[i][j - 1][k], || {
                        format!("P_d increases in rate at {at}")
                    });
                }
                if k > 0 {
                    check.require(drop[i][j][k] <= drop[i][j][k - 1], || {
                        format!("P_d increases in T_w at {at}")
                    });
                }
            }
        }
    }
    check.note("125 grid points");
    check
}

fn audit(
    check: &mut Check,
    label: &str,
    policy: InsurancePolicy,
    advertised: f64,
    seed: u64,
) -> Option<AuditReport> {
    let p = MarketParams::reference();
    let regime = Regime::InsuredAdversarial {
        policy,
        advertised_quality: advertised,
    };
    match adversarial_protocol_audit(&p, &SimConfig::new(1_000, seed, regime)) {
        Ok(r) => Some(r),
        Err(e) => {
            check.failures.push(format!("{label}: {e}"));
            None
        }
    }
}

fn criterion_7() -> Check {
    let mut check = Check::default();
    let p = MarketParams::reference();
    let (q, gamma) = (p.intrinsic_quality, p.critical_factor);
    let reference = InsurancePolicy::reference();
    let tight = InsurancePolicy {
        revoke_threshold: 97.0,
        ..reference
    };

    if let Some(r) = audit(
        &mut check,
        "overstating (Q_a = Q_i + 2γ)",
        reference,
        q + 2.0 * gamma,
        1,
    ) {
        check.require(r.refunds == r.settlements && r.refunds > 0, || {
            format!("overstating: {r:?}")
        });
        check.require(
            r.consistency_revocations + r.deposit_revocations == r.runs,
            || format!("overstating: {r:?}"),
        );
        check.note(format!(
            "overstating: {} refunds, {} revocations",
            r.refunds, r.runs
        ));
    }
    if let Some(r) = audit(
        &mut check,
        "overstating, Ď_I = 97",
        tight,
        q + 2.0 * gamma,
        2,
    ) {
        check.require(r.deposit_revocations > 0, || {
            format!("tight threshold never revoked on the deposit: {r:?}")
        });
        check.note(format!(
            "tight threshold: {} deposit revocations",
            r.deposit_revocations
        ));
    }
    if let Some(r) = audit(
        &mut check,
        "neutral overstatement",
        reference,
        q + gamma / 2.0,
        3,
    ) {
        check.require(
            r.refunds == 0 && r.consistency_revocations == r.runs,
            || format!("neutral: {r:?}"),
        );
    }
    if let Some(r) = audit(&mut check, "honest", reference, q, 4) {
        check.require(
            r.refunds == 0 && r.full_refunds == r.runs && r.total_deductions == 0.0,
            || format!("honest: {r:?}"),
        );
        check.note(format!("honest: {} full deposit refunds", r.full_refunds));
    }
    check
}

fn criterion_8() -> Check {
    let mut check = Check::default();
    let p = MarketParams::reference();
    let policy = InsurancePolicy::reference();

    // Chernoff guarantee, sampled and exact.
    let eps = 0.01;
    let r = transaction_rate(&p, SellerLabel::Insured);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for mean in [1.0, 10.0, 100.0] {
        let pol = InsurancePolicy {
            duration: mean / r,
            ..policy
        };
        let threshold = min_deposit_threshold(eps, &p, &pol).unwrap();
        let dist = Poisson::new(mean).unwrap();
        let n = 1_000_000;
        let hits = (0..n)
            .filter(|_| dist.sample(&mut rng) * p.shipment_cost >= threshold)
            .count();
        let freq = hits as f64 / n as f64;
        check.require(freq <= eps, || {
            format!("mean {mean}: P[loss ≥ {threshold}] ≈ {freq} > {eps}")
        });
    }
    for eps in [1e-2, 1e-6, 1e-10] {
        for mean in [0.0, 0.5, 1.0, 10.0, 100.0, 500.0, 2000.0] {
            let pol = InsurancePolicy {
                duration: mean / r,
                ..policy
            };
            let threshold = min_deposit_threshold(eps, &p, &pol).unwrap();
            let k = (threshold / p.shipment_cost).ceil() as i64;
            let tail = poisson_sf(k - 1, mean).unwrap();
            check.require(tail <= eps, || {
                format!("exact tail {tail:e} > {eps:e} at mean {mean}")
            });
        }
    }

    let mut q = p.clone();
    for d in [1.0, 3.0, 7.0] {
        q.slot_length = d;
        check.require(min_clearing_time(&q) == d, || {
            format!("clearing time at d = {d}")
        });
    }

    for (r_h, printed) in [
        (100, 1485.04 - 760.51),
        (150, 1485.03 - 80.81),
        (200, 1485.01 - 80.71),
    ] {
        let mut q = p.clone();
        q.reputation_threshold = r_h;
        let v = max_insurance_price(&q, &policy).unwrap();
        check.require((v / printed - 1.0).abs() <= 0.01, || {
            format!("price bound {v} vs {printed} at r_h = {r_h}")
        });
    }

    match deposit_bound_warning(1e-6, &p, &policy).unwrap() {
        Some(w) => check.note(format!("expected warning: {}", w.message)),
        None => check
            .failures
            .push("the D_I = 100 example should trip the deposit bound".into()),
    }
    check
}

fn criterion_9() -> Check {
    let mut check = Check::default();
    let rel = |got: f64, want: f64| {
        if want == 0.0 {
            got.abs()
        } else {
            ((got - want) / want).abs()
        }
    };
    for (k, mean, pmf, cdf, sf) in ORACLE {
        let got = [
            poisson_pmf(k, mean).unwrap(),
            poisson_cdf(k as i64, mean).unwrap(),
            poisson_sf(k as i64, mean).unwrap(),
        ];
        for (g, w, name) in [
            (got[0], pmf, "pmf"),
            (got[1], cdf, "cdf"),
            (got[2], sf, "sf"),
        ] {
            check.require(rel(g, w) < 1e-10, || {
                format!("{name}({k}, {mean}) = {g:e}, oracle {w:e}")
            });
        }
    }

    for (k, rate) in [(1, 0.5), (10, 0.4), (100, 0.6), (200, 0.1), (1000, 2.0)] {
        let hi = k as f64 / rate + 40.0 * (k as f64).sqrt() / rate;
        let total = integrate_1d(|t| erlang_pdf(k, rate, t).unwrap(), 0.0, hi, 1e-12).unwrap();
        check.require((total - 1.0).abs() < 1e-6, || {
            format!("Erlang({k}, {rate}) integrates to {total}")
        });
    }

    // Given N(T_w) arrivals, the arrival times are i.i.d. uniform, so the
    // expected discounted count is λ·T_w times the mean uniform discount.
    let (delta, d, tw, rate) = (0.99, 3.0, 180.0, 0.6);
    let spec = DiscountSpec::new(delta, d).unwrap();
    let target = rate * tw * uniform_ceil_discount_mean(delta, d, 0.0, tw).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let draws: Vec<f64> = (0..100_000)
        .map(|_| {
            let (mut t, mut total) = (0.0, 0.0);
            loop {
                t -= (1.0 - rng.random::<f64>()).ln() / rate;
                if t >= tw {
                    break total;
                }
                total += spec.factor(spec.payment_slot(t));
            }
        })
        .collect();
    let est = EstimateWithCI::from_samples(&draws);
    let z = est.z_score(target);
    check.require(z <= 3.0, || {
        format!(
            "order-statistic identity: {} ± {} vs {target}",
            est.mean, est.stderr
        )
    });
    check.note(format!(
        "{} oracle points, order-statistic z = {z:.2}",
        ORACLE.len()
    ));
    check
}

/// Number, name, runtime budget and body.
type Criterion = (u32, &'static str, Duration, fn() -> Check);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (
            1,
            "expected ramp-up time table",
            Duration::from_secs(5),
            criterion_1,
        ),
        (
            2,
            "drop-out probability table",
            Duration::from_secs(1),
            criterion_2,
        ),
        (
            3,
            "long-term gains table",
            Duration::from_secs(30),
            criterion_3,
        ),
        (
            4,
            "insurance impact table",
            Duration::from_secs(30),
            criterion_4,
        ),
        (
            5,
            "Monte Carlo cross-validation",
            Duration::from_secs(300),
            criterion_5,
        ),
        (6, "monotonicity grid", Duration::from_secs(10), criterion_6),
        (7, "protocol audit", Duration::from_secs(10), criterion_7),
        (8, "pricing bounds", Duration::from_secs(60), criterion_8),
        (9, "numerics", Duration::from_secs(60), criterion_9),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut unexpected = 0;
    let mut passed = 0;
    let mut run = 0;
    for (n, name, budget, f) in criteria {
        let label = format!("criterion {n}");
        if !filter.is_empty()
            && !filter
                .iter()
                .any(|f| label.contains(f.as_str()) || name.contains(f.as_str()))
        {
            continue;
        }
        run += 1;
        let start = Instant::now();
        let mut check = f();
        let elapsed = start.elapsed();
        if elapsed > budget {
            check
                .failures
                .push(format!("took {elapsed:.2?}, budget {budget:?}"));
        }
        let pass = check.failures.is_empty() && check.known.is_empty();
        passed += pass as usize;
        unexpected += check.failures.len();
        println!(
            "{} {label}: {name} ({elapsed:.2?})",
            if pass { "PASS" } else { "FAIL" }
        );
        for s in &check.notes {
            println!("     {s}");
        }
        for s in &check.known {
            println!("     known deviation: {s}");
        }
        for s in &check.failures {
            println!("     failure: {s}");
        }
    }
    println!("{passed} of {run} criteria pass; {unexpected} unexpected failure(s)");
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
