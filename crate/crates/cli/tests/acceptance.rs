//! Acceptance suite: one PASS/FAIL line per criterion.

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use csma_core::analytics::{
    ber_gray_approx, required_snr_db, ser_data_width, ser_mqam, ser_shared,
};
use csma_core::channel::{add_awgn, child_rng, db_to_linear, linear_to_db, SnrMode};
use csma_core::config::load_config;
use csma_core::constellation::gray_decode;
use csma_core::harness::{PlanSpec, ScheduleSpec, SnrSweep, StopRule};
use csma_core::mapping::{
    build_address_bit_plan, build_lookup_plan, build_qos_plan, parse_lookup_table,
    throughput_reduction, AddressBitLayout, AllocationPlan, Demapped, LookupRow,
};
use csma_core::ofdm::OfdmEngine;
use csma_core::{
    compare_user_scaling, run_experiment, BerReport, Constellation, ExperimentConfig, RbGeometry,
};
use rand::seq::SliceRandom;
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit_s: u64) -> Result<(), String> {
    ensure(
        elapsed < Duration::from_secs(limit_s),
        format!("took {:.1} s, limit {limit_s} s", elapsed.as_secs_f64()),
    )
}

/// Users' (M, B, U_c) rows as printed in the capacity table.
const TABLE3: [(u32, u32, u64); 9] = [
    (64, 4, 4),
    (64, 3, 8),
    (64, 2, 16),
    (256, 6, 4),
    (256, 4, 16),
    (256, 2, 64),
    (1024, 8, 4),
    (1024, 6, 16),
    (1024, 4, 64),
];

fn capacity_table() -> Outcome {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_csma"))
        .arg("capacity-table")
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(out.status.success(), "capacity-table failed")?;
    let text = String::from_utf8(out.stdout).map_err(|e| e.to_string())?;
    let rows: Vec<(u32, u32, u64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            (
                f[0].parse().unwrap(),
                f[2].parse().unwrap(),
                f[3].parse().unwrap(),
            )
        })
        .collect();
    ensure(rows == TABLE3, format!("rows {rows:?}"))?;
    within(elapsed, 1)?;
    Ok(format!("9/9 rows, {:.0} ms", elapsed.as_secs_f64() * 1e3))
}

fn base(order: u32, plan: PlanSpec) -> ExperimentConfig {
    ExperimentConfig {
        name: format!("{order}-qam"),
        order,
        plan,
        ..Default::default()
    }
}

/// |x - p| within `k` binomial standard deviations of `n` trials.
fn binomial_ok(errors: u64, n: u64, p: f64, k: f64) -> bool {
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    (errors as f64 / n as f64 - p).abs() <= k * sigma
}

fn theory_vs_simulation() -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    for order in [4u32, 16, 64] {
        let config = ExperimentConfig {
            sweep: SnrSweep {
                mode: SnrMode::Symbol,
                start_db: 0.0,
                stop_db: 18.0,
                step_db: 2.0,
            },
            stop: StopRule {
                min_symbols: 200_000,
                min_errors: 0,
                max_symbols: 200_000,
            },
            seed: 2,
            ..base(order, PlanSpec::Single)
        };
        let report = run_experiment(&config).map_err(|e| e.to_string())?;
        for p in &report.points {
            let n = p.aggregate.symbols_sent;
            let expected = ser_mqam(order as u64, p.symbol_snr).unwrap();
            ensure(n >= 200_000, format!("only {n} symbols"))?;
            if expected * n as f64 >= 100.0 {
                ensure(
                    binomial_ok(p.aggregate.symbol_errors, n, expected, 3.0),
                    format!(
                        "M={order} {} dB: SER {:.4e} vs {expected:.4e}",
                        p.snr_db,
                        p.aggregate.ser()
                    ),
                )?;
                checked += 1;
            }
        }
    }
    within(start.elapsed(), 120)?;
    Ok(format!(
        "{checked} points within 3 sigma, {:.1} s",
        start.elapsed().as_secs_f64()
    ))
}

fn noiseless_identity() -> Outcome {
    let table1 =
        parse_lookup_table(&std::fs::read_to_string(fixtures().join("table1.map")).unwrap())
            .unwrap();
    let cases = [
        (
            "table1.map lookup",
            16,
            PlanSpec::Lookup {
                source: "table1.map".into(),
                rows: table1,
            },
            ScheduleSpec::RoundRobin,
        ),
        (
            "address 3,2",
            64,
            PlanSpec::AddressBit {
                positions: vec![3, 2],
            },
            ScheduleSpec::RoundRobin,
        ),
        (
            "qos 3,2,2",
            16,
            PlanSpec::Qos {
                bits: vec![3, 2, 2],
            },
            ScheduleSpec::Weighted(vec![2, 1, 1]),
        ),
    ];
    let mut total = 0;
    for (name, order, plan, schedule) in cases {
        let config = ExperimentConfig {
            noiseless: true,
            schedule,
            stop: StopRule {
                min_symbols: 100_000,
                min_errors: 0,
                max_symbols: 100_000,
            },
            ..base(order, plan)
        };
        let report = run_experiment(&config).map_err(|e| e.to_string())?;
        let point = &report.points[0];
        ensure(
            point.aggregate.symbols_sent >= 100_000,
            format!("{name}: too few symbols"),
        )?;
        for u in &point.users {
            ensure(
                u.tally.symbols_sent > 0
                    && u.tally.symbol_errors == 0
                    && u.tally.data_bit_errors == 0,
                format!("{name}: user {} {:?}", u.user_id, u.tally),
            )?;
        }
        total += point.aggregate.symbols_sent;
    }
    Ok(format!("3 plans, {total} symbols, 0 bit errors"))
}

/// SNR where the aggregate BER first falls through `target`, by log-linear
/// interpolation between neighbouring points.
fn crossing(report: &BerReport, target: f64) -> Option<f64> {
    report.points.windows(2).find_map(|w| {
        let (a, b) = (&w[0], &w[1]);
        let (ya, yb) = (a.aggregate.ber(), b.aggregate.ber());
        (ya >= target && yb < target && yb > 0.0).then(|| {
            let t = (ya.ln() - target.ln()) / (ya.ln() - yb.ln());
            a.snr_db + t * (b.snr_db - a.snr_db)
        })
    })
}

fn expected_bit_errors(report: &BerReport, i: usize) -> f64 {
    let p = &report.points[i];
    p.theory_ber * p.aggregate.data_bits_sent as f64
}

fn shared_vs_dedicated() -> Outcome {
    let start = Instant::now();
    let runs = load_config(&fixtures().join("fig9.cfg")).map_err(|e| e.to_string())?;
    let reports: Vec<BerReport> = runs
        .iter()
        .map(run_experiment)
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let (single, shared) = (&reports[0], &reports[1]);
    ensure(
        single.order == 16 && shared.order == 64,
        "fig9.cfg runs out of order",
    )?;

    let mut qualifying = 0;
    for i in 0..single.points.len() {
        if expected_bit_errors(single, i).min(expected_bit_errors(shared, i)) < 100.0 {
            continue;
        }
        let (a, b) = (
            single.points[i].aggregate.ber(),
            shared.points[i].aggregate.ber(),
        );
        ensure(
            b > a,
            format!(
                "{} dB: shared {b:.3e} not above single {a:.3e}",
                single.points[i].snr_db
            ),
        )?;
        qualifying += 1;
    }
    ensure(qualifying > 0, "no qualifying points")?;

    let sim = crossing(shared, 1e-3)
        .zip(crossing(single, 1e-3))
        .map(|(b, a)| b - a);
    let sim = sim.ok_or("a simulated curve never crosses 1e-3")?;
    let predict = |order: u64| {
        required_snr_db(
            |db| ber_gray_approx(order, 4.0 * db_to_linear(db)).unwrap(),
            1e-3,
            -10.0,
            40.0,
        )
    };
    let predicted = predict(64).unwrap() - predict(16).unwrap();
    ensure(
        (sim - predicted).abs() <= 0.5,
        format!("gap {sim:.2} dB vs predicted {predicted:.2} dB"),
    )?;
    within(start.elapsed(), 180)?;
    Ok(format!(
        "{qualifying} points ordered; gap at 1e-3 {sim:.2} dB vs predicted {predicted:.2} dB; {:.1} s",
        start.elapsed().as_secs_f64()
    ))
}

fn user_scaling() -> Outcome {
    let runs = load_config(&fixtures().join("fig11.cfg")).map_err(|e| e.to_string())?;

    // per-data-bit ordering
    let template = ExperimentConfig {
        sweep: SnrSweep {
            mode: SnrMode::DataBit,
            start_db: 0.0,
            stop_db: 16.0,
            step_db: 2.0,
        },
        ..runs[0].clone()
    };
    let scaled = compare_user_scaling(&template, &[1, 4, 8]).map_err(|e| e.to_string())?;
    let mut ordered = 0;
    for i in 0..scaled[0].points.len() {
        if scaled.iter().any(|r| expected_bit_errors(r, i) < 100.0) {
            continue;
        }
        let ber: Vec<f64> = scaled.iter().map(|r| r.points[i].aggregate.ber()).collect();
        ensure(
            ber[0] <= ber[1] && ber[1] <= ber[2],
            format!("{} dB: BER {ber:?}", scaled[0].points[i].snr_db),
        )?;
        ordered += 1;
    }
    ensure(ordered > 0, "no qualifying points")?;

    // per-symbol agreement
    let reports: Vec<BerReport> = runs
        .iter()
        .map(run_experiment)
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let mut compared = 0;
    for i in 0..reports[0].points.len() {
        let p = reports[0].points[i].theory_ser;
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            let (ta, tb) = (
                &reports[a].points[i].aggregate,
                &reports[b].points[i].aggregate,
            );
            if p * (ta.symbols_sent.min(tb.symbols_sent) as f64) < 100.0 {
                continue;
            }
            let sigma =
                (p * (1.0 - p) * (1.0 / ta.symbols_sent as f64 + 1.0 / tb.symbols_sent as f64))
                    .sqrt();
            ensure(
                (ta.ser() - tb.ser()).abs() <= 3.0 * sigma,
                format!(
                    "{} dB: SER {:.4e} vs {:.4e}",
                    reports[0].points[i].snr_db,
                    ta.ser(),
                    tb.ser()
                ),
            )?;
            compared += 1;
        }
    }
    Ok(format!(
        "{ordered} points ordered per data bit; {compared} SER pairs within 3 sigma per symbol"
    ))
}

fn throughput_spot_values() -> Outcome {
    for (order, a, num, den) in [(64, 2, 1, 6), (256, 4, 1, 32)] {
        let t = throughput_reduction(order, a).map_err(|e| e.to_string())?;
        ensure(
            (*t.numer(), *t.denom()) == (num, den),
            format!("T_r({order},{a}) = {t}"),
        )?;
    }
    Ok("1/6 and 1/32".into())
}

fn check_plan(plan: &AllocationPlan) -> Result<(), String> {
    let mut seen = HashSet::new();
    for u in plan.users() {
        for (w, &cw) in u.codewords().iter().enumerate() {
            ensure(seen.insert(cw), format!("label {cw} allocated twice"))?;
            ensure(
                plan.demap_symbol(cw)
                    == Demapped::User {
                        user_id: u.user_id(),
                        data_word: w as u32,
                    },
                format!("label {cw} does not demap"),
            )?;
        }
    }
    Ok(())
}

fn invariants() -> Outcome {
    // allocation disjointness and demap(map) identity
    let mut plans = 0;
    for d in (2..=10u32).step_by(2) {
        for mask in 1u32..(1 << d) - 1 {
            let positions: Vec<u32> = (0..d).filter(|p| mask >> p & 1 == 1).collect();
            check_plan(
                &build_address_bit_plan(&AddressBitLayout::new(1 << d, &positions).unwrap())
                    .unwrap(),
            )?;
            plans += 1;
        }
        for b in 1..d {
            let n = 1usize << (d - b);
            check_plan(&build_qos_plan(1 << d, &vec![b; n]).unwrap())?;
            plans += 1;
        }
    }
    for name in ["table1.map", "table4.map"] {
        let rows =
            parse_lookup_table(&std::fs::read_to_string(fixtures().join(name)).unwrap()).unwrap();
        check_plan(&build_lookup_plan(16, &rows).unwrap())?;
    }
    let mut rng = child_rng(7, 0, 0);
    for _ in 0..1000 {
        let order = [16u32, 64, 256][rng.random_range(0..3)];
        let mut labels: Vec<u32> = (0..order).collect();
        labels.shuffle(&mut rng);
        let mut rows = Vec::new();
        let mut free = order;
        for user in 0..rng.random_range(1..6u32) {
            let b = rng.random_range(1..order.trailing_zeros());
            if 1 << b > free {
                break;
            }
            free -= 1 << b;
            for w in 0..1u32 << b {
                let codeword = labels.pop().unwrap();
                rows.push(LookupRow {
                    user_id: user,
                    data_word: w,
                    data_bits: b,
                    codeword,
                });
            }
        }
        check_plan(&build_lookup_plan(order, &rows).map_err(|e| e.to_string())?)?;
    }

    // Gray adjacency and unit energy
    let mut worst_energy = 0.0f64;
    for d in (2..=12u32).step_by(2) {
        let c = Constellation::qam(1 << d).unwrap();
        let side = c.side() as usize;
        for col in 0..side {
            for row in 0..side {
                let here = c.label_of_point(col * side + row);
                if row + 1 < side {
                    ensure(
                        (here ^ c.label_of_point(col * side + row + 1)).count_ones() == 1,
                        "Q neighbours",
                    )?;
                }
                if col + 1 < side {
                    ensure(
                        (here ^ c.label_of_point((col + 1) * side + row)).count_ones() == 1,
                        "I neighbours",
                    )?;
                }
            }
        }
        ensure(gray_decode(c.label_of_point(0)) == 0, "corner label")?;
        worst_energy = worst_energy.max((c.mean_energy() - 1.0).abs());
    }
    ensure(
        worst_energy < 1e-12,
        format!("energy error {worst_energy:e}"),
    )?;

    // OFDM round trip
    let engine = OfdmEngine::new(RbGeometry::default()).unwrap();
    let c = Constellation::qam(256).unwrap();
    let mut worst_ofdm = 0.0f64;
    for _ in 0..100 {
        let cells: Vec<_> = (0..168)
            .map(|_| c.modulate(rng.random_range(0..256)))
            .collect();
        let back = engine
            .demodulate_cells(&engine.modulate_cells(&cells).unwrap())
            .unwrap();
        for (a, b) in cells.iter().zip(&back) {
            worst_ofdm = worst_ofdm.max((a - b).norm());
        }
    }
    ensure(
        worst_ofdm < 1e-9,
        format!("OFDM round trip error {worst_ofdm:e}"),
    )?;

    // shared SER never below dedicated SER, 50 SNR values x 10 (B, A) pairs
    let pairs = [
        (2, 2),
        (2, 4),
        (2, 6),
        (2, 8),
        (2, 10),
        (4, 2),
        (4, 4),
        (4, 6),
        (4, 8),
        (6, 2),
    ];
    let mut grid = 0;
    for i in 0..50 {
        let snr = db_to_linear(-10.0 + i as f64);
        for &(b, a) in &pairs {
            let (e4, e5) = (
                ser_data_width(b, snr).unwrap(),
                ser_shared(b, a, snr).unwrap(),
            );
            ensure(e5 >= e4, format!("B={b} A={a} snr={snr}: {e5} < {e4}"))?;
            grid += 1;
        }
    }
    Ok(format!(
        "{plans} generated plans + 1000 random tables; energy err {worst_energy:.1e}; OFDM err {worst_ofdm:.1e}; {grid} shared-vs-dedicated SER checks"
    ))
}

fn determinism() -> Outcome {
    let config = ExperimentConfig {
        sweep: SnrSweep {
            mode: SnrMode::Symbol,
            start_db: 10.0,
            stop_db: 20.0,
            step_db: 5.0,
        },
        stop: StopRule {
            min_symbols: 20_000,
            min_errors: 500,
            max_symbols: 200_000,
        },
        seed: 42,
        ..base(
            64,
            PlanSpec::AddressBit {
                positions: vec![3, 2],
            },
        )
    };
    let csv = |workers| {
        run_experiment(&ExperimentConfig {
            workers,
            ..config.clone()
        })
        .map(|r| r.to_csv())
        .map_err(|e| e.to_string())
    };
    let runs = [csv(1)?, csv(1)?, csv(4)?, csv(4)?];
    ensure(
        runs.iter().all(|r| *r == runs[0]),
        "CSV differs between runs",
    )?;
    let other = run_experiment(&ExperimentConfig {
        seed: 43,
        ..config.clone()
    })
    .map_err(|e| e.to_string())?;
    ensure(other.to_csv() != runs[0], "seed has no effect")?;
    Ok(format!("4 runs byte-identical ({} bytes)", runs[0].len()))
}

fn awgn_calibration() -> Outcome {
    let n = 1_000_000;
    let c = Constellation::qam(16).unwrap();
    let mut rng = child_rng(9, 0, 0);
    let clean: Vec<_> = (0..n)
        .map(|_| c.modulate(rng.random_range(0..16)))
        .collect();
    let signal = clean.iter().map(|s| s.norm_sqr()).sum::<f64>() / n as f64;
    let mut detail = Vec::new();
    for (i, snr_db) in [0.0, 10.0, 20.0].into_iter().enumerate() {
        let mut rng = child_rng(9, i as u32 + 1, 0);
        let noisy = add_awgn(&clean, db_to_linear(snr_db), 1.0, &mut rng).unwrap();
        let noise = noisy
            .iter()
            .zip(&clean)
            .map(|(y, x)| (y - x).norm_sqr())
            .sum::<f64>()
            / n as f64;
        let measured = linear_to_db(signal / noise);
        ensure(
            (measured - snr_db).abs() < 0.1,
            format!("{snr_db} dB measured as {measured:.3}"),
        )?;
        detail.push(format!("{measured:.3}"));
    }
    Ok(format!("measured {} dB", detail.join(", ")))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("capacity table reproduction", capacity_table),
        ("theory vs simulation SER", theory_vs_simulation),
        ("noise-free end-to-end identity", noiseless_identity),
        ("16-QAM vs shared 64-QAM ordering and gap", shared_vs_dedicated),
        ("1/4/8-user scaling", user_scaling),
        ("throughput reduction spot values", throughput_spot_values),
        ("invariant suites", invariants),
        ("determinism across runs and workers", determinism),
        ("AWGN calibration", awgn_calibration),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
