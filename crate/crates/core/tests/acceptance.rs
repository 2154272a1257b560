//! Acceptance criteria on the frozen reference config. Runs without the
//! libtest harness so every `criterion N: PASS|FAIL` line is printed; the
//! process exits nonzero if any criterion fails.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use num_bigint::{BigInt, BigUint};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use winoc::cli::{parse_config, run_command, write_table, Command, Detail, OracleMatrix, RunConfig, RunOptions};
use winoc::complexity::complexity_report;
use winoc::counting::class_count;
use winoc::gain::gain_ratio;
use winoc::geometry::AngleSample;
use winoc::materials::coefficient_set;
use winoc::oracle::check_angle;
use winoc::{ApproxConfig, Channel, Geometry, Model, StackSpec, ThetaBoundRule};

fn reference() -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.toml");
    parse_config(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn channel(cfg: &RunConfig, geometry: Geometry) -> Channel {
    Channel::new(cfg.stack, geometry, cfg.theta_rule).unwrap()
}

fn report(n: u32, pass: bool, started: Instant, budget: Duration, detail: &str) -> bool {
    let took = started.elapsed();
    let ok = pass && took < budget;
    println!(
        "criterion {n}: {} {detail} ({:.2} s, budget {} s)",
        if ok { "PASS" } else { "FAIL" },
        took.as_secs_f64(),
        budget.as_secs()
    );
    ok
}

fn random_stack(rng: &mut StdRng) -> StackSpec {
    let n1 = rng.gen_range(1.0..4.0);
    let n2 = rng.gen_range(1.0..4.0);
    let n3 = rng.gen_range(f64::max(n1, n2)..5.0);
    StackSpec {
        thickness: [rng.gen_range(1e-7..1e-5), rng.gen_range(1e-7..1e-5), rng.gen_range(1e-7..1e-4)],
        index: [n1, n2, n3],
        attenuation: [rng.gen_range(0.0..5e3), rng.gen_range(0.0..5e3), rng.gen_range(0.0..5e3)],
        frequency: 1e12,
    }
}

fn criterion_01_coefficient_identities() -> bool {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut exact = true;
    for _ in 0..1000 {
        let s = random_stack(&mut rng);
        let c = coefficient_set(&s).unwrap();
        for k in 1..=6 {
            worst = worst.max((c.t(k) + c.r(k) - 1.0).abs());
        }
        exact &= c.t(4) == c.t(1) && c.t(5) == c.t(2) && c.t(6) == c.t(3);
    }
    let pass = worst <= 1e-15 && exact;
    report(1, pass, started, Duration::from_secs(1), &format!("max |T+R-1| = {worst:.1e}, mirrored T exact = {exact}"))
}

fn criterion_02_oracle_equivalence() -> bool {
    let started = Instant::now();
    let cfg = reference();
    let matrix = OracleMatrix::default();
    let mut checked = 0;
    let mut first_bad = None;
    for &layers in &matrix.layers {
        for &bound in &matrix.boundaries {
            let geom = Geometry {
                layers,
                boundary_layers: bound,
                ..cfg.geometry
            };
            let ch = channel(&cfg, geom);
            for &f in &matrix.angle_fractions {
                let s = AngleSample::new(f * ch.theta_bound(), &cfg.stack).unwrap();
                let (n, bad) = check_angle(&s, &geom, ch.table(), matrix.caps, bound.is_some()).unwrap();
                checked += n;
                if first_bad.is_none() {
                    first_bad = bad;
                }
            }
        }
    }
    let detail = match &first_bad {
        None => format!("{checked} (theta, n, m, J, J_bound) cells agree"),
        Some(m) => format!("mismatch {m:?}"),
    };
    report(2, first_bad.is_none() && checked == 3 * 5 * 5 * 10 * 7, started, Duration::from_secs(120), &detail)
}

fn criterion_03_stars_and_bars() -> bool {
    let started = Instant::now();
    let mut mismatches = 0;
    let mut cells = 0;
    for len in 0..=12usize {
        // tally[m][sum + len] over all words of this length
        let mut tally = vec![vec![0u64; 2 * len + 1]; len + 1];
        for mut code in 0..3usize.pow(len as u32) {
            let (mut m, mut sum) = (0usize, 0i64);
            for _ in 0..len {
                match code % 3 {
                    0 => m += 1,
                    1 => sum += 1,
                    _ => sum -= 1,
                }
                code /= 3;
            }
            tally[m][(sum + len as i64) as usize] += 1;
        }
        for (m, by_sum) in tally.iter().enumerate() {
            let n = (len - m) as u64;
            for layers in 1..=3u64 {
                cells += 1;
                let idx = len as i64 - layers as i64;
                let brute = if idx >= 0 { by_sum[idx as usize] } else { 0 };
                if class_count(n, m as u64, layers) != BigUint::from(brute) {
                    mismatches += 1;
                }
            }
        }
    }
    report(3, mismatches == 0, started, Duration::from_secs(30), &format!("{cells} (n, m, J) cells, {mismatches} mismatches"))
}

fn criterion_04_model_agreement() -> bool {
    let started = Instant::now();
    let cfg = reference();
    let mut diffs = Vec::new();
    let mut rel_20 = f64::NAN;
    for layers in 2..=20 {
        let ch = channel(&cfg, Geometry { layers, ..cfg.geometry });
        let bl = ch.total_gain(Model::BoundaryLess).unwrap().h_linear;
        let bc = ch.total_gain(Model::BoundaryConstrained).unwrap().h_linear;
        diffs.push((bl - bc).abs());
        if layers == 20 {
            rel_20 = (bl - bc).abs() / bl;
        }
    }
    let monotone = diffs.windows(2).all(|w| w[1] <= w[0]);
    report(
        4,
        rel_20 < 1e-5 && monotone,
        started,
        Duration::from_secs(300),
        &format!("J=20 relative difference {rel_20:.3e}, |H_bl - H_bc| non-increasing over J=2..20: {monotone}"),
    )
}

fn criterion_05_per_layer_attenuation() -> bool {
    let started = Instant::now();
    let cfg = reference();
    let h: Vec<f64> = (2..=10)
        .map(|layers| {
            channel(&cfg, Geometry { layers, ..cfg.geometry })
                .total_gain(Model::BoundaryConstrained)
                .unwrap()
                .h_db
        })
        .collect();
    let steps: Vec<f64> = h.windows(2).map(|w| w[1] - w[0]).collect();
    let lo = steps.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = steps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    report(
        5,
        lo >= -70.0 && hi <= -50.0,
        started,
        Duration::from_secs(120),
        &format!("per-layer change in [{lo:.2}, {hi:.2}] dB over J=2..10"),
    )
}

fn criterion_06_approximation_error() -> bool {
    let started = Instant::now();
    let cfg = reference();
    let mut worst_rel = 0.0f64;
    let mut worst_db = 0.0f64;
    for layers in [2, 4, 8] {
        let ch = channel(&cfg, Geometry { layers, ..cfg.geometry });
        let full = ch.total_gain(Model::BoundaryLess).unwrap();
        let approx = ch.approx_total_gain(Model::BoundaryLess, &cfg.approx).unwrap();
        worst_rel = worst_rel.max((full.h_linear - approx.h_linear) / full.h_linear);
        worst_db = worst_db.max(full.h_db - approx.h_db);
    }
    report(
        6,
        worst_rel < 1e-3 && worst_db < 1e-3,
        started,
        Duration::from_secs(300),
        &format!("max relative error {worst_rel:.3e}, max gap {worst_db:.3e} dB over J in {{2, 4, 8}}"),
    )
}

fn criterion_07_approximation_lower_bound() -> bool {
    let started = Instant::now();
    let cfg = reference();
    let mut rng = StdRng::seed_from_u64(7);
    let mut violations = 0;
    let mut nontrivial = 0;
    for _ in 0..100 {
        let n3 = rng.gen_range(2.5..4.0);
        let stack = StackSpec {
            thickness: [rng.gen_range(0.5e-6..2e-6), rng.gen_range(0.5e-6..2e-6), rng.gen_range(2e-6..8e-6)],
            index: [rng.gen_range(1.2..n3), rng.gen_range(1.2..n3), n3],
            attenuation: [rng.gen_range(0.0..4e3), rng.gen_range(0.0..4e3), rng.gen_range(0.0..2e3)],
            frequency: 1e12,
        };
        let geometry = Geometry {
            layers: rng.gen_range(1..=4),
            boundary_layers: if rng.gen_bool(0.3) { None } else { Some(rng.gen_range(0..=4)) },
            displacement: rng.gen_range(4e-6..12e-6),
            antenna_length: rng.gen_range(1e-6..5e-6),
            tx_gain: rng.gen_range(0.5..2.0),
            rx_gain: rng.gen_range(0.5..2.0),
            samples: rng.gen_range(1..=10),
        };
        let approx = ApproxConfig {
            coherence_time: 10f64.powf(rng.gen_range(-14.0..-10.0)),
            truncate_refractions: rng.gen_bool(0.8),
            coherence_cutoff: rng.gen_bool(0.8),
            ..cfg.approx
        };
        let model = if rng.gen_bool(0.5) { Model::BoundaryLess } else { Model::BoundaryConstrained };
        let ch = Channel::new(stack, geometry, ThetaBoundRule::default()).unwrap();
        let full = ch.total_gain(model).unwrap().h_linear;
        let cut = ch.approx_total_gain(model, &approx).unwrap().h_linear;
        if cut > full {
            violations += 1;
        }
        if cut < full {
            nontrivial += 1;
        }
    }
    report(
        7,
        violations == 0,
        started,
        Duration::from_secs(300),
        &format!("100 random configs, {violations} violations, {nontrivial} strictly below the exact gain"),
    )
}

fn criterion_08_complexity_accounting() -> bool {
    let started = Instant::now();
    let cfg = reference();
    let mut exact = true;
    let mut worst_gap = 0.0f64;
    let mut lines = Vec::new();
    for b in [1, 2, 4, 8] {
        let ch = channel(&cfg, Geometry { boundary_layers: Some(b), ..cfg.geometry });
        let r = complexity_report(&ch).unwrap();
        let bl = ch.total_gain(Model::BoundaryLess).unwrap().loops_executed;
        let bc = ch.total_gain(Model::BoundaryConstrained).unwrap().loops_executed;
        exact &= r.empirical_difference() == r.excess && BigInt::from(bc - bl) == r.excess;
        worst_gap = worst_gap.max(r.relative_gap());
        lines.push(format!("J_bound={b}: empirical {} predicted {:.0}", r.excess, r.predicted_difference));
    }
    // Single sample at θ_bound: the largest admissible refraction count is
    // J, so J_bound = J + 1 is the algebraic zero.
    let zero_geom = Geometry {
        boundary_layers: Some(cfg.geometry.layers + 1),
        samples: 1,
        ..cfg.geometry
    };
    let zero = complexity_report(&channel(&cfg, zero_geom)).unwrap();
    let algebraic_zero = zero.per_angle.iter().all(|a| a.beta == i64::from(cfg.geometry.layers)) && zero.predicted_difference == 0.0;
    report(
        8,
        exact && worst_gap <= 0.05 && algebraic_zero,
        started,
        Duration::from_secs(60),
        &format!(
            "exact excess identity {exact}, algebraic zero {algebraic_zero}, closed form within {:.1}% (limit 5%) [{}]",
            100.0 * worst_gap,
            lines.join("; ")
        ),
    )
}

fn criterion_09_gain_ratio() -> bool {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let s = random_stack(&mut rng);
        let [n1, n2, n3] = s.index;
        let [l1, l2, l3] = s.thickness;
        let [a1, a2, a3] = s.attenuation;
        let fresnel = |a: f64, b: f64| ((a - b) / (a + b)).powi(2);
        let t1 = fresnel(n3, n1);
        let t2 = fresnel(n2, n1);
        let t3 = fresnel(n3, n2);
        let want = t1 * t2 * t3 / ((1.0 - t3) * (1.0 - t3)) * (2.0 * a3 * l3 - a2 * l2 - a1 * l1).exp();
        let got = gain_ratio(&s, &coefficient_set(&s).unwrap()).unwrap();
        let rel = if want == 0.0 { got.abs() } else { ((got - want) / want).abs() };
        worst = worst.max(rel);
    }
    let cfg = reference();
    let disparity = 1.0 / gain_ratio(&cfg.stack, &coefficient_set(&cfg.stack).unwrap()).unwrap();
    let within_order = (disparity / 7.2e8).log10().abs() <= 1.0;
    report(
        9,
        worst <= 1e-12 && disparity >= 1e6,
        started,
        Duration::from_secs(1),
        &format!(
            "max relative deviation {worst:.1e}, reference disparity {disparity:.3e} (calibration note: within one order of 7.2e8: {within_order})"
        ),
    )
}

fn criterion_10_determinism() -> bool {
    let started = Instant::now();
    let mut cfg = reference();
    cfg.sweep = Some(winoc::cli::Sweep {
        variable: winoc::cli::SweepVariable::Layers,
        values: vec![2.0, 3.0],
    });
    let commands = [
        Command::Gain,
        Command::CompareModels,
        Command::ApproxError,
        Command::Sweep,
        Command::Complexity,
        Command::OracleCheck,
    ];
    let render = |cmd, serial, detail| {
        let opts = RunOptions {
            detail,
            serial,
            ..RunOptions::default()
        };
        let mut out = Vec::new();
        write_table(&run_command(cmd, &cfg, &opts).unwrap(), cfg.output.format, &mut out).unwrap();
        out
    };
    let mut identical = true;
    let mut runs = 0;
    for cmd in commands {
        let details: &[Detail] = if cmd == Command::Gain { &[Detail::Summary, Detail::Angle, Detail::Class] } else { &[Detail::Summary] };
        for &detail in details {
            let first = render(cmd, false, detail);
            for serial in [false, true, false] {
                identical &= render(cmd, serial, detail) == first;
                runs += 1;
            }
        }
    }

    // The binary through files, threaded against serial.
    let dir = tempfile::tempdir().unwrap();
    let config = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.toml");
    let mut files = Vec::new();
    for (i, serial) in [false, true, false].into_iter().enumerate() {
        let out = dir.path().join(format!("gain{i}.csv"));
        let mut cmd = std::process::Command::new(env!("CARGO_BIN_EXE_winoc"));
        cmd.args(["gain", "--detail", "class", "--config"]).arg(&config).arg("--out").arg(&out);
        if serial {
            cmd.arg("--serial");
        }
        assert!(cmd.status().unwrap().success());
        files.push(std::fs::read(&out).unwrap());
    }
    identical &= files.windows(2).all(|w| w[0] == w[1]);
    report(
        10,
        identical,
        started,
        Duration::from_secs(60),
        &format!("{runs} library reruns and 3 binary reruns byte-identical: {identical}"),
    )
}

fn main() -> std::process::ExitCode {
    let criteria: [fn() -> bool; 10] = [
        criterion_01_coefficient_identities,
        criterion_02_oracle_equivalence,
        criterion_03_stars_and_bars,
        criterion_04_model_agreement,
        criterion_05_per_layer_attenuation,
        criterion_06_approximation_error,
        criterion_07_approximation_lower_bound,
        criterion_08_complexity_accounting,
        criterion_09_gain_ratio,
        criterion_10_determinism,
    ];
    let failed = criteria.iter().filter(|c| !c()).count();
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        std::process::ExitCode::SUCCESS
    } else {
        std::process::ExitCode::FAILURE
    }
}
