//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.
//!
//! Run with `cargo test --release -p mimoxr --test acceptance`.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use mimoxr::bitstorm::corrupt;
use mimoxr::frame_latency::{transmission_latency, transmission_symbols, Direction, FrameStructure};
use mimoxr::metrics::{ate_translation, bootstrap_stats, normalize_vs_baseline};
use mimoxr::phy::{awgn_ber_exact, ber_curve, db_to_linear, generate_channel, QamConstellation};
use mimoxr::runner::{run_latency_study, run_power_study, run_study, ExperimentConfig, Study};
use mimoxr::sandbox::{
    apply_update, generate_scene, generate_trajectory, payload_len, reprojection_jacobian, reprojection_residual,
    run_pipeline, Bounds, CameraModel, PipelineConfig, PoseStamped, RunSeeds,
};
use mimoxr::scenario::POSE_RECORD_BYTES;
use mimoxr::{seed, ScenarioId};
use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector2, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs()
}

/// 1. Transmission latency examples, against hand-counted symbol numbers.
fn latency_examples() -> Check {
    let a = FrameStructure::preset_a();
    let b = FrameStructure::preset_b();
    let tau = 71.4e-6;
    let s3_ul = ScenarioId::FeaturesWithDepth.uplink_bytes() as u64 * 8;
    let s1_ul = ScenarioId::RawImages.uplink_bytes() as u64 * 8;
    let pose = POSE_RECORD_BYTES as u64 * 8;
    // (payload, structure, direction, symbols counted by hand, expected seconds)
    let cases = [
        (s3_ul, &b, Direction::Uplink, 121, 8.6394e-3),
        (s1_ul, &a, Direction::Uplink, 2561, 182.8554e-3),
        (pose, &a, Direction::Downlink, 8, 571.2e-6),
    ];
    let mut out = Vec::new();
    for (bits, fs, dir, symbols, expected) in cases {
        let n = transmission_symbols(bits, fs, dir).map_err(|e| e.to_string())?;
        let t = transmission_latency(bits, fs, dir).map_err(|e| e.to_string())?;
        ensure(n == symbols, format!("{bits} bits on {}: {n} symbols, expected {symbols}", fs.name))?;
        ensure(
            rel_close(t, expected, 1e-9) && rel_close(symbols as f64 * tau, expected, 1e-9),
            format!("{bits} bits on {}: {t} s, expected {expected}", fs.name),
        )?;
        out.push(format!("{:.4} ms", t * 1e3));
    }
    Ok(out.join(", "))
}

/// 2. Default configuration produces both verdicts.
fn deadline_verdicts() -> Check {
    let cfg = ExperimentConfig::default();
    let rows = run_latency_study(&cfg).map_err(|e| e.to_string())?;
    let mut verdicts = BTreeMap::new();
    for r in rows.iter().filter(|r| r.term == "pose") {
        verdicts.insert((r.scenario.number(), r.structure.clone()), (r.meets_deadline, r.mean_s));
    }
    let pass = verdicts.values().filter(|v| v.0).count();
    let fail = verdicts.len() - pass;
    ensure(fail >= 1 && pass >= 4, format!("{pass} meet the deadline, {fail} miss it"))?;
    let misses: Vec<String> = verdicts
        .iter()
        .filter(|(_, v)| !v.0)
        .map(|((s, f), v)| format!("S{s}/{f} {:.1} ms", v.1 * 1e3))
        .collect();
    Ok(format!("{pass} pass, {fail} fail ({})", misses.join(", ")))
}

/// 3. Monte-Carlo BER of the zero-forcing uplink against the exact AWGN curve.
fn ber_against_theory() -> Check {
    let snr_db = [10.0, 15.0, 20.0, 24.32];
    let bits = 10_000_000;
    let channel = generate_channel(100, 10, 16, 7).map_err(|e| e.to_string())?;
    let qam = QamConstellation::new(64).map_err(|e| e.to_string())?;
    let curve = ber_curve(&channel, &snr_db, bits, &qam, 11).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for p in &curve.points {
        let theory = awgn_ber_exact(db_to_linear(p.snr_db), 64);
        let z = (p.ber - theory) / p.std_error;
        ensure(p.n_bits >= bits, format!("only {} bits at {} dB", p.n_bits, p.snr_db))?;
        ensure(
            z.abs() <= 3.0,
            format!("{} dB: simulated {:.4e}, theory {:.4e}, z = {z:.2}", p.snr_db, p.ber, theory),
        )?;
        out.push(format!("{} dB z={z:+.2}", p.snr_db));
    }
    Ok(out.join(", "))
}

/// 4. Device transmit power within 3 dB of the reference values.
fn power_targets() -> Check {
    let rows = run_power_study(&ExperimentConfig::default()).map_err(|e| e.to_string())?;
    let power = |target: f64| {
        rows.iter()
            .find(|r| r.ber_target == target)
            .map(|r| r.power_dbm)
            .ok_or(format!("no row for {target}"))
    };
    let (p4, p5) = (power(1e-4)?, power(1e-5)?);
    let ref4 = 10.0 * 0.856f64.log10();
    let ref5 = 10.0 * 1.356f64.log10();
    ensure((p4 - ref4).abs() <= 3.0, format!("1e-4 needs {p4:.3} dBm, reference {ref4:.3} dBm"))?;
    ensure((p5 - ref5).abs() <= 3.0, format!("1e-5 needs {p5:.3} dBm, reference {ref5:.3} dBm"))?;
    let gap = p5 - p4;
    ensure((0.5..=3.5).contains(&gap), format!("gap {gap:.3} dB"))?;
    Ok(format!("{p4:.3} dBm @1e-4, {p5:.3} dBm @1e-5, gap {gap:.3} dB"))
}

/// 5. Error counts match the binomial mean and positions are uniform.
fn corruption_statistics() -> Check {
    let n_bytes = ScenarioId::RawImages.uplink_bytes();
    let n_bits = n_bytes as f64 * 8.0;
    let ber = 1e-4;
    let trials = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut buf = vec![0u8; n_bytes];
    let mut total = 0.0;
    for _ in 0..trials {
        buf.fill(0);
        let k = corrupt(&mut buf, ber, &mut rng).map_err(|e| e.to_string())?;
        let ones: u64 = buf.iter().map(|b| b.count_ones() as u64).sum();
        ensure(ones == k, format!("reported {k} flips, found {ones}"))?;
        total += k as f64;
    }
    let mean = total / trials as f64;
    let expected = n_bits * ber;
    let se = (n_bits * ber * (1.0 - ber) / trials as f64).sqrt();
    ensure(
        (mean - expected).abs() <= 3.0 * se,
        format!("mean {mean:.2} flips, expected {expected:.2} +- {:.2}", 3.0 * se),
    )?;

    // one flip in one byte, many times: the flipped position must be uniform
    let draws = 8000;
    let mut counts = [0u64; 8];
    for _ in 0..draws {
        let mut b = [0u8];
        mimoxr::bitstorm::flip_bits(&mut b, 1, &mut rng).map_err(|e| e.to_string())?;
        counts[b[0].trailing_zeros() as usize] += 1;
    }
    let e = draws as f64 / 8.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    let p = 1.0 - ChiSquared::new(7.0).unwrap().cdf(chi2);
    ensure(p > 1e-3, format!("bit positions not uniform: chi2 {chi2:.2}, p {p:.2e}"))?;
    Ok(format!("mean {mean:.2} vs {expected:.2}, chi2 p = {p:.3}"))
}

/// 6. Clean pipeline recovers the trajectory; Jacobian matches finite
/// differences; payload sizes.
fn sandbox_fidelity() -> Check {
    let sizes = ScenarioId::ALL.map(payload_len);
    ensure(sizes == [921_600, 688_128, 86_016], format!("payload sizes {sizes:?}"))?;

    let bounds = Bounds::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let scene = generate_scene(1000, bounds, &mut rng).map_err(|e| e.to_string())?;
    let traj = generate_trajectory(100, bounds, &mut rng).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for sc in ScenarioId::ALL {
        let run = run_pipeline(&scene, &traj, sc, 0.0, &PipelineConfig::default(), RunSeeds {
            observation: 1,
            corruption: 2,
        })
        .map_err(|e| e.to_string())?;
        ensure(run.estimate.n_unsolved() == 0, format!("S{}: unsolved frames", sc.number()))?;
        let ate = ate_translation(&run.estimate.solved_poses(), traj.frames()).map_err(|e| e.to_string())?;
        ensure(ate.rmse < 1e-5, format!("S{}: ATE {:.3e} m", sc.number(), ate.rmse))?;
        worst = worst.max(ate.rmse);
    }

    let cam = CameraModel::default();
    let mut max_rel: f64 = 0.0;
    for _ in 0..50 {
        let pose = Isometry3::from_parts(
            Translation3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)),
            UnitQuaternion::from_scaled_axis(Vector3::new(
                rng.random_range(-0.3..0.3),
                rng.random_range(-0.3..0.3),
                rng.random_range(-0.3..0.3),
            )),
        );
        let pc = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(1.0..5.0));
        let world = pose.inverse_transform_point(&pc.into()).coords;
        let obs = Vector2::new(320.0, 240.0);
        let j = reprojection_jacobian(&pose, &world, &cam);
        let h = 1e-6;
        for k in 0..6 {
            let mut d = Vector6::zeros();
            d[k] = h;
            let plus = reprojection_residual(&apply_update(&pose, &d), &world, &obs, &cam);
            let minus = reprojection_residual(&apply_update(&pose, &-d), &world, &obs, &cam);
            let fd = (plus - minus) / (2.0 * h);
            let col = j.column(k);
            let rel = (fd - col).norm() / col.norm().max(1.0);
            max_rel = max_rel.max(rel);
        }
    }
    ensure(max_rel < 1e-5, format!("Jacobian differs from finite differences by {max_rel:.2e}"))?;
    Ok(format!("worst ATE {worst:.2e} m, Jacobian rel err {max_rel:.1e}, sizes {sizes:?}"))
}

/// 7. Default sensitivity study: normalised error never decreases with BER,
/// and the expected corrupted bits are ordered S1 > S2 > S3.
fn sensitivity_monotone(csv: &str) -> Check {
    let mut by_scenario: BTreeMap<u8, Vec<(f64, f64)>> = BTreeMap::new();
    for line in csv.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let sc: u8 = f[0].parse().map_err(|_| format!("bad row {line}"))?;
        let ber: f64 = f[1].parse().map_err(|_| format!("bad row {line}"))?;
        let mean: f64 = f[2].parse().map_err(|_| format!("bad row {line}"))?;
        by_scenario.entry(sc).or_default().push((ber, mean));
    }
    ensure(by_scenario.len() == 3, format!("{} scenarios in output", by_scenario.len()))?;
    let mut out = Vec::new();
    for (sc, rows) in &by_scenario {
        for w in rows.windows(2) {
            ensure(w[0].0 < w[1].0, format!("S{sc}: BER grid not increasing"))?;
            ensure(
                w[1].1 >= w[0].1,
                format!("S{sc}: {:.4}% at {:e} but {:.4}% at {:e}", w[0].1, w[0].0, w[1].1, w[1].0),
            )?;
        }
        out.push(format!("S{sc} {:.3}%..{:.1}%", rows[1].1, rows.last().unwrap().1));
    }

    let cfg = ExperimentConfig::default();
    for &ber in &cfg.sensitivity.ber_grid {
        let expected = ScenarioId::ALL.map(|s| payload_len(s) as f64 * 8.0 * ber);
        ensure(
            expected[0] > expected[1] && expected[1] > expected[2],
            format!("expected corrupted bits at {ber:e}: {expected:?}"),
        )?;
    }
    // the simulated counts follow the same ordering
    let bounds = Bounds::default();
    let scene = generate_scene(300, bounds, &mut seed::rng(7, &[1])).map_err(|e| e.to_string())?;
    let traj = generate_trajectory(10, bounds, &mut seed::rng(7, &[2])).map_err(|e| e.to_string())?;
    let flipped = ScenarioId::ALL.map(|sc| {
        run_pipeline(&scene, &traj, sc, 1e-3, &PipelineConfig::default(), RunSeeds {
            observation: 0,
            corruption: 3,
        })
        .map(|r| r.flipped_bits)
        .unwrap_or(0)
    });
    ensure(
        flipped[0] > flipped[1] && flipped[1] > flipped[2],
        format!("flipped bits at 1e-3 over 10 frames: {flipped:?}"),
    )?;
    Ok(format!("{}; flipped {flipped:?}", out.join(", ")))
}

/// 8. ATE invariance, the two-level normalisation example and a constant
/// bootstrap.
fn metrics_examples() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let gt: Vec<PoseStamped> = (0..40)
        .map(|i| PoseStamped {
            timestamp: i as f64 / 30.0,
            pose: Isometry3::translation(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ),
        })
        .collect();
    let rot = UnitQuaternion::from_scaled_axis(Vector3::new(0.4, -1.1, 0.7));
    let shift = Vector3::new(3.0, -2.0, 0.5);
    let scale = 2.7;
    let est: Vec<PoseStamped> = gt
        .iter()
        .map(|p| PoseStamped {
            timestamp: p.timestamp,
            pose: Isometry3::from_parts((scale * (rot * p.pose.translation.vector) + shift).into(), rot),
        })
        .collect();
    let ate = ate_translation(&est, &gt).map_err(|e| e.to_string())?.rmse;
    ensure(ate < 1e-9, format!("ATE after similarity transform {ate:e}"))?;

    let pct = normalize_vs_baseline(&[vec![11.0, 13.0], vec![5.0]], &[10.0, 5.0]).map_err(|e| e.to_string())?;
    ensure(pct == 10.0, format!("two-level normalisation gave {pct}"))?;

    let s = bootstrap_stats(&[2.5; 20], 1000, 0.95, &mut rng).map_err(|e| e.to_string())?;
    ensure(
        s.mean == 2.5 && s.std == 0.0 && s.ci_low == 2.5 && s.ci_high == 2.5,
        format!("constant bootstrap gave {s:?}"),
    )?;
    Ok(format!("ATE {ate:.1e}, normalised {pct}%, constant CI [{}, {}]", s.ci_low, s.ci_high))
}

/// 9. Every study is byte-identical when repeated with the same config.
fn determinism(sensitivity_csv: &str) -> Check {
    let cfg = ExperimentConfig::default();
    for study in [Study::Latency, Study::Ber, Study::Power] {
        let a = run_study(&cfg, study).map_err(|e| e.to_string())?;
        let b = run_study(&cfg, study).map_err(|e| e.to_string())?;
        ensure(a == b, format!("{study} output differs between runs"))?;
    }
    let again = run_study(&cfg, Study::Sensitivity).map_err(|e| e.to_string())?;
    ensure(again == sensitivity_csv, "sensitivity output differs between runs")?;
    Ok("latency, sensitivity, ber, power identical".into())
}

fn main() -> ExitCode {
    let mut failed = 0;
    // budgets are for an optimised build; `None` means bounded by the study
    let mut report = |id: u32, name: &str, budget: Option<u64>, f: &mut dyn FnMut() -> Check| {
        let start = Instant::now();
        let mut res = f();
        let secs = start.elapsed().as_secs_f64();
        if let (Ok(_), Some(limit)) = (&res, budget) {
            if secs > limit as f64 {
                res = Err(format!("over the {limit} s budget"));
            }
        }
        match res {
            Ok(detail) => println!("[PASS] {id} {name}: {detail} ({secs:.1} s)"),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {id} {name}: {why} ({secs:.1} s)");
            }
        }
    };

    let start = Instant::now();
    let mut sensitivity: Result<String, String> = Err("sensitivity study did not run".into());
    report(1, "latency examples", Some(1), &mut latency_examples);
    report(2, "deadline verdicts", Some(5), &mut deadline_verdicts);
    report(3, "zero-forcing BER vs theory", Some(300), &mut ber_against_theory);
    report(4, "transmit power", Some(1), &mut power_targets);
    report(5, "bit error injection", Some(30), &mut corruption_statistics);
    report(6, "sandbox fidelity", Some(60), &mut sandbox_fidelity);
    report(7, "sensitivity monotone in BER", Some(600), &mut || {
        sensitivity = run_study(&ExperimentConfig::default(), Study::Sensitivity).map_err(|e| e.to_string());
        sensitivity_monotone(sensitivity.as_ref()?)
    });
    report(8, "metrics", Some(5), &mut metrics_examples);
    report(9, "determinism", None, &mut || determinism(sensitivity.as_ref()?));
    println!("acceptance: {} of 9 criteria failed ({:.0} s)", failed, start.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
