use std::fmt;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use crate::frame_latency::{pose_latency, LatencyBreakdown, LatencyParams};
use crate::linkbudget::{required_tx_power, snr_target_for_ber, snr_target_from_curve};
use crate::metrics::{ate_translation, bootstrap_stats, percent_change, BootstrapStats};
use crate::phy::{ber_curve, generate_channel, load_channels, BerCurve, QamConstellation};
use crate::sandbox::{generate_scene, generate_trajectory, run_pipeline, Bounds, PipelineConfig, RunSeeds};
use crate::scenario::ScenarioId;
use crate::seed::{self, label};

use super::config::{BootstrapLevel, ExperimentConfig, SnrMode};
use super::{Result, RunnerError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Study {
    Latency,
    Sensitivity,
    Ber,
    Power,
}

impl Study {
    pub const ALL: [Study; 4] = [Study::Latency, Study::Sensitivity, Study::Ber, Study::Power];

    pub fn name(self) -> &'static str {
        match self {
            Study::Latency => "latency",
            Study::Sensitivity => "sensitivity",
            Study::Ber => "ber",
            Study::Power => "power",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.csv", self.name())
    }
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One latency term of one (scenario, structure) pair, in seconds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyRow {
    pub scenario: ScenarioId,
    pub structure: String,
    pub term: &'static str,
    pub mean_s: f64,
    pub std_s: f64,
    pub worst_s: f64,
    /// Whether the mean total latency of the pair meets the deadline.
    pub meets_deadline: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityRow {
    pub scenario: ScenarioId,
    pub ber: f64,
    pub boot_mean_pct: f64,
    pub boot_std_pct: f64,
    pub ci_lo_pct: f64,
    pub ci_hi_pct: f64,
    /// Unsolved frames summed over all runs at this BER.
    pub n_unsolved: usize,
    /// Runs left out because their error or baseline was undefined.
    pub n_excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BerRow {
    pub snr_db: f64,
    pub ber: f64,
    pub n_bits: u64,
    pub n_errors: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerStudy {
    pub rows: Vec<BerRow>,
    pub curve: BerCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerRow {
    pub ber_target: f64,
    pub snr_db: f64,
    pub power_dbm: f64,
    pub power_mw: f64,
}

fn mean_std_max(v: &[f64]) -> (f64, f64, f64) {
    if v.iter().all(|&x| x == v[0]) {
        return (v[0], 0.0, v[0]);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std, v.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Mean, standard deviation and worst case of every latency term per
/// (scenario, structure), over `latency.samples` execution-time draws.
pub fn run_latency_study(cfg: &ExperimentConfig) -> Result<Vec<LatencyRow>> {
    let params = LatencyParams {
        tau_bs: cfg.latency.tau_bs,
        deadline: cfg.latency.deadline,
    };
    let mut rows = Vec::new();
    for (si, timing) in cfg.scenarios.iter().enumerate() {
        for (fi, fs) in cfg.latency_structures().into_iter().enumerate() {
            let mut rng = seed::rng(cfg.seed, &[label::LATENCY, si as u64, fi as u64]);
            let draws: Vec<LatencyBreakdown> = (0..cfg.latency.samples)
                .map(|_| pose_latency(timing.id, fs, std::slice::from_ref(timing), &params, &mut rng))
                .collect::<std::result::Result<_, _>>()?;
            let totals: Vec<f64> = draws.iter().map(|d| d.tau_pose).collect();
            let meets_deadline = mean_std_max(&totals).0 <= params.deadline;
            for t in 0..6 {
                let term = draws[0].terms()[t].0;
                let vals: Vec<f64> = draws.iter().map(|d| d.terms()[t].1).collect();
                let (mean_s, std_s, worst_s) = mean_std_max(&vals);
                rows.push(LatencyRow {
                    scenario: timing.id,
                    structure: fs.name.clone(),
                    term,
                    mean_s,
                    std_s,
                    worst_s,
                    meets_deadline,
                });
            }
        }
    }
    Ok(rows)
}

/// Errors of one trajectory for one scenario.
struct ScenarioRuns {
    baseline: Option<f64>,
    baseline_unsolved: usize,
    /// `[ber][trial]`; `None` when too few frames were solved.
    errors: Vec<Vec<Option<f64>>>,
    unsolved: Vec<usize>,
}

fn trajectory_runs(cfg: &ExperimentConfig, t: usize) -> Result<Vec<ScenarioRuns>> {
    let s = &cfg.sensitivity;
    let master = cfg.seed;
    let t64 = t as u64;
    let bounds = Bounds::default();
    let scene = generate_scene(
        s.landmarks,
        bounds,
        &mut seed::rng(master, &[label::SENSITIVITY, label::SCENE, t64]),
    )?;
    let traj = generate_trajectory(
        s.frames,
        bounds,
        &mut seed::rng(master, &[label::SENSITIVITY, label::TRAJECTORY, t64]),
    )?;
    let pipe = PipelineConfig {
        pixel_noise_std: s.pixel_noise_std,
        ..Default::default()
    };
    let observation = seed::derive(master, &[label::SENSITIVITY, label::OBSERVATION_NOISE, t64]);
    let ate = |run: &crate::sandbox::PipelineRun| {
        ate_translation(&run.estimate.solved_poses(), traj.frames())
            .ok()
            .map(|a| a.rmse)
    };
    s.scenarios
        .iter()
        .map(|&sc| {
            let base = run_pipeline(&scene, &traj, sc, 0.0, &pipe, RunSeeds { observation, corruption: 0 })?;
            let mut errors = Vec::with_capacity(s.ber_grid.len());
            let mut unsolved = Vec::with_capacity(s.ber_grid.len());
            for (bi, &ber) in s.ber_grid.iter().enumerate() {
                let mut errs = Vec::with_capacity(s.trials);
                let mut lost = 0;
                for trial in 0..s.trials {
                    let corruption = seed::derive(
                        master,
                        &[label::SENSITIVITY, label::CORRUPTION, sc.number() as u64, t64, bi as u64, trial as u64],
                    );
                    let run = run_pipeline(&scene, &traj, sc, ber, &pipe, RunSeeds { observation, corruption })?;
                    lost += run.estimate.n_unsolved();
                    errs.push(ate(&run));
                }
                errors.push(errs);
                unsolved.push(lost);
            }
            Ok(ScenarioRuns {
                baseline: ate(&base).filter(|&b| b > 0.0),
                baseline_unsolved: base.estimate.n_unsolved(),
                errors,
                unsolved,
            })
        })
        .collect()
}

/// Normalised localisation error against the BER-0 baseline, per scenario
/// and BER, aggregated by bootstrap. The first row of each scenario is the
/// baseline itself.
pub fn run_sensitivity_study(cfg: &ExperimentConfig) -> Result<Vec<SensitivityRow>> {
    let s = &cfg.sensitivity;
    let per_traj: Vec<Vec<ScenarioRuns>> = (0..s.trajectories)
        .into_par_iter()
        .map(|t| trajectory_runs(cfg, t))
        .collect::<Result<_>>()?;

    let boot = |values: &[f64], sc: ScenarioId, bi: usize| -> Result<BootstrapStats> {
        let mut rng = seed::rng(
            cfg.seed,
            &[label::SENSITIVITY, label::BOOTSTRAP, sc.number() as u64, bi as u64],
        );
        Ok(bootstrap_stats(values, s.bootstrap_draws, s.ci, &mut rng)?)
    };
    let row = |sc, ber, st: BootstrapStats, n_unsolved, n_excluded| SensitivityRow {
        scenario: sc,
        ber,
        boot_mean_pct: st.mean,
        boot_std_pct: st.std,
        ci_lo_pct: st.ci_low,
        ci_hi_pct: st.ci_high,
        n_unsolved,
        n_excluded,
    };

    let mut rows = Vec::new();
    for (k, &sc) in s.scenarios.iter().enumerate() {
        let runs: Vec<&ScenarioRuns> = per_traj.iter().map(|r| &r[k]).collect();
        let with_base = runs.iter().filter(|r| r.baseline.is_some()).count();
        if with_base == 0 {
            return Err(RunnerError::Study(format!(
                "scenario {sc}: no trajectory has a usable BER-0 baseline"
            )));
        }
        let base_unsolved = runs.iter().map(|r| r.baseline_unsolved).sum();
        let zeros = vec![0.0; with_base];
        rows.push(row(sc, 0.0, boot(&zeros, sc, 0)?, base_unsolved, runs.len() - with_base));

        for (bi, &ber) in s.ber_grid.iter().enumerate() {
            let mut values = Vec::new();
            let mut excluded = 0;
            for r in &runs {
                let errs: Vec<f64> = r.errors[bi].iter().flatten().copied().collect();
                excluded += r.errors[bi].len() - errs.len();
                let Some(b) = r.baseline else {
                    excluded += errs.len();
                    continue;
                };
                if errs.is_empty() {
                    continue;
                }
                let pct = percent_change(&errs, b)?;
                match s.bootstrap_level {
                    BootstrapLevel::Trajectory => values.push(pct.iter().sum::<f64>() / pct.len() as f64),
                    BootstrapLevel::Run => values.extend(pct),
                }
            }
            if values.is_empty() {
                return Err(RunnerError::Study(format!(
                    "scenario {sc}, BER {ber}: every run was excluded"
                )));
            }
            let unsolved = runs.iter().map(|r| r.unsolved[bi]).sum();
            rows.push(row(sc, ber, boot(&values, sc, bi + 1)?, unsolved, excluded));
        }
    }
    Ok(rows)
}

/// Monte-Carlo BER of the power-controlled zero-forcing uplink.
pub fn run_ber_study(cfg: &ExperimentConfig) -> Result<BerStudy> {
    let b = &cfg.ber;
    let channel = if b.channel_files.is_empty() {
        generate_channel(
            b.antennas,
            b.users,
            b.subcarriers,
            seed::derive(cfg.seed, &[label::BER, label::CHANNEL]),
        )?
    } else {
        load_channels(&b.channel_files)?
    };
    let qam = QamConstellation::new(b.qam_order)?;
    let curve = ber_curve(
        &channel,
        &b.snr_db,
        b.bits_per_point,
        &qam,
        seed::derive(cfg.seed, &[label::BER]),
    )?;
    let rows = curve
        .points
        .iter()
        .map(|p| BerRow {
            snr_db: p.snr_db,
            ber: p.ber,
            n_bits: p.n_bits,
            n_errors: p.n_errors,
        })
        .collect();
    Ok(BerStudy { rows, curve })
}

/// Required device transmit power for each target BER.
pub fn run_power_study(cfg: &ExperimentConfig) -> Result<Vec<PowerRow>> {
    let p = &cfg.power;
    let curve = match p.snr_mode {
        SnrMode::Analytic => None,
        SnrMode::Simulated => {
            if p.qam_order != cfg.ber.qam_order {
                return Err(RunnerError::Config {
                    key: "power.qam_order".into(),
                    reason: "simulated mode needs the same QAM order as the ber section".into(),
                });
            }
            Some(run_ber_study(cfg)?.curve)
        }
    };
    p.ber_targets
        .iter()
        .map(|&ber_target| {
            let snr_db = match &curve {
                None => snr_target_for_ber(ber_target, p.qam_order)?,
                Some(c) => snr_target_from_curve(ber_target, c)?,
            };
            let tx = required_tx_power(snr_db, &p.link_budget)?;
            Ok(PowerRow {
                ber_target,
                snr_db,
                power_dbm: tx.dbm,
                power_mw: tx.mw,
            })
        })
        .collect()
}

/// CSV text with a provenance comment line, optional extra comment lines
/// and a header row.
pub fn render_csv<T: Serialize>(cfg: &ExperimentConfig, study: Study, comments: &[String], rows: &[T]) -> String {
    let mut out = format!("# config_sha256={} seed={} study={}\n", cfg.sha256(), cfg.seed, study);
    for c in comments {
        out.push_str(&format!("# {c}\n"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("rows serialize to CSV");
    }
    out.push_str(&String::from_utf8(w.into_inner().expect("in-memory writer")).expect("CSV is UTF-8"));
    out
}

/// Runs one study and renders its CSV.
pub fn run_study(cfg: &ExperimentConfig, study: Study) -> Result<String> {
    Ok(match study {
        Study::Latency => render_csv(cfg, study, &[], &run_latency_study(cfg)?),
        Study::Sensitivity => {
            let s = &cfg.sensitivity;
            let note = format!(
                "bootstrap_level={:?} draws={} ci={} trials={}",
                s.bootstrap_level, s.bootstrap_draws, s.ci, s.trials
            )
            .to_lowercase();
            render_csv(cfg, study, &[note], &run_sensitivity_study(cfg)?)
        }
        Study::Ber => {
            let b = run_ber_study(cfg)?;
            let note = format!("skipped_subcarriers={}", b.curve.skipped_subcarriers);
            render_csv(cfg, study, &[note], &b.rows)
        }
        Study::Power => render_csv(cfg, study, &[], &run_power_study(cfg)?),
    })
}

/// Runs `studies` in order and writes `<out_dir>/<study>.csv` for each.
pub fn run_all(cfg: &ExperimentConfig, studies: &[Study]) -> Result<Vec<PathBuf>> {
    let io = |path: &std::path::Path| {
        let path = path.display().to_string();
        move |source| RunnerError::Io { path, source }
    };
    std::fs::create_dir_all(&cfg.out_dir).map_err(io(&cfg.out_dir))?;
    studies
        .iter()
        .map(|&s| {
            let text = run_study(cfg, s)?;
            let path = cfg.out_dir.join(s.file_name());
            std::fs::write(&path, text).map_err(io(&path))?;
            Ok(path)
        })
        .collect()
}
