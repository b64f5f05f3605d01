use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::frame_latency::{FrameStructure, ScenarioTiming, DEFAULT_DEADLINE, DEFAULT_TAU_BS};
use crate::linkbudget::LinkBudgetConfig;
use crate::scenario::ScenarioId;

use super::{Result, RunnerError};

/// Complete description of an experiment. Every section is optional in the
/// TOML file; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub frame_structures: Vec<FrameStructure>,
    pub scenarios: Vec<ScenarioTiming>,
    pub latency: LatencyConfig,
    pub sensitivity: SensitivityConfig,
    pub ber: BerConfig,
    pub power: PowerConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 42,
            out_dir: PathBuf::from("results"),
            frame_structures: vec![FrameStructure::preset_a(), FrameStructure::preset_b()],
            scenarios: ScenarioTiming::defaults(),
            latency: LatencyConfig::default(),
            sensitivity: SensitivityConfig::default(),
            ber: BerConfig::default(),
            power: PowerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencyConfig {
    /// Execution-time draws per (scenario, structure).
    pub samples: usize,
    pub tau_bs: f64,
    pub deadline: f64,
    /// Structure names to evaluate; all configured structures when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub structures: Option<Vec<String>>,
}

impl Default for LatencyConfig {
    fn default() -> Self {
        LatencyConfig {
            samples: 10_000,
            tau_bs: DEFAULT_TAU_BS,
            deadline: DEFAULT_DEADLINE,
            structures: None,
        }
    }
}

/// What the bootstrap resamples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapLevel {
    /// Per-trajectory mean changes.
    #[default]
    Trajectory,
    /// Individual run changes, pooled across trajectories.
    Run,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivityConfig {
    pub scenarios: Vec<ScenarioId>,
    pub ber_grid: Vec<f64>,
    pub trajectories: usize,
    pub frames: usize,
    pub landmarks: usize,
    /// Pixel noise std of the feature extractor. Must be positive so that
    /// the BER-0 baseline error is non-zero.
    pub pixel_noise_std: f64,
    /// Corruption trials per (trajectory, BER).
    pub trials: usize,
    pub bootstrap_draws: usize,
    pub ci: f64,
    pub bootstrap_level: BootstrapLevel,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        SensitivityConfig {
            scenarios: ScenarioId::ALL.to_vec(),
            ber_grid: vec![1e-5, 1e-4, 1e-3, 1e-2],
            trajectories: 10,
            frames: 100,
            landmarks: 1000,
            pixel_noise_std: 0.5,
            trials: 3,
            bootstrap_draws: 10_000,
            ci: 0.95,
            bootstrap_level: BootstrapLevel::Trajectory,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BerConfig {
    pub snr_db: Vec<f64>,
    pub bits_per_point: u64,
    pub qam_order: u32,
    pub antennas: usize,
    pub users: usize,
    pub subcarriers: usize,
    /// Channel files to concatenate along the user axis instead of drawing
    /// a synthetic Rayleigh channel.
    pub channel_files: Vec<PathBuf>,
}

impl Default for BerConfig {
    fn default() -> Self {
        BerConfig {
            snr_db: (0..=12).map(|i| 2.5 * i as f64).collect(),
            bits_per_point: 1_000_000,
            qam_order: 64,
            antennas: 100,
            users: 10,
            subcarriers: 16,
            channel_files: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SnrMode {
    /// Bisection on the analytic AWGN curve.
    #[default]
    Analytic,
    /// Interpolation on the simulated curve of the `ber` section.
    Simulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerConfig {
    pub ber_targets: Vec<f64>,
    pub qam_order: u32,
    pub snr_mode: SnrMode,
    pub link_budget: LinkBudgetConfig,
}

impl Default for PowerConfig {
    fn default() -> Self {
        PowerConfig {
            ber_targets: vec![1e-4, 1e-5],
            qam_order: 64,
            snr_mode: SnrMode::Analytic,
            link_budget: LinkBudgetConfig::default(),
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub trials: Option<usize>,
}

fn invalid(key: impl Into<String>, reason: impl Into<String>) -> RunnerError {
    RunnerError::Config {
        key: key.into(),
        reason: reason.into(),
    }
}

fn check_ber_list(key: &str, list: &[f64]) -> Result<()> {
    if list.is_empty() {
        return Err(invalid(key, "must not be empty"));
    }
    for (i, &b) in list.iter().enumerate() {
        if !(b > 0.0 && b < 0.5) {
            return Err(invalid(format!("{key}[{i}]"), format!("{b} is outside (0, 0.5)")));
        }
    }
    Ok(())
}

fn check_qam(key: &str, order: u32) -> Result<()> {
    if matches!(order, 4 | 16 | 64) {
        Ok(())
    } else {
        Err(invalid(key, format!("{order} is not one of 4, 16, 64")))
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| RunnerError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| RunnerError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(d) = &o.out_dir {
            self.out_dir = d.clone();
        }
        if let Some(t) = o.trials {
            self.sensitivity.trials = t;
        }
        self.validate()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable in TOML")
    }

    /// SHA-256 of the canonical TOML form, hex encoded. The output
    /// directory is left out: it does not change any result.
    pub fn sha256(&self) -> String {
        let mut canonical = self.clone();
        canonical.out_dir = PathBuf::new();
        hex::encode(Sha256::digest(canonical.to_toml().as_bytes()))
    }

    pub fn structure(&self, name: &str) -> Option<&FrameStructure> {
        self.frame_structures.iter().find(|f| f.name == name)
    }

    /// Structures selected for the latency study.
    pub fn latency_structures(&self) -> Vec<&FrameStructure> {
        match &self.latency.structures {
            None => self.frame_structures.iter().collect(),
            Some(names) => names.iter().filter_map(|n| self.structure(n)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_structures.is_empty() {
            return Err(invalid("frame_structures", "at least one frame structure is required"));
        }
        for (i, fs) in self.frame_structures.iter().enumerate() {
            fs.validate()
                .map_err(|e| invalid(format!("frame_structures[{i}]"), e.to_string()))?;
            if self.frame_structures[..i].iter().any(|o| o.name == fs.name) {
                return Err(invalid(format!("frame_structures[{i}].name"), format!("duplicate name `{}`", fs.name)));
            }
        }
        if self.scenarios.is_empty() {
            return Err(invalid("scenarios", "at least one scenario is required"));
        }
        for (i, s) in self.scenarios.iter().enumerate() {
            let key = |f: &str| format!("scenarios[{i}].{f}");
            if self.scenarios[..i].iter().any(|o| o.id == s.id) {
                return Err(invalid(key("id"), format!("scenario {} listed twice", s.id)));
            }
            if s.uplink_bytes == 0 {
                return Err(invalid(key("uplink_bytes"), "must be at least 1"));
            }
            if s.downlink_bytes == 0 {
                return Err(invalid(key("downlink_bytes"), "must be at least 1"));
            }
            s.device.validate().map_err(|e| invalid(key("device"), e.to_string()))?;
            s.offloaded.validate().map_err(|e| invalid(key("offloaded"), e.to_string()))?;
        }

        let l = &self.latency;
        if l.samples == 0 {
            return Err(invalid("latency.samples", "must be at least 1"));
        }
        if !(l.tau_bs >= 0.0 && l.tau_bs.is_finite()) {
            return Err(invalid("latency.tau_bs", "must be finite and >= 0"));
        }
        if !(l.deadline > 0.0 && l.deadline.is_finite()) {
            return Err(invalid("latency.deadline", "must be positive"));
        }
        if let Some(names) = &l.structures {
            if names.is_empty() {
                return Err(invalid("latency.structures", "must not be empty"));
            }
            for (i, n) in names.iter().enumerate() {
                if self.structure(n).is_none() {
                    return Err(invalid(format!("latency.structures[{i}]"), format!("unknown frame structure `{n}`")));
                }
            }
        }

        let s = &self.sensitivity;
        if s.scenarios.is_empty() {
            return Err(invalid("sensitivity.scenarios", "must not be empty"));
        }
        check_ber_list("sensitivity.ber_grid", &s.ber_grid)?;
        for (key, v, min) in [
            ("sensitivity.trajectories", s.trajectories, 1),
            ("sensitivity.frames", s.frames, 3),
            ("sensitivity.landmarks", s.landmarks, 4),
            ("sensitivity.trials", s.trials, 1),
            ("sensitivity.bootstrap_draws", s.bootstrap_draws, 1),
        ] {
            if v < min {
                return Err(invalid(key, format!("must be at least {min}, got {v}")));
            }
        }
        if !(s.pixel_noise_std > 0.0 && s.pixel_noise_std.is_finite()) {
            return Err(invalid("sensitivity.pixel_noise_std", "must be positive"));
        }
        if !(s.ci > 0.0 && s.ci < 1.0) {
            return Err(invalid("sensitivity.ci", "must lie in (0, 1)"));
        }

        let b = &self.ber;
        if b.snr_db.is_empty() {
            return Err(invalid("ber.snr_db", "must not be empty"));
        }
        if let Some(i) = b.snr_db.iter().position(|x| !x.is_finite()) {
            return Err(invalid(format!("ber.snr_db[{i}]"), "must be finite"));
        }
        if b.bits_per_point == 0 {
            return Err(invalid("ber.bits_per_point", "must be at least 1"));
        }
        check_qam("ber.qam_order", b.qam_order)?;
        if b.channel_files.is_empty() && !(b.users >= 1 && b.antennas > b.users && b.subcarriers >= 1) {
            return Err(invalid("ber.antennas", "need antennas > users >= 1 and subcarriers >= 1"));
        }

        let p = &self.power;
        check_ber_list("power.ber_targets", &p.ber_targets)?;
        check_qam("power.qam_order", p.qam_order)?;
        p.link_budget
            .validate()
            .map_err(|e| invalid("power.link_budget", e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.frame_structures.len(), 2);
        assert_eq!(c.sensitivity.ber_grid, vec![1e-5, 1e-4, 1e-3, 1e-2]);
    }

    #[test]
    fn canonical_form_round_trips() {
        let c = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.sha256(), c.sha256());
        let mut other = c.clone();
        other.seed = 7;
        assert_ne!(other.sha256(), c.sha256());
    }

    #[test]
    fn sections_parse() {
        let c = ExperimentConfig::from_toml_str(
            r#"
            seed = 9
            [[frame_structures]]
            name = "X"
            layout = ["P", "U", "U", "D"]

            [[scenarios]]
            id = 3
            uplink_bytes = 86016
            downlink_bytes = 40
            device = { kind = "constant", value = 0.0 }
            offloaded = { kind = "empirical", samples = [0.01, 0.02] }

            [latency]
            structures = ["X"]

            [power]
            snr_mode = "simulated"
            link_budget = { distance_m = 50.0, array_gain = { kind = "fixed", db = 10.0 } }
            "#,
        )
        .unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.latency_structures().len(), 1);
        assert_eq!(c.power.snr_mode, SnrMode::Simulated);
        assert_eq!(c.power.link_budget.distance_m, 50.0);
    }

    fn key_of(text: &str) -> String {
        match ExperimentConfig::from_toml_str(text).unwrap_err() {
            RunnerError::Config { key, .. } => key,
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn errors_carry_key_paths() {
        assert_eq!(key_of("frame_structures = []"), "frame_structures");
        assert_eq!(key_of("[latency]\nstructures = [\"A\", \"Z\"]"), "latency.structures[1]");
        assert_eq!(key_of("[sensitivity]\nber_grid = [1e-3, 0.7]"), "sensitivity.ber_grid[1]");
        assert_eq!(key_of("[sensitivity]\ntrials = 0"), "sensitivity.trials");
        assert_eq!(key_of("[ber]\nqam_order = 8"), "ber.qam_order");
        assert_eq!(
            key_of("[[frame_structures]]\nname = \"A\"\nlayout = [\"P\", \"U\"]"),
            "frame_structures[0]"
        );
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(
            ExperimentConfig::from_toml_str("[sensitivity]\ntrails = 3"),
            Err(RunnerError::Parse(_))
        ));
        assert!(matches!(ExperimentConfig::from_toml_str("colour = 1"), Err(RunnerError::Parse(_))));
    }

    #[test]
    fn overrides() {
        let mut c = ExperimentConfig::default();
        c.apply(&Overrides {
            seed: Some(5),
            out_dir: Some("x".into()),
            trials: Some(2),
        })
        .unwrap();
        assert_eq!((c.seed, c.sensitivity.trials), (5, 2));
        assert!(c
            .apply(&Overrides {
                trials: Some(0),
                ..Default::default()
            })
            .is_err());
    }
}
