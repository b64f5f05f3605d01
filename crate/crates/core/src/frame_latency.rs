//! Pose-correction latency over TDD radio frame structures.
//!
//! The pose correction latency is the sum of five terms:
//!
//! ```text
//! tau_pose = tau_device + tau_ul + tau_bs + tau_offloaded + tau_dl
//! ```
//!
//! `tau_ul` and `tau_dl` come from the frame structure. For a direction `d`
//! with `n_d` data symbols per slot of `n` symbols:
//!
//! ```text
//! tau_d = tau_symb * (wait_d + symbols_per_pose + slots_per_pose * (n - n_d))
//! ```
//!
//! where `wait_d` is the worst-case number of symbols before the first `d`
//! symbol starts, and `slots_per_pose` counts the slot boundaries crossed by
//! the payload. Device-side RF/baseband latency, propagation delay and
//! queueing are not modelled.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::ScenarioId;

/// OFDM symbol duration of the reference testbed.
pub const DEFAULT_TAU_SYMB: f64 = 71.4e-6;
/// Base-station RF front-end and baseband processing latency.
pub const DEFAULT_TAU_BS: f64 = 132e-6;
/// Pose correction deadline.
pub const DEFAULT_DEADLINE: f64 = 0.200;
pub const DEFAULT_SUBCARRIERS: u32 = 1200;
/// 64-QAM.
pub const DEFAULT_BITS_PER_QAM_SYMBOL: u32 = 6;

#[derive(Debug, Error, PartialEq)]
pub enum LatencyError {
    #[error("frame structure `{name}`: {reason}")]
    InvalidStructure { name: String, reason: String },
    #[error("frame structure `{0}` carries zero bits per OFDM symbol")]
    ZeroCapacity(String),
    #[error("payload must be at least one bit")]
    EmptyPayload,
    #[error("no exec-time model configured for scenario {0}")]
    MissingExecModel(ScenarioId),
    #[error("invalid exec-time model: {0}")]
    InvalidExecModel(String),
}

pub type Result<T> = std::result::Result<T, LatencyError>;

/// Role of one OFDM symbol inside a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymbolRole {
    #[serde(alias = "P")]
    Pilot,
    #[serde(alias = "UL", alias = "U")]
    Uplink,
    #[serde(alias = "DL", alias = "D")]
    Downlink,
    #[serde(alias = "G")]
    Guard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Uplink,
    Downlink,
}

impl Direction {
    fn role(self) -> SymbolRole {
        match self {
            Direction::Uplink => SymbolRole::Uplink,
            Direction::Downlink => SymbolRole::Downlink,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Uplink => "UL",
            Direction::Downlink => "DL",
        })
    }
}

/// Slot layout plus the modulation parameters that set per-symbol capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameStructure {
    pub name: String,
    pub layout: Vec<SymbolRole>,
    #[serde(default = "default_subcarriers")]
    pub n_subcarriers: u32,
    #[serde(default = "default_bits")]
    pub bits_per_qam_symbol: u32,
    #[serde(default = "default_tau_symb")]
    pub tau_symb: f64,
}

fn default_subcarriers() -> u32 {
    DEFAULT_SUBCARRIERS
}
fn default_bits() -> u32 {
    DEFAULT_BITS_PER_QAM_SYMBOL
}
fn default_tau_symb() -> f64 {
    DEFAULT_TAU_SYMB
}

impl FrameStructure {
    /// Builds a structure with the default 1200 subcarriers, 64-QAM and
    /// 71.4 us symbols, validating the layout.
    pub fn new(name: impl Into<String>, layout: Vec<SymbolRole>) -> Result<Self> {
        let fs = FrameStructure {
            name: name.into(),
            layout,
            n_subcarriers: DEFAULT_SUBCARRIERS,
            bits_per_qam_symbol: DEFAULT_BITS_PER_QAM_SYMBOL,
            tau_symb: DEFAULT_TAU_SYMB,
        };
        fs.validate()?;
        Ok(fs)
    }

    /// Balanced uplink/downlink: `P U U U U P D D D D`.
    pub fn preset_a() -> Self {
        use SymbolRole::*;
        Self::new(
            "A",
            vec![Pilot, Uplink, Uplink, Uplink, Uplink, Pilot, Downlink, Downlink, Downlink, Downlink],
        )
        .expect("preset A is valid")
    }

    /// Uplink-heavy: `P U U U U U U U U D`.
    pub fn preset_b() -> Self {
        use SymbolRole::*;
        let mut layout = vec![Pilot];
        layout.extend(std::iter::repeat_n(Uplink, 8));
        layout.push(Downlink);
        Self::new("B", layout).expect("preset B is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| LatencyError::InvalidStructure {
            name: self.name.clone(),
            reason: reason.to_owned(),
        };
        if self.layout.len() < 2 {
            return Err(bad("layout needs at least 2 symbols"));
        }
        if self.data_symbols(Direction::Uplink) == 0 {
            return Err(bad("layout has no uplink data symbol"));
        }
        if self.data_symbols(Direction::Downlink) == 0 {
            return Err(bad("layout has no downlink data symbol"));
        }
        if self.n_subcarriers == 0 {
            return Err(bad("n_subcarriers must be at least 1"));
        }
        if !matches!(self.bits_per_qam_symbol, 2 | 4 | 6) {
            return Err(bad("bits_per_qam_symbol must be 2, 4 or 6"));
        }
        if !(self.tau_symb > 0.0 && self.tau_symb.is_finite()) {
            return Err(bad("tau_symb must be positive"));
        }
        Ok(())
    }

    /// N_symb: symbols per slot.
    pub fn slot_len(&self) -> u64 {
        self.layout.len() as u64
    }

    /// N_UL_symb or N_DL_symb.
    pub fn data_symbols(&self, dir: Direction) -> u64 {
        let role = dir.role();
        self.layout.iter().filter(|&&r| r == role).count() as u64
    }

    /// Payload bits carried by one OFDM symbol across all subcarriers.
    pub fn bits_per_ofdm_symbol(&self) -> u64 {
        self.n_subcarriers as u64 * self.bits_per_qam_symbol as u64
    }
}

/// Number of OFDM data symbols needed for `payload_bits`.
pub fn symbols_per_pose(payload_bits: u64, fs: &FrameStructure) -> Result<u64> {
    if payload_bits == 0 {
        return Err(LatencyError::EmptyPayload);
    }
    let capacity = fs.bits_per_ofdm_symbol();
    if capacity == 0 {
        return Err(LatencyError::ZeroCapacity(fs.name.clone()));
    }
    Ok(payload_bits.div_ceil(capacity))
}

/// Number of slot boundaries crossed: `ceil(n / n_dir) - 1`.
pub fn slots_per_pose(n_symb_pose: u64, fs: &FrameStructure, dir: Direction) -> Result<u64> {
    if n_symb_pose == 0 {
        return Err(LatencyError::EmptyPayload);
    }
    let per_slot = direction_symbols(fs, dir)?;
    Ok(n_symb_pose.div_ceil(per_slot) - 1)
}

/// Worst-case whole symbols elapsed between an arrival and the start of the
/// next symbol of `dir`: the largest cyclic gap between consecutive start
/// indices of `dir` symbols.
pub fn worst_case_wait(fs: &FrameStructure, dir: Direction) -> Result<u64> {
    direction_symbols(fs, dir)?;
    let role = dir.role();
    let n = fs.layout.len();
    let starts: Vec<usize> = fs
        .layout
        .iter()
        .enumerate()
        .filter_map(|(i, &r)| (r == role).then_some(i))
        .collect();
    let gap = starts
        .iter()
        .zip(starts.iter().cycle().skip(1))
        .map(|(&a, &b)| if b > a { b - a } else { b + n - a })
        .max()
        .unwrap_or(n);
    Ok(gap as u64)
}

/// Transmission time for `payload_bits` in direction `dir`, seconds.
pub fn transmission_latency(payload_bits: u64, fs: &FrameStructure, dir: Direction) -> Result<f64> {
    Ok(fs.tau_symb * transmission_symbols(payload_bits, fs, dir)? as f64)
}

/// Transmission time expressed in whole OFDM symbol durations.
pub fn transmission_symbols(payload_bits: u64, fs: &FrameStructure, dir: Direction) -> Result<u64> {
    let wait = worst_case_wait(fs, dir)?;
    let symbols = symbols_per_pose(payload_bits, fs)?;
    let slots = slots_per_pose(symbols, fs, dir)?;
    let overhead = fs.slot_len() - fs.data_symbols(dir);
    Ok(wait + symbols + slots * overhead)
}

fn direction_symbols(fs: &FrameStructure, dir: Direction) -> Result<u64> {
    match fs.data_symbols(dir) {
        0 => Err(LatencyError::InvalidStructure {
            name: fs.name.clone(),
            reason: format!("no {dir} symbols in layout"),
        }),
        n => Ok(n),
    }
}

/// Distribution of an execution time, seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExecTimeModel {
    Constant { value: f64 },
    Empirical { samples: Vec<f64> },
    /// Normal distribution conditioned on being non-negative.
    NormalTruncated { mean: f64, std: f64 },
}

impl ExecTimeModel {
    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(LatencyError::InvalidExecModel(m.to_owned()));
        match self {
            ExecTimeModel::Constant { value } if !(*value >= 0.0 && value.is_finite()) => {
                err("constant must be finite and >= 0")
            }
            ExecTimeModel::Empirical { samples } if samples.is_empty() => {
                err("empirical sample list is empty")
            }
            ExecTimeModel::Empirical { samples }
                if samples.iter().any(|s| !(*s >= 0.0 && s.is_finite())) =>
            {
                err("empirical samples must be finite and >= 0")
            }
            ExecTimeModel::NormalTruncated { mean, std }
                if !(mean.is_finite() && *std >= 0.0 && std.is_finite()) =>
            {
                err("normal model needs finite mean and std >= 0")
            }
            ExecTimeModel::NormalTruncated { mean, std } if *std == 0.0 && *mean < 0.0 => {
                err("degenerate normal model with negative mean")
            }
            _ => Ok(()),
        }
    }

    /// Draws one non-negative execution time.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ExecTimeModel::Constant { value } => *value,
            ExecTimeModel::Empirical { samples } => samples[rng.random_range(0..samples.len())],
            ExecTimeModel::NormalTruncated { mean, std } => {
                if *std == 0.0 {
                    return mean.max(0.0);
                }
                let normal = Normal::new(*mean, *std).expect("validated std");
                // rejection; falls back to zero for pathological far-negative means
                for _ in 0..1000 {
                    let x = normal.sample(rng);
                    if x >= 0.0 {
                        return x;
                    }
                }
                0.0
            }
        }
    }

    /// Expected value of the distribution (before truncation for the normal
    /// kind).
    pub fn nominal_mean(&self) -> f64 {
        match self {
            ExecTimeModel::Constant { value } => *value,
            ExecTimeModel::Empirical { samples } => samples.iter().sum::<f64>() / samples.len() as f64,
            ExecTimeModel::NormalTruncated { mean, .. } => *mean,
        }
    }
}

/// Per-scenario packet sizes and execution-time models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioTiming {
    pub id: ScenarioId,
    pub uplink_bytes: u64,
    pub downlink_bytes: u64,
    pub device: ExecTimeModel,
    pub offloaded: ExecTimeModel,
}

impl ScenarioTiming {
    /// Shipped defaults. These execution times are placeholders, not
    /// measurements: 15/35/35 ms on the device and 25/18/15 ms offloaded,
    /// each a normal with a 25% coefficient of variation.
    pub fn defaults() -> Vec<ScenarioTiming> {
        let normal = |mean: f64| ExecTimeModel::NormalTruncated { mean, std: 0.25 * mean };
        [(15e-3, 25e-3), (35e-3, 18e-3), (35e-3, 15e-3)]
            .into_iter()
            .zip(ScenarioId::ALL)
            .map(|((dev, off), id)| ScenarioTiming {
                id,
                uplink_bytes: id.uplink_bytes() as u64,
                downlink_bytes: id.downlink_bytes() as u64,
                device: normal(dev),
                offloaded: normal(off),
            })
            .collect()
    }
}

/// The five latency terms, their sum and the deadline verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyBreakdown {
    pub tau_device: f64,
    pub tau_ul: f64,
    pub tau_bs: f64,
    pub tau_offloaded: f64,
    pub tau_dl: f64,
    pub tau_pose: f64,
    pub meets_deadline: bool,
}

impl LatencyBreakdown {
    pub fn from_terms(
        tau_device: f64,
        tau_ul: f64,
        tau_bs: f64,
        tau_offloaded: f64,
        tau_dl: f64,
        deadline: f64,
    ) -> Self {
        let tau_pose = tau_device + tau_ul + tau_bs + tau_offloaded + tau_dl;
        LatencyBreakdown {
            tau_device,
            tau_ul,
            tau_bs,
            tau_offloaded,
            tau_dl,
            tau_pose,
            meets_deadline: tau_pose <= deadline,
        }
    }

    /// Terms in order, labelled as in the latency CSV.
    pub fn terms(&self) -> [(&'static str, f64); 6] {
        [
            ("device", self.tau_device),
            ("ul", self.tau_ul),
            ("bs", self.tau_bs),
            ("offloaded", self.tau_offloaded),
            ("dl", self.tau_dl),
            ("pose", self.tau_pose),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyParams {
    pub tau_bs: f64,
    pub deadline: f64,
}

impl Default for LatencyParams {
    fn default() -> Self {
        LatencyParams {
            tau_bs: DEFAULT_TAU_BS,
            deadline: DEFAULT_DEADLINE,
        }
    }
}

/// Samples one pose correction latency for `scenario` over `fs`.
pub fn pose_latency<R: Rng + ?Sized>(
    scenario: ScenarioId,
    fs: &FrameStructure,
    timings: &[ScenarioTiming],
    params: &LatencyParams,
    rng: &mut R,
) -> Result<LatencyBreakdown> {
    let timing = timings
        .iter()
        .find(|t| t.id == scenario)
        .ok_or(LatencyError::MissingExecModel(scenario))?;
    let tau_ul = transmission_latency(timing.uplink_bytes * 8, fs, Direction::Uplink)?;
    let tau_dl = transmission_latency(timing.downlink_bytes * 8, fs, Direction::Downlink)?;
    let tau_device = timing.device.sample(rng);
    let tau_offloaded = timing.offloaded.sample(rng);
    Ok(LatencyBreakdown::from_terms(
        tau_device,
        tau_ul,
        params.tau_bs,
        tau_offloaded,
        tau_dl,
        params.deadline,
    ))
}
