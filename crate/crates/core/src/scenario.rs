//! The three offloading scenarios and their packet sizes.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Downlink pose record: f64 timestamp, 3x f32 position, 4x f32 quaternion,
/// u32 frame id.
pub const POSE_RECORD_BYTES: usize = 8 + 3 * 4 + 4 * 4 + 4;

/// Where the device/base-station split happens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum ScenarioId {
    /// Greyscale and depth images are sent raw.
    RawImages = 1,
    /// Features are extracted on the device; the depth image is sent along.
    FeaturesAndDepthImage = 2,
    /// Features with associated depths.
    FeaturesWithDepth = 3,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 3] = [
        ScenarioId::RawImages,
        ScenarioId::FeaturesAndDepthImage,
        ScenarioId::FeaturesWithDepth,
    ];

    pub fn number(self) -> u8 {
        self as u8
    }

    /// Uplink packet size in bytes (900 / 672 / 84 KiB).
    pub fn uplink_bytes(self) -> usize {
        match self {
            ScenarioId::RawImages => 900 * 1024,
            ScenarioId::FeaturesAndDepthImage => 672 * 1024,
            ScenarioId::FeaturesWithDepth => 84 * 1024,
        }
    }

    pub fn downlink_bytes(self) -> usize {
        POSE_RECORD_BYTES
    }
}

impl TryFrom<u8> for ScenarioId {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(ScenarioId::RawImages),
            2 => Ok(ScenarioId::FeaturesAndDepthImage),
            3 => Ok(ScenarioId::FeaturesWithDepth),
            other => Err(format!("scenario must be 1, 2 or 3 (got {other})")),
        }
    }
}

impl From<ScenarioId> for u8 {
    fn from(s: ScenarioId) -> u8 {
        s.number()
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}
