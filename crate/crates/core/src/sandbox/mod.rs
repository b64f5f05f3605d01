//! Synthetic known-map localisation, standing in for a visual SLAM front end.
//!
//! Each frame runs the offloading chain end to end:
//!
//! 1. [`observe`] projects the landmarks of a [`Scene`] into a pinhole camera
//!    at the ground-truth pose, yielding features with pixel coordinates,
//!    depths and binary descriptors.
//! 2. [`encode_payload`] serializes them into the uplink packet of the
//!    offloading scenario (raw images, features plus depth image, or features
//!    with depths).
//! 3. The packet is corrupted with uncoded bit errors ([`crate::bitstorm`]),
//!    then decoded and range-sanitised at the base station.
//! 4. [`match_features`] associates decoded descriptors with the known map,
//!    and [`solve_pose`] recovers the camera pose.
//!
//! This is localisation against a fixed, known map: there is no mapping, loop
//! closure or bundle adjustment. It isolates how bit errors in each payload
//! encoding propagate to pose accuracy.

mod camera;
mod matching;
mod payload;
mod pipeline;
mod scene;
mod solver;
mod trajectory;

pub use camera::{observe, CameraModel, Feature, MIN_VISIBLE};
pub use matching::{match_features, Correspondence, MAX_MATCH_DISTANCE, MIN_MATCH_MARGIN};
pub use payload::{decode_payload, encode_payload, payload_len, wire_quantize, MAX_FEATURES};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineRun, RunSeeds};
pub use scene::{generate_scene, Bounds, Descriptor, Landmark, Scene, MIN_DESCRIPTOR_DISTANCE};
pub use solver::{
    apply_update, reprojection_jacobian, reprojection_residual, solve_pose, solve_pose_with, PoseSolution, SolverConfig,
};
pub use trajectory::{
    generate_trajectory, parse_trajectory, read_trajectory, write_trajectory, EstimatedFrame, GroundTruthTrajectory, PoseStamped,
    TrajectoryEstimate, DEFAULT_FRAME_RATE,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("scene generation failed: {0}")]
    SceneGeneration(String),
    #[error("payload framing error: expected {expected} bytes, got {got}")]
    Framing { expected: usize, got: usize },
    #[error("{count} features exceed the payload budget of {max}")]
    TooManyFeatures { count: usize, max: usize },
    #[error("trajectory line {line}: {reason}")]
    TrajectoryParse { line: usize, reason: String },
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("frame unsolved: {0}")]
    Unsolved(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, SandboxError>;
