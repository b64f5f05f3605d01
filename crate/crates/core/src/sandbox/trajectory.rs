use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Isometry3, Matrix3, Quaternion, Rotation3, Translation3, UnitQuaternion, Vector3};
use rand::Rng;

use super::scene::Bounds;
use super::{Result, SandboxError};

/// Frames per second of generated trajectories.
pub const DEFAULT_FRAME_RATE: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseStamped {
    pub timestamp: f64,
    /// Camera-to-world.
    pub pose: Isometry3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthTrajectory {
    frames: Vec<PoseStamped>,
}

impl GroundTruthTrajectory {
    pub fn new(frames: Vec<PoseStamped>) -> Result<Self> {
        for w in frames.windows(2) {
            if !(w[1].timestamp > w[0].timestamp) {
                return Err(SandboxError::InvalidTrajectory(format!(
                    "timestamps not strictly increasing at t={}",
                    w[1].timestamp
                )));
            }
        }
        if let Some(f) = frames.iter().find(|f| (f.pose.rotation.norm() - 1.0).abs() > 1e-9) {
            return Err(SandboxError::InvalidTrajectory(format!(
                "non-unit quaternion at t={}",
                f.timestamp
            )));
        }
        Ok(GroundTruthTrajectory { frames })
    }

    pub fn frames(&self) -> &[PoseStamped] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatedFrame {
    pub timestamp: f64,
    pub pose: Isometry3<f64>,
    pub inliers: usize,
    pub solved: bool,
}

/// One entry per input frame; unsolved frames keep an identity pose.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryEstimate {
    pub frames: Vec<EstimatedFrame>,
}

impl TrajectoryEstimate {
    pub fn n_solved(&self) -> usize {
        self.frames.iter().filter(|f| f.solved).count()
    }

    pub fn n_unsolved(&self) -> usize {
        self.frames.len() - self.n_solved()
    }

    pub fn solved_poses(&self) -> Vec<PoseStamped> {
        self.frames
            .iter()
            .filter(|f| f.solved)
            .map(|f| PoseStamped {
                timestamp: f.timestamp,
                pose: f.pose,
            })
            .collect()
    }
}

/// Maps camera axes (x right, y down, z forward) to world axes for a camera
/// looking along world +x with world z up.
fn level_camera() -> Rotation3<f64> {
    Rotation3::from_matrix_unchecked(Matrix3::new(
        0.0, 0.0, 1.0, //
        -1.0, 0.0, 0.0, //
        0.0, -1.0, 0.0,
    ))
}

/// Closed elliptical loop around the centre of `bounds` with a small
/// vertical oscillation. The camera faces roughly across the room, with a
/// slowly varying yaw. Frames are spaced at [`DEFAULT_FRAME_RATE`].
pub fn generate_trajectory<R: Rng + ?Sized>(
    n_frames: usize,
    bounds: Bounds,
    rng: &mut R,
) -> Result<GroundTruthTrajectory> {
    if n_frames < 2 {
        return Err(SandboxError::InvalidArgument(format!(
            "a trajectory needs at least 2 frames (got {n_frames})"
        )));
    }
    let c = bounds.center();
    let e = bounds.extent();
    let ax = 0.3 * e.x * rng.random_range(0.8..1.2);
    let ay = 0.3 * e.y * rng.random_range(0.8..1.2);
    let az = 0.04 * e.z * rng.random_range(0.5..1.0);
    let phase = rng.random_range(0.0..TAU);
    let sway = rng.random_range(0.1..0.3);
    let base = level_camera();
    let frames = (0..n_frames)
        .map(|i| {
            let th = phase + TAU * i as f64 / n_frames as f64;
            let p = c + Vector3::new(ax * th.cos(), ay * th.sin(), az * (2.0 * th).sin());
            let yaw = th + PI + sway * (2.0 * th).sin();
            let r = Rotation3::from_axis_angle(&Vector3::z_axis(), yaw) * base;
            PoseStamped {
                timestamp: i as f64 / DEFAULT_FRAME_RATE,
                pose: Isometry3::from_parts(Translation3::from(p), UnitQuaternion::from_rotation_matrix(&r)),
            }
        })
        .collect();
    GroundTruthTrajectory::new(frames)
}

/// One line per pose: `timestamp tx ty tz qx qy qz qw`.
pub fn write_trajectory(poses: &[PoseStamped], path: &Path) -> Result<()> {
    let mut s = String::new();
    for p in poses {
        let t = p.pose.translation.vector;
        let q = p.pose.rotation.coords;
        writeln!(s, "{} {} {} {} {} {} {} {}", p.timestamp, t.x, t.y, t.z, q.x, q.y, q.z, q.w).unwrap();
    }
    std::fs::write(path, s).map_err(|source| SandboxError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Parses the format of [`write_trajectory`]. Blank lines and `#` comments
/// are skipped; quaternions are renormalised when within 1e-6 of unit.
pub fn parse_trajectory(text: &str) -> Result<Vec<PoseStamped>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: String| SandboxError::TrajectoryParse { line: i + 1, reason };
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| err(format!("{t:?}: {e}"))))
            .collect::<Result<_>>()?;
        if vals.len() != 8 {
            return Err(err(format!("expected 8 fields, found {}", vals.len())));
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(err("non-finite value".into()));
        }
        let q = Quaternion::new(vals[7], vals[4], vals[5], vals[6]);
        if (q.norm() - 1.0).abs() > 1e-6 {
            return Err(err(format!("quaternion norm {} is not 1", q.norm())));
        }
        out.push(PoseStamped {
            timestamp: vals[0],
            pose: Isometry3::from_parts(
                Translation3::new(vals[1], vals[2], vals[3]),
                UnitQuaternion::from_quaternion(q),
            ),
        });
    }
    Ok(out)
}

pub fn read_trajectory(path: &Path) -> Result<Vec<PoseStamped>> {
    let text = std::fs::read_to_string(path).map_err(|source| SandboxError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_trajectory(&text)
}
