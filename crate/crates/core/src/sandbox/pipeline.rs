use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::bitstorm;
use crate::scenario::ScenarioId;
use crate::seed::{self, label};

use super::camera::{observe, CameraModel};
use super::matching::match_features;
use super::payload::{decode_payload, encode_payload};
use super::scene::Scene;
use super::solver::{solve_pose_with, SolverConfig};
use super::trajectory::{EstimatedFrame, GroundTruthTrajectory, TrajectoryEstimate};
use super::{Result, SandboxError};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PipelineConfig {
    pub camera: CameraModel,
    /// Standard deviation of Gaussian noise added to extracted pixel
    /// coordinates before encoding. Zero gives exact observations.
    pub pixel_noise_std: f64,
    pub solver: SolverConfig,
}

/// Independent RNG roots. Keeping the observation root fixed while varying
/// the BER gives every BER the same observation noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSeeds {
    pub observation: u64,
    pub corruption: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub estimate: TrajectoryEstimate,
    pub flipped_bits: u64,
    pub payload_bits: u64,
}

/// observe, encode, corrupt, decode, match and solve for every frame.
/// Frames run in parallel; each draws from its own derived RNG streams.
pub fn run_pipeline(
    scene: &Scene,
    trajectory: &GroundTruthTrajectory,
    scenario: ScenarioId,
    ber: f64,
    cfg: &PipelineConfig,
    seeds: RunSeeds,
) -> Result<PipelineRun> {
    cfg.camera.validate()?;
    if !(0.0..=1.0).contains(&ber) {
        return Err(SandboxError::InvalidArgument(format!("ber {ber} outside [0, 1]")));
    }
    if !(cfg.pixel_noise_std >= 0.0 && cfg.pixel_noise_std.is_finite()) {
        return Err(SandboxError::InvalidArgument("pixel noise must be finite and non-negative".into()));
    }
    let noise = Normal::new(0.0, cfg.pixel_noise_std).expect("checked above");
    let cam = &cfg.camera;
    let frames: Vec<(EstimatedFrame, u64, u64)> = trajectory
        .frames()
        .par_iter()
        .enumerate()
        .map(|(i, gt)| {
            let mut feats = observe(scene, cam, &gt.pose);
            if cfg.pixel_noise_std > 0.0 {
                let mut rng = seed::rng(seeds.observation, &[label::OBSERVATION_NOISE, i as u64]);
                for f in &mut feats {
                    f.u = (f.u + noise.sample(&mut rng)).clamp(0.0, cam.max_u());
                    f.v = (f.v + noise.sample(&mut rng)).clamp(0.0, cam.max_v());
                }
            }
            let mut bytes = encode_payload(&feats, scenario, cam)?;
            let mut rng = seed::rng(seeds.corruption, &[label::CORRUPTION, i as u64]);
            let flipped = bitstorm::corrupt(&mut bytes, ber, &mut rng)
                .map_err(|e| SandboxError::InvalidArgument(e.to_string()))?;
            let decoded = decode_payload(&bytes, scenario, cam)?;
            let corr = match_features(&decoded, scene);
            let est = match solve_pose_with(&corr, cam, &cfg.solver) {
                Ok(s) => EstimatedFrame {
                    timestamp: gt.timestamp,
                    pose: s.pose,
                    inliers: s.inliers,
                    solved: true,
                },
                Err(_) => EstimatedFrame {
                    timestamp: gt.timestamp,
                    pose: nalgebra::Isometry3::identity(),
                    inliers: 0,
                    solved: false,
                },
            };
            Ok((est, flipped, 8 * bytes.len() as u64))
        })
        .collect::<Result<_>>()?;
    Ok(PipelineRun {
        flipped_bits: frames.iter().map(|f| f.1).sum(),
        payload_bits: frames.iter().map(|f| f.2).sum(),
        estimate: TrajectoryEstimate {
            frames: frames.into_iter().map(|f| f.0).collect(),
        },
    })
}
