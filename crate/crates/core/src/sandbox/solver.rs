//! Pose from 2D/3D correspondences: a trimmed closed-form 3D alignment
//! followed by Huber-weighted Gauss-Newton on the reprojection error.
//!
//! The optimised state is the world-to-camera transform `T_cw`, perturbed on
//! the left: `R' = Exp(phi) R`, `t' = Exp(phi) t + rho`, with the increment
//! ordered `(rho, phi)`.

use nalgebra::{Isometry3, Matrix2x6, Matrix3, Matrix6, Point3, Translation3, UnitQuaternion, Vector2, Vector3, Vector6};

use crate::metrics::umeyama_align;

use super::camera::{CameraModel, MIN_VISIBLE};
use super::matching::Correspondence;
use super::{Result, SandboxError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Huber threshold on the pixel residual norm.
    pub huber_delta: f64,
    pub max_iterations: usize,
    /// Gauss-Newton stops once the increment norm drops below this.
    pub step_tolerance: f64,
    pub trim_rounds: usize,
    /// Residuals above `median + trim_mads * 1.4826 * MAD` are dropped.
    pub trim_mads: f64,
    /// Lower bound on the trimming threshold, meters.
    pub trim_floor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            huber_delta: 2.0,
            max_iterations: 10,
            step_tolerance: 1e-8,
            trim_rounds: 5,
            trim_mads: 3.0,
            trim_floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSolution {
    /// Camera-to-world.
    pub pose: Isometry3<f64>,
    pub inliers: usize,
    pub iterations: usize,
}

fn skew(p: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -p.z, p.y, p.z, 0.0, -p.x, -p.y, p.x, 0.0)
}

/// Projected minus observed pixel for a world point under `T_cw`.
pub fn reprojection_residual(
    pose_cw: &Isometry3<f64>,
    world: &Vector3<f64>,
    observed: &Vector2<f64>,
    camera: &CameraModel,
) -> Vector2<f64> {
    let pc = pose_cw.transform_point(&Point3::from(*world)).coords;
    let (u, v) = camera.project(&pc);
    Vector2::new(u, v) - observed
}

/// Derivative of [`reprojection_residual`] with respect to `(rho, phi)`.
pub fn reprojection_jacobian(pose_cw: &Isometry3<f64>, world: &Vector3<f64>, camera: &CameraModel) -> Matrix2x6<f64> {
    let p = pose_cw.transform_point(&Point3::from(*world)).coords;
    let iz = 1.0 / p.z;
    let dpi = nalgebra::Matrix2x3::new(
        camera.fx * iz,
        0.0,
        -camera.fx * p.x * iz * iz,
        0.0,
        camera.fy * iz,
        -camera.fy * p.y * iz * iz,
    );
    let mut j = Matrix2x6::zeros();
    j.fixed_view_mut::<2, 3>(0, 0).copy_from(&dpi);
    j.fixed_view_mut::<2, 3>(0, 3).copy_from(&(dpi * -skew(&p)));
    j
}

/// Left-multiplies `T_cw` by `(Exp(phi), rho)`.
pub fn apply_update(pose_cw: &Isometry3<f64>, delta: &Vector6<f64>) -> Isometry3<f64> {
    let rho = delta.fixed_rows::<3>(0).into_owned();
    let phi = delta.fixed_rows::<3>(3).into_owned();
    Isometry3::from_parts(Translation3::from(rho), UnitQuaternion::from_scaled_axis(phi)) * pose_cw
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn unsolved(reason: impl Into<String>) -> SandboxError {
    SandboxError::Unsolved(reason.into())
}

/// Rigid camera-to-world alignment of back-projected points, trimmed.
/// Returns the pose and the indices of the surviving correspondences.
fn trimmed_alignment(
    corr: &[Correspondence],
    camera: &CameraModel,
    cfg: &SolverConfig,
) -> Result<(Isometry3<f64>, Vec<usize>)> {
    let cam_pts: Vec<Vector3<f64>> = corr.iter().map(|c| camera.back_project(c.u, c.v, c.depth)).collect();
    let mut active: Vec<usize> = (0..corr.len()).collect();
    let mut round = 0;
    loop {
        let src: Vec<Vector3<f64>> = active.iter().map(|&i| cam_pts[i]).collect();
        let dst: Vec<Vector3<f64>> = active.iter().map(|&i| corr[i].world).collect();
        let sim = umeyama_align(&src, &dst, false).map_err(|e| unsolved(e.to_string()))?;
        let pose = Isometry3::from_parts(
            Translation3::from(sim.translation),
            UnitQuaternion::from_matrix(&sim.rotation),
        );
        if round == cfg.trim_rounds {
            return Ok((pose, active));
        }
        round += 1;
        let resid: Vec<f64> = active
            .iter()
            .map(|&i| (pose.transform_point(&Point3::from(cam_pts[i])).coords - corr[i].world).norm())
            .collect();
        let med = median(&mut resid.clone());
        let mut dev: Vec<f64> = resid.iter().map(|r| (r - med).abs()).collect();
        let mad = median(&mut dev);
        let thresh = (med + cfg.trim_mads * 1.4826 * mad).max(cfg.trim_floor);
        let kept: Vec<usize> = active
            .iter()
            .zip(&resid)
            .filter(|(_, &r)| r <= thresh)
            .map(|(&i, _)| i)
            .collect();
        if kept.len() == active.len() {
            return Ok((pose, active));
        }
        if kept.len() < MIN_VISIBLE {
            return Err(unsolved(format!("trimming left {} correspondences", kept.len())));
        }
        active = kept;
    }
}

/// Estimates the camera-to-world pose from at least four correspondences.
pub fn solve_pose(corr: &[Correspondence], camera: &CameraModel) -> Result<PoseSolution> {
    solve_pose_with(corr, camera, &SolverConfig::default())
}

pub fn solve_pose_with(corr: &[Correspondence], camera: &CameraModel, cfg: &SolverConfig) -> Result<PoseSolution> {
    if corr.len() < MIN_VISIBLE {
        return Err(unsolved(format!("{} correspondences", corr.len())));
    }
    let (pose_wc, active) = trimmed_alignment(corr, camera, cfg)?;
    let mut t_cw = pose_wc.inverse();
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        iterations += 1;
        let mut h = Matrix6::<f64>::zeros();
        let mut g = Vector6::<f64>::zeros();
        for &i in &active {
            let c = &corr[i];
            if t_cw.transform_point(&Point3::from(c.world)).z <= 0.0 {
                continue;
            }
            let r = reprojection_residual(&t_cw, &c.world, &Vector2::new(c.u, c.v), camera);
            let j = reprojection_jacobian(&t_cw, &c.world, camera);
            let n = r.norm();
            let w = if n <= cfg.huber_delta { 1.0 } else { cfg.huber_delta / n };
            h += w * j.transpose() * j;
            g += w * j.transpose() * r;
        }
        let Some(delta) = h.cholesky().map(|ch| -ch.solve(&g)) else {
            break;
        };
        if !delta.iter().all(|x| x.is_finite()) {
            break;
        }
        t_cw = apply_update(&t_cw, &delta);
        if delta.norm() < cfg.step_tolerance {
            break;
        }
    }
    let pose = t_cw.inverse();
    if !pose.translation.vector.iter().all(|x| x.is_finite()) {
        return Err(unsolved("non-finite pose"));
    }
    Ok(PoseSolution {
        pose,
        inliers: active.len(),
        iterations,
    })
}
