//! Trajectory accuracy: translation ATE after similarity alignment,
//! baseline-normalised errors and bootstrap aggregation.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use thiserror::Error;

use crate::sandbox::PoseStamped;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("need at least {needed} poses, got {got}")]
    InsufficientPoses { needed: usize, got: usize },
    #[error("degenerate point configuration: {0}")]
    Degenerate(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("baseline error of trajectory {0} is not positive")]
    ZeroBaseline(usize),
    #[error("empty input")]
    Empty,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

/// `p -> scale * rotation * p + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub scale: f64,
}

impl Similarity {
    pub fn identity() -> Self {
        Similarity {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            scale: 1.0,
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * p) + self.translation
    }
}

/// Least-squares similarity (or rigid, without scale) mapping `est` onto
/// `gt`, from the SVD of the cross-covariance with reflection correction.
pub fn umeyama_align(est: &[Vector3<f64>], gt: &[Vector3<f64>], with_scale: bool) -> Result<Similarity> {
    if est.len() != gt.len() {
        return Err(MetricsError::LengthMismatch(est.len(), gt.len()));
    }
    let n = est.len();
    if n < 3 {
        return Err(MetricsError::InsufficientPoses { needed: 3, got: n });
    }
    let inv_n = 1.0 / n as f64;
    let mu_e = est.iter().sum::<Vector3<f64>>() * inv_n;
    let mu_g = gt.iter().sum::<Vector3<f64>>() * inv_n;
    let mut cov = Matrix3::zeros();
    let mut var_e = 0.0;
    for (e, g) in est.iter().zip(gt) {
        let de = e - mu_e;
        cov += (g - mu_g) * de.transpose();
        var_e += de.norm_squared();
    }
    cov *= inv_n;
    var_e *= inv_n;

    let svd = cov.svd(true, true);
    let d = svd.singular_values;
    let mut sorted = [d[0], d[1], d[2]];
    sorted.sort_by(|a, b| b.total_cmp(a));
    if !(sorted[0] > 0.0) || sorted[1] <= 1e-12 * sorted[0] {
        return Err(MetricsError::Degenerate("rank of the cross-covariance is below 2".into()));
    }
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let mut s = Vector3::new(1.0, 1.0, 1.0);
    if u.determinant() * v_t.determinant() < 0.0 {
        s[d.imin()] = -1.0;
    }
    let rotation = u * Matrix3::from_diagonal(&s) * v_t;
    let scale = if with_scale { d.dot(&s) / var_e } else { 1.0 };
    Ok(Similarity {
        rotation,
        translation: mu_g - scale * rotation * mu_e,
        scale,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AteResult {
    pub rmse: f64,
    pub n_poses: usize,
    /// Estimated poses with no ground-truth timestamp within tolerance.
    pub n_unassociated: usize,
    pub alignment: Similarity,
}

/// Pairs each estimate with the nearest ground-truth timestamp within
/// `tolerance` seconds. `gt` must be sorted by timestamp.
pub fn associate(est: &[PoseStamped], gt: &[PoseStamped], tolerance: f64) -> Vec<(usize, usize)> {
    est.iter()
        .enumerate()
        .filter_map(|(i, e)| {
            let k = gt.partition_point(|g| g.timestamp < e.timestamp);
            [k.checked_sub(1), Some(k)]
                .into_iter()
                .flatten()
                .filter(|&j| j < gt.len())
                .min_by(|&a, &b| {
                    (gt[a].timestamp - e.timestamp)
                        .abs()
                        .total_cmp(&(gt[b].timestamp - e.timestamp).abs())
                })
                .filter(|&j| (gt[j].timestamp - e.timestamp).abs() <= tolerance)
                .map(|j| (i, j))
        })
        .collect()
}

/// Half the median ground-truth frame period.
pub fn default_tolerance(gt: &[PoseStamped]) -> f64 {
    let mut dt: Vec<f64> = gt.windows(2).map(|w| w[1].timestamp - w[0].timestamp).collect();
    if dt.is_empty() {
        return 0.0;
    }
    dt.sort_by(f64::total_cmp);
    0.5 * dt[dt.len() / 2]
}

/// Translation ATE with scale-enabled alignment over all associated poses.
pub fn ate_translation(est: &[PoseStamped], gt: &[PoseStamped]) -> Result<AteResult> {
    ate_translation_with(est, gt, true, default_tolerance(gt))
}

pub fn ate_translation_with(
    est: &[PoseStamped],
    gt: &[PoseStamped],
    with_scale: bool,
    tolerance: f64,
) -> Result<AteResult> {
    let pairs = associate(est, gt, tolerance);
    if pairs.len() < 3 {
        return Err(MetricsError::InsufficientPoses {
            needed: 3,
            got: pairs.len(),
        });
    }
    let e: Vec<Vector3<f64>> = pairs.iter().map(|&(i, _)| est[i].pose.translation.vector).collect();
    let g: Vec<Vector3<f64>> = pairs.iter().map(|&(_, j)| gt[j].pose.translation.vector).collect();
    let alignment = umeyama_align(&e, &g, with_scale)?;
    let sq: f64 = e
        .iter()
        .zip(&g)
        .map(|(e, g)| (g - alignment.apply(e)).norm_squared())
        .sum();
    Ok(AteResult {
        rmse: (sq / e.len() as f64).sqrt(),
        n_poses: e.len(),
        n_unassociated: est.len() - pairs.len(),
        alignment,
    })
}

/// `100 (e - base) / base` for each run of one trajectory.
pub fn percent_change(errors: &[f64], baseline: f64) -> Result<Vec<f64>> {
    if !(baseline > 0.0) {
        return Err(MetricsError::ZeroBaseline(0));
    }
    Ok(errors.iter().map(|e| 100.0 * (e - baseline) / baseline).collect())
}

/// Per-trajectory mean percentage change against that trajectory's baseline.
pub fn per_trajectory_change(errors: &[Vec<f64>], baselines: &[f64]) -> Result<Vec<f64>> {
    if errors.len() != baselines.len() {
        return Err(MetricsError::LengthMismatch(errors.len(), baselines.len()));
    }
    if errors.is_empty() {
        return Err(MetricsError::Empty);
    }
    errors
        .iter()
        .zip(baselines)
        .enumerate()
        .map(|(t, (runs, &b))| {
            if runs.is_empty() {
                return Err(MetricsError::Empty);
            }
            let p = percent_change(runs, b).map_err(|_| MetricsError::ZeroBaseline(t))?;
            Ok(p.iter().sum::<f64>() / p.len() as f64)
        })
        .collect()
}

/// Mean over trajectories of the per-trajectory mean percentage change.
pub fn normalize_vs_baseline(errors: &[Vec<f64>], baselines: &[f64]) -> Result<f64> {
    let per = per_trajectory_change(errors, baselines)?;
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapStats {
    pub mean: f64,
    pub std: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Resamples `values` with replacement `n_draws` times. Reports the mean and
/// standard deviation of the resampled means and a percentile interval at
/// confidence `ci`.
pub fn bootstrap_stats<R: Rng + ?Sized>(values: &[f64], n_draws: usize, ci: f64, rng: &mut R) -> Result<BootstrapStats> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    if n_draws == 0 || !(ci > 0.0 && ci < 1.0) {
        return Err(MetricsError::InvalidArgument(format!(
            "n_draws = {n_draws}, ci = {ci}"
        )));
    }
    let n = values.len();
    let mut means: Vec<f64> = (0..n_draws)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    let mean = means.iter().sum::<f64>() / n_draws as f64;
    let std = if n_draws > 1 {
        (means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n_draws - 1) as f64).sqrt()
    } else {
        0.0
    };
    means.sort_by(f64::total_cmp);
    let alpha = 1.0 - ci;
    Ok(BootstrapStats {
        mean,
        std,
        ci_low: quantile(&means, alpha / 2.0),
        ci_high: quantile(&means, 1.0 - alpha / 2.0),
    })
}
