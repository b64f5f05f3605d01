use std::collections::HashMap;

use nalgebra::{Isometry3, Point3, Vector3};

use super::payload::MAX_FEATURES;
use super::scene::{Descriptor, Scene};
use super::{Result, SandboxError};

/// Frames with fewer visible features than this cannot be solved.
pub const MIN_VISIBLE: usize = 4;

/// Pinhole camera. Camera frame: x right, y down, z along the optical axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub d_min: f64,
    pub d_max: f64,
}

impl Default for CameraModel {
    /// 640x480 with a D435i-like field of view.
    fn default() -> Self {
        CameraModel {
            width: 640,
            height: 480,
            fx: 380.0,
            fy: 380.0,
            cx: 320.0,
            cy: 240.0,
            d_min: 0.3,
            d_max: 10.0,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SandboxError::InvalidArgument(format!("camera: {m}")));
        if self.width == 0 || self.height == 0 {
            return bad("zero image size");
        }
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return bad("focal lengths must be positive");
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64 && self.cy >= 0.0 && self.cy < self.height as f64) {
            return bad("principal point outside the image");
        }
        if !(self.d_min > 0.0 && self.d_min < self.d_max && self.d_max.is_finite()) {
            return bad("depth range must satisfy 0 < d_min < d_max");
        }
        Ok(())
    }

    pub fn max_u(&self) -> f64 {
        (self.width - 1) as f64
    }

    pub fn max_v(&self) -> f64 {
        (self.height - 1) as f64
    }

    pub fn project(&self, p: &Vector3<f64>) -> (f64, f64) {
        (self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }

    pub fn back_project(&self, u: f64, v: f64, depth: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx * depth, (v - self.cy) / self.fy * depth, depth)
    }

    pub fn in_image(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && u <= self.max_u() && v >= 0.0 && v <= self.max_v()
    }

    /// Nearest pixel, clamped to the image.
    pub fn pixel_index(&self, u: f64, v: f64) -> usize {
        let col = u.round().clamp(0.0, self.max_u()) as usize;
        let row = v.round().clamp(0.0, self.max_v()) as usize;
        row * self.width as usize + col
    }
}

/// One extracted feature. `depth` is the distance along the optical axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
    pub descriptor: Descriptor,
    pub intensity: u8,
    pub score: f32,
    /// Source landmark; only set by [`observe`], never transmitted.
    pub landmark: Option<usize>,
}

/// Projects every landmark into the camera at `pose` (camera-to-world).
///
/// Landmarks sharing a pixel keep only the nearest one. The survivors are
/// ordered by distance to the principal point and capped at
/// [`MAX_FEATURES`]. The score decreases linearly with that distance.
pub fn observe(scene: &Scene, camera: &CameraModel, pose: &Isometry3<f64>) -> Vec<Feature> {
    let world_to_cam = pose.inverse();
    let mut by_pixel: HashMap<usize, Feature> = HashMap::new();
    for (id, lm) in scene.landmarks.iter().enumerate() {
        let pc = world_to_cam.transform_point(&Point3::from(lm.position)).coords;
        if !(pc.z >= camera.d_min && pc.z <= camera.d_max) {
            continue;
        }
        let (u, v) = camera.project(&pc);
        if !camera.in_image(u, v) {
            continue;
        }
        let f = Feature {
            u,
            v,
            depth: pc.z,
            descriptor: lm.descriptor,
            intensity: lm.intensity,
            score: 0.0,
            landmark: Some(id),
        };
        by_pixel
            .entry(camera.pixel_index(u, v))
            .and_modify(|e| {
                if f.depth < e.depth {
                    *e = f.clone();
                }
            })
            .or_insert(f);
    }
    let half_diag = (camera.cx.max(camera.max_u() - camera.cx)).hypot(camera.cy.max(camera.max_v() - camera.cy));
    let radius = |f: &Feature| (f.u - camera.cx).hypot(f.v - camera.cy);
    let mut feats: Vec<Feature> = by_pixel.into_values().collect();
    feats.sort_by(|a, b| radius(a).total_cmp(&radius(b)).then(a.landmark.cmp(&b.landmark)));
    feats.truncate(MAX_FEATURES);
    for f in &mut feats {
        f.score = (1.0 - radius(f) / half_diag).clamp(0.0, 1.0) as f32;
    }
    feats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sandbox::scene::{Bounds, Landmark};
    use nalgebra::{Translation3, UnitQuaternion};

    fn scene_with(points: &[Vector3<f64>]) -> Scene {
        Scene {
            landmarks: points
                .iter()
                .enumerate()
                .map(|(i, p)| Landmark {
                    position: *p,
                    descriptor: Descriptor([i as u64, 0, 0, 0]),
                    intensity: i as u8,
                })
                .collect(),
            bounds: Bounds::default(),
        }
    }

    #[test]
    fn optical_axis_hits_principal_point() {
        let cam = CameraModel::default();
        let s = scene_with(&[Vector3::new(0.0, 0.0, 1.0), Vector3::new(0.0, 0.0, -1.0)]);
        let f = observe(&s, &cam, &Isometry3::identity());
        assert_eq!(f.len(), 1);
        assert_eq!((f[0].u, f[0].v, f[0].depth), (cam.cx, cam.cy, 1.0));
        assert_eq!(f[0].landmark, Some(0));
        assert_eq!(f[0].score, 1.0);
    }

    #[test]
    fn back_projection_inverts_projection() {
        let cam = CameraModel::default();
        let pose = Isometry3::from_parts(
            Translation3::new(0.3, -0.2, 0.1),
            UnitQuaternion::from_euler_angles(0.1, -0.2, 0.3),
        );
        let pts: Vec<Vector3<f64>> = (0..50)
            .map(|i| {
                let t = i as f64;
                Vector3::new((t * 0.37).sin(), (t * 0.91).cos() * 0.7, 1.0 + (t * 0.13) % 5.0)
            })
            .collect();
        let s = scene_with(&pts);
        let fs = observe(&s, &cam, &pose);
        assert!(fs.len() > 10);
        let w2c = pose.inverse();
        for f in fs {
            let truth = w2c.transform_point(&Point3::from(pts[f.landmark.unwrap()])).coords;
            let back = cam.back_project(f.u, f.v, f.depth);
            assert!((back - truth).norm() < 1e-9);
        }
    }

    #[test]
    fn depth_range_and_frustum() {
        let cam = CameraModel::default();
        let s = scene_with(&[
            Vector3::new(0.0, 0.0, 0.2),
            Vector3::new(0.0, 0.0, 10.5),
            Vector3::new(5.0, 0.0, 1.0),
            Vector3::new(0.0, 0.0, 10.0),
        ]);
        let f = observe(&s, &cam, &Isometry3::identity());
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].landmark, Some(3));
    }

    #[test]
    fn occlusion_keeps_nearest() {
        let cam = CameraModel::default();
        let s = scene_with(&[Vector3::new(0.0, 0.0, 4.0), Vector3::new(0.0, 0.0, 2.0)]);
        let f = observe(&s, &cam, &Isometry3::identity());
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].landmark, Some(1));
    }

    #[test]
    fn validation() {
        assert!(CameraModel::default().validate().is_ok());
        assert!(CameraModel { fx: 0.0, ..Default::default() }.validate().is_err());
        assert!(CameraModel { cx: 640.0, ..Default::default() }.validate().is_err());
        assert!(CameraModel { d_min: 10.0, ..Default::default() }.validate().is_err());
    }
}
