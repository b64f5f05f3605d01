use nalgebra::Vector3;

use super::camera::Feature;
use super::scene::Scene;

/// Largest accepted Hamming distance to the best map descriptor.
pub const MAX_MATCH_DISTANCE: u32 = 64;
/// Required gap between the best and second-best distances.
pub const MIN_MATCH_MARGIN: u32 = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct Correspondence {
    pub feature: usize,
    pub landmark: usize,
    pub u: f64,
    pub v: f64,
    pub depth: f64,
    pub world: Vector3<f64>,
    pub distance: u32,
}

/// Brute-force nearest-descriptor search with a ratio-style margin test.
pub fn match_features(features: &[Feature], scene: &Scene) -> Vec<Correspondence> {
    features
        .iter()
        .enumerate()
        .filter_map(|(fi, f)| {
            let (mut best, mut second, mut best_id) = (u32::MAX, u32::MAX, 0);
            for (id, lm) in scene.landmarks.iter().enumerate() {
                let d = f.descriptor.hamming(&lm.descriptor);
                if d < best {
                    second = best;
                    best = d;
                    best_id = id;
                } else if d < second {
                    second = d;
                }
            }
            (best <= MAX_MATCH_DISTANCE && second >= best.saturating_add(MIN_MATCH_MARGIN)).then(|| Correspondence {
                feature: fi,
                landmark: best_id,
                u: f.u,
                v: f.v,
                depth: f.depth,
                world: scene.landmarks[best_id].position,
                distance: best,
            })
        })
        .collect()
}
