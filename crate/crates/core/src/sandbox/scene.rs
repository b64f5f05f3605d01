use nalgebra::Vector3;
use rand::Rng;

use super::{Result, SandboxError};

/// Minimum pairwise Hamming distance between map descriptors.
pub const MIN_DESCRIPTOR_DISTANCE: u32 = 80;
const ATTEMPTS_PER_LANDMARK: usize = 1000;

/// 256-bit binary descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Descriptor(pub [u64; 4]);

impl Descriptor {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Descriptor([rng.random(), rng.random(), rng.random(), rng.random()])
    }

    pub fn hamming(&self, other: &Descriptor) -> u32 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        let mut out = [0; 32];
        for (chunk, w) in out.chunks_exact_mut(8).zip(&self.0) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8; 32]) -> Self {
        let mut words = [0u64; 4];
        for (w, chunk) in words.iter_mut().zip(bytes.chunks_exact(8)) {
            *w = u64::from_le_bytes(chunk.try_into().unwrap());
        }
        Descriptor(words)
    }
}

/// Axis-aligned box, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Default for Bounds {
    /// The 4.2 x 2.5 m measurement area, 2.5 m high.
    fn default() -> Self {
        Bounds {
            min: Vector3::zeros(),
            max: Vector3::new(4.2, 2.5, 2.5),
        }
    }
}

impl Bounds {
    pub fn new(min: Vector3<f64>, max: Vector3<f64>) -> Result<Self> {
        if (0..3).any(|i| !(max[i] > min[i])) {
            return Err(SandboxError::InvalidArgument(format!(
                "degenerate bounds {min:?}..{max:?}"
            )));
        }
        Ok(Bounds { min, max })
    }

    pub fn center(&self) -> Vector3<f64> {
        0.5 * (self.min + self.max)
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Landmark {
    pub position: Vector3<f64>,
    pub descriptor: Descriptor,
    pub intensity: u8,
}

/// The known map shared by the device and the base station.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub landmarks: Vec<Landmark>,
    pub bounds: Bounds,
}

impl Scene {
    /// Validates the landmark count and descriptor separation.
    pub fn new(landmarks: Vec<Landmark>, bounds: Bounds) -> Result<Self> {
        if landmarks.len() < 4 {
            return Err(SandboxError::InvalidArgument(format!(
                "a scene needs at least 4 landmarks (got {})",
                landmarks.len()
            )));
        }
        for (i, a) in landmarks.iter().enumerate() {
            for b in &landmarks[i + 1..] {
                if a.descriptor.hamming(&b.descriptor) < MIN_DESCRIPTOR_DISTANCE {
                    return Err(SandboxError::InvalidArgument(
                        "descriptors closer than the minimum separation".into(),
                    ));
                }
            }
        }
        Ok(Scene { landmarks, bounds })
    }
}

/// Uniformly placed landmarks with random descriptors, rejecting any
/// descriptor within [`MIN_DESCRIPTOR_DISTANCE`] of an earlier one.
pub fn generate_scene<R: Rng + ?Sized>(n_landmarks: usize, bounds: Bounds, rng: &mut R) -> Result<Scene> {
    if n_landmarks < 4 {
        return Err(SandboxError::InvalidArgument(format!(
            "a scene needs at least 4 landmarks (got {n_landmarks})"
        )));
    }
    let mut descriptors: Vec<Descriptor> = Vec::with_capacity(n_landmarks);
    while descriptors.len() < n_landmarks {
        let d = (0..ATTEMPTS_PER_LANDMARK)
            .map(|_| Descriptor::random(rng))
            .find(|d| descriptors.iter().all(|e| d.hamming(e) >= MIN_DESCRIPTOR_DISTANCE))
            .ok_or_else(|| {
                SandboxError::SceneGeneration(format!(
                    "no separated descriptor after {ATTEMPTS_PER_LANDMARK} draws at landmark {}",
                    descriptors.len()
                ))
            })?;
        descriptors.push(d);
    }
    let ext = bounds.extent();
    let landmarks = descriptors
        .into_iter()
        .map(|descriptor| Landmark {
            position: bounds.min
                + Vector3::new(
                    rng.random::<f64>() * ext.x,
                    rng.random::<f64>() * ext.y,
                    rng.random::<f64>() * ext.z,
                ),
            descriptor,
            intensity: rng.random(),
        })
        .collect();
    Ok(Scene { landmarks, bounds })
}
