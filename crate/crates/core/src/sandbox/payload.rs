//! Uplink wire formats of the three offloading scenarios. All multi-byte
//! fields are little-endian.
//!
//! Feature record (48 bytes): descriptor `[0, 32)`, u `f32`, v `f32`,
//! score `f32`, meta `u32`. Meta bit 0 marks the slot valid and bits 8..16
//! hold the intensity. Scenario 3 appends the depth as `f64` (56 bytes).
//!
//! * Scenario 1: 640x480 8-bit image, then the depth map. The image is tiled
//!   into 1536 patches of 20x10 pixels; patch `j` starts with the record of
//!   feature `j` and is padded with its intensity.
//! * Scenario 2: 1536 records, then the depth map.
//! * Scenario 3: 1536 records with depth.
//!
//! The depth map is 640x480 `u16` millimetres, row-major, zero where no
//! feature lies. The decoder reads each feature's depth at its rounded pixel.

use crate::bitstorm::{sanitize_field, FieldSpec};
use crate::scenario::ScenarioId;

use super::camera::{CameraModel, Feature};
use super::scene::Descriptor;
use super::{Result, SandboxError};

/// Feature slots per frame.
pub const MAX_FEATURES: usize = 1536;
const RECORD: usize = 48;
const RECORD_WITH_DEPTH: usize = 56;
const WIDTH: usize = 640;
const HEIGHT: usize = 480;
const PIXELS: usize = WIDTH * HEIGHT;
const DEPTH_MAP: usize = 2 * PIXELS;
const PATCH_W: usize = 20;
const PATCH_H: usize = 10;
const PATCHES_PER_ROW: usize = WIDTH / PATCH_W;

const VALID: u32 = 1;
const INTENSITY: FieldSpec = FieldSpec::integer(0.0, 255.0);
const SCORE: FieldSpec = FieldSpec::float(0.0, 1.0);

const _: () = {
    assert!(PIXELS + DEPTH_MAP == 921_600);
    assert!(MAX_FEATURES * RECORD + DEPTH_MAP == 688_128);
    assert!(MAX_FEATURES * RECORD_WITH_DEPTH == 86_016);
    assert!(PATCHES_PER_ROW * (HEIGHT / PATCH_H) == MAX_FEATURES);
    assert!(PATCH_W * PATCH_H >= RECORD);
};

/// Serialized uplink size in bytes.
pub fn payload_len(scenario: ScenarioId) -> usize {
    match scenario {
        ScenarioId::RawImages => PIXELS + DEPTH_MAP,
        ScenarioId::FeaturesAndDepthImage => MAX_FEATURES * RECORD + DEPTH_MAP,
        ScenarioId::FeaturesWithDepth => MAX_FEATURES * RECORD_WITH_DEPTH,
    }
}

fn patch_pixel(slot: usize, byte: usize) -> usize {
    let y = (slot / PATCHES_PER_ROW) * PATCH_H + byte / PATCH_W;
    let x = (slot % PATCHES_PER_ROW) * PATCH_W + byte % PATCH_W;
    y * WIDTH + x
}

fn write_record(f: &Feature, out: &mut [u8]) {
    out[..32].copy_from_slice(&f.descriptor.to_bytes());
    out[32..36].copy_from_slice(&(f.u as f32).to_le_bytes());
    out[36..40].copy_from_slice(&(f.v as f32).to_le_bytes());
    out[40..44].copy_from_slice(&f.score.to_le_bytes());
    let meta = VALID | (f.intensity as u32) << 8;
    out[44..48].copy_from_slice(&meta.to_le_bytes());
}

fn f32_at(b: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

/// Parses a 48-byte record; `None` for an empty slot. Depth is left at zero.
fn read_record(b: &[u8], camera: &CameraModel) -> Option<Feature> {
    let meta = u32::from_le_bytes(b[44..48].try_into().unwrap());
    if meta & VALID == 0 {
        return None;
    }
    let u_spec = FieldSpec::float(0.0, camera.max_u());
    let v_spec = FieldSpec::float(0.0, camera.max_v());
    Some(Feature {
        u: sanitize_field(f32_at(b, 32) as f64, &u_spec),
        v: sanitize_field(f32_at(b, 36) as f64, &v_spec),
        depth: 0.0,
        descriptor: Descriptor::from_bytes(b[..32].try_into().unwrap()),
        intensity: sanitize_field(((meta >> 8) & 0xff) as f64, &INTENSITY) as u8,
        score: sanitize_field(f32_at(b, 40) as f64, &SCORE) as f32,
        landmark: None,
    })
}

fn depth_spec(camera: &CameraModel) -> FieldSpec {
    FieldSpec::float(camera.d_min, camera.d_max)
}

fn check_geometry(camera: &CameraModel) -> Result<()> {
    if camera.width as usize != WIDTH || camera.height as usize != HEIGHT {
        return Err(SandboxError::InvalidArgument(format!(
            "wire format is fixed at {WIDTH}x{HEIGHT}, camera is {}x{}",
            camera.width, camera.height
        )));
    }
    Ok(())
}

fn write_depth_map(features: &[Feature], camera: &CameraModel, map: &mut [u8]) {
    for f in features {
        let mm = (f.depth * 1000.0).round().clamp(0.0, u16::MAX as f64) as u16;
        let at = 2 * camera.pixel_index(f.u as f32 as f64, f.v as f32 as f64);
        map[at..at + 2].copy_from_slice(&mm.to_le_bytes());
    }
}

fn read_depth(map: &[u8], f: &Feature, camera: &CameraModel) -> f64 {
    let at = 2 * camera.pixel_index(f.u, f.v);
    let mm = u16::from_le_bytes([map[at], map[at + 1]]);
    sanitize_field(mm as f64 / 1000.0, &depth_spec(camera))
}

/// Serializes up to [`MAX_FEATURES`] features into the scenario's uplink
/// packet. Slot order follows the input order.
pub fn encode_payload(features: &[Feature], scenario: ScenarioId, camera: &CameraModel) -> Result<Vec<u8>> {
    check_geometry(camera)?;
    if features.len() > MAX_FEATURES {
        return Err(SandboxError::TooManyFeatures {
            count: features.len(),
            max: MAX_FEATURES,
        });
    }
    let mut out = vec![0u8; payload_len(scenario)];
    match scenario {
        ScenarioId::RawImages => {
            let (image, map) = out.split_at_mut(PIXELS);
            let mut rec = [0u8; RECORD];
            for (slot, f) in features.iter().enumerate() {
                write_record(f, &mut rec);
                for byte in 0..PATCH_W * PATCH_H {
                    image[patch_pixel(slot, byte)] = if byte < RECORD { rec[byte] } else { f.intensity };
                }
            }
            write_depth_map(features, camera, map);
        }
        ScenarioId::FeaturesAndDepthImage => {
            let (records, map) = out.split_at_mut(MAX_FEATURES * RECORD);
            for (f, rec) in features.iter().zip(records.chunks_exact_mut(RECORD)) {
                write_record(f, rec);
            }
            write_depth_map(features, camera, map);
        }
        ScenarioId::FeaturesWithDepth => {
            for (f, rec) in features.iter().zip(out.chunks_exact_mut(RECORD_WITH_DEPTH)) {
                write_record(f, rec);
                rec[48..56].copy_from_slice(&f.depth.to_le_bytes());
            }
        }
    }
    Ok(out)
}

/// Parses an uplink packet, sanitising every field into its allowed range.
pub fn decode_payload(bytes: &[u8], scenario: ScenarioId, camera: &CameraModel) -> Result<Vec<Feature>> {
    check_geometry(camera)?;
    let expected = payload_len(scenario);
    if bytes.len() != expected {
        return Err(SandboxError::Framing {
            expected,
            got: bytes.len(),
        });
    }
    let feats = match scenario {
        ScenarioId::RawImages => {
            let (image, map) = bytes.split_at(PIXELS);
            let mut rec = [0u8; RECORD];
            (0..MAX_FEATURES)
                .filter_map(|slot| {
                    for (byte, r) in rec.iter_mut().enumerate() {
                        *r = image[patch_pixel(slot, byte)];
                    }
                    read_record(&rec, camera).map(|mut f| {
                        f.depth = read_depth(map, &f, camera);
                        f
                    })
                })
                .collect()
        }
        ScenarioId::FeaturesAndDepthImage => {
            let (records, map) = bytes.split_at(MAX_FEATURES * RECORD);
            records
                .chunks_exact(RECORD)
                .filter_map(|rec| read_record(rec, camera))
                .map(|mut f| {
                    f.depth = read_depth(map, &f, camera);
                    f
                })
                .collect()
        }
        ScenarioId::FeaturesWithDepth => bytes
            .chunks_exact(RECORD_WITH_DEPTH)
            .filter_map(|rec| {
                read_record(rec, camera).map(|mut f| {
                    let d = f64::from_le_bytes(rec[48..56].try_into().unwrap());
                    f.depth = sanitize_field(d, &depth_spec(camera));
                    f
                })
            })
            .collect(),
    };
    Ok(feats)
}

/// What survives a lossless trip over the wire: f32 pixel coordinates,
/// millimetre depth where the scenario uses the depth map, no landmark id.
pub fn wire_quantize(f: &Feature, scenario: ScenarioId) -> Feature {
    let depth = match scenario {
        ScenarioId::FeaturesWithDepth => f.depth,
        _ => (f.depth * 1000.0).round() / 1000.0,
    };
    Feature {
        u: f.u as f32 as f64,
        v: f.v as f32 as f64,
        depth,
        landmark: None,
        ..f.clone()
    }
}
