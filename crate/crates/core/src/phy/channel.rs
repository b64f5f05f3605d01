//! Channel matrices: synthetic i.i.d. Rayleigh and the `XMCH` file format.
//!
//! File layout (little-endian):
//!
//! ```text
//! offset 0   b"XMCH"
//! offset 4   u32 M (antennas)
//! offset 8   u32 K (users)
//! offset 12  u32 F (subcarriers)
//! offset 16  F*M*K entries of (f32 re, f32 im), subcarrier-major,
//!            then antenna, user fastest
//! ```

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use super::{PhyError, Result};
use crate::seed;

pub const CHANNEL_MAGIC: [u8; 4] = *b"XMCH";
const HEADER_LEN: usize = 16;
const ENTRY_LEN: usize = 8;

/// Complex gains indexed `[subcarrier][antenna][user]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    antennas: usize,
    users: usize,
    subcarriers: usize,
    gains: Vec<Complex64>,
}

impl ChannelMatrix {
    pub fn new(antennas: usize, users: usize, subcarriers: usize, gains: Vec<Complex64>) -> Result<Self> {
        check_dims(antennas, users, subcarriers)?;
        if gains.len() != antennas * users * subcarriers {
            return Err(PhyError::Config(format!(
                "expected {} gains, got {}",
                antennas * users * subcarriers,
                gains.len()
            )));
        }
        if let Some(i) = gains.iter().position(|g| !(g.re.is_finite() && g.im.is_finite())) {
            return Err(PhyError::Config(format!("gain {i} is not finite")));
        }
        Ok(ChannelMatrix {
            antennas,
            users,
            subcarriers,
            gains,
        })
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn gains(&self) -> &[Complex64] {
        &self.gains
    }

    pub fn gain(&self, f: usize, m: usize, k: usize) -> Complex64 {
        self.gains[(f * self.antennas + m) * self.users + k]
    }

    /// Row-major `M x K` block of subcarrier `f`.
    pub fn subcarrier_slice(&self, f: usize) -> &[Complex64] {
        let n = self.antennas * self.users;
        &self.gains[f * n..(f + 1) * n]
    }

    pub fn subcarrier(&self, f: usize) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.antennas, self.users, self.subcarrier_slice(f))
    }

    /// Stacks the users of several channels side by side. All inputs must
    /// share the antenna and subcarrier counts.
    pub fn concat_users(parts: &[ChannelMatrix]) -> Result<ChannelMatrix> {
        let first = parts
            .first()
            .ok_or_else(|| PhyError::Concat("no channels given".into()))?;
        let (m, f) = (first.antennas, first.subcarriers);
        for (i, p) in parts.iter().enumerate() {
            if p.antennas != m || p.subcarriers != f {
                return Err(PhyError::Concat(format!(
                    "part {i} is {}x{} (M x F), expected {m}x{f}",
                    p.antennas, p.subcarriers
                )));
            }
        }
        let k: usize = parts.iter().map(|p| p.users).sum();
        check_dims(m, k, f)?;
        let mut gains = Vec::with_capacity(m * k * f);
        for sc in 0..f {
            for ant in 0..m {
                for p in parts {
                    let base = (sc * m + ant) * p.users;
                    gains.extend_from_slice(&p.gains[base..base + p.users]);
                }
            }
        }
        Ok(ChannelMatrix {
            antennas: m,
            users: k,
            subcarriers: f,
            gains,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.gains.len() * ENTRY_LEN);
        out.extend_from_slice(&CHANNEL_MAGIC);
        for d in [self.antennas, self.users, self.subcarriers] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for g in &self.gains {
            out.extend_from_slice(&(g.re as f32).to_le_bytes());
            out.extend_from_slice(&(g.im as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<ChannelMatrix> {
        let load = |offset: usize, reason: String| PhyError::Load { offset, reason };
        if bytes.len() < HEADER_LEN {
            return Err(load(
                bytes.len(),
                format!("truncated header ({} of {HEADER_LEN} bytes)", bytes.len()),
            ));
        }
        if bytes[..4] != CHANNEL_MAGIC {
            return Err(load(0, "bad magic, expected \"XMCH\"".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
        let (m, k, f) = (word(0), word(1), word(2));
        check_dims(m, k, f).map_err(|e| load(4, e.to_string()))?;
        let n = m
            .checked_mul(k)
            .and_then(|x| x.checked_mul(f))
            .ok_or_else(|| load(4, "dimensions overflow".into()))?;
        let expected = n
            .checked_mul(ENTRY_LEN)
            .and_then(|x| x.checked_add(HEADER_LEN))
            .ok_or_else(|| load(4, "dimensions overflow".into()))?;
        if bytes.len() < expected {
            return Err(load(
                bytes.len(),
                format!("truncated body: need {expected} bytes for {m}x{k}x{f}"),
            ));
        }
        if bytes.len() > expected {
            return Err(load(expected, format!("{} trailing bytes", bytes.len() - expected)));
        }
        let mut gains = Vec::with_capacity(n);
        for (i, chunk) in bytes[HEADER_LEN..].chunks_exact(ENTRY_LEN).enumerate() {
            let re = f32::from_le_bytes(chunk[..4].try_into().unwrap());
            let im = f32::from_le_bytes(chunk[4..].try_into().unwrap());
            if !(re.is_finite() && im.is_finite()) {
                return Err(load(HEADER_LEN + i * ENTRY_LEN, "non-finite gain".into()));
            }
            gains.push(Complex64::new(re as f64, im as f64));
        }
        Ok(ChannelMatrix {
            antennas: m,
            users: k,
            subcarriers: f,
            gains,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|source| PhyError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

fn check_dims(m: usize, k: usize, f: usize) -> Result<()> {
    if k == 0 || f == 0 {
        return Err(PhyError::Config(format!("need K >= 1 and F >= 1 (got K={k}, F={f})")));
    }
    if m <= k {
        return Err(PhyError::Config(format!("need more antennas than users (M={m}, K={k})")));
    }
    Ok(())
}

/// I.i.d. circularly-symmetric complex Gaussian gains with unit variance.
pub fn generate_channel(antennas: usize, users: usize, subcarriers: usize, seed: u64) -> Result<ChannelMatrix> {
    check_dims(antennas, users, subcarriers)?;
    let mut rng = seed::rng(seed, &[seed::label::CHANNEL]);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let gains = (0..antennas * users * subcarriers)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(s * re, s * im)
        })
        .collect();
    Ok(ChannelMatrix {
        antennas,
        users,
        subcarriers,
        gains,
    })
}

pub fn load_channel(path: impl AsRef<Path>) -> Result<ChannelMatrix> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| PhyError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ChannelMatrix::from_bytes(&bytes)
}

/// Loads each file and stacks their users into one multi-user channel.
pub fn load_channels<P: AsRef<Path>>(paths: &[P]) -> Result<ChannelMatrix> {
    let parts = paths.iter().map(load_channel).collect::<Result<Vec<_>>>()?;
    ChannelMatrix::concat_users(&parts)
}
