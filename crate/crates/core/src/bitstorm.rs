//! Uncoded bit errors on serialized payloads, and range sanitisation of the
//! values decoded from them.
//!
//! The number of errors in an `n`-bit payload is drawn from
//! `Binomial(n, ber)`; the error positions are then a uniformly random
//! `k`-subset of the bits. Bit `i` is bit `i % 8` (LSB first) of byte `i / 8`.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BitstormError {
    #[error("cannot flip {k} bits of a {n}-bit payload")]
    TooManyFlips { k: u64, n: u64 },
    #[error("bit error rate {0} outside [0, 1]")]
    InvalidBer(f64),
}

/// Bit error rate and payload length of one corruption draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorruptionSpec {
    pub ber: f64,
    pub n_bits: u64,
}

impl CorruptionSpec {
    pub fn new(ber: f64, n_bits: u64) -> Result<Self, BitstormError> {
        if !(0.0..=1.0).contains(&ber) {
            return Err(BitstormError::InvalidBer(ber));
        }
        Ok(CorruptionSpec { ber, n_bits })
    }

    /// Expected number of flipped bits.
    pub fn expected_errors(&self) -> f64 {
        self.ber * self.n_bits as f64
    }
}

pub fn sample_error_count<R: Rng + ?Sized>(spec: &CorruptionSpec, rng: &mut R) -> u64 {
    if spec.ber <= 0.0 || spec.n_bits == 0 {
        return 0;
    }
    if spec.ber >= 1.0 {
        return spec.n_bits;
    }
    Binomial::new(spec.n_bits, spec.ber)
        .expect("validated probability")
        .sample(rng)
}

/// Inverts exactly `k` distinct, uniformly chosen bits of `payload`.
pub fn flip_bits<R: Rng + ?Sized>(payload: &mut [u8], k: u64, rng: &mut R) -> Result<(), BitstormError> {
    let n = payload.len() as u64 * 8;
    if k > n {
        return Err(BitstormError::TooManyFlips { k, n });
    }
    if k == n {
        payload.iter_mut().for_each(|b| *b = !*b);
        return Ok(());
    }
    for pos in index::sample(rng, n as usize, k as usize) {
        payload[pos / 8] ^= 1 << (pos % 8);
    }
    Ok(())
}

/// Binomial error count followed by uniform flips. Returns the number of
/// flipped bits, which equals the Hamming distance to the input.
pub fn corrupt<R: Rng + ?Sized>(payload: &mut [u8], ber: f64, rng: &mut R) -> Result<u64, BitstormError> {
    let spec = CorruptionSpec::new(ber, payload.len() as u64 * 8)?;
    let k = sample_error_count(&spec, rng);
    flip_bits(payload, k, rng)?;
    Ok(k)
}

pub fn hamming(a: &[u8], b: &[u8]) -> u64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones() as u64).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Float,
    Integer,
}

/// Allowed range of one decoded field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSpec {
    pub kind: FieldKind,
    pub min: f64,
    pub max: f64,
}

impl FieldSpec {
    pub const fn float(min: f64, max: f64) -> Self {
        FieldSpec {
            kind: FieldKind::Float,
            min,
            max,
        }
    }

    pub const fn integer(min: f64, max: f64) -> Self {
        FieldSpec {
            kind: FieldKind::Integer,
            min,
            max,
        }
    }

    pub fn midpoint(&self) -> f64 {
        let mid = 0.5 * (self.min + self.max);
        match self.kind {
            FieldKind::Float => mid,
            FieldKind::Integer => mid.floor(),
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        let in_range = v >= self.min && v <= self.max;
        match self.kind {
            FieldKind::Float => in_range,
            FieldKind::Integer => in_range && v.fract() == 0.0,
        }
    }
}

/// Forces a decoded value into its allowed range: non-finite values become
/// the midpoint, everything else is clamped. Never fails.
pub fn sanitize_field(raw: f64, spec: &FieldSpec) -> f64 {
    debug_assert!(spec.min <= spec.max);
    if !raw.is_finite() {
        return spec.midpoint();
    }
    let v = raw.clamp(spec.min, spec.max);
    match spec.kind {
        FieldKind::Float => v,
        FieldKind::Integer => v.round().clamp(spec.min.ceil(), spec.max.floor()),
    }
}
