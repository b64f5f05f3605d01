//! Multi-user Massive MIMO uplink physical layer.
//!
//! Each subcarrier is an independent flat-fading `M x K` channel. Users are
//! separated with zero-forcing and transmit with power control so that every
//! user sees the same post-equalisation SNR. Bits are Gray-mapped onto square
//! QAM and hard-decided after equalisation; there is no channel coding.

mod ber;
mod channel;
mod qam;
mod zf;

pub use ber::{ber_curve, BerCurve, BerPoint};
pub use channel::{generate_channel, load_channel, load_channels, ChannelMatrix, CHANNEL_MAGIC};
pub use qam::{awgn_ber_exact, awgn_ber_oracle, q_function, QamConstellation};
pub use zf::{post_eq_snr, power_control, zf_equalizer, PowerControlSolution, ZfSolution, MAX_CONDITION};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PhyError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("channel load error at byte {offset}: {reason}")]
    Load { offset: usize, reason: String },
    #[error("cannot read channel file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot concatenate channels: {0}")]
    Concat(String),
    #[error("singular channel (condition number {condition:e})")]
    Singular { condition: f64 },
    #[error("bit count {bits} is not a multiple of {bits_per_symbol} bits per symbol")]
    Framing { bits: usize, bits_per_symbol: u32 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, PhyError>;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
