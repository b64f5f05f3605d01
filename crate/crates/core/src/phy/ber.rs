//! Monte-Carlo uncoded BER versus post-equalisation SNR.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{db_to_linear, ChannelMatrix, PhyError, QamConstellation, Result, ZfSolution};
use crate::seed;

/// Channel uses simulated per RNG stream.
const CHUNK_USES: u64 = 2048;
const NOISE_VAR: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub snr_db: f64,
    pub ber: f64,
    pub n_bits: u64,
    pub n_errors: u64,
    /// Monte-Carlo standard error of `ber`, from the spread of per-use
    /// error counts.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerCurve {
    pub points: Vec<BerPoint>,
    /// Subcarriers left out because their channel was singular.
    pub skipped_subcarriers: usize,
}

struct Subcarrier {
    h: Vec<Complex64>,
    w: Vec<Complex64>,
    enhancement: Vec<f64>,
}

#[derive(Default, Clone, Copy)]
struct Tally {
    errors: u64,
    errors_sq: u64,
}

/// Simulates the power-controlled zero-forcing uplink of `channel` at each
/// post-equalisation SNR in `snr_db`.
///
/// For every channel use, all `K` users send a uniformly random QAM symbol
/// scaled by their power-control gain; the base station receives `Hx + n`,
/// equalises with `W`, divides out the user gain and hard-decides. Channel
/// uses cycle over the non-singular subcarriers.
pub fn ber_curve(
    channel: &ChannelMatrix,
    snr_db: &[f64],
    bits_per_point: u64,
    qam: &QamConstellation,
    seed: u64,
) -> Result<BerCurve> {
    if snr_db.is_empty() {
        return Err(PhyError::InvalidArgument("no SNR points".into()));
    }
    if bits_per_point == 0 {
        return Err(PhyError::InvalidArgument("bits_per_point must be >= 1".into()));
    }
    let (m, k) = (channel.antennas(), channel.users());
    let mut skipped = 0;
    let mut carriers = Vec::new();
    for f in 0..channel.subcarriers() {
        match ZfSolution::new(&channel.subcarrier(f)) {
            Ok(zf) => carriers.push(Subcarrier {
                h: channel.subcarrier_slice(f).to_vec(),
                // column-major K x M storage: entry (j, a) sits at a * K + j
                w: zf.equalizer.as_slice().to_vec(),
                enhancement: zf.noise_enhancement,
            }),
            Err(PhyError::Singular { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if carriers.is_empty() {
        return Err(PhyError::Singular { condition: f64::INFINITY });
    }

    let bits_per_use = (k as u64) * qam.bits_per_symbol() as u64;
    let uses = bits_per_point.div_ceil(bits_per_use);
    let chunks = uses.div_ceil(CHUNK_USES);

    let points = snr_db
        .iter()
        .enumerate()
        .map(|(pi, &db)| {
            let gamma = db_to_linear(db);
            let gains: Vec<Vec<f64>> = carriers
                .iter()
                .map(|c| c.enhancement.iter().map(|e| (gamma * NOISE_VAR * e).sqrt()).collect())
                .collect();
            let tally = (0..chunks)
                .into_par_iter()
                .map(|ci| {
                    let start = ci * CHUNK_USES;
                    let end = (start + CHUNK_USES).min(uses);
                    let mut rng = seed::rng(seed, &[seed::label::BER, pi as u64, ci]);
                    simulate_uses(&carriers, &gains, qam, m, k, start..end, &mut rng)
                })
                .reduce(Tally::default, |a, b| Tally {
                    errors: a.errors + b.errors,
                    errors_sq: a.errors_sq + b.errors_sq,
                });
            let n_bits = uses * bits_per_use;
            let mean = tally.errors as f64 / uses as f64;
            let var = (tally.errors_sq as f64 / uses as f64 - mean * mean).max(0.0);
            BerPoint {
                snr_db: db,
                ber: tally.errors as f64 / n_bits as f64,
                n_bits,
                n_errors: tally.errors,
                std_error: (var / uses as f64).sqrt() / bits_per_use as f64,
            }
        })
        .collect();

    Ok(BerCurve {
        points,
        skipped_subcarriers: skipped,
    })
}

fn simulate_uses<R: Rng>(
    carriers: &[Subcarrier],
    gains: &[Vec<f64>],
    qam: &QamConstellation,
    m: usize,
    k: usize,
    uses: std::ops::Range<u64>,
    rng: &mut R,
) -> Tally {
    let order = qam.order();
    let noise_std = (NOISE_VAR / 2.0).sqrt();
    let mut labels = vec![0u32; k];
    let mut x = vec![Complex64::new(0.0, 0.0); k];
    let mut y = vec![Complex64::new(0.0, 0.0); m];
    let mut tally = Tally::default();
    for u in uses {
        let ci = (u % carriers.len() as u64) as usize;
        let c = &carriers[ci];
        let g = &gains[ci];
        for j in 0..k {
            labels[j] = rng.random_range(0..order);
            x[j] = qam.point(labels[j]) * g[j];
        }
        for (a, ya) in y.iter_mut().enumerate() {
            let row = &c.h[a * k..(a + 1) * k];
            let mut acc = Complex64::new(
                noise_std * rng.sample::<f64, _>(StandardNormal),
                noise_std * rng.sample::<f64, _>(StandardNormal),
            );
            for (hj, xj) in row.iter().zip(&x) {
                acc += hj * xj;
            }
            *ya = acc;
        }
        let mut errs = 0u64;
        for j in 0..k {
            let mut acc = Complex64::new(0.0, 0.0);
            for (a, ya) in y.iter().enumerate() {
                acc += c.w[a * k + j] * ya;
            }
            let decided = qam.decide(acc / g[j]);
            errs += (decided ^ labels[j]).count_ones() as u64;
        }
        tally.errors += errs;
        tally.errors_sq += errs * errs;
    }
    tally
}
