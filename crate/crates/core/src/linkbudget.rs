//! First-order uplink budget: the device transmit power needed to reach a
//! target post-equalisation SNR at the base station.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::phy::{awgn_ber_oracle, BerCurve};

/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380649e-23;

#[derive(Debug, Error, PartialEq)]
pub enum LinkBudgetError {
    #[error("invalid link budget: {0}")]
    Invalid(String),
    #[error("target BER {ber} not bracketed by {lo_db} to {hi_db} dB")]
    NotBracketed { ber: f64, lo_db: f64, hi_db: f64 },
}

pub type Result<T> = std::result::Result<T, LinkBudgetError>;

/// Receive array gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArrayGain {
    /// `10 log10(M - K + 1)`, the zero-forcing diversity order.
    Zf,
    Fixed { db: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkBudgetConfig {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub distance_m: f64,
    pub temperature_k: f64,
    pub noise_figure_db: f64,
    pub fading_margin_db: f64,
    pub antennas: usize,
    pub users: usize,
    pub array_gain: ArrayGain,
}

impl Default for LinkBudgetConfig {
    fn default() -> Self {
        LinkBudgetConfig {
            carrier_hz: 3.7e9,
            bandwidth_hz: 20e6,
            distance_m: 100.0,
            temperature_k: 300.0,
            noise_figure_db: 8.0,
            fading_margin_db: 2.5,
            antennas: 100,
            users: 10,
            array_gain: ArrayGain::Zf,
        }
    }
}

impl LinkBudgetConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_hz", self.carrier_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("distance_m", self.distance_m),
            ("temperature_k", self.temperature_k),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(LinkBudgetError::Invalid(format!("{key} must be positive, got {v}")));
            }
        }
        for (key, v) in [("noise_figure_db", self.noise_figure_db), ("fading_margin_db", self.fading_margin_db)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(LinkBudgetError::Invalid(format!("{key} must be >= 0, got {v}")));
            }
        }
        if self.users == 0 || self.antennas <= self.users {
            return Err(LinkBudgetError::Invalid(format!(
                "need antennas > users >= 1, got {} and {}",
                self.antennas, self.users
            )));
        }
        if let ArrayGain::Fixed { db } = self.array_gain {
            if !db.is_finite() {
                return Err(LinkBudgetError::Invalid("fixed array gain must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn array_gain_db(&self) -> f64 {
        match self.array_gain {
            ArrayGain::Zf => 10.0 * ((self.antennas - self.users + 1) as f64).log10(),
            ArrayGain::Fixed { db } => db,
        }
    }
}

pub fn fspl_db(frequency_hz: f64, distance_m: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * distance_m * frequency_hz / SPEED_OF_LIGHT).log10()
}

/// Thermal noise `kTB` in dBm.
pub fn noise_floor_dbm(bandwidth_hz: f64, temperature_k: f64) -> f64 {
    10.0 * (BOLTZMANN * temperature_k * bandwidth_hz / 1e-3).log10()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxPower {
    pub dbm: f64,
    pub mw: f64,
}

/// `snr + noise floor + NF + fading margin + FSPL - array gain`.
pub fn required_tx_power(target_snr_db: f64, cfg: &LinkBudgetConfig) -> Result<TxPower> {
    cfg.validate()?;
    let dbm = target_snr_db
        + noise_floor_dbm(cfg.bandwidth_hz, cfg.temperature_k)
        + cfg.noise_figure_db
        + cfg.fading_margin_db
        + fspl_db(cfg.carrier_hz, cfg.distance_m)
        - cfg.array_gain_db();
    Ok(TxPower {
        dbm,
        mw: 10f64.powf(dbm / 10.0),
    })
}

const SEARCH_LO_DB: f64 = -20.0;
const SEARCH_HI_DB: f64 = 60.0;

/// Inverts the analytic AWGN BER of square `order`-QAM by bisection in dB,
/// to 1e-4 dB.
pub fn snr_target_for_ber(ber_target: f64, order: u32) -> Result<f64> {
    if !(ber_target > 0.0 && ber_target < 0.5) {
        return Err(LinkBudgetError::Invalid(format!("target BER {ber_target} outside (0, 0.5)")));
    }
    let f = |db: f64| awgn_ber_oracle(10f64.powf(db / 10.0), order);
    let (mut lo, mut hi) = (SEARCH_LO_DB, SEARCH_HI_DB);
    if !(f(lo) >= ber_target && f(hi) <= ber_target) {
        return Err(LinkBudgetError::NotBracketed {
            ber: ber_target,
            lo_db: lo,
            hi_db: hi,
        });
    }
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > ber_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// SNR target read off a simulated curve, interpolating `log10(BER)`
/// linearly in dB between the bracketing points.
pub fn snr_target_from_curve(ber_target: f64, curve: &BerCurve) -> Result<f64> {
    if !(ber_target > 0.0 && ber_target < 0.5) {
        return Err(LinkBudgetError::Invalid(format!("target BER {ber_target} outside (0, 0.5)")));
    }
    let mut pts: Vec<(f64, f64)> = curve
        .points
        .iter()
        .filter(|p| p.ber > 0.0)
        .map(|p| (p.snr_db, p.ber.log10()))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let t = ber_target.log10();
    for w in pts.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if y0 >= t && t >= y1 && y0 != y1 {
            return Ok(x0 + (t - y0) * (x1 - x0) / (y1 - y0));
        }
    }
    Err(LinkBudgetError::NotBracketed {
        ber: ber_target,
        lo_db: pts.first().map_or(f64::NAN, |p| p.0),
        hi_db: pts.last().map_or(f64::NAN, |p| p.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::BerPoint;
    use proptest::prelude::*;

    fn zero_losses() -> LinkBudgetConfig {
        LinkBudgetConfig {
            noise_figure_db: 0.0,
            fading_margin_db: 0.0,
            carrier_hz: SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI),
            distance_m: 1.0,
            array_gain: ArrayGain::Fixed { db: 0.0 },
            ..Default::default()
        }
    }

    #[test]
    fn fspl_examples() {
        assert!((fspl_db(3.7e9, 100.0) - 83.81).abs() < 0.005);
        let f = SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI);
        assert!(fspl_db(f, 1.0).abs() < 1e-12);
        assert!((fspl_db(3.7e9, 200.0) - fspl_db(3.7e9, 100.0) - 20.0 * 2f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn noise_floor_examples() {
        assert!((noise_floor_dbm(20e6, 300.0) - -100.82).abs() < 0.005);
        assert!(noise_floor_dbm(1e-3 / BOLTZMANN, 1.0).abs() < 1e-12);
        assert!((noise_floor_dbm(200e6, 300.0) - noise_floor_dbm(20e6, 300.0) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn power_examples() {
        let cfg = LinkBudgetConfig::default();
        assert!((cfg.array_gain_db() - 19.59).abs() < 0.005);
        let p = required_tx_power(25.4, &cfg).unwrap();
        assert!((p.dbm - -0.70).abs() < 0.01, "{}", p.dbm);
        assert!((p.mw - 0.851).abs() < 0.002, "{}", p.mw);
        assert!((10.0 * (p.mw / 0.856).log10()).abs() < 3.0);

        let z = zero_losses();
        let p0 = required_tx_power(0.0, &z).unwrap();
        assert!((p0.dbm - noise_floor_dbm(z.bandwidth_hz, z.temperature_k)).abs() < 1e-12);

        let a = required_tx_power(20.0, &cfg).unwrap().dbm;
        let b = required_tx_power(21.0, &cfg).unwrap().dbm;
        assert!((b - a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn snr_target_examples() {
        assert!((snr_target_for_ber(1e-4, 64).unwrap() - 24.32).abs() < 0.05);
        assert!((snr_target_for_ber(1e-5, 64).unwrap() - 25.58).abs() < 0.05);
        assert!(snr_target_for_ber(0.2413, 64).unwrap().abs() < 0.05);
        assert!(snr_target_for_ber(0.0, 64).is_err());
        assert!(snr_target_for_ber(0.6, 64).is_err());
        assert!(matches!(
            snr_target_for_ber(0.49, 64),
            Err(LinkBudgetError::NotBracketed { .. })
        ));
    }

    #[test]
    fn curve_interpolation() {
        let pt = |snr_db: f64, ber: f64| BerPoint {
            snr_db,
            ber,
            n_bits: 1,
            n_errors: 0,
            std_error: 0.0,
        };
        let curve = BerCurve {
            points: vec![pt(20.0, 1e-3), pt(25.0, 1e-5), pt(30.0, 0.0)],
            skipped_subcarriers: 0,
        };
        assert!((snr_target_from_curve(1e-4, &curve).unwrap() - 22.5).abs() < 1e-12);
        assert!(snr_target_from_curve(1e-6, &curve).is_err());
    }

    #[test]
    fn validation() {
        let bad = LinkBudgetConfig { users: 100, ..Default::default() };
        assert!(required_tx_power(10.0, &bad).is_err());
        let bad = LinkBudgetConfig { distance_m: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn round_trip_through_oracle(log_ber in -6.0f64..-2.0) {
            let ber = 10f64.powf(log_ber);
            let db = snr_target_for_ber(ber, 64).unwrap();
            let back = awgn_ber_oracle(10f64.powf(db / 10.0), 64);
            let db_back = snr_target_for_ber(back, 64).unwrap();
            prop_assert!((db - db_back).abs() < 0.1);
            prop_assert!((back.log10() - log_ber).abs() < 0.01);
        }

        #[test]
        fn power_monotone(snr in 0.0f64..40.0, d in 1.0f64..1000.0, nf in 0.0f64..15.0,
                          fm in 0.0f64..10.0, g in 0.0f64..30.0, step in 0.01f64..5.0) {
            let cfg = LinkBudgetConfig {
                distance_m: d, noise_figure_db: nf, fading_margin_db: fm,
                array_gain: ArrayGain::Fixed { db: g }, ..Default::default()
            };
            let p = |c: &LinkBudgetConfig, s: f64| required_tx_power(s, c).unwrap().dbm;
            let base = p(&cfg, snr);
            prop_assert!(p(&cfg, snr + step) > base);
            let farther = LinkBudgetConfig { distance_m: d * (1.0 + step), ..cfg };
            let noisier = LinkBudgetConfig { noise_figure_db: nf + step, ..cfg };
            let margin = LinkBudgetConfig { fading_margin_db: fm + step, ..cfg };
            let gain = LinkBudgetConfig { array_gain: ArrayGain::Fixed { db: g + step }, ..cfg };
            prop_assert!(p(&farther, snr) > base);
            prop_assert!(p(&noisier, snr) > base);
            prop_assert!(p(&margin, snr) > base);
            prop_assert!(p(&gain, snr) < base);
        }
    }
}
