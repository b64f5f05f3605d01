//! Zero-forcing equalisation, post-equalisation SNR and power control.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{PhyError, Result};

/// Channels with a larger 2-norm condition number are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Zero-forcing solution of one flat-fading `M x K` channel.
#[derive(Debug, Clone)]
pub struct ZfSolution {
    /// `W = (H^H H)^-1 H^H`, `K x M`.
    pub equalizer: DMatrix<Complex64>,
    /// Diagonal of `(H^H H)^-1`, the per-user noise enhancement.
    pub noise_enhancement: Vec<f64>,
    pub condition: f64,
}

impl ZfSolution {
    /// Computes `W` from the SVD `H = U S V^H` as `V S^-1 U^H`.
    pub fn new(h: &DMatrix<Complex64>) -> Result<Self> {
        let (m, k) = h.shape();
        if k == 0 || m < k {
            return Err(PhyError::InvalidArgument(format!(
                "zero-forcing needs M >= K >= 1 (got {m}x{k})"
            )));
        }
        let svd = h.clone().svd(true, true);
        let s = &svd.singular_values;
        let s_max = s.max();
        let s_min = s.min();
        let condition = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
        if !(condition <= MAX_CONDITION) {
            return Err(PhyError::Singular { condition });
        }
        let u = svd.u.expect("requested U");
        let v = svd.v_t.expect("requested V^H").adjoint();
        let inv_s = DVector::from_iterator(k, s.iter().map(|&x| Complex64::from(1.0 / x)));
        let equalizer = &v * DMatrix::from_diagonal(&inv_s) * u.adjoint();
        let noise_enhancement = (0..k)
            .map(|row| (0..k).map(|j| v[(row, j)].norm_sqr() / (s[j] * s[j])).sum())
            .collect();
        Ok(ZfSolution {
            equalizer,
            noise_enhancement,
            condition,
        })
    }
}

/// `W = (H^H H)^-1 H^H`.
pub fn zf_equalizer(h: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    ZfSolution::new(h).map(|z| z.equalizer)
}

/// Per-user post-equalisation SNR `p_k / (noise_var [(H^H H)^-1]_kk)`.
pub fn post_eq_snr(h: &DMatrix<Complex64>, noise_var: f64, powers: &[f64]) -> Result<Vec<f64>> {
    if !(noise_var > 0.0) {
        return Err(PhyError::InvalidArgument("noise variance must be positive".into()));
    }
    if powers.len() != h.ncols() {
        return Err(PhyError::InvalidArgument(format!(
            "{} powers for {} users",
            powers.len(),
            h.ncols()
        )));
    }
    if powers.iter().any(|&p| !(p > 0.0)) {
        return Err(PhyError::InvalidArgument("transmit powers must be positive".into()));
    }
    let zf = ZfSolution::new(h)?;
    Ok(powers
        .iter()
        .zip(&zf.noise_enhancement)
        .map(|(p, e)| p / (noise_var * e))
        .collect())
}

/// Transmit powers that give every user the same post-equalisation SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerControlSolution {
    pub powers: Vec<f64>,
    pub snr: f64,
}

impl PowerControlSolution {
    pub fn from_zf(zf: &ZfSolution, noise_var: f64, target_snr: f64) -> Self {
        PowerControlSolution {
            powers: zf
                .noise_enhancement
                .iter()
                .map(|e| target_snr * noise_var * e)
                .collect(),
            snr: target_snr,
        }
    }
}

pub fn power_control(h: &DMatrix<Complex64>, noise_var: f64, target_snr: f64) -> Result<PowerControlSolution> {
    if !(noise_var > 0.0) {
        return Err(PhyError::InvalidArgument("noise variance must be positive".into()));
    }
    if !(target_snr > 0.0 && target_snr.is_finite()) {
        return Err(PhyError::InvalidArgument("target SNR must be positive".into()));
    }
    let zf = ZfSolution::new(h)?;
    Ok(PowerControlSolution::from_zf(&zf, noise_var, target_snr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::generate_channel;

    fn max_abs(m: &DMatrix<Complex64>) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// `(H^H H)^-1 H^H` by explicit Gram inversion, independent of the SVD
    /// route used by the implementation.
    fn gram_route(h: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let g = h.adjoint() * h;
        g.try_inverse().unwrap() * h.adjoint()
    }

    #[test]
    fn ones_column() {
        let h = DMatrix::from_element(2, 1, c(1.0, 0.0));
        let w = zf_equalizer(&h).unwrap();
        assert!((w[(0, 0)] - c(0.5, 0.0)).norm() < 1e-12);
        assert!((w[(0, 1)] - c(0.5, 0.0)).norm() < 1e-12);
        let snr = post_eq_snr(&h, 1.0, &[1.0]).unwrap();
        assert!((snr[0] - 2.0).abs() < 1e-12);
        let pc = power_control(&h, 1.0, 2.0).unwrap();
        assert!((pc.powers[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthonormal_columns() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h = DMatrix::from_row_slice(2, 2, &[c(s, 0.0), c(0.0, s), c(s, 0.0), c(0.0, -s)]);
        let w = zf_equalizer(&h).unwrap();
        assert!(max_abs(&(w - h.adjoint())) < 1e-12);
        let snr = post_eq_snr(&h, 0.3, &[0.3, 0.3]).unwrap();
        assert!(snr.iter().all(|x| (x - 1.0).abs() < 1e-12));
        let pc = power_control(&h, 1.0, 10.0).unwrap();
        assert!(pc.powers.iter().all(|p| (p - 10.0).abs() < 1e-12));
    }

    #[test]
    fn random_channel_residual_and_gram_route() {
        let ch = generate_channel(100, 10, 3, 11).unwrap();
        for f in 0..3 {
            let h = ch.subcarrier(f);
            let w = zf_equalizer(&h).unwrap();
            let resid = max_abs(&(&w * &h - DMatrix::<Complex64>::identity(10, 10)));
            assert!(resid < 1e-9, "{resid}");
            assert!(max_abs(&(&w - gram_route(&h))) < 1e-9);
        }
    }

    #[test]
    fn snr_scales_linearly_and_round_trips() {
        let ch = generate_channel(16, 4, 2, 3).unwrap();
        let h = ch.subcarrier(1);
        let p = [0.5, 1.0, 2.0, 3.0];
        let base = post_eq_snr(&h, 0.7, &p).unwrap();
        let scaled: Vec<f64> = p.iter().map(|x| x * 4.0).collect();
        let s4 = post_eq_snr(&h, 0.7, &scaled).unwrap();
        for (a, b) in base.iter().zip(&s4) {
            assert!((b / a - 4.0).abs() < 1e-12);
        }
        for target in [0.1, 3.0, 270.7] {
            let pc = power_control(&h, 0.7, target).unwrap();
            let got = post_eq_snr(&h, 0.7, &pc.powers).unwrap();
            for g in got {
                assert!((g / target - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn singular_channels_rejected() {
        let h = DMatrix::from_row_slice(3, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(1.0, 1.0), c(2.0, 2.0), c(0.0, 1.0), c(0.0, 2.0)]);
        assert!(matches!(zf_equalizer(&h), Err(PhyError::Singular { .. })));
        assert!(matches!(post_eq_snr(&h, 1.0, &[1.0, 1.0]), Err(PhyError::Singular { .. })));
        let wide = DMatrix::from_element(1, 2, c(1.0, 0.0));
        assert!(zf_equalizer(&wide).is_err());
    }

    #[test]
    fn bad_arguments() {
        let h = DMatrix::from_element(2, 1, c(1.0, 0.0));
        assert!(post_eq_snr(&h, 0.0, &[1.0]).is_err());
        assert!(post_eq_snr(&h, 1.0, &[0.0]).is_err());
        assert!(post_eq_snr(&h, 1.0, &[1.0, 1.0]).is_err());
        assert!(power_control(&h, 1.0, 0.0).is_err());
    }
}
