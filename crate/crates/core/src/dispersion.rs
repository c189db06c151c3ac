//! Linear uniform-grating tools: Bloch dispersion and the monochromatic
//! transfer matrix.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    /// cm⁻¹
    pub delta: f64,
    /// Bloch wavenumber in cm⁻¹; purely imaginary inside the gap.
    pub q: Complex64,
}

/// Bloch wavenumber q with q² = δ² − κ².
///
/// Outside the gap sign(q) = sign(δ) so the group velocity dδ/dq = q/δ is
/// positive; inside the gap Im q > 0.
pub fn bloch_wavenumber(kappa: f64, delta: f64) -> Complex64 {
    let d2 = delta * delta - kappa * kappa;
    if d2 >= 0.0 {
        Complex64::new(delta.signum() * d2.sqrt(), 0.0)
    } else {
        Complex64::new(0.0, (-d2).sqrt())
    }
}

pub fn band_structure(kappa: f64, delta_values: &[f64]) -> Result<Vec<BandPoint>> {
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(Error::invalid("kappa", format!("must be finite and >= 0, got {kappa}")));
    }
    delta_values
        .iter()
        .map(|&delta| {
            if !delta.is_finite() {
                return Err(Error::invalid("delta", "must be finite"));
            }
            Ok(BandPoint {
                delta,
                q: bloch_wavenumber(kappa, delta),
            })
        })
        .collect()
}

/// Amplitude transmission and reflection of a uniform grating of `length`
/// for a monochromatic wave at detuning `delta`.
///
/// Solves d/dz (A, B) = [[iδ, iκ], [−iκ, −iδ]]·(A, B) with A(0) = 1 and
/// B(L) = 0; t = A(L), r = B(0).
pub fn linear_transfer(kappa: f64, delta: f64, length: f64) -> Result<(Complex64, Complex64)> {
    if !(length >= 0.0) || !length.is_finite() {
        return Err(Error::invalid("length", format!("must be finite and >= 0, got {length}")));
    }
    if !kappa.is_finite() || !delta.is_finite() {
        return Err(Error::invalid("kappa", "kappa and delta must be finite"));
    }
    let i = Complex64::i();
    // γ² = κ² − δ²; the transfer matrix is cosh(γL)·I + sinh(γL)/γ·G.
    // Dividing through by cosh keeps deep-gap gratings finite.
    let g = Complex64::new(kappa * kappa - delta * delta, 0.0).sqrt();
    let gl = g * length;
    let (tanhc, sech) = if gl.norm() < 1e-8 {
        (Complex64::new(length, 0.0) * (1.0 - gl * gl / 3.0), 1.0 / gl.cosh())
    } else if gl.re > 20.0 {
        // Re γL ≥ 0 always; tanh is 1 to double precision.
        (1.0 / g, 2.0 * (-gl).exp())
    } else {
        (gl.tanh() / g, 1.0 / gl.cosh())
    };
    let den = 1.0 - i * delta * tanhc;
    let t = sech / den;
    let r = i * kappa * tanhc / den;
    Ok((t, r))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_edge_and_free_limits() {
        let pts = band_structure(10.0, &[10.0, 0.0]).unwrap();
        assert_eq!(pts[0].q, Complex64::new(0.0, 0.0));
        assert!((pts[1].q - Complex64::new(0.0, 10.0)).norm() < 1e-12);
        let free = band_structure(0.0, &[5.0, -5.0]).unwrap();
        assert_eq!(free[0].q, Complex64::new(5.0, 0.0));
        assert_eq!(free[1].q, Complex64::new(-5.0, 0.0));
        assert!(band_structure(-1.0, &[0.0]).is_err());
    }

    #[test]
    fn empty_grating_is_transparent() {
        let (t, r) = linear_transfer(10.0, 15.0, 0.0).unwrap();
        assert!((t - 1.0).norm() < 1e-15);
        assert!(r.norm() < 1e-15);
    }

    #[test]
    fn line_center_transmission_is_sech() {
        let (t, r) = linear_transfer(10.0, 0.0, 0.5).unwrap();
        assert!((t.norm() - 1.0 / 5.0f64.cosh()).abs() < 1e-15);
        assert!((t.norm() - 1.3476e-2).abs() < 1e-6);
        assert!((t.norm_sqr() + r.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deep_gap_long_grating_is_finite() {
        let (t, r) = linear_transfer(10.0, 0.0, 50.0).unwrap();
        assert!(t.norm() < 1e-200);
        assert!((r.norm() - 1.0).abs() < 1e-15);
        let (t, r) = linear_transfer(10.0, 6.0, 50.0).unwrap();
        assert!((t.norm_sqr() + r.norm_sqr() - 1.0).abs() < 1e-12);
        assert!(t.norm() < 1e-100);
    }

    #[test]
    fn band_edge_transfer_is_finite() {
        let (t, r) = linear_transfer(10.0, 10.0, 0.5).unwrap();
        // at δ = κ: t = 1/(1 − iκL)
        let expected = 1.0 / Complex64::new(1.0, -5.0);
        assert!((t - expected).norm() < 1e-12);
        assert!((t.norm_sqr() + r.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_coupling_is_pure_phase() {
        let (t, r) = linear_transfer(1e-13, 3.0, 2.0).unwrap();
        assert!((t - Complex64::from_polar(1.0, 6.0)).norm() < 1e-10);
        assert!(r.norm() < 1e-10);
    }
}
