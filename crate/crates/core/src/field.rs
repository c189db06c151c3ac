use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SimGrid;

/// Forward (`u_a`) and backward (`u_b`) envelopes on the grid at time `t`.
///
/// |u|² is an intensity in GW/cm².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub u_a: Vec<Complex64>,
    pub u_b: Vec<Complex64>,
    /// ps
    pub t: f64,
}

impl FieldState {
    pub fn zeros(n: usize) -> Self {
        FieldState {
            u_a: vec![Complex64::new(0.0, 0.0); n],
            u_b: vec![Complex64::new(0.0, 0.0); n],
            t: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.u_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u_a.is_empty()
    }

    pub fn check_grid(&self, grid: &SimGrid) -> Result<()> {
        if self.u_a.len() != grid.n_points || self.u_b.len() != grid.n_points {
            return Err(Error::GridMismatch(format!(
                "field has {}/{} samples, grid has {}",
                self.u_a.len(),
                self.u_b.len(),
                grid.n_points
            )));
        }
        Ok(())
    }

    /// Σ (|u_a|² + |u_b|²)·dz
    pub fn norm(&self, dz: f64) -> f64 {
        sq_sum(&self.u_a, &self.u_b) * dz
    }

    /// Energy of the forward envelope over the inclusive index range.
    pub fn energy_a(&self, lo: usize, hi: usize, dz: f64) -> f64 {
        if lo > hi {
            return 0.0;
        }
        self.u_a[lo..=hi].iter().map(|u| u.norm_sqr()).sum::<f64>() * dz
    }

    pub fn peak_intensity_a(&self) -> f64 {
        self.u_a.iter().map(|u| u.norm_sqr()).fold(0.0, f64::max)
    }

    /// Relative L2 distance to `other`, normalised by `other`.
    pub fn rel_l2_distance(&self, other: &FieldState) -> f64 {
        let mut diff = 0.0;
        let mut base = 0.0;
        for i in 0..self.len() {
            diff += (self.u_a[i] - other.u_a[i]).norm_sqr() + (self.u_b[i] - other.u_b[i]).norm_sqr();
            base += other.u_a[i].norm_sqr() + other.u_b[i].norm_sqr();
        }
        if base == 0.0 {
            diff.sqrt()
        } else {
            (diff / base).sqrt()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u_a
            .iter()
            .chain(self.u_b.iter())
            .all(|u| u.re.is_finite() && u.im.is_finite())
    }
}

pub(crate) fn sq_sum(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().map(|u| u.norm_sqr()).sum::<f64>() + b.iter().map(|u| u.norm_sqr()).sum::<f64>()
}

/// Pair of complex functions used as a measurement characteristic function,
/// a perturbation, or an adjoint state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionFunction {
    pub f_a: Vec<Complex64>,
    pub f_b: Vec<Complex64>,
    pub dz: f64,
}

impl ProjectionFunction {
    pub fn zeros(n: usize, dz: f64) -> Self {
        ProjectionFunction {
            f_a: vec![Complex64::new(0.0, 0.0); n],
            f_b: vec![Complex64::new(0.0, 0.0); n],
            dz,
        }
    }

    pub fn from_field(state: &FieldState, dz: f64) -> Self {
        ProjectionFunction {
            f_a: state.u_a.clone(),
            f_b: state.u_b.clone(),
            dz,
        }
    }

    pub fn len(&self) -> usize {
        self.f_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f_a.is_empty()
    }

    /// Σ (|f_a|² + |f_b|²)·dz
    pub fn sq_norm(&self) -> f64 {
        sq_sum(&self.f_a, &self.f_b) * self.dz
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        ProjectionFunction {
            f_a: self.f_a.iter().map(|x| x * c).collect(),
            f_b: self.f_b.iter().map(|x| x * c).collect(),
            dz: self.dz,
        }
    }

    /// Rescaled to unit `sq_norm`.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.sq_norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::ZeroEnergy("cannot normalise a zero projection".into()));
        }
        Ok(self.scaled(Complex64::new(1.0 / n.sqrt(), 0.0)))
    }

    pub fn same_grid(&self, other: &ProjectionFunction) -> Result<()> {
        if self.f_a.len() != other.f_a.len()
            || self.f_b.len() != other.f_b.len()
            || self.dz != other.dz
        {
            return Err(Error::GridMismatch(format!(
                "projection sizes {} vs {} (dz {} vs {})",
                self.f_a.len(),
                other.f_a.len(),
                self.dz,
                other.dz
            )));
        }
        Ok(())
    }
}

/// Width parameter w of sech(z/w) whose intensity FWHM is `fwhm_len`.
pub fn sech_width(fwhm_len: f64) -> f64 {
    fwhm_len / (2.0 * std::f64::consts::SQRT_2.acosh())
}

/// Tail intensity (relative to peak) allowed at the window edge.
pub const EDGE_TAIL_LIMIT: f64 = 1e-8;

/// Sech-shaped forward pulse: u_a = √I · sech((z − center)/w) · exp(i·carrier_detune·z).
pub fn sech_pulse(
    grid: &SimGrid,
    center: f64,
    fwhm_time: f64,
    peak_intensity: f64,
    carrier_detune: f64,
) -> Result<FieldState> {
    if !(peak_intensity >= 0.0) || !peak_intensity.is_finite() {
        return Err(Error::invalid(
            "peak_intensity",
            format!("must be finite and >= 0, got {peak_intensity}"),
        ));
    }
    if !(fwhm_time > 0.0) || !fwhm_time.is_finite() {
        return Err(Error::invalid(
            "fwhm",
            format!("must be positive, got {fwhm_time}"),
        ));
    }
    if !center.is_finite() || !carrier_detune.is_finite() {
        return Err(Error::invalid("center", "must be finite"));
    }
    let w = sech_width(grid.v_g * fwhm_time);
    if center - 5.0 * w < grid.z_min || center + 5.0 * w > grid.z_max {
        return Err(Error::invalid(
            "center",
            format!(
                "pulse {center} ± {:.4} cm does not fit in [{}, {}]",
                5.0 * w,
                grid.z_min,
                grid.z_max
            ),
        ));
    }
    let edge = (grid.z_min - center).abs().min((grid.z_max - center).abs());
    let tail = (1.0 / (edge / w).cosh()).powi(2);
    if tail > EDGE_TAIL_LIMIT {
        return Err(Error::invalid(
            "center",
            format!("pulse clipped by the window edge (edge/peak intensity {tail:e})"),
        ));
    }
    let amp = peak_intensity.sqrt();
    let mut state = FieldState::zeros(grid.n_points);
    for (i, u) in state.u_a.iter_mut().enumerate() {
        let z = grid.z(i);
        let env = amp / ((z - center) / w).cosh();
        *u = Complex64::from_polar(env, carrier_detune * z);
    }
    Ok(state)
}

/// Full width at half maximum of a sampled intensity profile, with linear
/// interpolation of the half-maximum crossings around the global peak.
pub fn fwhm_of(intensity: &[f64], dz: f64) -> Option<f64> {
    let (imax, &peak) = intensity
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    if !(peak > 0.0) {
        return None;
    }
    let half = 0.5 * peak;
    let mut left = None;
    for i in (0..imax).rev() {
        if intensity[i] < half {
            let frac = (half - intensity[i]) / (intensity[i + 1] - intensity[i]);
            left = Some(i as f64 + frac);
            break;
        }
    }
    let mut right = None;
    for i in imax + 1..intensity.len() {
        if intensity[i] < half {
            let frac = (intensity[i - 1] - half) / (intensity[i - 1] - intensity[i]);
            right = Some((i - 1) as f64 + frac);
            break;
        }
    }
    Some((right? - left?) * dz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, DEFAULT_GROUP_VELOCITY};

    #[test]
    fn sixty_ps_pulse_is_1p2_cm_wide() {
        let g = make_grid(-10.0, 10.0, 2001, 0.02, 1.0).unwrap();
        let p = sech_pulse(&g, 0.0, 60.0, 4.5, 0.0).unwrap();
        let inten: Vec<f64> = p.u_a.iter().map(|u| u.norm_sqr()).collect();
        let fwhm = fwhm_of(&inten, g.dz).unwrap();
        assert!((fwhm - 1.2).abs() < g.dz, "fwhm {fwhm}");
        assert!((p.peak_intensity_a() - 4.5).abs() < 1e-12);
        assert!(p.u_b.iter().all(|u| u.norm() == 0.0));
    }

    #[test]
    fn zero_peak_gives_zero_field() {
        let g = make_grid(-10.0, 10.0, 2001, 0.02, 1.0).unwrap();
        let p = sech_pulse(&g, 0.0, 60.0, 0.0, 0.0).unwrap();
        assert_eq!(p.norm(g.dz), 0.0);
    }

    #[test]
    fn norm_matches_analytic() {
        let g = make_grid(-15.0, 15.0, 3001, DEFAULT_GROUP_VELOCITY, 1.0).unwrap();
        let p = sech_pulse(&g, 0.3, 60.0, 4.5, 0.0).unwrap();
        let w = sech_width(g.v_g * 60.0);
        let analytic = 2.0 * 4.5 * w;
        assert!((p.norm(g.dz) - analytic).abs() / analytic < 1e-6);
    }

    #[test]
    fn clipped_pulse_is_rejected() {
        let g = make_grid(-3.0, 3.0, 601, 0.02, 1.0).unwrap();
        assert!(sech_pulse(&g, 0.0, 60.0, 1.0, 0.0).is_err());
        let g = make_grid(-10.0, 10.0, 2001, 0.02, 1.0).unwrap();
        assert!(sech_pulse(&g, 8.0, 60.0, 1.0, 0.0).is_err());
        assert!(sech_pulse(&g, 0.0, 60.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn carrier_ramp_sets_phase() {
        let g = make_grid(-10.0, 10.0, 2001, 0.02, 1.0).unwrap();
        let p = sech_pulse(&g, 0.0, 60.0, 1.0, 2.0).unwrap();
        let i = g.index_at_or_above(0.5);
        assert!((p.u_a[i].arg() - 1.0).abs() < 1e-12);
    }
}
