//! Measurement projections and squeezing ratios.
//!
//! For coherent-state input the fluctuation of ⟨f|û⟩ has variance ¼·‖f‖²,
//! so the squeezing ratio is the squared norm of the back-propagated function
//! over that of the detected one. Vacuum entering through the window edges
//! during the run contributes through the adjoint leakage term.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::adjoint::backpropagate_many;
use crate::error::{Error, Result};
use crate::field::{fwhm_of, FieldState, ProjectionFunction};
use crate::grid::SimGrid;
use crate::profile::GratingProfile;
use crate::solver::{first_index_after, FieldHistory, Gate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementKind {
    #[default]
    PhotonNumber,
    Homodyne,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSpec {
    pub kind: MeasurementKind,
    /// Local oscillator phase in radians; ignored for photon counting.
    pub lo_phase: f64,
    /// Detection window (z_lo, z_hi) in cm.
    pub gate: (f64, f64),
}

impl MeasurementSpec {
    pub fn photon_number(gate: (f64, f64)) -> Self {
        MeasurementSpec {
            kind: MeasurementKind::PhotonNumber,
            lo_phase: 0.0,
            gate,
        }
    }

    pub fn homodyne(lo_phase: f64, gate: (f64, f64)) -> Self {
        MeasurementSpec {
            kind: MeasurementKind::Homodyne,
            lo_phase,
            gate,
        }
    }

    pub fn from_gate(kind: MeasurementKind, lo_phase: f64, gate: &Gate) -> Self {
        MeasurementSpec {
            kind,
            lo_phase,
            gate: (gate.z_lo, gate.z_hi),
        }
    }

    /// Phase applied to the projection.
    pub fn phase(&self) -> f64 {
        match self.kind {
            MeasurementKind::PhotonNumber => 0.0,
            MeasurementKind::Homodyne => self.lo_phase,
        }
    }

    /// Checks the gate is ordered and lies beyond the grating inside the window.
    pub fn validate(&self, grid: &SimGrid, profile: &GratingProfile) -> Result<Gate> {
        if !self.lo_phase.is_finite() {
            return Err(Error::invalid("lo_phase", "must be finite"));
        }
        let (z_lo, z_hi) = self.gate;
        if !(z_lo.is_finite() && z_hi.is_finite() && z_lo <= z_hi) {
            return Err(Error::invalid(
                "gate",
                format!("gate [{z_lo}, {z_hi}] must be finite and ordered"),
            ));
        }
        let gate = Gate::from_z(grid, z_lo, z_hi)?;
        if gate.lo < first_index_after(profile, grid) {
            return Err(Error::invalid(
                "gate",
                format!(
                    "gate starts at {z_lo} cm, inside the grating (ends at {} cm)",
                    profile.grating_end
                ),
            ));
        }
        Ok(gate)
    }
}

/// f_a = e^{iθ}·U_a/√E on the gate, zero elsewhere; f_b = 0.
pub fn build_projection(
    final_state: &FieldState,
    spec: &MeasurementSpec,
    grid: &SimGrid,
) -> Result<ProjectionFunction> {
    final_state.check_grid(grid)?;
    let gate = Gate::from_z(grid, spec.gate.0, spec.gate.1)?;
    projection_on(final_state, spec.phase(), &gate, grid.dz)
}

fn projection_on(final_state: &FieldState, theta: f64, gate: &Gate, dz: f64) -> Result<ProjectionFunction> {
    let energy = final_state.energy_a(gate.lo, gate.hi, dz);
    if !(energy > 0.0) {
        return Err(Error::ZeroEnergy(format!(
            "no field inside gate [{}, {}]",
            gate.z_lo, gate.z_hi
        )));
    }
    let scale = Complex64::from_polar(1.0 / energy.sqrt(), theta);
    let mut f = ProjectionFunction::zeros(final_state.len(), dz);
    for i in gate.lo..=gate.hi {
        f.f_a[i] = final_state.u_a[i] * scale;
    }
    Ok(f)
}

/// Variance of ⟨F|û⟩ for coherent-state input.
pub fn coherent_variance(f: &ProjectionFunction) -> f64 {
    0.25 * f.sq_norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezeResult {
    pub ratio: f64,
    /// 10·log10(ratio); negative when squeezed.
    pub ratio_db: f64,
    pub transmittance: f64,
    pub gate_lo_cm: f64,
    pub gate_hi_cm: f64,
    /// FWHM of the gated output pulse, in ps.
    pub fwhm_ps: Option<f64>,
    pub peak_gw_cm2: f64,
    pub lo_phase: Option<f64>,
}

impl SqueezeResult {
    /// Squeezing in dB below shot noise (positive when squeezed).
    pub fn squeezing_db(&self) -> f64 {
        -self.ratio_db
    }
}

pub fn to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// Index span of the nonzero samples of `f`.
fn support(f: &ProjectionFunction) -> Option<(usize, usize)> {
    let nz = |i: &usize| f.f_a[*i] != Complex64::new(0.0, 0.0) || f.f_b[*i] != Complex64::new(0.0, 0.0);
    let lo = (0..f.len()).find(nz)?;
    let hi = (0..f.len()).rev().find(nz)?;
    Some((lo, hi))
}

/// FWHM (ps) and peak intensity of u_a over `lo..=hi`.
pub fn pulse_metrics(state: &FieldState, grid: &SimGrid, lo: usize, hi: usize) -> (Option<f64>, f64) {
    let inten: Vec<f64> = state.u_a[lo..=hi].iter().map(|u| u.norm_sqr()).collect();
    let peak = inten.iter().cloned().fold(0.0, f64::max);
    let fwhm = fwhm_of(&inten, grid.dz).map(|w| w / grid.v_g);
    (fwhm, peak)
}

/// R = var⟨F_T|û(0)⟩/var⟨f_T|û(T)⟩ including vacuum that entered the window.
///
/// Gate and pulse metrics are taken from the support of `f_t`.
pub fn squeezing_ratio(f_t: &ProjectionFunction, history: &FieldHistory) -> Result<SqueezeResult> {
    let norm = f_t.sq_norm();
    if !(norm > 0.0) {
        return Err(Error::ZeroEnergy("measurement function is zero".into()));
    }
    let (lo, hi) = support(f_t).unwrap_or((0, 0));
    let g = backpropagate_many(std::slice::from_ref(f_t), history)?.gram();
    let ratio = g[0][0] / norm;
    let (fwhm_ps, peak) = pulse_metrics(history.final_state(), &history.grid, lo, hi);
    let grid = &history.grid;
    Ok(SqueezeResult {
        ratio,
        ratio_db: to_db(ratio),
        transmittance: history.transmittance()?,
        gate_lo_cm: grid.z(lo),
        gate_hi_cm: grid.z(hi),
        fwhm_ps,
        peak_gw_cm2: peak,
        lo_phase: None,
    })
}

/// Builds the projection for `spec` on the final field and evaluates R.
pub fn measure(history: &FieldHistory, spec: &MeasurementSpec) -> Result<SqueezeResult> {
    spec.validate(&history.grid, &history.profile)?;
    let f = build_projection(history.final_state(), spec, &history.grid)?;
    let mut r = squeezing_ratio(&f, history)?;
    r.lo_phase = Some(spec.phase());
    Ok(r)
}

/// Output covariance of the two conjugate quadratures of one projection,
/// as back-propagated Gram entries over the detected norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGram {
    /// [[G(0,0), G(0,π/2)], [G(π/2,0), G(π/2,π/2)]]
    pub gram: [[f64; 2]; 2],
    /// sq_norm of the detected projection.
    pub norm: f64,
}

impl QuadratureGram {
    /// Back-propagates the θ = 0 and θ = π/2 projections on `gate`.
    pub fn compute(history: &FieldHistory, final_state: &FieldState, gate: &Gate) -> Result<Self> {
        Ok(Self::compute_with_functions(history, final_state, gate)?.0)
    }

    /// Also returns the detected projection f_T (θ = 0) and the
    /// back-propagated functions F_0 of both quadratures.
    pub fn compute_with_functions(
        history: &FieldHistory,
        final_state: &FieldState,
        gate: &Gate,
    ) -> Result<(Self, ProjectionFunction, [ProjectionFunction; 2])> {
        let grid = &history.grid;
        final_state.check_grid(grid)?;
        let f0 = projection_on(final_state, 0.0, gate, grid.dz)?;
        let f1 = projection_on(final_state, PI / 2.0, gate, grid.dz)?;
        let norm = f0.sq_norm();
        let back = backpropagate_many(&[f0.clone(), f1], history)?;
        let g = back.gram();
        let mut functions = back.functions.into_iter();
        let (b0, b1) = (functions.next().expect("two functions"), functions.next().expect("two functions"));
        let q = QuadratureGram {
            gram: [[g[0][0], g[0][1]], [g[1][0], g[1][1]]],
            norm,
        };
        Ok((q, f0, [b0, b1]))
    }

    /// R(θ) for the homodyne projection e^{iθ}·f.
    pub fn ratio_at(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        let g = &self.gram;
        (c * c * g[0][0] + 2.0 * c * s * g[0][1] + s * s * g[1][1]) / self.norm
    }

    /// Phase in (−π/2, π/2] of least variance and the ratio there.
    pub fn optimum(&self) -> (f64, f64) {
        let g = &self.gram;
        let mean = 0.5 * (g[0][0] + g[1][1]);
        let half = 0.5 * (g[0][0] - g[1][1]);
        let amp = half.hypot(g[0][1]);
        let phi = g[0][1].atan2(half);
        let mut theta = 0.5 * (phi + PI);
        if theta > PI / 2.0 {
            theta -= PI;
        }
        (theta, (mean - amp) / self.norm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSweep {
    /// (θ, R(θ)) in input order.
    pub points: Vec<(f64, f64)>,
    pub argmin: f64,
    pub min_ratio: f64,
}

/// R(θ) for homodyne projections of the gated output at each θ.
///
/// Two back-propagations (θ = 0 and θ = π/2) give the 2×2 output covariance,
/// from which every other phase follows by linearity.
pub fn quadrature_sweep(
    history: &FieldHistory,
    final_state: &FieldState,
    gate: (f64, f64),
    phases: &[f64],
) -> Result<QuadratureSweep> {
    if phases.is_empty() {
        return Err(Error::invalid("phases", "at least one phase is required"));
    }
    if let Some(p) = phases.iter().find(|p| !p.is_finite()) {
        return Err(Error::invalid("phases", format!("non-finite phase {p}")));
    }
    let gate = Gate::from_z(&history.grid, gate.0, gate.1)?;
    let q = QuadratureGram::compute(history, final_state, &gate)?;
    Ok(sweep_from_gram(&q, phases))
}

pub fn sweep_from_gram(q: &QuadratureGram, phases: &[f64]) -> QuadratureSweep {
    let points: Vec<(f64, f64)> = phases.iter().map(|&th| (th, q.ratio_at(th))).collect();
    let (argmin, min_ratio) = points
        .iter()
        .cloned()
        .fold((f64::NAN, f64::INFINITY), |best, p| if p.1 < best.1 { p } else { best });
    QuadratureSweep {
        points,
        argmin,
        min_ratio,
    }
}

/// `n` phases spanning [0, π) evenly.
pub fn phase_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| PI * k as f64 / n as f64).collect()
}
