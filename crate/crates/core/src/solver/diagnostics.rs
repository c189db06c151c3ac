use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::FieldState;
use crate::grid::SimGrid;
use crate::profile::GratingProfile;

/// Eighth-order centered first-derivative weights for offsets 1..=4.
///
/// The envelopes carry a spatial carrier near δ (0.15 rad per cell at the
/// default resolution), where a two-point difference would bias the drift
/// term by ~0.4 %.
const DERIVATIVE_STENCIL: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];

/// Classical value of the grating Hamiltonian on a sampled field.
///
/// ∂/∂z is a centered difference (zero beyond the ends) and integrals are
/// Riemann sums; κ and Γ are sampled per point.
pub fn hamiltonian_of(
    a: &[Complex64],
    b: &[Complex64],
    kappa: &[f64],
    gamma: &[f64],
    delta: f64,
    dz: f64,
    v_g: f64,
) -> f64 {
    let n = a.len();
    let at = |x: &[Complex64], i: isize| -> Complex64 {
        if i < 0 || i as usize >= n {
            Complex64::new(0.0, 0.0)
        } else {
            x[i as usize]
        }
    };
    let mut detuning = 0.0;
    let mut drift = Complex64::new(0.0, 0.0);
    let mut coupling = 0.0;
    let mut kerr = 0.0;
    for i in 0..n {
        let (ai, bi) = (a[i], b[i]);
        let (ia, ib) = (ai.norm_sqr(), bi.norm_sqr());
        detuning += ia + ib;
        let j = i as isize;
        let mut da = Complex64::new(0.0, 0.0);
        let mut db = Complex64::new(0.0, 0.0);
        for (k, c) in DERIVATIVE_STENCIL.iter().enumerate() {
            let o = k as isize + 1;
            da += (at(a, j + o) - at(a, j - o)) * *c;
            db += (at(b, j + o) - at(b, j - o)) * *c;
        }
        drift += ai.conj() * da - bi.conj() * db;
        coupling += kappa[i] * 2.0 * (ai.conj() * bi).re;
        kerr += gamma[i] * (0.5 * (ia * ia + ib * ib) + 2.0 * ia * ib);
    }
    // i·Σ u*·∂u·dz; the dz of the sum cancels the 1/dz of the difference.
    let drift = (Complex64::i() * drift).re;
    -v_g * (delta * detuning * dz + drift + coupling * dz + kerr * dz)
}

pub fn compute_hamiltonian(state: &FieldState, profile: &GratingProfile, grid: &SimGrid) -> f64 {
    hamiltonian_of(
        &state.u_a,
        &state.u_b,
        &profile.kappa_samples(grid),
        &profile.gamma_samples(grid),
        profile.delta,
        grid.dz,
        grid.v_g,
    )
}

/// First grid index strictly beyond the grating.
pub fn first_index_after(profile: &GratingProfile, grid: &SimGrid) -> usize {
    let tol = 1e-9 * grid.dz;
    (0..grid.n_points)
        .find(|&i| grid.z(i) > profile.grating_end + tol)
        .unwrap_or(grid.n_points)
}

/// Fraction of the input energy carried by u_a beyond the grating, plus
/// any forward energy that already left the window (`escaped_forward`).
pub fn transmittance(
    final_state: &FieldState,
    initial: &FieldState,
    profile: &GratingProfile,
    grid: &SimGrid,
    escaped_forward: f64,
) -> Result<f64> {
    let e_in = initial.norm(grid.dz);
    if !(e_in > 0.0) {
        return Err(Error::ZeroEnergy("input pulse carries no energy".into()));
    }
    let start = first_index_after(profile, grid);
    let e_out = if start < grid.n_points {
        final_state.energy_a(start, grid.n_points - 1, grid.dz)
    } else {
        0.0
    };
    Ok((e_out + escaped_forward) / e_in)
}

/// Gate selection parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateOptions {
    /// The gate extends while intensity stays above `threshold`·peak.
    pub threshold: f64,
    /// Local maxima below `prominence`·(largest transmitted intensity) are
    /// ignored when locating the leading pulse.
    pub prominence: f64,
}

pub const DEFAULT_GATE_THRESHOLD: f64 = 1e-3;
pub const DEFAULT_GATE_PROMINENCE: f64 = 0.05;

impl Default for GateOptions {
    fn default() -> Self {
        GateOptions {
            threshold: DEFAULT_GATE_THRESHOLD,
            prominence: DEFAULT_GATE_PROMINENCE,
        }
    }
}

/// Gate interval in both index and position form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gate {
    pub lo: usize,
    pub hi: usize,
    pub z_lo: f64,
    pub z_hi: f64,
}

impl Gate {
    pub fn from_z(grid: &SimGrid, z_lo: f64, z_hi: f64) -> Result<Gate> {
        if !(z_lo <= z_hi) || z_hi < grid.z_min || z_lo > grid.z_max {
            return Err(Error::invalid(
                "gate",
                format!("gate [{z_lo}, {z_hi}] is empty or outside the window"),
            ));
        }
        let lo = grid.index_at_or_above(z_lo);
        let hi = grid.index_at_or_below(z_hi);
        if lo > hi {
            return Err(Error::invalid("gate", "gate contains no grid points"));
        }
        Ok(Gate {
            lo,
            hi,
            z_lo: grid.z(lo),
            z_hi: grid.z(hi),
        })
    }

    pub fn whole_output(grid: &SimGrid, profile: &GratingProfile) -> Result<Gate> {
        let lo = first_index_after(profile, grid);
        if lo >= grid.n_points {
            return Err(Error::invalid("gate", "no output region beyond the grating"));
        }
        Ok(Gate {
            lo,
            hi: grid.n_points - 1,
            z_lo: grid.z(lo),
            z_hi: grid.z_max,
        })
    }
}

/// Selects the leading transmitted pulse (largest z) in the final snapshot.
///
/// `reference_peak` is the input peak intensity; a transmitted maximum below
/// 1e-12 of it counts as no transmission.
pub fn gate_first_pulse(
    final_state: &FieldState,
    profile: &GratingProfile,
    grid: &SimGrid,
    reference_peak: f64,
    opts: GateOptions,
) -> Result<Gate> {
    if !(opts.threshold > 0.0 && opts.threshold < 1.0) {
        return Err(Error::invalid(
            "gate_threshold",
            format!("must lie in (0, 1), got {}", opts.threshold),
        ));
    }
    let start = first_index_after(profile, grid);
    let n = grid.n_points;
    let inten: Vec<f64> = final_state.u_a.iter().map(|u| u.norm_sqr()).collect();
    let max_out = if start < n {
        inten[start..].iter().cloned().fold(0.0, f64::max)
    } else {
        0.0
    };
    if !(max_out >= 1e-12 * reference_peak) || max_out == 0.0 {
        return Err(Error::NoTransmittedPulse {
            peak: max_out,
            input_peak: reference_peak,
        });
    }
    let floor = opts.prominence * max_out;
    let is_peak = |i: usize| {
        let left = if i > start { inten[i - 1] } else { 0.0 };
        let right = if i + 1 < n { inten[i + 1] } else { 0.0 };
        inten[i] >= floor && inten[i] >= left && inten[i] > right
    };
    let peak_idx = (start..n).rev().find(|&i| is_peak(i)).unwrap_or(start);
    let cut = opts.threshold * inten[peak_idx];
    let mut lo = peak_idx;
    while lo > start && inten[lo - 1] >= cut {
        lo -= 1;
    }
    let mut hi = peak_idx;
    while hi + 1 < n && inten[hi + 1] >= cut {
        hi += 1;
    }
    Ok(Gate {
        lo,
        hi,
        z_lo: grid.z(lo),
        z_hi: grid.z(hi),
    })
}
