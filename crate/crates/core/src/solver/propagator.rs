use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::FieldState;
use crate::grid::SimGrid;
use crate::profile::GratingProfile;

/// Operator splitting used for one time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Splitting {
    /// transport, linear coupling, Kerr
    #[default]
    Lie,
    /// half coupling, half Kerr, transport, half Kerr, half coupling
    Strang,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fraction {
    Full,
    Half,
}

impl Fraction {
    pub fn value(self) -> f64 {
        match self {
            Fraction::Full => 1.0,
            Fraction::Half => 0.5,
        }
    }
}

/// One factor of the split step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Substep {
    /// Shift u_a one cell toward +z and u_b one cell toward −z.
    Transport,
    /// exp(i·h·dz·[[δ, κ], [κ, δ]]) at every point.
    Linear(Fraction),
    /// Self- and cross-phase rotation over h·dz.
    Kerr(Fraction),
}

const LIE: [Substep; 3] = [
    Substep::Transport,
    Substep::Linear(Fraction::Full),
    Substep::Kerr(Fraction::Full),
];

const STRANG: [Substep; 5] = [
    Substep::Linear(Fraction::Half),
    Substep::Kerr(Fraction::Half),
    Substep::Transport,
    Substep::Kerr(Fraction::Half),
    Substep::Linear(Fraction::Half),
];

impl Splitting {
    pub fn substeps(self) -> &'static [Substep] {
        match self {
            Splitting::Lie => &LIE,
            Splitting::Strang => &STRANG,
        }
    }
}

/// Values pushed out of the window by one transport substep:
/// u_a leaving at z_max, u_b leaving at z_min.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Exit {
    pub a_right: Complex64,
    pub b_left: Complex64,
}

#[derive(Debug, Clone)]
pub(crate) struct LinearCoeffs {
    /// exp(i·δ·h·dz)
    pub phase: Complex64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl LinearCoeffs {
    fn new(kappa: &[f64], delta: f64, len: f64) -> Self {
        LinearCoeffs {
            phase: Complex64::from_polar(1.0, delta * len),
            cos: kappa.iter().map(|k| (k * len).cos()).collect(),
            sin: kappa.iter().map(|k| (k * len).sin()).collect(),
        }
    }
}

/// Precomputed split-step operator for one grid and grating.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub grid: SimGrid,
    pub profile: GratingProfile,
    pub splitting: Splitting,
    range: Option<(usize, usize)>,
    lin_full: LinearCoeffs,
    lin_half: LinearCoeffs,
}

impl Propagator {
    pub fn new(grid: SimGrid, profile: GratingProfile, splitting: Splitting) -> Result<Self> {
        profile.validate()?;
        let kappa = profile.kappa_samples(&grid);
        Ok(Propagator {
            range: profile.index_range(&grid),
            lin_full: LinearCoeffs::new(&kappa, profile.delta, grid.dz),
            lin_half: LinearCoeffs::new(&kappa, profile.delta, 0.5 * grid.dz),
            grid,
            profile,
            splitting,
        })
    }

    pub fn substeps(&self) -> &'static [Substep] {
        self.splitting.substeps()
    }

    /// Inclusive index range where κ and Γ may be nonzero.
    pub fn grating_range(&self) -> Option<(usize, usize)> {
        self.range
    }

    pub(crate) fn linear_coeffs(&self, frac: Fraction) -> &LinearCoeffs {
        match frac {
            Fraction::Full => &self.lin_full,
            Fraction::Half => &self.lin_half,
        }
    }

    /// Γ·h·dz, the Kerr phase per unit intensity of one substep.
    pub(crate) fn kerr_strength(&self, frac: Fraction) -> f64 {
        self.profile.gamma * frac.value() * self.grid.dz
    }

    /// Applies one substep in place. Transport returns what left the window.
    pub fn apply_substep(&self, sub: Substep, a: &mut [Complex64], b: &mut [Complex64]) -> Exit {
        match sub {
            Substep::Transport => transport(a, b),
            Substep::Linear(frac) => {
                apply_linear(self.linear_coeffs(frac), self.range, a, b, false);
                Exit::default()
            }
            Substep::Kerr(frac) => {
                if let Some((lo, hi)) = self.range {
                    kerr(self.kerr_strength(frac), &mut a[lo..=hi], &mut b[lo..=hi]);
                }
                Exit::default()
            }
        }
    }

    /// Advances the classical field by one dt.
    pub fn step(&self, state: &mut FieldState) -> Exit {
        let mut exit = Exit::default();
        for &sub in self.substeps() {
            if sub == Substep::Transport {
                exit = self.apply_substep(sub, &mut state.u_a, &mut state.u_b);
            } else {
                self.apply_substep(sub, &mut state.u_a, &mut state.u_b);
            }
        }
        state.t += self.grid.dt;
        exit
    }
}

/// Exact characteristic transport by one cell with zero inflow.
pub(crate) fn transport(a: &mut [Complex64], b: &mut [Complex64]) -> Exit {
    let zero = Complex64::new(0.0, 0.0);
    let n = a.len();
    let exit = Exit {
        a_right: a[n - 1],
        b_left: b[0],
    };
    a.rotate_right(1);
    a[0] = zero;
    b.rotate_left(1);
    b[n - 1] = zero;
    exit
}

/// exp(±i·h·dz·M) with M = δ·I + κ·σx; `inverse` selects the minus sign.
pub(crate) fn apply_linear(
    c: &LinearCoeffs,
    range: Option<(usize, usize)>,
    a: &mut [Complex64],
    b: &mut [Complex64],
    inverse: bool,
) {
    let (phase, s_sign) = if inverse {
        (c.phase.conj(), -1.0)
    } else {
        (c.phase, 1.0)
    };
    match range {
        Some((lo, hi)) => {
            scale(&mut a[..lo], phase);
            scale(&mut b[..lo], phase);
            for i in lo..=hi {
                let (ai, bi) = (a[i], b[i]);
                let cs = c.cos[i];
                let sn = s_sign * c.sin[i];
                a[i] = phase * Complex64::new(cs * ai.re - sn * bi.im, cs * ai.im + sn * bi.re);
                b[i] = phase * Complex64::new(cs * bi.re - sn * ai.im, cs * bi.im + sn * ai.re);
            }
            scale(&mut a[hi + 1..], phase);
            scale(&mut b[hi + 1..], phase);
        }
        None => {
            scale(a, phase);
            scale(b, phase);
        }
    }
}

fn scale(x: &mut [Complex64], c: Complex64) {
    if c == Complex64::new(1.0, 0.0) {
        return;
    }
    for v in x {
        *v *= c;
    }
}

/// u_a ← u_a·exp(i·g·(|u_a|² + 2|u_b|²)), u_b ← u_b·exp(i·g·(|u_b|² + 2|u_a|²)).
pub(crate) fn kerr(g: f64, a: &mut [Complex64], b: &mut [Complex64]) {
    if g == 0.0 {
        return;
    }
    for (ai, bi) in a.iter_mut().zip(b.iter_mut()) {
        let ia = ai.norm_sqr();
        let ib = bi.norm_sqr();
        let (sa, ca) = (g * (ia + 2.0 * ib)).sin_cos();
        let (sb, cb) = (g * (ib + 2.0 * ia)).sin_cos();
        *ai *= Complex64::new(ca, sa);
        *bi *= Complex64::new(cb, sb);
    }
}
