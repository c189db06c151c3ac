//! Linearized fluctuation dynamics around a stored classical run and the
//! adjoint back-propagation of measurement functions.
//!
//! The forward linearized step is the exact real-linear derivative of the
//! classical split step. The adjoint is built per substep from it with
//! respect to ⟨f|g⟩ = Σ dz·Re(f_a*·g_a + f_b*·g_b):
//!
//! * backward stepping applies the transpose Jᵀ of each substep in reverse
//!   order (so ⟨F_n|u_n⟩ = ⟨F_{n+1}|u_{n+1}⟩ exactly);
//! * forward stepping applies J⁻ᵀ, so ⟨u^A|u⟩ is conserved step by step.
//!
//! Transport drops one cell per edge each step. Its transpose pushes the
//! adjoint out through the opposite edge; those samples are the weights on
//! vacuum fluctuations entering the window and are accumulated as leakage.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{FieldState, ProjectionFunction};
use crate::grid::SimGrid;
use crate::profile::GratingProfile;
use crate::solver::{
    apply_linear, transport, Exit, FieldHistory, Propagator, Splitting, Substep,
};

/// ⟨f|g⟩ = ½·Σ dz·[f_a*·g_a + f_a·g_a* + f_b*·g_b + f_b·g_b*].
pub fn inner_product(f: &ProjectionFunction, g: &ProjectionFunction) -> Result<f64> {
    f.same_grid(g)?;
    Ok(raw_inner(&f.f_a, &f.f_b, &g.f_a, &g.f_b) * f.dz)
}

fn raw_inner(fa: &[Complex64], fb: &[Complex64], ga: &[Complex64], gb: &[Complex64]) -> f64 {
    let dot = |x: &[Complex64], y: &[Complex64]| -> f64 {
        x.iter().zip(y).map(|(p, q)| p.re * q.re + p.im * q.im).sum::<f64>()
    };
    dot(fa, ga) + dot(fb, gb)
}

/// Adjoint pair at time index `step` (counts down during back-propagation).
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointState {
    pub f: ProjectionFunction,
    pub step: usize,
}

/// Adjoint samples pushed through the window edges by one transposed
/// transport: `a` leaves at z_min, `b` at z_max.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Leak {
    pub a: Complex64,
    pub b: Complex64,
}

/// Forward tangent of the Kerr substep at the classical point (A, B).
pub(crate) fn kerr_tangent(
    g: f64,
    ca: &[Complex64],
    cb: &[Complex64],
    da: &mut [Complex64],
    db: &mut [Complex64],
) {
    let i = Complex64::i();
    for k in 0..ca.len() {
        let (a0, b0) = (ca[k], cb[k]);
        let (ia, ib) = (a0.norm_sqr(), b0.norm_sqr());
        let ea = Complex64::from_polar(1.0, g * (ia + 2.0 * ib));
        let eb = Complex64::from_polar(1.0, g * (ib + 2.0 * ia));
        let ra = a0.re * da[k].re + a0.im * da[k].im;
        let rb = b0.re * db[k].re + b0.im * db[k].im;
        da[k] = ea * (da[k] + i * a0 * (g * (2.0 * ra + 4.0 * rb)));
        db[k] = eb * (db[k] + i * b0 * (g * (2.0 * rb + 4.0 * ra)));
    }
}

/// Transpose of [`kerr_tangent`] at (A, B). With `g` negated and (A, B) the
/// Kerr output, this is the inverse-transpose of the forward tangent.
pub(crate) fn kerr_transpose(
    g: f64,
    ca: &[Complex64],
    cb: &[Complex64],
    fa: &mut [Complex64],
    fb: &mut [Complex64],
) {
    let i = Complex64::i();
    for k in 0..ca.len() {
        let (a0, b0) = (ca[k], cb[k]);
        let (ia, ib) = (a0.norm_sqr(), b0.norm_sqr());
        let ea = Complex64::from_polar(1.0, g * (ia + 2.0 * ib));
        let eb = Complex64::from_polar(1.0, g * (ib + 2.0 * ia));
        let wa = i * a0 * ea;
        let wb = i * b0 * eb;
        let sa = fa[k].re * wa.re + fa[k].im * wa.im;
        let sb = fb[k].re * wb.re + fb[k].im * wb.im;
        fa[k] = ea.conj() * fa[k] + a0 * (g * (2.0 * sa + 4.0 * sb));
        fb[k] = eb.conj() * fb[k] + b0 * (g * (4.0 * sa + 2.0 * sb));
    }
}

/// Transpose of the transport substep: u_a moves toward −z, u_b toward +z.
pub(crate) fn transport_transpose(a: &mut [Complex64], b: &mut [Complex64]) -> Leak {
    let zero = Complex64::new(0.0, 0.0);
    let n = a.len();
    let leak = Leak { a: a[0], b: b[n - 1] };
    a.rotate_left(1);
    a[n - 1] = zero;
    b.rotate_right(1);
    b[0] = zero;
    leak
}

/// Linearized and adjoint steppers sharing one propagator and scratch space.
#[derive(Debug, Clone)]
pub struct LinearizedStepper {
    prop: Propagator,
    work: FieldState,
    stages: Vec<FieldState>,
    stages_out: Vec<FieldState>,
}

impl LinearizedStepper {
    pub fn new(prop: Propagator) -> Self {
        let n = prop.grid.n_points;
        let kerr_count = prop
            .substeps()
            .iter()
            .filter(|s| matches!(s, Substep::Kerr(_)))
            .count();
        LinearizedStepper {
            prop,
            work: FieldState::zeros(n),
            stages: vec![FieldState::zeros(n); kerr_count],
            stages_out: vec![FieldState::zeros(n); kerr_count],
        }
    }

    pub fn propagator(&self) -> &Propagator {
        &self.prop
    }

    fn range(&self) -> Option<(usize, usize)> {
        self.prop.grating_range()
    }

    /// Records the classical states entering and leaving each Kerr substep
    /// of the step that starts at `classical`.
    pub fn prepare_stages(&mut self, classical: &FieldState) {
        self.work.u_a.copy_from_slice(&classical.u_a);
        self.work.u_b.copy_from_slice(&classical.u_b);
        let mut k = 0;
        for &sub in self.prop.substeps() {
            if let Substep::Kerr(_) = sub {
                self.stages[k].u_a.copy_from_slice(&self.work.u_a);
                self.stages[k].u_b.copy_from_slice(&self.work.u_b);
            }
            self.prop.apply_substep(sub, &mut self.work.u_a, &mut self.work.u_b);
            if let Substep::Kerr(_) = sub {
                self.stages_out[k].u_a.copy_from_slice(&self.work.u_a);
                self.stages_out[k].u_b.copy_from_slice(&self.work.u_b);
                k += 1;
            }
        }
    }

    /// Forward linearized step using the prepared stages. Returns the
    /// perturbation samples that left the window.
    pub fn tangent_forward_prepared(&self, pa: &mut [Complex64], pb: &mut [Complex64]) -> Exit {
        let range = self.range();
        let mut exit = Exit::default();
        let mut k = 0;
        for &sub in self.prop.substeps() {
            match sub {
                Substep::Transport => exit = transport(pa, pb),
                Substep::Linear(frac) => {
                    apply_linear(self.prop.linear_coeffs(frac), range, pa, pb, false)
                }
                Substep::Kerr(frac) => {
                    if let Some((lo, hi)) = range {
                        kerr_tangent(
                            self.prop.kerr_strength(frac),
                            &self.stages[k].u_a[lo..=hi],
                            &self.stages[k].u_b[lo..=hi],
                            &mut pa[lo..=hi],
                            &mut pb[lo..=hi],
                        );
                    }
                    k += 1;
                }
            }
        }
        exit
    }

    /// Applies Jᵀ using the stages from the last [`prepare_stages`] call.
    ///
    /// [`prepare_stages`]: LinearizedStepper::prepare_stages
    pub fn adjoint_backward_prepared(&self, fa: &mut [Complex64], fb: &mut [Complex64]) -> Leak {
        let range = self.range();
        let mut leak = Leak::default();
        let mut k = self.stages.len();
        for &sub in self.prop.substeps().iter().rev() {
            match sub {
                Substep::Transport => leak = transport_transpose(fa, fb),
                Substep::Linear(frac) => {
                    apply_linear(self.prop.linear_coeffs(frac), range, fa, fb, true)
                }
                Substep::Kerr(frac) => {
                    k -= 1;
                    if let Some((lo, hi)) = range {
                        kerr_transpose(
                            self.prop.kerr_strength(frac),
                            &self.stages[k].u_a[lo..=hi],
                            &self.stages[k].u_b[lo..=hi],
                            &mut fa[lo..=hi],
                            &mut fb[lo..=hi],
                        );
                    }
                }
            }
        }
        leak
    }

    /// Applies J⁻ᵀ using the prepared stages. Returns the adjoint samples
    /// that left the window.
    pub fn adjoint_forward_prepared(&self, fa: &mut [Complex64], fb: &mut [Complex64]) -> Exit {
        let range = self.range();
        let mut exit = Exit::default();
        let mut k = 0;
        for &sub in self.prop.substeps() {
            match sub {
                Substep::Transport => exit = transport(fa, fb),
                Substep::Linear(frac) => {
                    apply_linear(self.prop.linear_coeffs(frac), range, fa, fb, false)
                }
                Substep::Kerr(frac) => {
                    if let Some((lo, hi)) = range {
                        kerr_transpose(
                            -self.prop.kerr_strength(frac),
                            &self.stages_out[k].u_a[lo..=hi],
                            &self.stages_out[k].u_b[lo..=hi],
                            &mut fa[lo..=hi],
                            &mut fb[lo..=hi],
                        );
                    }
                    k += 1;
                }
            }
        }
        exit
    }

    /// One forward step of the linearized system around `classical` (the
    /// mean field at the start of the step).
    pub fn tangent_forward(&mut self, classical: &FieldState, pa: &mut [Complex64], pb: &mut [Complex64]) -> Exit {
        self.prepare_stages(classical);
        self.tangent_forward_prepared(pa, pb)
    }

    /// One backward adjoint step: maps the adjoint at step n+1 to step n,
    /// where `classical` is the mean field at step n.
    pub fn adjoint_backward(&mut self, classical: &FieldState, fa: &mut [Complex64], fb: &mut [Complex64]) -> Leak {
        self.prepare_stages(classical);
        self.adjoint_backward_prepared(fa, fb)
    }

    /// One forward adjoint step (J⁻ᵀ) from step n to n+1 around the mean
    /// field at step n. Exact inverse of [`adjoint_backward`] away from the
    /// window edges.
    ///
    /// [`adjoint_backward`]: LinearizedStepper::adjoint_backward
    pub fn adjoint_forward(&mut self, classical: &FieldState, fa: &mut [Complex64], fb: &mut [Complex64]) -> Exit {
        self.prepare_stages(classical);
        self.adjoint_forward_prepared(fa, fb)
    }
}

fn lie_stepper(profile: &GratingProfile, grid: &SimGrid) -> Result<LinearizedStepper> {
    Ok(LinearizedStepper::new(Propagator::new(*grid, *profile, Splitting::Lie)?))
}

fn check_pair(f: &ProjectionFunction, classical: &FieldState, grid: &SimGrid) -> Result<()> {
    classical.check_grid(grid)?;
    if f.len() != grid.n_points || f.f_b.len() != grid.n_points {
        return Err(Error::GridMismatch(format!(
            "function has {} samples, grid has {}",
            f.len(),
            grid.n_points
        )));
    }
    Ok(())
}

fn check_finite(f: &ProjectionFunction, step: usize) -> Result<()> {
    let ok = f
        .f_a
        .iter()
        .chain(f.f_b.iter())
        .all(|u| u.re.is_finite() && u.im.is_finite());
    if ok {
        Ok(())
    } else {
        Err(Error::Divergence { step })
    }
}

/// Advances a c-number perturbation by one step of the linearized system
/// around `classical` (Lie splitting).
pub fn step_linearized_forward(
    pert: &ProjectionFunction,
    classical: &FieldState,
    profile: &GratingProfile,
    grid: &SimGrid,
) -> Result<ProjectionFunction> {
    check_pair(pert, classical, grid)?;
    let mut stepper = lie_stepper(profile, grid)?;
    let mut out = pert.clone();
    stepper.tangent_forward(classical, &mut out.f_a, &mut out.f_b);
    check_finite(&out, 1)?;
    Ok(out)
}

/// Moves the adjoint one step back in time around `classical`, the mean field
/// at the destination step (Lie splitting). Leakage through the edges is
/// discarded; use [`backpropagate`] to keep it.
pub fn step_adjoint_backward(
    adj: &AdjointState,
    classical: &FieldState,
    profile: &GratingProfile,
    grid: &SimGrid,
) -> Result<AdjointState> {
    check_pair(&adj.f, classical, grid)?;
    if adj.step == 0 {
        return Err(Error::invalid("step", "adjoint already at step 0"));
    }
    let mut stepper = lie_stepper(profile, grid)?;
    let mut f = adj.f.clone();
    stepper.adjoint_backward(classical, &mut f.f_a, &mut f.f_b);
    check_finite(&f, adj.step - 1)?;
    Ok(AdjointState {
        f,
        step: adj.step - 1,
    })
}

/// Moves the adjoint one step forward in time around `classical`, the mean
/// field at the starting step (Lie splitting).
pub fn step_adjoint_forward(
    adj: &AdjointState,
    classical: &FieldState,
    profile: &GratingProfile,
    grid: &SimGrid,
) -> Result<AdjointState> {
    check_pair(&adj.f, classical, grid)?;
    let mut stepper = lie_stepper(profile, grid)?;
    let mut f = adj.f.clone();
    stepper.adjoint_forward(classical, &mut f.f_a, &mut f.f_b);
    check_finite(&f, adj.step + 1)?;
    Ok(AdjointState {
        f,
        step: adj.step + 1,
    })
}

/// Back-propagated measurement functions with their edge leakage.
#[derive(Debug, Clone, PartialEq)]
pub struct Backpropagated {
    /// F_T at t = 0, one per input function.
    pub functions: Vec<ProjectionFunction>,
    /// leak[i][j] = Σ dz·Re(l_i*·l_j) over every sample that left the
    /// window during back-propagation.
    pub leak: Vec<Vec<f64>>,
}

impl Backpropagated {
    /// G[i][j] = ⟨F_i|F_j⟩ + leak[i][j]; four times the output covariance of
    /// the measured quadratures for coherent-state input.
    pub fn gram(&self) -> Vec<Vec<f64>> {
        let k = self.functions.len();
        let mut g = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in 0..k {
                let fi = &self.functions[i];
                let fj = &self.functions[j];
                g[i][j] = raw_inner(&fi.f_a, &fi.f_b, &fj.f_a, &fj.f_b) * fi.dz + self.leak[i][j];
            }
        }
        g
    }
}

/// Back-propagates `f_T` from the end of `history` to t = 0.
pub fn backpropagate(f_t: &ProjectionFunction, history: &FieldHistory) -> Result<ProjectionFunction> {
    Ok(backpropagate_many(std::slice::from_ref(f_t), history)?
        .functions
        .remove(0))
}

/// Back-propagates several functions in one pass, replaying each classical
/// segment once between checkpoints.
pub fn backpropagate_many(fs: &[ProjectionFunction], history: &FieldHistory) -> Result<Backpropagated> {
    history.validate()?;
    let grid = history.grid;
    for f in fs {
        if f.len() != grid.n_points || f.f_b.len() != grid.n_points || f.dz != grid.dz {
            return Err(Error::GridMismatch(format!(
                "projection with {} samples (dz {}) vs grid {} (dz {})",
                f.len(),
                f.dz,
                grid.n_points,
                grid.dz
            )));
        }
    }
    let prop = history.propagator()?;
    let mut stepper = LinearizedStepper::new(prop.clone());
    let mut work: Vec<ProjectionFunction> = fs.to_vec();
    let k = fs.len();
    let mut leak = vec![vec![0.0; k]; k];
    let mut leaks = vec![Leak::default(); k];
    for seg in (0..history.checkpoints.len() - 1).rev() {
        let states = history.replay_segment(&prop, seg)?;
        let s0 = history.checkpoints[seg].0;
        for classical in states.iter().rev() {
            stepper.prepare_stages(classical);
            for (f, l) in work.iter_mut().zip(leaks.iter_mut()) {
                *l = stepper.adjoint_backward_prepared(&mut f.f_a, &mut f.f_b);
            }
            for i in 0..k {
                for j in i..k {
                    let v = (leaks[i].a.conj() * leaks[j].a + leaks[i].b.conj() * leaks[j].b).re
                        * grid.dz;
                    leak[i][j] += v;
                    if j != i {
                        leak[j][i] += v;
                    }
                }
            }
        }
        for f in &work {
            check_finite(f, s0)?;
        }
    }
    Ok(Backpropagated {
        functions: work,
        leak,
    })
}
