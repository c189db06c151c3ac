//! Classical nonlinear coupled-mode integrator.
//!
//! The grid is locked to dt = dz/v_g so transport along both characteristics
//! is an exact one-cell shift. Each step is a product of pointwise unitary
//! maps and a permutation, hence the total norm (window plus whatever left
//! through the edges) is conserved to round-off.

mod diagnostics;
mod history;
mod propagator;

pub use diagnostics::{
    compute_hamiltonian, first_index_after, gate_first_pulse, hamiltonian_of, transmittance, Gate,
    GateOptions, DEFAULT_GATE_PROMINENCE, DEFAULT_GATE_THRESHOLD,
};
pub use history::{FieldHistory, REPLAY_TOLERANCE};
pub use propagator::{Exit, Fraction, Propagator, Splitting, Substep};
pub(crate) use propagator::{apply_linear, transport};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldState;
use crate::grid::SimGrid;
use crate::profile::GratingProfile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub grid: SimGrid,
    pub profile: GratingProfile,
    pub splitting: Splitting,
    pub checkpoint_stride: usize,
    pub record_observables_every: usize,
}

impl SolverConfig {
    /// Lie splitting, ⌈√n_steps⌉ checkpoint stride, observables every 50 steps.
    pub fn new(grid: SimGrid, profile: GratingProfile) -> Self {
        SolverConfig {
            grid,
            profile,
            splitting: Splitting::Lie,
            checkpoint_stride: default_stride(grid.n_steps),
            record_observables_every: 50,
        }
    }

    pub fn with_splitting(mut self, splitting: Splitting) -> Self {
        self.splitting = splitting;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.checkpoint_stride = stride;
        self
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_observables_every = every;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        if self.checkpoint_stride == 0 {
            return Err(Error::invalid("checkpoint_stride", "must be positive"));
        }
        if self.record_observables_every == 0 {
            return Err(Error::invalid("record_observables_every", "must be positive"));
        }
        Ok(())
    }
}

pub fn default_stride(n_steps: usize) -> usize {
    ((n_steps as f64).sqrt().ceil() as usize).max(1)
}

/// Advances `state` by one dt. Convenience wrapper that builds the operator;
/// loops should hold a [`Propagator`] instead.
pub fn step_ncme(state: &FieldState, profile: &GratingProfile, grid: &SimGrid) -> Result<FieldState> {
    state.check_grid(grid)?;
    let prop = Propagator::new(*grid, *profile, Splitting::Lie)?;
    let mut next = state.clone();
    prop.step(&mut next);
    if !next.is_finite() {
        return Err(Error::Divergence { step: 1 });
    }
    Ok(next)
}

/// Field that has left the window through either edge.
///
/// Samples are stored with the accumulated detuning phase divided out, so the
/// escaped free-space field can be reconstructed at any later time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Escaped {
    /// u_a leaving at z_max, in exit order.
    pub a_right: Vec<Complex64>,
    /// u_b leaving at z_min, in exit order.
    pub b_left: Vec<Complex64>,
    pub energy_right: f64,
    pub energy_left: f64,
    /// δ·(distance) accumulated by all linear substeps so far.
    phase_len: f64,
}

impl Escaped {
    fn record(&mut self, exit: Exit, dz: f64) {
        let undo = Complex64::from_polar(1.0, -self.phase_len);
        self.energy_right += exit.a_right.norm_sqr() * dz;
        self.energy_left += exit.b_left.norm_sqr() * dz;
        self.a_right.push(exit.a_right * undo);
        self.b_left.push(exit.b_left * undo);
    }

    pub fn total_energy(&self) -> f64 {
        self.energy_right + self.energy_left
    }

    /// Window plus escaped field laid out on one extended grid:
    /// `b_left.len()` cells before the window, `a_right.len()` after.
    pub fn extended(&self, state: &FieldState) -> (Vec<Complex64>, Vec<Complex64>, usize) {
        let zero = Complex64::new(0.0, 0.0);
        let redo = Complex64::from_polar(1.0, self.phase_len);
        let nl = self.b_left.len();
        let nr = self.a_right.len();
        let n = state.len();
        let mut a = vec![zero; nl + n + nr];
        let mut b = vec![zero; nl + n + nr];
        for (k, v) in self.b_left.iter().enumerate() {
            b[k] = v * redo;
        }
        a[nl..nl + n].copy_from_slice(&state.u_a);
        b[nl..nl + n].copy_from_slice(&state.u_b);
        for (k, v) in self.a_right.iter().enumerate() {
            a[nl + n + nr - 1 - k] = v * redo;
        }
        (a, b, nl)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableRow {
    pub step: usize,
    pub t_ps: f64,
    /// Window norm plus escaped energy.
    pub norm: f64,
    /// Hamiltonian of window plus escaped field.
    pub hamiltonian: f64,
    pub peak_a: f64,
    pub transmitted_fraction: f64,
    /// Fraction of the input energy carried by u_a inside the grating.
    pub grating_fraction: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunObservables {
    pub rows: Vec<ObservableRow>,
}

impl RunObservables {
    pub fn max_relative_drift(&self, f: impl Fn(&ObservableRow) -> f64) -> f64 {
        let x0 = self.rows.first().map(&f).unwrap_or(0.0);
        self.max_drift_over(f, if x0 != 0.0 { x0.abs() } else { 1.0 })
    }

    /// max |x(t) − x(0)| / scale over the recorded rows.
    pub fn max_drift_over(&self, f: impl Fn(&ObservableRow) -> f64, scale: f64) -> f64 {
        let Some(first) = self.rows.first() else {
            return 0.0;
        };
        let x0 = f(first);
        self.rows
            .iter()
            .map(|r| (f(r) - x0).abs() / scale)
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct ForwardRun {
    pub history: FieldHistory,
    pub observables: RunObservables,
    pub final_state: FieldState,
    pub escaped: Escaped,
}

impl ForwardRun {
    pub fn transmittance(&self) -> Result<f64> {
        self.history.transmittance()
    }
}

/// Returned by a stop rule after each observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

struct Observer {
    kappa: Vec<f64>,
    gamma: Vec<f64>,
    out_start: usize,
    range: Option<(usize, usize)>,
    e_in: f64,
}

impl Observer {
    fn new(grid: &SimGrid, profile: &GratingProfile, initial: &FieldState) -> Self {
        Observer {
            kappa: profile.kappa_samples(grid),
            gamma: profile.gamma_samples(grid),
            out_start: first_index_after(profile, grid),
            range: profile.index_range(grid),
            e_in: initial.norm(grid.dz),
        }
    }

    fn observe(
        &self,
        step: usize,
        state: &FieldState,
        escaped: &Escaped,
        grid: &SimGrid,
        profile: &GratingProfile,
    ) -> ObservableRow {
        let (a, b, nl) = escaped.extended(state);
        let ext = a.len();
        let mut kappa = vec![0.0; ext];
        let mut gamma = vec![0.0; ext];
        kappa[nl..nl + grid.n_points].copy_from_slice(&self.kappa);
        gamma[nl..nl + grid.n_points].copy_from_slice(&self.gamma);
        let hamiltonian =
            hamiltonian_of(&a, &b, &kappa, &gamma, profile.delta, grid.dz, grid.v_g);
        let transmitted = if self.out_start < grid.n_points {
            state.energy_a(self.out_start, grid.n_points - 1, grid.dz)
        } else {
            0.0
        } + escaped.energy_right;
        let inside = match self.range {
            Some((lo, hi)) => {
                let e: f64 = (lo..=hi)
                    .map(|i| state.u_a[i].norm_sqr())
                    .sum();
                e * grid.dz
            }
            None => 0.0,
        };
        let frac = |e: f64| if self.e_in > 0.0 { e / self.e_in } else { 0.0 };
        ObservableRow {
            step,
            t_ps: state.t,
            norm: state.norm(grid.dz) + escaped.total_energy(),
            hamiltonian,
            peak_a: state.peak_intensity_a(),
            transmitted_fraction: frac(transmitted),
            grating_fraction: frac(inside),
        }
    }
}

/// Runs exactly `config.grid.n_steps` steps.
pub fn run_forward(config: &SolverConfig, initial: &FieldState) -> Result<ForwardRun> {
    run_forward_until(config, initial, |_| Control::Continue)
}

/// Runs at most `config.grid.n_steps` steps, consulting `stop` after every
/// observation. The returned history's grid carries the steps actually taken.
pub fn run_forward_until(
    config: &SolverConfig,
    initial: &FieldState,
    mut stop: impl FnMut(&ObservableRow) -> Control,
) -> Result<ForwardRun> {
    config.validate()?;
    let grid = config.grid;
    initial.check_grid(&grid)?;
    if !initial.is_finite() {
        return Err(Error::Divergence { step: 0 });
    }
    let prop = Propagator::new(grid, config.profile, config.splitting)?;
    let observer = Observer::new(&grid, &config.profile, initial);
    let substeps = prop.substeps();
    let delta_len: f64 = substeps
        .iter()
        .filter_map(|s| match s {
            Substep::Linear(f) => Some(f.value() * grid.dz * config.profile.delta),
            _ => None,
        })
        .sum();
    // Linear substeps applied before the transport within one step.
    let delta_before: f64 = substeps
        .iter()
        .take_while(|s| **s != Substep::Transport)
        .filter_map(|s| match s {
            Substep::Linear(f) => Some(f.value() * grid.dz * config.profile.delta),
            _ => None,
        })
        .sum();

    let mut state = initial.clone();
    let mut escaped = Escaped::default();
    let mut checkpoints = vec![(0usize, state.clone())];
    let mut rows = vec![observer.observe(0, &state, &escaped, &grid, &config.profile)];
    let mut stopped = false;
    let mut step = 0;
    while step < grid.n_steps && !stopped {
        let base = escaped.phase_len;
        escaped.phase_len = base + delta_before;
        for &sub in substeps {
            let exit = prop.apply_substep(sub, &mut state.u_a, &mut state.u_b);
            if sub == Substep::Transport {
                escaped.record(exit, grid.dz);
            }
        }
        escaped.phase_len = base + delta_len;
        state.t += grid.dt;
        step += 1;

        let at_checkpoint = step % config.checkpoint_stride == 0;
        let at_record = step % config.record_observables_every == 0 || step == grid.n_steps;
        if at_record || at_checkpoint {
            if !state.is_finite() {
                return Err(Error::Divergence { step });
            }
        }
        if at_record {
            let row = observer.observe(step, &state, &escaped, &grid, &config.profile);
            stopped = stop(&row) == Control::Stop;
            rows.push(row);
        }
        if at_checkpoint || step == grid.n_steps || stopped {
            checkpoints.push((step, state.clone()));
        }
    }
    if !state.is_finite() {
        return Err(Error::Divergence { step });
    }
    if rows.last().map(|r| r.step) != Some(step) {
        rows.push(observer.observe(step, &state, &escaped, &grid, &config.profile));
    }
    if checkpoints.last().map(|c| c.0) != Some(step) {
        checkpoints.push((step, state.clone()));
    }
    let history = FieldHistory {
        checkpoints,
        checkpoint_stride: config.checkpoint_stride,
        grid: grid.with_steps(step),
        profile: config.profile,
        splitting: config.splitting,
        escaped_right: escaped.energy_right,
        escaped_left: escaped.energy_left,
    };
    Ok(ForwardRun {
        history,
        observables: RunObservables { rows },
        final_state: state,
        escaped,
    })
}
