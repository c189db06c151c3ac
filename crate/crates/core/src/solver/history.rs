use serde::{Deserialize, Serialize};

use super::propagator::{Propagator, Splitting};
use crate::error::{Error, Result};
use crate::field::FieldState;
use crate::grid::SimGrid;
use crate::profile::GratingProfile;

/// Relative L2 tolerance for a replayed segment to match its stored end.
pub const REPLAY_TOLERANCE: f64 = 1e-10;

/// Checkpointed classical solution for the adjoint pass.
///
/// Checkpoints sit at multiples of `checkpoint_stride` starting at step 0;
/// the last one is always at `grid.n_steps` (the final segment may be short).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldHistory {
    pub checkpoints: Vec<(usize, FieldState)>,
    pub checkpoint_stride: usize,
    pub grid: SimGrid,
    pub profile: GratingProfile,
    pub splitting: Splitting,
    /// Energy that left through z_max (forward) and z_min (backward).
    #[serde(default)]
    pub escaped_right: f64,
    #[serde(default)]
    pub escaped_left: f64,
}

impl FieldHistory {
    pub fn n_steps(&self) -> usize {
        self.grid.n_steps
    }

    pub fn propagator(&self) -> Result<Propagator> {
        Propagator::new(self.grid, self.profile, self.splitting)
    }

    pub fn initial(&self) -> &FieldState {
        &self.checkpoints[0].1
    }

    pub fn final_state(&self) -> &FieldState {
        &self.checkpoints[self.checkpoints.len() - 1].1
    }

    /// Transmitted energy fraction at the end of the run.
    pub fn transmittance(&self) -> Result<f64> {
        super::transmittance(
            self.final_state(),
            self.initial(),
            &self.profile,
            &self.grid,
            self.escaped_right,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let mismatch = |msg: String| Err(Error::GridMismatch(msg));
        if self.checkpoints.is_empty() || self.checkpoints[0].0 != 0 {
            return mismatch("history must start with a checkpoint at step 0".into());
        }
        if self.checkpoints.last().map(|c| c.0) != Some(self.grid.n_steps) {
            return mismatch("history must end with a checkpoint at n_steps".into());
        }
        for w in self.checkpoints.windows(2) {
            let (s0, s1) = (w[0].0, w[1].0);
            let regular = s1 == s0 + self.checkpoint_stride && s0 % self.checkpoint_stride == 0;
            let tail = s1 == self.grid.n_steps && s1 > s0 && s1 - s0 <= self.checkpoint_stride;
            if !(regular || tail) {
                return mismatch(format!("irregular checkpoint steps {s0} -> {s1}"));
            }
        }
        for (_, state) in &self.checkpoints {
            state.check_grid(&self.grid)?;
        }
        Ok(())
    }

    /// Recomputes segment `k`, returning the states at steps
    /// `checkpoints[k].0 .. checkpoints[k + 1].0` (end exclusive), and checks
    /// the replayed end state against the stored checkpoint.
    pub fn replay_segment(&self, prop: &Propagator, k: usize) -> Result<Vec<FieldState>> {
        let (s0, ref start) = self.checkpoints[k];
        let (s1, ref end) = self.checkpoints[k + 1];
        let mut out = Vec::with_capacity(s1 - s0);
        let mut state = start.clone();
        for _ in s0..s1 {
            out.push(state.clone());
            prop.step(&mut state);
        }
        let rel_err = state.rel_l2_distance(end);
        if !(rel_err <= REPLAY_TOLERANCE) {
            return Err(Error::ReplayMismatch { step: s1, rel_err });
        }
        Ok(out)
    }
}
