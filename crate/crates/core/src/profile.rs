use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SimGrid;

/// Grating with a linearly apodized coupling coefficient.
///
/// Coupling and Kerr coefficient are both zero outside
/// `[grating_start, grating_end]`; the detuning applies everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GratingProfile {
    /// cm⁻¹
    pub kappa0: f64,
    /// cm⁻², slope of κ measured from `grating_start`
    pub alpha: f64,
    /// cm⁻¹
    pub delta: f64,
    /// cm/GW
    pub gamma: f64,
    pub grating_start: f64,
    pub grating_end: f64,
}

impl GratingProfile {
    pub fn new(
        kappa0: f64,
        alpha: f64,
        delta: f64,
        gamma: f64,
        grating_start: f64,
        grating_end: f64,
    ) -> Result<Self> {
        let p = GratingProfile {
            kappa0,
            alpha,
            delta,
            gamma,
            grating_start,
            grating_end,
        };
        p.validate()?;
        Ok(p)
    }

    /// Uniform grating of length `length` starting at z = 0.
    pub fn uniform(kappa0: f64, delta: f64, gamma: f64, length: f64) -> Result<Self> {
        Self::new(kappa0, 0.0, delta, gamma, 0.0, length)
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("kappa0", self.kappa0),
            ("alpha", self.alpha),
            ("delta", self.delta),
            ("gamma", self.gamma),
            ("grating_start", self.grating_start),
            ("grating_end", self.grating_end),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(key, format!("must be finite, got {v}")));
            }
        }
        if self.kappa0 < 0.0 {
            return Err(Error::invalid(
                "kappa0",
                format!("must be >= 0, got {}", self.kappa0),
            ));
        }
        if self.grating_end < self.grating_start {
            return Err(Error::invalid(
                "grating_end",
                format!(
                    "must not precede grating_start ({} < {})",
                    self.grating_end, self.grating_start
                ),
            ));
        }
        let k_end = self.kappa_at(self.grating_end);
        if k_end < 0.0 {
            return Err(Error::invalid(
                "alpha",
                format!("apodization drives kappa negative ({k_end} at grating end)"),
            ));
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.grating_end - self.grating_start
    }

    #[inline]
    pub fn inside(&self, z: f64) -> bool {
        z >= self.grating_start && z <= self.grating_end
    }

    /// κ(z); zero outside the grating.
    pub fn kappa(&self, z: f64) -> f64 {
        if self.inside(z) {
            self.kappa_at(z)
        } else {
            0.0
        }
    }

    fn kappa_at(&self, z: f64) -> f64 {
        self.kappa0 + self.alpha * (z - self.grating_start)
    }

    /// Γ(z); zero outside the grating.
    pub fn gamma_at(&self, z: f64) -> f64 {
        if self.inside(z) {
            self.gamma
        } else {
            0.0
        }
    }

    /// Inclusive index range of grid points inside the grating, if any.
    pub fn index_range(&self, grid: &SimGrid) -> Option<(usize, usize)> {
        let tol = 1e-9 * grid.dz;
        let lo = (0..grid.n_points).find(|&i| grid.z(i) >= self.grating_start - tol)?;
        let hi = (0..grid.n_points)
            .rev()
            .find(|&i| grid.z(i) <= self.grating_end + tol)?;
        (lo <= hi).then_some((lo, hi))
    }

    pub fn kappa_samples(&self, grid: &SimGrid) -> Vec<f64> {
        self.sample(grid, |z| self.kappa_at(z))
    }

    pub fn gamma_samples(&self, grid: &SimGrid) -> Vec<f64> {
        self.sample(grid, |_| self.gamma)
    }

    fn sample(&self, grid: &SimGrid, inside: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; grid.n_points];
        if let Some((lo, hi)) = self.index_range(grid) {
            for (i, v) in out.iter_mut().enumerate().take(hi + 1).skip(lo) {
                *v = inside(grid.z(i));
            }
        }
        out
    }
}
