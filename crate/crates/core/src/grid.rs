use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform spatial grid with the time step locked to the transport speed,
/// so that one step moves each envelope by exactly one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimGrid {
    pub z_min: f64,
    pub z_max: f64,
    pub n_points: usize,
    /// cm
    pub dz: f64,
    /// ps
    pub dt: f64,
    /// cm/ps
    pub v_g: f64,
    pub n_steps: usize,
}

/// Speed of light in vacuum, cm/ps.
pub const SPEED_OF_LIGHT: f64 = 0.029_979_245_8;

/// Default group velocity c/1.5 in cm/ps.
pub const DEFAULT_GROUP_VELOCITY: f64 = SPEED_OF_LIGHT / 1.5;

pub const MIN_POINTS: usize = 16;

fn finite(key: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(key, format!("must be finite, got {value}")))
    }
}

/// Number of whole steps covering `total_time`, tolerant of round-off in the
/// quotient (5000 / 0.5 must give 10000, not 10001).
pub fn steps_for(total_time: f64, dt: f64) -> usize {
    let q = total_time / dt;
    let r = q.round();
    if (q - r).abs() <= 1e-9 * q.max(1.0) {
        r.max(1.0) as usize
    } else {
        q.ceil().max(1.0) as usize
    }
}

pub fn make_grid(
    z_min: f64,
    z_max: f64,
    n_points: usize,
    v_g: f64,
    total_time: f64,
) -> Result<SimGrid> {
    finite("z_min", z_min)?;
    finite("z_max", z_max)?;
    finite("v_g", v_g)?;
    finite("total_time", total_time)?;
    if z_max <= z_min {
        return Err(Error::invalid(
            "z_max",
            format!("must exceed z_min ({z_max} <= {z_min})"),
        ));
    }
    if n_points < MIN_POINTS {
        return Err(Error::invalid(
            "n_points",
            format!("need at least {MIN_POINTS}, got {n_points}"),
        ));
    }
    if v_g <= 0.0 {
        return Err(Error::invalid("v_g", format!("must be positive, got {v_g}")));
    }
    if total_time <= 0.0 {
        return Err(Error::invalid(
            "total_time",
            format!("must be positive, got {total_time}"),
        ));
    }
    let dz = (z_max - z_min) / (n_points - 1) as f64;
    let dt = dz / v_g;
    Ok(SimGrid {
        z_min,
        z_max,
        n_points,
        dz,
        dt,
        v_g,
        n_steps: steps_for(total_time, dt),
    })
}

impl SimGrid {
    #[inline]
    pub fn z(&self, i: usize) -> f64 {
        self.z_min + i as f64 * self.dz
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.z(i))
    }

    /// Index of the first grid point with z >= `z` (clamped to the grid).
    pub fn index_at_or_above(&self, z: f64) -> usize {
        let x = (z - self.z_min) / self.dz;
        let i = if (x - x.round()).abs() < 1e-9 { x.round() } else { x.ceil() };
        (i.max(0.0) as usize).min(self.n_points - 1)
    }

    /// Index of the last grid point with z <= `z` (clamped to the grid).
    pub fn index_at_or_below(&self, z: f64) -> usize {
        let x = (z - self.z_min) / self.dz;
        let i = if (x - x.round()).abs() < 1e-9 { x.round() } else { x.floor() };
        (i.max(0.0) as usize).min(self.n_points - 1)
    }

    pub fn total_time(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    /// Same spatial grid with a different step budget.
    pub fn with_steps(&self, n_steps: usize) -> SimGrid {
        SimGrid {
            n_steps: n_steps.max(1),
            ..*self
        }
    }

    pub fn same_space(&self, other: &SimGrid) -> bool {
        self.n_points == other.n_points && self.z_min == other.z_min && self.dz == other.dz
    }
}
