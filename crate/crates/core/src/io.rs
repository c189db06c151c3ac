//! CSV tables, JSON sidecars and gnuplot scripts.
//!
//! Floats are written in shortest round-trip form, so a value read back
//! from any table is bit-identical to the one computed.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::dispersion::{bloch_wavenumber, linear_transfer};
use crate::error::{Error, Result};
use crate::experiments::{Outcome, SweepRow, SweepVariable};
use crate::field::{FieldState, ProjectionFunction};
use crate::grid::SimGrid;
use crate::solver::{FieldHistory, RunObservables};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Stated in every sidecar: the slope sign that compresses the soliton is
/// a property of this convention, and is reported from the measured width.
pub const ALPHA_SIGN_NOTE: &str = "alpha enters as kappa(z) = kappa0 + alpha*(z - grating_start); \
which sign compresses the soliton is not fixed by convention, so rows are labelled by the measured \
output FWHM (shape column) rather than by the sign of alpha";

fn create(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    Ok(csv::Writer::from_path(path)?)
}

fn float(x: f64) -> String {
    // Shortest string that parses back exactly, with an exponent for very
    // small or large magnitudes.
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

pub fn write_observables(path: &Path, obs: &RunObservables) -> Result<()> {
    let mut w = create(path)?;
    for row in &obs.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Long-format snapshot table: one row per (t, z).
pub fn write_snapshots(path: &Path, grid: &SimGrid, states: &[&FieldState]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["t_ps", "z_cm", "re_a", "im_a", "re_b", "im_b", "intensity_a", "intensity_b"])?;
    for s in states {
        s.check_grid(grid)?;
        for i in 0..grid.n_points {
            let (a, b) = (s.u_a[i], s.u_b[i]);
            w.write_record([
                float(s.t),
                float(grid.z(i)),
                float(a.re),
                float(a.im),
                float(b.re),
                float(b.im),
                float(a.norm_sqr()),
                float(b.norm_sqr()),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Up to `count` stored states evenly spread from launch to the end.
pub fn snapshot_states(history: &FieldHistory, count: usize) -> Vec<&FieldState> {
    let cps = &history.checkpoints;
    if count == 0 || cps.is_empty() {
        return Vec::new();
    }
    if count == 1 {
        return vec![&cps[cps.len() - 1].1];
    }
    let mut idx: Vec<usize> = (0..count)
        .map(|k| ((k * (cps.len() - 1)) as f64 / (count - 1) as f64).round() as usize)
        .collect();
    idx.dedup();
    idx.into_iter().map(|k| &cps[k].1).collect()
}

/// Projection functions side by side on the window grid.
pub fn write_projections(path: &Path, grid: &SimGrid, named: &[(&str, &ProjectionFunction)]) -> Result<()> {
    let mut w = create(path)?;
    let mut header = vec!["z_cm".to_string()];
    for (name, f) in named {
        if f.len() != grid.n_points {
            return Err(Error::GridMismatch(format!(
                "{name} has {} points, grid has {}",
                f.len(),
                grid.n_points
            )));
        }
        for part in ["re_a", "im_a", "re_b", "im_b"] {
            header.push(format!("{name}_{part}"));
        }
    }
    w.write_record(&header)?;
    for i in 0..grid.n_points {
        let mut rec = vec![float(grid.z(i))];
        for (_, f) in named {
            rec.extend([f.f_a[i].re, f.f_a[i].im, f.f_b[i].re, f.f_b[i].im].map(float));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub const SWEEP_COLUMNS: &[&str] = &[
    "value",
    "transmittance",
    "ratio",
    "ratio_db",
    "optimal_ratio",
    "optimal_db",
    "optimal_phase",
    "lo_phase",
    "fwhm_ps",
    "peak_gw_cm2",
    "shape",
    "gate_lo_cm",
    "gate_hi_cm",
    "t_final_ps",
    "n_steps",
    "norm_drift",
    "escaped_right",
    "error",
];

/// Output pulse compared with the input width: compressed, broadened or
/// unchanged (within 10 %).
pub fn shape_label(fwhm_ps: Option<f64>, input_fwhm_ps: f64) -> &'static str {
    match fwhm_ps {
        None => "unresolved",
        Some(w) if w < 0.9 * input_fwhm_ps => "compressed",
        Some(w) if w > 1.1 * input_fwhm_ps => "broadened",
        Some(_) => "unchanged",
    }
}

fn outcome_fields(o: &Outcome, input_fwhm_ps: f64) -> Vec<String> {
    vec![
        float(o.transmittance),
        float(o.ratio),
        float(o.ratio_db),
        float(o.optimal_ratio),
        float(o.optimal_db),
        float(o.optimal_phase),
        float(o.lo_phase),
        opt(o.fwhm_ps),
        float(o.peak_gw_cm2),
        shape_label(o.fwhm_ps, input_fwhm_ps).to_string(),
        float(o.gate_lo_cm),
        float(o.gate_hi_cm),
        float(o.t_final_ps),
        o.n_steps.to_string(),
        float(o.norm_drift),
        float(o.escaped_right),
    ]
}

pub fn write_sweep(path: &Path, rows: &[SweepRow], input_fwhm_ps: f64) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(SWEEP_COLUMNS)?;
    for row in rows {
        let mut rec = vec![float(row.value)];
        match &row.outcome {
            Some(o) => rec.extend(outcome_fields(o, input_fwhm_ps)),
            None => rec.extend(std::iter::repeat(String::new()).take(SWEEP_COLUMNS.len() - 2)),
        }
        rec.push(row.error.clone().unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Single-row variant of the sweep table.
pub fn write_outcome(path: &Path, outcome: &Outcome, input_fwhm_ps: f64) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(&SWEEP_COLUMNS[1..SWEEP_COLUMNS.len() - 1])?;
    w.write_record(outcome_fields(outcome, input_fwhm_ps))?;
    w.flush()?;
    Ok(())
}

/// Band structure and transfer spectrum of a uniform grating of `length`.
pub fn write_dispersion(path: &Path, kappa: f64, length: f64, deltas: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["delta", "re_q", "im_q", "transmission", "reflection", "phase_t"])?;
    for &d in deltas {
        let q = bloch_wavenumber(kappa, d);
        let (t, r) = linear_transfer(kappa, d, length)?;
        w.write_record([d, q.re, q.im, t.norm_sqr(), r.norm_sqr(), t.arg()].map(float))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads back one numeric column of a CSV written by this module.
pub fn read_column(path: &Path, column: &str) -> Result<Vec<Option<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    let idx = r
        .headers()?
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::invalid("column", format!("no column `{column}` in {}", path.display())))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let cell = rec.get(idx).unwrap_or("");
        out.push(if cell.is_empty() {
            None
        } else {
            Some(cell.parse().map_err(|_| {
                Error::invalid("column", format!("`{cell}` in `{column}` is not a number"))
            })?)
        });
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct Sidecar<'a> {
    pub program: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub parameters: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_variable: Option<SweepVariable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_values: Option<&'a [f64]>,
    pub files: Vec<String>,
    pub notes: Vec<String>,
}

impl<'a> Sidecar<'a> {
    pub fn new(command: &'a str, parameters: &'a RunConfig) -> Self {
        Sidecar {
            program: "fbgsq",
            version: VERSION,
            command,
            parameters,
            sweep_variable: None,
            sweep_values: None,
            files: Vec::new(),
            notes: vec![ALPHA_SIGN_NOTE.to_string()],
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir)?;
            }
        }
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

/// Gnuplot script for a sweep table: squeezing on the left axis,
/// transmittance on the right.
pub fn sweep_plot_script(csv_name: &str, variable: SweepVariable) -> String {
    let xlabel = match variable {
        SweepVariable::InputIntensity => "input peak intensity (GW/cm^2)",
        SweepVariable::GratingLength => "grating length (cm)",
        SweepVariable::LoPhase => "local oscillator phase (rad)",
        SweepVariable::ApodizationSlope => "apodization slope (cm^-2)",
    };
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel '{xlabel}'\n\
         set ylabel 'noise relative to shot noise (dB)'\n\
         set y2label 'transmittance'\n\
         set ytics nomirror\n\
         set y2tics\n\
         set grid\n\
         set terminal pngcairo size 900,600\n\
         set output '{stem}.png'\n\
         plot '{csv_name}' using 'value':'ratio_db' with linespoints title 'measured', \\\n\
         \x20    '' using 'value':'optimal_db' with linespoints title 'optimal phase', \\\n\
         \x20    '' using 'value':'transmittance' axes x1y2 with lines title 'transmittance'\n",
        stem = csv_name.trim_end_matches(".csv"),
    )
}

/// Gnuplot script for the observables of a forward run.
pub fn observables_plot_script(csv_name: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel 't (ps)'\n\
         set ylabel 'fraction of input energy'\n\
         set y2label 'peak |u_a|^2 (GW/cm^2)'\n\
         set ytics nomirror\n\
         set y2tics\n\
         set grid\n\
         set terminal pngcairo size 900,600\n\
         set output '{stem}.png'\n\
         plot '{csv_name}' using 't_ps':'transmitted_fraction' with lines title 'transmitted', \\\n\
         \x20    '' using 't_ps':'grating_fraction' with lines title 'forward energy in grating', \\\n\
         \x20    '' using 't_ps':'peak_a' axes x1y2 with lines title 'peak'\n",
        stem = csv_name.trim_end_matches(".csv"),
    )
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn output_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
