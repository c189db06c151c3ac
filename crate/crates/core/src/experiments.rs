//! Parameter record, window layout, single-run pipeline and sweeps.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{sech_pulse, sech_width, FieldState, ProjectionFunction};
use crate::grid::{make_grid, SimGrid, DEFAULT_GROUP_VELOCITY};
use crate::measurement::{pulse_metrics, to_db, MeasurementKind, QuadratureGram};
use crate::profile::GratingProfile;
use crate::solver::{
    gate_first_pulse, run_forward_until, Control, ForwardRun, Gate, GateOptions, ObservableRow,
    SolverConfig, Splitting, DEFAULT_GATE_PROMINENCE, DEFAULT_GATE_THRESHOLD,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GratingParams {
    /// cm⁻¹
    pub kappa0: f64,
    /// cm⁻¹
    pub delta: f64,
    /// cm/GW
    pub gamma: f64,
    /// cm; the grating occupies [0, length].
    pub length: f64,
    /// cm⁻²; κ(z) = κ0 + α·z.
    pub alpha: f64,
}

impl Default for GratingParams {
    fn default() -> Self {
        GratingParams {
            kappa0: 10.0,
            delta: 15.0,
            gamma: 0.018,
            length: 50.0,
            alpha: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseParams {
    pub fwhm_ps: f64,
    /// GW/cm²
    pub peak_intensity: f64,
    /// Spatial carrier of the launched envelope in cm⁻¹. `None` uses δ,
    /// i.e. the pulse sits at the frequency the detuning refers to.
    pub carrier_detune: Option<f64>,
}

impl Default for PulseParams {
    fn default() -> Self {
        PulseParams {
            fwhm_ps: 60.0,
            peak_intensity: 4.5,
            carrier_detune: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridParams {
    /// cm
    pub dz: f64,
    /// cm/ps
    pub v_g: f64,
    /// Free fiber before the grating in cm; `None` uses 24 sech widths.
    pub pad_left: Option<f64>,
    /// Free fiber after the grating in cm.
    pub pad_right: f64,
    pub splitting: Splitting,
    /// `None` uses ⌈√n_steps⌉.
    pub checkpoint_stride: Option<usize>,
    /// Hard limit on simulated time; `None` leaves room for a pulse moving
    /// through the grating at a quarter of v_g.
    pub max_time_ps: Option<f64>,
    /// Fixed simulated time, disabling the automatic stop.
    pub total_time_ps: Option<f64>,
    /// Relative growth of the transmitted energy over the flatness window
    /// below which the output is considered settled.
    pub stop_tolerance: f64,
    /// Extra run time after settling, as a fraction of the elapsed time.
    pub stop_margin: f64,
    pub record_every: usize,
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams {
            dz: 0.01,
            v_g: DEFAULT_GROUP_VELOCITY,
            pad_left: None,
            pad_right: 50.0,
            splitting: Splitting::Lie,
            checkpoint_stride: None,
            max_time_ps: None,
            total_time_ps: None,
            stop_tolerance: 1e-3,
            stop_margin: 0.1,
            record_every: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasurementParams {
    pub kind: MeasurementKind,
    /// rad
    pub lo_phase: f64,
    /// Detect only the leading transmitted pulse (true) or all u_a beyond
    /// the grating (false).
    pub gated: bool,
    pub gate_threshold: f64,
    pub gate_prominence: f64,
}

impl Default for MeasurementParams {
    fn default() -> Self {
        MeasurementParams {
            kind: MeasurementKind::PhotonNumber,
            lo_phase: 0.0,
            gated: true,
            gate_threshold: DEFAULT_GATE_THRESHOLD,
            gate_prominence: DEFAULT_GATE_PROMINENCE,
        }
    }
}

/// Complete parameter record of one squeezing calculation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub grating: GratingParams,
    pub pulse: PulseParams,
    pub grid: GridParams,
    pub measurement: MeasurementParams,
}

fn check(key: &str, v: f64, ok: bool, range: &str) -> Result<()> {
    if v.is_finite() && ok {
        Ok(())
    } else {
        Err(Error::invalid(key, format!("{v} is outside {range}")))
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let g = &self.grating;
        check("kappa0", g.kappa0, g.kappa0 >= 0.0, "[0, inf)")?;
        check("delta", g.delta, true, "finite values")?;
        check("gamma", g.gamma, g.gamma >= 0.0, "[0, inf)")?;
        check("length", g.length, g.length > 0.0, "(0, inf)")?;
        check("alpha", g.alpha, true, "finite values")?;
        self.profile()?;
        let p = &self.pulse;
        check("fwhm_ps", p.fwhm_ps, p.fwhm_ps > 0.0, "(0, inf)")?;
        check(
            "peak_intensity",
            p.peak_intensity,
            p.peak_intensity > 0.0,
            "(0, inf)",
        )?;
        if let Some(c) = p.carrier_detune {
            check("carrier_detune", c, true, "finite values")?;
        }
        let d = &self.grid;
        check("dz", d.dz, d.dz > 0.0 && d.dz <= 0.1 * self.pulse_width(), "(0, w/10] for sech width w")?;
        check("v_g", d.v_g, d.v_g > 0.0, "(0, inf)")?;
        if let Some(pl) = d.pad_left {
            check("pad_left", pl, pl >= 20.0 * self.pulse_width(), "[20 sech widths, inf)")?;
        }
        check("pad_right", d.pad_right, d.pad_right > 0.0, "(0, inf)")?;
        if d.checkpoint_stride == Some(0) {
            return Err(Error::invalid("checkpoint_stride", "must be positive"));
        }
        for (key, t) in [("max_time_ps", d.max_time_ps), ("total_time_ps", d.total_time_ps)] {
            if let Some(t) = t {
                check(key, t, t > 0.0, "(0, inf)")?;
            }
        }
        check(
            "stop_tolerance",
            d.stop_tolerance,
            d.stop_tolerance > 0.0 && d.stop_tolerance < 1.0,
            "(0, 1)",
        )?;
        check(
            "stop_margin",
            d.stop_margin,
            (0.0..=10.0).contains(&d.stop_margin),
            "[0, 10]",
        )?;
        if d.record_every == 0 {
            return Err(Error::invalid("record_every", "must be positive"));
        }
        let m = &self.measurement;
        check("lo_phase", m.lo_phase, true, "finite values")?;
        check(
            "gate_threshold",
            m.gate_threshold,
            m.gate_threshold > 0.0 && m.gate_threshold < 1.0,
            "(0, 1)",
        )?;
        check(
            "gate_prominence",
            m.gate_prominence,
            (0.0..1.0).contains(&m.gate_prominence),
            "[0, 1)",
        )?;
        Ok(())
    }

    pub fn profile(&self) -> Result<GratingProfile> {
        let g = &self.grating;
        GratingProfile::new(g.kappa0, g.alpha, g.delta, g.gamma, 0.0, g.length)
    }

    pub fn carrier(&self) -> f64 {
        self.pulse.carrier_detune.unwrap_or(self.grating.delta)
    }

    /// Sech width of the input pulse in cm.
    pub fn pulse_width(&self) -> f64 {
        sech_width(self.grid.v_g * self.pulse.fwhm_ps)
    }

    pub fn pad_left(&self) -> f64 {
        self.grid.pad_left.unwrap_or(24.0 * self.pulse_width())
    }

    pub fn max_time(&self) -> f64 {
        let d = &self.grid;
        d.max_time_ps.unwrap_or(
            (self.pad_left() + 4.0 * self.grating.length + d.pad_right) / d.v_g,
        )
    }

    /// Window grid with room for `max_time` (or the fixed total time).
    pub fn sim_grid(&self) -> Result<SimGrid> {
        let d = &self.grid;
        let z_min = -self.pad_left();
        let span = self.pad_left() + self.grating.length + d.pad_right;
        let n_points = (span / d.dz).round() as usize + 1;
        let z_max = z_min + (n_points - 1) as f64 * d.dz;
        let t = d.total_time_ps.unwrap_or_else(|| self.max_time());
        make_grid(z_min, z_max, n_points, d.v_g, t)
    }

    /// Solver configuration and launched pulse, centred in the left pad.
    pub fn build(&self) -> Result<(SolverConfig, FieldState)> {
        self.validate()?;
        let grid = self.sim_grid()?;
        let profile = self.profile()?;
        let initial = sech_pulse(
            &grid,
            -0.5 * self.pad_left(),
            self.pulse.fwhm_ps,
            self.pulse.peak_intensity,
            self.carrier(),
        )?;
        let mut config = SolverConfig::new(grid, profile)
            .with_splitting(self.grid.splitting)
            .with_record_every(self.grid.record_every);
        if let Some(s) = self.grid.checkpoint_stride {
            config = config.with_stride(s);
        }
        Ok((config, initial))
    }

    pub fn gate_options(&self) -> GateOptions {
        GateOptions {
            threshold: self.measurement.gate_threshold,
            prominence: self.measurement.gate_prominence,
        }
    }
}

/// Stops once little forward field remains in the grating and the
/// transmitted energy has settled, after a relative margin.
#[derive(Debug, Clone)]
pub struct FluxStop {
    tolerance: f64,
    margin: f64,
    window: usize,
    /// The pulse counts as cleared once the forward energy in the grating
    /// drops below this share of its largest observed value.
    cleared: f64,
    grating_max: f64,
    /// Observations before this step never settle.
    earliest: usize,
    seen: Vec<f64>,
    settled_at: Option<usize>,
}

impl FluxStop {
    /// `window_records` observations must show growth below `tolerance`.
    pub fn new(tolerance: f64, margin: f64, window_records: usize) -> Self {
        FluxStop {
            tolerance,
            margin,
            window: window_records.max(1),
            cleared: 0.2,
            grating_max: 0.0,
            earliest: 0,
            seen: Vec::new(),
            settled_at: None,
        }
    }

    /// Ignores settling before `step` (the pulse has not reached the grating).
    pub fn with_earliest(mut self, step: usize) -> Self {
        self.earliest = step;
        self
    }

    /// Step at which the output was first found settled.
    pub fn settled_at(&self) -> Option<usize> {
        self.settled_at
    }

    pub fn observe(&mut self, row: &ObservableRow) -> Control {
        self.seen.push(row.transmitted_fraction);
        self.grating_max = self.grating_max.max(row.grating_fraction);
        if let Some(s) = self.settled_at {
            let end = (s as f64 * (1.0 + self.margin)).ceil() as usize;
            return if row.step >= end {
                Control::Stop
            } else {
                Control::Continue
            };
        }
        let k = self.seen.len();
        if k <= self.window || row.step < self.earliest {
            return Control::Continue;
        }
        let now = self.seen[k - 1];
        let before = self.seen[k - 1 - self.window];
        if row.grating_fraction < self.cleared * self.grating_max && now - before <= self.tolerance * now.max(1e-3) {
            self.settled_at = Some(row.step);
            if self.margin == 0.0 {
                return Control::Stop;
            }
        }
        Control::Continue
    }
}

/// Forward run with the automatic stop (or the fixed total time).
pub fn simulate(scenario: &Scenario) -> Result<ForwardRun> {
    let (config, initial) = scenario.build()?;
    let run = if scenario.grid.total_time_ps.is_some() {
        run_forward_until(&config, &initial, |_| Control::Continue)?
    } else {
        let record_ps = config.grid.dt * config.record_observables_every as f64;
        let window = (4.0 * scenario.pulse.fwhm_ps / record_ps).ceil() as usize;
        // The whole pulse has reached the grating by then.
        let arrival = (0.5 * scenario.pad_left() + 12.0 * scenario.pulse_width()) / config.grid.v_g;
        let mut stop = FluxStop::new(scenario.grid.stop_tolerance, scenario.grid.stop_margin, window)
            .with_earliest((arrival / config.grid.dt).ceil() as usize);
        run_forward_until(&config, &initial, |row| stop.observe(row))?
    };
    Ok(run)
}

/// Hamiltonian drift relative to v_g·|carrier|·N_in.
///
/// With the carrier inside the envelope the detuning and drift terms nearly
/// cancel and H(0) is close to zero, so it cannot serve as the scale; the
/// detuning term alone is gauge independent. Falls back to |H(0)| when the
/// carrier is zero.
pub fn hamiltonian_drift(scenario: &Scenario, run: &ForwardRun) -> f64 {
    let rows = &run.observables;
    let Some(first) = rows.rows.first() else {
        return 0.0;
    };
    let scale = run.history.grid.v_g * scenario.carrier().abs() * first.norm;
    if scale > 0.0 {
        rows.max_drift_over(|r| r.hamiltonian, scale)
    } else {
        rows.max_relative_drift(|r| r.hamiltonian)
    }
}

/// Detection gate on the final snapshot.
pub fn select_gate(scenario: &Scenario, run: &ForwardRun) -> Result<Gate> {
    let grid = &run.history.grid;
    let profile = &run.history.profile;
    let gate = if scenario.measurement.gated {
        gate_first_pulse(
            &run.final_state,
            profile,
            grid,
            scenario.pulse.peak_intensity,
            scenario.gate_options(),
        )?
    } else {
        Gate::whole_output(grid, profile)?
    };
    let edge = run.final_state.u_a[grid.n_points - 1].norm_sqr();
    let peak = run.final_state.u_a[gate.lo..=gate.hi]
        .iter()
        .map(|u| u.norm_sqr())
        .fold(0.0, f64::max);
    if edge > scenario.measurement.gate_threshold * peak {
        return Err(Error::invalid(
            "pad_right",
            format!("detected pulse is clipped at z_max ({edge:e} vs peak {peak:e}); enlarge pad_right"),
        ));
    }
    Ok(gate)
}

/// Result of one full forward and backward pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    /// Phase of the configured measurement (0 for photon counting).
    pub lo_phase: f64,
    pub ratio: f64,
    pub ratio_db: f64,
    /// Least variance over LO phases for the same projection shape.
    pub optimal_ratio: f64,
    pub optimal_db: f64,
    pub optimal_phase: f64,
    pub transmittance: f64,
    pub gate_lo_cm: f64,
    pub gate_hi_cm: f64,
    pub fwhm_ps: Option<f64>,
    pub peak_gw_cm2: f64,
    pub t_final_ps: f64,
    pub n_steps: usize,
    pub norm_drift: f64,
    /// Fraction of the input energy that left through z_max before the end.
    pub escaped_right: f64,
}

/// Forward run, gate, and the quadrature covariance of the gated pulse.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub run: ForwardRun,
    pub gate: Gate,
    pub quadratures: QuadratureGram,
    /// Detected projection at θ = 0.
    pub detected: ProjectionFunction,
    /// Back-propagated θ = 0 and θ = π/2 projections.
    pub backpropagated: [ProjectionFunction; 2],
}

impl Evaluation {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        let run = simulate(scenario)?;
        let gate = select_gate(scenario, &run)?;
        let (quadratures, detected, backpropagated) =
            QuadratureGram::compute_with_functions(&run.history, &run.final_state, &gate)?;
        Ok(Evaluation {
            run,
            gate,
            quadratures,
            detected,
            backpropagated,
        })
    }

    /// f_T and F_T at phase θ. The linearized map is real-linear, so the
    /// back-propagated function is cos θ·F(0) + sin θ·F(π/2).
    pub fn projections(&self, theta: f64) -> (ProjectionFunction, ProjectionFunction) {
        let (s, c) = theta.sin_cos();
        let f_t = self.detected.scaled(Complex64::from_polar(1.0, theta));
        let [b0, b1] = &self.backpropagated;
        let mut back = b0.scaled(Complex64::new(c, 0.0));
        for i in 0..back.len() {
            back.f_a[i] += b1.f_a[i] * s;
            back.f_b[i] += b1.f_b[i] * s;
        }
        (f_t, back)
    }

    pub fn outcome(&self, lo_phase: f64) -> Result<Outcome> {
        let ratio = self.quadratures.ratio_at(lo_phase);
        let (optimal_phase, optimal_ratio) = self.quadratures.optimum();
        let grid = &self.run.history.grid;
        let (fwhm_ps, peak) = pulse_metrics(&self.run.final_state, grid, self.gate.lo, self.gate.hi);
        Ok(Outcome {
            lo_phase,
            ratio,
            ratio_db: to_db(ratio),
            optimal_ratio,
            optimal_db: to_db(optimal_ratio),
            optimal_phase,
            transmittance: self.run.transmittance()?,
            gate_lo_cm: self.gate.z_lo,
            gate_hi_cm: self.gate.z_hi,
            fwhm_ps,
            peak_gw_cm2: peak,
            t_final_ps: self.run.final_state.t,
            n_steps: grid.n_steps,
            norm_drift: self.run.observables.max_relative_drift(|r| r.norm),
            escaped_right: self.run.escaped.energy_right
                / self.run.history.initial().norm(grid.dz),
        })
    }
}

fn measured_phase(scenario: &Scenario) -> f64 {
    match scenario.measurement.kind {
        MeasurementKind::PhotonNumber => 0.0,
        MeasurementKind::Homodyne => scenario.measurement.lo_phase,
    }
}

/// The complete pipeline for one parameter record.
pub fn run_scenario(scenario: &Scenario) -> Result<Outcome> {
    Evaluation::new(scenario)?.outcome(measured_phase(scenario))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    InputIntensity,
    GratingLength,
    LoPhase,
    ApodizationSlope,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::InputIntensity => "input_intensity",
            SweepVariable::GratingLength => "grating_length",
            SweepVariable::LoPhase => "lo_phase",
            SweepVariable::ApodizationSlope => "apodization_slope",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            SweepVariable::InputIntensity,
            SweepVariable::GratingLength,
            SweepVariable::LoPhase,
            SweepVariable::ApodizationSlope,
        ]
        .into_iter()
        .find(|v| v.name() == s)
    }

    /// Sweep grid used for the corresponding figure.
    pub fn default_values(self) -> Vec<f64> {
        let range = |lo: f64, step: f64, n: usize| -> Vec<f64> {
            (0..n).map(|k| lo + step * k as f64).collect()
        };
        match self {
            SweepVariable::InputIntensity => range(3.0, 0.1, 41),
            SweepVariable::GratingLength => range(10.0, 5.0, 19),
            SweepVariable::LoPhase => range(0.0, std::f64::consts::PI / 64.0, 64),
            SweepVariable::ApodizationSlope => vec![-0.08, -0.04, 0.0, 0.04, 0.08],
        }
    }

    /// Output file stem for the figure this sweep reproduces.
    pub fn figure(self) -> &'static str {
        match self {
            SweepVariable::InputIntensity => "fig3",
            SweepVariable::GratingLength => "fig5",
            SweepVariable::LoPhase => "fig4",
            SweepVariable::ApodizationSlope => "fig7",
        }
    }

    pub fn apply(self, scenario: &mut Scenario, value: f64) {
        match self {
            SweepVariable::InputIntensity => scenario.pulse.peak_intensity = value,
            SweepVariable::GratingLength => scenario.grating.length = value,
            SweepVariable::LoPhase => {
                scenario.measurement.kind = MeasurementKind::Homodyne;
                scenario.measurement.lo_phase = value;
            }
            SweepVariable::ApodizationSlope => scenario.grating.alpha = value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub fixed: Scenario,
}

impl SweepSpec {
    pub fn new(variable: SweepVariable, fixed: Scenario) -> Self {
        SweepSpec {
            variable,
            values: variable.default_values(),
            fixed,
        }
    }

    pub fn scenario_for(&self, value: f64) -> Scenario {
        let mut s = self.fixed;
        self.variable.apply(&mut s, value);
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::invalid("values", "sweep needs at least one value"));
        }
        if let Some(v) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid("values", format!("non-finite value {v}")));
        }
        for &v in &self.values {
            self.scenario_for(v).validate()?;
        }
        Ok(())
    }
}

/// One sweep row; failures are kept in the row and the sweep continues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub outcome: Option<Outcome>,
    pub error: Option<String>,
}

impl SweepRow {
    fn from_result(value: f64, r: Result<Outcome>) -> Self {
        match r {
            Ok(o) => SweepRow {
                value,
                outcome: Some(o),
                error: None,
            },
            Err(e) => SweepRow {
                value,
                outcome: None,
                error: Some(e.to_string()),
            },
        }
    }
}

/// Runs the pipeline for every value, in parallel on the current rayon
/// pool; rows come back in input order.
///
/// A phase sweep shares one forward run and one pair of back-propagations,
/// since every phase is a linear combination of the same two quadratures.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    if spec.variable == SweepVariable::LoPhase {
        let scenario = spec.scenario_for(spec.values[0]);
        return Ok(match Evaluation::new(&scenario) {
            Ok(eval) => spec
                .values
                .iter()
                .map(|&v| SweepRow::from_result(v, eval.outcome(v)))
                .collect(),
            Err(e) => spec
                .values
                .iter()
                .map(|&v| SweepRow {
                    value: v,
                    outcome: None,
                    error: Some(e.to_string()),
                })
                .collect(),
        });
    }
    Ok(spec
        .values
        .par_iter()
        .map(|&v| SweepRow::from_result(v, run_scenario(&spec.scenario_for(v))))
        .collect())
}

/// Which ratio column an analysis uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioColumn {
    Measured,
    Optimal,
}

impl RatioColumn {
    pub fn of(self, o: &Outcome) -> f64 {
        match self {
            RatioColumn::Measured => o.ratio,
            RatioColumn::Optimal => o.optimal_ratio,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentPair {
    pub transmittance_max_at: f64,
    pub ratio_min_at: f64,
    /// ratio_min_at − transmittance_max_at, in sweep-variable units.
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Alignment {
    NoExtrema,
    Pairs(Vec<AlignmentPair>),
}

/// Strict interior local maxima of `y`.
pub fn local_maxima(y: &[f64]) -> Vec<usize> {
    (1..y.len().saturating_sub(1))
        .filter(|&i| y[i] > y[i - 1] && y[i] > y[i + 1])
        .collect()
}

pub fn local_minima(y: &[f64]) -> Vec<usize> {
    let neg: Vec<f64> = y.iter().map(|v| -v).collect();
    local_maxima(&neg)
}

/// Pairs each transmittance maximum with the nearest ratio minimum.
pub fn alignment_report(values: &[f64], transmittance: &[f64], ratio: &[f64]) -> Result<Alignment> {
    if values.len() != transmittance.len() || values.len() != ratio.len() {
        return Err(Error::invalid("table", "columns differ in length"));
    }
    if values.len() < 7 {
        return Err(Error::invalid(
            "table",
            format!("need at least 7 rows, got {}", values.len()),
        ));
    }
    let t_max = local_maxima(transmittance);
    let r_min = local_minima(ratio);
    if t_max.is_empty() || r_min.is_empty() {
        return Ok(Alignment::NoExtrema);
    }
    let pairs = t_max
        .iter()
        .map(|&i| {
            let j = *r_min
                .iter()
                .min_by(|&&a, &&b| {
                    (values[a] - values[i])
                        .abs()
                        .total_cmp(&(values[b] - values[i]).abs())
                })
                .expect("non-empty");
            AlignmentPair {
                transmittance_max_at: values[i],
                ratio_min_at: values[j],
                offset: values[j] - values[i],
            }
        })
        .collect();
    Ok(Alignment::Pairs(pairs))
}

/// Alignment over the successful rows of a sweep table.
pub fn alignment_of_rows(rows: &[SweepRow], column: RatioColumn) -> Result<Alignment> {
    let ok: Vec<(f64, &Outcome)> = rows
        .iter()
        .filter_map(|r| r.outcome.as_ref().map(|o| (r.value, o)))
        .collect();
    let values: Vec<f64> = ok.iter().map(|p| p.0).collect();
    let t: Vec<f64> = ok.iter().map(|p| p.1.transmittance).collect();
    let r: Vec<f64> = ok.iter().map(|p| column.of(p.1)).collect();
    alignment_report(&values, &t, &r)
}
