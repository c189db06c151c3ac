use fbgsq::experiments::{
    alignment_of_rows, alignment_report, local_maxima, local_minima, run_scenario, simulate, sweep, Alignment,
    FluxStop, RatioColumn, Scenario, SweepSpec, SweepVariable,
};
use fbgsq::measurement::MeasurementKind;
use fbgsq::solver::{Control, ObservableRow};
use fbgsq::Error;

fn short_grating() -> Scenario {
    let mut s = Scenario::default();
    s.grating.length = 5.0;
    s.grid.dz = 0.05;
    s
}

#[test]
fn sweeps_are_deterministic() {
    let mut spec = SweepSpec::new(SweepVariable::InputIntensity, short_grating());
    spec.values = vec![3.0, 6.0];
    let a = sweep(&spec).unwrap();
    let b = sweep(&spec).unwrap();
    assert_eq!(a, b);
    // Each row equals a standalone run of the same scenario.
    let single = run_scenario(&spec.scenario_for(6.0)).unwrap();
    assert_eq!(a[1].outcome.unwrap(), single);
}

#[test]
fn failing_rows_are_recorded_and_the_sweep_continues() {
    let mut fixed = short_grating();
    // Deep in a wide gap nothing gets through a long grating.
    fixed.grating.delta = 0.0;
    fixed.grating.kappa0 = 40.0;
    let mut spec = SweepSpec::new(SweepVariable::GratingLength, fixed);
    spec.values = vec![0.05, 20.0];
    let rows = sweep(&spec).unwrap();
    assert!(rows[0].outcome.is_some(), "{:?}", rows[0].error);
    assert!(rows[1].outcome.is_none(), "{:?}", rows[1]);
    assert!(rows[1].error.as_deref().unwrap().contains("no transmitted pulse"));
}

#[test]
fn invalid_sweep_values_are_rejected_up_front() {
    let mut spec = SweepSpec::new(SweepVariable::GratingLength, short_grating());
    spec.values = vec![5.0, -1.0];
    assert!(matches!(sweep(&spec), Err(Error::Validation { .. })));
    spec.values.clear();
    assert!(matches!(sweep(&spec), Err(Error::Validation { .. })));
}

#[test]
fn phase_sweep_matches_individual_homodyne_runs() {
    let mut spec = SweepSpec::new(SweepVariable::LoPhase, short_grating());
    spec.values = vec![0.0, 0.4, 1.3];
    let rows = sweep(&spec).unwrap();
    for row in &rows {
        let s = spec.scenario_for(row.value);
        assert_eq!(s.measurement.kind, MeasurementKind::Homodyne);
        let direct = run_scenario(&s).unwrap();
        let shared = row.outcome.unwrap();
        assert!((direct.ratio - shared.ratio).abs() < 1e-12 * direct.ratio);
        assert_eq!(shared.lo_phase, row.value);
    }
}

#[test]
fn automatic_stop_lets_the_pulse_leave_the_grating() {
    let s = short_grating();
    let run = simulate(&s).unwrap();
    let last = run.observables.rows.last().unwrap();
    assert!(last.grating_fraction < 0.05, "{last:?}");
    assert!(run.history.n_steps() < s.sim_grid().unwrap().n_steps);
    let mut fixed = s;
    fixed.grid.total_time_ps = Some(500.0);
    let run = simulate(&fixed).unwrap();
    assert!((run.final_state.t - 500.0).abs() <= run.history.grid.dt);
}

fn row(step: usize, transmitted: f64, grating: f64) -> ObservableRow {
    ObservableRow {
        step,
        t_ps: step as f64,
        norm: 1.0,
        hamiltonian: 0.0,
        peak_a: 1.0,
        transmitted_fraction: transmitted,
        grating_fraction: grating,
    }
}

#[test]
fn flux_stop_waits_for_the_grating_to_clear() {
    let mut stop = FluxStop::new(1e-3, 0.5, 2).with_earliest(10);
    // Flat output while the pulse still sits in the grating.
    for k in 0..20 {
        let g = if k < 5 { k as f64 * 0.2 } else { 1.0 };
        assert_eq!(stop.observe(&row(k * 10, 0.0, g)), Control::Continue);
    }
    assert_eq!(stop.settled_at(), None);
    // Pulse leaves, output grows, then settles.
    let mut t = 0.0;
    let mut step = 200;
    while stop.settled_at().is_none() {
        t = (t + 0.2f64).min(0.7);
        assert_eq!(stop.observe(&row(step, t, 0.05)), Control::Continue);
        step += 10;
        assert!(step < 1000);
    }
    let settled = stop.settled_at().unwrap();
    let end = (settled as f64 * 1.5).ceil() as usize;
    let mut s = settled + 10;
    while s < end {
        assert_eq!(stop.observe(&row(s, 0.7, 0.05)), Control::Continue);
        s += 10;
    }
    assert_eq!(stop.observe(&row(s, 0.7, 0.05)), Control::Stop);
}

#[test]
fn extrema_are_strict_and_interior() {
    let y = [1.0, 2.0, 2.0, 1.0, 3.0, 0.0, 4.0];
    assert_eq!(local_maxima(&y), vec![4]);
    assert_eq!(local_minima(&y), vec![3, 5]);
    assert!(local_maxima(&[1.0, 2.0]).is_empty());
}

#[test]
fn alignment_pairs_nearest_extrema() {
    let x: Vec<f64> = (0..9).map(|k| k as f64).collect();
    let t = [0.1, 0.2, 0.5, 0.3, 0.2, 0.3, 0.6, 0.4, 0.3];
    let r = [1.0, 0.9, 0.8, 0.7, 0.9, 0.8, 0.5, 0.6, 0.9];
    match alignment_report(&x, &t, &r).unwrap() {
        Alignment::Pairs(p) => {
            assert_eq!(p.len(), 2);
            assert_eq!((p[0].transmittance_max_at, p[0].ratio_min_at), (2.0, 3.0));
            assert_eq!(p[0].offset, 1.0);
            assert_eq!((p[1].transmittance_max_at, p[1].ratio_min_at), (6.0, 6.0));
        }
        other => panic!("{other:?}"),
    }
    let flat = [0.5; 9];
    assert_eq!(alignment_report(&x, &flat, &r).unwrap(), Alignment::NoExtrema);
    assert!(alignment_report(&x[..5], &t[..5], &r[..5]).is_err());
    assert!(alignment_report(&x, &t[..8], &r).is_err());
}

#[test]
fn alignment_skips_failed_rows() {
    let mut fixed = short_grating();
    fixed.grating.delta = 0.0;
    fixed.grating.kappa0 = 40.0;
    let mut spec = SweepSpec::new(SweepVariable::GratingLength, fixed);
    spec.values = vec![0.05, 20.0];
    let rows = sweep(&spec).unwrap();
    // One successful row is too few for an alignment analysis.
    assert!(alignment_of_rows(&rows, RatioColumn::Optimal).is_err());
}
