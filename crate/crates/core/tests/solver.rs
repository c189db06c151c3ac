use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fbgsq::field::sech_pulse;
use fbgsq::{make_grid, FieldState, GratingProfile};
use fbgsq::solver::{
    gate_first_pulse, run_forward, run_forward_until, step_ncme, transmittance, Control, GateOptions, Propagator,
    SolverConfig, Splitting,
};
use fbgsq::Error;

fn random_state(n: usize, seed: u64, amp: f64) -> FieldState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = FieldState::zeros(n);
    for i in 0..n {
        s.u_a[i] = Complex64::new(rng.gen_range(-amp..amp), rng.gen_range(-amp..amp));
        s.u_b[i] = Complex64::new(rng.gen_range(-amp..amp), rng.gen_range(-amp..amp));
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn free_fiber_is_an_exact_shift(delta in -20.0f64..20.0, steps in 1usize..40, seed in 0u64..1000) {
        let grid = make_grid(0.0, 1.27, 128, 0.02, steps as f64 * 0.01 / 0.02).unwrap();
        let profile = GratingProfile::uniform(0.0, delta, 0.0, 0.5).unwrap();
        let mut s = random_state(grid.n_points, seed, 1.0);
        let s0 = s.clone();
        let prop = Propagator::new(grid, profile, Splitting::Lie).unwrap();
        for _ in 0..grid.n_steps {
            prop.step(&mut s);
        }
        let phase = Complex64::from_polar(1.0, delta * grid.dz * grid.n_steps as f64);
        let n = grid.n_points;
        let k = grid.n_steps;
        for i in 0..n - k {
            prop_assert!((s.u_a[i + k] - s0.u_a[i] * phase).norm() < 1e-12);
            prop_assert!((s.u_b[i] - s0.u_b[i + k] * phase).norm() < 1e-12);
        }
        for i in 0..k {
            prop_assert_eq!(s.u_a[i], Complex64::new(0.0, 0.0));
            prop_assert_eq!(s.u_b[n - 1 - i], Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn norm_plus_outflow_is_conserved(
        kappa in 0.0f64..20.0,
        alpha in -0.1f64..0.1,
        delta in -20.0f64..20.0,
        gamma in 0.0f64..0.5,
        strang in any::<bool>(),
        seed in 0u64..1000,
    ) {
        let grid = make_grid(-1.0, 2.0, 301, 0.02, 40.0).unwrap();
        let profile = GratingProfile::new(kappa + 0.2, alpha, delta, gamma, 0.0, 1.0).unwrap();
        let splitting = if strang { Splitting::Strang } else { Splitting::Lie };
        let config = SolverConfig::new(grid, profile).with_splitting(splitting).with_record_every(7);
        let run = run_forward(&config, &random_state(grid.n_points, seed, 3.0)).unwrap();
        prop_assert!(run.observables.max_relative_drift(|r| r.norm) < 1e-12);
    }
}

#[test]
fn replayed_segments_reproduce_checkpoints() {
    let grid = make_grid(-6.0, 10.0, 1601, 0.02, 120.0).unwrap();
    let profile = GratingProfile::uniform(10.0, 15.0, 0.018, 4.0).unwrap();
    let initial = sech_pulse(&grid, -2.0, 30.0, 4.5, 15.0).unwrap();
    for splitting in [Splitting::Lie, Splitting::Strang] {
        let config = SolverConfig::new(grid, profile).with_splitting(splitting).with_stride(37);
        let run = run_forward(&config, &initial).unwrap();
        run.history.validate().unwrap();
        let prop = run.history.propagator().unwrap();
        for k in 0..run.history.checkpoints.len() - 1 {
            let states = run.history.replay_segment(&prop, k).unwrap();
            assert_eq!(states.len(), run.history.checkpoints[k + 1].0 - run.history.checkpoints[k].0);
        }
        assert_eq!(run.history.final_state(), &run.final_state);
    }
}

#[test]
fn single_step_wrapper_matches_propagator() {
    let grid = make_grid(-2.0, 3.0, 501, 0.02, 1.0).unwrap();
    let profile = GratingProfile::uniform(10.0, 15.0, 0.5, 1.0).unwrap();
    let s = random_state(grid.n_points, 3, 2.0);
    let next = step_ncme(&s, &profile, &grid).unwrap();
    let mut manual = s.clone();
    Propagator::new(grid, profile, Splitting::Lie).unwrap().step(&mut manual);
    assert_eq!(next, manual);
    assert!((next.t - grid.dt).abs() < 1e-15);
}

#[test]
fn divergent_input_is_reported() {
    let grid = make_grid(-2.0, 3.0, 501, 0.02, 1.0).unwrap();
    let profile = GratingProfile::uniform(10.0, 15.0, 0.5, 1.0).unwrap();
    let mut s = FieldState::zeros(grid.n_points);
    s.u_a[10] = Complex64::new(f64::NAN, 0.0);
    let config = SolverConfig::new(grid, profile);
    assert!(matches!(run_forward(&config, &s), Err(Error::Divergence { step: 0 })));
    let bad = FieldState::zeros(7);
    assert!(matches!(run_forward(&config, &bad), Err(Error::GridMismatch(_))));
}

#[test]
fn stop_rule_truncates_history() {
    let grid = make_grid(-6.0, 10.0, 801, 0.02, 600.0).unwrap();
    let profile = GratingProfile::uniform(10.0, 15.0, 0.018, 4.0).unwrap();
    let initial = sech_pulse(&grid, -2.0, 30.0, 4.5, 15.0).unwrap();
    let config = SolverConfig::new(grid, profile).with_record_every(10).with_stride(25);
    let run = run_forward_until(&config, &initial, |row| {
        if row.step >= 100 {
            Control::Stop
        } else {
            Control::Continue
        }
    })
    .unwrap();
    assert_eq!(run.history.n_steps(), 100);
    run.history.validate().unwrap();
    assert_eq!(run.observables.rows.last().unwrap().step, 100);
    assert!((run.final_state.t - 100.0 * grid.dt).abs() < 1e-9);
}

#[test]
fn linear_grating_outside_the_gap_transmits() {
    // A long pulse far above the band edge passes with |t|² close to one,
    // and the transmitted and reflected parts sum to the input.
    let grid = make_grid(-40.0, 60.0, 5001, 0.02, 50.0 / 0.02).unwrap();
    let profile = GratingProfile::uniform(2.0, 15.0, 0.0, 5.0).unwrap();
    let initial = sech_pulse(&grid, -20.0, 150.0, 1.0, 15.0).unwrap();
    let config = SolverConfig::new(grid, profile);
    let run = run_forward(&config, &initial).unwrap();
    let t = run.transmittance().unwrap();
    let e_in = initial.norm(grid.dz);
    let left: f64 = (0..grid.index_at_or_below(0.0)).map(|i| run.final_state.u_b[i].norm_sqr()).sum::<f64>() * grid.dz
        + run.escaped.energy_left;
    assert!(t > 0.97, "transmittance {t}");
    assert!((t + left / e_in - 1.0).abs() < 1e-6, "t {t} r {}", left / e_in);
}

#[test]
fn gate_selects_the_leading_pulse() {
    let grid = make_grid(-5.0, 20.0, 2501, 0.01, 1.0).unwrap();
    let profile = GratingProfile::uniform(10.0, 15.0, 0.018, 2.0).unwrap();
    let lead = sech_pulse(&grid, 15.0, 20.0, 2.0, 0.0).unwrap();
    let trail = sech_pulse(&grid, 8.0, 20.0, 3.0, 0.0).unwrap();
    let mut s = FieldState::zeros(grid.n_points);
    for i in 0..grid.n_points {
        s.u_a[i] = lead.u_a[i] + trail.u_a[i];
    }
    let gate = gate_first_pulse(&s, &profile, &grid, 4.5, GateOptions::default()).unwrap();
    assert!(gate.z_lo > 11.0 && gate.z_lo < 15.0, "{gate:?}");
    assert!(gate.z_hi > 15.0 && gate.z_hi < 19.0, "{gate:?}");
    let empty = FieldState::zeros(grid.n_points);
    assert!(matches!(
        gate_first_pulse(&empty, &profile, &grid, 4.5, GateOptions::default()),
        Err(Error::NoTransmittedPulse { .. })
    ));
}

#[test]
fn transmittance_counts_escaped_forward_energy() {
    let grid = make_grid(-5.0, 20.0, 2501, 0.01, 1.0).unwrap();
    let profile = GratingProfile::uniform(10.0, 15.0, 0.018, 2.0).unwrap();
    let initial = sech_pulse(&grid, -2.0, 20.0, 2.0, 0.0).unwrap();
    let moved = sech_pulse(&grid, 10.0, 20.0, 2.0, 0.0).unwrap();
    let e = initial.norm(grid.dz);
    let t = transmittance(&moved, &initial, &profile, &grid, 0.0).unwrap();
    assert!((t - 1.0).abs() < 1e-12);
    let t = transmittance(&FieldState::zeros(grid.n_points), &initial, &profile, &grid, 0.25 * e).unwrap();
    assert!((t - 0.25).abs() < 1e-12);
}
