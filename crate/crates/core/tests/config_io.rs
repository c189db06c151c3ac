use proptest::prelude::*;

use fbgsq::config::{load_config, parse_config, parse_with_overrides, RunConfig};
use fbgsq::dispersion::linear_transfer;
use fbgsq::experiments::{Outcome, SweepRow, SweepVariable};
use fbgsq::io::{read_column, write_dispersion, write_sweep, Sidecar, SWEEP_COLUMNS};
use fbgsq::solver::Splitting;
use fbgsq::Error;

fn outcome(ratio: f64, fwhm: Option<f64>) -> Outcome {
    Outcome {
        lo_phase: 0.0,
        ratio,
        ratio_db: 10.0 * ratio.log10(),
        optimal_ratio: 0.5 * ratio,
        optimal_db: 10.0 * (0.5 * ratio).log10(),
        optimal_phase: -0.1,
        transmittance: 0.7,
        gate_lo_cm: 60.0,
        gate_hi_cm: 80.0,
        fwhm_ps: fwhm,
        peak_gw_cm2: 3.3e-7,
        t_final_ps: 9000.0,
        n_steps: 12345,
        norm_drift: 1.5e-15,
        escaped_right: 0.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_survives_a_toml_round_trip(
        kappa0 in 0.0f64..30.0,
        delta in -30.0f64..30.0,
        gamma in 0.0f64..1.0,
        length in 1.0f64..100.0,
        alpha in 0.0f64..0.1,
        fwhm in 60.0f64..200.0,
        intensity in 0.1f64..10.0,
        dz in 0.005f64..0.05,
        strang in any::<bool>(),
        stride in proptest::option::of(1usize..500),
        carrier in proptest::option::of(-20.0f64..20.0),
    ) {
        let mut c = RunConfig::default();
        c.grating.kappa0 = kappa0;
        c.grating.delta = delta;
        c.grating.gamma = gamma;
        c.grating.length = length;
        c.grating.alpha = alpha;
        c.pulse.fwhm_ps = fwhm;
        c.pulse.peak_intensity = intensity;
        c.pulse.carrier_detune = carrier;
        c.grid.dz = dz;
        c.grid.splitting = if strang { Splitting::Strang } else { Splitting::Lie };
        c.grid.checkpoint_stride = stride;
        c.validate().unwrap();
        let back = parse_config(&c.to_toml()).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn sweep_table_floats_read_back_exactly(ratio in 1e-6f64..1e6, fwhm in proptest::option::of(0.1f64..500.0)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let rows = vec![SweepRow { value: 0.25, outcome: Some(outcome(ratio, fwhm)), error: None }];
        write_sweep(&path, &rows, 60.0).unwrap();
        prop_assert_eq!(read_column(&path, "ratio").unwrap(), vec![Some(ratio)]);
        prop_assert_eq!(read_column(&path, "fwhm_ps").unwrap(), vec![fwhm]);
    }
}

#[test]
fn sweep_table_has_fixed_columns_and_keeps_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested").join("fig.csv");
    let rows = vec![
        SweepRow {
            value: 1.0,
            outcome: Some(outcome(0.8, Some(30.0))),
            error: None,
        },
        SweepRow {
            value: 2.0,
            outcome: None,
            error: Some("no transmitted pulse".into()),
        },
    ];
    write_sweep(&path, &rows, 60.0).unwrap();
    let mut reader = csv::Reader::from_path(&path).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, SWEEP_COLUMNS);
    let records: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(&records[0][10], "compressed");
    assert_eq!(&records[1][17], "no transmitted pulse");
    assert_eq!(read_column(&path, "value").unwrap(), vec![Some(1.0), Some(2.0)]);
    assert_eq!(read_column(&path, "ratio").unwrap(), vec![Some(0.8), None]);
    assert_eq!(read_column(&path, "peak_gw_cm2").unwrap()[0], Some(3.3e-7));
    assert!(read_column(&path, "missing").is_err());
}

#[test]
fn dispersion_table_matches_transfer_function() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let deltas = [-20.0, -5.0, 0.0, 10.0, 12.5];
    write_dispersion(&path, 10.0, 3.0, &deltas).unwrap();
    let t = read_column(&path, "transmission").unwrap();
    let r = read_column(&path, "reflection").unwrap();
    for (k, &d) in deltas.iter().enumerate() {
        let (tt, rr) = linear_transfer(10.0, d, 3.0).unwrap();
        assert_eq!(t[k], Some(tt.norm_sqr()));
        assert_eq!(r[k], Some(rr.norm_sqr()));
    }
    let im_q = read_column(&path, "im_q").unwrap();
    assert!(im_q[1].unwrap() > 0.0 && im_q[0] == Some(0.0));
}

#[test]
fn sidecar_records_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig5.json");
    let config = RunConfig::default();
    let values = [10.0, 20.0];
    let mut sidecar = Sidecar::new("sweep", &config);
    sidecar.sweep_variable = Some(SweepVariable::GratingLength);
    sidecar.sweep_values = Some(&values);
    sidecar.files.push("fig5.csv".into());
    sidecar.write(&path).unwrap();
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(json["command"], "sweep");
    assert_eq!(json["sweep_variable"], "grating_length");
    assert_eq!(json["parameters"]["grating"]["kappa0"], 10.0);
    assert_eq!(json["sweep_values"][1], 20.0);
    assert!(json["notes"][0].as_str().unwrap().contains("alpha"));
}

#[test]
fn config_files_load_with_line_numbered_errors() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("run.toml");
    std::fs::write(&good, "[grating]\nlength = 70\nalpha = -0.04\n\n[grid]\nsplitting = \"strang\"\n").unwrap();
    let c = load_config(&good).unwrap();
    assert_eq!(c.grating.length, 70.0);
    assert_eq!(c.grid.splitting, Splitting::Strang);

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[grating]\nlength = 70\n\n[pulse]\nfwhm = 60\n").unwrap();
    match load_config(&bad) {
        Err(Error::Parse { line, message }) => {
            assert_eq!(line, 5);
            assert!(message.contains("fwhm_ps"), "{message}");
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(load_config(&dir.path().join("absent.toml")), Err(Error::Io(_))));
}

#[test]
fn overrides_are_validated_like_file_values() {
    let c = parse_with_overrides("", &["pulse.peak_intensity=5.5".into(), "grid.splitting=strang".into()]).unwrap();
    assert_eq!(c.pulse.peak_intensity, 5.5);
    assert_eq!(c.grid.splitting, Splitting::Strang);
    match parse_with_overrides("", &["grating.length=-3".into()]) {
        Err(Error::Validation { key, .. }) => assert_eq!(key, "length"),
        other => panic!("{other:?}"),
    }
    assert!(parse_with_overrides("", &["grating.lenght=3".into()]).is_err());
    assert!(parse_with_overrides("", &["nonsense".into()]).is_err());
}
