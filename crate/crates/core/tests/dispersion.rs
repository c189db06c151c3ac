use num_complex::Complex64;
use proptest::prelude::*;

use fbgsq::dispersion::{band_structure, bloch_wavenumber, linear_transfer};

type M2 = [[Complex64; 2]; 2];

fn mul(a: &M2, b: &M2) -> M2 {
    let mut c = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

/// exp(M) by scaling and squaring of a 30-term Taylor series.
fn expm(m: &M2) -> M2 {
    let norm = m.iter().flatten().map(|x| x.norm()).sum::<f64>();
    let squarings = (norm.max(1.0).log2().ceil() as i32 + 4).max(0);
    let scale = 0.5f64.powi(squarings);
    let a = m.map(|row| row.map(|x| x * scale));
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut term: M2 = [[one, zero], [zero, one]];
    let mut sum = term;
    for k in 1..30 {
        term = mul(&term, &a).map(|row| row.map(|x| x / k as f64));
        for i in 0..2 {
            for j in 0..2 {
                sum[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        sum = mul(&sum, &sum);
    }
    sum
}

/// t and r from the propagator of d/dz (A, B) = [[iδ, iκ], [−iκ, −iδ]](A, B)
/// with A(0) = 1 and B(L) = 0.
fn transfer_by_expm(kappa: f64, delta: f64, length: f64) -> (Complex64, Complex64) {
    let i = Complex64::i();
    let m: M2 = [[i * delta * length, i * kappa * length], [-i * kappa * length, -i * delta * length]];
    let p = expm(&m);
    let b0 = -p[1][0] / p[1][1];
    let t = p[0][0] + p[0][1] * b0;
    (t, b0)
}

#[test]
fn transfer_matches_matrix_exponential() {
    for &(kappa, delta, length) in &[
        (10.0, 15.0, 1.0),
        (10.0, 15.0, 3.7),
        (10.0, 10.5, 2.0),
        (10.0, 9.0, 0.8),
        (10.0, 0.0, 0.3),
        (4.0, -6.0, 2.5),
        (0.5, 0.1, 5.0),
    ] {
        let (t, r) = linear_transfer(kappa, delta, length).unwrap();
        let (te, re) = transfer_by_expm(kappa, delta, length);
        assert!((t - te).norm() < 1e-10 * te.norm().max(1e-3), "t at {kappa} {delta} {length}: {t} vs {te}");
        assert!((r - re).norm() < 1e-10, "r at {kappa} {delta} {length}: {r} vs {re}");
    }
}

#[test]
fn bloch_wavenumber_matches_propagator_trace() {
    // Over one length the propagator has eigenvalues exp(±i q L).
    for &(kappa, delta) in &[(10.0, 15.0), (10.0, 11.0), (10.0, -20.0), (3.0, 1.0)] {
        let length = 0.37;
        let i = Complex64::i();
        let m: M2 = [[i * delta * length, i * kappa * length], [-i * kappa * length, -i * delta * length]];
        let p = expm(&m);
        let q = bloch_wavenumber(kappa, delta);
        let expected = 2.0 * (q * length).cos();
        assert!((p[0][0] + p[1][1] - expected).norm() < 1e-12);
    }
}

#[test]
fn band_gap_has_imaginary_wavenumber() {
    let deltas: Vec<f64> = (-30..=30).map(|k| k as f64).collect();
    for p in band_structure(10.0, &deltas).unwrap() {
        if p.delta.abs() < 10.0 {
            assert_eq!(p.q.re, 0.0);
            assert!(p.q.im > 0.0);
        } else {
            assert_eq!(p.q.im, 0.0);
            assert!(p.q.re * p.delta >= 0.0);
        }
        assert!((p.q * p.q - (p.delta * p.delta - 100.0)).norm() < 1e-9);
    }
}

proptest! {
    #[test]
    fn transfer_conserves_power(kappa in 0.0f64..20.0, delta in -40.0f64..40.0, length in 0.0f64..80.0) {
        let (t, r) = linear_transfer(kappa, delta, length).unwrap();
        prop_assert!(t.norm().is_finite() && r.norm().is_finite());
        prop_assert!((t.norm_sqr() + r.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn transfer_is_even_in_detuning_magnitude(kappa in 0.0f64..20.0, delta in 0.0f64..40.0, length in 0.0f64..20.0) {
        let (tp, _) = linear_transfer(kappa, delta, length).unwrap();
        let (tm, _) = linear_transfer(kappa, -delta, length).unwrap();
        prop_assert!((tp.norm_sqr() - tm.norm_sqr()).abs() < 1e-10);
    }
}
