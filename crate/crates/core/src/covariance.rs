//! Brute-force second-moment propagation of the linearized fluctuations.
//!
//! The state is the real covariance over (Re u_a, Im u_a, Re u_b, Im u_b) at
//! every grid point, plus four port coordinates holding the samples that
//! enter and leave through the window edges during transport. Each substep
//! is written out here as an explicit real 4×4 block (or permutation),
//! independently of the adjoint code, so the two can check each other.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adjoint::backpropagate_many;
use crate::error::{Error, Result};
use crate::field::{sech_pulse, FieldState, ProjectionFunction};
use crate::grid::{make_grid, DEFAULT_GROUP_VELOCITY};
use crate::measurement::{build_projection, MeasurementSpec};
use crate::profile::GratingProfile;
use crate::solver::{run_forward, FieldHistory, Propagator, SolverConfig, Splitting, Substep};

/// Largest grid the oracle accepts.
pub const MAX_ORACLE_POINTS: usize = 512;

/// Dense covariance of the window quadratures.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureCovariance {
    pub n_points: usize,
    pub dz: f64,
    /// Row-major (4·n_points)².
    pub data: Vec<f64>,
}

impl QuadratureCovariance {
    /// Coherent-state (vacuum) fluctuations: I/(4·dz).
    pub fn vacuum(n_points: usize, dz: f64) -> Self {
        let dim = 4 * n_points;
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 0.25 / dz;
        }
        QuadratureCovariance { n_points, dz, data }
    }

    pub fn dim(&self) -> usize {
        4 * self.n_points
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim() + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    /// Largest |C_ij − C_ji| relative to the largest diagonal entry.
    pub fn asymmetry(&self) -> f64 {
        let d = self.dim();
        let scale = (0..d).map(|i| self.get(i, i).abs()).fold(0.0, f64::max);
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i + 1..d {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            worst
        }
    }

    /// True if C + tol·trace·I admits a Cholesky factorization.
    pub fn is_positive_semidefinite(&self, tol: f64) -> bool {
        let d = self.dim();
        let shift = tol * self.trace().abs();
        let mut l = vec![0.0; d * d];
        for j in 0..d {
            let mut diag = self.get(j, j) + shift;
            for k in 0..j {
                diag -= l[j * d + k] * l[j * d + k];
            }
            if !(diag > 0.0) {
                return false;
            }
            let ljj = diag.sqrt();
            l[j * d + j] = ljj;
            for i in j + 1..d {
                let mut v = 0.5 * (self.get(i, j) + self.get(j, i));
                for k in 0..j {
                    v -= l[i * d + k] * l[j * d + k];
                }
                l[i * d + j] = v / ljj;
            }
        }
        true
    }
}

/// Real 4×4 block acting on (Re a, Im a, Re b, Im b) at one point.
type Block = [[f64; 4]; 4];

fn apply_block(m: &Block, x: [f64; 4]) -> [f64; 4] {
    let mut y = [0.0; 4];
    for (r, row) in m.iter().enumerate() {
        y[r] = row[0] * x[0] + row[1] * x[1] + row[2] * x[2] + row[3] * x[3];
    }
    y
}

/// exp(i·s·[[δ, κ], [κ, δ]]) as a real block.
fn linear_block(delta: f64, kappa: f64, s: f64) -> Block {
    let (sp, cp) = (delta * s).sin_cos();
    let (sk, ck) = (kappa * s).sin_cos();
    // a' = e^{iφ}(cos·a + i·sin·b), b' likewise; complex factors as 2×2 real blocks.
    let rot = |re: f64, im: f64| -> [[f64; 2]; 2] { [[re, -im], [im, re]] };
    let p = rot(cp, sp);
    let own = rot(ck, 0.0);
    let cross = rot(0.0, sk);
    let mul = |x: [[f64; 2]; 2], y: [[f64; 2]; 2]| -> [[f64; 2]; 2] {
        [
            [x[0][0] * y[0][0] + x[0][1] * y[1][0], x[0][0] * y[0][1] + x[0][1] * y[1][1]],
            [x[1][0] * y[0][0] + x[1][1] * y[1][0], x[1][0] * y[0][1] + x[1][1] * y[1][1]],
        ]
    };
    let d = mul(p, own);
    let o = mul(p, cross);
    [
        [d[0][0], d[0][1], o[0][0], o[0][1]],
        [d[1][0], d[1][1], o[1][0], o[1][1]],
        [o[0][0], o[0][1], d[0][0], d[0][1]],
        [o[1][0], o[1][1], d[1][0], d[1][1]],
    ]
}

/// Jacobian of a ← a·e^{ig(|a|²+2|b|²)}, b ← b·e^{ig(|b|²+2|a|²)} at (a0, b0).
fn kerr_block(g: f64, a0: Complex64, b0: Complex64) -> Block {
    let (ia, ib) = (a0.norm_sqr(), b0.norm_sqr());
    let (sa, ca) = (g * (ia + 2.0 * ib)).sin_cos();
    let (sb, cb) = (g * (ib + 2.0 * ia)).sin_cos();
    // Output a' = e^{iφa}·a0; ∂a'/∂x = e^{iφa}·∂a/∂x + i·a'·∂φa/∂x.
    let ao = a0 * Complex64::new(ca, sa);
    let bo = b0 * Complex64::new(cb, sb);
    // Gradients of the phases with respect to (Re a, Im a, Re b, Im b).
    let dpa = [2.0 * g * a0.re, 2.0 * g * a0.im, 4.0 * g * b0.re, 4.0 * g * b0.im];
    let dpb = [4.0 * g * a0.re, 4.0 * g * a0.im, 2.0 * g * b0.re, 2.0 * g * b0.im];
    let mut m = [[0.0; 4]; 4];
    // Rotation part.
    m[0][0] = ca;
    m[0][1] = -sa;
    m[1][0] = sa;
    m[1][1] = ca;
    m[2][2] = cb;
    m[2][3] = -sb;
    m[3][2] = sb;
    m[3][3] = cb;
    // i·a'·dφ: real part −Im a'·dφ, imaginary part Re a'·dφ.
    for k in 0..4 {
        m[0][k] += -ao.im * dpa[k];
        m[1][k] += ao.re * dpa[k];
        m[2][k] += -bo.im * dpb[k];
        m[3][k] += bo.re * dpb[k];
    }
    m
}

/// Real one-step map of the linearized scheme around one classical step,
/// acting on vectors of length 4·n + 4 (window, then ports).
///
/// Port layout: on input (Re, Im) of the u_a sample entering at z_min and of
/// the u_b sample entering at z_max; on output the u_a sample that left at
/// z_max and the u_b sample that left at z_min.
#[derive(Debug, Clone)]
pub struct RealStepMap {
    n: usize,
    /// One entry per substep: None for transport, else per-point blocks.
    factors: Vec<Option<Vec<Block>>>,
}

impl RealStepMap {
    /// Builds the map for the step starting at `classical`.
    pub fn new(prop: &Propagator, classical: &FieldState) -> Self {
        let grid = prop.grid;
        let profile = prop.profile;
        let n = grid.n_points;
        let kappa = profile.kappa_samples(&grid);
        let gamma = profile.gamma_samples(&grid);
        let mut a = classical.u_a.clone();
        let mut b = classical.u_b.clone();
        let mut factors = Vec::new();
        for &sub in prop.substeps() {
            let f = match sub {
                Substep::Transport => None,
                Substep::Linear(frac) => {
                    let s = frac.value() * grid.dz;
                    Some((0..n).map(|i| linear_block(profile.delta, kappa[i], s)).collect())
                }
                Substep::Kerr(frac) => {
                    let h = frac.value() * grid.dz;
                    Some((0..n).map(|i| kerr_block(gamma[i] * h, a[i], b[i])).collect())
                }
            };
            factors.push(f);
            prop.apply_substep(sub, &mut a, &mut b);
        }
        RealStepMap { n, factors }
    }

    pub fn dim(&self) -> usize {
        4 * self.n + 4
    }

    /// Applies the map in place to one vector.
    pub fn apply(&self, v: &mut [f64]) {
        let n = self.n;
        for f in &self.factors {
            match f {
                None => {
                    let w = 4 * n;
                    let (a_in, b_in) = ([v[w], v[w + 1]], [v[w + 2], v[w + 3]]);
                    let a_out = [v[4 * (n - 1)], v[4 * (n - 1) + 1]];
                    let b_out = [v[2], v[3]];
                    for i in (1..n).rev() {
                        v[4 * i] = v[4 * (i - 1)];
                        v[4 * i + 1] = v[4 * (i - 1) + 1];
                    }
                    v[0] = a_in[0];
                    v[1] = a_in[1];
                    for i in 0..n - 1 {
                        v[4 * i + 2] = v[4 * (i + 1) + 2];
                        v[4 * i + 3] = v[4 * (i + 1) + 3];
                    }
                    v[4 * (n - 1) + 2] = b_in[0];
                    v[4 * (n - 1) + 3] = b_in[1];
                    v[w] = a_out[0];
                    v[w + 1] = a_out[1];
                    v[w + 2] = b_out[0];
                    v[w + 3] = b_out[1];
                }
                Some(blocks) => {
                    for (i, m) in blocks.iter().enumerate() {
                        let x = [v[4 * i], v[4 * i + 1], v[4 * i + 2], v[4 * i + 3]];
                        let y = apply_block(m, x);
                        v[4 * i..4 * i + 4].copy_from_slice(&y);
                    }
                }
            }
        }
    }

    /// Dense matrix of the map, row-major.
    pub fn matrix(&self) -> Vec<f64> {
        let d = self.dim();
        let mut m = vec![0.0; d * d];
        let mut col = vec![0.0; d];
        for j in 0..d {
            col.iter_mut().for_each(|x| *x = 0.0);
            col[j] = 1.0;
            self.apply(&mut col);
            for i in 0..d {
                m[i * d + j] = col[i];
            }
        }
        m
    }
}

/// max |S·Ω·Sᵀ − Ω| for a row-major square map on (Re, Im) pairs.
pub fn symplectic_defect(s: &[f64], dim: usize) -> f64 {
    // (S·Ω)_{ik} = Σ_j S_ij Ω_jk with Ω pairwise [[0, 1], [−1, 0]].
    let mut so = vec![0.0; dim * dim];
    for i in 0..dim {
        for p in 0..dim / 2 {
            let (x, y) = (2 * p, 2 * p + 1);
            so[i * dim + y] = s[i * dim + x];
            so[i * dim + x] = -s[i * dim + y];
        }
    }
    let mut worst: f64 = 0.0;
    for i in 0..dim {
        for k in 0..dim {
            let mut v = 0.0;
            for j in 0..dim {
                v += so[i * dim + j] * s[k * dim + j];
            }
            let omega = if i / 2 == k / 2 && i != k {
                if i % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            } else {
                0.0
            };
            worst = worst.max((v - omega).abs());
        }
    }
    worst
}

/// Propagates the vacuum covariance along the stored classical run,
/// injecting vacuum at the inflow cells each step.
pub fn forward_covariance(history: &FieldHistory) -> Result<QuadratureCovariance> {
    history.validate()?;
    let grid = history.grid;
    let n = grid.n_points;
    if n > MAX_ORACLE_POINTS {
        return Err(Error::SizeGuard(format!(
            "covariance oracle is limited to {MAX_ORACLE_POINTS} points, grid has {n}"
        )));
    }
    let prop = history.propagator()?;
    let d = 4 * n + 4;
    let vac = 0.25 / grid.dz;
    let mut c = vec![0.0; d * d];
    for i in 0..4 * n {
        c[i * d + i] = vac;
    }
    let mut col = vec![0.0; d];
    for seg in 0..history.checkpoints.len() - 1 {
        for classical in history.replay_segment(&prop, seg)? {
            let map = RealStepMap::new(&prop, &classical);
            // Fresh vacuum on the input ports.
            for p in 4 * n..d {
                for j in 0..d {
                    c[p * d + j] = 0.0;
                    c[j * d + p] = 0.0;
                }
                c[p * d + p] = vac;
            }
            // C ← S·C·Sᵀ: map the columns, then the rows.
            for pass in 0..2 {
                for j in 0..d {
                    for i in 0..d {
                        col[i] = c[i * d + j];
                    }
                    map.apply(&mut col);
                    for i in 0..d {
                        c[i * d + j] = col[i];
                    }
                }
                if pass == 0 {
                    transpose_in_place(&mut c, d);
                }
            }
        }
    }
    let w = 4 * n;
    let mut data = vec![0.0; w * w];
    for i in 0..w {
        data[i * w..(i + 1) * w].copy_from_slice(&c[i * d..i * d + w]);
    }
    Ok(QuadratureCovariance {
        n_points: n,
        dz: grid.dz,
        data,
    })
}

fn transpose_in_place(m: &mut [f64], d: usize) {
    for i in 0..d {
        for j in i + 1..d {
            m.swap(i * d + j, j * d + i);
        }
    }
}

/// Variance of ⟨f|û⟩ under covariance C: dz²·fᵀ·C·f.
pub fn oracle_variance(c: &QuadratureCovariance, f: &ProjectionFunction) -> Result<f64> {
    if f.len() != c.n_points || f.f_b.len() != c.n_points {
        return Err(Error::GridMismatch(format!(
            "projection has {} samples, covariance {} points",
            f.len(),
            c.n_points
        )));
    }
    let x = stack(f);
    let d = c.dim();
    let mut acc = 0.0;
    for i in 0..d {
        if x[i] == 0.0 {
            continue;
        }
        let row = &c.data[i * d..(i + 1) * d];
        acc += x[i] * row.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>();
    }
    Ok(acc * f.dz * f.dz)
}

fn stack(f: &ProjectionFunction) -> Vec<f64> {
    let mut x = Vec::with_capacity(4 * f.len());
    for (a, b) in f.f_a.iter().zip(&f.f_b) {
        x.extend_from_slice(&[a.re, a.im, b.re, b.im]);
    }
    x
}

/// Size and seed of the adjoint-versus-oracle comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    pub points: usize,
    pub steps: usize,
    pub projections: usize,
    pub seed: u64,
    pub splitting: Splitting,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            points: 64,
            steps: 500,
            projections: 10,
            seed: 7,
            splitting: Splitting::Lie,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub points: usize,
    pub steps: usize,
    /// Relative variance error per random projection.
    pub random_errors: Vec<f64>,
    pub photon_number_error: f64,
    pub max_relative_error: f64,
    /// Photon-number variance from both methods (¼ is shot noise).
    pub photon_number_variance: (f64, f64),
    /// Worst symplectic defect of the one-step map over the sampled steps.
    pub symplectic_defect: f64,
}

/// Oracle test instance: a short intense pulse at gap centre on a coarse grid,
/// inside a grating that fills most of the window. It is trapped for a while,
/// reshapes strongly and leaks out through both edges.
pub fn oracle_instance(points: usize, steps: usize, splitting: Splitting) -> Result<(SolverConfig, FieldState)> {
    if points < 32 {
        return Err(Error::invalid("points", "oracle instance needs at least 32 points"));
    }
    let dz = 0.1;
    let z_min = -0.5 * dz * (points - 1) as f64;
    let z_max = z_min + dz * (points - 1) as f64;
    let v = DEFAULT_GROUP_VELOCITY;
    let grid = make_grid(z_min, z_max, points, v, steps as f64 * dz / v)?;
    let grid = grid.with_steps(steps);
    let profile = GratingProfile::new(10.0, 0.0, 15.0, 0.018, z_min + 4.0 * dz, z_max - 4.0 * dz)?;
    let fwhm_ps = 0.3 / v;
    let initial = sech_pulse(&grid, 0.5 * (z_min + z_max), fwhm_ps, 300.0, 0.0)?;
    let config = SolverConfig::new(grid, profile).with_splitting(splitting);
    Ok((config, initial))
}

/// Runs the oracle instance and compares adjoint variances against the
/// forward covariance for random projections and the photon-number one.
pub fn validate_oracle(opts: &OracleOptions) -> Result<OracleReport> {
    if opts.points > MAX_ORACLE_POINTS {
        return Err(Error::SizeGuard(format!(
            "points must be at most {MAX_ORACLE_POINTS}, got {}",
            opts.points
        )));
    }
    let (config, initial) = oracle_instance(opts.points, opts.steps, opts.splitting)?;
    let run = run_forward(&config, &initial)?;
    let history = &run.history;
    let grid = history.grid;
    let n = grid.n_points;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut fs = Vec::with_capacity(opts.projections + 1);
    for _ in 0..opts.projections {
        let mut f = ProjectionFunction::zeros(n, grid.dz);
        for i in 0..n {
            f.f_a[i] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            f.f_b[i] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        fs.push(f.normalized()?);
    }
    let spec = MeasurementSpec::photon_number((grid.z_min, grid.z_max));
    fs.push(build_projection(&run.final_state, &spec, &grid)?);

    let gram = backpropagate_many(&fs, history)?.gram();
    let cov = forward_covariance(history)?;
    let mut errors = Vec::with_capacity(fs.len());
    let mut pn = (0.0, 0.0);
    for (k, f) in fs.iter().enumerate() {
        let adjoint = 0.25 * gram[k][k];
        let oracle = oracle_variance(&cov, f)?;
        errors.push((adjoint - oracle).abs() / oracle.abs());
        if k == fs.len() - 1 {
            pn = (adjoint, oracle);
        }
    }
    let photon_number_error = errors.pop().unwrap_or(0.0);
    let max_relative_error = errors.iter().cloned().fold(photon_number_error, f64::max);

    let prop = history.propagator()?;
    let mut defect: f64 = 0.0;
    let samples = [0, opts.steps / 2, opts.steps.saturating_sub(1)];
    let mut state = initial.clone();
    let mut at = 0;
    for &s in &samples {
        while at < s {
            prop.step(&mut state);
            at += 1;
        }
        let map = RealStepMap::new(&prop, &state);
        defect = defect.max(symplectic_defect(&map.matrix(), map.dim()));
    }

    Ok(OracleReport {
        points: n,
        steps: grid.n_steps,
        random_errors: errors,
        photon_number_error,
        max_relative_error,
        photon_number_variance: pn,
        symplectic_defect: defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn vacuum_variance_is_quarter() {
        let c = QuadratureCovariance::vacuum(8, 0.05);
        let mut f = ProjectionFunction::zeros(8, 0.05);
        f.f_a[2] = Complex64::new(1.0, 2.0);
        f.f_b[5] = Complex64::new(-0.5, 0.3);
        let f = f.normalized().unwrap();
        assert_relative_eq!(oracle_variance(&c, &f).unwrap(), 0.25, epsilon = 1e-14);
        assert!(c.is_positive_semidefinite(1e-12));
        assert_eq!(c.asymmetry(), 0.0);
    }

    #[test]
    fn blocks_are_symplectic() {
        let blocks = [
            linear_block(15.0, 10.0, 0.01),
            linear_block(-3.0, 0.0, 0.7),
            kerr_block(0.018 * 0.01, Complex64::new(20.0, -5.0), Complex64::new(3.0, 8.0)),
        ];
        for m in &blocks {
            let flat: Vec<f64> = m.iter().flat_map(|r| r.iter().cloned()).collect();
            assert!(symplectic_defect(&flat, 4) < 1e-12);
        }
    }

    #[test]
    fn linear_block_matches_complex_formula() {
        let (d, k, s) = (1.3, 0.7, 0.4);
        let a = Complex64::new(0.2, -1.1);
        let b = Complex64::new(0.9, 0.4);
        let ph = Complex64::from_polar(1.0, d * s);
        let i = Complex64::i();
        let ea = ph * ((k * s).cos() * a + i * (k * s).sin() * b);
        let eb = ph * ((k * s).cos() * b + i * (k * s).sin() * a);
        let y = apply_block(&linear_block(d, k, s), [a.re, a.im, b.re, b.im]);
        assert_relative_eq!(y[0], ea.re, epsilon = 1e-14);
        assert_relative_eq!(y[1], ea.im, epsilon = 1e-14);
        assert_relative_eq!(y[2], eb.re, epsilon = 1e-14);
        assert_relative_eq!(y[3], eb.im, epsilon = 1e-14);
    }

    #[test]
    fn kerr_block_matches_finite_difference() {
        let g = 0.05;
        let a0 = Complex64::new(1.2, -0.4);
        let b0 = Complex64::new(0.3, 0.8);
        let f = |x: [f64; 4]| -> [f64; 4] {
            let a = Complex64::new(x[0], x[1]);
            let b = Complex64::new(x[2], x[3]);
            let pa = g * (a.norm_sqr() + 2.0 * b.norm_sqr());
            let pb = g * (b.norm_sqr() + 2.0 * a.norm_sqr());
            let a2 = a * Complex64::from_polar(1.0, pa);
            let b2 = b * Complex64::from_polar(1.0, pb);
            [a2.re, a2.im, b2.re, b2.im]
        };
        let m = kerr_block(g, a0, b0);
        let x0 = [a0.re, a0.im, b0.re, b0.im];
        let h = 1e-6;
        for k in 0..4 {
            let (mut xp, mut xm) = (x0, x0);
            xp[k] += h;
            xm[k] -= h;
            let (yp, ym) = (f(xp), f(xm));
            for r in 0..4 {
                assert_relative_eq!(m[r][k], (yp[r] - ym[r]) / (2.0 * h), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn size_guard() {
        let opts = OracleOptions {
            points: MAX_ORACLE_POINTS + 1,
            ..OracleOptions::default()
        };
        assert!(matches!(validate_oracle(&opts), Err(Error::SizeGuard(_))));
    }
}
