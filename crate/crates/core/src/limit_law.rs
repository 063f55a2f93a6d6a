//! Rayleigh law, the stationary Gaussian process `W` with covariance
//! `cos(x1 - x2) / 2`, the periodized cosine process `S_n`, and
//! Kolmogorov-Smirnov distances.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{DeconvError, Result};
use crate::estimator::SampleSet;
use crate::models::{ErrorModel, SignalModel};
use crate::rng::{rng_from_seed, SimRng};
use crate::sup_stat::refined_max_abs_periodic;

/// Grid size on `[0, 2 pi)` for suprema of the cosine process.
pub const COSINE_GRID_POINTS: usize = 2048;

pub fn rayleigh_pdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * (-0.5 * x * x).exp()
    }
}

pub fn rayleigh_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -(-0.5 * x * x).exp_m1()
    }
}

/// `sqrt(-2 ln(1 - p))` for `p in [0, 1)`.
pub fn rayleigh_quantile(p: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p) {
        return Err(DeconvError::Domain(format!(
            "rayleigh quantile needs p in [0, 1), got {p}"
        )));
    }
    Ok((-2.0 * (-p).ln_1p()).sqrt())
}

pub const RAYLEIGH_MEAN: f64 = 1.253_314_137_315_500_3; // sqrt(pi / 2)

/// CDF of `(sqrt(2)/2) V` with `V` standard Rayleigh: `1 - exp(-x^2)`.
pub fn sup_w_cdf(x: f64) -> f64 {
    rayleigh_cdf(x * std::f64::consts::SQRT_2)
}

/// A path of a process on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessSample {
    pub grid: Vec<f64>,
    pub path: Vec<f64>,
}

impl ProcessSample {
    pub fn sup_abs(&self) -> f64 {
        self.path.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `k 2 pi / m` for `k < m`.
pub fn periodic_grid(m: usize) -> Vec<f64> {
    (0..m).map(|k| 2.0 * PI * k as f64 / m as f64).collect()
}

pub fn w_covariance(grid: &[f64]) -> DMatrix<f64> {
    let m = grid.len();
    DMatrix::from_fn(m, m, |i, j| 0.5 * (grid[i] - grid[j]).cos())
}

/// Samples `W` on a fixed grid through the symmetric square root of its
/// covariance matrix. The matrix has rank two, so negative rounding-level
/// eigenvalues are clamped to zero.
#[derive(Debug, Clone)]
pub struct WProcessSampler {
    grid: Vec<f64>,
    root: DMatrix<f64>,
}

impl WProcessSampler {
    pub fn new(grid: &[f64]) -> Result<Self> {
        if grid.is_empty() {
            return Err(DeconvError::InvalidInput("process grid is empty".into()));
        }
        if grid.iter().any(|x| !(0.0..=2.0 * PI).contains(x)) {
            return Err(DeconvError::InvalidInput(
                "process grid must lie in [0, 2 pi]".into(),
            ));
        }
        let eig = SymmetricEigen::new(w_covariance(grid));
        let sqrt_vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let q = &eig.eigenvectors;
        let root = q * DMatrix::from_diagonal(&sqrt_vals) * q.transpose();
        Ok(WProcessSampler {
            grid: grid.to_vec(),
            root,
        })
    }

    pub fn root(&self) -> &DMatrix<f64> {
        &self.root
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ProcessSample {
        let m = self.grid.len();
        let z = DVector::from_fn(m, |_, _| StandardNormal.sample(rng));
        let path = &self.root * z;
        ProcessSample {
            grid: self.grid.clone(),
            path: path.iter().copied().collect(),
        }
    }
}

pub fn sample_w_process(grid: &[f64], seed: u64) -> Result<ProcessSample> {
    let sampler = WProcessSampler::new(grid)?;
    Ok(sampler.sample(&mut rng_from_seed(seed)))
}

/// `sup |W|` from the two normals of the representation
/// `W(x) = (sqrt(2)/2)(N1 cos x + N2 sin x)`.
pub fn sup_abs_w_from_normals(n1: f64, n2: f64) -> f64 {
    FRAC_1_SQRT_2 * n1.hypot(n2)
}

pub fn sup_abs_w_exact<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let n1: f64 = StandardNormal.sample(rng);
    let n2: f64 = StandardNormal.sample(rng);
    sup_abs_w_from_normals(n1, n2)
}

pub fn sup_abs_w_exact_sample(seed: u64) -> f64 {
    sup_abs_w_exact(&mut rng_from_seed(seed))
}

/// `sup_{y in [0, 2 pi]} |n^{-1/2} sum_j (cos(Y_j - y) - E cos(Y_j - y))|`
/// with `Y_j = (X_j / h) mod 2 pi`, where `E exp(i Y_j) = phi_g(1/h)` is given.
pub fn cosine_process_sup_centered(
    samples: &SampleSet,
    h: f64,
    mean_cis: Complex64,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(DeconvError::InvalidInput(format!(
            "bandwidth must be positive, got {h}"
        )));
    }
    let two_pi = 2.0 * PI;
    let (mut sc, mut ss) = (0.0, 0.0);
    for &x in samples.values() {
        let y = (x / h).rem_euclid(two_pi);
        let (s, c) = y.sin_cos();
        sc += c;
        ss += s;
    }
    let n = samples.len() as f64;
    // sum_j cos(Y_j - y) = cos(y) sum cos Y_j + sin(y) sum sin Y_j
    let a = (sc - n * mean_cis.re) / n.sqrt();
    let b = (ss - n * mean_cis.im) / n.sqrt();
    let grid = periodic_grid(COSINE_GRID_POINTS);
    let path: Vec<f64> = grid
        .iter()
        .map(|&y| {
            let (s, c) = y.sin_cos();
            a * c + b * s
        })
        .collect();
    Ok(refined_max_abs_periodic(&grid, &path).0)
}

/// `S_n` with the exact centering from `phi_g = phi_f phi_k`.
pub fn cosine_process_sup(
    samples: &SampleSet,
    h: f64,
    signal: &SignalModel,
    error: &ErrorModel,
) -> Result<f64> {
    let t = 1.0 / h;
    let phi_g = signal.phi_f(t) * error.ln_phi_k(t).exp();
    cosine_process_sup_centered(samples, h, phi_g)
}

fn sorted_finite(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(DeconvError::InvalidInput(
            "KS needs at least one value".into(),
        ));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(DeconvError::InvalidInput("KS input contains NaN".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// `sup_x |F_emp(x) - cdf(x)|`, evaluated on both sides of every jump.
pub fn ks_one_sample<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> Result<f64> {
    let v = sorted_finite(values)?;
    let m = v.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[i] {
            j += 1;
        }
        let f = cdf(v[i]);
        d = d
            .max((f - i as f64 / m).abs())
            .max(((j + 1) as f64 / m - f).abs());
        i = j + 1;
    }
    Ok(d)
}

/// Two-sample statistic `sup_x |F_a(x) - F_b(x)|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    let a = sorted_finite(a)?;
    let b = sorted_finite(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsSummary {
    pub n_draws: usize,
    pub ks: f64,
    pub pass: bool,
    pub threshold: f64,
}

impl KsSummary {
    pub fn new(n_draws: usize, ks: f64, threshold: f64) -> Self {
        KsSummary {
            n_draws,
            ks,
            pass: ks <= threshold,
            threshold,
        }
    }
}

/// Draw `count` independent suprema of the exact representation.
pub fn exact_sup_draws(rng: &mut SimRng, count: usize) -> Vec<f64> {
    (0..count).map(|_| sup_abs_w_exact(rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{Panel, Rule};

    #[test]
    fn rayleigh_basics() {
        assert_eq!(rayleigh_cdf(0.0), 0.0);
        assert_eq!(rayleigh_cdf(-1.0), 0.0);
        assert!((rayleigh_cdf((2.0 * 2f64.ln()).sqrt()) - 0.5).abs() < 1e-15);
        assert_eq!(rayleigh_quantile(0.0).unwrap(), 0.0);
        assert!((rayleigh_quantile(0.95).unwrap() - 2.447_747).abs() < 1e-6);
        assert!((rayleigh_quantile(0.5).unwrap() - 1.177_410).abs() < 1e-6);
        assert!(rayleigh_quantile(1.0).is_err());
        assert!(rayleigh_quantile(-0.1).is_err());
    }

    #[test]
    fn rayleigh_mean_by_quadrature() {
        let p = Panel::new(0.0, 40.0, 40_000, Rule::Simpson).unwrap();
        let mean = p.integrate(|x| x * rayleigh_pdf(x));
        assert!((mean - RAYLEIGH_MEAN).abs() < 1e-10);
        assert!((RAYLEIGH_MEAN - (PI / 2.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for k in 1..100 {
            let p = k as f64 / 100.0;
            assert!((rayleigh_cdf(rayleigh_quantile(p).unwrap()) - p).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_representation() {
        assert_eq!(sup_abs_w_from_normals(0.0, 0.0), 0.0);
        assert!((sup_abs_w_from_normals(1.0, 0.0) - 0.707_106_781_186_547_5).abs() < 1e-15);
        let mut rng = rng_from_seed(11);
        let draws = exact_sup_draws(&mut rng, 1_000_000);
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((mean - PI.sqrt() / 2.0).abs() < 0.002, "{mean}");
    }

    #[test]
    fn covariance_rank_two() {
        for m in [8, 64, 100] {
            let grid = periodic_grid(m);
            let eig = SymmetricEigen::new(w_covariance(&grid));
            let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            vals.sort_by(|a, b| b.total_cmp(a));
            assert!(
                vals[2].abs() <= 1e-10 * vals[0],
                "m = {m}: {:?}",
                &vals[..3]
            );
        }
    }

    #[test]
    fn root_reproduces_covariance() {
        let grid = periodic_grid(64);
        let s = WProcessSampler::new(&grid).unwrap();
        let back = s.root() * s.root().transpose();
        let cov = w_covariance(&grid);
        assert!((back - cov).abs().max() < 1e-12);
        // variance 1/2 everywhere, Cov(W(0), W(pi)) = -1/2
        let c = w_covariance(&[0.0, PI]);
        assert_eq!(c[(0, 0)], 0.5);
        assert!((c[(0, 1)] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn empirical_covariance() {
        let grid = periodic_grid(64);
        let s = WProcessSampler::new(&grid).unwrap();
        let mut rng = rng_from_seed(5);
        let paths: Vec<ProcessSample> = (0..100_000).map(|_| s.sample(&mut rng)).collect();
        let pairs = [
            (0, 0),
            (0, 32),
            (3, 17),
            (5, 60),
            (10, 11),
            (20, 44),
            (1, 63),
            (7, 7),
            (30, 2),
            (50, 25),
        ];
        for (i, j) in pairs {
            let cov = paths.iter().map(|p| p.path[i] * p.path[j]).sum::<f64>() / paths.len() as f64;
            let expect = 0.5 * (grid[i] - grid[j]).cos();
            assert!((cov - expect).abs() < 0.01, "({i},{j}): {cov} vs {expect}");
        }
    }

    #[test]
    fn seeded_path_reproducible() {
        let grid = periodic_grid(16);
        assert_eq!(
            sample_w_process(&grid, 3).unwrap(),
            sample_w_process(&grid, 3).unwrap()
        );
        assert!(sample_w_process(&[], 3).is_err());
    }

    #[test]
    fn cosine_process_single_observation() {
        let one = SampleSet::new(vec![0.0]).unwrap();
        let s = cosine_process_sup_centered(&one, 0.1, Complex64::new(0.0, 0.0)).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_process_lattice_cancels() {
        let n = 2048;
        let h = 0.1;
        let xs: Vec<f64> = (0..n)
            .map(|k| h * 2.0 * PI * (k as f64 + 0.5) / n as f64)
            .collect();
        let s = SampleSet::new(xs).unwrap();
        let v = cosine_process_sup_centered(&s, h, Complex64::new(0.0, 0.0)).unwrap();
        assert!(v <= 0.05, "{v}");
    }

    #[test]
    fn ks_stairstep() {
        let m = 40;
        let values: Vec<f64> = (1..=m)
            .map(|i| rayleigh_quantile((i as f64 - 0.5) / m as f64).unwrap())
            .collect();
        let d = ks_one_sample(&values, rayleigh_cdf).unwrap();
        assert!((d - 0.5 / m as f64).abs() < 1e-12);
        let median = rayleigh_quantile(0.5).unwrap();
        assert!((ks_one_sample(&[median], rayleigh_cdf).unwrap() - 0.5).abs() < 1e-12);
        assert!(ks_one_sample(&[], rayleigh_cdf).is_err());
    }

    #[test]
    fn ks_detects_wrong_law() {
        let mut rng = rng_from_seed(9);
        let draws: Vec<f64> = (0..20_000).map(|_| sup_abs_w_exact(&mut rng)).collect();
        // these are (sqrt2/2) V, not V
        assert!(ks_one_sample(&draws, rayleigh_cdf).unwrap() > 0.2);
        assert!(ks_one_sample(&draws, sup_w_cdf).unwrap() < 0.02);
    }

    #[test]
    fn ks_two_sample_basics() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_two_sample(&a, &a).unwrap(), 0.0);
        assert_eq!(ks_two_sample(&a, &[10.0, 11.0]).unwrap(), 1.0);
        assert!((ks_two_sample(&[1.0, 3.0], &[2.0, 4.0]).unwrap() - 0.5).abs() < 1e-15);
    }
}
