//! Main-term plus remainder decomposition of the estimator.
//!
//! For a cut-off `epsilon`, the estimator splits as
//! `f_nh = main + R1 + R2 + R3`:
//!
//! * `main`: the exponential tail of `1/phi_k` integrated over `[epsilon, 1]`
//!   with every oscillation frozen at `s = 1`, i.e. a multiple of
//!   `(1/n) sum_j cos((X_j - x)/h)`;
//! * `R1`: the same tail integral with `cos(s u) - cos(u)` in place of `cos(u)`;
//! * `R2`: the low-frequency part `|s| < epsilon` with the exact `phi_k`;
//! * `R3`: the deviation of `1/phi_k` from its tail form on `epsilon <= |s| <= 1`,
//!   written through the relative deviation `u`.
//!
//! All sample sums are taken through the empirical characteristic function
//! `(1/n) sum_j exp(i s (X_j - x)/h) = exp(-i s x/h) phi_emp(s/h)`, which
//! exchanges the per-observation integrals with the average over `j`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{DeconvError, Result};
use crate::estimator::{
    deconv_estimate, phi_emp_uniform, EstimateGrid, EstimatorConfig, GridKind, SampleSet,
};
use crate::models::{ErrorLaw, ErrorModel, KernelModel, SignalModel};
use crate::quadrature::{Panel, QuadratureSpec};
use crate::special;
use crate::sup_stat::refined_max_abs;

pub const DEFAULT_EPSILON: f64 = 0.5;
/// `u` is only evaluated for `|y| >= U_EXCLUSION`.
pub const U_EXCLUSION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionConfig {
    pub epsilon: f64,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        DecompositionConfig {
            epsilon: DEFAULT_EPSILON,
            quadrature: QuadratureSpec::default(),
        }
    }
}

impl DecompositionConfig {
    pub fn new(epsilon: f64) -> Result<Self> {
        let c = DecompositionConfig {
            epsilon,
            ..Default::default()
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(DeconvError::InvalidInput(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        self.quadrature.validate()
    }
}

/// `u(y) = C |y|^lambda0 exp(-|y|^lambda / mu) / phi_k(y) - 1` for `|y| >= 0.1`.
pub fn u_function(error: &ErrorModel, y: f64) -> Result<f64> {
    if !(y.abs() >= U_EXCLUSION) {
        return Err(DeconvError::Domain(format!(
            "u is only evaluated for |y| >= {U_EXCLUSION}, got {y}"
        )));
    }
    Ok((error.tail().ln_tail(y) - error.ln_phi_k(y)).exp_m1())
}

/// A characteristic-function-like quantity tabulated at `t = s/h` on the
/// low panel `s in [0, epsilon]` and the high panel `s in [epsilon, 1]`.
#[derive(Debug, Clone)]
struct Spectrum {
    h: f64,
    low: Panel,
    low_c: Vec<Complex64>,
    high: Panel,
    high_c: Vec<Complex64>,
}

impl Spectrum {
    fn panels(h: f64, dcfg: &DecompositionConfig) -> Result<(Panel, Panel)> {
        let q = &dcfg.quadrature;
        Ok((
            q.panel(0.0, dcfg.epsilon, 1.0 / h)?,
            q.panel(dcfg.epsilon, 1.0, 1.0 / h)?,
        ))
    }

    fn empirical(samples: &SampleSet, h: f64, dcfg: &DecompositionConfig) -> Result<Self> {
        let (low, high) = Self::panels(h, dcfg)?;
        let table = |p: &Panel| phi_emp_uniform(samples, p.nodes[0] / h, p.step / h, p.len());
        Ok(Spectrum {
            h,
            low_c: table(&low),
            high_c: table(&high),
            low,
            high,
        })
    }

    /// Same nodes, values `f(t)` instead of the empirical characteristic function.
    fn map(&self, f: impl Fn(f64, Complex64) -> Complex64) -> Spectrum {
        let h = self.h;
        let apply = |p: &Panel, c: &[Complex64]| {
            p.nodes.iter().zip(c).map(|(&s, &v)| f(s / h, v)).collect()
        };
        Spectrum {
            h,
            low_c: apply(&self.low, &self.low_c),
            high_c: apply(&self.high, &self.high_c),
            low: self.low.clone(),
            high: self.high.clone(),
        }
    }

    fn at_one(&self) -> Complex64 {
        *self.high_c.last().expect("nonempty panel")
    }
}

/// `sum_k coef_k Re[exp(-i s_k x / h) c_k]` at every grid point.
fn oscillatory_sum(
    nodes: &[f64],
    coef: &[f64],
    c: &[Complex64],
    h: f64,
    grid_x: &[f64],
) -> Vec<f64> {
    grid_x
        .iter()
        .map(|&x| {
            nodes
                .iter()
                .zip(coef)
                .zip(c)
                .map(|((&s, &w), v)| {
                    let (sin, cos) = (s * x / h).sin_cos();
                    w * (cos * v.re + sin * v.im)
                })
                .sum()
        })
        .collect()
}

/// Quadrature coefficients for the main term and `R1`:
/// `w_k h^{lambda0-1}/(pi C) phi_w(s) s^{-lambda0} exp(s^lambda/(mu h^lambda))`.
fn tail_coefficients(panel: &Panel, error: &ErrorModel, kernel: &KernelModel, h: f64) -> Vec<f64> {
    let t = error.tail();
    let ln_front = (t.lambda0 - 1.0) * h.ln() - (PI * t.c).ln();
    let inv_mu_h = 1.0 / (t.mu * h.powf(t.lambda));
    panel
        .nodes
        .iter()
        .zip(&panel.weights)
        .map(|(&s, &w)| {
            let ln =
                ln_front + kernel.ln_phi_w(s) - t.lambda0 * s.ln() + s.powf(t.lambda) * inv_mu_h;
            if ln == f64::NEG_INFINITY {
                0.0
            } else {
                w * ln.exp()
            }
        })
        .collect()
}

fn low_coefficients(panel: &Panel, error: &ErrorModel, kernel: &KernelModel, h: f64) -> Vec<f64> {
    panel
        .nodes
        .iter()
        .zip(&panel.weights)
        .map(|(&s, &w)| {
            let ln = kernel.ln_phi_w(s) - error.ln_phi_k(s / h) - (PI * h).ln();
            if ln == f64::NEG_INFINITY {
                0.0
            } else {
                w * ln.exp()
            }
        })
        .collect()
}

fn deviation_coefficients(
    panel: &Panel,
    error: &ErrorModel,
    kernel: &KernelModel,
    h: f64,
) -> Result<Vec<f64>> {
    let t = error.tail();
    let inv_mu_h = 1.0 / (t.mu * h.powf(t.lambda));
    panel
        .nodes
        .iter()
        .zip(&panel.weights)
        .map(|(&s, &w)| {
            let u = u_function(error, s / h)?;
            if u == 0.0 {
                return Ok(0.0);
            }
            let ln = kernel.ln_phi_w(s) - (PI * h).ln() - t.c.ln() - t.lambda0 * (s / h).ln()
                + s.powf(t.lambda) * inv_mu_h;
            Ok(if ln == f64::NEG_INFINITY {
                0.0
            } else {
                w * ln.exp() * u
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Term {
    Main,
    R1,
    R2,
    R3,
}

fn evaluate(
    term: Term,
    spec: &Spectrum,
    error: &ErrorModel,
    kernel: &KernelModel,
    grid_x: &[f64],
) -> Result<Vec<f64>> {
    let h = spec.h;
    Ok(match term {
        Term::Main | Term::R1 => {
            let coef = tail_coefficients(&spec.high, error, kernel, h);
            let scalar: f64 = coef.iter().sum();
            let one = spec.at_one();
            let main: Vec<f64> = grid_x
                .iter()
                .map(|&x| {
                    let (sin, cos) = (x / h).sin_cos();
                    scalar * (cos * one.re + sin * one.im)
                })
                .collect();
            if term == Term::Main {
                main
            } else {
                let full = oscillatory_sum(&spec.high.nodes, &coef, &spec.high_c, h, grid_x);
                full.iter().zip(&main).map(|(f, m)| f - m).collect()
            }
        }
        Term::R2 => {
            let coef = low_coefficients(&spec.low, error, kernel, h);
            oscillatory_sum(&spec.low.nodes, &coef, &spec.low_c, h, grid_x)
        }
        Term::R3 => {
            let coef = deviation_coefficients(&spec.high, error, kernel, h)?;
            if coef.iter().all(|c| *c == 0.0) {
                vec![0.0; grid_x.len()]
            } else {
                oscillatory_sum(&spec.high.nodes, &coef, &spec.high_c, h, grid_x)
            }
        }
    })
}

fn check_inputs(
    error: &ErrorModel,
    kernel: &KernelModel,
    cfg: &EstimatorConfig,
    dcfg: &DecompositionConfig,
) -> Result<()> {
    error.require_theorem()?;
    cfg.validate_for(error)?;
    kernel.validate()?;
    dcfg.validate()
}

fn single_term(
    term: Term,
    samples: &SampleSet,
    error: &ErrorModel,
    kernel: &KernelModel,
    cfg: &EstimatorConfig,
    dcfg: &DecompositionConfig,
    grid_x: &[f64],
) -> Result<EstimateGrid> {
    check_inputs(error, kernel, cfg, dcfg)?;
    let spec = Spectrum::empirical(samples, cfg.h, dcfg)?;
    EstimateGrid::new(
        grid_x.to_vec(),
        evaluate(term, &spec, error, kernel, grid_x)?,
        GridKind::Estimate,
    )
}

/// `(1/(pi C)) h^{lambda0-1} [int_eps^1 phi_w(s) s^{-lambda0} exp(s^lambda/(mu h^lambda)) ds]
/// (1/n) sum_j cos((X_j - x)/h)`.
pub fn main_term(
    samples: &SampleSet,
    error: &ErrorModel,
    kernel: &KernelModel,
    cfg: &EstimatorConfig,
    dcfg: &DecompositionConfig,
    grid_x: &[f64],
) -> Result<EstimateGrid> {
    single_term(Term::Main, samples, error, kernel, cfg, dcfg, grid_x)
}

pub fn remainder_r1(
    samples: &SampleSet,
    error: &ErrorModel,
    kernel: &KernelModel,
    cfg: &EstimatorConfig,
    dcfg: &DecompositionConfig,
    grid_x: &[f64],
) -> Result<EstimateGrid> {
    single_term(Term::R1, samples, error, kernel, cfg, dcfg, grid_x)
}

pub fn remainder_r2(
    samples: &SampleSet,
    error: &ErrorModel,
    kernel: &KernelModel,
    cfg: &EstimatorConfig,
    dcfg: &DecompositionConfig,
    grid_x: &[f64],
) -> Result<EstimateGrid> {
    single_term(Term::R2, samples, error, kernel, cfg, dcfg, grid_x)
}

pub fn remainder_r3(
    samples: &SampleSet,
    error: &ErrorModel,
    kernel: &KernelModel,
    cfg: &EstimatorConfig,
    dcfg: &DecompositionConfig,
    grid_x: &[f64],
) -> Result<EstimateGrid> {
    single_term(Term::R3, samples, error, kernel, cfg, dcfg, grid_x)
}

/// `R1` contribution of one observation at one point, by direct quadrature of
/// `(cos(s (X_j - x)/h) - cos((X_j - x)/h))` against the tail weight.
pub fn r1_observation(
    xj: f64,
    x: f64,
    error: &ErrorModel,
    kernel: &KernelModel,
    cfg: &EstimatorConfig,
    dcfg: &DecompositionConfig,
) -> Result<f64> {
    check_inputs(error, kernel, cfg, dcfg)?;
    let h = cfg.h;
    let panel = dcfg.quadrature.panel(dcfg.epsilon, 1.0, 1.0 / h)?;
    let coef = tail_coefficients(&panel, error, kernel, h);
    let u = (xj - x) / h;
    Ok(panel
        .nodes
        .iter()
        .zip(&coef)
        .map(|(&s, &c)| c * ((s * u).cos() - u.cos()))
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub main_term: EstimateGrid,
    pub r1: EstimateGrid,
    pub r2: EstimateGrid,
    pub r3: EstimateGrid,
    /// `sup |R^(l)|` over the grid, refined.
    pub sups: [f64; 3],
}

impl DecompositionResult {
    fn build(
        spec: &Spectrum,
        error: &ErrorModel,
        kernel: &KernelModel,
        grid_x: &[f64],
        kind: GridKind,
    ) -> Result<Self> {
        let grid = |term| -> Result<EstimateGrid> {
            EstimateGrid::new(
                grid_x.to_vec(),
                evaluate(term, spec, error, kernel, grid_x)?,
                kind,
            )
        };
        let main_term = grid(Term::Main)?;
        let r1 = grid(Term::R1)?;
        let r2 = grid(Term::R2)?;
        let r3 = grid(Term::R3)?;
        let sup = |g: &EstimateGrid| refined_max_abs(&g.x, &g.values).0;
        let sups = [sup(&r1), sup(&r2), sup(&r3)];
        Ok(DecompositionResult {
            main_term,
            r1,
            r2,
            r3,
            sups,
        })
    }

    /// `main + r1 + r2 + r3` pointwise.
    pub fn reconstruction(&self) -> Vec<f64> {
        (0..self.main_term.values.len())
            .map(|i| {
                self.main_term.values[i] + self.r1.values[i] + self.r2.values[i] + self.r3.values[i]
            })
            .collect()
    }
}

pub fn decompose(
    samples: &SampleSet,
    error: &ErrorModel,
    kernel: &KernelModel,
    cfg: &EstimatorConfig,
    dcfg: &DecompositionConfig,
    grid_x: &[f64],
) -> Result<DecompositionResult> {
    check_inputs(error, kernel, cfg, dcfg)?;
    let spec = Spectrum::empirical(samples, cfg.h, dcfg)?;
    DecompositionResult::build(&spec, error, kernel, grid_x, GridKind::Estimate)
}

/// Every term minus its exact expectation. Since `E[phi_emp] = phi_f phi_k`,
/// centering amounts to replacing `phi_emp` by `phi_emp - phi_f phi_k`.
pub fn decompose_centered(
    samples: &SampleSet,
    signal: &SignalModel,
    error: &ErrorModel,
    kernel: &KernelModel,
    cfg: &EstimatorConfig,
    dcfg: &DecompositionConfig,
    grid_x: &[f64],
) -> Result<DecompositionResult> {
    check_inputs(error, kernel, cfg, dcfg)?;
    signal.validate()?;
    let spec = Spectrum::empirical(samples, cfg.h, dcfg)?
        .map(|t, v| v - signal.phi_f(t) * error.ln_phi_k(t).exp());
    DecompositionResult::build(&spec, error, kernel, grid_x, GridKind::Centered)
}

/// Exact expectation of every term.
pub fn decompose_expected(
    signal: &SignalModel,
    error: &ErrorModel,
    kernel: &KernelModel,
    cfg: &EstimatorConfig,
    dcfg: &DecompositionConfig,
    grid_x: &[f64],
) -> Result<DecompositionResult> {
    check_inputs(error, kernel, cfg, dcfg)?;
    signal.validate()?;
    let (low, high) = Spectrum::panels(cfg.h, dcfg)?;
    let zeros = |p: &Panel| vec![Complex64::new(0.0, 0.0); p.len()];
    let spec = Spectrum {
        h: cfg.h,
        low_c: zeros(&low),
        high_c: zeros(&high),
        low,
        high,
    }
    .map(|t, _| signal.phi_f(t) * error.ln_phi_k(t).exp());
    DecompositionResult::build(&spec, error, kernel, grid_x, GridKind::Expectation)
}

/// `max_x |main + R1 + R2 + R3 - f_nh|` over the grid.
pub fn reconstruct_check(
    samples: &SampleSet,
    error: &ErrorModel,
    kernel: &KernelModel,
    cfg: &EstimatorConfig,
    dcfg: &DecompositionConfig,
    grid_x: &[f64],
) -> Result<f64> {
    let parts = decompose(samples, error, kernel, cfg, dcfg, grid_x)?;
    let direct = deconv_estimate(samples, error, kernel, cfg, grid_x)?;
    Ok(parts
        .reconstruction()
        .iter()
        .zip(&direct.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Numeric value of
/// `int_eps^1 s^{-lambda0} (1-s)^beta phi_w(s) exp(s^lambda/(mu h^lambda)) ds`
/// divided by `zeta(h)`.
pub fn tail_integral_over_zeta(
    kernel: &KernelModel,
    error: &ErrorModel,
    h: f64,
    beta: f64,
    dcfg: &DecompositionConfig,
) -> Result<f64> {
    let t = error.tail();
    special::zeta_exponent(h, t.mu, t.lambda)?;
    dcfg.validate()?;
    if !(beta >= 0.0) {
        return Err(DeconvError::Domain(format!(
            "beta must be >= 0, got {beta}"
        )));
    }
    let inv_mu_h = 1.0 / (t.mu * h.powf(t.lambda));
    let panel = dcfg.quadrature.panel(dcfg.epsilon, 1.0, 1.0 / h)?;
    Ok(panel.integrate(|s| {
        let w = kernel.phi_w(s);
        if w == 0.0 || s == 1.0 && beta > 0.0 {
            return 0.0;
        }
        let edge = if beta > 0.0 {
            beta * (1.0 - s).ln()
        } else {
            0.0
        };
        let ln = -t.lambda0 * s.ln() + edge + (s.powf(t.lambda) - 1.0) * inv_mu_h;
        w * ln.exp()
    }))
}

/// `A (mu h^lambda / lambda)^{1+alpha+beta} Gamma(alpha+beta+1)`, the
/// asymptote of [`tail_integral_over_zeta`].
pub fn tail_asymptote_over_zeta(
    kernel: &KernelModel,
    error: &ErrorModel,
    h: f64,
    beta: f64,
) -> Result<f64> {
    let t = error.tail();
    let (a, alpha) = kernel.edge();
    Ok(
        a * (t.mu * h.powf(t.lambda) / t.lambda).powf(1.0 + alpha + beta)
            * special::gamma_fn(alpha + beta + 1.0)?,
    )
}

/// Ratio of the numeric tail integral to its Laplace-type asymptote; tends
/// to 1 as `h -> 0`.
pub fn asymptotic_integral_check(
    kernel: &KernelModel,
    error: &ErrorModel,
    h: f64,
    beta: f64,
    dcfg: &DecompositionConfig,
) -> Result<f64> {
    let num = tail_integral_over_zeta(kernel, error, h, beta, dcfg)?;
    Ok(num / tail_asymptote_over_zeta(kernel, error, h, beta)?)
}
