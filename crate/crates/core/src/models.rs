//! Error, kernel and signal families, plus the checks that decide whether a
//! pair of models satisfies the supersmooth-tail and kernel-edge conditions.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{DeconvError, Result};
use crate::special;

/// Exponential tail of an error characteristic function:
/// `|phi_k(t)| ~ c |t|^lambda0 exp(-|t|^lambda / mu)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailParams {
    pub c: f64,
    pub lambda0: f64,
    pub lambda: f64,
    pub mu: f64,
}

impl TailParams {
    /// `ln(c |t|^lambda0 exp(-|t|^lambda / mu))`.
    pub fn ln_tail(&self, t: f64) -> f64 {
        let a = t.abs();
        self.c.ln() + self.lambda0 * a.ln() - a.powf(self.lambda) / self.mu
    }

    pub fn exponent(&self, h: f64) -> Result<f64> {
        special::zeta_exponent(h, self.mu, self.lambda)
    }
}

/// Anything that can stand in for an error law during condition checks.
pub trait ErrorLaw {
    fn tail(&self) -> TailParams;

    /// `(ln |phi_k(t)|, phi_k(t) / |phi_k(t)|)`. A zero of `phi_k` shows up
    /// as `-inf` or as a phase flip between neighbouring points.
    fn phi_k_polar(&self, t: f64) -> (f64, Complex64);

    fn phi_k(&self, t: f64) -> Complex64 {
        let (ln_abs, phase) = self.phi_k_polar(t);
        phase * ln_abs.exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ErrorKind {
    /// Standard normal errors.
    Gaussian,
    /// Standard normal plus independent standard Laplace errors;
    /// `phi_k(t) = exp(-t^2/2) / (1 + t^2)`.
    GaussianLaplaceMix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "ErrorKind", into = "ErrorKind")]
pub struct ErrorModel {
    kind: ErrorKind,
    tail: TailParams,
}

impl From<ErrorKind> for ErrorModel {
    fn from(kind: ErrorKind) -> Self {
        ErrorModel::new(kind)
    }
}

impl From<ErrorModel> for ErrorKind {
    fn from(m: ErrorModel) -> Self {
        m.kind
    }
}

impl ErrorModel {
    pub fn new(kind: ErrorKind) -> Self {
        let tail = match kind {
            ErrorKind::Gaussian => TailParams {
                c: 1.0,
                lambda0: 0.0,
                lambda: 2.0,
                mu: 2.0,
            },
            ErrorKind::GaussianLaplaceMix => TailParams {
                c: 1.0,
                lambda0: -2.0,
                lambda: 2.0,
                mu: 2.0,
            },
        };
        ErrorModel { kind, tail }
    }

    pub fn gaussian() -> Self {
        Self::new(ErrorKind::Gaussian)
    }

    pub fn gaussian_laplace_mix() -> Self {
        Self::new(ErrorKind::GaussianLaplaceMix)
    }

    /// Replace the declared tail parameters, keeping the exact characteristic
    /// function. Used to probe validation and the `lambda = 2` requirement.
    pub fn with_tail(mut self, tail: TailParams) -> Self {
        self.tail = tail;
        self
    }

    pub fn kind(&self) -> ErrorKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ErrorKind::Gaussian => "gaussian",
            ErrorKind::GaussianLaplaceMix => "gaussian_laplace_mix",
        }
    }

    pub fn ln_phi_k(&self, t: f64) -> f64 {
        match self.kind {
            ErrorKind::Gaussian => -0.5 * t * t,
            ErrorKind::GaussianLaplaceMix => -0.5 * t * t - (t * t).ln_1p(),
        }
    }

    /// `1 / phi_k(t)`; the built-ins are real and positive.
    pub fn recip_phi_k(&self, t: f64) -> Complex64 {
        Complex64::new((-self.ln_phi_k(t)).exp(), 0.0)
    }

    pub fn theorem_applicable(&self) -> bool {
        self.tail.lambda == 2.0
    }

    pub fn require_theorem(&self) -> Result<()> {
        if self.theorem_applicable() {
            Ok(())
        } else {
            Err(DeconvError::TheoremInapplicable(self.tail.lambda))
        }
    }

    /// Overflow guard for bandwidth `h`.
    pub fn check_bandwidth(&self, h: f64) -> Result<()> {
        self.tail.exponent(h).map(|_| ())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        match self.kind {
            ErrorKind::Gaussian => z,
            ErrorKind::GaussianLaplaceMix => {
                let e: f64 = Exp1.sample(rng);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                z + sign * e
            }
        }
    }
}

impl ErrorLaw for ErrorModel {
    fn tail(&self) -> TailParams {
        self.tail
    }

    fn phi_k_polar(&self, t: f64) -> (f64, Complex64) {
        (self.ln_phi_k(t), Complex64::new(1.0, 0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case")]
pub enum KernelModel {
    /// `phi_w = 1` on `[-1, 1]`, i.e. `w(x) = sin(x) / (pi x)`.
    SincFlat,
    /// `phi_w(s) = (1 - s^2)^m` on `[-1, 1]`.
    PolynomialM { m: u32 },
}

impl KernelModel {
    pub fn polynomial(m: u32) -> Self {
        KernelModel::PolynomialM { m }
    }

    pub fn name(&self) -> String {
        match self {
            KernelModel::SincFlat => "sinc_flat".into(),
            KernelModel::PolynomialM { m } => format!("polynomial_{m}"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            KernelModel::PolynomialM { m: 0 } => Err(DeconvError::InvalidInput(
                "polynomial_m kernel needs m >= 1 (m = 0 is sinc_flat)".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn phi_w(&self, s: f64) -> f64 {
        if !(s.abs() <= 1.0) {
            return 0.0;
        }
        match self {
            KernelModel::SincFlat => 1.0,
            KernelModel::PolynomialM { m } => (1.0 - s * s).powi(*m as i32),
        }
    }

    /// `ln phi_w(s)`; `-inf` where the kernel vanishes.
    pub fn ln_phi_w(&self, s: f64) -> f64 {
        if !(s.abs() <= 1.0) {
            return f64::NEG_INFINITY;
        }
        match self {
            KernelModel::SincFlat => 0.0,
            KernelModel::PolynomialM { m } => *m as f64 * (-s * s).ln_1p(),
        }
    }

    /// `(A, alpha)` with `phi_w(1 - t) ~ A t^alpha` as `t -> 0+`.
    pub fn edge(&self) -> (f64, f64) {
        match self {
            KernelModel::SincFlat => (1.0, 0.0),
            KernelModel::PolynomialM { m } => (2f64.powi(*m as i32), *m as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case")]
pub enum SignalModel {
    Gaussian {
        mean: f64,
        sd: f64,
    },
    GaussianMixture {
        weights: Vec<f64>,
        means: Vec<f64>,
        sds: Vec<f64>,
    },
}

impl Default for SignalModel {
    fn default() -> Self {
        SignalModel::Gaussian { mean: 0.0, sd: 1.0 }
    }
}

impl SignalModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            SignalModel::Gaussian { mean, sd } => {
                if !(mean.is_finite() && *sd > 0.0 && sd.is_finite()) {
                    return Err(DeconvError::InvalidInput(format!(
                        "gaussian signal needs finite mean and sd > 0 (got {mean}, {sd})"
                    )));
                }
            }
            SignalModel::GaussianMixture {
                weights,
                means,
                sds,
            } => {
                if weights.is_empty() || weights.len() != means.len() || weights.len() != sds.len()
                {
                    return Err(DeconvError::InvalidInput(
                        "mixture needs equally long, nonempty weights/means/sds".into(),
                    ));
                }
                if weights.iter().any(|w| !(*w >= 0.0)) || sds.iter().any(|s| !(*s > 0.0)) {
                    return Err(DeconvError::InvalidInput(
                        "mixture weights must be >= 0 and sds > 0".into(),
                    ));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(DeconvError::InvalidInput(format!(
                        "mixture weights sum to {total}, expected 1"
                    )));
                }
            }
        }
        Ok(())
    }

    fn components(&self) -> Vec<(f64, f64, f64)> {
        match self {
            SignalModel::Gaussian { mean, sd } => vec![(1.0, *mean, *sd)],
            SignalModel::GaussianMixture {
                weights,
                means,
                sds,
            } => weights
                .iter()
                .zip(means)
                .zip(sds)
                .map(|((w, m), s)| (*w, *m, *s))
                .collect(),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.components()
            .into_iter()
            .map(|(w, m, s)| {
                let z = (x - m) / s;
                w * (-0.5 * z * z).exp() / (s * (2.0 * PI).sqrt())
            })
            .sum()
    }

    pub fn phi_f(&self, t: f64) -> Complex64 {
        self.components()
            .into_iter()
            .map(|(w, m, s)| Complex64::from_polar(w * (-0.5 * s * s * t * t).exp(), m * t))
            .sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        match self {
            SignalModel::Gaussian { mean, sd } => mean + sd * z,
            SignalModel::GaussianMixture {
                weights,
                means,
                sds,
            } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = weights.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                means[pick] + sds[pick] * z
            }
        }
    }
}

/// The three model families as they appear in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSet {
    pub error: ErrorModel,
    pub kernel: KernelModel,
    #[serde(default)]
    pub signal: Option<SignalModel>,
}

impl ModelSet {
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if let Some(s) = &self.signal {
            s.validate()?;
        }
        Ok(())
    }

    pub fn signal(&self) -> Result<&SignalModel> {
        self.signal
            .as_ref()
            .ok_or_else(|| DeconvError::InvalidInput("a signal model is required here".into()))
    }
}

// ---------------------------------------------------------------------------
// Condition checks

pub const TAIL_CHECK_POINTS: [f64; 3] = [20.0, 50.0, 100.0];
pub const TAIL_TOLERANCE: f64 = 0.01;
pub const EDGE_CHECK_POINTS: [f64; 2] = [1e-2, 1e-3];
pub const EDGE_TOLERANCE: f64 = 0.02;
const NONZERO_GRID_STEP: f64 = 0.01;
const NONZERO_GRID_MAX: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub name: String,
    pub passed: bool,
    /// Measured quantities behind the verdict (ratios, offending points).
    pub measured: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<ConditionCheck>,
    pub all_passed: bool,
    pub theorem_applicable: bool,
    pub tail: TailParams,
    pub kernel_a: f64,
    pub kernel_alpha: f64,
}

impl ValidationReport {
    pub fn check(&self, name: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn check(name: &str, passed: bool, measured: Vec<f64>) -> ConditionCheck {
    ConditionCheck {
        name: name.to_string(),
        passed,
        measured,
    }
}

/// Check the supersmooth-tail condition on `error` and the edge condition on
/// `kernel`. Failures are reported, never returned as errors.
pub fn validate_conditions<E: ErrorLaw + ?Sized>(
    error: &E,
    kernel: &KernelModel,
) -> ValidationReport {
    let tail = error.tail();
    let mut checks = Vec::new();

    checks.push(check(
        "tail_parameters",
        tail.c > 0.0 && tail.mu > 0.0 && tail.lambda > 0.0 && tail.lambda <= 2.0,
        vec![tail.c, tail.lambda0, tail.lambda, tail.mu],
    ));

    let at_zero = error.phi_k(0.0);
    checks.push(check(
        "phi_k(0) = 1",
        (at_zero - Complex64::new(1.0, 0.0)).norm() <= 1e-12,
        vec![at_zero.re, at_zero.im],
    ));

    let steps = (NONZERO_GRID_MAX / NONZERO_GRID_STEP).round() as usize;
    let mut zeros = Vec::new();
    let mut prev_phase: Option<Complex64> = None;
    for k in 0..=steps {
        let t = k as f64 * NONZERO_GRID_STEP;
        let (ln_abs, phase) = error.phi_k_polar(t);
        let vanished = ln_abs == f64::NEG_INFINITY || ln_abs.is_nan();
        let flipped = prev_phase.is_some_and(|p| (p.conj() * phase).re < 0.0);
        if vanished || flipped {
            zeros.push(t);
        }
        prev_phase = Some(phase);
    }
    checks.push(check("phi_k(t) != 0", zeros.is_empty(), zeros));

    let tail_ratios: Vec<f64> = TAIL_CHECK_POINTS
        .iter()
        .map(|&t| (error.phi_k_polar(t).0 - tail.ln_tail(t)).exp())
        .collect();
    checks.push(check(
        "phi_k tail ratio -> 1",
        tail_ratios
            .iter()
            .all(|r| (r - 1.0).abs() <= TAIL_TOLERANCE),
        tail_ratios,
    ));

    let kernel_ok = kernel.validate().is_ok();
    let probes = [0.0, 0.1, 0.37, 0.5, 0.9, 0.999];
    let symmetric = probes.iter().all(|&s| kernel.phi_w(s) == kernel.phi_w(-s));
    let outside = [1.0 + 1e-12, 1.5, 10.0]
        .iter()
        .all(|&s| kernel.phi_w(s) == 0.0 && kernel.phi_w(-s) == 0.0);
    checks.push(check(
        "phi_w(0) = 1",
        kernel_ok && kernel.phi_w(0.0) == 1.0,
        vec![kernel.phi_w(0.0)],
    ));
    checks.push(check("phi_w symmetric", symmetric, vec![]));
    checks.push(check("phi_w support [-1,1]", outside, vec![]));

    let (a, alpha) = kernel.edge();
    let edge_ratios: Vec<f64> = EDGE_CHECK_POINTS
        .iter()
        .map(|&t| kernel.phi_w(1.0 - t) / (a * t.powf(alpha)))
        .collect();
    checks.push(check(
        "phi_w(1-t) / (A t^alpha) -> 1",
        edge_ratios
            .iter()
            .all(|r| (r - 1.0).abs() <= EDGE_TOLERANCE),
        edge_ratios,
    ));

    let all_passed = checks.iter().all(|c| c.passed);
    ValidationReport {
        checks,
        all_passed,
        theorem_applicable: tail.lambda == 2.0,
        tail,
        kernel_a: a,
        kernel_alpha: alpha,
    }
}
