//! The deconvolution kernel density estimator in its Fourier-inversion and
//! kernel-sum forms, the empirical characteristic function, and the exact
//! expectation of the estimator.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{DeconvError, Result};
use crate::models::{ErrorModel, KernelModel, SignalModel};
use crate::quadrature::{Panel, QuadratureSpec};

/// Observations `X_1, ..., X_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    values: Vec<f64>,
}

impl SampleSet {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(DeconvError::InvalidInput("sample set is empty".into()));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(DeconvError::InvalidInput(format!(
                "sample contains non-finite value {bad}"
            )));
        }
        Ok(SampleSet { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn concat(&self, other: &SampleSet) -> SampleSet {
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        SampleSet { values }
    }
}

/// Empirical characteristic function `(1/n) sum_j exp(i t X_j)`.
pub fn phi_emp(samples: &SampleSet, t: f64) -> Complex64 {
    let sum: Complex64 = samples.values.iter().map(|&x| Complex64::cis(t * x)).sum();
    sum / samples.len() as f64
}

const LANES: usize = 4;
const REANCHOR: usize = 64;

/// Empirical characteristic function on `t_k = t0 + k dt`, `k < count`.
///
/// Advances `exp(i t_k X_j)` by complex rotation and re-anchors with an exact
/// `cis` every 64 nodes. Summation order is fixed: lanes of four samples in
/// input order.
pub fn phi_emp_uniform(samples: &SampleSet, t0: f64, dt: f64, count: usize) -> Vec<Complex64> {
    let mut acc = vec![Complex64::new(0.0, 0.0); count];
    for chunk in samples.values.chunks(LANES) {
        let mut x = [0.0; LANES];
        x[..chunk.len()].copy_from_slice(chunk);
        let live = chunk.len();
        let step: [Complex64; LANES] = std::array::from_fn(|i| Complex64::cis(dt * x[i]));
        let mut z = [Complex64::new(0.0, 0.0); LANES];
        for (k, slot) in acc.iter_mut().enumerate() {
            if k % REANCHOR == 0 {
                let t = t0 + k as f64 * dt;
                for i in 0..LANES {
                    z[i] = if i < live {
                        Complex64::cis(t * x[i])
                    } else {
                        Complex64::new(0.0, 0.0)
                    };
                }
            }
            *slot += (z[0] + z[1]) + (z[2] + z[3]);
            for i in 0..LANES {
                z[i] *= step[i];
            }
        }
    }
    let inv_n = 1.0 / samples.len() as f64;
    acc.iter_mut().for_each(|v| *v *= inv_n);
    acc
}

/// Empirical characteristic function on the nodes of a uniform panel.
pub fn phi_emp_on_panel(samples: &SampleSet, panel: &Panel) -> Vec<Complex64> {
    phi_emp_uniform(samples, panel.nodes[0], panel.step, panel.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub h: f64,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
}

impl EstimatorConfig {
    pub fn new(h: f64) -> Self {
        EstimatorConfig {
            h,
            quadrature: QuadratureSpec::default(),
        }
    }

    pub fn with_quadrature(mut self, quadrature: QuadratureSpec) -> Self {
        self.quadrature = quadrature;
        self
    }

    /// Checks that do not depend on the error model.
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h <= 1.0) {
            return Err(DeconvError::InvalidInput(format!(
                "bandwidth must lie in (0, 1], got {}",
                self.h
            )));
        }
        self.quadrature.validate()
    }

    pub fn validate_for(&self, error: &ErrorModel) -> Result<()> {
        self.validate()?;
        error.check_bandwidth(self.h)
    }

    /// Frequency panel `t in [0, 1/h]`.
    pub fn frequency_panel(&self) -> Result<Panel> {
        self.quadrature.panel(0.0, 1.0 / self.h, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Estimate,
    Expectation,
    Centered,
}

impl GridKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            GridKind::Estimate => "estimate",
            GridKind::Expectation => "expectation",
            GridKind::Centered => "centered",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateGrid {
    pub x: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: GridKind,
}

impl EstimateGrid {
    pub fn new(x: Vec<f64>, values: Vec<f64>, kind: GridKind) -> Result<Self> {
        if x.len() != values.len() {
            return Err(DeconvError::InvalidInput(format!(
                "grid has {} points but {} values",
                x.len(),
                values.len()
            )));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(DeconvError::InvalidInput(
                "grid points must be strictly increasing".into(),
            ));
        }
        Ok(EstimateGrid { x, values, kind })
    }

    /// Largest gap between neighbouring grid points.
    pub fn max_spacing(&self) -> f64 {
        self.x.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Pointwise difference `self - other`, tagged as centered.
    pub fn centered_against(&self, other: &EstimateGrid) -> Result<EstimateGrid> {
        if self.x != other.x {
            return Err(DeconvError::InvalidInput("grids differ".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(EstimateGrid {
            x: self.x.clone(),
            values,
            kind: GridKind::Centered,
        })
    }
}

/// `points` equally spaced values covering `[a, b]`.
pub fn uniform_grid(a: f64, b: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 || !(b > a) {
        return Err(DeconvError::InvalidInput(format!(
            "grid needs at least two points on a nonempty interval (got {points} on [{a}, {b}])"
        )));
    }
    let step = (b - a) / (points - 1) as f64;
    Ok((0..points)
        .map(|i| {
            if i + 1 == points {
                b
            } else {
                a + i as f64 * step
            }
        })
        .collect())
}

/// `(1/pi) sum_k Re[exp(-i t_k x) psi_k]`, with quadrature weights already
/// folded into `psi`.
fn invert(nodes: &[f64], psi: &[Complex64], grid_x: &[f64]) -> Vec<f64> {
    grid_x
        .iter()
        .map(|&x| {
            let s: f64 = nodes
                .iter()
                .zip(psi)
                .map(|(&t, p)| {
                    let (sin, cos) = (t * x).sin_cos();
                    cos * p.re + sin * p.im
                })
                .sum();
            s / PI
        })
        .collect()
}

/// Per-node factor `w_k phi_w(h t_k) / phi_k(t_k)`, exponentials combined in
/// log space.
fn deconvolution_weights(
    panel: &Panel,
    ln_phi_k: &dyn Fn(f64) -> f64,
    kernel: &KernelModel,
    h: f64,
) -> Vec<f64> {
    panel
        .nodes
        .iter()
        .zip(&panel.weights)
        .map(|(&t, &w)| {
            let ln = kernel.ln_phi_w(h * t) - ln_phi_k(t);
            if ln == f64::NEG_INFINITY {
                0.0
            } else {
                w * ln.exp()
            }
        })
        .collect()
}

/// Deconvolution estimate `f_nh` on `grid_x` by Fourier inversion of the
/// smoothed empirical characteristic function over `t in [0, 1/h]`.
pub fn deconv_estimate(
    samples: &SampleSet,
    error: &ErrorModel,
    kernel: &KernelModel,
    cfg: &EstimatorConfig,
    grid_x: &[f64],
) -> Result<EstimateGrid> {
    cfg.validate_for(error)?;
    kernel.validate()?;
    estimate_with(samples, &|t| error.ln_phi_k(t), kernel, cfg, grid_x)
}

fn estimate_with(
    samples: &SampleSet,
    ln_phi_k: &dyn Fn(f64) -> f64,
    kernel: &KernelModel,
    cfg: &EstimatorConfig,
    grid_x: &[f64],
) -> Result<EstimateGrid> {
    let panel = cfg.frequency_panel()?;
    let ecf = phi_emp_on_panel(samples, &panel);
    let weights = deconvolution_weights(&panel, ln_phi_k, kernel, cfg.h);
    let psi: Vec<Complex64> = ecf.iter().zip(&weights).map(|(e, w)| e * w).collect();
    EstimateGrid::new(
        grid_x.to_vec(),
        invert(&panel.nodes, &psi, grid_x),
        GridKind::Estimate,
    )
}

/// `E[f_nh]` on `grid_x`, exact up to quadrature since
/// `E[phi_emp(t)] / phi_k(t) = phi_f(t)`.
pub fn expected_estimate(
    signal: &SignalModel,
    kernel: &KernelModel,
    cfg: &EstimatorConfig,
    grid_x: &[f64],
) -> Result<EstimateGrid> {
    cfg.validate()?;
    kernel.validate()?;
    signal.validate()?;
    let panel = cfg.frequency_panel()?;
    let psi: Vec<Complex64> = panel
        .nodes
        .iter()
        .zip(&panel.weights)
        .map(|(&t, &w)| signal.phi_f(t) * (w * kernel.phi_w(cfg.h * t)))
        .collect();
    EstimateGrid::new(
        grid_x.to_vec(),
        invert(&panel.nodes, &psi, grid_x),
        GridKind::Expectation,
    )
}

/// `f_nh - E[f_nh]` on `grid_x`, both evaluated on one shared node set.
pub fn centered_estimate(
    samples: &SampleSet,
    signal: &SignalModel,
    error: &ErrorModel,
    kernel: &KernelModel,
    cfg: &EstimatorConfig,
    grid_x: &[f64],
) -> Result<EstimateGrid> {
    cfg.validate_for(error)?;
    kernel.validate()?;
    signal.validate()?;
    let panel = cfg.frequency_panel()?;
    let ecf = phi_emp_on_panel(samples, &panel);
    let weights = deconvolution_weights(&panel, &|t| error.ln_phi_k(t), kernel, cfg.h);
    let psi: Vec<Complex64> = panel
        .nodes
        .iter()
        .zip(&panel.weights)
        .zip(ecf.iter().zip(&weights))
        .map(|((&t, &w), (e, dw))| e * dw - signal.phi_f(t) * (w * kernel.phi_w(cfg.h * t)))
        .collect();
    EstimateGrid::new(
        grid_x.to_vec(),
        invert(&panel.nodes, &psi, grid_x),
        GridKind::Centered,
    )
}

/// Tabulated deconvolution kernel
/// `v_h(u) = (1/pi) int_0^1 Re[phi_w(s) exp(-i s u) / phi_k(s/h)] ds`.
#[derive(Debug, Clone)]
pub struct DeconvolutionKernel {
    nodes: Vec<f64>,
    factors: Vec<Complex64>,
    h: f64,
}

impl DeconvolutionKernel {
    pub fn new(error: &ErrorModel, kernel: &KernelModel, cfg: &EstimatorConfig) -> Result<Self> {
        cfg.validate_for(error)?;
        kernel.validate()?;
        let h = cfg.h;
        let panel = cfg.quadrature.panel(0.0, 1.0, 1.0 / h)?;
        let factors = panel
            .nodes
            .iter()
            .zip(&panel.weights)
            .map(|(&s, &w)| error.recip_phi_k(s / h) * (w * kernel.phi_w(s)))
            .collect();
        Ok(DeconvolutionKernel {
            nodes: panel.nodes,
            factors,
            h,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn value(&self, u: f64) -> f64 {
        let s: f64 = self
            .nodes
            .iter()
            .zip(&self.factors)
            .map(|(&s, f)| (Complex64::cis(-s * u) * f).re)
            .sum();
        s / PI
    }
}

/// `(1/(n h)) sum_j v_h((x - X_j)/h)` at a single point.
pub fn kernel_sum_estimate(
    samples: &SampleSet,
    error: &ErrorModel,
    kernel: &KernelModel,
    cfg: &EstimatorConfig,
    x: f64,
) -> Result<f64> {
    let vh = DeconvolutionKernel::new(error, kernel, cfg)?;
    Ok(kernel_sum_with(&vh, samples, x))
}

pub fn kernel_sum_with(vh: &DeconvolutionKernel, samples: &SampleSet, x: f64) -> f64 {
    let h = vh.bandwidth();
    let total: f64 = samples
        .values()
        .iter()
        .map(|&xj| vh.value((x - xj) / h))
        .sum();
    total / (samples.len() as f64 * h)
}
