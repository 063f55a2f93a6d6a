//! The supremum distance `M_n`, its normalizing sequence `a_n`, the limit
//! constant, and uniform confidence bands.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{DeconvError, Result};
use crate::estimator::{deconv_estimate, EstimateGrid, EstimatorConfig, GridKind, SampleSet};
use crate::limit_law::rayleigh_quantile;
use crate::models::{ErrorLaw, ErrorModel, KernelModel};
use crate::special;

/// Grid spacing must not exceed `h / GRID_POINTS_PER_BANDWIDTH`.
pub const GRID_POINTS_PER_BANDWIDTH: f64 = 10.0;

/// Power of `h` in the normalizer: `lambda (1 + alpha) + lambda0 - 1`.
pub fn rate_exponent(error: &ErrorModel, kernel: &KernelModel) -> f64 {
    let tail = error.tail();
    let (_, alpha) = kernel.edge();
    tail.lambda * (1.0 + alpha) + tail.lambda0 - 1.0
}

/// `ln a_n = ln(sqrt(n)) - p ln(h) - 1/(mu h^lambda)`.
pub fn ln_normalizer_a_n(
    n: usize,
    h: f64,
    error: &ErrorModel,
    kernel: &KernelModel,
) -> Result<f64> {
    error.require_theorem()?;
    if n == 0 {
        return Err(DeconvError::InvalidInput(
            "sample size must be positive".into(),
        ));
    }
    let tail = error.tail();
    let ln_zeta = special::ln_zeta(h, tail.mu, tail.lambda)?;
    Ok(0.5 * (n as f64).ln() - rate_exponent(error, kernel) * h.ln() - ln_zeta)
}

/// `a_n = sqrt(n) h^{-(lambda(1+alpha)+lambda0-1)} / zeta(h)`.
pub fn normalizer_a_n(n: usize, h: f64, error: &ErrorModel, kernel: &KernelModel) -> Result<f64> {
    ln_normalizer_a_n(n, h, error, kernel).map(f64::exp)
}

/// `(sqrt(2)/2) (A / (pi C)) (mu/lambda)^{1+alpha} Gamma(alpha + 1)`.
pub fn limit_constant(error: &ErrorModel, kernel: &KernelModel) -> Result<f64> {
    error.require_theorem()?;
    let tail = error.tail();
    let (a, alpha) = kernel.edge();
    Ok(std::f64::consts::FRAC_1_SQRT_2 * a / (PI * tail.c)
        * (tail.mu / tail.lambda).powf(1.0 + alpha)
        * special::gamma_fn(alpha + 1.0)?)
}

/// Largest `|value|` on a grid, refined by a three-point parabola through the
/// discrete maximizer and its neighbours. Returns `(refined, argmax, grid_max)`.
/// The refined value never drops below the grid maximum.
pub fn refined_max_abs(x: &[f64], values: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), values.len());
    assert!(!x.is_empty());
    let (i, grid_max) =
        values
            .iter()
            .map(|v| v.abs())
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, v)| {
                if v > best.1 {
                    (i, v)
                } else {
                    best
                }
            });
    if i == 0 || i + 1 == x.len() {
        return (grid_max, x[i], grid_max);
    }
    let (u0, u2) = (x[i - 1] - x[i], x[i + 1] - x[i]);
    let (y0, y1, y2) = (values[i - 1].abs(), grid_max, values[i + 1].abs());
    match parabola_vertex(u0, u2, y0, y1, y2) {
        Some((du, v)) => (v, x[i] + du, grid_max),
        None => (grid_max, x[i], grid_max),
    }
}

/// Same as [`refined_max_abs`] on a periodic uniform grid `x_k = x_0 + k d`
/// covering one period; neighbours wrap around.
pub fn refined_max_abs_periodic(x: &[f64], values: &[f64]) -> (f64, f64, f64) {
    let m = values.len();
    assert!(m >= 3 && x.len() == m);
    let d = x[1] - x[0];
    let (i, grid_max) =
        values
            .iter()
            .map(|v| v.abs())
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, v)| {
                if v > best.1 {
                    (i, v)
                } else {
                    best
                }
            });
    let y0 = values[(i + m - 1) % m].abs();
    let y2 = values[(i + 1) % m].abs();
    match parabola_vertex(-d, d, y0, grid_max, y2) {
        Some((du, v)) => (v, x[i] + du, grid_max),
        None => (grid_max, x[i], grid_max),
    }
}

/// Vertex of the parabola through `(u0, y0), (0, y1), (u2, y2)` with
/// `u0 < 0 < u2`, clamped to `[u0, u2]`. `None` unless concave and at least `y1`.
fn parabola_vertex(u0: f64, u2: f64, y0: f64, y1: f64, y2: f64) -> Option<(f64, f64)> {
    let s0 = (y0 - y1) / u0;
    let s2 = (y2 - y1) / u2;
    let a = (s2 - s0) / (u2 - u0);
    let b = s2 - a * u2;
    if !(a < 0.0) {
        return None;
    }
    let u = (-b / (2.0 * a)).clamp(u0, u2);
    let v = y1 + b * u + a * u * u;
    (v >= y1 && v.is_finite()).then_some((u, v))
}

/// Discrete supremum of a centered grid before normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSup {
    pub m_n: f64,
    pub argmax_x: f64,
    pub grid_max: f64,
}

/// `M_n` from a centered grid. Spacing must be at most `h/10`.
pub fn sup_distance(centered: &EstimateGrid, h: f64) -> Result<GridSup> {
    if centered.kind != GridKind::Centered {
        return Err(DeconvError::InvalidInput(format!(
            "sup distance needs a centered grid, got {}",
            centered.kind.as_str()
        )));
    }
    if centered.x.is_empty() {
        return Err(DeconvError::InvalidInput("empty grid".into()));
    }
    let limit = h / GRID_POINTS_PER_BANDWIDTH;
    let spacing = centered.max_spacing();
    if spacing > limit * (1.0 + 1e-12) {
        return Err(DeconvError::GridTooCoarse { spacing, limit });
    }
    let (m_n, argmax_x, grid_max) = refined_max_abs(&centered.x, &centered.values);
    Ok(GridSup {
        m_n,
        argmax_x,
        grid_max,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupResult {
    pub m_n: f64,
    pub argmax_x: f64,
    /// `a_n m_n / c_limit`, asymptotically standard Rayleigh.
    pub scaled: f64,
    pub a_n: f64,
    pub c_limit: f64,
}

impl SupResult {
    pub fn new(sup: GridSup, a_n: f64, c_limit: f64) -> Self {
        SupResult {
            m_n: sup.m_n,
            argmax_x: sup.argmax_x,
            scaled: a_n * sup.m_n / c_limit,
            a_n,
            c_limit,
        }
    }
}

/// `M_n` with its normalization for a sample of size `n`.
pub fn sup_statistic(
    centered: &EstimateGrid,
    n: usize,
    error: &ErrorModel,
    kernel: &KernelModel,
    h: f64,
) -> Result<SupResult> {
    let a_n = normalizer_a_n(n, h, error, kernel)?;
    let c_limit = limit_constant(error, kernel)?;
    Ok(SupResult::new(sup_distance(centered, h)?, a_n, c_limit))
}

/// Constant-width band `f_nh +- c_limit q_level / a_n`. Its asymptotic
/// simultaneous coverage statement is about `E[f_nh]`, not the density itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandResult {
    pub center: EstimateGrid,
    pub half_width: f64,
    pub level: f64,
}

impl BandResult {
    pub fn lower(&self) -> Vec<f64> {
        self.center
            .values
            .iter()
            .map(|v| v - self.half_width)
            .collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.center
            .values
            .iter()
            .map(|v| v + self.half_width)
            .collect()
    }

    /// Whether `target` lies inside the band at every grid point.
    pub fn covers(&self, target: &EstimateGrid) -> Result<bool> {
        let diff = self.center.centered_against(target)?;
        Ok(diff.values.iter().all(|d| d.abs() <= self.half_width))
    }
}

pub fn band_half_width(
    n: usize,
    h: f64,
    error: &ErrorModel,
    kernel: &KernelModel,
    level: f64,
) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(DeconvError::Domain(format!(
            "band level must be in (0, 1), got {level}"
        )));
    }
    Ok(limit_constant(error, kernel)? * rayleigh_quantile(level)?
        / normalizer_a_n(n, h, error, kernel)?)
}

pub fn confidence_band(
    samples: &SampleSet,
    error: &ErrorModel,
    kernel: &KernelModel,
    cfg: &EstimatorConfig,
    grid_x: &[f64],
    level: f64,
) -> Result<BandResult> {
    let half_width = band_half_width(samples.len(), cfg.h, error, kernel, level)?;
    let center = deconv_estimate(samples, error, kernel, cfg, grid_x)?;
    Ok(BandResult {
        center,
        half_width,
        level,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::uniform_grid;
    use crate::models::TailParams;
    use proptest::prelude::*;

    fn centered(x: Vec<f64>, values: Vec<f64>) -> EstimateGrid {
        EstimateGrid::new(x, values, GridKind::Centered).unwrap()
    }

    #[test]
    fn normalizer_reference_values() {
        let g = ErrorModel::gaussian();
        let k = KernelModel::SincFlat;
        let a = normalizer_a_n(10_000, 0.5, &g, &k).unwrap();
        assert!((a - 100.0 / (0.5 * 2f64.exp())).abs() < 1e-10);
        assert!((a - 27.0671).abs() < 1e-4);
        let a1 = normalizer_a_n(1, 1.0, &g, &k).unwrap();
        assert!((a1 - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn normalizer_refuses_lambda_one() {
        let e = ErrorModel::gaussian().with_tail(TailParams {
            c: 1.0,
            lambda0: 0.0,
            lambda: 1.0,
            mu: 1.0,
        });
        assert!(matches!(
            normalizer_a_n(100, 0.5, &e, &KernelModel::SincFlat),
            Err(DeconvError::TheoremInapplicable(_))
        ));
        assert!(limit_constant(&e, &KernelModel::SincFlat).is_err());
    }

    #[test]
    fn normalizer_guard() {
        assert!(matches!(
            normalizer_a_n(100, 0.01, &ErrorModel::gaussian(), &KernelModel::SincFlat),
            Err(DeconvError::OverflowGuard { .. })
        ));
    }

    #[test]
    fn log_and_direct_normalizer_agree() {
        let g = ErrorModel::gaussian();
        let k = KernelModel::polynomial(3);
        for (n, h) in [(1000, 0.35), (10_000, 0.3), (100_000, 0.25), (7, 0.1)] {
            let via_log = normalizer_a_n(n, h, &g, &k).unwrap();
            let zeta = special::zeta(h, 2.0, 2.0).unwrap();
            let direct = (n as f64).sqrt() * h.powf(-rate_exponent(&g, &k)) / zeta;
            let m_n = 0.0123;
            assert!(((via_log * m_n) / (direct * m_n) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn limit_constant_values() {
        let g = ErrorModel::gaussian();
        let c0 = limit_constant(&g, &KernelModel::SincFlat).unwrap();
        assert!((c0 - std::f64::consts::FRAC_1_SQRT_2 / PI).abs() < 1e-15);
        assert!((c0 - 0.225079).abs() < 1e-6);
        let c3 = limit_constant(&g, &KernelModel::polynomial(3)).unwrap();
        assert!((c3 - std::f64::consts::FRAC_1_SQRT_2 * 8.0 / PI * 6.0).abs() < 1e-12);
        assert!((c3 - 10.8038).abs() < 1e-4);
        let doubled = g.with_tail(TailParams { c: 2.0, ..g.tail() });
        let half = limit_constant(&doubled, &KernelModel::SincFlat).unwrap();
        assert!((half - c0 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn sup_of_zero_grid() {
        let x = uniform_grid(0.0, 1.0, 21).unwrap();
        let s = sup_distance(&centered(x, vec![0.0; 21]), 0.5).unwrap();
        assert_eq!(s.m_n, 0.0);
    }

    #[test]
    fn sup_recovers_cosine_peak() {
        let h = 0.1;
        // offset so that no grid point sits on the peak at x = 2 pi h
        let x: Vec<f64> = (0..=400)
            .map(|k| 0.0123 + k as f64 * h / 20.0 * 0.5)
            .collect();
        let x: Vec<f64> = x.into_iter().filter(|v| *v <= 1.0).collect();
        let vals: Vec<f64> = x.iter().map(|v| (v / h).cos()).collect();
        let s = sup_distance(&centered(x, vals), h).unwrap();
        assert!(s.m_n >= 0.999 && s.m_n <= 1.0 + 1e-9, "{}", s.m_n);
        let spacing = h / 20.0;
        let x: Vec<f64> = (0..=(1.0 / spacing) as usize)
            .map(|k| 0.003 + k as f64 * spacing)
            .filter(|v| *v <= 1.0)
            .collect();
        let vals: Vec<f64> = x.iter().map(|v| (v / h).cos()).collect();
        let s = sup_distance(&centered(x, vals), h).unwrap();
        assert!(s.m_n >= 0.999 && s.m_n <= 1.0 + 1e-6, "{}", s.m_n);
        assert!(s.m_n >= s.grid_max);
    }

    #[test]
    fn coarse_grid_rejected() {
        let x = uniform_grid(0.0, 1.0, 5).unwrap();
        assert!(matches!(
            sup_distance(&centered(x, vec![0.0; 5]), 0.5),
            Err(DeconvError::GridTooCoarse { .. })
        ));
        let x = uniform_grid(0.0, 1.0, 5).unwrap();
        let est = EstimateGrid::new(x, vec![0.0; 5], GridKind::Estimate).unwrap();
        assert!(sup_distance(&est, 10.0).is_err());
    }

    #[test]
    fn rayleigh_factors() {
        let q95 = rayleigh_quantile(0.95).unwrap();
        assert!((q95 - (2.0 * 20f64.ln()).sqrt()).abs() < 1e-12);
        assert!((q95 - 2.44775).abs() < 1e-5);
        let q50 = rayleigh_quantile(0.5).unwrap();
        assert!((q50 - 1.17741).abs() < 1e-5);
    }

    #[test]
    fn half_width_scales() {
        let g = ErrorModel::gaussian();
        let k = KernelModel::SincFlat;
        let a = band_half_width(1000, 0.4, &g, &k, 0.95).unwrap();
        let b = band_half_width(4000, 0.4, &g, &k, 0.95).unwrap();
        assert!((a / b - 2.0).abs() < 1e-12);
        assert!(band_half_width(1000, 0.4, &g, &k, 0.5).unwrap() < a);
        assert!(band_half_width(1000, 0.4, &g, &k, 1.0).is_err());
        assert!(band_half_width(1000, 0.4, &g, &k, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn scale_and_sign_equivariance(
            vals in proptest::collection::vec(-5.0f64..5.0, 11),
            s in 0.01f64..100.0,
        ) {
            let x = uniform_grid(0.0, 1.0, 11).unwrap();
            let base = sup_distance(&centered(x.clone(), vals.clone()), 1.0).unwrap();
            let scaled: Vec<f64> = vals.iter().map(|v| v * s).collect();
            let sc = sup_distance(&centered(x.clone(), scaled), 1.0).unwrap();
            prop_assert!((sc.m_n - s * base.m_n).abs() <= 1e-9 * (1.0 + sc.m_n));
            prop_assert!((sc.argmax_x - base.argmax_x).abs() <= 1e-9);
            let flipped: Vec<f64> = vals.iter().map(|v| -v).collect();
            let fl = sup_distance(&centered(x, flipped), 1.0).unwrap();
            prop_assert_eq!(fl.m_n, base.m_n);
            prop_assert_eq!(fl.argmax_x, base.argmax_x);
            prop_assert!(base.m_n >= base.grid_max);
            prop_assert!(base.argmax_x >= 0.0 && base.argmax_x <= 1.0);
        }

        #[test]
        fn half_width_monotone(n in 10usize..100_000, level in 0.05f64..0.9) {
            let g = ErrorModel::gaussian();
            let k = KernelModel::polynomial(2);
            let w = band_half_width(n, 0.4, &g, &k, level).unwrap();
            prop_assert!(band_half_width(n + 1, 0.4, &g, &k, level).unwrap() < w);
            prop_assert!(band_half_width(n, 0.4, &g, &k, level + 0.05).unwrap() > w);
        }
    }
}
