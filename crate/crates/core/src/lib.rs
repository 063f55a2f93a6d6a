//! Supersmooth deconvolution kernel density estimation.
//!
//! Observations `X = Y + Z` are contaminated by noise `Z` whose characteristic
//! function decays like `C |t|^lambda0 exp(-|t|^lambda / mu)`. This crate
//! evaluates the Fourier-inversion estimator of the density of `Y`, the
//! supremum distance `M_n = sup_[0,1] |f_nh - E f_nh|` with its normalizing
//! sequence and Rayleigh limit, uniform confidence bands, the main-term plus
//! remainder decomposition of the estimator, and a Monte Carlo harness that
//! checks the limit theory on replicate ladders.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decomposition;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod io;
pub mod limit_law;
pub mod models;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod sup_stat;

pub use error::{DeconvError, Result};
pub use estimator::{
    centered_estimate, deconv_estimate, expected_estimate, kernel_sum_estimate, phi_emp,
    EstimateGrid, EstimatorConfig, GridKind, SampleSet,
};
pub use models::{
    validate_conditions, ErrorKind, ErrorModel, KernelModel, ModelSet, SignalModel, TailParams,
    ValidationReport,
};
pub use quadrature::{QuadratureSpec, Rule};
