//! Composite Newton-Cotes rules on uniformly spaced nodes.
//!
//! Node density is expressed per unit length in the frequency variable `t`;
//! an integral over `s = h t` on `[a, b]` therefore gets
//! `ceil((b - a) / h * nodes_per_unit)` intervals.

use serde::{Deserialize, Serialize};

use crate::error::{DeconvError, Result};

pub const MIN_NODES_PER_UNIT: usize = 64;
pub const DEFAULT_NODES_PER_UNIT: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Trapezoid,
    Simpson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub nodes_per_unit: usize,
    pub rule: Rule,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            nodes_per_unit: DEFAULT_NODES_PER_UNIT,
            rule: Rule::Simpson,
        }
    }
}

impl QuadratureSpec {
    pub fn new(nodes_per_unit: usize, rule: Rule) -> Result<Self> {
        let spec = QuadratureSpec {
            nodes_per_unit,
            rule,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes_per_unit < MIN_NODES_PER_UNIT {
            return Err(DeconvError::InvalidInput(format!(
                "nodes_per_unit must be at least {MIN_NODES_PER_UNIT}, got {}",
                self.nodes_per_unit
            )));
        }
        Ok(())
    }

    /// Same rule with twice the node density.
    pub fn refined(&self) -> Self {
        QuadratureSpec {
            nodes_per_unit: self.nodes_per_unit * 2,
            rule: self.rule,
        }
    }

    /// Interval count for a range of length `t_length` in the `t` variable.
    /// Simpson counts are rounded up to the next even number.
    pub fn intervals_for(&self, t_length: f64) -> usize {
        let raw = (t_length * self.nodes_per_unit as f64).ceil().max(1.0) as usize;
        match self.rule {
            Rule::Trapezoid => raw,
            Rule::Simpson => raw + raw % 2,
        }
    }

    /// Nodes and weights on `[a, b]` where one unit of `t` corresponds to
    /// `t_per_unit` units of the integration variable.
    pub fn panel(&self, a: f64, b: f64, t_per_unit: f64) -> Result<Panel> {
        let t_length = (b - a).abs() * t_per_unit;
        Panel::new(a, b, self.intervals_for(t_length), self.rule)
    }
}

/// A fixed set of uniformly spaced nodes with composite-rule weights.
#[derive(Debug, Clone)]
pub struct Panel {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub step: f64,
}

impl Panel {
    pub fn new(a: f64, b: f64, intervals: usize, rule: Rule) -> Result<Self> {
        if intervals == 0 {
            return Err(DeconvError::Quadrature("zero intervals".into()));
        }
        if !(a.is_finite() && b.is_finite()) || b < a {
            return Err(DeconvError::Quadrature(format!("bad range [{a}, {b}]")));
        }
        if rule == Rule::Simpson && intervals % 2 == 1 {
            return Err(DeconvError::Quadrature(format!(
                "composite Simpson needs an even number of intervals, got {intervals}"
            )));
        }
        let step = (b - a) / intervals as f64;
        let nodes: Vec<f64> = (0..=intervals)
            .map(|k| {
                if k == intervals {
                    b
                } else {
                    a + k as f64 * step
                }
            })
            .collect();
        let weights = (0..=intervals)
            .map(|k| {
                let interior = k != 0 && k != intervals;
                match rule {
                    Rule::Trapezoid => {
                        if interior {
                            step
                        } else {
                            0.5 * step
                        }
                    }
                    Rule::Simpson => {
                        let w = if !interior {
                            1.0
                        } else if k % 2 == 1 {
                            4.0
                        } else {
                            2.0
                        };
                        w * step / 3.0
                    }
                }
            })
            .collect();
        Ok(Panel {
            nodes,
            weights,
            step,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}
