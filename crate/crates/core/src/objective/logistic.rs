//! Regularized logistic regression over a partitioned dataset.
//!
//! Component cost for sample (x, y), y in {-1, +1}, with weights w and
//! intercept c (theta = [w; c], the intercept is unregularized):
//!
//! ```text
//! f(theta) = ln(1 + exp(-(w.x + c) y)) + (reg/2) ||w||^2
//! ```
//!
//! Values use the stable softplus form, gradients use the stable sigmoid;
//! neither overflows for any margin.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::objective::{Dataset, FiniteSumObjective};

#[derive(Debug, Clone)]
struct Sample {
    x: DVector<f64>,
    y: f64,
}

#[derive(Debug, Clone)]
pub struct LogisticObjective {
    nodes: Vec<Vec<Sample>>,
    reg: f64,
    /// Feature dimension; the decision variable has one extra intercept
    /// coordinate.
    features: usize,
}

/// ln(1 + e^t) without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// 1 / (1 + e^-t) without overflow.
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl LogisticObjective {
    /// Distribute `dataset` over nodes according to `assignment` (per-node
    /// lists of sample indices). `reg` defaults to `1 / total samples` when
    /// `None`.
    pub fn new(dataset: &Dataset, assignment: &[Vec<usize>], reg: Option<f64>) -> Result<Self> {
        if assignment.is_empty() || assignment.iter().any(|node| node.is_empty()) {
            return Err(Error::InvalidParameter(
                "every node needs at least one sample".into(),
            ));
        }
        let total: usize = assignment.iter().map(|a| a.len()).sum();
        let reg = reg.unwrap_or(1.0 / total as f64);
        if !(reg > 0.0 && reg.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "regularization must be positive, got {reg}"
            )));
        }
        let mut nodes = Vec::with_capacity(assignment.len());
        for node in assignment {
            let mut samples = Vec::with_capacity(node.len());
            for &s in node {
                if s >= dataset.len() {
                    return Err(Error::InvalidParameter(format!(
                        "sample index {s} out of range"
                    )));
                }
                samples.push(Sample { x: dataset.feature(s).clone(), y: dataset.label(s) });
            }
            nodes.push(samples);
        }
        Ok(LogisticObjective { nodes, reg, features: dataset.dim() })
    }

    /// All samples on a single node.
    pub fn centralized(dataset: &Dataset, reg: Option<f64>) -> Result<Self> {
        let all: Vec<usize> = (0..dataset.len()).collect();
        Self::new(dataset, &[all], reg)
    }

    pub fn reg(&self) -> f64 {
        self.reg
    }

    fn margin(&self, s: &Sample, theta: &DVector<f64>) -> f64 {
        let mut dot = 0.0;
        for j in 0..self.features {
            dot += s.x[j] * theta[j];
        }
        (dot + theta[self.features]) * s.y
    }
}

impl FiniteSumObjective for LogisticObjective {
    fn nodes(&self) -> usize {
        self.nodes.len()
    }

    fn components(&self, node: usize) -> usize {
        self.nodes[node].len()
    }

    fn dim(&self) -> usize {
        self.features + 1
    }

    fn component_value(&self, node: usize, index: usize, theta: &DVector<f64>) -> f64 {
        let s = &self.nodes[node][index];
        let mut sq = 0.0;
        for j in 0..self.features {
            sq += theta[j] * theta[j];
        }
        softplus(-self.margin(s, theta)) + self.reg / 2.0 * sq
    }

    fn component_gradient(&self, node: usize, index: usize, theta: &DVector<f64>) -> DVector<f64> {
        let s = &self.nodes[node][index];
        let m = self.margin(s, theta);
        // d/dm softplus(-m) = -sigmoid(-m)
        let coeff = -sigmoid(-m) * s.y;
        let mut g = DVector::zeros(self.features + 1);
        for j in 0..self.features {
            g[j] = coeff * s.x[j] + self.reg * theta[j];
        }
        g[self.features] = coeff;
        g
    }

    fn convexity_bounds(&self) -> (f64, f64) {
        // The logistic Hessian of one sample is bounded by
        // 0.25 * (x, 1)(x, 1)^T; the ridge adds reg on the weight block and
        // lower bounds the curvature there. The intercept direction carries
        // only the (strictly positive but unbounded-below) logistic
        // curvature, so reg is the honest lower bound reported.
        let max_sq = self
            .nodes
            .iter()
            .flatten()
            .map(|s| s.x.norm_squared() + 1.0)
            .fold(0.0, f64::max);
        (self.reg, self.reg + max_sq / 4.0)
    }
}
