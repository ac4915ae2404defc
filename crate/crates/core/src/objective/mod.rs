//! Finite-sum objectives distributed over network nodes.
//!
//! The global cost is `F(theta) = (1/n) * sum_i f_i(theta)` where each
//! node's local cost is itself an average of component costs,
//! `f_i = (1/m_i) * sum_j f_{i,j}`. Solvers only touch objectives through
//! the [`FiniteSumObjective`] trait: component counts, component values,
//! and component gradients, plus curvature bounds for step-size rules.

mod dataset;
mod logistic;
mod quadratic;

pub use dataset::{partition, Dataset, PartitionMode};
pub use logistic::LogisticObjective;
pub use quadratic::{QuadraticComponent, QuadraticObjective};

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};

pub trait FiniteSumObjective: Send + Sync {
    /// Number of network nodes the components are spread over.
    fn nodes(&self) -> usize;

    /// Number of components held by `node`.
    fn components(&self, node: usize) -> usize;

    /// Decision variable dimension.
    fn dim(&self) -> usize;

    fn component_value(&self, node: usize, index: usize, theta: &DVector<f64>) -> f64;

    fn component_gradient(&self, node: usize, index: usize, theta: &DVector<f64>)
        -> DVector<f64>;

    /// `(mu, L)`: a strong convexity lower bound and a smoothness upper
    /// bound for the global cost.
    fn convexity_bounds(&self) -> (f64, f64);

    /// Exact minimizer when one is computable in closed form.
    fn closed_form_minimizer(&self) -> Option<DVector<f64>> {
        None
    }
}

/// Local cost `f_i(theta)`, the average over node i's components.
pub fn local_value(obj: &dyn FiniteSumObjective, node: usize, theta: &DVector<f64>) -> f64 {
    let m = obj.components(node);
    let sum: f64 = (0..m).map(|j| obj.component_value(node, j, theta)).sum();
    sum / m as f64
}

/// Local batch gradient `grad f_i(theta)`. Summed first, divided once.
pub fn local_gradient(
    obj: &dyn FiniteSumObjective,
    node: usize,
    theta: &DVector<f64>,
) -> DVector<f64> {
    let m = obj.components(node);
    let mut g = DVector::zeros(obj.dim());
    for j in 0..m {
        g += obj.component_gradient(node, j, theta);
    }
    g / m as f64
}

/// Global cost `F(theta) = (1/n) sum_i f_i(theta)`.
pub fn global_value(obj: &dyn FiniteSumObjective, theta: &DVector<f64>) -> f64 {
    let n = obj.nodes();
    let sum: f64 = (0..n).map(|i| local_value(obj, i, theta)).sum();
    sum / n as f64
}

/// Global gradient `grad F(theta)`.
pub fn global_gradient(obj: &dyn FiniteSumObjective, theta: &DVector<f64>) -> DVector<f64> {
    let n = obj.nodes();
    let mut g = DVector::zeros(obj.dim());
    for i in 0..n {
        g += local_gradient(obj, i, theta);
    }
    g / n as f64
}

/// Total component count across all nodes.
pub fn total_components(obj: &dyn FiniteSumObjective) -> usize {
    (0..obj.nodes()).map(|i| obj.components(i)).sum()
}

/// Uniform view over all components, used by the centralized methods: the
/// objective `(1/M) * sum_s f_s` over the M components of every node in
/// node order. When all nodes hold the same number of components this
/// equals the network cost F.
pub struct FlatView<'a> {
    obj: &'a dyn FiniteSumObjective,
    pairs: Vec<(usize, usize)>,
}

impl<'a> FlatView<'a> {
    pub fn new(obj: &'a dyn FiniteSumObjective) -> Self {
        let mut pairs = Vec::with_capacity(total_components(obj));
        for i in 0..obj.nodes() {
            for j in 0..obj.components(i) {
                pairs.push((i, j));
            }
        }
        FlatView { obj, pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.obj.dim()
    }

    /// The (node, index) pair behind flat index `s`.
    pub fn locate(&self, s: usize) -> (usize, usize) {
        self.pairs[s]
    }

    pub fn value(&self, s: usize, theta: &DVector<f64>) -> f64 {
        let (i, j) = self.pairs[s];
        self.obj.component_value(i, j, theta)
    }

    pub fn gradient(&self, s: usize, theta: &DVector<f64>) -> DVector<f64> {
        let (i, j) = self.pairs[s];
        self.obj.component_gradient(i, j, theta)
    }

    /// `(1/M) * sum_s grad f_s(theta)`. Summed first, divided once.
    pub fn batch_gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim());
        for s in 0..self.len() {
            g += self.gradient(s, theta);
        }
        g / self.len() as f64
    }

    pub fn batch_value(&self, theta: &DVector<f64>) -> f64 {
        let sum: f64 = (0..self.len()).map(|s| self.value(s, theta)).sum();
        sum / self.len() as f64
    }
}

/// Problem constants that drive step-size rules and rate predictions.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ObjectiveStats {
    /// Strong convexity lower bound.
    pub mu: f64,
    /// Smoothness upper bound.
    pub l_smooth: f64,
    /// `l_smooth / mu`.
    pub kappa: f64,
    /// Exact variance of single-component gradients around their local
    /// batch gradient at the probe point, averaged over nodes:
    /// `(1/n) sum_i (1/m_i) sum_j ||grad f_{i,j} - grad f_i||^2`.
    pub sigma_sq: f64,
    /// Gradient heterogeneity at the reference point:
    /// `(1/n) sum_i ||grad f_i(theta_star)||^2`. Zero only when every
    /// node's local cost is minimized at the same point.
    pub hetero: f64,
}

/// Compute [`ObjectiveStats`] exactly by enumeration.
pub fn estimate_stats(
    obj: &dyn FiniteSumObjective,
    theta_star: &DVector<f64>,
    probe: &DVector<f64>,
) -> Result<ObjectiveStats> {
    if theta_star.len() != obj.dim() || probe.len() != obj.dim() {
        return Err(Error::DimensionMismatch(format!(
            "objective dimension {}, theta_star {}, probe {}",
            obj.dim(),
            theta_star.len(),
            probe.len()
        )));
    }
    let (mu, l_smooth) = obj.convexity_bounds();
    let n = obj.nodes();
    let mut sigma_sq = 0.0;
    let mut hetero = 0.0;
    for i in 0..n {
        let m = obj.components(i);
        let batch_probe = local_gradient(obj, i, probe);
        let mut var = 0.0;
        for j in 0..m {
            let diff = obj.component_gradient(i, j, probe) - &batch_probe;
            var += diff.norm_squared();
        }
        sigma_sq += var / m as f64;
        hetero += local_gradient(obj, i, theta_star).norm_squared();
    }
    sigma_sq /= n as f64;
    hetero /= n as f64;
    Ok(ObjectiveStats { mu, l_smooth, kappa: l_smooth / mu, sigma_sq, hetero })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two nodes, scalar quadratics f_{i,j} = 0.5 (theta - c_{i,j})^2 with
    /// hand-checkable centers.
    fn toy() -> QuadraticObjective {
        let comp = |c: f64| QuadraticComponent {
            a: nalgebra::DMatrix::identity(1, 1),
            b: DVector::from_vec(vec![c]),
        };
        QuadraticObjective::new(vec![
            vec![comp(0.0), comp(2.0)],
            vec![comp(4.0), comp(6.0)],
        ])
        .unwrap()
    }

    #[test]
    fn global_gradient_averages_local_gradients() {
        let obj = toy();
        let theta = DVector::from_vec(vec![1.0]);
        // local gradients: theta - 1 = 0 and theta - 5 = -4; global = -2
        assert!((local_gradient(&obj, 0, &theta)[0] - 0.0).abs() < 1e-15);
        assert!((local_gradient(&obj, 1, &theta)[0] + 4.0).abs() < 1e-15);
        assert!((global_gradient(&obj, &theta)[0] + 2.0).abs() < 1e-15);
        assert_eq!(total_components(&obj), 4);
    }

    #[test]
    fn flat_view_enumerates_components_in_node_order() {
        let obj = toy();
        let flat = FlatView::new(&obj);
        assert_eq!(flat.len(), 4);
        assert_eq!(flat.locate(0), (0, 0));
        assert_eq!(flat.locate(3), (1, 1));
        let theta = DVector::from_vec(vec![3.0]);
        // flat batch = mean of theta - c over c in {0,2,4,6} = 3 - 3 = 0
        assert!(flat.batch_gradient(&theta)[0].abs() < 1e-15);
        // equals the network gradient here because the split is balanced
        assert!((flat.batch_gradient(&theta) - global_gradient(&obj, &theta)).norm() < 1e-15);
    }

    #[test]
    fn stats_match_hand_computation() {
        let obj = toy();
        let star = obj.closed_form_minimizer().unwrap();
        assert!((star[0] - 3.0).abs() < 1e-12);
        let probe = DVector::from_vec(vec![0.0]);
        let stats = estimate_stats(&obj, &star, &probe).unwrap();
        // per-node component gradients at any theta deviate by +-1 from the
        // local batch gradient, so the variance is exactly 1 at every node
        assert!((stats.sigma_sq - 1.0).abs() < 1e-15);
        // local batch gradients at theta* = 3: (3-1) = 2 and (3-5) = -2
        assert!((stats.hetero - 4.0).abs() < 1e-15);
        assert!((stats.mu - 1.0).abs() < 1e-12);
        assert!((stats.l_smooth - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stats_reject_dimension_mismatch() {
        let obj = toy();
        let ok = DVector::zeros(1);
        let bad = DVector::zeros(2);
        assert!(estimate_stats(&obj, &bad, &ok).is_err());
        assert!(estimate_stats(&obj, &ok, &bad).is_err());
    }
}
