//! Strongly convex quadratic components `f_{i,j}(theta) = 0.5 * ||A theta - b||^2`.
//!
//! The average Hessian is computed exactly at construction, which gives the
//! exact curvature interval and a closed-form global minimizer via the
//! normal equations. The synthetic generator controls heterogeneity (how
//! far apart the per-node targets sit) and within-node noise separately,
//! which is what the plateau experiments need.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::objective::FiniteSumObjective;
use crate::seeding;

#[derive(Debug, Clone)]
pub struct QuadraticComponent {
    /// Design matrix, any row count, column count = decision dimension.
    pub a: DMatrix<f64>,
    /// Target, length = row count of `a`.
    pub b: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct QuadraticObjective {
    components: Vec<Vec<QuadraticComponent>>,
    dim: usize,
    mu: f64,
    l: f64,
    minimizer: DVector<f64>,
}

impl QuadraticObjective {
    /// Validate shapes and precompute curvature and the exact minimizer.
    /// The average Hessian `(1/n) sum_i (1/m_i) sum_j A^T A` must be
    /// positive definite.
    pub fn new(components: Vec<Vec<QuadraticComponent>>) -> Result<Self> {
        if components.is_empty() || components.iter().any(|node| node.is_empty()) {
            return Err(Error::InvalidParameter(
                "every node needs at least one quadratic component".into(),
            ));
        }
        let dim = components[0][0].a.ncols();
        for (i, node) in components.iter().enumerate() {
            for (j, c) in node.iter().enumerate() {
                if c.a.ncols() != dim {
                    return Err(Error::DimensionMismatch(format!(
                        "component ({i}, {j}) has {} columns, expected {dim}",
                        c.a.ncols()
                    )));
                }
                if c.a.nrows() != c.b.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "component ({i}, {j}): {} rows vs target length {}",
                        c.a.nrows(),
                        c.b.len()
                    )));
                }
            }
        }
        let n = components.len() as f64;
        let mut hessian = DMatrix::zeros(dim, dim);
        let mut rhs = DVector::zeros(dim);
        for node in &components {
            let m = node.len() as f64;
            for c in node {
                hessian += c.a.transpose() * &c.a / (n * m);
                rhs += c.a.transpose() * &c.b / (n * m);
            }
        }
        let eigs = hessian.clone().symmetric_eigen().eigenvalues;
        let mu = eigs.min();
        let l = eigs.max();
        if mu <= 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "average Hessian is not positive definite (smallest eigenvalue {mu})"
            )));
        }
        let minimizer = hessian
            .cholesky()
            .ok_or_else(|| Error::SolverFailure("Cholesky failed on average Hessian".into()))?
            .solve(&rhs);
        Ok(QuadraticObjective { components, dim, mu, l, minimizer })
    }

    /// Random instance: node `i` gets components with targets scattered
    /// around a node center `c_i`, `||c_i|| ~ hetero`, with `noise` scaling
    /// the within-node scatter. With `shared_hessian` every component uses
    /// the identity design, making the problem perfectly conditioned and
    /// giving every component the same curvature.
    pub fn synthetic(
        n: usize,
        m: usize,
        dim: usize,
        hetero: f64,
        noise: f64,
        shared_hessian: bool,
        seed: u64,
    ) -> Result<Self> {
        if n == 0 || m == 0 || dim == 0 {
            return Err(Error::InvalidParameter(
                "synthetic quadratic needs n, m, dim >= 1".into(),
            ));
        }
        let mut rng = seeding::stream(seed, seeding::DOMAIN_DATA, 1, 0);
        fn gauss(rng: &mut rand_chacha::ChaCha8Rng, k: usize) -> DVector<f64> {
            DVector::from_fn(k, |_, _| StandardNormal.sample(rng))
        }
        let mut components = Vec::with_capacity(n);
        for _ in 0..n {
            let center = gauss(&mut rng, dim) * hetero;
            let mut node = Vec::with_capacity(m);
            for _ in 0..m {
                let a = if shared_hessian {
                    DMatrix::identity(dim, dim)
                } else {
                    // Gaussian design plus a ridge keeps the average Hessian
                    // comfortably positive definite at any size.
                    let g = DMatrix::from_fn(dim, dim, |_, _| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        z / (dim as f64).sqrt()
                    });
                    g + DMatrix::identity(dim, dim) * 0.75
                };
                let target = &center + gauss(&mut rng, dim) * noise;
                let b = &a * target;
                node.push(QuadraticComponent { a, b });
            }
            components.push(node);
        }
        Self::new(components)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn l_smooth(&self) -> f64 {
        self.l
    }
}

impl FiniteSumObjective for QuadraticObjective {
    fn nodes(&self) -> usize {
        self.components.len()
    }

    fn components(&self, node: usize) -> usize {
        self.components[node].len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn component_value(&self, node: usize, index: usize, theta: &DVector<f64>) -> f64 {
        let c = &self.components[node][index];
        (&c.a * theta - &c.b).norm_squared() / 2.0
    }

    fn component_gradient(&self, node: usize, index: usize, theta: &DVector<f64>) -> DVector<f64> {
        let c = &self.components[node][index];
        c.a.transpose() * (&c.a * theta - &c.b)
    }

    fn convexity_bounds(&self) -> (f64, f64) {
        (self.mu, self.l)
    }

    fn closed_form_minimizer(&self) -> Option<DVector<f64>> {
        Some(self.minimizer.clone())
    }
}
