//! Decentralized optimization over a mixing matrix.
//!
//! All methods advance in synchronous rounds. In one round every node
//! exchanges its state stack with its neighbors (one consensus application
//! per exchanged stack), takes a gradient step, and the tracked variants
//! additionally run one dynamic-average-consensus update of the tracker:
//!
//! - [`Dgd`]: `theta <- W theta - alpha_k * grad f_i(theta_i)`, full local
//!   batch per round.
//! - [`Dsgd`]: same with one sampled component per node per round.
//! - [`GtDgd`]: descends along a tracker `d` instead of the raw local
//!   gradient, `d <- W d + g_new - g_old`, which removes the heterogeneity
//!   plateau of plain DGD.
//! - [`GtDsgd`]: gradient tracking over single-sample estimates.
//! - [`GtSaga`]: gradient tracking over per-node SAGA estimators backed by
//!   local gradient tables.
//! - [`GtSvrg`]: gradient tracking over per-node SVRG estimators with
//!   anchored inner loops; the tracker and estimator carry across loop
//!   boundaries.
//!
//! Samples are drawn from position-indexed streams: the component a node
//! applies at the iterate of round k comes from position k (inner-loop
//! methods use the `outer * (t + 1) + j` convention). With a single node
//! and the same seed, each method consumes exactly the draws of its
//! centralized counterpart and reproduces its trajectory.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mixing::MixingMatrix;
use crate::objective::{local_gradient, FiniteSumObjective};
use crate::reference::{GradientTable, SvrgOption, DIVERGENCE_LIMIT};
use crate::schedule::StepSchedule;
use crate::seeding;
use crate::stack::{self, Stack};

/// A round-based decentralized method.
pub trait DecentralizedMethod {
    /// Execute one synchronous communication round.
    fn round(&mut self) -> Result<()>;

    /// Number of completed rounds.
    fn round_index(&self) -> u64;

    /// Current stacked iterates, one row per node.
    fn thetas(&self) -> &Stack;

    /// Gradient tracker stack, for methods that maintain one.
    fn tracker(&self) -> Option<&Stack> {
        None
    }

    /// Current per-node gradient estimates feeding the tracker.
    fn estimates(&self) -> Option<&Stack> {
        None
    }

    /// Cumulative component-gradient evaluations per node.
    fn evals(&self) -> &[u64];

    /// Cumulative point-to-point stack messages (each edge carries one in
    /// each direction per exchanged stack).
    fn messages(&self) -> u64;
}

/// Mean squared deviation of the node iterates from their average.
pub fn consensus_error(thetas: &Stack) -> f64 {
    stack::mean_sq_deviation(thetas)
}

/// Mean squared deviation of the tracker rows from the network-average
/// gradient estimate, `(1/n) sum_i ||d_i - mean_r(g_r)||^2`.
pub fn tracking_error(tracker: &Stack, estimates: &Stack) -> f64 {
    assert_eq!(tracker.shape(), estimates.shape(), "tracker/estimate shape mismatch");
    let mean = stack::mean_row(estimates);
    let n = tracker.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        let mut d = 0.0;
        for j in 0..tracker.ncols() {
            let e = tracker[(i, j)] - mean[j];
            d += e * e;
        }
        acc += d;
    }
    acc / n as f64
}

/// Shared per-method state: network, counters, shape checks.
struct Net {
    mixing: MixingMatrix,
    obj: Arc<dyn FiniteSumObjective>,
    theta: Stack,
    round: u64,
    evals: Vec<u64>,
    messages: u64,
    /// Messages generated by one consensus application: one per directed
    /// edge.
    exchange: u64,
}

impl Net {
    fn new(mixing: MixingMatrix, obj: Arc<dyn FiniteSumObjective>, theta0: Stack) -> Result<Self> {
        let n = mixing.n();
        if obj.nodes() != n {
            return Err(Error::DimensionMismatch(format!(
                "objective spans {} nodes, mixing matrix {} nodes",
                obj.nodes(),
                n
            )));
        }
        if theta0.nrows() != n || theta0.ncols() != obj.dim() {
            return Err(Error::DimensionMismatch(format!(
                "initial stack is {}x{}, want {}x{}",
                theta0.nrows(),
                theta0.ncols(),
                n,
                obj.dim()
            )));
        }
        let w = mixing.w();
        let mut exchange = 0;
        for i in 0..n {
            for r in 0..n {
                if i != r && w[(i, r)] != 0.0 {
                    exchange += 1;
                }
            }
        }
        Ok(Net {
            mixing,
            obj,
            theta: theta0,
            round: 0,
            evals: vec![0; n],
            messages: 0,
            exchange,
        })
    }

    fn guard(&self) -> Result<()> {
        if stack::max_row_norm(&self.theta) > DIVERGENCE_LIMIT {
            return Err(Error::Diverged { round: self.round + 1, limit: DIVERGENCE_LIMIT });
        }
        Ok(())
    }

    /// Local batch gradients at the current iterates, charging m_i per node.
    fn batch_grads(&mut self, at: &Stack) -> Stack {
        let n = self.mixing.n();
        let mut g = Stack::zeros(n, self.obj.dim());
        for i in 0..n {
            let gi = local_gradient(self.obj.as_ref(), i, &stack::row(at, i));
            g.row_mut(i).copy_from(&gi.transpose());
            self.evals[i] += self.obj.components(i) as u64;
        }
        g
    }
}

// ---------------------------------------------------------------------------
// plain consensus methods
// ---------------------------------------------------------------------------

pub struct Dgd {
    net: Net,
    schedule: StepSchedule,
}

impl Dgd {
    pub fn new(
        mixing: MixingMatrix,
        obj: Arc<dyn FiniteSumObjective>,
        theta0: Stack,
        schedule: StepSchedule,
    ) -> Result<Self> {
        Ok(Dgd { net: Net::new(mixing, obj, theta0)?, schedule })
    }
}

impl DecentralizedMethod for Dgd {
    fn round(&mut self) -> Result<()> {
        let alpha = self.schedule.at(self.net.round);
        let grads = self.net.batch_grads(&self.net.theta.clone());
        let mixed = self.net.mixing.consensus_step(&self.net.theta)?;
        self.net.theta = mixed - grads * alpha;
        self.net.messages += self.net.exchange;
        self.net.guard()?;
        self.net.round += 1;
        Ok(())
    }

    fn round_index(&self) -> u64 {
        self.net.round
    }

    fn thetas(&self) -> &Stack {
        &self.net.theta
    }

    fn evals(&self) -> &[u64] {
        &self.net.evals
    }

    fn messages(&self) -> u64 {
        self.net.messages
    }
}

pub struct Dsgd {
    net: Net,
    schedule: StepSchedule,
    seed: u64,
}

impl Dsgd {
    pub fn new(
        mixing: MixingMatrix,
        obj: Arc<dyn FiniteSumObjective>,
        theta0: Stack,
        schedule: StepSchedule,
        seed: u64,
    ) -> Result<Self> {
        Ok(Dsgd { net: Net::new(mixing, obj, theta0)?, schedule, seed })
    }
}

impl DecentralizedMethod for Dsgd {
    fn round(&mut self) -> Result<()> {
        let k = self.net.round;
        let alpha = self.schedule.at(k);
        let n = self.net.mixing.n();
        let mut grads = Stack::zeros(n, self.net.obj.dim());
        for i in 0..n {
            let m = self.net.obj.components(i);
            let s = seeding::component_at(self.seed, i, k, m);
            let gi = self.net.obj.component_gradient(i, s, &stack::row(&self.net.theta, i));
            grads.row_mut(i).copy_from(&gi.transpose());
            self.net.evals[i] += 1;
        }
        let mixed = self.net.mixing.consensus_step(&self.net.theta)?;
        self.net.theta = mixed - grads * alpha;
        self.net.messages += self.net.exchange;
        self.net.guard()?;
        self.net.round += 1;
        Ok(())
    }

    fn round_index(&self) -> u64 {
        self.net.round
    }

    fn thetas(&self) -> &Stack {
        &self.net.theta
    }

    fn evals(&self) -> &[u64] {
        &self.net.evals
    }

    fn messages(&self) -> u64 {
        self.net.messages
    }
}

// ---------------------------------------------------------------------------
// gradient tracking methods
// ---------------------------------------------------------------------------

pub struct GtDgd {
    net: Net,
    schedule: StepSchedule,
    d: Stack,
    g_prev: Stack,
}

impl GtDgd {
    pub fn new(
        mixing: MixingMatrix,
        obj: Arc<dyn FiniteSumObjective>,
        theta0: Stack,
        schedule: StepSchedule,
    ) -> Result<Self> {
        let mut net = Net::new(mixing, obj, theta0)?;
        // tracker starts at the local batch gradients, so its mean equals
        // the global gradient from round zero on
        let g0 = net.batch_grads(&net.theta.clone());
        Ok(GtDgd { net, schedule, d: g0.clone(), g_prev: g0 })
    }
}

impl DecentralizedMethod for GtDgd {
    fn round(&mut self) -> Result<()> {
        let alpha = self.schedule.at(self.net.round);
        let mixed = self.net.mixing.consensus_step(&self.net.theta)?;
        self.net.theta = mixed - &self.d * alpha;
        let g_new = self.net.batch_grads(&self.net.theta.clone());
        self.d = self.net.mixing.dac_step(&self.d, &g_new, &self.g_prev)?;
        self.g_prev = g_new;
        self.net.messages += 2 * self.net.exchange;
        self.net.guard()?;
        self.net.round += 1;
        Ok(())
    }

    fn round_index(&self) -> u64 {
        self.net.round
    }

    fn thetas(&self) -> &Stack {
        &self.net.theta
    }

    fn tracker(&self) -> Option<&Stack> {
        Some(&self.d)
    }

    fn estimates(&self) -> Option<&Stack> {
        Some(&self.g_prev)
    }

    fn evals(&self) -> &[u64] {
        &self.net.evals
    }

    fn messages(&self) -> u64 {
        self.net.messages
    }
}

pub struct GtDsgd {
    net: Net,
    schedule: StepSchedule,
    seed: u64,
    d: Stack,
    g_prev: Stack,
}

impl GtDsgd {
    pub fn new(
        mixing: MixingMatrix,
        obj: Arc<dyn FiniteSumObjective>,
        theta0: Stack,
        schedule: StepSchedule,
        seed: u64,
    ) -> Result<Self> {
        let mut net = Net::new(mixing, obj, theta0)?;
        let n = net.mixing.n();
        let mut g0 = Stack::zeros(n, net.obj.dim());
        for i in 0..n {
            let m = net.obj.components(i);
            let s = seeding::component_at(seed, i, 0, m);
            let gi = net.obj.component_gradient(i, s, &stack::row(&net.theta, i));
            g0.row_mut(i).copy_from(&gi.transpose());
            net.evals[i] += 1;
        }
        Ok(GtDsgd { net, schedule, seed, d: g0.clone(), g_prev: g0 })
    }
}

impl DecentralizedMethod for GtDsgd {
    fn round(&mut self) -> Result<()> {
        let k = self.net.round;
        let alpha = self.schedule.at(k);
        let mixed = self.net.mixing.consensus_step(&self.net.theta)?;
        self.net.theta = mixed - &self.d * alpha;
        // the sample for the new iterate lives at position k + 1
        let n = self.net.mixing.n();
        let mut g_new = Stack::zeros(n, self.net.obj.dim());
        for i in 0..n {
            let m = self.net.obj.components(i);
            let s = seeding::component_at(self.seed, i, k + 1, m);
            let gi = self.net.obj.component_gradient(i, s, &stack::row(&self.net.theta, i));
            g_new.row_mut(i).copy_from(&gi.transpose());
            self.net.evals[i] += 1;
        }
        self.d = self.net.mixing.dac_step(&self.d, &g_new, &self.g_prev)?;
        self.g_prev = g_new;
        self.net.messages += 2 * self.net.exchange;
        self.net.guard()?;
        self.net.round += 1;
        Ok(())
    }

    fn round_index(&self) -> u64 {
        self.net.round
    }

    fn thetas(&self) -> &Stack {
        &self.net.theta
    }

    fn tracker(&self) -> Option<&Stack> {
        Some(&self.d)
    }

    fn estimates(&self) -> Option<&Stack> {
        Some(&self.g_prev)
    }

    fn evals(&self) -> &[u64] {
        &self.net.evals
    }

    fn messages(&self) -> u64 {
        self.net.messages
    }
}

pub struct GtSaga {
    net: Net,
    alpha: f64,
    seed: u64,
    d: Stack,
    g_prev: Stack,
    tables: Vec<GradientTable>,
}

impl GtSaga {
    /// Tables are filled with every component gradient at the start point
    /// (one local pass per node); the tracker starts at the table averages,
    /// the local batch gradients.
    pub fn new(
        mixing: MixingMatrix,
        obj: Arc<dyn FiniteSumObjective>,
        theta0: Stack,
        alpha: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "step size must be positive, got {alpha}"
            )));
        }
        let mut net = Net::new(mixing, obj, theta0)?;
        let n = net.mixing.n();
        let mut tables = Vec::with_capacity(n);
        let mut g0 = Stack::zeros(n, net.obj.dim());
        for i in 0..n {
            let ti = stack::row(&net.theta, i);
            let m = net.obj.components(i);
            let table = GradientTable::new(
                (0..m).map(|j| net.obj.component_gradient(i, j, &ti)).collect(),
            );
            net.evals[i] += m as u64;
            g0.row_mut(i).copy_from(&table.average().transpose());
            tables.push(table);
        }
        Ok(GtSaga { net, alpha, seed, d: g0.clone(), g_prev: g0, tables })
    }
}

impl DecentralizedMethod for GtSaga {
    fn round(&mut self) -> Result<()> {
        let k = self.net.round;
        let mixed = self.net.mixing.consensus_step(&self.net.theta)?;
        self.net.theta = mixed - &self.d * self.alpha;
        let n = self.net.mixing.n();
        let mut g_new = Stack::zeros(n, self.net.obj.dim());
        for i in 0..n {
            let m = self.net.obj.components(i);
            let s = seeding::component_at(self.seed, i, k + 1, m);
            let fresh = self.net.obj.component_gradient(i, s, &stack::row(&self.net.theta, i));
            self.net.evals[i] += 1;
            // estimator first, then the table entry is replaced
            let est = (&fresh - self.tables[i].entry(s)) + self.tables[i].average();
            self.tables[i].update(s, fresh);
            g_new.row_mut(i).copy_from(&est.transpose());
        }
        self.d = self.net.mixing.dac_step(&self.d, &g_new, &self.g_prev)?;
        self.g_prev = g_new;
        self.net.messages += 2 * self.net.exchange;
        self.net.guard()?;
        self.net.round += 1;
        Ok(())
    }

    fn round_index(&self) -> u64 {
        self.net.round
    }

    fn thetas(&self) -> &Stack {
        &self.net.theta
    }

    fn tracker(&self) -> Option<&Stack> {
        Some(&self.d)
    }

    fn estimates(&self) -> Option<&Stack> {
        Some(&self.g_prev)
    }

    fn evals(&self) -> &[u64] {
        &self.net.evals
    }

    fn messages(&self) -> u64 {
        self.net.messages
    }
}

pub struct GtSvrg {
    net: Net,
    alpha: f64,
    t_inner: u64,
    option: SvrgOption,
    seed: u64,
    d: Stack,
    v: Stack,
    anchor: Stack,
    anchor_grad: Stack,
    stale: bool,
    t: u64,
    outer: u64,
    inner_sum: Stack,
    picks: Vec<u64>,
    picked: Stack,
}

impl GtSvrg {
    /// Loop zero anchors at the start point; its anchor batch doubles as
    /// the initial tracker and estimator. Later anchors are charged lazily
    /// at the first round of their loop.
    pub fn new(
        mixing: MixingMatrix,
        obj: Arc<dyn FiniteSumObjective>,
        theta0: Stack,
        alpha: f64,
        t_inner: u64,
        option: SvrgOption,
        seed: u64,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "step size must be positive, got {alpha}"
            )));
        }
        if t_inner == 0 {
            return Err(Error::InvalidParameter("inner loop length must be at least 1".into()));
        }
        let mut net = Net::new(mixing, obj, theta0)?;
        let anchor = net.theta.clone();
        let anchor_grad = net.batch_grads(&anchor);
        let n = net.mixing.n();
        let picks = match option {
            SvrgOption::Pick => (0..n)
                .map(|i| seeding::component_at(seed, i, 0, t_inner as usize) as u64)
                .collect(),
            _ => vec![0; n],
        };
        Ok(GtSvrg {
            inner_sum: net.theta.clone(),
            picked: net.theta.clone(),
            d: anchor_grad.clone(),
            v: anchor_grad.clone(),
            anchor,
            anchor_grad,
            stale: false,
            t: 0,
            outer: 0,
            picks,
            net,
            alpha,
            t_inner,
            option,
            seed,
        })
    }

    /// Completed inner loops.
    pub fn outer_loops(&self) -> u64 {
        self.outer
    }
}

impl DecentralizedMethod for GtSvrg {
    fn round(&mut self) -> Result<()> {
        if self.stale {
            self.anchor_grad = self.net.batch_grads(&self.anchor.clone());
            self.stale = false;
        }
        let mixed = self.net.mixing.consensus_step(&self.net.theta)?;
        self.net.theta = mixed - &self.d * self.alpha;
        self.t += 1;
        let n = self.net.mixing.n();
        let mut v_new = Stack::zeros(n, self.net.obj.dim());
        for i in 0..n {
            let m = self.net.obj.components(i);
            let s =
                seeding::component_at(self.seed, i, self.outer * (self.t_inner + 1) + self.t, m);
            let at_iterate =
                self.net.obj.component_gradient(i, s, &stack::row(&self.net.theta, i));
            let at_anchor = self.net.obj.component_gradient(i, s, &stack::row(&self.anchor, i));
            self.net.evals[i] += 2;
            let vi = (at_iterate - at_anchor) + stack::row(&self.anchor_grad, i);
            v_new.row_mut(i).copy_from(&vi.transpose());
        }
        self.d = self.net.mixing.dac_step(&self.d, &v_new, &self.v)?;
        self.v = v_new;
        if self.t < self.t_inner {
            self.inner_sum += &self.net.theta;
            for i in 0..n {
                if self.option == SvrgOption::Pick && self.picks[i] == self.t {
                    self.picked.row_mut(i).copy_from(&self.net.theta.row(i));
                }
            }
        } else {
            let next = match self.option {
                SvrgOption::Last => self.net.theta.clone(),
                SvrgOption::Average => &self.inner_sum / self.t_inner as f64,
                SvrgOption::Pick => self.picked.clone(),
            };
            self.outer += 1;
            self.t = 0;
            self.anchor = next.clone();
            self.stale = true;
            self.net.theta = next.clone();
            self.inner_sum = next.clone();
            if self.option == SvrgOption::Pick {
                for i in 0..n {
                    self.picks[i] = seeding::component_at(
                        self.seed,
                        i,
                        self.outer * (self.t_inner + 1),
                        self.t_inner as usize,
                    ) as u64;
                }
                self.picked = next;
            }
        }
        self.net.messages += 2 * self.net.exchange;
        self.net.guard()?;
        self.net.round += 1;
        Ok(())
    }

    fn round_index(&self) -> u64 {
        self.net.round
    }

    fn thetas(&self) -> &Stack {
        &self.net.theta
    }

    fn tracker(&self) -> Option<&Stack> {
        Some(&self.d)
    }

    fn estimates(&self) -> Option<&Stack> {
        Some(&self.v)
    }

    fn evals(&self) -> &[u64] {
        &self.net.evals
    }

    fn messages(&self) -> u64 {
        self.net.messages
    }
}
