//! Centralized reference methods over the flat component view.
//!
//! These are the single-machine baselines the decentralized methods are
//! measured against: full gradient descent, stochastic gradient descent,
//! and the variance-reduced pair SAGA and SVRG. All of them run on the
//! uniform average of every component in the problem, record one iterate
//! per round, and count component gradient evaluations the same way the
//! network methods do, so traces line up on both the round and the epoch
//! axis.
//!
//! Stochastic draws come from the shared position-indexed streams: the
//! sample applied at iterate k is the draw at position k (inner loops use
//! the `outer * (t + 1) + j` convention). A single-node network run of the
//! matching decentralized method therefore consumes identical samples.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::objective::{global_gradient, global_value, FiniteSumObjective, FlatView};
use crate::schedule::StepSchedule;
use crate::seeding;

/// Iterate norms beyond this abort a run as divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// How SVRG selects the next anchor from an inner loop's iterates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SvrgOption {
    /// Last inner iterate.
    Last,
    /// Average of the inner iterates.
    #[default]
    Average,
    /// Uniformly random inner iterate.
    Pick,
}

/// One centralized run: iterate k is the state after k rounds, and
/// `evals[k]` is the cumulative component-gradient count at that point.
#[derive(Debug, Clone)]
pub struct CentralRun {
    pub iterates: Vec<DVector<f64>>,
    pub evals: Vec<u64>,
}

impl CentralRun {
    pub fn last(&self) -> &DVector<f64> {
        self.iterates.last().expect("runs hold at least the initial iterate")
    }
}

fn guard(theta: &DVector<f64>, round: u64) -> Result<()> {
    if theta.norm() > DIVERGENCE_LIMIT {
        return Err(Error::Diverged { round, limit: DIVERGENCE_LIMIT });
    }
    Ok(())
}

/// Table of the most recent component gradients, with a compensated running
/// sum so the average stays within 1e-12 of the entry mean under any update
/// sequence.
#[derive(Debug, Clone)]
pub struct GradientTable {
    entries: Vec<DVector<f64>>,
    sum: DVector<f64>,
    comp: DVector<f64>,
}

fn neumaier_add(sum: &mut f64, comp: &mut f64, v: f64) {
    let t = *sum + v;
    if sum.abs() >= v.abs() {
        *comp += (*sum - t) + v;
    } else {
        *comp += (v - t) + *sum;
    }
    *sum = t;
}

impl GradientTable {
    pub fn new(entries: Vec<DVector<f64>>) -> Self {
        assert!(!entries.is_empty(), "gradient table cannot be empty");
        let dim = entries[0].len();
        let mut sum = DVector::zeros(dim);
        let mut comp = DVector::zeros(dim);
        for e in &entries {
            assert_eq!(e.len(), dim, "inconsistent gradient dimensions");
            for j in 0..dim {
                neumaier_add(&mut sum[j], &mut comp[j], e[j]);
            }
        }
        GradientTable { entries, sum, comp }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, s: usize) -> &DVector<f64> {
        &self.entries[s]
    }

    /// Mean of the current entries.
    pub fn average(&self) -> DVector<f64> {
        let n = self.len() as f64;
        DVector::from_fn(self.sum.len(), |j, _| (self.sum[j] + self.comp[j]) / n)
    }

    /// Replace entry `s`, folding the difference into the running sum.
    pub fn update(&mut self, s: usize, g: DVector<f64>) {
        assert_eq!(g.len(), self.sum.len(), "gradient dimension mismatch");
        for j in 0..g.len() {
            neumaier_add(&mut self.sum[j], &mut self.comp[j], g[j] - self.entries[s][j]);
        }
        self.entries[s] = g;
    }
}

/// Full gradient descent: `theta_{k+1} = theta_k - alpha_k * grad(theta_k)`.
/// Costs every component gradient each round.
pub fn gd_run(
    obj: &dyn FiniteSumObjective,
    theta0: &DVector<f64>,
    schedule: StepSchedule,
    rounds: u64,
) -> Result<CentralRun> {
    let flat = FlatView::new(obj);
    let m = flat.len() as u64;
    let mut theta = theta0.clone();
    guard(&theta, 0)?;
    let mut run = CentralRun { iterates: vec![theta.clone()], evals: vec![0] };
    for k in 0..rounds {
        let g = flat.batch_gradient(&theta);
        theta -= g * schedule.at(k);
        guard(&theta, k + 1)?;
        run.iterates.push(theta.clone());
        run.evals.push((k + 1) * m);
    }
    Ok(run)
}

/// Stochastic gradient descent on uniformly drawn components:
/// `theta_{k+1} = theta_k - alpha_k * grad f_{s_k}(theta_k)`.
pub fn sgd_run(
    obj: &dyn FiniteSumObjective,
    theta0: &DVector<f64>,
    schedule: StepSchedule,
    rounds: u64,
    seed: u64,
) -> Result<CentralRun> {
    let flat = FlatView::new(obj);
    let mut theta = theta0.clone();
    guard(&theta, 0)?;
    let mut run = CentralRun { iterates: vec![theta.clone()], evals: vec![0] };
    for k in 0..rounds {
        let s = seeding::component_at(seed, 0, k, flat.len());
        let g = flat.gradient(s, &theta);
        theta -= g * schedule.at(k);
        guard(&theta, k + 1)?;
        run.iterates.push(theta.clone());
        run.evals.push(k + 1);
    }
    Ok(run)
}

/// SAGA with a constant step size. Each round draws a component, forms the
/// estimator
///
/// ```text
/// g_k = grad f_s(theta_k) - table[s] + mean(table)
/// ```
///
/// and only then replaces `table[s]` with the fresh gradient. The table is
/// initialized with every component gradient at the starting point (charged
/// as one full pass).
pub fn saga_run(
    obj: &dyn FiniteSumObjective,
    theta0: &DVector<f64>,
    alpha: f64,
    rounds: u64,
    seed: u64,
) -> Result<CentralRun> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("step size must be positive, got {alpha}")));
    }
    let flat = FlatView::new(obj);
    let m = flat.len();
    let mut theta = theta0.clone();
    guard(&theta, 0)?;
    let mut table =
        GradientTable::new((0..m).map(|s| flat.gradient(s, &theta)).collect());
    let mut run = CentralRun { iterates: vec![theta.clone()], evals: vec![m as u64] };
    for k in 0..rounds {
        let s = seeding::component_at(seed, 0, k, m);
        let fresh = flat.gradient(s, &theta);
        let est = (&fresh - table.entry(s)) + table.average();
        table.update(s, fresh);
        theta -= est * alpha;
        guard(&theta, k + 1)?;
        run.iterates.push(theta.clone());
        run.evals.push(m as u64 + k + 1);
    }
    Ok(run)
}

/// SVRG with inner loops of length `t_inner`. One round is one inner step,
/// so `rounds` counts inner steps in total and the anchor jump happens
/// inside the loop-closing round.
///
/// Loop k anchors at `theta_k`, pays one full pass for the anchor gradient
/// (charged lazily at the loop's first round), then runs `t_inner` steps of
///
/// ```text
/// w_{t+1} = w_t - alpha * v_t
/// v_{t+1} = grad f_s(w_{t+1}) - grad f_s(anchor) + grad F(anchor)
/// ```
///
/// at two component evaluations each. The estimator `v` carries across the
/// loop boundary: the first step of loop k+1 reuses the last estimator of
/// loop k rather than restarting from the fresh anchor batch, matching the
/// tracked decentralized variant. The anchor jump follows `option`.
pub fn svrg_run(
    obj: &dyn FiniteSumObjective,
    theta0: &DVector<f64>,
    alpha: f64,
    t_inner: u64,
    rounds: u64,
    option: SvrgOption,
    seed: u64,
) -> Result<CentralRun> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("step size must be positive, got {alpha}")));
    }
    if t_inner == 0 {
        return Err(Error::InvalidParameter("inner loop length must be at least 1".into()));
    }
    let flat = FlatView::new(obj);
    let m = flat.len();
    let mut w = theta0.clone();
    guard(&w, 0)?;
    let mut anchor = w.clone();
    let mut anchor_grad = flat.batch_gradient(&anchor);
    let mut stale = false;
    let mut v = anchor_grad.clone();
    let mut inner_sum = w.clone();
    let mut outer: u64 = 0;
    let mut t: u64 = 0;
    let mut pick = match option {
        SvrgOption::Pick => seeding::component_at(seed, 0, 0, t_inner as usize) as u64,
        _ => 0,
    };
    let mut picked = w.clone();
    let mut evals = m as u64;
    let mut run = CentralRun { iterates: vec![w.clone()], evals: vec![evals] };
    for r in 0..rounds {
        if stale {
            anchor_grad = flat.batch_gradient(&anchor);
            evals += m as u64;
            stale = false;
        }
        w -= &v * alpha;
        t += 1;
        let s = seeding::component_at(seed, 0, outer * (t_inner + 1) + t, m);
        v = (flat.gradient(s, &w) - flat.gradient(s, &anchor)) + &anchor_grad;
        evals += 2;
        if t < t_inner {
            inner_sum += &w;
            if option == SvrgOption::Pick && t == pick {
                picked = w.clone();
            }
        } else {
            let next = match option {
                SvrgOption::Last => w.clone(),
                SvrgOption::Average => &inner_sum / t_inner as f64,
                SvrgOption::Pick => picked.clone(),
            };
            outer += 1;
            t = 0;
            anchor = next.clone();
            stale = true;
            w = next.clone();
            inner_sum = next.clone();
            if option == SvrgOption::Pick {
                pick = seeding::component_at(seed, 0, outer * (t_inner + 1), t_inner as usize)
                    as u64;
                picked = next;
            }
        }
        guard(&w, r + 1)?;
        run.iterates.push(w.clone());
        run.evals.push(evals);
    }
    Ok(run)
}

/// Solve for the global minimizer to gradient-norm tolerance `tol`.
///
/// Closed forms are used when the objective offers one (polished by descent
/// if it somehow misses the tolerance); otherwise full gradient descent
/// with adaptive backtracking line search (Armijo constant 1e-4, halving)
/// runs from zero.
///
/// Logistic problems over (nearly) separable data may fail at tight
/// tolerances: the intercept is unregularized, so the minimizer in that
/// direction recedes toward infinity and the gradient norm decays only
/// sublinearly. That surfaces as `SolverFailure`, not an endless loop.
pub fn solve_reference(
    obj: &dyn FiniteSumObjective,
    tol: f64,
    max_rounds: u64,
) -> Result<DVector<f64>> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let start = match obj.closed_form_minimizer() {
        Some(star) => {
            if global_gradient(obj, &star).norm() <= tol {
                return Ok(star);
            }
            star
        }
        None => DVector::zeros(obj.dim()),
    };
    let (_, l) = obj.convexity_bounds();
    let mut theta = start;
    let mut alpha = 1.0 / l;
    for round in 0..max_rounds {
        let g = global_gradient(obj, &theta);
        let g_norm = g.norm();
        if g_norm <= tol {
            return Ok(theta);
        }
        let value = global_value(obj, &theta);
        alpha = (alpha * 2.0).min(1e6);
        let mut backtracks = 0;
        loop {
            let candidate = &theta - &g * alpha;
            if global_value(obj, &candidate) <= value - 1e-4 * alpha * g_norm * g_norm {
                theta = candidate;
                break;
            }
            alpha /= 2.0;
            backtracks += 1;
            if backtracks > 200 {
                return Err(Error::SolverFailure(
                    "line search failed to find descent".into(),
                ));
            }
        }
        if theta.norm() > DIVERGENCE_LIMIT {
            return Err(Error::SolverFailure(format!(
                "iterate norm exceeded {DIVERGENCE_LIMIT:.0e} at round {round}"
            )));
        }
    }
    Err(Error::SolverFailure(format!(
        "gradient norm still above {tol} after {max_rounds} rounds"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{Dataset, LogisticObjective, QuadraticObjective};
    use proptest::prelude::*;

    fn quad() -> QuadraticObjective {
        QuadraticObjective::synthetic(1, 12, 4, 0.0, 1.0, false, 3).unwrap()
    }

    #[test]
    fn table_average_matches_entry_mean() {
        let entries: Vec<DVector<f64>> =
            (0..7).map(|i| DVector::from_fn(3, |j, _| (i * 3 + j) as f64 * 0.37)).collect();
        let direct = entries.iter().sum::<DVector<f64>>() / 7.0;
        let table = GradientTable::new(entries);
        assert!((table.average() - direct).norm() < 1e-14);
    }

    proptest! {
        #[test]
        fn table_average_survives_any_update_sequence(
            updates in proptest::collection::vec((0usize..10, -1e3f64..1e3), 0..600),
        ) {
            let mut table = GradientTable::new(
                (0..10).map(|i| DVector::from_element(2, i as f64)).collect(),
            );
            for (slot, value) in updates {
                table.update(slot, DVector::from_vec(vec![value, -value * 0.5]));
            }
            let direct: DVector<f64> =
                (0..10).map(|s| table.entry(s).clone()).sum::<DVector<f64>>() / 10.0;
            prop_assert!((table.average() - direct).norm() <= 1e-12);
        }
    }

    #[test]
    fn gd_reaches_the_closed_form_minimizer() {
        let obj = quad();
        let star = obj.closed_form_minimizer().unwrap();
        let (_, l) = obj.convexity_bounds();
        let run = gd_run(
            &obj,
            &DVector::zeros(4),
            StepSchedule::constant(1.0 / l).unwrap(),
            400,
        )
        .unwrap();
        assert!((run.last() - star).norm() < 1e-10);
        assert_eq!(run.evals[1], 12);
        assert_eq!(run.evals.len(), 401);
    }

    #[test]
    fn oversized_steps_trip_the_divergence_guard() {
        let obj = quad();
        let err = gd_run(
            &obj,
            &DVector::from_element(4, 1.0),
            StepSchedule::constant(1e4).unwrap(),
            10_000,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }));
    }

    #[test]
    fn sgd_is_reproducible_and_counts_single_evals() {
        let obj = quad();
        let sched = StepSchedule::harmonic(0.5, 10).unwrap();
        let a = sgd_run(&obj, &DVector::zeros(4), sched, 200, 9).unwrap();
        let b = sgd_run(&obj, &DVector::zeros(4), sched, 200, 9).unwrap();
        assert_eq!(a.iterates, b.iterates);
        assert_eq!(a.evals[200], 200);
        let c = sgd_run(&obj, &DVector::zeros(4), sched, 200, 10).unwrap();
        assert_ne!(a.iterates[200], c.iterates[200]);
    }

    #[test]
    fn saga_converges_linearly_on_a_quadratic() {
        let obj = quad();
        let star = obj.closed_form_minimizer().unwrap();
        let (_, l) = obj.convexity_bounds();
        let run = saga_run(&obj, &DVector::zeros(4), 1.0 / (3.0 * l), 6000, 4).unwrap();
        assert!((run.last() - star).norm_squared() < 1e-18);
        // one full pass up front, one fresh gradient per round
        assert_eq!(run.evals[0], 12);
        assert_eq!(run.evals[6000], 12 + 6000);
    }

    #[test]
    fn saga_estimator_is_unbiased_by_enumeration() {
        // freeze a mid-run table state, then average the estimator over
        // every possible draw and compare with the true batch gradient
        let obj = quad();
        let flat = crate::objective::FlatView::new(&obj);
        let m = flat.len();
        let theta_hist = saga_run(&obj, &DVector::zeros(4), 0.01, 25, 7).unwrap();
        let mut table = GradientTable::new(
            (0..m).map(|s| flat.gradient(s, &theta_hist.iterates[0])).collect(),
        );
        for k in 0..25 {
            let s = seeding::component_at(7, 0, k, m);
            table.update(s, flat.gradient(s, &theta_hist.iterates[k as usize]));
        }
        let theta = theta_hist.last();
        let mut mean = DVector::zeros(4);
        for s in 0..m {
            mean += (flat.gradient(s, theta) - table.entry(s)) + table.average();
        }
        mean /= m as f64;
        assert!((mean - flat.batch_gradient(theta)).norm() <= 1e-12);
    }

    #[test]
    fn svrg_converges_under_every_anchor_option() {
        let obj = quad();
        let star = obj.closed_form_minimizer().unwrap();
        let (_, l) = obj.convexity_bounds();
        for option in [SvrgOption::Last, SvrgOption::Average, SvrgOption::Pick] {
            let run =
                svrg_run(&obj, &DVector::zeros(4), 1.0 / (10.0 * l), 25, 4000, option, 11)
                    .unwrap();
            assert!(
                (run.last() - &star).norm_squared() < 1e-16,
                "option {option:?} residual {}",
                (run.last() - &star).norm_squared()
            );
        }
    }

    #[test]
    fn svrg_charges_one_pass_plus_two_per_round_each_loop() {
        let obj = quad(); // m = 12
        let run = svrg_run(
            &obj,
            &DVector::zeros(4),
            1e-3,
            10,
            35,
            SvrgOption::Average,
            0,
        )
        .unwrap();
        // after K full loops of T=10 rounds: K * (12 + 2 * 10)
        assert_eq!(run.evals[10], 32);
        assert_eq!(run.evals[20], 64);
        assert_eq!(run.evals[30], 96);
        // mid-loop rounds only pay the two fresh evaluations
        assert_eq!(run.evals[35], 96 + 12 + 2 * 5);
    }

    #[test]
    fn svrg_estimator_is_unbiased_by_enumeration() {
        let obj = quad();
        let flat = crate::objective::FlatView::new(&obj);
        let m = flat.len();
        let run = svrg_run(&obj, &DVector::zeros(4), 0.02, 10, 17, SvrgOption::Last, 3).unwrap();
        let anchor = &run.iterates[10]; // loop-1 anchor
        let w = run.last();
        let anchor_grad = flat.batch_gradient(anchor);
        let mut mean = DVector::zeros(4);
        for s in 0..m {
            mean += (flat.gradient(s, w) - flat.gradient(s, anchor)) + &anchor_grad;
        }
        mean /= m as f64;
        assert!((mean - flat.batch_gradient(w)).norm() <= 1e-12);
    }

    #[test]
    fn reference_solver_hits_tolerance_on_logistic() {
        let ds = Dataset::synthetic_gaussians(60, 5, 1.5, 21);
        let obj = LogisticObjective::centralized(&ds, None).unwrap();
        let star = solve_reference(&obj, 1e-12, 200_000).unwrap();
        assert!(global_gradient(&obj, &star).norm() <= 1e-12);
    }

    #[test]
    fn reference_solver_uses_the_quadratic_closed_form() {
        let obj = quad();
        let star = solve_reference(&obj, 1e-12, 10).unwrap();
        assert!((star - obj.closed_form_minimizer().unwrap()).norm() < 1e-14);
    }

    #[test]
    fn invalid_steps_are_rejected_up_front() {
        let obj = quad();
        let z = DVector::zeros(4);
        assert!(saga_run(&obj, &z, 0.0, 1, 0).is_err());
        assert!(svrg_run(&obj, &z, -0.1, 5, 1, SvrgOption::Last, 0).is_err());
        assert!(svrg_run(&obj, &z, 0.1, 0, 1, SvrgOption::Last, 0).is_err());
        assert!(solve_reference(&obj, 0.0, 10).is_err());
    }
}
