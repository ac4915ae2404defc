//! Experiment driver: builds graph, weights, data, and method from a
//! config, steps the method round by round, and records progress metrics.
//!
//! A trace row holds, per recorded round: mean squared distance to the
//! reference minimizer, consensus error, tracking error (gradient-tracking
//! methods only), epochs (mean local data passes), and the network-wide
//! gradient evaluation count. Wall-clock time is kept in memory but never
//! serialized, so rerunning a config yields byte-identical trace files.

use std::io::BufReader;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;
use rand::distributions::Distribution;
use rand_distr::StandardNormal;

use crate::config::{
    AlgorithmConfig, AlgorithmId, AnchorOption, BudgetConfig, CompareConfig, ExperimentConfig,
    GraphConfig, GraphKind, InitConfig, InitKind, ObjectiveConfig, ObjectiveKind, ReferenceConfig,
    ScheduleConfig, ScheduleKind, SeedsConfig, TraceConfig, WeightRule, WeightsConfig,
};
use crate::decentralized::{self, DecentralizedMethod};
use crate::error::{Error, Result};
use crate::mixing::MixingMatrix;
use crate::objective::{
    self, total_components, Dataset, FiniteSumObjective, LogisticObjective, PartitionMode,
    QuadraticObjective,
};
use crate::reference::{self, SvrgOption};
use crate::seeding;
use crate::stack::{self, Stack};
use crate::topology::Topology;

/// Metrics at one recorded round.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub round: u64,
    /// Mean over nodes of local evaluations divided by local data size.
    pub epochs: f64,
    /// `(1/n) sum_i ||theta_i - theta*||^2`.
    pub avg_residual: f64,
    /// `(1/n) sum_i ||theta_i - mean theta||^2`; zero for centralized runs.
    pub consensus_error: f64,
    /// Distance between the tracker mean and the estimate mean; only
    /// gradient-tracking methods have one.
    pub tracking_error: Option<f64>,
    /// Total component-gradient evaluations across the network.
    pub grad_evals: u64,
    /// Seconds since the run started. In-memory only, not serialized.
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub label: String,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub const CSV_HEADER: &'static str =
        "round,epochs,avg_residual,consensus_error,tracking_error,grad_evals";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let tracking = match r.tracking_error {
                Some(t) => format!("{t}"),
                None => String::new(),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.round, r.epochs, r.avg_residual, r.consensus_error, tracking, r.grad_evals
            ));
        }
        out
    }

    pub fn from_csv(label: &str, text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim_end() == Self::CSV_HEADER => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("expected header {:?}", Self::CSV_HEADER),
                })
            }
        }
        let mut records = Vec::new();
        for (idx, line) in lines {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("expected 6 fields, got {}", fields.len()),
                });
            }
            let bad = |what: &str| Error::Parse { line: idx + 1, message: what.to_string() };
            let tracking_error = if fields[4].is_empty() {
                None
            } else {
                Some(fields[4].parse::<f64>().map_err(|_| bad("bad tracking_error"))?)
            };
            records.push(TraceRecord {
                round: fields[0].parse().map_err(|_| bad("bad round"))?,
                epochs: fields[1].parse().map_err(|_| bad("bad epochs"))?,
                avg_residual: fields[2].parse().map_err(|_| bad("bad avg_residual"))?,
                consensus_error: fields[3].parse().map_err(|_| bad("bad consensus_error"))?,
                tracking_error,
                grad_evals: fields[5].parse().map_err(|_| bad("bad grad_evals"))?,
                wall_time: 0.0,
            });
        }
        Ok(Trace { label: label.to_string(), records })
    }

    pub fn final_record(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// Residual of the last record at or before `epoch`, if any exists.
    /// Records are in nondecreasing epoch order by construction.
    pub fn residual_at_epoch(&self, epoch: f64) -> Option<f64> {
        let idx = self.records.partition_point(|r| r.epochs <= epoch);
        if idx == 0 {
            None
        } else {
            Some(self.records[idx - 1].avg_residual)
        }
    }
}

/// Rows for an epoch-aligned comparison table: the union of every trace's
/// recorded epoch marks, each trace contributing its most recent residual
/// at that mark (none before its first record).
pub fn comparison_rows(traces: &[Trace]) -> Vec<(f64, Vec<Option<f64>>)> {
    let mut grid: Vec<f64> =
        traces.iter().flat_map(|t| t.records.iter().map(|r| r.epochs)).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid.into_iter()
        .map(|e| (e, traces.iter().map(|t| t.residual_at_epoch(e)).collect()))
        .collect()
}

/// Recording stride: every round up to 10000 total, then the smallest
/// stride keeping at most 10000 records. Round 0 and the final round are
/// always recorded regardless.
pub fn record_stride(rounds: u64, cadence: Option<u64>) -> u64 {
    match cadence {
        Some(c) if c > 0 => c,
        _ => {
            if rounds <= 10_000 {
                1
            } else {
                rounds.div_ceil(10_000)
            }
        }
    }
}

/// Everything shared between runs of one experiment or comparison: the
/// network, the data, the starting states, and the reference minimizer.
pub struct BuiltExperiment {
    pub topology: Topology,
    pub mixing: MixingMatrix,
    pub objective: Arc<dyn FiniteSumObjective>,
    pub theta0: Stack,
    pub theta_star: DVector<f64>,
}

pub fn build_topology(cfg: &GraphConfig) -> Result<Topology> {
    cfg.validate()?;
    Ok(match cfg.kind {
        GraphKind::Geometric => Topology::random_geometric(
            cfg.n,
            cfg.radius.expect("validated above"),
            cfg.seed.unwrap_or(0),
        )?,
        GraphKind::Ring => Topology::ring(cfg.n),
        GraphKind::Path => Topology::path(cfg.n),
        GraphKind::Complete => Topology::complete(cfg.n),
    })
}

pub fn build_mixing(cfg: &WeightsConfig, topo: &Topology) -> Result<MixingMatrix> {
    cfg.validate()?;
    match cfg.rule {
        WeightRule::Metropolis => MixingMatrix::metropolis(topo),
        WeightRule::LazyLaplacian => {
            MixingMatrix::lazy_laplacian(topo, cfg.eps.expect("validated above"))
        }
    }
}

pub fn build_objective(cfg: &ObjectiveConfig, n: usize) -> Result<Arc<dyn FiniteSumObjective>> {
    cfg.validate()?;
    match cfg.kind {
        ObjectiveKind::Logistic => {
            let mut ds = match &cfg.dataset {
                Some(path) => {
                    let file = std::fs::File::open(path).map_err(|e| {
                        Error::Config(format!("cannot read dataset {path}: {e}"))
                    })?;
                    Dataset::read_csv(BufReader::new(file), cfg.label_map.as_ref())?
                }
                None => Dataset::synthetic_gaussians(
                    cfg.samples.expect("validated above"),
                    cfg.dim.expect("validated above"),
                    cfg.separation.unwrap_or(1.0),
                    cfg.data_seed.unwrap_or(0),
                ),
            };
            if cfg.normalize.unwrap_or(true) {
                ds.standardize();
            }
            let assignment = objective::partition(
                &ds,
                n,
                cfg.partition.unwrap_or(PartitionMode::OneClassPerNode),
                cfg.partition_seed.unwrap_or(0),
            )?;
            Ok(Arc::new(LogisticObjective::new(&ds, &assignment, cfg.lambda_reg)?))
        }
        ObjectiveKind::Quadratic => Ok(Arc::new(QuadraticObjective::synthetic(
            n,
            cfg.components.expect("validated above"),
            cfg.dim.expect("validated above"),
            cfg.hetero.unwrap_or(1.0),
            cfg.noise.unwrap_or(0.5),
            cfg.shared_hessian.unwrap_or(false),
            cfg.data_seed.unwrap_or(0),
        )?)),
    }
}

pub fn build_init(cfg: &InitConfig, n: usize, dim: usize, master: u64) -> Result<Stack> {
    match cfg.kind {
        InitKind::Zero => Ok(Stack::zeros(n, dim)),
        InitKind::Random => {
            let scale = cfg.scale.unwrap_or(1.0);
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "init scale must be positive, got {scale}"
                )));
            }
            let mut s = Stack::zeros(n, dim);
            for i in 0..n {
                let mut rng = seeding::stream(master, seeding::DOMAIN_INIT, i as u64, 0);
                for j in 0..dim {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    s[(i, j)] = z * scale;
                }
            }
            Ok(s)
        }
    }
}

fn build_sections(
    graph: &GraphConfig,
    weights: &WeightsConfig,
    objective_cfg: &ObjectiveConfig,
    init: &InitConfig,
    seeds: &SeedsConfig,
    reference_cfg: &ReferenceConfig,
) -> Result<BuiltExperiment> {
    let topology = build_topology(graph)?;
    let mixing = build_mixing(weights, &topology)?;
    let objective = build_objective(objective_cfg, graph.n)?;
    let theta0 = build_init(init, graph.n, objective.dim(), seeds.master)?;
    let theta_star =
        reference::solve_reference(objective.as_ref(), reference_cfg.tol(), reference_cfg.max_rounds())?;
    Ok(BuiltExperiment { topology, mixing, objective, theta0, theta_star })
}

pub fn build_experiment(cfg: &ExperimentConfig) -> Result<BuiltExperiment> {
    build_sections(&cfg.graph, &cfg.weights, &cfg.objective, &cfg.init, &cfg.seeds, &cfg.reference)
}

pub fn build_compare(cfg: &CompareConfig) -> Result<BuiltExperiment> {
    build_sections(&cfg.graph, &cfg.weights, &cfg.objective, &cfg.init, &cfg.seeds, &cfg.reference)
}

/// Step-size and inner-loop defaults from the curvature bounds. The
/// variance-reduced methods default to the usual smoothness fractions; the
/// anchored ones default their loop length to fifty condition numbers.
fn curvature_defaults(obj: &dyn FiniteSumObjective, id: AlgorithmId) -> (Option<f64>, u64) {
    let (mu, l) = obj.convexity_bounds();
    let alpha = match id {
        AlgorithmId::Saga | AlgorithmId::GtSaga => Some(1.0 / (3.0 * l)),
        AlgorithmId::Svrg | AlgorithmId::GtSvrg => Some(1.0 / (10.0 * l)),
        _ => None,
    };
    let t_inner = ((50.0 * l / mu).ceil() as u64).max(1);
    (alpha, t_inner)
}

fn record_decentralized(
    alg: &dyn DecentralizedMethod,
    obj: &dyn FiniteSumObjective,
    star: &DVector<f64>,
    start: Instant,
) -> TraceRecord {
    let thetas = alg.thetas();
    let n = thetas.nrows();
    let mut epochs = 0.0;
    let mut total = 0u64;
    for (i, &e) in alg.evals().iter().enumerate() {
        epochs += e as f64 / obj.components(i) as f64;
        total += e;
    }
    TraceRecord {
        round: alg.round_index(),
        epochs: epochs / n as f64,
        avg_residual: stack::mean_sq_distance(thetas, star),
        consensus_error: decentralized::consensus_error(thetas),
        tracking_error: match (alg.tracker(), alg.estimates()) {
            (Some(d), Some(g)) => Some(decentralized::tracking_error(d, g)),
            _ => None,
        },
        grad_evals: total,
        wall_time: start.elapsed().as_secs_f64(),
    }
}

/// Run one method against an already built experiment. Decentralized
/// methods start from the full state stack; centralized ones start from its
/// mean row and report zero consensus error.
pub fn run_built(
    built: &BuiltExperiment,
    algorithm: &AlgorithmConfig,
    schedule_cfg: &ScheduleConfig,
    budget: &BudgetConfig,
    trace_cfg: &TraceConfig,
    label: &str,
    master: u64,
) -> Result<Trace> {
    let id = algorithm.id;
    let (default_alpha, default_t) = curvature_defaults(built.objective.as_ref(), id);
    let stride = record_stride(budget.rounds, trace_cfg.cadence);
    let rounds = budget.rounds;
    let option: SvrgOption = algorithm.option.unwrap_or(AnchorOption::Average).into();
    let t_inner = algorithm.t_inner.unwrap_or(default_t);

    // constant step for the variance-reduced methods, schedule for the rest
    let vr_alpha = || -> Result<f64> {
        if schedule_cfg.kind != ScheduleKind::Constant {
            return Err(Error::Config(format!(
                "{} takes a constant step size only",
                id.name()
            )));
        }
        schedule_cfg
            .alpha
            .or(default_alpha)
            .ok_or_else(|| Error::Config("schedule.alpha is required".into()))
    };

    if id.is_decentralized() {
        let mixing = built.mixing.clone();
        let obj = Arc::clone(&built.objective);
        let theta0 = built.theta0.clone();
        let mut alg: Box<dyn DecentralizedMethod> = match id {
            AlgorithmId::Dgd => Box::new(decentralized::Dgd::new(
                mixing,
                obj,
                theta0,
                schedule_cfg.build(default_alpha)?,
            )?),
            AlgorithmId::Dsgd => Box::new(decentralized::Dsgd::new(
                mixing,
                obj,
                theta0,
                schedule_cfg.build(default_alpha)?,
                master,
            )?),
            AlgorithmId::GtDgd => Box::new(decentralized::GtDgd::new(
                mixing,
                obj,
                theta0,
                schedule_cfg.build(default_alpha)?,
            )?),
            AlgorithmId::GtDsgd => Box::new(decentralized::GtDsgd::new(
                mixing,
                obj,
                theta0,
                schedule_cfg.build(default_alpha)?,
                master,
            )?),
            AlgorithmId::GtSaga => Box::new(decentralized::GtSaga::new(
                mixing,
                obj,
                theta0,
                vr_alpha()?,
                master,
            )?),
            AlgorithmId::GtSvrg => Box::new(decentralized::GtSvrg::new(
                mixing,
                obj,
                theta0,
                vr_alpha()?,
                t_inner,
                option,
                master,
            )?),
            _ => unreachable!("checked decentralized above"),
        };
        let start = Instant::now();
        let mut records =
            vec![record_decentralized(alg.as_ref(), built.objective.as_ref(), &built.theta_star, start)];
        for r in 1..=rounds {
            alg.round()?;
            if r % stride == 0 || r == rounds {
                records.push(record_decentralized(
                    alg.as_ref(),
                    built.objective.as_ref(),
                    &built.theta_star,
                    start,
                ));
            }
        }
        Ok(Trace { label: label.to_string(), records })
    } else {
        let theta0 = stack::mean_row(&built.theta0);
        let obj = built.objective.as_ref();
        let start = Instant::now();
        let run = match id {
            AlgorithmId::Gd => {
                reference::gd_run(obj, &theta0, schedule_cfg.build(default_alpha)?, rounds)?
            }
            AlgorithmId::Sgd => {
                reference::sgd_run(obj, &theta0, schedule_cfg.build(default_alpha)?, rounds, master)?
            }
            AlgorithmId::Saga => reference::saga_run(obj, &theta0, vr_alpha()?, rounds, master)?,
            AlgorithmId::Svrg => {
                reference::svrg_run(obj, &theta0, vr_alpha()?, t_inner, rounds, option, master)?
            }
            _ => unreachable!("checked centralized above"),
        };
        let elapsed = start.elapsed().as_secs_f64();
        let m_total = total_components(obj) as f64;
        let mut records = Vec::new();
        for k in 0..=rounds {
            if k == 0 || k % stride == 0 || k == rounds {
                let theta = &run.iterates[k as usize];
                records.push(TraceRecord {
                    round: k,
                    epochs: run.evals[k as usize] as f64 / m_total,
                    avg_residual: (theta - &built.theta_star).norm_squared(),
                    consensus_error: 0.0,
                    tracking_error: None,
                    grad_evals: run.evals[k as usize],
                    wall_time: elapsed,
                });
            }
        }
        Ok(Trace { label: label.to_string(), records })
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Trace> {
    cfg.validate()?;
    let built = build_experiment(cfg)?;
    run_built(
        &built,
        &cfg.algorithm,
        &cfg.schedule,
        &cfg.budget,
        &cfg.trace,
        cfg.algorithm.id.name(),
        cfg.seeds.master,
    )
}

/// Run every member of a comparison against one shared build, so all
/// methods see the same graph, data, starting states, and reference point.
pub fn compare_experiments(cfg: &CompareConfig) -> Result<Vec<Trace>> {
    cfg.validate()?;
    let built = build_compare(cfg)?;
    cfg.runs
        .iter()
        .map(|run| {
            run_built(
                &built,
                &run.algorithm,
                &run.schedule,
                &run.budget,
                &run.trace,
                &run.label,
                cfg.seeds.master,
            )
        })
        .collect()
}
