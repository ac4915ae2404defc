//! Experiment configuration: a sectioned key-value text file (TOML) plus
//! `key.path=value` overrides.
//!
//! Sections: `[graph]`, `[weights]`, `[objective]`, `[algorithm]`,
//! `[schedule]`, `[budget]`, `[trace]`, `[init]`, `[seeds]`, `[reference]`.
//! Comparison suites replace the algorithm/schedule/budget triple with a
//! `[[runs]]` array sharing everything else. Unknown keys anywhere are
//! rejected, both from files and from overrides, so typos fail loudly
//! instead of silently running a default.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::PartitionMode;
use crate::reference::SvrgOption;
use crate::schedule::StepSchedule;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphConfig,
    #[serde(default)]
    pub weights: WeightsConfig,
    pub objective: ObjectiveConfig,
    pub algorithm: AlgorithmConfig,
    pub schedule: ScheduleConfig,
    pub budget: BudgetConfig,
    #[serde(default)]
    pub trace: TraceConfig,
    #[serde(default)]
    pub init: InitConfig,
    pub seeds: SeedsConfig,
    #[serde(default)]
    pub reference: ReferenceConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub graph: GraphConfig,
    #[serde(default)]
    pub weights: WeightsConfig,
    pub objective: ObjectiveConfig,
    #[serde(default)]
    pub init: InitConfig,
    pub seeds: SeedsConfig,
    #[serde(default)]
    pub reference: ReferenceConfig,
    pub runs: Vec<CompareRunConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareRunConfig {
    pub label: String,
    pub algorithm: AlgorithmConfig,
    pub schedule: ScheduleConfig,
    pub budget: BudgetConfig,
    #[serde(default)]
    pub trace: TraceConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphKind {
    Geometric,
    Ring,
    Path,
    Complete,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    pub kind: GraphKind,
    pub n: usize,
    /// Connection radius, geometric graphs only.
    pub radius: Option<f64>,
    /// Generation seed, geometric graphs only. Defaults to 0.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightRule {
    Metropolis,
    LazyLaplacian,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    pub rule: WeightRule,
    /// Laplacian step, lazy-laplacian rule only.
    pub eps: Option<f64>,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        WeightsConfig { rule: WeightRule::Metropolis, eps: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    Logistic,
    Quadratic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    pub kind: ObjectiveKind,

    // logistic source: a dataset file, or synthetic Gaussians
    pub dataset: Option<String>,
    pub label_map: Option<BTreeMap<String, f64>>,
    /// Standardize features before use. Defaults to true.
    pub normalize: Option<bool>,
    pub samples: Option<usize>,
    pub separation: Option<f64>,
    pub partition: Option<PartitionMode>,
    pub partition_seed: Option<u64>,
    /// Ridge strength; defaults to 1 / (total samples).
    pub lambda_reg: Option<f64>,

    // shared
    pub dim: Option<usize>,
    pub data_seed: Option<u64>,

    // synthetic quadratic
    /// Components per node.
    pub components: Option<usize>,
    /// Scatter of per-node target centers.
    pub hetero: Option<f64>,
    /// Within-node target scatter.
    pub noise: Option<f64>,
    /// Use the identity design everywhere (perfectly conditioned).
    pub shared_hessian: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgorithmId {
    Gd,
    Sgd,
    Saga,
    Svrg,
    Dgd,
    Dsgd,
    GtDgd,
    GtDsgd,
    GtSaga,
    GtSvrg,
}

impl AlgorithmId {
    pub fn is_decentralized(self) -> bool {
        matches!(
            self,
            AlgorithmId::Dgd
                | AlgorithmId::Dsgd
                | AlgorithmId::GtDgd
                | AlgorithmId::GtDsgd
                | AlgorithmId::GtSaga
                | AlgorithmId::GtSvrg
        )
    }

    /// Variance-reduced methods take a constant step size only.
    pub fn is_variance_reduced(self) -> bool {
        matches!(
            self,
            AlgorithmId::Saga | AlgorithmId::Svrg | AlgorithmId::GtSaga | AlgorithmId::GtSvrg
        )
    }

    pub fn has_inner_loop(self) -> bool {
        matches!(self, AlgorithmId::Svrg | AlgorithmId::GtSvrg)
    }

    pub fn name(self) -> &'static str {
        match self {
            AlgorithmId::Gd => "gd",
            AlgorithmId::Sgd => "sgd",
            AlgorithmId::Saga => "saga",
            AlgorithmId::Svrg => "svrg",
            AlgorithmId::Dgd => "dgd",
            AlgorithmId::Dsgd => "dsgd",
            AlgorithmId::GtDgd => "gt-dgd",
            AlgorithmId::GtDsgd => "gt-dsgd",
            AlgorithmId::GtSaga => "gt-saga",
            AlgorithmId::GtSvrg => "gt-svrg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnchorOption {
    Last,
    Average,
    Pick,
}

impl From<AnchorOption> for SvrgOption {
    fn from(a: AnchorOption) -> SvrgOption {
        match a {
            AnchorOption::Last => SvrgOption::Last,
            AnchorOption::Average => SvrgOption::Average,
            AnchorOption::Pick => SvrgOption::Pick,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub id: AlgorithmId,
    /// Inner loop length for the anchored methods. Defaults to a
    /// condition-number rule at build time.
    #[serde(rename = "T")]
    pub t_inner: Option<u64>,
    /// Anchor selection for the anchored methods. Defaults to `average`.
    pub option: Option<AnchorOption>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Constant,
    Harmonic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub kind: ScheduleKind,
    /// Constant step size. For the variance-reduced methods it may be
    /// omitted, in which case a smoothness-based default is used.
    pub alpha: Option<f64>,
    /// Harmonic numerator.
    pub scale: Option<f64>,
    /// Harmonic denominator offset, defaults to 1.
    pub offset: Option<u64>,
}

impl ScheduleConfig {
    /// Realize the schedule; `None` alpha is only legal for methods with a
    /// curvature-derived default, which the caller supplies.
    pub fn build(&self, default_alpha: Option<f64>) -> Result<StepSchedule> {
        match self.kind {
            ScheduleKind::Constant => {
                let alpha = self.alpha.or(default_alpha).ok_or_else(|| {
                    Error::Config("schedule.alpha is required for this method".into())
                })?;
                StepSchedule::constant(alpha)
            }
            ScheduleKind::Harmonic => {
                let scale = self.scale.ok_or_else(|| {
                    Error::Config("schedule.scale is required for harmonic schedules".into())
                })?;
                StepSchedule::harmonic(scale, self.offset.unwrap_or(1))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    pub rounds: u64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceConfig {
    /// Record every `cadence`-th round. 0 or absent: every round up to
    /// 10000 rounds, then the smallest stride keeping at most 10000
    /// records. Round 0 and the final round are always recorded.
    pub cadence: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    Zero,
    Random,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    pub kind: InitKind,
    /// Standard deviation of random initial states. Defaults to 1.
    pub scale: Option<f64>,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig { kind: InitKind::Zero, scale: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedsConfig {
    /// Master seed for all stochastic draws during the run.
    pub master: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    /// Gradient-norm tolerance on the reference minimizer.
    pub tol: Option<f64>,
    pub max_rounds: Option<u64>,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        ReferenceConfig { tol: None, max_rounds: None }
    }
}

impl ReferenceConfig {
    pub fn tol(&self) -> f64 {
        self.tol.unwrap_or(1e-12)
    }

    pub fn max_rounds(&self) -> u64 {
        self.max_rounds.unwrap_or(500_000)
    }
}

/// Parse `key.path=value` pairs into a TOML tree, creating intermediate
/// tables. Values are parsed as TOML scalars, falling back to strings.
fn apply_overrides(table: &mut toml::Table, overrides: &[String]) -> Result<()> {
    for raw in overrides {
        let (path, value) = raw.split_once('=').ok_or_else(|| {
            Error::Config(format!("override {raw:?} is not of the form key.path=value"))
        })?;
        let segments: Vec<&str> = path.trim().split('.').collect();
        if segments.iter().any(|s| s.is_empty()) {
            return Err(Error::Config(format!("override {raw:?} has an empty key segment")));
        }
        let parsed: toml::Value = match format!("v = {}", value.trim()).parse::<toml::Table>() {
            Ok(mut t) => t.remove("v").expect("key v was just inserted"),
            Err(_) => toml::Value::String(value.trim().to_string()),
        };
        let mut cursor = &mut *table;
        for seg in &segments[..segments.len() - 1] {
            cursor = cursor
                .entry(seg.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| {
                    Error::Config(format!("override {raw:?} descends into a non-table key"))
                })?;
        }
        cursor.insert(segments[segments.len() - 1].to_string(), parsed);
    }
    Ok(())
}

fn parse_table(text: &str) -> Result<toml::Table> {
    text.parse::<toml::Table>()
        .map_err(|e| Error::Config(format!("config is not valid TOML: {e}")))
}

fn finish<T: serde::de::DeserializeOwned>(table: toml::Table) -> Result<T> {
    toml::Value::Table(table)
        .try_into()
        .map_err(|e| Error::Config(format!("{e}")))
}

pub fn parse_experiment(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut table = parse_table(text)?;
    apply_overrides(&mut table, overrides)?;
    let cfg: ExperimentConfig = finish(table)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_compare(text: &str, overrides: &[String]) -> Result<CompareConfig> {
    let mut table = parse_table(text)?;
    apply_overrides(&mut table, overrides)?;
    let cfg: CompareConfig = finish(table)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_experiment(path: &Path, overrides: &[String]) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_experiment(&text, overrides)
}

pub fn load_compare(path: &Path, overrides: &[String]) -> Result<CompareConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_compare(&text, overrides)
}

impl GraphConfig {
    pub fn validate(&self) -> Result<()> {
        let min = match self.kind {
            GraphKind::Geometric => 2,
            GraphKind::Ring => 3,
            GraphKind::Path => 2,
            GraphKind::Complete => 1,
        };
        if self.n < min {
            return Err(Error::Config(format!(
                "graph.n = {} is below the minimum {min} for this graph kind",
                self.n
            )));
        }
        if self.kind == GraphKind::Geometric && self.radius.is_none() {
            return Err(Error::Config("graph.radius is required for geometric graphs".into()));
        }
        Ok(())
    }
}

impl WeightsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rule == WeightRule::LazyLaplacian && self.eps.is_none() {
            return Err(Error::Config("weights.eps is required for lazy-laplacian".into()));
        }
        Ok(())
    }
}

impl ObjectiveConfig {
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ObjectiveKind::Logistic => {
                if self.dataset.is_none() {
                    if self.samples.is_none() || self.dim.is_none() {
                        return Err(Error::Config(
                            "logistic objective needs either objective.dataset or \
                             objective.samples and objective.dim"
                                .into(),
                        ));
                    }
                } else if self.samples.is_some()
                    || self.dim.is_some()
                    || self.separation.is_some()
                    || self.data_seed.is_some()
                {
                    return Err(Error::Config(
                        "synthetic-data keys set alongside objective.dataset".into(),
                    ));
                }
                if self.components.is_some()
                    || self.hetero.is_some()
                    || self.noise.is_some()
                    || self.shared_hessian.is_some()
                {
                    return Err(Error::Config(
                        "quadratic-only keys set on a logistic objective".into(),
                    ));
                }
            }
            ObjectiveKind::Quadratic => {
                if self.components.is_none() || self.dim.is_none() {
                    return Err(Error::Config(
                        "quadratic objective needs objective.components and objective.dim".into(),
                    ));
                }
                if self.dataset.is_some()
                    || self.label_map.is_some()
                    || self.samples.is_some()
                    || self.separation.is_some()
                    || self.partition.is_some()
                    || self.lambda_reg.is_some()
                    || self.normalize.is_some()
                {
                    return Err(Error::Config(
                        "logistic-only keys set on a quadratic objective".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn validate_algorithm(algorithm: &AlgorithmConfig, schedule: &ScheduleConfig) -> Result<()> {
    if algorithm.id.is_variance_reduced() && schedule.kind != ScheduleKind::Constant {
        return Err(Error::Config(format!(
            "{} takes a constant step size only",
            algorithm.id.name()
        )));
    }
    if !algorithm.id.has_inner_loop() {
        if algorithm.t_inner.is_some() || algorithm.option.is_some() {
            return Err(Error::Config(format!(
                "algorithm.T and algorithm.option only apply to anchored methods, not {}",
                algorithm.id.name()
            )));
        }
    } else if algorithm.t_inner == Some(0) {
        return Err(Error::Config("algorithm.T must be at least 1".into()));
    }
    if !algorithm.id.is_variance_reduced()
        && schedule.kind == ScheduleKind::Constant
        && schedule.alpha.is_none()
    {
        return Err(Error::Config(format!(
            "schedule.alpha is required for {}",
            algorithm.id.name()
        )));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.graph.validate()?;
        self.weights.validate()?;
        self.objective.validate()?;
        validate_algorithm(&self.algorithm, &self.schedule)?;
        if self.algorithm.id.is_decentralized() && self.graph.kind == GraphKind::Complete {
            // n = 1 allowed; nothing extra to check
        }
        Ok(())
    }
}

impl CompareConfig {
    pub fn validate(&self) -> Result<()> {
        self.graph.validate()?;
        self.weights.validate()?;
        self.objective.validate()?;
        if self.runs.is_empty() {
            return Err(Error::Config("comparison needs at least one [[runs]] entry".into()));
        }
        let mut labels = std::collections::BTreeSet::new();
        for run in &self.runs {
            if run.label.is_empty() {
                return Err(Error::Config("run labels cannot be empty".into()));
            }
            // labels become CSV header cells and file names
            if run.label.chars().any(|c| c == ',' || c.is_control()) {
                return Err(Error::Config(format!(
                    "run label {:?} contains a comma or control character",
                    run.label
                )));
            }
            if !labels.insert(&run.label) {
                return Err(Error::Config(format!("duplicate run label {:?}", run.label)));
            }
            validate_algorithm(&run.algorithm, &run.schedule)?;
        }
        Ok(())
    }
}
