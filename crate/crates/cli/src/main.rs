//! Command line front end: generate graphs and data, solve reference
//! minimizers, and run single or comparative optimization experiments from
//! TOML configs.
//!
//! Exit codes: 0 on success, 1 for configuration and input validation
//! errors, 2 for runtime failures (divergence, generation retry
//! exhaustion, output I/O). Failures print a one-line JSON object to
//! stderr; summaries print one-line JSON to stdout.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use peergrad::config::{self, GraphConfig, GraphKind, WeightRule, WeightsConfig};
use peergrad::objective::{global_gradient, total_components};
use peergrad::simulator::{self, Trace};
use peergrad::stack;
use peergrad::{Dataset, Error, Result};

#[derive(Parser)]
#[command(name = "peergrad", version, about = "Decentralized optimization simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a connected graph and its mixing matrix
    GenGraph(GenGraphArgs),
    /// Generate a synthetic two-class dataset
    GenData(GenDataArgs),
    /// Solve the reference minimizer for a config and report objective stats
    SolveRef(ConfigArgs),
    /// Run one experiment and write its trace
    Run(ConfigArgs),
    /// Run every member of a comparison config against one shared build
    Compare(ConfigArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphKindArg {
    Geometric,
    Ring,
    Path,
    Complete,
}

impl From<GraphKindArg> for GraphKind {
    fn from(k: GraphKindArg) -> GraphKind {
        match k {
            GraphKindArg::Geometric => GraphKind::Geometric,
            GraphKindArg::Ring => GraphKind::Ring,
            GraphKindArg::Path => GraphKind::Path,
            GraphKindArg::Complete => GraphKind::Complete,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightRuleArg {
    Metropolis,
    LazyLaplacian,
}

impl From<WeightRuleArg> for WeightRule {
    fn from(r: WeightRuleArg) -> WeightRule {
        match r {
            WeightRuleArg::Metropolis => WeightRule::Metropolis,
            WeightRuleArg::LazyLaplacian => WeightRule::LazyLaplacian,
        }
    }
}

#[derive(Args)]
struct GenGraphArgs {
    #[arg(long, value_enum, default_value = "geometric")]
    kind: GraphKindArg,
    #[arg(long)]
    n: usize,
    /// Connection radius for geometric graphs
    #[arg(long, default_value_t = 0.25)]
    radius: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "metropolis")]
    rule: WeightRuleArg,
    /// Laplacian step for the lazy-laplacian rule
    #[arg(long)]
    eps: Option<f64>,
    /// Output directory for graph.txt, coords.txt, weights.csv
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long)]
    samples: usize,
    #[arg(long)]
    dim: usize,
    /// Distance between the two class means
    #[arg(long, default_value_t = 1.0)]
    separation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for data.csv
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override a config key, e.g. --set graph.n=50 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            fail(&Error::Config(e.to_string()));
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::GenGraph(a) => gen_graph(a),
        Command::GenData(a) => gen_data(a),
        Command::SolveRef(a) => solve_ref(a),
        Command::Run(a) => run(a),
        Command::Compare(a) => compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            fail(&e);
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn fail(e: &Error) {
    let kind = if e.is_validation() { "validation" } else { "runtime" };
    eprintln!("{}", serde_json::json!({ "error": e.to_string(), "kind": kind }));
}

fn write_with<F>(path: &PathBuf, write: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<fs::File>) -> Result<()>,
{
    let mut w = BufWriter::new(fs::File::create(path)?);
    write(&mut w)?;
    w.flush()?;
    Ok(())
}

fn gen_graph(a: GenGraphArgs) -> Result<()> {
    let graph = GraphConfig {
        kind: a.kind.into(),
        n: a.n,
        radius: Some(a.radius),
        seed: Some(a.seed),
    };
    let topo = simulator::build_topology(&graph)?;
    let weights = WeightsConfig { rule: a.rule.into(), eps: a.eps };
    let mixing = simulator::build_mixing(&weights, &topo)?;

    fs::create_dir_all(&a.out)?;
    write_with(&a.out.join("graph.txt"), |w| topo.write_edge_list(w))?;
    if topo.coords().is_some() {
        write_with(&a.out.join("coords.txt"), |w| topo.write_coords(w))?;
    }
    write_with(&a.out.join("weights.csv"), |w| mixing.write_csv(w))?;

    let max_degree = (0..topo.n()).map(|i| topo.degree(i)).max().unwrap_or(0);
    println!(
        "{}",
        serde_json::json!({
            "n": topo.n(),
            "edges": topo.edges().len(),
            "max_degree": max_degree,
            "lambda": mixing.lambda(),
            "spectral_gap": mixing.spectral_gap(),
            "out": a.out,
        })
    );
    Ok(())
}

fn gen_data(a: GenDataArgs) -> Result<()> {
    if a.samples == 0 || a.dim == 0 {
        return Err(Error::InvalidParameter("samples and dim must be at least 1".into()));
    }
    let ds = Dataset::synthetic_gaussians(a.samples, a.dim, a.separation, a.seed);
    fs::create_dir_all(&a.out)?;
    write_with(&a.out.join("data.csv"), |w| ds.write_csv(w))?;
    let positives = (0..ds.len()).filter(|&s| ds.label(s) > 0.0).count();
    println!(
        "{}",
        serde_json::json!({
            "samples": ds.len(),
            "dim": ds.dim(),
            "positives": positives,
            "negatives": ds.len() - positives,
            "out": a.out,
        })
    );
    Ok(())
}

fn solve_ref(a: ConfigArgs) -> Result<()> {
    let cfg = config::load_experiment(&a.config, &a.set)?;
    let built = simulator::build_experiment(&cfg)?;
    fs::create_dir_all(&a.out)?;

    write_with(&a.out.join("theta_star.csv"), |w| {
        writeln!(w, "theta_star")?;
        for v in built.theta_star.iter() {
            writeln!(w, "{v}")?;
        }
        Ok(())
    })?;

    let probe = stack::mean_row(&built.theta0);
    let stats = peergrad::estimate_stats(built.objective.as_ref(), &built.theta_star, &probe)?;
    fs::write(
        a.out.join("stats.json"),
        serde_json::to_string_pretty(&stats).expect("stats serialize") + "\n",
    )?;

    let grad_norm = global_gradient(built.objective.as_ref(), &built.theta_star).norm();
    println!(
        "{}",
        serde_json::json!({
            "nodes": built.objective.nodes(),
            "dim": built.objective.dim(),
            "total_components": total_components(built.objective.as_ref()),
            "grad_norm": grad_norm,
            "kappa": stats.kappa,
            "out": a.out,
        })
    );
    Ok(())
}

fn run(a: ConfigArgs) -> Result<()> {
    let cfg = config::load_experiment(&a.config, &a.set)?;
    let trace = simulator::run_experiment(&cfg)?;
    fs::create_dir_all(&a.out)?;
    fs::write(a.out.join("trace.csv"), trace.to_csv())?;
    println!("{}", summary(&trace));
    Ok(())
}

fn summary(trace: &Trace) -> String {
    let last = trace.final_record().expect("runs record at least round 0");
    serde_json::json!({
        "label": trace.label,
        "records": trace.records.len(),
        "rounds": last.round,
        "epochs": last.epochs,
        "final_residual": last.avg_residual,
        "consensus_error": last.consensus_error,
        "grad_evals": last.grad_evals,
        "wall_seconds": last.wall_time,
    })
    .to_string()
}

/// File-name-safe form of a run label.
fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

fn compare(a: ConfigArgs) -> Result<()> {
    let cfg = config::load_compare(&a.config, &a.set)?;

    let mut names = std::collections::BTreeSet::new();
    for run in &cfg.runs {
        if !names.insert(sanitize(&run.label)) {
            return Err(Error::Config(format!(
                "run labels {:?} collide after file name sanitization",
                run.label
            )));
        }
    }

    let traces = simulator::compare_experiments(&cfg)?;
    fs::create_dir_all(&a.out)?;
    for trace in &traces {
        fs::write(a.out.join(format!("{}.csv", sanitize(&trace.label))), trace.to_csv())?;
    }

    let mut table = String::from("epochs");
    for trace in &traces {
        table.push(',');
        table.push_str(&trace.label);
    }
    table.push('\n');
    for (epoch, cells) in simulator::comparison_rows(&traces) {
        table.push_str(&format!("{epoch}"));
        for cell in cells {
            table.push(',');
            if let Some(v) = cell {
                table.push_str(&format!("{v}"));
            }
        }
        table.push('\n');
    }
    fs::write(a.out.join("comparison.csv"), table)?;

    let runs: Vec<serde_json::Value> = traces
        .iter()
        .map(|t| serde_json::from_str(&summary(t)).expect("summary is JSON"))
        .collect();
    println!("{}", serde_json::json!({ "runs": runs, "out": a.out }));
    Ok(())
}
