use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use walkman_core::algorithm::ParamValue;
use walkman_core::graph::{generate, Graph, GraphSpec};
use walkman_core::harness::{self, ExperimentConfig, Manifest};
use walkman_core::markov::{build_chain, ChainKind};
use walkman_core::theory::{complexity_table, ComplexityInputs, DEFAULT_DELTA};
use walkman_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "walkman",
    version,
    about = "Random-walk decentralized optimization simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a network and write it as an edge list.
    GenGraph {
        /// complete:N, cycle:N, gilbert:N:P or geometric:N:SIDE:RADIUS
        spec: String,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run every algorithm of an experiment and write CSV traces and a manifest.
    Run {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(short, long)]
        output: PathBuf,
        /// Also write plot.gp for gnuplot.
        #[arg(long)]
        gnuplot: bool,
    },
    /// Grid-search one algorithm's parameters.
    Grid {
        #[command(flatten)]
        config: ConfigArg,
        /// Algorithm label in the config.
        #[arg(long)]
        algo: String,
        /// Override an axis, e.g. `alpha=0.1,0.01`. Repeatable.
        #[arg(long = "set", value_name = "KEY=V1,V2")]
        axes: Vec<String>,
    },
    /// Print the communication-complexity comparison for a network.
    Theory {
        /// Edge-list file.
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value = "max-degree")]
        chain: String,
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ConfigArg {
    /// TOML experiment file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Built-in experiment: ls50, logreg or nnpca.
    #[arg(long)]
    preset: Option<String>,
}

impl ConfigArg {
    fn load(&self) -> Result<ExperimentConfig> {
        match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path),
            (None, Some(name)) => ExperimentConfig::preset(name),
            (None, None) => Err(Error::Config(
                "either --config or --preset is required".into(),
            )),
        }
    }
}

fn error_line(kind: &str, message: &str, algorithm: Option<&str>) -> String {
    let mut obj = serde_json::Map::new();
    obj.insert("error".into(), kind.into());
    obj.insert("message".into(), message.into());
    if let Some(a) = algorithm {
        obj.insert("algorithm".into(), a.into());
    }
    serde_json::Value::Object(obj).to_string()
}

fn parse_axis(s: &str) -> Result<(String, Vec<ParamValue>)> {
    let (key, values) = s
        .split_once('=')
        .ok_or_else(|| Error::Parse(format!("grid axis {s:?} is not KEY=V1,V2")))?;
    let values = values
        .split(',')
        .map(|v| match v.trim().parse::<f64>() {
            Ok(x) => ParamValue::Number(x),
            Err(_) => ParamValue::Text(v.trim().to_string()),
        })
        .collect();
    Ok((key.trim().to_string(), values))
}

fn print_manifest(m: &Manifest) {
    println!(
        "{}  n = {}  m = {}  sigma = {:.6}  config {}",
        m.name,
        m.graph.n,
        m.graph.m,
        m.graph.sigma,
        &m.config_hash[..12]
    );
    for r in &m.runs {
        match &r.error {
            None => println!(
                "{:<16} seed {:<4} iters {:>9}  comm {:>10}  time {:>12.2}  error {}",
                r.label,
                r.walk_seed,
                r.iterations,
                r.comm_units,
                r.sim_time,
                r.final_error.map_or("-".into(), |e| format!("{e:.3e}")),
            ),
            Some(e) => println!("{:<16} seed {:<4} failed: {e}", r.label, r.walk_seed),
        }
    }
}

fn execute(cmd: Command) -> Result<bool> {
    match cmd {
        Command::GenGraph { spec, output, seed } => {
            let mut spec: GraphSpec = spec.parse()?;
            spec.seed = seed;
            let g = generate(&spec)?;
            g.write(&output)?;
            println!("{} nodes, {} edges -> {}", g.n(), g.m(), output.display());
            Ok(true)
        }
        Command::Run {
            config,
            output,
            gnuplot,
        } => {
            let cfg = config.load()?;
            let manifest = harness::run_experiment(&cfg, &output)?;
            if gnuplot {
                let column = if is_nnpca(&cfg) { "nnpca_gap" } else { "mse" };
                std::fs::write(
                    output.join("plot.gp"),
                    harness::gnuplot_script(&manifest, column),
                )?;
            }
            print_manifest(&manifest);
            let mut ok = true;
            for r in manifest.failures() {
                let msg = r.error.as_deref().unwrap_or_default();
                let (kind, text) = msg.split_once(": ").unwrap_or(("run", msg));
                eprintln!("{}", error_line(kind, text, Some(&r.label)));
                ok = false;
            }
            Ok(ok)
        }
        Command::Grid { config, algo, axes } => {
            let cfg = config.load()?;
            let grid = axes
                .iter()
                .map(|a| parse_axis(a))
                .collect::<Result<BTreeMap<_, _>>>()?;
            let result = harness::grid_search(&cfg, &algo, &grid)?;
            for p in &result.points {
                let params: Vec<String> =
                    p.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
                let outcome = match (&p.error, p.final_error) {
                    (Some(e), _) => format!("failed: {e}"),
                    (None, Some(e)) => format!("error {e:.3e}  comm {}", p.comm_units),
                    (None, None) => format!("comm {}", p.comm_units),
                };
                println!("{:<30} {outcome}", params.join(" "));
            }
            let best: Vec<String> = result
                .best
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect();
            println!("best: {}", best.join(" "));
            Ok(true)
        }
        Command::Theory {
            graph,
            eps,
            chain,
            delta,
        } => {
            let g = Graph::read(&graph)?;
            let kind: ChainKind = chain.parse()?;
            let p = build_chain(&g, kind)?;
            let inputs = ComplexityInputs::from_network(&g, &p, delta, eps)?;
            let table = complexity_table(&inputs)?;
            print!("{}", table.to_text());
            println!();
            print!("{}", table.to_csv());
            Ok(true)
        }
    }
}

fn is_nnpca(cfg: &ExperimentConfig) -> bool {
    matches!(cfg.problem, harness::ProblemConfig::NnPca { .. })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", error_line(e.kind(), &e.to_string(), None));
            ExitCode::from(1)
        }
    }
}
