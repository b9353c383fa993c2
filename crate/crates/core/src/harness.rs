//! Configuration-driven experiments: build the network, the problem and every
//! requested algorithm from one TOML file, run them on a worker pool and
//! write one CSV per (algorithm, walk seed) plus a JSON manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algorithm::{
    drive, BuildContext, ParamValue, Params, Registry, RunOptions, StopCriteria,
};
use crate::graph::{generate, Graph, GraphSpec};
use crate::markov::{build_chain, chain_stats, ChainKind, TransitionMatrix};
use crate::problems::{gen_least_squares, gen_logistic, gen_nnpca, ConsensusProblem, NnPcaSource};
use crate::trace::{write_atomic, RunTrace, StopReason};
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub graph: GraphSource,
    #[serde(default = "default_chain")]
    pub chain: ChainKind,
    pub problem: ProblemConfig,
    pub seeds: Seeds,
    pub stop: StopCriteria,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default = "default_true")]
    pub full_diagnostics: bool,
    /// Agent holding the token at `k = 0`.
    #[serde(default)]
    pub start: usize,
    /// Worker threads; all cores when absent.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default, rename = "algorithm")]
    pub algorithms: Vec<AlgorithmConfig>,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_chain() -> ChainKind {
    ChainKind::Simple
}

fn default_record_every() -> usize {
    crate::algorithm::DEFAULT_RECORD_EVERY
}

fn default_true() -> bool {
    true
}

/// Either a generator spec such as `geometric:50:30:15` or an edge-list file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub enum GraphSource {
    Spec(String),
    Edges(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", tag = "family")]
pub enum ProblemConfig {
    LeastSquares {
        #[serde(default = "ls_rows")]
        rows: usize,
        #[serde(default = "ls_dim")]
        dim: usize,
        #[serde(default = "ls_noise")]
        noise_variance: f64,
    },
    Logistic {
        #[serde(default = "logreg_samples")]
        samples: usize,
        #[serde(default = "logreg_dim")]
        dim: usize,
        #[serde(default = "logreg_lambda")]
        lambda: f64,
    },
    NnPca {
        #[serde(default = "nnpca_samples")]
        samples: usize,
        #[serde(default = "nnpca_dim")]
        dim: usize,
        #[serde(default = "nnpca_source")]
        source: NnPcaSource,
    },
}

fn ls_rows() -> usize {
    5
}
fn ls_dim() -> usize {
    10
}
fn ls_noise() -> f64 {
    0.1
}
fn logreg_samples() -> usize {
    10
}
fn logreg_dim() -> usize {
    5
}
fn logreg_lambda() -> f64 {
    0.01
}
fn nnpca_samples() -> usize {
    100
}
fn nnpca_dim() -> usize {
    20
}
fn nnpca_source() -> NnPcaSource {
    NnPcaSource::Synthetic
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub graph: u64,
    pub data: u64,
    /// One run per walk seed for every algorithm.
    pub walk: Vec<u64>,
    /// Offset for the latency clock; the run uses `latency + walk`.
    pub latency: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    /// Registry name.
    pub name: String,
    /// Output label; defaults to the name. Lets one algorithm appear twice.
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub params: Params,
    /// Values tried by `grid_search`; each key overrides `params`.
    #[serde(default)]
    pub grid: BTreeMap<String, Vec<ParamValue>>,
}

impl AlgorithmConfig {
    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.name)
    }
}

const PRESET_LS50: &str = r#"
name = "ls50"
chain = "simple"
graph = { spec = "geometric:50:30:15" }
problem = { family = "least-squares", rows = 5, dim = 10, noise_variance = 0.1 }
seeds = { graph = 1, data = 2, walk = [3], latency = 4 }
stop = { max_iters = 1000000, mse_tol = 1e-10, max_comm = 200000 }
record_every = 10

[[algorithm]]
name = "walkman-prox"

[[algorithm]]
name = "walkman-grad"

[[algorithm]]
name = "rw-inc-const"
params = { alpha = 0.001 }
grid = { alpha = [0.01, 0.001, 0.0001] }

[[algorithm]]
name = "rw-inc-decay"
params = { decay_a = 0.01, decay_b = 5.0 }

[[algorithm]]
name = "extra"
params = { alpha = 0.03 }
grid = { alpha = [0.003, 0.01, 0.03, 0.1] }

[[algorithm]]
name = "exact-diffusion"
params = { alpha = 0.03 }
grid = { alpha = [0.003, 0.01, 0.03, 0.1] }

[[algorithm]]
name = "d-admm"
params = { c = 0.3 }
grid = { c = [0.1, 0.3, 1.0, 3.0] }
"#;

const PRESET_LOGREG: &str = r#"
name = "logreg"
chain = "simple"
graph = { spec = "geometric:50:30:15" }
problem = { family = "logistic", samples = 10, dim = 5, lambda = 0.01 }
seeds = { graph = 1, data = 2, walk = [3], latency = 4 }
stop = { max_iters = 1000000, mse_tol = 1e-10, max_comm = 200000 }
record_every = 10

[[algorithm]]
name = "walkman-prox"

[[algorithm]]
name = "pg-extra"
params = { alpha = 1.0 }
grid = { alpha = [0.3, 1.0, 2.0, 3.0] }

[[algorithm]]
name = "d-admm"
params = { c = 0.01 }
grid = { c = [0.003, 0.01, 0.03, 0.1] }

[[algorithm]]
name = "rw-prox-grad"
params = { decay_a = 0.01, decay_b = 5.0 }
"#;

const PRESET_NNPCA: &str = r#"
name = "nnpca"
chain = "simple"
graph = { spec = "geometric:50:30:15" }
problem = { family = "nn-pca", samples = 100, dim = 20 }
seeds = { graph = 1, data = 2, walk = [3], latency = 4 }
stop = { max_iters = 1000000, grad_tol = 1e-10, max_comm = 200000 }
record_every = 10

[[algorithm]]
name = "walkman-prox"
params = { init = "warm" }

[[algorithm]]
name = "walkman-grad"
params = { init = "warm" }

[[algorithm]]
name = "pg-extra"
params = { alpha = 0.1, init = "warm" }
grid = { alpha = [0.03, 0.1, 0.3] }

[[algorithm]]
name = "d-admm"
params = { c = 1.0, init = "warm" }
grid = { c = [0.3, 1.0, 3.0] }

[[algorithm]]
name = "rw-prox-grad"
params = { decay_a = 0.01, decay_b = 5.0, init = "warm" }
"#;

pub const PRESETS: [&str; 3] = ["ls50", "logreg", "nnpca"];

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        ExperimentConfig::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn preset(name: &str) -> Result<Self> {
        let text = match name {
            "ls50" => PRESET_LS50,
            "logreg" => PRESET_LOGREG,
            "nnpca" => PRESET_NNPCA,
            other => {
                return Err(Error::Config(format!(
                    "unknown preset {other:?} (known: {})",
                    PRESETS.join(", ")
                )));
            }
        };
        ExperimentConfig::from_toml(text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.walk.is_empty() {
            return Err(Error::Config("seeds.walk needs at least one seed".into()));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if let GraphSource::Spec(s) = &self.graph {
            s.parse::<GraphSpec>()?;
        }
        let registry = Registry::default();
        let mut labels = std::collections::BTreeSet::new();
        for a in &self.algorithms {
            let entry = registry
                .get(&a.name)
                .ok_or_else(|| Error::Config(format!("unknown algorithm {:?}", a.name)))?;
            for key in a.params.keys().chain(a.grid.keys()) {
                if !entry.params.contains(&key.as_str()) {
                    return Err(Error::Config(format!(
                        "{}: unknown parameter {key:?}",
                        a.name
                    )));
                }
            }
            if a.grid.values().any(Vec::is_empty) {
                return Err(Error::Config(format!("{}: empty grid axis", a.name)));
            }
            if !labels.insert(a.label()) {
                return Err(Error::Config(format!(
                    "duplicate algorithm label {:?}",
                    a.label()
                )));
            }
        }
        match &self.problem {
            ProblemConfig::LeastSquares { noise_variance, .. } if *noise_variance < 0.0 => {
                Err(Error::Config("noise_variance must be nonnegative".into()))
            }
            ProblemConfig::Logistic { lambda, .. } if *lambda < 0.0 => {
                Err(Error::Config("lambda must be nonnegative".into()))
            }
            _ => Ok(()),
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

/// Graph, chain and problem shared by every run of one experiment.
pub struct Instance {
    pub graph: Graph,
    pub chain: TransitionMatrix,
    pub problem: ConsensusProblem,
}

pub fn build_instance(cfg: &ExperimentConfig) -> Result<Instance> {
    let graph = match &cfg.graph {
        GraphSource::Spec(s) => {
            let mut spec: GraphSpec = s.parse()?;
            spec.seed = cfg.seeds.graph;
            generate(&spec)?
        }
        GraphSource::Edges(path) => Graph::read(path)?,
    };
    if cfg.start >= graph.n() {
        return Err(Error::Config(format!(
            "start agent {} outside [0, {})",
            cfg.start,
            graph.n()
        )));
    }
    let chain = build_chain(&graph, cfg.chain)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seeds.data);
    let n = graph.n();
    let problem = match &cfg.problem {
        ProblemConfig::LeastSquares {
            rows,
            dim,
            noise_variance,
        } => gen_least_squares(n, *rows, *dim, *noise_variance, &mut rng)?,
        ProblemConfig::Logistic {
            samples,
            dim,
            lambda,
        } => gen_logistic(n, *samples, *dim, *lambda, &mut rng)?,
        ProblemConfig::NnPca {
            samples,
            dim,
            source,
        } => gen_nnpca(n, *samples, *dim, source, &mut rng)?,
    };
    Ok(Instance {
        graph,
        chain,
        problem,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub n: usize,
    pub m: usize,
    pub sigma: f64,
    pub lambda2: Option<f64>,
    pub pi_star: f64,
    pub tau_half: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub algorithm: String,
    pub walk_seed: u64,
    /// CSV file name inside the output directory; absent when the run failed.
    pub file: Option<String>,
    pub params: BTreeMap<String, String>,
    pub iterations: usize,
    pub comm_units: u64,
    pub sim_time: f64,
    pub final_error: Option<f64>,
    pub stop: Option<StopReason>,
    pub cover_time: Option<usize>,
    /// `kind: message` of the failure.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub config_hash: String,
    pub graph: GraphSummary,
    pub runs: Vec<RunSummary>,
}

impl Manifest {
    pub fn failures(&self) -> impl Iterator<Item = &RunSummary> {
        self.runs.iter().filter(|r| r.error.is_some())
    }
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        b = b.num_threads(t);
    }
    b.build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn run_one(
    cfg: &ExperimentConfig,
    inst: &Instance,
    name: &str,
    params: &Params,
    walk_seed: u64,
) -> Result<RunTrace> {
    let ctx = BuildContext {
        problem: &inst.problem,
        graph: &inst.graph,
        chain: &inst.chain,
        start: cfg.start,
        walk_seed,
    };
    let mut algo = Registry::default().build(name, &ctx, params)?;
    let opts = RunOptions {
        stop: cfg.stop,
        record_every: cfg.record_every,
        latency_seed: cfg.seeds.latency.wrapping_add(walk_seed),
        full_diagnostics: cfg.full_diagnostics,
    };
    drive(algo.as_mut(), &inst.problem, &opts, &mut |_| {})
}

fn summarize(label: &str, name: &str, walk_seed: u64, outcome: &Result<RunTrace>) -> RunSummary {
    match outcome {
        Ok(t) => RunSummary {
            label: label.into(),
            algorithm: name.into(),
            walk_seed,
            file: None,
            params: t.params.clone(),
            iterations: t.iterations(),
            comm_units: t.comm_units(),
            sim_time: t.sim_time(),
            final_error: t.final_error(),
            stop: Some(t.stop),
            cover_time: t.cover_time,
            error: None,
        },
        Err(e) => RunSummary {
            label: label.into(),
            algorithm: name.into(),
            walk_seed,
            file: None,
            params: BTreeMap::new(),
            iterations: 0,
            comm_units: 0,
            sim_time: 0.0,
            final_error: None,
            stop: None,
            cover_time: None,
            error: Some(format!("{}: {e}", e.kind())),
        },
    }
}

/// Runs every (algorithm, walk seed) pair and writes the CSVs and the
/// manifest into `out_dir`. A failing run is recorded in the manifest and
/// does not stop the others; only setup and I/O errors are returned.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Manifest> {
    cfg.validate()?;
    let inst = build_instance(cfg)?;
    let stats = chain_stats(&inst.chain, 0.5)?;
    std::fs::create_dir_all(out_dir)?;
    let jobs: Vec<(&AlgorithmConfig, u64)> = cfg
        .algorithms
        .iter()
        .flat_map(|a| cfg.seeds.walk.iter().map(move |&s| (a, s)))
        .collect();
    let outcomes: Vec<(RunSummary, Option<RunTrace>)> = pool(cfg.threads)?.install(|| {
        jobs.par_iter()
            .map(|&(a, seed)| {
                let outcome = run_one(cfg, &inst, &a.name, &a.params, seed);
                let summary = summarize(a.label(), &a.name, seed, &outcome);
                (summary, outcome.ok())
            })
            .collect()
    });
    let mut runs = Vec::with_capacity(outcomes.len());
    for (mut summary, trace) in outcomes {
        if let Some(t) = trace {
            let file = format!("{}_seed{}.csv", summary.label, summary.walk_seed);
            t.write_csv(out_dir.join(&file))?;
            summary.file = Some(file);
        }
        runs.push(summary);
    }
    let manifest = Manifest {
        name: cfg.name.clone(),
        config_hash: cfg.hash(),
        graph: GraphSummary {
            n: inst.graph.n(),
            m: inst.graph.m(),
            sigma: stats.sigma,
            lambda2: stats.lambda2,
            pi_star: stats.pi_star,
            tau_half: stats.tau,
        },
        runs,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    write_atomic(&out_dir.join(MANIFEST_FILE), json.as_bytes())?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub params: Params,
    pub final_error: Option<f64>,
    pub comm_units: u64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridResult {
    pub algorithm: String,
    pub best: Params,
    pub points: Vec<GridPoint>,
}

fn cartesian(base: &Params, grid: &BTreeMap<String, Vec<ParamValue>>) -> Vec<Params> {
    let mut out = vec![base.clone()];
    for (key, values) in grid {
        out = out
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.insert(key.clone(), v.clone());
                    q
                })
            })
            .collect();
    }
    out
}

/// Penalty-like keys prefer the larger value on ties; step sizes the smaller.
fn tie_key(params: &Params) -> Vec<f64> {
    params
        .iter()
        .filter_map(|(k, v)| match v {
            ParamValue::Number(x) if matches!(k.as_str(), "beta" | "c") => Some(-x),
            ParamValue::Number(x) => Some(*x),
            ParamValue::Text(_) => None,
        })
        .collect()
}

/// Evaluates every point of `grid` (layered over the algorithm's configured
/// params) on the first walk seed under the config's stop criteria and
/// returns the one with the lowest final error. Errors below `mse_tol` count
/// as equal, and then fewer communication units win, then the tie rule.
pub fn grid_search(
    cfg: &ExperimentConfig,
    label: &str,
    grid: &BTreeMap<String, Vec<ParamValue>>,
) -> Result<GridResult> {
    cfg.validate()?;
    let algo = cfg
        .algorithms
        .iter()
        .find(|a| a.label() == label)
        .ok_or_else(|| Error::Config(format!("algorithm {label:?} is not in the config")))?;
    let grid = if grid.is_empty() { &algo.grid } else { grid };
    let inst = build_instance(cfg)?;
    let seed = cfg.seeds.walk[0];
    let candidates = cartesian(&algo.params, grid);
    let points: Vec<GridPoint> = pool(cfg.threads)?.install(|| {
        candidates
            .par_iter()
            .map(
                |params| match run_one(cfg, &inst, &algo.name, params, seed) {
                    Ok(t) => GridPoint {
                        params: params.clone(),
                        final_error: t.final_error(),
                        comm_units: t.comm_units(),
                        error: None,
                    },
                    Err(e) => GridPoint {
                        params: params.clone(),
                        final_error: None,
                        comm_units: 0,
                        error: Some(format!("{}: {e}", e.kind())),
                    },
                },
            )
            .collect()
    });
    let floor = cfg.stop.mse_tol.or(cfg.stop.grad_tol).unwrap_or(0.0);
    let best = points
        .iter()
        .filter(|p| p.error.is_none())
        .filter_map(|p| {
            p.final_error
                .filter(|e| e.is_finite())
                .map(|e| (p, e.max(floor)))
        })
        .min_by(|(a, ea), (b, eb)| {
            ea.total_cmp(eb)
                .then(a.comm_units.cmp(&b.comm_units))
                .then_with(|| {
                    let (ka, kb) = (tie_key(&a.params), tie_key(&b.params));
                    ka.iter()
                        .zip(&kb)
                        .map(|(x, y)| x.total_cmp(y))
                        .find(|o| o.is_ne())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
        })
        .map(|(p, _)| p.params.clone())
        .ok_or_else(|| Error::Search(format!("{label}: every grid point failed or diverged")))?;
    Ok(GridResult {
        algorithm: label.into(),
        best,
        points,
    })
}

/// Gnuplot script plotting each CSV of `manifest` on log-scale error against
/// communication units and simulated time.
pub fn gnuplot_script(manifest: &Manifest, error_column: &str) -> String {
    let col = match error_column {
        "nnpca_gap" => 9,
        _ => 4,
    };
    let files: Vec<(&str, &str)> = manifest
        .runs
        .iter()
        .filter_map(|r| r.file.as_deref().map(|f| (f, r.label.as_str())))
        .collect();
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set logscale y");
    let _ = writeln!(s, "set key outside");
    let _ = writeln!(s, "set terminal pngcairo size 1400,500");
    let _ = writeln!(s, "set output '{}.png'", manifest.name);
    let _ = writeln!(s, "set multiplot layout 1,2");
    for (x, xlabel) in [(2, "communication units"), (3, "simulated time")] {
        let _ = writeln!(s, "set xlabel '{xlabel}'");
        let _ = writeln!(s, "set ylabel '{error_column}'");
        let plots: Vec<String> = files
            .iter()
            .map(|(f, label)| format!("'{f}' every ::1 using {x}:{col} with lines title '{label}'"))
            .collect();
        let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    }
    let _ = writeln!(s, "unset multiplot");
    s
}
