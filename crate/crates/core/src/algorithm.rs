//! The common interface every optimizer implements, a name-keyed registry of
//! constructors, and the run loop that records traces.

use std::collections::BTreeMap;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::baselines::{broadcast, DAdmm, ExactDiffusion, Extra, RwIncremental, StepSchedule};
use crate::graph::Graph;
use crate::markov::TransitionMatrix;
use crate::metrics::{ClockModel, CommLedger};
use crate::problems::ConsensusProblem;
use crate::trace::{RunTrace, StopReason, TraceRow};
use crate::walkman::{default_beta, InitMode, Variant, Walkman, DIVERGENCE_NORM};
use crate::{Error, Result, Vector};

pub const DEFAULT_RECORD_EVERY: usize = 10;

/// Diagnostic columns; `None` where a quantity does not apply.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics {
    pub mse: Option<f64>,
    pub l_beta: Option<f64>,
    pub m_beta: Option<f64>,
    pub h_beta: Option<f64>,
    pub grad_g_sq: Option<f64>,
    pub nnpca_gap: Option<f64>,
}

pub trait Algorithm: Send {
    fn name(&self) -> &str;

    /// `p`-vector transmissions per iteration. Also the number of parallel
    /// latency draws whose maximum is one iteration's duration.
    fn comm_per_iteration(&self) -> u64;

    fn step(&mut self, problem: &ConsensusProblem) -> Result<()>;

    fn iterations(&self) -> usize;

    /// Current consensus estimate.
    fn estimate(&self) -> Vector;

    /// `full = false` restricts to the cheap columns (error and NN-PCA gap).
    fn diagnostics(&self, problem: &ConsensusProblem, full: bool) -> Result<Diagnostics>;

    /// Resolved parameters, for the manifest.
    fn params(&self) -> BTreeMap<String, String>;

    /// Size used by the divergence detector.
    fn magnitude(&self) -> f64 {
        self.estimate().norm()
    }

    fn cover_time(&self) -> Option<usize> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopCriteria {
    pub max_iters: usize,
    pub mse_tol: Option<f64>,
    /// Applied to `‖g^k‖²` when available, otherwise to the NN-PCA gap.
    pub grad_tol: Option<f64>,
    pub max_comm: Option<u64>,
}

impl StopCriteria {
    pub fn iterations(max_iters: usize) -> Self {
        StopCriteria {
            max_iters,
            mse_tol: None,
            grad_tol: None,
            max_comm: None,
        }
    }

    /// First satisfied criterion in the order mse, grad, iterations, comm.
    pub fn check(&self, row: &TraceRow) -> Option<StopReason> {
        if let (Some(tol), Some(e)) = (self.mse_tol, row.mse) {
            if e <= tol {
                return Some(StopReason::MseTol);
            }
        }
        if let (Some(tol), Some(g)) = (self.grad_tol, row.grad_g_sq.or(row.nnpca_gap)) {
            if g <= tol {
                return Some(StopReason::GradTol);
            }
        }
        if row.k >= self.max_iters {
            return Some(StopReason::MaxIters);
        }
        if self.max_comm.is_some_and(|c| row.comm_units >= c) {
            return Some(StopReason::MaxComm);
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub stop: StopCriteria,
    pub record_every: usize,
    pub latency_seed: u64,
    pub full_diagnostics: bool,
}

impl RunOptions {
    pub fn new(stop: StopCriteria) -> Self {
        RunOptions {
            stop,
            record_every: DEFAULT_RECORD_EVERY,
            latency_seed: 0,
            full_diagnostics: true,
        }
    }
}

/// Steps `algo` until a stop criterion holds on a recorded row. Rows are
/// recorded at `k = 0`, every `record_every` iterations, and whenever the
/// iteration or communication budget is reached. `observer` sees every row.
pub fn drive(
    algo: &mut dyn Algorithm,
    problem: &ConsensusProblem,
    opts: &RunOptions,
    observer: &mut dyn FnMut(&TraceRow),
) -> Result<RunTrace> {
    if opts.record_every == 0 {
        return Err(Error::Parameter("record_every must be at least 1".into()));
    }
    let per = algo.comm_per_iteration();
    let mut ledger = CommLedger::new(per);
    let mut clock = ClockModel::new(opts.latency_seed);
    let record =
        |algo: &dyn Algorithm, ledger: &CommLedger, clock: &ClockModel| -> Result<TraceRow> {
            let d = algo.diagnostics(problem, opts.full_diagnostics)?;
            Ok(TraceRow {
                k: algo.iterations(),
                comm_units: ledger.units(),
                sim_time: clock.time(),
                mse: d.mse,
                l_beta: d.l_beta,
                m_beta: d.m_beta,
                h_beta: d.h_beta,
                grad_g_sq: d.grad_g_sq,
                nnpca_gap: d.nnpca_gap,
            })
        };
    let mut rows = Vec::new();
    let mut row = record(algo, &ledger, &clock)?;
    observer(&row);
    rows.push(row);
    let stop = loop {
        if let Some(reason) = opts.stop.check(&row) {
            break reason;
        }
        algo.step(problem)?;
        ledger.charge();
        clock.advance(per)?;
        let k = algo.iterations();
        let norm = algo.magnitude();
        if !norm.is_finite() || norm > DIVERGENCE_NORM {
            return Err(Error::Divergence { iteration: k, norm });
        }
        let budget_hit =
            k >= opts.stop.max_iters || opts.stop.max_comm.is_some_and(|c| ledger.units() >= c);
        if k.is_multiple_of(opts.record_every) || budget_hit {
            row = record(algo, &ledger, &clock)?;
            observer(&row);
            rows.push(row);
        }
    };
    Ok(RunTrace {
        algorithm: algo.name().to_string(),
        params: algo.params(),
        rows,
        stop,
        cover_time: algo.cover_time(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Text(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Number(v) => write!(f, "{v}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

pub type Params = BTreeMap<String, ParamValue>;

/// Typed access to a parameter map that also rejects unexpected keys.
pub struct ParamReader<'a> {
    algo: &'a str,
    params: &'a Params,
}

impl<'a> ParamReader<'a> {
    pub fn new(algo: &'a str, params: &'a Params, allowed: &[&str]) -> Result<Self> {
        if let Some(bad) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::Config(format!(
                "{algo}: unknown parameter {bad:?} (accepted: {})",
                allowed.join(", ")
            )));
        }
        Ok(ParamReader { algo, params })
    }

    pub fn number(&self, key: &str) -> Result<Option<f64>> {
        match self.params.get(key) {
            None => Ok(None),
            Some(ParamValue::Number(v)) => Ok(Some(*v)),
            Some(ParamValue::Text(s)) => Err(Error::Config(format!(
                "{}: {key} must be a number, got {s:?}",
                self.algo
            ))),
        }
    }

    pub fn positive(&self, key: &str) -> Result<Option<f64>> {
        match self.number(key)? {
            Some(v) if !(v > 0.0 && v.is_finite()) => Err(Error::Config(format!(
                "{}: {key} must be positive, got {v}",
                self.algo
            ))),
            other => Ok(other),
        }
    }

    pub fn text(&self, key: &str) -> Result<Option<&'a str>> {
        match self.params.get(key) {
            None => Ok(None),
            Some(ParamValue::Text(s)) => Ok(Some(s.as_str())),
            Some(ParamValue::Number(v)) => Err(Error::Config(format!(
                "{}: {key} must be text, got {v}",
                self.algo
            ))),
        }
    }
}

/// Everything a constructor may need besides its own parameters.
#[derive(Clone, Copy)]
pub struct BuildContext<'a> {
    pub problem: &'a ConsensusProblem,
    pub graph: &'a Graph,
    pub chain: &'a TransitionMatrix,
    pub start: usize,
    pub walk_seed: u64,
}

pub type Factory = fn(&BuildContext<'_>, &Params) -> Result<Box<dyn Algorithm>>;

#[derive(Clone)]
pub struct Entry {
    pub description: &'static str,
    pub params: &'static [&'static str],
    pub factory: Factory,
}

/// Algorithms by name.
#[derive(Clone)]
pub struct Registry {
    entries: BTreeMap<String, Entry>,
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.entries.keys()).finish()
    }
}

impl Registry {
    pub fn empty() -> Self {
        Registry {
            entries: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &str, entry: Entry) {
        self.entries.insert(name.to_string(), entry);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn get(&self, name: &str) -> Option<&Entry> {
        self.entries.get(name)
    }

    pub fn build(
        &self,
        name: &str,
        ctx: &BuildContext<'_>,
        params: &Params,
    ) -> Result<Box<dyn Algorithm>> {
        let entry = self.entries.get(name).ok_or_else(|| {
            Error::Config(format!(
                "unknown algorithm {name:?} (known: {})",
                self.names().collect::<Vec<_>>().join(", ")
            ))
        })?;
        (entry.factory)(ctx, params)
    }
}

impl Default for Registry {
    fn default() -> Self {
        let mut r = Registry::empty();
        r.register(
            "walkman-prox",
            Entry {
                description: "Walkman with exact local prox",
                params: WALKMAN_KEYS,
                factory: build_walkman_prox,
            },
        );
        r.register(
            "walkman-grad",
            Entry {
                description: "Walkman with a linearized local step",
                params: WALKMAN_KEYS,
                factory: build_walkman_grad,
            },
        );
        r.register(
            "rw-inc-const",
            Entry {
                description: "random-walk incremental gradient, constant step",
                params: &["alpha", "init", "warm_seed"],
                factory: build_rw_const,
            },
        );
        r.register(
            "rw-inc-decay",
            Entry {
                description: "random-walk incremental gradient, step min(a, b/k)",
                params: &["decay_a", "decay_b", "init", "warm_seed"],
                factory: build_rw_decay,
            },
        );
        r.register(
            "rw-prox-grad",
            Entry {
                description: "random-walk proximal gradient",
                params: &["alpha", "decay_a", "decay_b", "init", "warm_seed"],
                factory: build_rw_prox_grad,
            },
        );
        r.register(
            "extra",
            Entry {
                description: "EXTRA (smooth problems)",
                params: GOSSIP_KEYS,
                factory: build_extra,
            },
        );
        r.register(
            "pg-extra",
            Entry {
                description: "proximal EXTRA",
                params: GOSSIP_KEYS,
                factory: build_pg_extra,
            },
        );
        r.register(
            "exact-diffusion",
            Entry {
                description: "exact diffusion (smooth problems)",
                params: GOSSIP_KEYS,
                factory: build_exact_diffusion,
            },
        );
        r.register(
            "d-admm",
            Entry {
                description: "decentralized ADMM",
                params: &["c", "init", "warm_seed"],
                factory: build_dadmm,
            },
        );
        r
    }
}

const WALKMAN_KEYS: &[&str] = &["beta", "init", "warm_seed"];
const GOSSIP_KEYS: &[&str] = &["alpha", "init", "warm_seed"];

/// Baseline step defaults; experiment configs normally grid-search these.
pub const DEFAULT_RW_ALPHA: f64 = 1e-3;
pub const DEFAULT_DECAY_A: f64 = 0.01;
pub const DEFAULT_DECAY_B: f64 = 5.0;
pub const DEFAULT_DADMM_C: f64 = 1.0;

fn parse_init(ctx: &BuildContext<'_>, r: &ParamReader<'_>) -> Result<InitMode> {
    let mode = r.text("init")?.unwrap_or("zeros");
    Ok(match mode {
        "zeros" => InitMode::Zeros,
        "stationary-local" => InitMode::StationaryLocal,
        "ls-closed-form" => InitMode::LeastSquaresClosedForm,
        "warm" => {
            let seed = match r.number("warm_seed")? {
                Some(s) => s as u64,
                None => ctx.walk_seed,
            };
            InitMode::Warm(warm_start(ctx.problem, seed))
        }
        other => return Err(Error::Config(format!("unknown init mode {other:?}"))),
    })
}

/// Baselines start from zeros or from the same warm point Walkman uses.
fn baseline_start(ctx: &BuildContext<'_>, r: &ParamReader<'_>) -> Result<Option<Vector>> {
    match r.text("init")?.unwrap_or("zeros") {
        "zeros" => Ok(None),
        "warm" => {
            let seed = r.number("warm_seed")?.map_or(ctx.walk_seed, |s| s as u64);
            Ok(Some(warm_start(ctx.problem, seed)))
        }
        other => Err(Error::Config(format!(
            "{}: baselines accept init \"zeros\" or \"warm\", got {other:?}",
            r.algo
        ))),
    }
}

/// `prox_r` of a standard Gaussian draw: a random point in the domain of `r`.
pub fn warm_start(problem: &ConsensusProblem, seed: u64) -> Vector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Vector::from_fn(problem.p(), |_, _| StandardNormal.sample(&mut rng));
    problem.regularizer().prox(&g, 1.0)
}

fn build_walkman(
    ctx: &BuildContext<'_>,
    params: &Params,
    variant: Variant,
    name: &str,
) -> Result<Box<dyn Algorithm>> {
    let r = ParamReader::new(name, params, WALKMAN_KEYS)?;
    let beta = r
        .positive("beta")?
        .unwrap_or_else(|| default_beta(ctx.problem, variant));
    let init = parse_init(ctx, &r)?;
    Ok(Box::new(Walkman::new(
        ctx.problem,
        ctx.chain,
        variant,
        beta,
        &init,
        ctx.start,
        ctx.walk_seed,
    )?))
}

fn build_walkman_prox(ctx: &BuildContext<'_>, params: &Params) -> Result<Box<dyn Algorithm>> {
    build_walkman(ctx, params, Variant::Prox, "walkman-prox")
}

fn build_walkman_grad(ctx: &BuildContext<'_>, params: &Params) -> Result<Box<dyn Algorithm>> {
    build_walkman(ctx, params, Variant::Gradient, "walkman-grad")
}

fn rw(
    ctx: &BuildContext<'_>,
    r: &ParamReader<'_>,
    name: &str,
    schedule: StepSchedule,
) -> Result<Box<dyn Algorithm>> {
    let mut algo = RwIncremental::new(
        name,
        ctx.problem,
        ctx.chain,
        schedule,
        ctx.start,
        ctx.walk_seed,
    )?;
    if let Some(x0) = baseline_start(ctx, r)? {
        algo = algo.with_initial(x0);
    }
    Ok(Box::new(algo))
}

fn build_rw_const(ctx: &BuildContext<'_>, params: &Params) -> Result<Box<dyn Algorithm>> {
    let r = ParamReader::new("rw-inc-const", params, &["alpha", "init", "warm_seed"])?;
    let alpha = r.positive("alpha")?.unwrap_or(DEFAULT_RW_ALPHA);
    rw(ctx, &r, "rw-inc-const", StepSchedule::Constant(alpha))
}

fn decay(r: &ParamReader<'_>) -> Result<StepSchedule> {
    Ok(StepSchedule::Decaying {
        a: r.positive("decay_a")?.unwrap_or(DEFAULT_DECAY_A),
        b: r.positive("decay_b")?.unwrap_or(DEFAULT_DECAY_B),
    })
}

fn build_rw_decay(ctx: &BuildContext<'_>, params: &Params) -> Result<Box<dyn Algorithm>> {
    let r = ParamReader::new(
        "rw-inc-decay",
        params,
        &["decay_a", "decay_b", "init", "warm_seed"],
    )?;
    rw(ctx, &r, "rw-inc-decay", decay(&r)?)
}

fn build_rw_prox_grad(ctx: &BuildContext<'_>, params: &Params) -> Result<Box<dyn Algorithm>> {
    let r = ParamReader::new(
        "rw-prox-grad",
        params,
        &["alpha", "decay_a", "decay_b", "init", "warm_seed"],
    )?;
    let schedule = match r.positive("alpha")? {
        Some(a) => {
            if params.contains_key("decay_a") || params.contains_key("decay_b") {
                return Err(Error::Config(
                    "rw-prox-grad: give either alpha or decay_a/decay_b".into(),
                ));
            }
            StepSchedule::Constant(a)
        }
        None => decay(&r)?,
    };
    rw(ctx, &r, "rw-prox-grad", schedule)
}

fn gossip_params(
    ctx: &BuildContext<'_>,
    name: &str,
    params: &Params,
) -> Result<(f64, Option<Vector>)> {
    let r = ParamReader::new(name, params, GOSSIP_KEYS)?;
    let alpha = r
        .positive("alpha")?
        .unwrap_or(1.0 / ctx.problem.lipschitz().max(1e-12));
    Ok((alpha, baseline_start(ctx, &r)?))
}

fn build_extra(ctx: &BuildContext<'_>, params: &Params) -> Result<Box<dyn Algorithm>> {
    let (alpha, x0) = gossip_params(ctx, "extra", params)?;
    let algo = Extra::new(ctx.problem, ctx.graph, alpha, false)?;
    Ok(Box::new(match x0 {
        Some(x0) => algo.with_initial(&x0),
        None => algo,
    }))
}

fn build_pg_extra(ctx: &BuildContext<'_>, params: &Params) -> Result<Box<dyn Algorithm>> {
    let (alpha, x0) = gossip_params(ctx, "pg-extra", params)?;
    let algo = Extra::new(ctx.problem, ctx.graph, alpha, true)?;
    Ok(Box::new(match x0 {
        Some(x0) => algo.with_initial(&x0),
        None => algo,
    }))
}

fn build_exact_diffusion(ctx: &BuildContext<'_>, params: &Params) -> Result<Box<dyn Algorithm>> {
    let (alpha, x0) = gossip_params(ctx, "exact-diffusion", params)?;
    let algo = ExactDiffusion::new(ctx.problem, ctx.graph, alpha)?;
    Ok(Box::new(match x0 {
        Some(x0) => algo.with_initial(broadcast(&x0, ctx.problem.n())),
        None => algo,
    }))
}

fn build_dadmm(ctx: &BuildContext<'_>, params: &Params) -> Result<Box<dyn Algorithm>> {
    let r = ParamReader::new("d-admm", params, &["c", "init", "warm_seed"])?;
    let c = r.positive("c")?.unwrap_or(DEFAULT_DADMM_C);
    let algo = DAdmm::new(ctx.problem, ctx.graph, c)?;
    Ok(Box::new(match baseline_start(ctx, &r)? {
        Some(x0) => algo.with_initial(&x0),
        None => algo,
    }))
}
