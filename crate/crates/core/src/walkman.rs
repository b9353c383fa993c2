//! The Walkman iteration: a token `x̄` walks over the network and the visited
//! agent refreshes its local pair `(yᵢ, zᵢ)`.
//!
//! One step at agent `i`:
//!
//! ```text
//! x   ← prox_{r/β}(x̄)
//! yᵢ  ← prox_{fᵢ/β}(x + zᵢ/β)            (prox variant)
//!     | x + zᵢ/β − ∇fᵢ(yᵢ)/β               (gradient variant)
//! zᵢ  ← zᵢ + β(x − yᵢ)
//! x̄   ← x̄ + (1/n)[(yᵢ − zᵢ/β)_new − (yᵢ − zᵢ/β)_old]
//! ```
//!
//! The token is updated incrementally so each step costs `O(p)` plus one
//! local prox or gradient evaluation.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algorithm::{drive, Algorithm, Diagnostics, RunOptions};
use crate::markov::{TransitionMatrix, WalkSampler};
use crate::metrics::{self, Lyapunov};
use crate::problems::{ConsensusProblem, ProblemKind};
use crate::trace::{RunTrace, TraceRow};
use crate::{Error, Result, Vector};

pub const DEFAULT_BETA_MARGIN: f64 = 1e-3;
/// `‖x‖` beyond this aborts a run.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Prox,
    Gradient,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitMode {
    /// `yᵢ = zᵢ = 0`.
    Zeros,
    /// `yᵢ` solves `∇fᵢ(y) = βy` locally and `zᵢ = βyᵢ`.
    StationaryLocal,
    /// Least squares only: `yᵢ = (AᵢᵀAᵢ − βI)⁻¹Aᵢᵀbᵢ`, `zᵢ = ∇fᵢ(yᵢ)`.
    LeastSquaresClosedForm,
    /// `yᵢ = x₀`, `zᵢ = ∇fᵢ(x₀)`. The token then starts at `x₀ − mean ∇fᵢ(x₀)/β`
    /// rather than zero.
    Warm(Vector),
}

impl InitMode {
    pub fn name(&self) -> &'static str {
        match self {
            InitMode::Zeros => "zeros",
            InitMode::StationaryLocal => "stationary-local",
            InitMode::LeastSquaresClosedForm => "ls-closed-form",
            InitMode::Warm(_) => "warm",
        }
    }
}

/// Smallest penalty covered by the convergence guarantees, plus `margin`:
/// `max{γ, 2L+2}` for the prox variant, `max{γ, 2L²+L+2}` for the gradient
/// variant, and at least `2σ*_max + 2` on least squares.
pub fn default_beta(problem: &ConsensusProblem, variant: Variant) -> f64 {
    let sigma = problem.least_squares_data().map(|d| d.sigma_max_star);
    default_beta_with(
        problem.lipschitz(),
        problem.gamma(),
        variant,
        sigma,
        DEFAULT_BETA_MARGIN,
    )
}

pub fn default_beta_with(
    lip: f64,
    gamma: f64,
    variant: Variant,
    sigma_max_star: Option<f64>,
    margin: f64,
) -> f64 {
    let base = match variant {
        Variant::Prox => 2.0 * lip + 2.0,
        Variant::Gradient => 2.0 * lip * lip + lip + 2.0,
    };
    let ls = sigma_max_star.map_or(0.0, |s| 2.0 * s + 2.0);
    gamma.max(base).max(ls) + margin
}

/// Changes made by the most recent step at agent `agent`.
#[derive(Debug, Clone, PartialEq)]
pub struct LastStep {
    pub agent: usize,
    pub dx: Vector,
    pub dy: Vector,
    pub dz: Vector,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub agent: usize,
    pub dx_sq: f64,
    pub dy_sq: f64,
    pub dz_sq: f64,
}

#[derive(Debug, Clone)]
pub struct WalkmanState {
    xbar: Vector,
    x: Vector,
    y: Vec<Vector>,
    z: Vec<Vector>,
    beta: f64,
    k: usize,
    variant: Variant,
    last_update: Vec<Option<usize>>,
    last_disp_sq: Vec<f64>,
    unvisited: usize,
    cover_time: Option<usize>,
    last_step: Option<LastStep>,
}

impl WalkmanState {
    pub fn init(
        problem: &ConsensusProblem,
        beta: f64,
        variant: Variant,
        mode: &InitMode,
    ) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Parameter(format!(
                "beta must be positive, got {beta}"
            )));
        }
        if beta <= problem.gamma() {
            return Err(Error::Parameter(format!(
                "beta = {beta} must exceed the semiconvexity modulus {}",
                problem.gamma()
            )));
        }
        let (n, p) = (problem.n(), problem.p());
        let (y, z): (Vec<Vector>, Vec<Vector>) = match mode {
            InitMode::Zeros => (vec![Vector::zeros(p); n], vec![Vector::zeros(p); n]),
            InitMode::StationaryLocal => {
                let y = (0..n)
                    .map(|i| problem.local(i).stationary_point(beta))
                    .collect::<Result<Vec<_>>>()?;
                let z = y.iter().map(|v| v * beta).collect();
                (y, z)
            }
            InitMode::LeastSquaresClosedForm => {
                let data = problem.least_squares_data().ok_or_else(|| {
                    Error::Config(
                        "ls-closed-form initialization needs a least-squares problem".into(),
                    )
                })?;
                if beta <= data.sigma_max_star {
                    return Err(Error::Parameter(format!(
                        "ls-closed-form needs beta > sigma*_max = {}, got {beta}",
                        data.sigma_max_star
                    )));
                }
                let y = data
                    .blocks
                    .iter()
                    .map(|q| crate::problems::LocalObjective::stationary_point(q, beta))
                    .collect::<Result<Vec<_>>>()?;
                let z = (0..n).map(|i| problem.local(i).grad(&y[i])).collect();
                (y, z)
            }
            InitMode::Warm(x0) => {
                if x0.len() != p {
                    return Err(Error::Parameter(format!(
                        "warm start has length {} but p = {p}",
                        x0.len()
                    )));
                }
                let z = (0..n).map(|i| problem.local(i).grad(x0)).collect();
                (vec![x0.clone(); n], z)
            }
        };
        let mut xbar = Vector::zeros(p);
        for (yi, zi) in y.iter().zip(&z) {
            xbar += yi - zi / beta;
        }
        xbar /= n as f64;
        let x = problem.regularizer().prox(&xbar, beta);
        Ok(WalkmanState {
            xbar,
            x,
            y,
            z,
            beta,
            k: 0,
            variant,
            last_update: vec![None; n],
            last_disp_sq: vec![0.0; n],
            unvisited: n,
            cover_time: None,
            last_step: None,
        })
    }

    /// One visit of the token at `agent`.
    pub fn step(&mut self, agent: usize, problem: &ConsensusProblem) -> Result<StepReport> {
        let n = self.y.len();
        if agent >= n {
            return Err(Error::Parameter(format!(
                "agent {agent} out of range for n = {n}"
            )));
        }
        let beta = self.beta;
        let f = problem.local(agent);
        let x_new = problem.regularizer().prox(&self.xbar, beta);
        let y_old = &self.y[agent];
        let z_old = &self.z[agent];
        let y_new = match self.variant {
            Variant::Prox => f.prox(&(&x_new + z_old / beta), beta)?,
            Variant::Gradient => &x_new + (z_old - f.grad(y_old)) / beta,
        };
        let z_new = z_old + (&x_new - &y_new) * beta;
        let dy = &y_new - y_old;
        let dz = &z_new - z_old;
        // (y − z/β)_new − (y − z/β)_old
        self.xbar += (&dy - &dz / beta) / n as f64;
        let dx = &x_new - &self.x;

        let report = StepReport {
            agent,
            dx_sq: dx.norm_squared(),
            dy_sq: dy.norm_squared(),
            dz_sq: dz.norm_squared(),
        };
        self.last_disp_sq[agent] = report.dy_sq;
        self.y[agent] = y_new;
        self.z[agent] = z_new;
        self.x = x_new;
        if self.last_update[agent].is_none() {
            self.unvisited -= 1;
        }
        self.last_update[agent] = Some(self.k);
        self.k += 1;
        if self.unvisited == 0 && self.cover_time.is_none() {
            self.cover_time = Some(self.k);
        }
        self.last_step = Some(LastStep { agent, dx, dy, dz });

        let norm = self.x.norm();
        if !norm.is_finite() || norm > DIVERGENCE_NORM {
            return Err(Error::Divergence {
                iteration: self.k,
                norm,
            });
        }
        Ok(report)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn xbar(&self) -> &Vector {
        &self.xbar
    }

    pub fn x(&self) -> &Vector {
        &self.x
    }

    pub fn ys(&self) -> &[Vector] {
        &self.y
    }

    pub fn zs(&self) -> &[Vector] {
        &self.z
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Iteration of each agent's most recent visit.
    pub fn last_update(&self) -> &[Option<usize>] {
        &self.last_update
    }

    /// `‖yᵢ^{τ(k,i)+1} − yᵢ^{τ(k,i)}‖²` per agent; zero before the first visit.
    pub fn last_displacements_sq(&self) -> &[f64] {
        &self.last_disp_sq
    }

    /// Number of steps after which every agent had been visited.
    pub fn cover_time(&self) -> Option<usize> {
        self.cover_time
    }

    pub fn last_step(&self) -> Option<&LastStep> {
        self.last_step.as_ref()
    }

    /// The `x` the next step will compute, `prox_{r/β}(x̄)`.
    pub fn peek_x(&self, problem: &ConsensusProblem) -> Vector {
        problem.regularizer().prox(&self.xbar, self.beta)
    }

    /// `‖x̄ − (1/n) Σ (yᵢ − zᵢ/β)‖`, recomputed from scratch.
    pub fn token_residual(&self) -> f64 {
        let mut acc = Vector::zeros(self.xbar.len());
        for (y, z) in self.y.iter().zip(&self.z) {
            acc += y - z / self.beta;
        }
        (acc / self.n() as f64 - &self.xbar).norm()
    }
}

/// Walkman driven by a random walk over a transition matrix.
#[derive(Debug, Clone)]
pub struct Walkman {
    name: String,
    state: WalkmanState,
    sampler: WalkSampler,
    rng: ChaCha8Rng,
    current: usize,
    init: &'static str,
}

impl Walkman {
    pub fn new(
        problem: &ConsensusProblem,
        chain: &TransitionMatrix,
        variant: Variant,
        beta: f64,
        init: &InitMode,
        start: usize,
        walk_seed: u64,
    ) -> Result<Self> {
        if chain.n() != problem.n() {
            return Err(Error::Parameter(format!(
                "chain has {} states but the problem has {} agents",
                chain.n(),
                problem.n()
            )));
        }
        if start >= problem.n() {
            return Err(Error::Parameter(format!("start node {start} out of range")));
        }
        let name = match variant {
            Variant::Prox => "walkman-prox",
            Variant::Gradient => "walkman-grad",
        };
        Ok(Walkman {
            name: name.into(),
            state: WalkmanState::init(problem, beta, variant, init)?,
            sampler: WalkSampler::new(chain),
            rng: ChaCha8Rng::seed_from_u64(walk_seed),
            current: start,
            init: init.name(),
        })
    }

    pub fn state(&self) -> &WalkmanState {
        &self.state
    }

    /// Agent the token will visit next.
    pub fn current(&self) -> usize {
        self.current
    }
}

impl Algorithm for Walkman {
    fn name(&self) -> &str {
        &self.name
    }

    fn comm_per_iteration(&self) -> u64 {
        1
    }

    fn step(&mut self, problem: &ConsensusProblem) -> Result<()> {
        self.state.step(self.current, problem)?;
        self.current = self.sampler.next(self.current, &mut self.rng);
        Ok(())
    }

    fn iterations(&self) -> usize {
        self.state.k
    }

    fn estimate(&self) -> Vector {
        self.state.x.clone()
    }

    fn diagnostics(&self, problem: &ConsensusProblem, full: bool) -> Result<Diagnostics> {
        let st = &self.state;
        let mut d = Diagnostics {
            mse: problem.relative_error(&st.x),
            ..Diagnostics::default()
        };
        if problem.kind() == ProblemKind::NnPca {
            d.nnpca_gap = Some(metrics::nnpca_optimality_gap(&st.x, &st.y, problem)?);
        }
        if full {
            d.l_beta = Some(metrics::lyapunov(st, problem, Lyapunov::L)?);
            if st.variant == Variant::Gradient {
                d.m_beta = Some(metrics::lyapunov(st, problem, Lyapunov::M)?);
            }
            if problem.least_squares_data().is_some() {
                d.h_beta = Some(metrics::h_beta(&st.y, problem, st.beta)?);
            }
            d.grad_g_sq = Some(metrics::subgrad_norm_sq(st, problem));
        }
        Ok(d)
    }

    fn params(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("beta".into(), self.state.beta.to_string());
        m.insert("init".into(), self.init.into());
        m
    }

    fn cover_time(&self) -> Option<usize> {
        self.state.cover_time
    }
}

/// Runs Walkman from `start` until a stop criterion fires.
#[allow(clippy::too_many_arguments)]
pub fn run(
    problem: &ConsensusProblem,
    chain: &TransitionMatrix,
    variant: Variant,
    beta: f64,
    init: &InitMode,
    start: usize,
    walk_seed: u64,
    opts: &RunOptions,
    observer: &mut dyn FnMut(&TraceRow),
) -> Result<RunTrace> {
    let mut w = Walkman::new(problem, chain, variant, beta, init, start, walk_seed)?;
    drive(&mut w, problem, opts, observer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{Isotropic, LeastSquaresData, LocalObjective, Quadratic, Zero};
    use std::sync::Arc;

    fn scalar_ls(bs: &[f64]) -> ConsensusProblem {
        let blocks = bs
            .iter()
            .map(|&b| {
                Quadratic::new(
                    crate::Matrix::from_element(1, 1, 1.0),
                    Vector::from_element(1, b),
                )
                .unwrap()
            })
            .collect();
        ConsensusProblem::least_squares(LeastSquaresData::new(blocks)).unwrap()
    }

    #[test]
    fn default_beta_formulas() {
        assert!((default_beta_with(1.0, 0.0, Variant::Prox, None, 1e-3) - 4.001).abs() < 1e-12);
        assert!((default_beta_with(1.0, 0.0, Variant::Gradient, None, 1e-3) - 5.001).abs() < 1e-12);
        assert!(
            (default_beta_with(3.0, 0.0, Variant::Prox, Some(3.0), 1e-3) - 8.001).abs() < 1e-12
        );
        assert!((default_beta_with(1.0, 9.0, Variant::Prox, None, 1e-3) - 9.001).abs() < 1e-12);
    }

    #[test]
    fn zeros_init() {
        let p = scalar_ls(&[1.0, 3.0]);
        let s = WalkmanState::init(&p, 4.0, Variant::Prox, &InitMode::Zeros).unwrap();
        assert!(s.ys().iter().chain(s.zs()).all(|v| v[0] == 0.0));
        assert_eq!(s.xbar()[0], 0.0);
    }

    #[test]
    fn ls_closed_form_init_scalar() {
        let p = scalar_ls(&[2.0]);
        let s =
            WalkmanState::init(&p, 4.0, Variant::Prox, &InitMode::LeastSquaresClosedForm).unwrap();
        assert!((s.ys()[0][0] + 2.0 / 3.0).abs() < 1e-15);
        assert!((s.zs()[0][0] + 8.0 / 3.0).abs() < 1e-15);
        assert!(s.xbar()[0].abs() < 1e-15);
        assert!(
            WalkmanState::init(&p, 0.5, Variant::Prox, &InitMode::LeastSquaresClosedForm).is_err()
        );
    }

    #[test]
    fn stationary_local_on_isotropic() {
        let f: Arc<dyn LocalObjective> = Arc::new(Isotropic { dim: 2, c: 1.0 });
        let p = ConsensusProblem::new(vec![f.clone(), f], Arc::new(Zero), 1.0).unwrap();
        let s = WalkmanState::init(&p, 4.0, Variant::Prox, &InitMode::StationaryLocal).unwrap();
        assert!(s.ys().iter().chain(s.zs()).all(|v| v.norm() == 0.0));
    }

    #[test]
    fn origin_is_fixed_for_single_agent() {
        let f: Arc<dyn LocalObjective> = Arc::new(Isotropic { dim: 1, c: 1.0 });
        let p = ConsensusProblem::new(vec![f], Arc::new(Zero), 1.0).unwrap();
        let mut s = WalkmanState::init(&p, 4.0, Variant::Prox, &InitMode::Zeros).unwrap();
        for _ in 0..5 {
            s.step(0, &p).unwrap();
        }
        assert_eq!((s.x()[0], s.ys()[0][0], s.zs()[0][0]), (0.0, 0.0, 0.0));
    }

    /// Hand transcript for f₀ = ½(y−1)², f₁ = ½(y−3)², β = 4, zeros init,
    /// agent 0 first: x¹ = 0, y₀¹ = (1 + 0)/(1 + 4) = 0.2, z₀¹ = −0.8,
    /// x̄² = ½(0.2 + 0.2) = 0.2.
    #[test]
    fn two_agent_transcript() {
        let p = scalar_ls(&[1.0, 3.0]);
        let mut s = WalkmanState::init(&p, 4.0, Variant::Prox, &InitMode::Zeros).unwrap();
        s.step(0, &p).unwrap();
        assert!(s.x()[0].abs() < 1e-15);
        assert!((s.ys()[0][0] - 0.2).abs() < 1e-15);
        assert!((s.zs()[0][0] + 0.8).abs() < 1e-15);
        assert!((s.xbar()[0] - 0.2).abs() < 1e-15);
        // agent 1: x² = 0.2, y₁² = (3 + 4·0.2)/5 = 0.76, z₁² = 4(0.2 − 0.76) = −2.24
        s.step(1, &p).unwrap();
        assert!((s.x()[0] - 0.2).abs() < 1e-15);
        assert!((s.ys()[1][0] - 0.76).abs() < 1e-15);
        assert!((s.zs()[1][0] + 2.24).abs() < 1e-14);
        assert!(s.token_residual() < 1e-15);
        assert_eq!(s.cover_time(), Some(2));
    }

    #[test]
    fn gradient_variant_dual_is_lagged_gradient() {
        let p = scalar_ls(&[1.0, 3.0]);
        let mut s = WalkmanState::init(&p, 6.0, Variant::Gradient, &InitMode::Zeros).unwrap();
        for k in 0..6 {
            let i = k % 2;
            let before = s.ys()[i].clone();
            s.step(i, &p).unwrap();
            assert!((&s.zs()[i] - p.local(i).grad(&before)).norm() < 1e-14);
        }
    }

    #[test]
    fn divergence_detected() {
        let p = scalar_ls(&[1.0, 3.0]);
        // far below the stable range for the gradient variant
        let mut s = WalkmanState::init(&p, 0.01, Variant::Gradient, &InitMode::Zeros).unwrap();
        let err = (0..10_000)
            .try_for_each(|k| s.step(k % 2, &p).map(|_| ()))
            .unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
    }
}
