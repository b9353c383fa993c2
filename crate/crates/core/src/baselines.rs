//! Comparison methods: random-walk incremental (proximal) gradient and the
//! synchronous gossip schemes EXTRA / PG-EXTRA, exact diffusion and
//! decentralized ADMM.
//!
//! Gossip methods keep one row per agent in an `n × p` matrix and mix with
//! Metropolis–Hastings weights `W`. Every agent sends its row to every
//! neighbor each iteration, so one iteration costs `2m` transmissions.
//!
//! Step-size ranges: EXTRA is stable for `α < 2λ_min(W̃)/L` with
//! `W̃ = (I + W)/2`; exact diffusion for `α < 2/L`.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algorithm::{Algorithm, Diagnostics};
use crate::graph::Graph;
use crate::markov::{TransitionMatrix, WalkSampler};
use crate::metrics;
use crate::problems::{ConsensusProblem, ProblemKind};
use crate::{Error, Matrix, Result, Vector};

/// Inner tolerance of the composite prox used by D-ADMM.
pub const COMPOSITE_PROX_TOL: f64 = 1e-12;
const COMPOSITE_PROX_MAX_ITERS: usize = 100_000;

/// `W_ij = 1/(1 + max(d_i, d_j))` on edges, diagonal fills each row.
pub fn metropolis_weights(g: &Graph) -> Matrix {
    let n = g.n();
    let mut w = Matrix::zeros(n, n);
    for &(i, j) in g.edges() {
        let v = 1.0 / (1.0 + g.degree(i).max(g.degree(j)) as f64);
        w[(i, j)] = v;
        w[(j, i)] = v;
    }
    for i in 0..n {
        let off: f64 = w.row(i).sum();
        w[(i, i)] = 1.0 - off;
    }
    w
}

fn rows_mean(x: &Matrix) -> Vector {
    x.row_mean().transpose()
}

fn row(x: &Matrix, i: usize) -> Vector {
    x.row(i).transpose()
}

fn grad_rows(problem: &ConsensusProblem, x: &Matrix) -> Matrix {
    let mut g = Matrix::zeros(x.nrows(), x.ncols());
    for i in 0..x.nrows() {
        g.set_row(i, &problem.local(i).grad(&row(x, i)).transpose());
    }
    g
}

/// Error and NN-PCA columns for methods that hold one copy per agent.
fn gossip_diagnostics(problem: &ConsensusProblem, x: &Matrix) -> Result<Diagnostics> {
    let n = x.nrows();
    let mut d = Diagnostics::default();
    if problem.x_star().is_some() {
        let total: f64 = (0..n)
            .filter_map(|i| problem.relative_error(&row(x, i)))
            .sum();
        d.mse = Some(total / n as f64);
    }
    if problem.kind() == ProblemKind::NnPca {
        let ys: Vec<Vector> = (0..n).map(|i| row(x, i)).collect();
        d.nnpca_gap = Some(metrics::nnpca_optimality_gap(&rows_mean(x), &ys, problem)?);
    }
    Ok(d)
}

fn check_sizes(problem: &ConsensusProblem, g: &Graph) -> Result<()> {
    if problem.n() != g.n() {
        return Err(Error::Parameter(format!(
            "graph has {} nodes but the problem has {} agents",
            g.n(),
            problem.n()
        )));
    }
    Ok(())
}

fn require_smooth(problem: &ConsensusProblem, name: &str) -> Result<()> {
    if !problem.regularizer().is_zero() {
        return Err(Error::Config(format!(
            "{name} handles smooth problems only; this problem has regularizer {}",
            problem.regularizer().name()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    Constant(f64),
    /// `α_k = min(a, b/k)` for `k ≥ 1`.
    Decaying {
        a: f64,
        b: f64,
    },
}

impl StepSchedule {
    pub fn at(&self, k: usize) -> f64 {
        match *self {
            StepSchedule::Constant(a) => a,
            StepSchedule::Decaying { a, b } => a.min(b / k.max(1) as f64),
        }
    }
}

/// One proximal gradient step per visit: `x ← prox_{α r}(x − α∇f_i(x))`.
#[derive(Debug, Clone)]
pub struct RwIncremental {
    name: String,
    x: Vector,
    schedule: StepSchedule,
    sampler: WalkSampler,
    rng: ChaCha8Rng,
    current: usize,
    k: usize,
    visited: crate::markov::CoverTracker,
}

impl RwIncremental {
    pub fn new(
        name: &str,
        problem: &ConsensusProblem,
        chain: &TransitionMatrix,
        schedule: StepSchedule,
        start: usize,
        walk_seed: u64,
    ) -> Result<Self> {
        if chain.n() != problem.n() || start >= problem.n() {
            return Err(Error::Parameter(
                "chain size or start node does not match the problem".into(),
            ));
        }
        let ok = match schedule {
            StepSchedule::Constant(a) => a > 0.0,
            StepSchedule::Decaying { a, b } => a > 0.0 && b > 0.0,
        };
        if !ok {
            return Err(Error::Parameter("step sizes must be positive".into()));
        }
        Ok(RwIncremental {
            name: name.into(),
            x: Vector::zeros(problem.p()),
            schedule,
            sampler: WalkSampler::new(chain),
            rng: ChaCha8Rng::seed_from_u64(walk_seed),
            current: start,
            k: 0,
            visited: crate::markov::CoverTracker::new(problem.n()),
        })
    }

    pub fn with_initial(mut self, x0: Vector) -> Self {
        self.x = x0;
        self
    }

    /// Applies the update at a given agent without advancing the walk.
    pub fn step_at(&mut self, agent: usize, problem: &ConsensusProblem) {
        self.k += 1;
        let alpha = self.schedule.at(self.k);
        let v = &self.x - problem.local(agent).grad(&self.x) * alpha;
        self.x = problem.regularizer().prox(&v, 1.0 / alpha);
        self.visited.visit(agent, self.k);
    }

    pub fn x(&self) -> &Vector {
        &self.x
    }
}

impl Algorithm for RwIncremental {
    fn name(&self) -> &str {
        &self.name
    }
    fn comm_per_iteration(&self) -> u64 {
        1
    }
    fn step(&mut self, problem: &ConsensusProblem) -> Result<()> {
        self.step_at(self.current, problem);
        self.current = self.sampler.next(self.current, &mut self.rng);
        Ok(())
    }
    fn iterations(&self) -> usize {
        self.k
    }
    fn estimate(&self) -> Vector {
        self.x.clone()
    }
    fn diagnostics(&self, problem: &ConsensusProblem, _full: bool) -> Result<Diagnostics> {
        let mut d = Diagnostics {
            mse: problem.relative_error(&self.x),
            ..Diagnostics::default()
        };
        if problem.kind() == ProblemKind::NnPca {
            d.nnpca_gap = Some(metrics::nnpca_optimality_gap(&self.x, &[], problem)?);
        }
        Ok(d)
    }
    fn params(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        match self.schedule {
            StepSchedule::Constant(a) => {
                m.insert("alpha".into(), a.to_string());
            }
            StepSchedule::Decaying { a, b } => {
                m.insert("decay_a".into(), a.to_string());
                m.insert("decay_b".into(), b.to_string());
            }
        }
        m
    }
    fn cover_time(&self) -> Option<usize> {
        self.visited.cover_time()
    }
}

/// EXTRA, or PG-EXTRA when `with_prox` is set:
///
/// ```text
/// z¹     = W x⁰ − α∇f(x⁰)
/// z^{k+2} = z^{k+1} + W x^{k+1} − W̃ x^k − α[∇f(x^{k+1}) − ∇f(x^k)]
/// x^k    = prox_{αr}(z^k)        (identity for plain EXTRA)
/// ```
#[derive(Debug, Clone)]
pub struct Extra {
    name: &'static str,
    w: Matrix,
    w_tilde: Matrix,
    alpha: f64,
    with_prox: bool,
    x: Matrix,
    x_prev: Matrix,
    z: Matrix,
    grad_prev: Matrix,
    k: usize,
    per_iter: u64,
}

impl Extra {
    pub fn new(problem: &ConsensusProblem, g: &Graph, alpha: f64, with_prox: bool) -> Result<Self> {
        check_sizes(problem, g)?;
        if !with_prox {
            require_smooth(problem, "extra")?;
        }
        if alpha.is_nan() || alpha <= 0.0 {
            return Err(Error::Parameter(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        let n = g.n();
        let w = metropolis_weights(g);
        let w_tilde = (&w + Matrix::identity(n, n)) * 0.5;
        let zero = Matrix::zeros(n, problem.p());
        Ok(Extra {
            name: if with_prox { "pg-extra" } else { "extra" },
            w,
            w_tilde,
            alpha,
            with_prox,
            x: zero.clone(),
            x_prev: zero.clone(),
            z: zero.clone(),
            grad_prev: zero,
            k: 0,
            per_iter: 2 * g.m() as u64,
        })
    }

    /// Starts every agent from `x0`.
    pub fn with_initial(mut self, x0: &Vector) -> Self {
        self.x = broadcast(x0, self.x.nrows());
        self
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    fn prox_rows(&self, problem: &ConsensusProblem, z: &Matrix) -> Matrix {
        if !self.with_prox || problem.regularizer().is_zero() {
            return z.clone();
        }
        let mut x = z.clone();
        for i in 0..z.nrows() {
            x.set_row(
                i,
                &problem
                    .regularizer()
                    .prox(&row(z, i), 1.0 / self.alpha)
                    .transpose(),
            );
        }
        x
    }
}

impl Algorithm for Extra {
    fn name(&self) -> &str {
        self.name
    }
    fn comm_per_iteration(&self) -> u64 {
        self.per_iter
    }
    fn step(&mut self, problem: &ConsensusProblem) -> Result<()> {
        let grad = grad_rows(problem, &self.x);
        let z_next = if self.k == 0 {
            &self.w * &self.x - &grad * self.alpha
        } else {
            &self.z + &self.w * &self.x
                - &self.w_tilde * &self.x_prev
                - (&grad - &self.grad_prev) * self.alpha
        };
        let x_next = self.prox_rows(problem, &z_next);
        self.x_prev = std::mem::replace(&mut self.x, x_next);
        self.z = z_next;
        self.grad_prev = grad;
        self.k += 1;
        Ok(())
    }
    fn iterations(&self) -> usize {
        self.k
    }
    fn estimate(&self) -> Vector {
        rows_mean(&self.x)
    }
    fn magnitude(&self) -> f64 {
        self.x.norm()
    }
    fn diagnostics(&self, problem: &ConsensusProblem, _full: bool) -> Result<Diagnostics> {
        gossip_diagnostics(problem, &self.x)
    }
    fn params(&self) -> BTreeMap<String, String> {
        BTreeMap::from([("alpha".to_string(), self.alpha.to_string())])
    }
}

/// Adapt, correct, combine with `Ā = (I + W)/2`:
/// `ψ = x − α∇f(x)`, `φ = ψ + x − ψ_prev`, `x ← Āφ`.
#[derive(Debug, Clone)]
pub struct ExactDiffusion {
    a_bar: Matrix,
    alpha: f64,
    x: Matrix,
    psi_prev: Matrix,
    k: usize,
    per_iter: u64,
}

impl ExactDiffusion {
    pub fn new(problem: &ConsensusProblem, g: &Graph, alpha: f64) -> Result<Self> {
        check_sizes(problem, g)?;
        require_smooth(problem, "exact-diffusion")?;
        if alpha.is_nan() || alpha <= 0.0 {
            return Err(Error::Parameter(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        let n = g.n();
        let a_bar = (metropolis_weights(g) + Matrix::identity(n, n)) * 0.5;
        let zero = Matrix::zeros(n, problem.p());
        Ok(ExactDiffusion {
            a_bar,
            alpha,
            x: zero.clone(),
            psi_prev: zero,
            k: 0,
            per_iter: 2 * g.m() as u64,
        })
    }

    /// Starts from the given per-agent rows instead of zeros.
    pub fn with_initial(mut self, x0: Matrix) -> Self {
        self.psi_prev = x0.clone();
        self.x = x0;
        self
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }
}

impl Algorithm for ExactDiffusion {
    fn name(&self) -> &str {
        "exact-diffusion"
    }
    fn comm_per_iteration(&self) -> u64 {
        self.per_iter
    }
    fn step(&mut self, problem: &ConsensusProblem) -> Result<()> {
        let psi = &self.x - grad_rows(problem, &self.x) * self.alpha;
        let phi = &psi + &self.x - &self.psi_prev;
        self.x = &self.a_bar * phi;
        self.psi_prev = psi;
        self.k += 1;
        Ok(())
    }
    fn iterations(&self) -> usize {
        self.k
    }
    fn estimate(&self) -> Vector {
        rows_mean(&self.x)
    }
    fn magnitude(&self) -> f64 {
        self.x.norm()
    }
    fn diagnostics(&self, problem: &ConsensusProblem, _full: bool) -> Result<Diagnostics> {
        gossip_diagnostics(problem, &self.x)
    }
    fn params(&self) -> BTreeMap<String, String> {
        BTreeMap::from([("alpha".to_string(), self.alpha.to_string())])
    }
}

/// `n × p` matrix whose rows all equal `x`.
pub fn broadcast(x: &Vector, n: usize) -> Matrix {
    Matrix::from_fn(n, x.len(), |_, j| x[j])
}

/// `argmin_x f(x) + r(x) + (β/2)‖x − v‖²`. Uses the local prox directly when
/// `r ≡ 0`, otherwise proximal gradient on the smooth part from `warm`.
pub fn composite_prox(
    problem: &ConsensusProblem,
    agent: usize,
    v: &Vector,
    beta: f64,
    warm: &Vector,
) -> Result<Vector> {
    let f = problem.local(agent);
    let reg = problem.regularizer();
    if reg.is_zero() {
        return f.prox(v, beta);
    }
    let step_inv = problem.lipschitz() + beta;
    let mut x = warm.clone();
    for _ in 0..COMPOSITE_PROX_MAX_ITERS {
        let g = f.grad(&x) + (&x - v) * beta;
        let next = reg.prox(&(&x - g / step_inv), step_inv);
        let moved = (&next - &x).norm();
        x = next;
        if moved <= COMPOSITE_PROX_TOL * x.norm().max(1.0) {
            return Ok(x);
        }
    }
    Err(Error::Numerical(format!(
        "composite prox at agent {agent} did not converge"
    )))
}

/// Edge-based decentralized ADMM. Agent `i` with degree `dᵢ` solves
///
/// ```text
/// xᵢ ← argmin fᵢ(x) + r(x) + ⟨x, αᵢ⟩ + c Σ_{j∈Nᵢ} ‖x − (xᵢ + xⱼ)/2‖²
/// αᵢ ← αᵢ + c Σ_{j∈Nᵢ} (xᵢ − xⱼ)
/// ```
///
/// An isolated agent uses itself as its only neighbor, which turns the
/// update into a proximal point iteration on `fᵢ + r`.
#[derive(Debug, Clone)]
pub struct DAdmm {
    c: f64,
    neighbors: Vec<Vec<usize>>,
    x: Matrix,
    dual: Matrix,
    k: usize,
    per_iter: u64,
}

impl DAdmm {
    pub fn new(problem: &ConsensusProblem, g: &Graph, c: f64) -> Result<Self> {
        check_sizes(problem, g)?;
        if c.is_nan() || c <= 0.0 {
            return Err(Error::Parameter(format!("c must be positive, got {c}")));
        }
        let neighbors = (0..g.n())
            .map(|i| {
                if g.degree(i) == 0 {
                    vec![i]
                } else {
                    g.neighbors(i).to_vec()
                }
            })
            .collect();
        let zero = Matrix::zeros(g.n(), problem.p());
        Ok(DAdmm {
            c,
            neighbors,
            x: zero.clone(),
            dual: zero,
            k: 0,
            per_iter: 2 * g.m() as u64,
        })
    }

    /// Starts every agent from `x0`.
    pub fn with_initial(mut self, x0: &Vector) -> Self {
        self.x = broadcast(x0, self.x.nrows());
        self
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }
}

impl Algorithm for DAdmm {
    fn name(&self) -> &str {
        "d-admm"
    }
    fn comm_per_iteration(&self) -> u64 {
        self.per_iter
    }
    fn step(&mut self, problem: &ConsensusProblem) -> Result<()> {
        let n = self.x.nrows();
        let mut next = self.x.clone();
        for i in 0..n {
            let nb = &self.neighbors[i];
            let d = nb.len() as f64;
            let xi = row(&self.x, i);
            let mut center = Vector::zeros(xi.len());
            for &j in nb {
                center += (&xi + row(&self.x, j)) * 0.5;
            }
            let beta = 2.0 * self.c * d;
            let v = center / d - row(&self.dual, i) / beta;
            let xi_new = composite_prox(problem, i, &v, beta, &xi)?;
            next.set_row(i, &xi_new.transpose());
        }
        for i in 0..n {
            let xi = row(&next, i);
            let mut acc = Vector::zeros(xi.len());
            for &j in &self.neighbors[i] {
                acc += &xi - row(&next, j);
            }
            let updated = row(&self.dual, i) + acc * self.c;
            self.dual.set_row(i, &updated.transpose());
        }
        self.x = next;
        self.k += 1;
        Ok(())
    }
    fn iterations(&self) -> usize {
        self.k
    }
    fn estimate(&self) -> Vector {
        rows_mean(&self.x)
    }
    fn magnitude(&self) -> f64 {
        self.x.norm()
    }
    fn diagnostics(&self, problem: &ConsensusProblem, _full: bool) -> Result<Diagnostics> {
        gossip_diagnostics(problem, &self.x)
    }
    fn params(&self) -> BTreeMap<String, String> {
        BTreeMap::from([("c".to_string(), self.c.to_string())])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GraphSpec};
    use crate::problems::{Isotropic, LeastSquaresData, LocalObjective, Quadratic, Zero, L1};
    use std::sync::Arc;

    fn scalar_ls() -> ConsensusProblem {
        let q = |b: f64| {
            Quadratic::new(Matrix::from_element(1, 1, 1.0), Vector::from_element(1, b)).unwrap()
        };
        ConsensusProblem::least_squares(LeastSquaresData::new(vec![q(1.0), q(3.0)])).unwrap()
    }

    fn pair() -> Graph {
        Graph::new(2, [(0, 1)]).unwrap()
    }

    #[test]
    fn metropolis_is_doubly_stochastic() {
        let g = generate(&"geometric:20:30:15".parse::<GraphSpec>().unwrap()).unwrap();
        let w = metropolis_weights(&g);
        assert!((&w - w.transpose()).amax() < 1e-15);
        for r in w.row_iter() {
            assert!((r.sum() - 1.0).abs() < 1e-12);
        }
        for i in 0..20 {
            for j in 0..20 {
                if i != j && !g.has_edge(i, j) {
                    assert_eq!(w[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn schedules() {
        let s = StepSchedule::Decaying { a: 0.01, b: 5.0 };
        assert_eq!(s.at(1), 0.01);
        assert_eq!(s.at(1000), 0.005);
    }

    #[test]
    fn incremental_steps() {
        let f: Arc<dyn LocalObjective> = Arc::new(Isotropic { dim: 1, c: 1.0 });
        let p = ConsensusProblem::new(vec![f.clone()], Arc::new(Zero), 1.0).unwrap();
        let t = TransitionMatrix::from_matrix(Matrix::identity(1, 1)).unwrap();
        let mut a = RwIncremental::new("rw", &p, &t, StepSchedule::Constant(0.5), 0, 0).unwrap();
        a.x = Vector::from_element(1, 1.0);
        a.step_at(0, &p);
        assert_eq!(a.x()[0], 0.5);

        let p = ConsensusProblem::new(vec![f], Arc::new(L1 { lambda: 0.4 }), 1.0).unwrap();
        let mut a = RwIncremental::new("rw", &p, &t, StepSchedule::Constant(0.5), 0, 0).unwrap();
        a.x = Vector::from_element(1, 2.0);
        a.step_at(0, &p);
        // soft(2 − 0.5·2, 0.5·0.4) = 0.8
        assert!((a.x()[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn extra_preserves_average_on_consensus_problem() {
        let f: Arc<dyn LocalObjective> = Arc::new(Isotropic { dim: 1, c: 0.0 });
        let g = generate(&"cycle:5".parse::<GraphSpec>().unwrap()).unwrap();
        let p = ConsensusProblem::new(vec![f; 5], Arc::new(Zero), 0.0).unwrap();
        let mut e = Extra::new(&p, &g, 0.1, false).unwrap();
        e.x = Matrix::from_column_slice(5, 1, &[1.0, 2.0, 3.0, 4.0, 5.0]);
        for _ in 0..500 {
            e.step(&p).unwrap();
            assert!((e.x.sum() - 15.0).abs() < 1e-9);
        }
        assert!((e.x.add_scalar(-3.0)).amax() < 1e-8);
        assert_eq!(e.comm_per_iteration(), 10);
    }

    #[test]
    fn exact_diffusion_averages() {
        let f: Arc<dyn LocalObjective> = Arc::new(Isotropic { dim: 1, c: 0.0 });
        let g = generate(&"cycle:5".parse::<GraphSpec>().unwrap()).unwrap();
        let p = ConsensusProblem::new(vec![f; 5], Arc::new(Zero), 0.0).unwrap();
        let mut e = ExactDiffusion::new(&p, &g, 0.1)
            .unwrap()
            .with_initial(Matrix::from_column_slice(5, 1, &[1.0, 2.0, 3.0, 4.0, 5.0]));
        for _ in 0..500 {
            e.step(&p).unwrap();
        }
        assert!((e.x.add_scalar(-3.0)).amax() < 1e-8);
    }

    #[test]
    fn gossip_methods_solve_scalar_problem() {
        let p = scalar_ls();
        let g = pair();
        let mut algos: Vec<Box<dyn Algorithm>> = vec![
            Box::new(Extra::new(&p, &g, 0.5, false).unwrap()),
            Box::new(Extra::new(&p, &g, 0.5, true).unwrap()),
            Box::new(ExactDiffusion::new(&p, &g, 0.5).unwrap()),
            Box::new(DAdmm::new(&p, &g, 1.0).unwrap()),
        ];
        for a in &mut algos {
            for _ in 0..2000 {
                a.step(&p).unwrap();
            }
            assert!((a.estimate()[0] - 2.0).abs() < 1e-8, "{}", a.name());
            assert!(a.diagnostics(&p, false).unwrap().mse.unwrap() < 1e-16);
        }
    }

    #[test]
    fn smooth_only_methods_reject_regularizers() {
        let f: Arc<dyn LocalObjective> = Arc::new(Isotropic { dim: 1, c: 1.0 });
        let p =
            ConsensusProblem::new(vec![f.clone(), f], Arc::new(L1 { lambda: 0.1 }), 1.0).unwrap();
        assert!(Extra::new(&p, &pair(), 0.1, false).is_err());
        assert!(ExactDiffusion::new(&p, &pair(), 0.1).is_err());
        assert!(Extra::new(&p, &pair(), 0.1, true).is_ok());
    }

    #[test]
    fn isolated_dadmm_agent_minimizes_locally() {
        let q = Quadratic::new(
            Matrix::from_element(1, 1, 2.0),
            Vector::from_element(1, 3.0),
        )
        .unwrap();
        let p = ConsensusProblem::least_squares(LeastSquaresData::new(vec![q])).unwrap();
        let g = Graph::new(1, []).unwrap();
        let mut a = DAdmm::new(&p, &g, 0.5).unwrap();
        for _ in 0..200 {
            a.step(&p).unwrap();
        }
        assert!((a.estimate()[0] - 1.5).abs() < 1e-10);
    }

    #[test]
    fn composite_prox_matches_scalar_oracle() {
        // argmin ½x² + 0.3|x| + (2/2)(x − 1.5)²  →  x = (2·1.5 − 0.3)/3
        let f: Arc<dyn LocalObjective> = Arc::new(Isotropic { dim: 1, c: 1.0 });
        let p = ConsensusProblem::new(vec![f], Arc::new(L1 { lambda: 0.3 }), 1.0).unwrap();
        let x =
            composite_prox(&p, 0, &Vector::from_element(1, 1.5), 2.0, &Vector::zeros(1)).unwrap();
        assert!((x[0] - 0.9).abs() < 1e-11);
    }
}
