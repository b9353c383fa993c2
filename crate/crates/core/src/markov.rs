//! Transition matrices over a [`Graph`], their spectral and mixing
//! quantities, and random-walk sampling.

use std::fmt;

use log::warn;
use nalgebra::linalg::SymmetricEigen;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::Graph;
use crate::{Error, Matrix, Result, Vector};

/// `σ(P)` within this distance of 1 marks the chain as periodic or reducible.
pub const PERIODIC_TOL: f64 = 1e-9;
const ROW_SUM_TOL: f64 = 1e-12;
/// Above this power, `verify_mixing` switches to repeated squaring.
const SQUARING_THRESHOLD: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainKind {
    /// `P_ij = 1/d_i` on edges.
    Simple,
    /// `P_ij = 1/d_max` on edges, diagonal takes the remainder. Symmetric.
    MaxDegree,
    /// Any row-stochastic matrix supplied directly.
    Custom,
}

impl std::str::FromStr for ChainKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simple" => Ok(ChainKind::Simple),
            "max-degree" => Ok(ChainKind::MaxDegree),
            other => Err(Error::Parse(format!("unknown chain kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    p: Matrix,
    kind: ChainKind,
    lazy: bool,
    periodic: bool,
}

impl TransitionMatrix {
    /// Validates an arbitrary row-stochastic matrix.
    pub fn from_matrix(p: Matrix) -> Result<Self> {
        if !p.is_square() || p.nrows() == 0 {
            return Err(Error::Parameter(
                "transition matrix must be square and nonempty".into(),
            ));
        }
        for (i, row) in p.row_iter().enumerate() {
            if row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::Chain(format!("row {i} has an entry outside [0, 1]")));
            }
            let s: f64 = row.sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Chain(format!("row {i} sums to {s}")));
            }
        }
        let mut t = TransitionMatrix {
            p,
            kind: ChainKind::Custom,
            lazy: false,
            periodic: false,
        };
        t.periodic = spectral(&t).sigma >= 1.0 - PERIODIC_TOL;
        Ok(t)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.p
    }

    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    pub fn kind(&self) -> ChainKind {
        self.kind
    }

    pub fn is_lazy(&self) -> bool {
        self.lazy
    }

    /// True when `σ(P) = 1` within [`PERIODIC_TOL`].
    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn is_symmetric(&self) -> bool {
        (&self.p - self.p.transpose()).amax() <= 1e-14
    }

    /// `(P + I) / 2`, which is aperiodic whenever `P` is irreducible.
    pub fn lazy(&self) -> TransitionMatrix {
        let n = self.n();
        let p = (&self.p + Matrix::identity(n, n)) * 0.5;
        let mut t = TransitionMatrix {
            p,
            kind: self.kind,
            lazy: true,
            periodic: false,
        };
        t.periodic = spectral(&t).sigma >= 1.0 - PERIODIC_TOL;
        t
    }

    pub fn row(&self, i: usize) -> Vector {
        self.p.row(i).transpose()
    }
}

impl fmt::Display for TransitionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.p.row_iter() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.4}")).collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

pub fn build_chain(g: &Graph, kind: ChainKind) -> Result<TransitionMatrix> {
    if !g.is_connected() {
        return Err(Error::Topology(
            "transition matrix requested on a disconnected graph".into(),
        ));
    }
    let n = g.n();
    let mut p = Matrix::zeros(n, n);
    match kind {
        ChainKind::Simple => {
            if n == 1 {
                p[(0, 0)] = 1.0;
            }
            for i in 0..n {
                let d = g.degree(i) as f64;
                for &j in g.neighbors(i) {
                    p[(i, j)] = 1.0 / d;
                }
            }
        }
        ChainKind::MaxDegree => {
            let dmax = g.max_degree().max(1) as f64;
            for i in 0..n {
                for &j in g.neighbors(i) {
                    p[(i, j)] = 1.0 / dmax;
                }
                p[(i, i)] = 1.0 - g.degree(i) as f64 / dmax;
            }
        }
        ChainKind::Custom => {
            return Err(Error::Parameter(
                "custom chains are built with from_matrix".into(),
            ))
        }
    }
    let mut t = TransitionMatrix {
        p,
        kind,
        lazy: false,
        periodic: false,
    };
    t.periodic = spectral(&t).sigma >= 1.0 - PERIODIC_TOL;
    if t.periodic {
        warn!("{kind:?} chain on this graph is periodic (sigma = 1); use TransitionMatrix::lazy()");
    }
    Ok(t)
}

/// Solves `πᵀP = πᵀ, Σπ = 1` by replacing one balance equation with the normalization.
pub fn stationary(t: &TransitionMatrix) -> Result<Vector> {
    let n = t.n();
    let mut a = t.p.transpose() - Matrix::identity(n, n);
    let mut rhs = Vector::zeros(n);
    a.row_mut(n - 1).fill(1.0);
    rhs[n - 1] = 1.0;
    let pi = a.lu().solve(&rhs).ok_or_else(|| {
        Error::Numerical("stationary system is singular (reducible chain?)".into())
    })?;
    let residual = (t.p.transpose() * &pi - &pi).amax();
    if !residual.is_finite() || residual > 1e-10 {
        return Err(Error::Numerical(format!(
            "stationary residual {residual:e}"
        )));
    }
    if pi.iter().any(|&v| v <= 0.0) {
        return Err(Error::Chain(
            "stationary distribution has a nonpositive entry".into(),
        ));
    }
    Ok(pi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spectral {
    /// Largest singular value of `P` on the complement of the all-ones vector.
    pub sigma: f64,
    /// Largest non-unit eigenvalue modulus; only reported for symmetric `P`.
    pub lambda2: Option<f64>,
    /// Second largest eigenvalue in signed order (symmetric `P` only). Differs
    /// from `lambda2` when the chain has eigenvalues near -1.
    pub second: Option<f64>,
}

/// Orthonormal basis of the complement of the all-ones vector (`n × (n-1)`).
fn ones_complement_basis(n: usize) -> Matrix {
    let mut m = Matrix::identity(n, n);
    m.column_mut(0).fill(1.0);
    let q = m.qr().q();
    q.columns(1, n - 1).into_owned()
}

pub fn spectral(t: &TransitionMatrix) -> Spectral {
    let n = t.n();
    if n == 1 {
        return Spectral {
            sigma: 0.0,
            lambda2: Some(0.0),
            second: Some(0.0),
        };
    }
    let q = ones_complement_basis(n);
    let restricted = q.transpose() * &t.p;
    let sigma = restricted.singular_values().max();
    let pair = t.is_symmetric().then(|| {
        let sym = (&t.p + t.p.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym).eigenvalues;
        let unit = eig
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - 1.0).abs().total_cmp(&(b.1 - 1.0).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let rest = eig
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != unit)
            .map(|(_, &v)| v);
        let modulus = rest.clone().map(f64::abs).fold(0.0, f64::max);
        let second = rest.fold(f64::NEG_INFINITY, f64::max);
        (modulus, second)
    });
    Spectral {
        sigma,
        lambda2: pair.map(|p| p.0),
        second: pair.map(|p| p.1),
    }
}

/// Upper bound on the mixing time:
/// `ceil( ln(√2 / (δ π_*)) / (1 - σ(P)) )`.
pub fn mixing_time(t: &TransitionMatrix, delta: f64) -> Result<usize> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let sigma = spectral(t).sigma;
    if sigma >= 1.0 - PERIODIC_TOL {
        return Err(Error::Chain(format!(
            "sigma(P) = {sigma} >= 1: chain is periodic or reducible"
        )));
    }
    let pi_star = stationary(t)?.min();
    Ok(mixing_bound(sigma, pi_star, delta))
}

pub(crate) fn mixing_bound(sigma: f64, pi_star: f64, delta: f64) -> usize {
    let v = (std::f64::consts::SQRT_2 / (delta * pi_star)).ln() / (1.0 - sigma);
    v.ceil().max(0.0) as usize
}

/// Checks `‖[P^τ]_{i,:} - πᵀ‖ ≤ δ π_*` for every row by explicit powering.
pub fn verify_mixing(t: &TransitionMatrix, delta: f64, tau: usize) -> bool {
    let Ok(pi) = stationary(t) else {
        return false;
    };
    let bound = delta * pi.min();
    let power = matrix_power(&t.p, tau);
    power.row_iter().all(|row| {
        let dev: f64 = row
            .iter()
            .zip(pi.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        dev.sqrt() <= bound
    })
}

pub(crate) fn matrix_power(p: &Matrix, k: usize) -> Matrix {
    let n = p.nrows();
    if k <= SQUARING_THRESHOLD {
        let mut acc = Matrix::identity(n, n);
        for _ in 0..k {
            acc = &acc * p;
        }
        return acc;
    }
    let mut acc = Matrix::identity(n, n);
    let mut base = p.clone();
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            acc = &acc * &base;
        }
        base = &base * &base;
        e >>= 1;
    }
    acc
}

#[derive(Debug, Clone)]
pub struct ChainStats {
    pub pi: Vector,
    pub pi_star: f64,
    pub sigma: f64,
    pub lambda2: Option<f64>,
    pub delta: f64,
    /// `None` when the chain is periodic or reducible.
    pub tau: Option<usize>,
}

pub fn chain_stats(t: &TransitionMatrix, delta: f64) -> Result<ChainStats> {
    let pi = stationary(t)?;
    let pi_star = pi.min();
    let Spectral { sigma, lambda2, .. } = spectral(t);
    let tau = (sigma < 1.0 - PERIODIC_TOL).then(|| mixing_bound(sigma, pi_star, delta));
    Ok(ChainStats {
        pi,
        pi_star,
        sigma,
        lambda2,
        delta,
        tau,
    })
}

/// Draws successive states of the chain. Rows are stored as cumulative
/// distributions over their support, so one draw costs a binary search.
#[derive(Debug, Clone)]
pub struct WalkSampler {
    rows: Vec<(Vec<usize>, Vec<f64>)>,
}

impl WalkSampler {
    pub fn new(t: &TransitionMatrix) -> Self {
        let rows =
            t.p.row_iter()
                .map(|row| {
                    let mut support = Vec::new();
                    let mut cumulative = Vec::new();
                    let mut acc = 0.0;
                    for (j, &v) in row.iter().enumerate() {
                        if v > 0.0 {
                            acc += v;
                            support.push(j);
                            cumulative.push(acc);
                        }
                    }
                    (support, cumulative)
                })
                .collect();
        WalkSampler { rows }
    }

    pub fn next<R: Rng + ?Sized>(&self, current: usize, rng: &mut R) -> usize {
        let (support, cumulative) = &self.rows[current];
        if support.len() == 1 {
            return support[0];
        }
        let total = *cumulative.last().unwrap();
        let u = rng.random::<f64>() * total;
        let idx = cumulative
            .partition_point(|&c| c <= u)
            .min(support.len() - 1);
        support[idx]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Walk {
    pub nodes: Vec<usize>,
    /// First step by which every node has been visited, if that happened.
    pub cover_time: Option<usize>,
}

pub fn sample_walk<R: Rng + ?Sized>(
    t: &TransitionMatrix,
    start: usize,
    steps: usize,
    rng: &mut R,
) -> Result<Walk> {
    let n = t.n();
    if start >= n {
        return Err(Error::Parameter(format!(
            "start node {start} out of range for n = {n}"
        )));
    }
    let sampler = WalkSampler::new(t);
    let mut tracker = CoverTracker::new(n);
    let mut nodes = Vec::with_capacity(steps + 1);
    let mut cur = start;
    nodes.push(cur);
    tracker.visit(cur, 0);
    for k in 1..=steps {
        cur = sampler.next(cur, rng);
        nodes.push(cur);
        tracker.visit(cur, k);
    }
    Ok(Walk {
        nodes,
        cover_time: tracker.cover_time(),
    })
}

/// Tracks first visits so the cover time `T = max_i min{k : i_k = i}` is known.
#[derive(Debug, Clone)]
pub struct CoverTracker {
    visited: Vec<bool>,
    remaining: usize,
    cover: Option<usize>,
}

impl CoverTracker {
    pub fn new(n: usize) -> Self {
        CoverTracker {
            visited: vec![false; n],
            remaining: n,
            cover: None,
        }
    }

    pub fn visit(&mut self, node: usize, k: usize) {
        if !self.visited[node] {
            self.visited[node] = true;
            self.remaining -= 1;
            if self.remaining == 0 {
                self.cover = Some(k);
            }
        }
    }

    pub fn visited(&self, node: usize) -> bool {
        self.visited[node]
    }

    pub fn cover_time(&self) -> Option<usize> {
        self.cover
    }
}
