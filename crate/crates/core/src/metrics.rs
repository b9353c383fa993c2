//! Communication and latency accounting plus the diagnostic quantities
//! evaluated along a run: augmented Lagrangian, Lyapunov functions, the
//! least-squares dual function `h_β`, the subgradient norm `‖g^k‖²` and the
//! NN-PCA optimality gap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::problems::{ConsensusProblem, LeastSquaresData, ProblemKind};
use crate::walkman::{Variant, WalkmanState};
use crate::{Error, Matrix, Result, Vector};

/// Cumulative count of `p`-vector transmissions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CommLedger {
    units: u64,
    per_iteration: u64,
}

impl CommLedger {
    pub fn new(per_iteration: u64) -> Self {
        CommLedger {
            units: 0,
            per_iteration,
        }
    }

    pub fn charge(&mut self) {
        self.units += self.per_iteration;
    }

    pub fn units(&self) -> u64 {
        self.units
    }

    pub fn per_iteration(&self) -> u64 {
        self.per_iteration
    }
}

/// Maximum of `count` iid Exp(1) latencies, sampled by inverting the CDF
/// `(1 − e^{−t})^count`. For `count = 1` this is a single exponential draw.
pub fn round_time<R: Rng + ?Sized>(count: u64, rng: &mut R) -> Result<f64> {
    if count == 0 {
        return Err(Error::Parameter(
            "a round needs at least one transmission".into(),
        ));
    }
    let u: f64 = rng.random();
    // u ∈ [0, 1); use 1 − u ∈ (0, 1] so the log is finite
    let v = 1.0 - u;
    Ok(-(-(v.ln() / count as f64).exp_m1()).ln())
}

/// Simulated wall-clock under iid Exp(1) per-transmission latency.
#[derive(Debug, Clone)]
pub struct ClockModel {
    rng: ChaCha8Rng,
    time: f64,
}

impl ClockModel {
    pub fn new(seed: u64) -> Self {
        ClockModel {
            rng: ChaCha8Rng::seed_from_u64(seed),
            time: 0.0,
        }
    }

    /// Adds one round in which `count` transmissions happen in parallel.
    pub fn advance(&mut self, count: u64) -> Result<f64> {
        let dt = round_time(count, &mut self.rng)?;
        self.time += dt;
        Ok(dt)
    }

    pub fn time(&self) -> f64 {
        self.time
    }
}

/// `r(x) + (1/n)[Σ f_i(y_i) + Σ ⟨z_i, x − y_i⟩ + (β/2) Σ ‖x − y_i‖²]`.
pub fn augmented_lagrangian(
    x: &Vector,
    ys: &[Vector],
    zs: &[Vector],
    beta: f64,
    problem: &ConsensusProblem,
) -> f64 {
    let n = problem.n() as f64;
    let mut acc = 0.0;
    for (i, (y, z)) in ys.iter().zip(zs).enumerate() {
        let d = x - y;
        acc += problem.local(i).value(y) + z.dot(&d) + 0.5 * beta * d.norm_squared();
    }
    problem.regularizer().value(x) + acc / n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lyapunov {
    /// `L_β^k`, the augmented Lagrangian at the current iterate.
    L,
    /// `M_β^k = L_β^k + (L²/n) Σ_i ‖y_i^{τ(k,i)+1} − y_i^{τ(k,i)}‖²`, gradient variant only.
    M,
}

pub fn lyapunov(state: &WalkmanState, problem: &ConsensusProblem, which: Lyapunov) -> Result<f64> {
    let l = augmented_lagrangian(state.x(), state.ys(), state.zs(), state.beta(), problem);
    match which {
        Lyapunov::L => Ok(l),
        Lyapunov::M => {
            if state.variant() != Variant::Gradient {
                return Err(Error::Config(
                    "M_beta is defined for the gradient variant only".into(),
                ));
            }
            let lip = problem.lipschitz();
            let disp: f64 = state.last_displacements_sq().iter().sum();
            Ok(l + lip * lip / problem.n() as f64 * disp)
        }
    }
}

fn ls_data(problem: &ConsensusProblem) -> Result<&LeastSquaresData> {
    problem
        .least_squares_data()
        .ok_or_else(|| Error::Config("h_beta is defined for least-squares problems only".into()))
}

/// `TY + c` with `T = (1/n)[I − AᵢᵀAᵢ/β]ᵢ` and `c = (1/(nβ)) Σ Aᵢᵀbᵢ`.
fn t_y_plus_c(data: &LeastSquaresData, ys: &[Vector], beta: f64) -> Vector {
    let n = data.blocks.len() as f64;
    let mut acc = Vector::zeros(ys[0].len());
    for (q, y) in data.blocks.iter().zip(ys) {
        acc += y - (q.ata() * y) / beta + q.atb() / beta;
    }
    acc / n
}

/// `(1/n) Σ (β/2‖yᵢ‖² − ½‖Aᵢyᵢ‖² + ½‖bᵢ‖²) − (β/2)‖TY + c‖²`.
pub fn h_beta(ys: &[Vector], problem: &ConsensusProblem, beta: f64) -> Result<f64> {
    let data = ls_data(problem)?;
    let n = data.blocks.len() as f64;
    let sum: f64 = data
        .blocks
        .iter()
        .zip(ys)
        .map(|(q, y)| {
            0.5 * beta * y.norm_squared() - 0.5 * (q.a() * y).norm_squared()
                + 0.5 * q.b().norm_squared()
        })
        .sum();
    Ok(sum / n - 0.5 * beta * t_y_plus_c(data, ys, beta).norm_squared())
}

/// Blockwise gradient `(β/n)(I − AᵢᵀAᵢ/β)(yᵢ − TY − c)`.
pub fn h_beta_grad(ys: &[Vector], problem: &ConsensusProblem, beta: f64) -> Result<Vec<Vector>> {
    let data = ls_data(problem)?;
    let n = data.blocks.len() as f64;
    let center = t_y_plus_c(data, ys, beta);
    Ok(data
        .blocks
        .iter()
        .zip(ys)
        .map(|(q, y)| {
            let d = y - &center;
            (&d - q.ata() * &d / beta) * (beta / n)
        })
        .collect())
}

/// `(β/n) I − (1/n) blkdiag(AᵢᵀAᵢ) − β TᵀT`, size `np × np`.
pub fn h_beta_hessian(problem: &ConsensusProblem, beta: f64) -> Result<Matrix> {
    let data = ls_data(problem)?;
    let n = data.blocks.len();
    let p = problem.p();
    let nf = n as f64;
    let mut t = Matrix::zeros(p, n * p);
    let mut h = Matrix::identity(n * p, n * p) * (beta / nf);
    for (i, q) in data.blocks.iter().enumerate() {
        let ti = (Matrix::identity(p, p) - q.ata() / beta) / nf;
        t.view_mut((0, i * p), (p, p)).copy_from(&ti);
        let mut blk = h.view_mut((i * p, i * p), (p, p));
        blk -= q.ata() / nf;
    }
    h -= t.transpose() * &t * beta;
    Ok(h)
}

/// Minimum of `h_β`, attained at `Y = 1 ⊗ x⋆`.
pub fn h_beta_star(problem: &ConsensusProblem, beta: f64) -> Result<f64> {
    let x = problem
        .x_star()
        .ok_or_else(|| Error::Config("h_beta_star needs x_star".into()))?;
    h_beta(&vec![x.clone(); problem.n()], problem, beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SubgradParts {
    /// `‖w^k‖²`, the `x` block.
    pub w_sq: f64,
    pub y_sq: f64,
    pub z_sq: f64,
}

impl SubgradParts {
    pub fn total(&self) -> f64 {
        self.w_sq + self.y_sq + self.z_sq
    }
}

/// Components of `g^k`, an element of `∂L_β` at the state after step `k`.
/// The `x` block is `w^k = −(β/n)Δy_{i_k} + (1/n)Δz_{i_k}`; the `y` and `z`
/// blocks are the partial gradients at the new iterate.
pub fn subgrad_parts(state: &WalkmanState, problem: &ConsensusProblem) -> SubgradParts {
    let n = problem.n() as f64;
    let beta = state.beta();
    let x = state.x();
    let w_sq = state
        .last_step()
        .map(|s| (&s.dz / n - &s.dy * (beta / n)).norm_squared())
        .unwrap_or(0.0);
    let mut y_sq = 0.0;
    let mut z_sq = 0.0;
    for (j, (y, z)) in state.ys().iter().zip(state.zs()).enumerate() {
        let gy = (problem.local(j).grad(y) - z + (y - x) * beta) / n;
        y_sq += gy.norm_squared();
        z_sq += ((x - y) / n).norm_squared();
    }
    SubgradParts { w_sq, y_sq, z_sq }
}

pub fn subgrad_norm_sq(state: &WalkmanState, problem: &ConsensusProblem) -> f64 {
    subgrad_parts(state, problem).total()
}

/// Squared distance from `g` to the normal cone of `{x ≥ 0, ‖x‖ ≤ 1}` at `x`.
pub fn normal_cone_dist_sq(g: &Vector, x: &Vector) -> f64 {
    let on_sphere = (x.norm() - 1.0).abs() <= 1e-12;
    let t = if on_sphere {
        let inner: f64 = g
            .iter()
            .zip(x.iter())
            .filter(|(_, &xj)| xj > 0.0)
            .map(|(gj, xj)| gj * xj)
            .sum();
        (inner / x.norm_squared()).max(0.0)
    } else {
        0.0
    };
    g.iter()
        .zip(x.iter())
        .map(|(&gj, &xj)| {
            if xj > 0.0 {
                let r = gj - t * xj;
                r * r
            } else {
                gj.max(0.0).powi(2)
            }
        })
        .sum()
}

/// `dist²(−∇f(x), N_C(x)) + ‖Y − 1⊗x‖²`, with `f` the averaged smooth part.
pub fn nnpca_optimality_gap(x: &Vector, ys: &[Vector], problem: &ConsensusProblem) -> Result<f64> {
    if problem.kind() != ProblemKind::NnPca {
        return Err(Error::Config(
            "optimality gap is defined for NN-PCA problems only".into(),
        ));
    }
    let g = -problem.mean_grad(x);
    let consensus: f64 = ys.iter().map(|y| (y - x).norm_squared()).sum();
    Ok(normal_cone_dist_sq(&g, x) + consensus)
}
