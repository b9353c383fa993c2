//! Closed-form communication complexities and least-squares rate constants.
//!
//! Every order expression is evaluated with unit constants. The numbers are
//! meant for ordering algorithms on a given network and for checking the
//! regime conditions, not as calibrated predictions.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::graph::Graph;
use crate::markov::{chain_stats, mixing_bound, ChainStats, TransitionMatrix};
use crate::problems::ConsensusProblem;
use crate::{Error, Result};

pub const DEFAULT_DELTA: f64 = 0.5;

/// Constant `C` in the exact-diffusion rate; it depends only on the
/// conditioning of the objective.
pub const DEFAULT_ED_CONSTANT: f64 = 1.0;

pub const CAVEAT: &str =
    "orders evaluated with unit constants; compare rows against each other, not against measured counts";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexityInputs {
    pub n: usize,
    /// Number of undirected edges.
    pub m: usize,
    /// Spectral quantity of the chain: `σ(P)`, which equals `λ₂(P)` for
    /// symmetric `P`.
    pub lambda2: f64,
    pub pi_star: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub d_min: usize,
    pub d_ave: f64,
}

impl ComplexityInputs {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        if self.n == 0 || self.m == 0 {
            return bad(format!(
                "need n ≥ 1 and m ≥ 1, got n = {}, m = {}",
                self.n, self.m
            ));
        }
        if !(0.0..1.0).contains(&self.lambda2) {
            return bad(format!("lambda2 must lie in [0, 1), got {}", self.lambda2));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        let cap = 1.0 / self.n as f64 * (1.0 + 1e-12);
        if !(self.pi_star > 0.0 && self.pi_star <= cap) {
            return bad(format!(
                "pi_star must lie in (0, 1/n], got {}",
                self.pi_star
            ));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if self.d_min == 0 {
            return bad("minimum degree must be positive".into());
        }
        Ok(())
    }

    /// Reads `n`, `m`, degrees and the chain statistics off a concrete
    /// network. A negative `σ` (possible only for tiny graphs) is clamped
    /// to zero.
    pub fn from_network(
        g: &Graph,
        chain: &TransitionMatrix,
        delta: f64,
        epsilon: f64,
    ) -> Result<Self> {
        let stats = chain_stats(chain, delta)?;
        let inputs = ComplexityInputs {
            n: g.n(),
            m: g.m(),
            lambda2: stats.sigma.max(0.0),
            pi_star: stats.pi_star,
            delta,
            epsilon,
            d_min: g.min_degree(),
            d_ave: 2.0 * g.m() as f64 / g.n() as f64,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    /// Mixing-time bound `τ(δ)` at these inputs.
    pub fn tau(&self) -> usize {
        mixing_bound(self.lambda2, self.pi_star, self.delta).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WalkmanComplexity {
    pub tau: usize,
    pub epochs: f64,
    /// Epoch count times communication per epoch.
    pub exact: f64,
    /// `ln(1/ε) n ln³n / (1-λ₂)²`.
    pub simplified: f64,
}

pub fn walkman_comm(inputs: &ComplexityInputs) -> Result<WalkmanComplexity> {
    inputs.validate()?;
    let tau = inputs.tau();
    let n = inputs.n as f64;
    let q = (1.0 - inputs.delta) * inputs.pi_star / tau as f64;
    let epochs = (n / inputs.epsilon).ln() / q.ln_1p();
    let ln_n = n.ln();
    let gap = 1.0 - inputs.lambda2;
    let simplified = (1.0 / inputs.epsilon).ln() * n * ln_n.powi(3) / (gap * gap);
    Ok(WalkmanComplexity {
        tau,
        epochs,
        exact: epochs * tau as f64,
        simplified,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    DAdmm,
    Extra,
    ExactDiffusion,
    Esdacd,
    RwAdmm,
}

impl Baseline {
    pub const ALL: [Baseline; 5] = [
        Baseline::DAdmm,
        Baseline::Extra,
        Baseline::ExactDiffusion,
        Baseline::Esdacd,
        Baseline::RwAdmm,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Baseline::DAdmm => "d-admm",
            Baseline::Extra => "extra",
            Baseline::ExactDiffusion => "exact-diffusion",
            Baseline::Esdacd => "esdacd",
            Baseline::RwAdmm => "rw-admm",
        }
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Baseline::ALL
            .into_iter()
            .find(|b| b.tag() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown baseline '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BaselineComplexity {
    pub exact: f64,
    /// The row's order with `λ₂` close to one and `m/n` arcs per node.
    pub simplified: f64,
}

pub fn baseline_comm(inputs: &ComplexityInputs, algo: Baseline) -> Result<BaselineComplexity> {
    baseline_comm_with(inputs, algo, DEFAULT_ED_CONSTANT)
}

pub fn baseline_comm_with(
    inputs: &ComplexityInputs,
    algo: Baseline,
    ed_constant: f64,
) -> Result<BaselineComplexity> {
    inputs.validate()?;
    let n = inputs.n as f64;
    let m = inputs.m as f64;
    let l2 = inputs.lambda2;
    let gap = 1.0 - l2;
    let log_eps = (1.0 / inputs.epsilon).ln();
    let (exact, simplified) = match algo {
        Baseline::DAdmm => (log_eps / gap.sqrt().ln_1p() * m, log_eps * m / gap.sqrt()),
        Baseline::Extra => (log_eps / (2.0 - l2).ln() * m, log_eps * m / gap),
        Baseline::ExactDiffusion => {
            if ed_constant <= 0.0 {
                return Err(Error::Parameter(format!(
                    "exact-diffusion constant must be positive, got {ed_constant}"
                )));
            }
            (
                log_eps / (gap / (l2 + ed_constant)).ln_1p() * m,
                log_eps * m / gap,
            )
        }
        Baseline::Esdacd => (
            log_eps * m / (inputs.d_min as f64 * gap).sqrt(),
            log_eps * (m * n).sqrt() / gap.sqrt(),
        ),
        Baseline::RwAdmm => (
            log_eps * m * inputs.d_ave / gap.sqrt(),
            log_eps * m * m / (n * gap.sqrt()),
        ),
    };
    Ok(BaselineComplexity { exact, simplified })
}

/// Regime checks under which Walkman is the most communication-efficient row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Conditions {
    /// `λ₂ ≤ 1 - ln^{4/3}(n) / m^{2/3}`.
    pub headline: bool,
    /// `n ln³n / (1-λ₂)² ≤ m / sqrt(d_min (1-λ₂))`.
    pub versus_esdacd: bool,
    /// `λ₂ ≤ 1 - n^{1/3} ln²(n) / m^{1/3}`, sufficient for `versus_esdacd`
    /// when `d_min ≤ m/n`.
    pub sufficient: bool,
}

pub fn conditions(inputs: &ComplexityInputs) -> Conditions {
    let n = inputs.n as f64;
    let m = inputs.m as f64;
    let ln_n = n.ln();
    let gap = 1.0 - inputs.lambda2;
    Conditions {
        headline: inputs.lambda2 <= 1.0 - ln_n.powf(4.0 / 3.0) / m.powf(2.0 / 3.0),
        versus_esdacd: n * ln_n.powi(3) / (gap * gap) <= m / (inputs.d_min as f64 * gap).sqrt(),
        sufficient: inputs.lambda2 <= 1.0 - n.cbrt() * ln_n * ln_n / m.cbrt(),
    }
}

/// Nonconvex orders for reaching `min_k E‖g^k‖² ≤ ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NonconvexComplexity {
    /// `ln²(1/π_*) / (ε n π_* (1-σ)²)`.
    pub walkman: f64,
    /// `ln²n / (ε (1-λ₂)²)`, the symmetric uniform-stationary form.
    pub walkman_symmetric: f64,
    /// Better of D-GPDA and xFILTER: `n² / ε`.
    pub primal_dual: f64,
}

pub fn nonconvex_comm(inputs: &ComplexityInputs) -> Result<NonconvexComplexity> {
    inputs.validate()?;
    let n = inputs.n as f64;
    let gap = 1.0 - inputs.lambda2;
    let eps = inputs.epsilon;
    let lp = (1.0 / inputs.pi_star).ln();
    Ok(NonconvexComplexity {
        walkman: lp * lp / (eps * n * inputs.pi_star * gap * gap),
        walkman_symmetric: n.ln().powi(2) / (eps * gap * gap),
        primal_dual: n * n / eps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateConstants {
    /// Strong-convexity modulus claimed for `h_β`.
    pub nu: f64,
    /// Smoothness constant claimed for `h_β`.
    pub l_bar: f64,
    /// Per-epoch contraction `(1 + n(1-δ)π_*ν / (4β²τ))⁻¹`.
    pub factor: f64,
    pub tau: usize,
    /// Whether `β > 2σ*_max + 2`, the range where the factor is claimed.
    pub valid: bool,
}

pub fn ls_rate_constants(
    problem: &ConsensusProblem,
    beta: f64,
    stats: &ChainStats,
) -> Result<RateConstants> {
    let data = problem.least_squares_data().ok_or_else(|| {
        Error::Config("rate constants are defined for least-squares problems only".into())
    })?;
    let tau = stats.tau.ok_or_else(|| {
        Error::Chain("mixing time undefined for a periodic or reducible chain".into())
    })?;
    Ok(rate_constants(
        problem.n(),
        data.sigma_max_star,
        beta,
        stats.pi_star,
        stats.delta,
        tau,
    ))
}

pub fn rate_constants(
    n: usize,
    sigma_star: f64,
    beta: f64,
    pi_star: f64,
    delta: f64,
    tau: usize,
) -> RateConstants {
    let nf = n as f64;
    let nu = (nf - 1.0) * (beta - sigma_star) / (nf * nf);
    let shrink = 1.0 - sigma_star / beta;
    let l_bar = beta / nf * (1.0 - shrink * shrink / nf);
    let factor =
        1.0 / (1.0 + nf * (1.0 - delta) * pi_star * nu / (4.0 * beta * beta * tau.max(1) as f64));
    RateConstants {
        nu,
        l_bar,
        factor,
        tau,
        valid: beta > 2.0 * sigma_star + 2.0 && nu > 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub algorithm: String,
    pub exact: f64,
    pub simplified: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityTable {
    pub inputs: ComplexityInputs,
    pub tau: usize,
    pub rows: Vec<TableRow>,
    pub conditions: Conditions,
    pub nonconvex: NonconvexComplexity,
}

pub fn complexity_table(inputs: &ComplexityInputs) -> Result<ComplexityTable> {
    let w = walkman_comm(inputs)?;
    let mut rows = vec![TableRow {
        algorithm: "walkman".into(),
        exact: w.exact,
        simplified: w.simplified,
    }];
    for b in Baseline::ALL {
        let c = baseline_comm(inputs, b)?;
        rows.push(TableRow {
            algorithm: b.tag().into(),
            exact: c.exact,
            simplified: c.simplified,
        });
    }
    Ok(ComplexityTable {
        inputs: *inputs,
        tau: w.tau,
        rows,
        conditions: conditions(inputs),
        nonconvex: nonconvex_comm(inputs)?,
    })
}

impl ComplexityTable {
    pub fn to_text(&self) -> String {
        let i = &self.inputs;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "n = {}  m = {}  lambda2 = {:.6}  pi_star = {:.4e}  delta = {}  eps = {:e}  tau = {}",
            i.n, i.m, i.lambda2, i.pi_star, i.delta, i.epsilon, self.tau
        );
        let width = self
            .rows
            .iter()
            .map(|r| r.algorithm.len())
            .max()
            .unwrap_or(9)
            .max(9);
        let _ = writeln!(
            out,
            "{:<width$}  {:>14}  {:>14}",
            "algorithm", "exact", "order"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<width$}  {:>14.4e}  {:>14.4e}",
                r.algorithm, r.exact, r.simplified
            );
        }
        let c = &self.conditions;
        let _ = writeln!(
            out,
            "headline condition: {}  vs esdacd: {}  sufficient condition: {}",
            c.headline, c.versus_esdacd, c.sufficient
        );
        let nc = &self.nonconvex;
        let _ = writeln!(
            out,
            "nonconvex: walkman {:.4e} (symmetric form {:.4e})  d-gpda/xfilter {:.4e}",
            nc.walkman, nc.walkman_symmetric, nc.primal_dual
        );
        let _ = writeln!(out, "note: {CAVEAT}");
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("algorithm,exact,order\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{:e},{:e}", r.algorithm, r.exact, r.simplified);
        }
        out
    }
}
