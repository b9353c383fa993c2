//! Shared regularizers `r` with their proximal maps.

use std::fmt::Debug;

use crate::Vector;

/// Feasibility slack used when evaluating indicator functions.
const FEASIBILITY_TOL: f64 = 1e-9;

/// A possibly nonsmooth regularizer. `prox(v, β)` returns
/// `argmin_x r(x) + (β/2)‖x − v‖²`.
pub trait Regularizer: Debug + Send + Sync {
    fn name(&self) -> &'static str;

    /// May be `+∞` for indicator functions off their domain.
    fn value(&self, x: &Vector) -> f64;

    fn prox(&self, v: &Vector, beta: f64) -> Vector;

    /// Modulus `γ` such that `r + (γ/2)‖·‖²` is convex.
    fn semiconvexity(&self) -> f64 {
        0.0
    }

    fn is_zero(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Zero;

impl Regularizer for Zero {
    fn name(&self) -> &'static str {
        "zero"
    }
    fn value(&self, _: &Vector) -> f64 {
        0.0
    }
    fn prox(&self, v: &Vector, _: f64) -> Vector {
        v.clone()
    }
    fn is_zero(&self) -> bool {
        true
    }
}

pub fn soft_threshold(v: &Vector, t: f64) -> Vector {
    v.map(|a| a.signum() * (a.abs() - t).max(0.0))
}

/// `λ‖x‖₁`.
#[derive(Debug, Clone, Copy)]
pub struct L1 {
    pub lambda: f64,
}

impl Regularizer for L1 {
    fn name(&self) -> &'static str {
        "l1"
    }
    fn value(&self, x: &Vector) -> f64 {
        self.lambda * x.lp_norm(1)
    }
    fn prox(&self, v: &Vector, beta: f64) -> Vector {
        soft_threshold(v, self.lambda / beta)
    }
    fn is_zero(&self) -> bool {
        self.lambda == 0.0
    }
}

/// Indicator of `{x : x ≥ 0, ‖x‖ ≤ 1}`.
#[derive(Debug, Clone, Copy, Default)]
pub struct NonnegUnitBall;

impl NonnegUnitBall {
    pub fn contains(x: &Vector) -> bool {
        x.iter().all(|&v| v >= -FEASIBILITY_TOL) && x.norm() <= 1.0 + FEASIBILITY_TOL
    }

    /// Clip to the orthant, then rescale onto the ball. The composition is the
    /// exact projection because scaling preserves the orthant.
    pub fn project(v: &Vector) -> Vector {
        let mut x = v.map(|a| a.max(0.0));
        let nrm = x.norm();
        if nrm > 1.0 {
            x /= nrm;
        }
        x
    }
}

impl Regularizer for NonnegUnitBall {
    fn name(&self) -> &'static str {
        "nonneg-unit-ball"
    }
    fn value(&self, x: &Vector) -> f64 {
        if Self::contains(x) {
            0.0
        } else {
            f64::INFINITY
        }
    }
    fn prox(&self, v: &Vector, _: f64) -> Vector {
        Self::project(v)
    }
}

/// `λ‖x‖₁ − (γ/2)‖x‖²`, a weakly convex penalty with modulus `γ`.
/// Its prox is only defined for `β > γ`.
#[derive(Debug, Clone, Copy)]
pub struct SemiconvexL1 {
    pub lambda: f64,
    pub gamma: f64,
}

impl Regularizer for SemiconvexL1 {
    fn name(&self) -> &'static str {
        "semiconvex-l1"
    }
    fn value(&self, x: &Vector) -> f64 {
        self.lambda * x.lp_norm(1) - 0.5 * self.gamma * x.norm_squared()
    }
    fn prox(&self, v: &Vector, beta: f64) -> Vector {
        assert!(
            beta > self.gamma,
            "prox of a {}-semiconvex term needs beta > gamma",
            self.gamma
        );
        soft_threshold(&(v * beta), self.lambda) / (beta - self.gamma)
    }
    fn semiconvexity(&self) -> f64 {
        self.gamma
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn shrinkage() {
        let r = L1 { lambda: 1.0 };
        assert_eq!(r.prox(&v(&[3.0, -0.5]), 1.0), v(&[2.0, 0.0]));
        assert_eq!(r.prox(&v(&[-4.0]), 2.0), v(&[-3.5]));
    }

    #[test]
    fn projection_cases() {
        let r = NonnegUnitBall;
        let p = r.prox(&v(&[-1.0, 2.0]), 1.0);
        assert!((p - v(&[0.0, 1.0])).norm() < 1e-15);
        assert_eq!(r.prox(&v(&[0.3, 0.4]), 1.0), v(&[0.3, 0.4]));
        assert_eq!(r.value(&v(&[0.3, 0.4])), 0.0);
        assert!(r.value(&v(&[-0.1, 0.0])).is_infinite());
    }

    /// Projection KKT: `v − P(v)` lies in the normal cone at `P(v)`.
    #[test]
    fn projection_kkt() {
        let cases = [
            v(&[-1.0, 2.0, 0.5]),
            v(&[0.2, -0.3, 0.1]),
            v(&[3.0, 4.0, -1.0]),
        ];
        for c in cases {
            let x = NonnegUnitBall::project(&c);
            let g = &c - &x;
            let on_sphere = (x.norm() - 1.0).abs() < 1e-12;
            let t = if on_sphere { g.dot(&x).max(0.0) } else { 0.0 };
            let rest = &g - &x * t;
            for j in 0..x.len() {
                if x[j] > 0.0 {
                    assert!(rest[j].abs() < 1e-12);
                } else {
                    assert!(rest[j] <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn semiconvex_prox_minimizes_scalar() {
        let r = SemiconvexL1 {
            lambda: 0.5,
            gamma: 1.0,
        };
        let beta = 3.0;
        let x0 = v(&[0.8]);
        let p = r.prox(&x0, beta)[0];
        let obj = |x: f64| 0.5 * x.abs() - 0.5 * x * x + 0.5 * beta * (x - 0.8) * (x - 0.8);
        for k in -2000..=2000 {
            let t = k as f64 * 1e-3;
            assert!(obj(p) <= obj(t) + 1e-12);
        }
        assert_eq!(r.semiconvexity(), 1.0);
    }
}
