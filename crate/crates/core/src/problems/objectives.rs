//! Smooth local objectives `f_i` held privately by each agent.

use std::fmt::Debug;

use nalgebra::linalg::SymmetricEigen;

use crate::{Error, Matrix, Result, Vector};

/// Gradient-norm tolerance for inner Newton solves.
pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITERS: usize = 50;

pub trait LocalObjective: Debug + Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, y: &Vector) -> f64;
    fn grad(&self, y: &Vector) -> Vector;
    fn hessian(&self, y: &Vector) -> Matrix;

    /// `argmin_y f(y) + (β/2)‖y − v‖²`.
    fn prox(&self, v: &Vector, beta: f64) -> Result<Vector>;

    /// A root of `∇f(y) = βy`, found by damped Newton from the origin.
    fn stationary_point(&self, beta: f64) -> Result<Vector> {
        let p = self.dim();
        newton(
            Vector::zeros(p),
            |y| self.grad(y) - y * beta,
            |y| self.hessian(y) - Matrix::identity(p, p) * beta,
            "stationary point",
        )
    }
}

/// Damped Newton on `F(y) = 0` with backtracking on `‖F‖`.
pub(crate) fn newton(
    mut y: Vector,
    residual: impl Fn(&Vector) -> Vector,
    jacobian: impl Fn(&Vector) -> Matrix,
    what: &str,
) -> Result<Vector> {
    let mut r = residual(&y);
    for _ in 0..NEWTON_MAX_ITERS {
        let rn = r.norm();
        if rn <= NEWTON_TOL {
            return Ok(y);
        }
        let step = jacobian(&y)
            .lu()
            .solve(&r)
            .ok_or_else(|| Error::Numerical(format!("{what}: singular Newton system")))?;
        let mut t = 1.0;
        loop {
            let cand = &y - &step * t;
            let rc = residual(&cand);
            if rc.norm() < rn || t < 1e-10 {
                y = cand;
                r = rc;
                break;
            }
            t *= 0.5;
        }
    }
    if r.norm() <= NEWTON_TOL * 10.0 {
        return Ok(y);
    }
    Err(Error::Numerical(format!(
        "{what}: Newton stopped at residual {:e} after {NEWTON_MAX_ITERS} iterations",
        r.norm()
    )))
}

pub(crate) fn lambda_max(sym: &Matrix) -> f64 {
    if sym.is_empty() {
        return 0.0;
    }
    SymmetricEigen::new(sym.clone()).eigenvalues.max()
}

/// `½‖A y − b‖²`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    a: Matrix,
    b: Vector,
    ata: Matrix,
    atb: Vector,
}

impl Quadratic {
    pub fn new(a: Matrix, b: Vector) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::Data(format!(
                "A has {} rows but b has length {}",
                a.nrows(),
                b.len()
            )));
        }
        let ata = a.transpose() * &a;
        let atb = a.transpose() * &b;
        Ok(Quadratic { a, b, ata, atb })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Vector {
        &self.b
    }

    pub fn ata(&self) -> &Matrix {
        &self.ata
    }

    pub fn atb(&self) -> &Vector {
        &self.atb
    }

    /// Largest eigenvalue of `AᵀA`.
    pub fn sigma_max(&self) -> f64 {
        lambda_max(&self.ata)
    }
}

impl LocalObjective for Quadratic {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn value(&self, y: &Vector) -> f64 {
        0.5 * (&self.a * y - &self.b).norm_squared()
    }

    fn grad(&self, y: &Vector) -> Vector {
        &self.ata * y - &self.atb
    }

    fn hessian(&self, _: &Vector) -> Matrix {
        self.ata.clone()
    }

    fn prox(&self, v: &Vector, beta: f64) -> Result<Vector> {
        let p = self.dim();
        let m = &self.ata + Matrix::identity(p, p) * beta;
        let rhs = &self.atb + v * beta;
        m.cholesky().map(|c| c.solve(&rhs)).ok_or_else(|| {
            Error::Numerical("least-squares prox system not positive definite".into())
        })
    }

    /// Closed form `(AᵀA − βI)⁻¹ Aᵀb`.
    fn stationary_point(&self, beta: f64) -> Result<Vector> {
        let p = self.dim();
        (&self.ata - Matrix::identity(p, p) * beta)
            .lu()
            .solve(&self.atb)
            .ok_or_else(|| Error::Numerical(format!("AᵀA − {beta}·I is singular")))
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + eᵗ)` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Average logistic loss `(1/b) Σ_j log(1 + exp(−y_j v_jᵀ x))` over the
/// agent's samples; features are the rows of `features`.
#[derive(Debug, Clone)]
pub struct Logistic {
    features: Matrix,
    labels: Vector,
}

impl Logistic {
    pub fn new(features: Matrix, labels: Vector) -> Result<Self> {
        if features.nrows() != labels.len() || features.nrows() == 0 {
            return Err(Error::Data(
                "logistic features and labels disagree in length".into(),
            ));
        }
        if labels.iter().any(|&l| l != 1.0 && l != -1.0) {
            return Err(Error::Data("logistic labels must be ±1".into()));
        }
        Ok(Logistic { features, labels })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &Vector {
        &self.labels
    }

    /// `(1/(4b)) λ_max(Σ_j v_j v_jᵀ)`.
    pub fn curvature_bound(&self) -> f64 {
        let b = self.features.nrows() as f64;
        lambda_max(&(self.features.transpose() * &self.features)) / (4.0 * b)
    }

    fn margins(&self, x: &Vector) -> Vector {
        (&self.features * x).component_mul(&self.labels)
    }
}

impl LocalObjective for Logistic {
    fn dim(&self) -> usize {
        self.features.ncols()
    }

    fn value(&self, x: &Vector) -> f64 {
        let b = self.features.nrows() as f64;
        self.margins(x).iter().map(|&t| softplus(-t)).sum::<f64>() / b
    }

    fn grad(&self, x: &Vector) -> Vector {
        let b = self.features.nrows() as f64;
        let w = self
            .margins(x)
            .iter()
            .zip(self.labels.iter())
            .map(|(&t, &l)| -l * sigmoid(-t))
            .collect::<Vec<_>>();
        self.features.transpose() * Vector::from_vec(w) / b
    }

    fn hessian(&self, x: &Vector) -> Matrix {
        let b = self.features.nrows() as f64;
        let s = self.margins(x).map(|t| {
            let q = sigmoid(t);
            q * (1.0 - q)
        });
        let mut scaled = self.features.clone();
        for (mut row, &w) in scaled.row_iter_mut().zip(s.iter()) {
            row *= w;
        }
        self.features.transpose() * scaled / b
    }

    fn prox(&self, v: &Vector, beta: f64) -> Result<Vector> {
        let p = self.dim();
        newton(
            v.clone(),
            |x| self.grad(x) + (x - v) * beta,
            |x| self.hessian(x) + Matrix::identity(p, p) * beta,
            "logistic prox",
        )
    }
}

/// `−xᵀ S x` for a positive semidefinite sample covariance `S`.
#[derive(Debug, Clone)]
pub struct NegQuadratic {
    s: Matrix,
    lambda_max: f64,
}

impl NegQuadratic {
    pub fn new(s: Matrix) -> Result<Self> {
        if !s.is_square() {
            return Err(Error::Data("covariance must be square".into()));
        }
        let lambda_max = lambda_max(&s);
        Ok(NegQuadratic { s, lambda_max })
    }

    /// `(1/b) Σ_j y_j y_jᵀ` over the rows of `samples`.
    pub fn from_samples(samples: &Matrix) -> Result<Self> {
        if samples.nrows() == 0 {
            return Err(Error::Data("no samples".into()));
        }
        Self::new(samples.transpose() * samples / samples.nrows() as f64)
    }

    pub fn covariance(&self) -> &Matrix {
        &self.s
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }
}

impl LocalObjective for NegQuadratic {
    fn dim(&self) -> usize {
        self.s.nrows()
    }

    fn value(&self, x: &Vector) -> f64 {
        -x.dot(&(&self.s * x))
    }

    fn grad(&self, x: &Vector) -> Vector {
        &self.s * x * -2.0
    }

    fn hessian(&self, _: &Vector) -> Matrix {
        &self.s * -2.0
    }

    /// `(βI − 2S)⁻¹ βv`; needs `β > 2 λ_max(S)` for the subproblem to be convex.
    fn prox(&self, v: &Vector, beta: f64) -> Result<Vector> {
        if beta <= 2.0 * self.lambda_max {
            return Err(Error::Config(format!(
                "prox of -x'Sx needs beta > 2 lambda_max(S) = {}, got {beta}",
                2.0 * self.lambda_max
            )));
        }
        let p = self.dim();
        (Matrix::identity(p, p) * beta - &self.s * 2.0)
            .cholesky()
            .map(|c| c.solve(&(v * beta)))
            .ok_or_else(|| Error::Numerical("NN-PCA prox system not positive definite".into()))
    }
}

/// `(c/2)‖y‖²`, mostly useful in tests.
#[derive(Debug, Clone, Copy)]
pub struct Isotropic {
    pub dim: usize,
    pub c: f64,
}

impl LocalObjective for Isotropic {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, y: &Vector) -> f64 {
        0.5 * self.c * y.norm_squared()
    }
    fn grad(&self, y: &Vector) -> Vector {
        y * self.c
    }
    fn hessian(&self, _: &Vector) -> Matrix {
        Matrix::identity(self.dim, self.dim) * self.c
    }
    fn prox(&self, v: &Vector, beta: f64) -> Result<Vector> {
        Ok(v * (beta / (beta + self.c)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, b: f64) -> Quadratic {
        Quadratic::new(Matrix::from_element(1, 1, a), Vector::from_element(1, b)).unwrap()
    }

    #[test]
    fn least_squares_prox_scalar() {
        let q = scalar(1.0, 0.0);
        let p = q.prox(&Vector::from_element(1, 5.0), 4.0).unwrap();
        assert!((p[0] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn least_squares_stationary_point() {
        // (1 − 4)⁻¹ · 2
        let q = scalar(1.0, 2.0);
        let y = q.stationary_point(4.0).unwrap();
        assert!((y[0] + 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn generic_newton_matches_closed_form() {
        #[derive(Debug)]
        struct Wrapped(Quadratic);
        impl LocalObjective for Wrapped {
            fn dim(&self) -> usize {
                self.0.dim()
            }
            fn value(&self, y: &Vector) -> f64 {
                self.0.value(y)
            }
            fn grad(&self, y: &Vector) -> Vector {
                self.0.grad(y)
            }
            fn hessian(&self, y: &Vector) -> Matrix {
                self.0.hessian(y)
            }
            fn prox(&self, v: &Vector, beta: f64) -> Result<Vector> {
                self.0.prox(v, beta)
            }
        }
        let q = Quadratic::new(
            Matrix::from_row_slice(2, 2, &[1.0, 2.0, 0.5, -1.0]),
            Vector::from_column_slice(&[1.0, 3.0]),
        )
        .unwrap();
        let a = q.stationary_point(9.0).unwrap();
        let b = Wrapped(q).stationary_point(9.0).unwrap();
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn logistic_grad_at_origin() {
        let v = Matrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 0.0, 3.0]);
        let y = Vector::from_column_slice(&[1.0, -1.0, 1.0]);
        let f = Logistic::new(v.clone(), y.clone()).unwrap();
        let g = f.grad(&Vector::zeros(2));
        let want = -(v.transpose() * y) / 6.0;
        assert!((g - want).norm() < 1e-15);
        assert!((f.value(&Vector::zeros(2)) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn logistic_prox_is_stationary() {
        let v = Matrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 0.0, 3.0]);
        let y = Vector::from_column_slice(&[1.0, -1.0, 1.0]);
        let f = Logistic::new(v, y).unwrap();
        let c = Vector::from_column_slice(&[10.0, -7.0]);
        let x = f.prox(&c, 0.3).unwrap();
        assert!((f.grad(&x) + (&x - &c) * 0.3).norm() <= 1e-10);
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(1000.0) - 1000.0).abs() < 1e-12);
        assert!(softplus(-1000.0) >= 0.0 && softplus(-1000.0) < 1e-300);
        assert!((sigmoid(-800.0)).abs() < 1e-300);
    }

    #[test]
    fn neg_quadratic_identity() {
        let f = NegQuadratic::new(Matrix::identity(3, 3)).unwrap();
        let x = Vector::from_column_slice(&[1.0, -2.0, 0.5]);
        assert_eq!(f.grad(&x), &x * -2.0);
        assert!(matches!(f.prox(&x, 2.0), Err(Error::Config(_))));
        let p = f.prox(&x, 4.0).unwrap();
        assert!((p - &x * 2.0).norm() < 1e-14);
    }

    #[test]
    fn isotropic_stationary_point_is_origin() {
        let f = Isotropic { dim: 3, c: 1.0 };
        assert_eq!(f.stationary_point(4.0).unwrap(), Vector::zeros(3));
    }
}
