//! Consensus problems `min_x r(x) + (1/n) Σ_i f_i(x)` and generators for the
//! least-squares, sparse logistic regression and NN-PCA instances.

mod idx;
mod objectives;
mod regularizers;

use std::path::PathBuf;
use std::sync::Arc;

use log::warn;
use nalgebra::linalg::SymmetricEigen;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use idx::{
    encode_images, encode_labels, load_idx, parse_idx, IdxData, IMAGES_MAGIC, LABELS_MAGIC,
};
pub use objectives::{
    Isotropic, LocalObjective, Logistic, NegQuadratic, Quadratic, NEWTON_MAX_ITERS, NEWTON_TOL,
};
pub use regularizers::{soft_threshold, NonnegUnitBall, Regularizer, SemiconvexL1, Zero, L1};

use crate::{Error, Matrix, Result, Vector};

/// Classes in the IDX label file; agent `i` keeps label `i % LABEL_CLASSES`.
pub const LABEL_CLASSES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    LeastSquares,
    Logistic,
    NnPca,
    Custom,
}

/// Least-squares blocks kept in concrete form for the quantities that need
/// `A_i` explicitly.
#[derive(Debug, Clone)]
pub struct LeastSquaresData {
    pub blocks: Vec<Quadratic>,
    /// `max_i λ_max(A_iᵀA_i)`.
    pub sigma_max_star: f64,
}

impl LeastSquaresData {
    pub fn new(blocks: Vec<Quadratic>) -> Self {
        let sigma_max_star = blocks.iter().map(Quadratic::sigma_max).fold(0.0, f64::max);
        LeastSquaresData {
            blocks,
            sigma_max_star,
        }
    }

    /// `(Σ AᵢᵀAᵢ)⁻¹ Σ Aᵢᵀbᵢ`, rejecting a singular or badly conditioned normal matrix.
    pub fn solve(&self) -> Result<Vector> {
        let p = self.blocks[0].dim();
        let mut ata = Matrix::zeros(p, p);
        let mut atb = Vector::zeros(p);
        for q in &self.blocks {
            ata += q.ata();
            atb += q.atb();
        }
        let eig = SymmetricEigen::new(ata.clone()).eigenvalues;
        let (lo, hi) = (eig.min(), eig.max());
        if lo <= hi * 1e-12 {
            return Err(Error::Data(format!(
                "sum of AᵢᵀAᵢ is singular (eigenvalues {lo:e} .. {hi:e})"
            )));
        }
        ata.cholesky()
            .map(|c| c.solve(&atb))
            .ok_or_else(|| Error::Data("sum of AᵢᵀAᵢ is not positive definite".into()))
    }
}

#[derive(Debug, Clone)]
pub struct ConsensusProblem {
    kind: ProblemKind,
    locals: Vec<Arc<dyn LocalObjective>>,
    reg: Arc<dyn Regularizer>,
    lipschitz: f64,
    x_star: Option<Vector>,
    least_squares: Option<LeastSquaresData>,
}

impl ConsensusProblem {
    pub fn new(
        locals: Vec<Arc<dyn LocalObjective>>,
        reg: Arc<dyn Regularizer>,
        lipschitz: f64,
    ) -> Result<Self> {
        let Some(first) = locals.first() else {
            return Err(Error::Parameter("problem needs at least one agent".into()));
        };
        let p = first.dim();
        if locals.iter().any(|f| f.dim() != p) {
            return Err(Error::Parameter(
                "local objectives disagree in dimension".into(),
            ));
        }
        if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
            return Err(Error::Parameter(format!(
                "invalid Lipschitz constant {lipschitz}"
            )));
        }
        Ok(ConsensusProblem {
            kind: ProblemKind::Custom,
            locals,
            reg,
            lipschitz,
            x_star: None,
            least_squares: None,
        })
    }

    /// `r ≡ 0`, `f_i = ½‖Aᵢy − bᵢ‖²`, `L = σ*_max`, with `x⋆` solved in closed form.
    pub fn least_squares(data: LeastSquaresData) -> Result<Self> {
        let x_star = data.solve()?;
        let locals = data
            .blocks
            .iter()
            .map(|q| Arc::new(q.clone()) as Arc<dyn LocalObjective>)
            .collect();
        let mut prob = Self::new(locals, Arc::new(Zero), data.sigma_max_star)?;
        prob.kind = ProblemKind::LeastSquares;
        prob.x_star = Some(x_star);
        prob.least_squares = Some(data);
        Ok(prob)
    }

    pub fn with_kind(mut self, kind: ProblemKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_x_star(mut self, x: Vector) -> Self {
        self.x_star = Some(x);
        self
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.locals.len()
    }

    pub fn p(&self) -> usize {
        self.locals[0].dim()
    }

    pub fn local(&self, i: usize) -> &dyn LocalObjective {
        self.locals[i].as_ref()
    }

    pub fn locals(&self) -> &[Arc<dyn LocalObjective>] {
        &self.locals
    }

    pub fn regularizer(&self) -> &dyn Regularizer {
        self.reg.as_ref()
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn gamma(&self) -> f64 {
        self.reg.semiconvexity()
    }

    pub fn x_star(&self) -> Option<&Vector> {
        self.x_star.as_ref()
    }

    pub fn least_squares_data(&self) -> Option<&LeastSquaresData> {
        self.least_squares.as_ref()
    }

    /// `(1/n) Σ f_i(x)`.
    pub fn smooth_value(&self, x: &Vector) -> f64 {
        self.locals.iter().map(|f| f.value(x)).sum::<f64>() / self.n() as f64
    }

    pub fn objective(&self, x: &Vector) -> f64 {
        self.reg.value(x) + self.smooth_value(x)
    }

    /// `(1/n) Σ ∇f_i(x)`.
    pub fn mean_grad(&self, x: &Vector) -> Vector {
        let mut g = Vector::zeros(self.p());
        for f in &self.locals {
            g += f.grad(x);
        }
        g / self.n() as f64
    }

    /// `‖x − x⋆‖² / ‖x⋆‖²`, or the plain squared distance when `x⋆ = 0`.
    pub fn relative_error(&self, x: &Vector) -> Option<f64> {
        self.x_star.as_ref().map(|s| {
            let d = (x - s).norm_squared();
            let base = s.norm_squared();
            if base > 0.0 {
                d / base
            } else {
                d
            }
        })
    }
}

fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn gaussian_vector<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vector {
    Vector::from_fn(len, |_, _| StandardNormal.sample(rng))
}

/// `Aᵢ` with standard Gaussian entries, `bᵢ = Aᵢx₀ + vᵢ`, `x₀ ~ N(0, I)` and
/// `vᵢ ~ N(0, noise·I)` (`noise` is a variance).
pub fn gen_least_squares<R: Rng + ?Sized>(
    n: usize,
    rows: usize,
    p: usize,
    noise: f64,
    rng: &mut R,
) -> Result<ConsensusProblem> {
    if n == 0 || rows == 0 || p == 0 {
        return Err(Error::Parameter(
            "least squares needs n, rows, p > 0".into(),
        ));
    }
    if noise.is_nan() || noise < 0.0 {
        return Err(Error::Parameter(format!(
            "noise variance must be nonnegative, got {noise}"
        )));
    }
    if n * rows < p {
        warn!(
            "n·rows = {} < p = {p}: the normal matrix will be singular",
            n * rows
        );
    }
    let x0 = gaussian_vector(p, rng);
    let sd = noise.sqrt();
    let blocks = (0..n)
        .map(|_| {
            let a = gaussian_matrix(rows, p, rng);
            let b = &a * &x0 + gaussian_vector(rows, rng) * sd;
            Quadratic::new(a, b)
        })
        .collect::<Result<Vec<_>>>()?;
    ConsensusProblem::least_squares(LeastSquaresData::new(blocks))
}

/// Sparse logistic regression with `b` samples per agent. Features are
/// standard Gaussian; label `+1` is drawn with probability `sigmoid(vᵀx₀)`.
/// The reference optimum is computed centrally to `1e-12`.
pub fn gen_logistic<R: Rng + ?Sized>(
    n: usize,
    b: usize,
    p: usize,
    lambda: f64,
    rng: &mut R,
) -> Result<ConsensusProblem> {
    if n == 0 || b == 0 || p == 0 {
        return Err(Error::Parameter(
            "logistic regression needs n, b, p > 0".into(),
        ));
    }
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::Parameter(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    let x0 = gaussian_vector(p, rng);
    let mut locals: Vec<Arc<dyn LocalObjective>> = Vec::with_capacity(n);
    let mut lip: f64 = 0.0;
    for _ in 0..n {
        let v = gaussian_matrix(b, p, rng);
        let labels = Vector::from_fn(b, |j, _| {
            let z: f64 = rng.random();
            let t = v.row(j).transpose().dot(&x0);
            if z <= 1.0 / (1.0 + (-t).exp()) {
                1.0
            } else {
                -1.0
            }
        });
        let f = Logistic::new(v, labels)?;
        lip = lip.max(f.curvature_bound());
        locals.push(Arc::new(f));
    }
    let prob = ConsensusProblem::new(locals, Arc::new(L1 { lambda }), lip)?
        .with_kind(ProblemKind::Logistic);
    let x_star = reference_solution(&prob, 1e-12, 1_000_000)?;
    Ok(prob.with_x_star(x_star))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum NnPcaSource {
    /// Standard Gaussian samples.
    Synthetic,
    /// MNIST-style images and labels; `p` must equal the pixel count.
    Idx { images: PathBuf, labels: PathBuf },
}

/// NN-PCA: `f_i(x) = −xᵀSᵢx`, `r` the indicator of `{x ≥ 0, ‖x‖ ≤ 1}`,
/// `L = 2 maxᵢ λ_max(Sᵢ)`.
pub fn gen_nnpca<R: Rng + ?Sized>(
    n: usize,
    b: usize,
    p: usize,
    source: &NnPcaSource,
    rng: &mut R,
) -> Result<ConsensusProblem> {
    if n == 0 || b == 0 || p == 0 {
        return Err(Error::Parameter("NN-PCA needs n, b, p > 0".into()));
    }
    let blocks = match source {
        NnPcaSource::Synthetic => (0..n).map(|_| gaussian_matrix(b, p, rng)).collect(),
        NnPcaSource::Idx { images, labels } => {
            let IdxData::Images { samples, .. } = load_idx(images)? else {
                return Err(Error::Data(format!(
                    "{} is not an image file",
                    images.display()
                )));
            };
            let IdxData::Labels(labels) = load_idx(labels)? else {
                return Err(Error::Data(format!(
                    "{} is not a label file",
                    labels.display()
                )));
            };
            if samples.ncols() != p {
                return Err(Error::Config(format!(
                    "p = {p} but images have {} pixels",
                    samples.ncols()
                )));
            }
            partition_by_label(n, b, &samples, &labels)?
        }
    };
    nnpca_from_blocks(&blocks)
}

/// Agent `i` receives the `(i / 10)`-th block of `b` samples carrying label `i % 10`.
pub fn partition_by_label(
    n: usize,
    b: usize,
    samples: &Matrix,
    labels: &[u8],
) -> Result<Vec<Matrix>> {
    if samples.nrows() != labels.len() {
        return Err(Error::Data(format!(
            "{} images but {} labels",
            samples.nrows(),
            labels.len()
        )));
    }
    let mut by_label: Vec<Vec<usize>> = vec![Vec::new(); LABEL_CLASSES];
    for (row, &l) in labels.iter().enumerate() {
        if (l as usize) < LABEL_CLASSES {
            by_label[l as usize].push(row);
        }
    }
    (0..n)
        .map(|i| {
            let label = i % LABEL_CLASSES;
            let block = i / LABEL_CLASSES;
            let rows = by_label[label]
                .get(block * b..(block + 1) * b)
                .ok_or_else(|| {
                    Error::Data(format!(
                        "not enough samples with label {label} for agent {i}"
                    ))
                })?;
            Ok(samples.select_rows(rows.iter()))
        })
        .collect()
}

pub fn nnpca_from_blocks(blocks: &[Matrix]) -> Result<ConsensusProblem> {
    let mut locals: Vec<Arc<dyn LocalObjective>> = Vec::with_capacity(blocks.len());
    let mut lip: f64 = 0.0;
    for s in blocks {
        let f = NegQuadratic::from_samples(s)?;
        lip = lip.max(2.0 * f.lambda_max());
        locals.push(Arc::new(f));
    }
    Ok(ConsensusProblem::new(locals, Arc::new(NonnegUnitBall), lip)?.with_kind(ProblemKind::NnPca))
}

/// Centralized proximal gradient on `r + (1/n) Σ f_i` with step `1/L`,
/// stopped when the prox-gradient mapping `L‖x⁺ − x‖` falls below `tol`.
pub fn reference_solution(
    problem: &ConsensusProblem,
    tol: f64,
    max_iters: usize,
) -> Result<Vector> {
    if let Some(x) = problem.x_star() {
        return Ok(x.clone());
    }
    let lip = problem.lipschitz().max(f64::MIN_POSITIVE);
    let reg = problem.regularizer();
    let mut x = Vector::zeros(problem.p());
    for _ in 0..max_iters {
        let next = reg.prox(&(&x - problem.mean_grad(&x) / lip), lip);
        let gap = lip * (&next - &x).norm();
        x = next;
        if gap <= tol {
            return Ok(x);
        }
    }
    Err(Error::Numerical(format!(
        "reference solver did not reach {tol:e} in {max_iters} iterations"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn two_agent_scalar() -> ConsensusProblem {
        let q = |b: f64| {
            Quadratic::new(Matrix::from_element(1, 1, 1.0), Vector::from_element(1, b)).unwrap()
        };
        ConsensusProblem::least_squares(LeastSquaresData::new(vec![q(1.0), q(3.0)])).unwrap()
    }

    #[test]
    fn scalar_least_squares_optimum() {
        let p = two_agent_scalar();
        assert!((p.x_star().unwrap()[0] - 2.0).abs() < 1e-14);
        assert_eq!(p.lipschitz(), 1.0);
    }

    #[test]
    fn zero_rhs_gives_zero_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let blocks = (0..4)
            .map(|_| Quadratic::new(gaussian_matrix(5, 3, &mut rng), Vector::zeros(5)).unwrap())
            .collect();
        let p = ConsensusProblem::least_squares(LeastSquaresData::new(blocks)).unwrap();
        assert!(p.x_star().unwrap().norm() < 1e-14);
    }

    #[test]
    fn singular_normal_matrix_rejected() {
        let q = Quadratic::new(
            Matrix::from_row_slice(1, 2, &[1.0, 1.0]),
            Vector::from_element(1, 1.0),
        )
        .unwrap();
        let err = ConsensusProblem::least_squares(LeastSquaresData::new(vec![q])).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn generated_least_squares_shapes() {
        let p = gen_least_squares(50, 5, 10, 0.1, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!((p.n(), p.p()), (50, 10));
        let data = p.least_squares_data().unwrap();
        assert_eq!(data.blocks[7].a().shape(), (5, 10));
        assert!((data.sigma_max_star - p.lipschitz()).abs() < 1e-12);
        // x⋆ zeroes the mean gradient
        assert!(p.mean_grad(p.x_star().unwrap()).norm() < 1e-10);
    }

    #[test]
    fn logistic_reference_is_stationary() {
        let p = gen_logistic(6, 10, 5, 0.01, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let x = p.x_star().unwrap();
        let lip = p.lipschitz();
        let next = p.regularizer().prox(&(x - p.mean_grad(x) / lip), lip);
        assert!((next - x).norm() * lip <= 1e-12);
    }

    #[test]
    fn label_partition() {
        let samples = Matrix::from_fn(40, 2, |i, j| (i * 2 + j) as f64);
        let labels: Vec<u8> = (0..40).map(|i| (i % 10) as u8).collect();
        let blocks = partition_by_label(12, 2, &samples, &labels).unwrap();
        // agent 11: label 1, second block → rows 21 and 31
        assert_eq!(blocks[11].row(0)[0], 42.0);
        assert_eq!(blocks[11].row(1)[0], 62.0);
        assert!(partition_by_label(12, 3, &samples, &labels).is_err());
    }

    #[test]
    fn nnpca_lipschitz_and_prox_guard() {
        let p = gen_nnpca(
            4,
            30,
            6,
            &NnPcaSource::Synthetic,
            &mut ChaCha8Rng::seed_from_u64(4),
        )
        .unwrap();
        let lmax = p
            .locals()
            .iter()
            .map(|f| objectives::lambda_max(&-f.hessian(&Vector::zeros(6))))
            .fold(0.0, f64::max);
        assert!((p.lipschitz() - lmax).abs() < 1e-10);
        assert!(p
            .local(0)
            .prox(&Vector::zeros(6), 0.5 * p.lipschitz())
            .is_err());
        assert_eq!(p.kind(), ProblemKind::NnPca);
    }

    #[test]
    fn idx_backed_nnpca() {
        let dir = tempfile::tempdir().unwrap();
        let samples = Matrix::from_fn(40, 4, |i, j| ((i + j) % 5) as f64 / 4.0);
        let labels: Vec<u8> = (0..40).map(|i| (i % 10) as u8).collect();
        let img = dir.path().join("img.idx");
        let lab = dir.path().join("lab.idx");
        std::fs::write(&img, encode_images(&samples, 2, 2)).unwrap();
        std::fs::write(&lab, encode_labels(&labels)).unwrap();
        let src = NnPcaSource::Idx {
            images: img,
            labels: lab,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = gen_nnpca(10, 2, 4, &src, &mut rng).unwrap();
        assert_eq!(p.n(), 10);
        assert!(matches!(
            gen_nnpca(10, 2, 5, &src, &mut rng),
            Err(Error::Config(_))
        ));
    }
}
