//! Composite objectives `F = f + r`, the smooth oracles used by the
//! benchmarks, and spectral constant estimation.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problems::ReferenceSolution;

/// Value in `R ∪ {+∞}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    PosInfinity,
}

impl ExtendedReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    /// Finite value, or `None` for `+∞`.
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            ExtendedReal::PosInfinity => None,
        }
    }

    /// Lossy conversion mapping `+∞` to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl std::ops::Add<f64> for ExtendedReal {
    type Output = ExtendedReal;

    fn add(self, rhs: f64) -> ExtendedReal {
        match self {
            ExtendedReal::Finite(v) => ExtendedReal::Finite(v + rhs),
            ExtendedReal::PosInfinity => ExtendedReal::PosInfinity,
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(v) => write!(f, "{v}"),
            ExtendedReal::PosInfinity => write!(f, "+inf"),
        }
    }
}

/// Differentiable part `f` of a composite objective.
pub trait SmoothOracle: Send + Sync {
    fn dimension(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    /// Lipschitz constant `L` of the gradient.
    fn smoothness(&self) -> f64;
    /// Strong convexity modulus `mu_f` (zero for merely convex `f`).
    fn strong_convexity(&self) -> f64;

    /// Mini-batch access, for oracles that are a finite sum over samples.
    fn sampled(&self) -> Option<&dyn SampledOracle> {
        None
    }

    /// Least-squares structure, for solvers that split on it.
    fn as_least_squares(&self) -> Option<&LeastSquaresRidge> {
        None
    }
}

/// Finite-sum oracle `f = (1/n) Σ ℓ_i + ridge`.
pub trait SampledOracle: Send + Sync {
    fn n_samples(&self) -> usize;
    /// Unbiased gradient estimate over `indices`. Summation follows the order
    /// of `indices`, so passing `0..n` reproduces [`SmoothOracle::gradient`]
    /// bit for bit.
    fn batch_gradient(&self, x: &DVector<f64>, indices: &[usize]) -> DVector<f64>;
}

/// Proper closed convex `r` with a computable proximal map.
pub trait Regularizer: Send + Sync {
    fn value(&self, x: &DVector<f64>) -> ExtendedReal;

    /// `argmin_u r(u) + ‖u − z‖² / (2 tau)`.
    fn prox(&self, tau: f64, z: &DVector<f64>) -> DVector<f64>;

    /// Checks `s ∈ ∂r(u)` up to `tol`, when the subdifferential has a cheap
    /// membership test.
    fn contains_subgradient(&self, _u: &DVector<f64>, _s: &DVector<f64>, _tol: f64) -> Option<bool> {
        None
    }

    fn name(&self) -> &'static str;
}

/// `F = f + r` together with the strong convexity modulus of `F` and an
/// optional high-precision reference solution.
#[derive(Clone)]
pub struct CompositeProblem {
    pub f: Arc<dyn SmoothOracle>,
    pub r: Arc<dyn Regularizer>,
    pub mu_big_f: f64,
    pub reference: Option<ReferenceSolution>,
}

impl fmt::Debug for CompositeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompositeProblem")
            .field("dimension", &self.dimension())
            .field("regularizer", &self.r.name())
            .field("L", &self.f.smoothness())
            .field("mu_f", &self.f.strong_convexity())
            .field("mu_F", &self.mu_big_f)
            .field("has_reference", &self.reference.is_some())
            .finish()
    }
}

impl CompositeProblem {
    /// Uses `mu_F = mu_f`, valid for any convex `r`.
    pub fn new(f: Arc<dyn SmoothOracle>, r: Arc<dyn Regularizer>) -> Self {
        let mu_big_f = f.strong_convexity();
        CompositeProblem {
            f,
            r,
            mu_big_f,
            reference: None,
        }
    }

    pub fn with_reference(mut self, reference: ReferenceSolution) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn dimension(&self) -> usize {
        self.f.dimension()
    }

    pub fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dimension() {
            return Err(Error::Dimension {
                expected: self.dimension(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `F(x) = f(x) + r(x)`.
    pub fn composite_value(&self, x: &DVector<f64>) -> Result<ExtendedReal> {
        self.check_dim(x)?;
        Ok(self.value_unchecked(x))
    }

    pub(crate) fn value_unchecked(&self, x: &DVector<f64>) -> ExtendedReal {
        match self.r.value(x) {
            ExtendedReal::Finite(r) => ExtendedReal::Finite(self.f.value(x) + r),
            ExtendedReal::PosInfinity => ExtendedReal::PosInfinity,
        }
    }

    /// `‖x − prox_{r/L}(x − ∇f(x)/L)‖`, zero exactly at minimizers of `F`.
    pub fn optimality_residual(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        let l = self.f.smoothness();
        if !(l > 0.0) {
            return Err(Error::Input(format!(
                "optimality residual needs L > 0, got {l}"
            )));
        }
        let step = 1.0 / l;
        let g = self.f.gradient(x);
        let mapped = self.r.prox(step, &(x - g * step));
        Ok((x - mapped).norm())
    }
}

/// Largest eigenvalue of `AᵀA` by power iteration, plus `lambda2`.
///
/// Starts from the normalized all-ones vector so results are reproducible.
/// Iteration stops once successive Rayleigh quotients agree to `tol`
/// relative, or after `iters` rounds.
pub fn estimate_smoothness(a: &DMatrix<f64>, lambda2: f64, iters: usize, tol: f64) -> Result<f64> {
    if iters == 0 {
        return Err(Error::Input("power iteration needs iters >= 1".into()));
    }
    let d = a.ncols();
    if d == 0 || a.nrows() == 0 {
        return Ok(lambda2);
    }
    let mut u = DVector::from_element(d, 1.0 / (d as f64).sqrt());
    let mut lambda = 0.0_f64;
    for _ in 0..iters {
        let w = a.tr_mul(&(a * &u));
        let rayleigh = u.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            // all-ones direction lies in the null space
            if a.iter().all(|&v| v == 0.0) {
                return Ok(lambda2);
            }
            return Ok(lambda2 + max_eigen_gram(a));
        }
        let converged = (rayleigh - lambda).abs() <= tol * rayleigh.abs();
        lambda = rayleigh;
        u = w / norm;
        if converged {
            break;
        }
    }
    Ok(lambda + lambda2)
}

fn max_eigen_gram(a: &DMatrix<f64>) -> f64 {
    let gram = a.tr_mul(a);
    gram.symmetric_eigenvalues().max().max(0.0)
}

/// Smallest eigenvalue of `AᵀA` (zero whenever `n < d`).
pub fn min_eigen_gram(a: &DMatrix<f64>) -> f64 {
    if a.nrows() < a.ncols() || a.ncols() == 0 {
        return 0.0;
    }
    let gram = a.tr_mul(a);
    gram.symmetric_eigenvalues().min().max(0.0)
}

/// Condition number `σ_max / σ_min` over the `min(n, d)` singular values.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

const POWER_ITERS: usize = 1000;
const POWER_TOL: f64 = 1e-10;

/// `f(x) = ½‖Ax − b‖² + (λ₂/2)‖x‖²`.
#[derive(Debug, Clone)]
pub struct LeastSquaresRidge {
    a: DMatrix<f64>,
    b: DVector<f64>,
    lambda2: f64,
    smoothness: f64,
    strong_convexity: f64,
}

impl LeastSquaresRidge {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, lambda2: f64) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::Dimension {
                expected: a.nrows(),
                got: b.len(),
            });
        }
        if !(lambda2 >= 0.0) {
            return Err(Error::Input(format!("lambda2 must be >= 0, got {lambda2}")));
        }
        let smoothness = estimate_smoothness(&a, lambda2, POWER_ITERS, POWER_TOL)?;
        let strong_convexity = (min_eigen_gram(&a) + lambda2).min(smoothness);
        Ok(LeastSquaresRidge {
            a,
            b,
            lambda2,
            smoothness,
            strong_convexity,
        })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }
}

impl SmoothOracle for LeastSquaresRidge {
    fn dimension(&self) -> usize {
        self.a.ncols()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let resid = &self.a * x - &self.b;
        0.5 * resid.norm_squared() + 0.5 * self.lambda2 * x.norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let resid = &self.a * x - &self.b;
        self.a.tr_mul(&resid) + x * self.lambda2
    }

    fn smoothness(&self) -> f64 {
        self.smoothness
    }

    fn strong_convexity(&self) -> f64 {
        self.strong_convexity
    }

    fn as_least_squares(&self) -> Option<&LeastSquaresRidge> {
        Some(self)
    }
}

/// Multinomial logistic loss with ridge, over a weight matrix `W (d×C)`
/// flattened column-major: entry `(j, c)` lives at index `j + d·c`.
#[derive(Debug, Clone)]
pub struct SoftmaxLoss {
    /// Features stored transposed (`d×n`) so each sample is a contiguous column.
    xt: DMatrix<f64>,
    labels: Vec<usize>,
    classes: usize,
    lambda2: f64,
    smoothness: f64,
}

impl SoftmaxLoss {
    pub fn new(x: &DMatrix<f64>, labels: Vec<usize>, classes: usize, lambda2: f64) -> Result<Self> {
        let n = x.nrows();
        if n == 0 {
            return Err(Error::Input("softmax loss needs at least one sample".into()));
        }
        if labels.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: labels.len(),
            });
        }
        if classes < 2 {
            return Err(Error::Input(format!("need at least 2 classes, got {classes}")));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::Input(format!("label {bad} out of range for {classes} classes")));
        }
        if !(lambda2 >= 0.0) {
            return Err(Error::Input(format!("lambda2 must be >= 0, got {lambda2}")));
        }
        // Hessian of the mean cross-entropy is bounded by XᵀX/(2n) ⊗ I.
        let gram_max = estimate_smoothness(x, 0.0, POWER_ITERS, POWER_TOL)?;
        let smoothness = gram_max / (2.0 * n as f64) + lambda2;
        Ok(SoftmaxLoss {
            xt: x.transpose(),
            labels,
            classes,
            lambda2,
            smoothness,
        })
    }

    pub fn features(&self) -> usize {
        self.xt.nrows()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn n_samples(&self) -> usize {
        self.xt.ncols()
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    fn logits(&self, w: &DVector<f64>, i: usize, out: &mut [f64]) {
        let d = self.features();
        let xi = self.xt.column(i);
        for (c, slot) in out.iter_mut().enumerate() {
            let block = w.rows(c * d, d);
            *slot = xi.dot(&block);
        }
    }

    /// Stable log-sum-exp; rewrites `z` into probabilities.
    fn softmax_in_place(z: &mut [f64]) -> f64 {
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in z.iter_mut() {
            *v = (*v - m).exp();
            sum += *v;
        }
        for v in z.iter_mut() {
            *v /= sum;
        }
        m + sum.ln()
    }

    /// Mean cross-entropy, without the ridge term.
    pub fn data_fit(&self, w: &DVector<f64>) -> f64 {
        let n = self.n_samples();
        let mut z = vec![0.0; self.classes];
        let mut total = 0.0;
        for i in 0..n {
            self.logits(w, i, &mut z);
            let target = z[self.labels[i]];
            let lse = Self::softmax_in_place(&mut z);
            total += lse - target;
        }
        total / n as f64
    }

    /// Class probabilities for sample `i`.
    pub fn probabilities(&self, w: &DVector<f64>, i: usize) -> Vec<f64> {
        let mut z = vec![0.0; self.classes];
        self.logits(w, i, &mut z);
        Self::softmax_in_place(&mut z);
        z
    }

    /// Argmax predictions over the stored samples.
    pub fn predict(&self, w: &DVector<f64>) -> Vec<usize> {
        let mut z = vec![0.0; self.classes];
        (0..self.n_samples())
            .map(|i| {
                self.logits(w, i, &mut z);
                argmax(&z)
            })
            .collect()
    }

    pub fn accuracy(&self, w: &DVector<f64>) -> f64 {
        let pred = self.predict(w);
        let hits = pred.iter().zip(&self.labels).filter(|(p, y)| p == y).count();
        hits as f64 / self.n_samples() as f64
    }
}

pub(crate) fn argmax(z: &[f64]) -> usize {
    let mut best = 0;
    for (c, &v) in z.iter().enumerate() {
        if v > z[best] {
            best = c;
        }
    }
    best
}

impl SmoothOracle for SoftmaxLoss {
    fn dimension(&self) -> usize {
        self.features() * self.classes
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.data_fit(x) + 0.5 * self.lambda2 * x.norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let all: Vec<usize> = (0..self.n_samples()).collect();
        self.batch_gradient(x, &all)
    }

    fn smoothness(&self) -> f64 {
        self.smoothness
    }

    fn strong_convexity(&self) -> f64 {
        self.lambda2
    }

    fn sampled(&self) -> Option<&dyn SampledOracle> {
        Some(self)
    }
}

impl SampledOracle for SoftmaxLoss {
    fn n_samples(&self) -> usize {
        self.xt.ncols()
    }

    fn batch_gradient(&self, x: &DVector<f64>, indices: &[usize]) -> DVector<f64> {
        let d = self.features();
        let mut grad = DVector::zeros(x.len());
        let mut z = vec![0.0; self.classes];
        for &i in indices {
            self.logits(x, i, &mut z);
            Self::softmax_in_place(&mut z);
            z[self.labels[i]] -= 1.0;
            let xi = self.xt.column(i);
            for (c, &coef) in z.iter().enumerate() {
                grad.rows_mut(c * d, d).axpy(coef, &xi, 1.0);
            }
        }
        let scale = 1.0 / indices.len().max(1) as f64;
        grad * scale + x * self.lambda2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prox::{L1Penalty, ZeroRegularizer};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lsr(a: DMatrix<f64>, b: DVector<f64>, l2: f64) -> Arc<LeastSquaresRidge> {
        Arc::new(LeastSquaresRidge::new(a, b, l2).unwrap())
    }

    #[test]
    fn composite_value_identity_quadratic() {
        let f = lsr(DMatrix::identity(2, 2), DVector::zeros(2), 0.0);
        let x = DVector::from_vec(vec![1.0, 1.0]);
        let p = CompositeProblem::new(f.clone(), Arc::new(ZeroRegularizer));
        assert_eq!(p.composite_value(&x).unwrap(), ExtendedReal::Finite(1.0));
        let p = CompositeProblem::new(f, Arc::new(L1Penalty::new(1.0).unwrap()));
        assert_eq!(p.composite_value(&x).unwrap(), ExtendedReal::Finite(3.0));
    }

    #[test]
    fn composite_value_matches_elementwise_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = DMatrix::from_fn(5, 3, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(5, |_, _| rng.random_range(-1.0..1.0));
        let x = DVector::<f64>::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
        let (l1, l2) = (0.3, 0.7);
        let mut expected = 0.0;
        for i in 0..5 {
            let mut ri = -b[i];
            for j in 0..3 {
                ri += a[(i, j)] * x[j];
            }
            expected += 0.5 * ri * ri;
        }
        for j in 0..3 {
            expected += 0.5 * l2 * x[j] * x[j] + l1 * x[j].abs();
        }
        let p = CompositeProblem::new(lsr(a, b, l2), Arc::new(L1Penalty::new(l1).unwrap()));
        let got = p.composite_value(&x).unwrap().finite().unwrap();
        assert!((got - expected).abs() <= 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn composite_value_rejects_wrong_dimension() {
        let p = CompositeProblem::new(
            lsr(DMatrix::identity(2, 2), DVector::zeros(2), 0.0),
            Arc::new(ZeroRegularizer),
        );
        let err = p.composite_value(&DVector::zeros(3)).unwrap_err();
        assert!(matches!(err, Error::Dimension { expected: 2, got: 3 }));
    }

    #[test]
    fn power_iteration_examples() {
        let l = estimate_smoothness(&DMatrix::identity(2, 2), 0.0, 1000, 1e-10).unwrap();
        assert!((l - 1.0).abs() < 1e-12);
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        let l = estimate_smoothness(&a, 0.5, 1000, 1e-10).unwrap();
        assert!((l - 4.5).abs() < 1e-9, "{l}");
        let l = estimate_smoothness(&DMatrix::zeros(3, 3), 2.0, 1000, 1e-10).unwrap();
        assert_eq!(l, 2.0);
        assert!(estimate_smoothness(&a, 0.0, 0, 1e-10).is_err());
    }

    #[test]
    fn power_iteration_start_in_null_space() {
        // all-ones is annihilated by this A
        let a = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 2.0, -2.0]);
        let l = estimate_smoothness(&a, 0.0, 1000, 1e-10).unwrap();
        assert!((l - 10.0).abs() < 1e-9, "{l}");
    }

    #[test]
    fn power_iteration_matches_eigensolver() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = DMatrix::from_fn(30, 12, |_, _| rng.random_range(-1.0..1.0));
        let l = estimate_smoothness(&a, 0.0, 1000, 1e-10).unwrap();
        let exact = max_eigen_gram(&a);
        assert!((l - exact).abs() <= 1e-8 * exact);
    }

    #[test]
    fn ridge_constants() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        let f = LeastSquaresRidge::new(a, DVector::zeros(2), 0.5).unwrap();
        assert!((f.smoothness() - 4.5).abs() < 1e-9);
        assert!((f.strong_convexity() - 1.5).abs() < 1e-12);
        // wide matrix without ridge is not strongly convex
        let f = LeastSquaresRidge::new(DMatrix::from_element(2, 3, 1.0), DVector::zeros(2), 0.0).unwrap();
        assert_eq!(f.strong_convexity(), 0.0);
    }

    #[test]
    fn residual_examples() {
        let f = lsr(DMatrix::identity(1, 1), DVector::zeros(1), 0.0);
        let p = CompositeProblem::new(f, Arc::new(ZeroRegularizer));
        assert_eq!(p.optimality_residual(&DVector::from_element(1, 0.0)).unwrap(), 0.0);
        assert_eq!(p.optimality_residual(&DVector::from_element(1, 1.0)).unwrap(), 1.0);
    }

    #[test]
    fn softmax_uniform_at_zero() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 0.0, 3.0]);
        let loss = SoftmaxLoss::new(&x, vec![0, 1, 2], 3, 0.0).unwrap();
        let w = DVector::zeros(loss.dimension());
        for i in 0..3 {
            for p in loss.probabilities(&w, i) {
                assert!((p - 1.0 / 3.0).abs() < 1e-15);
            }
        }
        assert!((loss.value(&w) - 3.0_f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn softmax_rejects_bad_labels() {
        let x = DMatrix::zeros(2, 2);
        assert!(SoftmaxLoss::new(&x, vec![0, 3], 3, 0.0).is_err());
        assert!(SoftmaxLoss::new(&x, vec![0], 3, 0.0).is_err());
        assert!(SoftmaxLoss::new(&x, vec![0, 0], 1, 0.0).is_err());
    }

    #[test]
    fn extended_real_arithmetic() {
        assert_eq!(ExtendedReal::Finite(1.0) + 2.0, ExtendedReal::Finite(3.0));
        assert_eq!(ExtendedReal::PosInfinity + 2.0, ExtendedReal::PosInfinity);
        assert_eq!(ExtendedReal::PosInfinity.to_f64(), f64::INFINITY);
        assert!(!ExtendedReal::PosInfinity.is_finite());
    }
}
