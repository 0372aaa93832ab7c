//! Seeded benchmark instances and the high-precision reference solver.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{CompositeProblem, LeastSquaresRidge, SoftmaxLoss};
use crate::prox::{GroupL2Penalty, GroupPartition, L1Penalty};
use crate::solvers::fista_momentum;

pub const NOISE_STD: f64 = 0.01;
pub const DEFAULT_COND_TARGET: f64 = 1e3;
/// Largest singular value of the conditioned design.
pub const DEFAULT_HARD_S_MAX: f64 = 3.0;
pub const DEFAULT_SUPPORT_FRACTION: f64 = 0.3;
pub const SUPPORT_THRESHOLD: f64 = 1e-8;
pub const REFERENCE_RESIDUAL_TOL: f64 = 1e-12;
pub const REFERENCE_ITER_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub x_star: DVector<f64>,
    pub f_star: f64,
    pub residual: f64,
    pub method: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    /// i.i.d. standard Gaussian design.
    #[default]
    Easy,
    /// `U·diag(s)·Vᵀ` with geometrically spaced singular values.
    Hard,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Easy => "easy",
            Variant::Hard => "hard",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "easy" => Ok(Variant::Easy),
            "hard" => Ok(Variant::Hard),
            other => Err(Error::Input(format!("unknown variant '{other}' (expected easy or hard)"))),
        }
    }
}

/// Design matrix settings shared by the regression generators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignSpec {
    pub n: usize,
    pub d: usize,
    pub variant: Variant,
    pub cond_target: f64,
    pub s_max: f64,
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal))
}

fn orthonormal_columns(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    gaussian_matrix(rng, rows, cols).qr().q()
}

fn design_matrix(rng: &mut ChaCha8Rng, spec: &DesignSpec) -> Result<DMatrix<f64>> {
    if spec.n == 0 || spec.d == 0 {
        return Err(Error::Input(format!("sizes must be >= 1, got n={} d={}", spec.n, spec.d)));
    }
    if !(spec.cond_target >= 1.0) || !spec.cond_target.is_finite() {
        return Err(Error::Input(format!("cond_target must be >= 1, got {}", spec.cond_target)));
    }
    match spec.variant {
        Variant::Easy => Ok(gaussian_matrix(rng, spec.n, spec.d)),
        Variant::Hard => {
            if !(spec.s_max > 0.0) || !spec.s_max.is_finite() {
                return Err(Error::Input(format!("s_max must be > 0, got {}", spec.s_max)));
            }
            let m = spec.n.min(spec.d);
            if m < 2 && spec.cond_target > 1.0 {
                return Err(Error::Input(format!(
                    "a condition number of {} needs min(n, d) >= 2",
                    spec.cond_target
                )));
            }
            let u = orthonormal_columns(rng, spec.n, m);
            let v = orthonormal_columns(rng, spec.d, m);
            let s = DVector::from_fn(m, |i, _| {
                let t = if m > 1 { i as f64 / (m - 1) as f64 } else { 0.0 };
                spec.s_max * spec.cond_target.powf(-t)
            });
            Ok(u * DMatrix::from_diagonal(&s) * v.transpose())
        }
    }
}

fn noisy_response(rng: &mut ChaCha8Rng, a: &DMatrix<f64>, x_true: &DVector<f64>) -> DVector<f64> {
    let clean = a * x_true;
    let noise = DVector::from_fn(clean.len(), |_, _| NOISE_STD * rng.sample::<f64, _>(StandardNormal));
    clean + noise
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticNetParams {
    pub design: DesignSpec,
    /// `None` selects `0.1·‖Aᵀb‖∞`.
    pub lambda1: Option<f64>,
    pub lambda2: f64,
    /// Fraction of nonzero entries in the planted signal.
    pub support_fraction: f64,
    pub seed: u64,
}

impl Default for ElasticNetParams {
    fn default() -> Self {
        ElasticNetParams {
            design: DesignSpec {
                n: 200,
                d: 100,
                variant: Variant::Easy,
                cond_target: DEFAULT_COND_TARGET,
                s_max: DEFAULT_HARD_S_MAX,
            },
            lambda1: None,
            lambda2: 0.1,
            support_fraction: DEFAULT_SUPPORT_FRACTION,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElasticNetInstance {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub x_true: DVector<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub seed: u64,
    pub variant: Variant,
    pub cond_target: f64,
}

impl ElasticNetInstance {
    /// `½‖Ax − b‖² + (λ₂/2)‖x‖² + λ₁‖x‖₁`.
    pub fn problem(&self) -> Result<CompositeProblem> {
        let f = LeastSquaresRidge::new(self.a.clone(), self.b.clone(), self.lambda2)?;
        Ok(CompositeProblem::new(Arc::new(f), Arc::new(L1Penalty::new(self.lambda1)?)))
    }
}

fn default_penalty(a: &DMatrix<f64>, b: &DVector<f64>, partition: Option<&GroupPartition>) -> f64 {
    let atb = a.tr_mul(b);
    let max = match partition {
        None => atb.amax(),
        Some(p) => (0..p.len()).map(|g| p.group_norm(g, &atb)).fold(0.0, f64::max),
    };
    0.1 * max
}

pub fn gen_elastic_net(params: &ElasticNetParams) -> Result<ElasticNetInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let a = design_matrix(&mut rng, &params.design)?;
    let d = params.design.d;
    if !(params.support_fraction > 0.0 && params.support_fraction <= 1.0) {
        return Err(Error::Input(format!(
            "support_fraction must lie in (0, 1], got {}",
            params.support_fraction
        )));
    }
    let k = ((d as f64 * params.support_fraction).round() as usize).clamp(1, d);
    let mut x_true = DVector::zeros(d);
    let mut support = index::sample(&mut rng, d, k).into_vec();
    support.sort_unstable();
    for i in support {
        x_true[i] = rng.sample(StandardNormal);
    }
    let b = noisy_response(&mut rng, &a, &x_true);
    let lambda1 = params.lambda1.unwrap_or_else(|| default_penalty(&a, &b, None));
    if !(lambda1 >= 0.0) || !(params.lambda2 >= 0.0) {
        return Err(Error::Input("penalties must be >= 0".into()));
    }
    Ok(ElasticNetInstance {
        a,
        b,
        x_true,
        lambda1,
        lambda2: params.lambda2,
        seed: params.seed,
        variant: params.design.variant,
        cond_target: params.design.cond_target,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupLassoParams {
    pub design: DesignSpec,
    pub group_size: usize,
    pub n_groups_active: usize,
    /// `None` selects `0.1·max_G ‖(Aᵀb)_G‖₂`.
    pub lambda_g: Option<f64>,
    pub lambda2: f64,
    pub seed: u64,
}

impl Default for GroupLassoParams {
    fn default() -> Self {
        GroupLassoParams {
            design: DesignSpec {
                n: 400,
                d: 200,
                variant: Variant::Easy,
                cond_target: DEFAULT_COND_TARGET,
                s_max: DEFAULT_HARD_S_MAX,
            },
            group_size: 10,
            n_groups_active: 8,
            lambda_g: None,
            lambda2: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupLassoInstance {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub x_true: DVector<f64>,
    pub lambda2: f64,
    pub lambda_g: f64,
    pub partition: GroupPartition,
    /// Sorted indices of the groups carrying the planted signal.
    pub planted_support: Vec<usize>,
    pub seed: u64,
    pub variant: Variant,
    pub cond_target: f64,
}

impl GroupLassoInstance {
    /// `½‖Ax − b‖² + (λ₂/2)‖x‖² + λ_g Σ_G ‖x_G‖₂`.
    pub fn problem(&self) -> Result<CompositeProblem> {
        let f = LeastSquaresRidge::new(self.a.clone(), self.b.clone(), self.lambda2)?;
        let r = GroupL2Penalty::new(self.lambda_g, self.partition.clone())?;
        Ok(CompositeProblem::new(Arc::new(f), Arc::new(r)))
    }
}

pub fn gen_group_lasso(params: &GroupLassoParams) -> Result<GroupLassoInstance> {
    let d = params.design.d;
    let partition = GroupPartition::contiguous(d, params.group_size)?;
    if params.n_groups_active > partition.len() {
        return Err(Error::Input(format!(
            "{} active groups requested but only {} exist",
            params.n_groups_active,
            partition.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let a = design_matrix(&mut rng, &params.design)?;
    let mut planted = index::sample(&mut rng, partition.len(), params.n_groups_active).into_vec();
    planted.sort_unstable();
    let mut x_true = DVector::zeros(d);
    for &g in &planted {
        for &i in &partition.groups()[g] {
            // A normal draw is nonzero with probability one; keep it that way.
            let mut v: f64 = rng.sample(StandardNormal);
            if v == 0.0 {
                v = 1.0;
            }
            x_true[i] = v;
        }
    }
    let b = noisy_response(&mut rng, &a, &x_true);
    let lambda_g = params
        .lambda_g
        .unwrap_or_else(|| default_penalty(&a, &b, Some(&partition)));
    if !(lambda_g >= 0.0) || !(params.lambda2 >= 0.0) {
        return Err(Error::Input("penalties must be >= 0".into()));
    }
    Ok(GroupLassoInstance {
        a,
        b,
        x_true,
        lambda2: params.lambda2,
        lambda_g,
        partition,
        planted_support: planted,
        seed: params.seed,
        variant: params.design.variant,
        cond_target: params.design.cond_target,
    })
}

/// Index sets of a train/validation/test split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles `0..n` with `seed` and cuts it into `round(n·f_train)`,
/// `round(n·f_val)` and the remainder.
pub fn split_indices(n: usize, fractions: (f64, f64, f64), seed: u64) -> Result<Split> {
    let (ft, fv, fs) = fractions;
    if [ft, fv, fs].iter().any(|f| !(*f >= 0.0)) || ((ft + fv + fs) - 1.0).abs() > 1e-9 {
        return Err(Error::Input(format!(
            "split fractions must be nonnegative and sum to 1, got {ft}/{fv}/{fs}"
        )));
    }
    let n_train = ((n as f64 * ft).round() as usize).min(n);
    let n_val = ((n as f64 * fv).round() as usize).min(n - n_train);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = order.split_off(n_train + n_val);
    let val = order.split_off(n_train);
    Ok(Split {
        train: order,
        val,
        test,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationParams {
    pub n: usize,
    pub d: usize,
    pub classes: usize,
    pub separation: f64,
    pub seed: u64,
}

impl Default for ClassificationParams {
    fn default() -> Self {
        ClassificationParams {
            n: 1000,
            d: 50,
            classes: 3,
            separation: 3.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationInstance {
    pub x: DMatrix<f64>,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub seed: u64,
}

/// Which penalty a softmax model carries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SoftmaxPenalty {
    L1(f64),
    /// One group per input feature across all classes.
    Group(f64),
}

impl ClassificationInstance {
    pub fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn features(&self) -> usize {
        self.x.ncols()
    }

    pub fn split(&self, fractions: (f64, f64, f64), seed: u64) -> Result<Split> {
        split_indices(self.n_samples(), fractions, seed)
    }

    /// Rows `indices` of the features and the matching labels.
    pub fn subset(&self, indices: &[usize]) -> Result<(DMatrix<f64>, Vec<usize>)> {
        let n = self.n_samples();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::Input(format!("sample index {bad} out of range for {n} samples")));
        }
        let x = self.x.select_rows(indices);
        let y = indices.iter().map(|&i| self.labels[i]).collect();
        Ok((x, y))
    }

    pub fn loss_on(&self, indices: &[usize], lambda2: f64) -> Result<SoftmaxLoss> {
        let (x, y) = self.subset(indices)?;
        SoftmaxLoss::new(&x, y, self.classes, lambda2)
    }

    /// Regularized softmax regression over the samples `indices`.
    pub fn problem_on(&self, indices: &[usize], penalty: SoftmaxPenalty, lambda2: f64) -> Result<CompositeProblem> {
        let f = Arc::new(self.loss_on(indices, lambda2)?);
        Ok(match penalty {
            SoftmaxPenalty::L1(l1) => CompositeProblem::new(f, Arc::new(L1Penalty::new(l1)?)),
            SoftmaxPenalty::Group(lg) => {
                let partition = GroupPartition::per_feature(self.features(), self.classes)?;
                CompositeProblem::new(f, Arc::new(GroupL2Penalty::new(lg, partition)?))
            }
        })
    }
}

/// Gaussian clusters around `separation·u_c` with `u_c` a random unit vector
/// per class; labels are `i mod C` shuffled, so class counts differ by at
/// most one.
pub fn gen_classification(params: &ClassificationParams) -> Result<ClassificationInstance> {
    let ClassificationParams {
        n,
        d,
        classes,
        separation,
        seed,
    } = *params;
    if classes < 2 {
        return Err(Error::Input(format!("need at least 2 classes, got {classes}")));
    }
    if n == 0 || d == 0 {
        return Err(Error::Input(format!("sizes must be >= 1, got n={n} d={d}")));
    }
    if !(separation >= 0.0) || !separation.is_finite() {
        return Err(Error::Input(format!("separation must be finite and >= 0, got {separation}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<DVector<f64>> = (0..classes)
        .map(|_| loop {
            let u = DVector::<f64>::from_fn(d, |_, _| rng.sample(StandardNormal));
            let norm = u.norm();
            if norm > 0.0 {
                break u * (separation / norm);
            }
        })
        .collect();
    let mut labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    labels.shuffle(&mut rng);
    let mut x = DMatrix::zeros(n, d);
    for (i, &y) in labels.iter().enumerate() {
        for j in 0..d {
            x[(i, j)] = means[y][j] + rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(ClassificationInstance {
        x,
        labels,
        classes,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveGroups {
    pub count: usize,
    pub indices: Vec<usize>,
}

/// Groups with `‖x_G‖₂ > threshold`.
pub fn active_groups(x: &DVector<f64>, partition: &GroupPartition, threshold: f64) -> Result<ActiveGroups> {
    if x.len() != partition.dimension() {
        return Err(Error::Dimension {
            expected: partition.dimension(),
            got: x.len(),
        });
    }
    let indices: Vec<usize> = (0..partition.len())
        .filter(|&g| partition.group_norm(g, x) > threshold)
        .collect();
    Ok(ActiveGroups {
        count: indices.len(),
        indices,
    })
}

/// Fraction of coordinates with `|xᵢ| ≤ threshold`.
pub fn sparsity(x: &DVector<f64>, threshold: f64) -> f64 {
    if x.is_empty() {
        return 1.0;
    }
    x.iter().filter(|v| v.abs() <= threshold).count() as f64 / x.len() as f64
}

/// FISTA with step `1/L` and gradient restart, run until the optimality
/// residual reaches `residual_tol`, followed by one proximal gradient polish
/// step. Deterministic for a fixed problem.
pub fn compute_reference(p: &CompositeProblem, residual_tol: f64, iter_cap: usize) -> Result<ReferenceSolution> {
    if !(residual_tol > 0.0) {
        return Err(Error::Input(format!("residual_tol must be > 0, got {residual_tol}")));
    }
    let l = p.f.smoothness();
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::Input(format!("reference solver needs finite L > 0, got {l}")));
    }
    let eta = 1.0 / l;
    let r = p.r.as_ref();
    let step = |y: &DVector<f64>| r.prox(eta, &(y - p.f.gradient(y) * eta));
    let d = p.dimension();
    let mut x = DVector::zeros(d);
    let mut y = x.clone();
    let mut t = 1.0;
    let mut best = f64::INFINITY;
    for k in 0..iter_cap {
        let res = p.optimality_residual(&x)?;
        if !res.is_finite() {
            return Err(Error::Numerical {
                k,
                what: "non-finite residual in reference solve".into(),
            });
        }
        best = best.min(res);
        if res <= residual_tol {
            let polished = step(&x);
            let polished_res = p.optimality_residual(&polished)?;
            if polished_res <= residual_tol {
                return Ok(ReferenceSolution {
                    f_star: p.composite_value(&polished)?.to_f64(),
                    x_star: polished,
                    residual: polished_res,
                    method: "fista-restart+polish".into(),
                });
            }
            x = polished;
            y = x.clone();
            t = 1.0;
            continue;
        }
        let x_next = step(&y);
        let t_next = fista_momentum(t);
        if (&y - &x_next).dot(&(&x_next - &x)) > 0.0 {
            t = 1.0;
            y = x_next.clone();
        } else {
            y = &x_next + (&x_next - &x) * ((t - 1.0) / t_next);
            t = t_next;
        }
        x = x_next;
    }
    Err(Error::ReferenceFailure {
        iterations: iter_cap,
        best_residual: best,
    })
}

/// [`compute_reference`] with the default tolerance and cap, attached to `p`.
pub fn with_reference(p: CompositeProblem) -> Result<CompositeProblem> {
    let reference = compute_reference(&p, REFERENCE_RESIDUAL_TOL, REFERENCE_ITER_CAP)?;
    Ok(p.with_reference(reference))
}
