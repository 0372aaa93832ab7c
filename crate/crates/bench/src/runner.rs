//! Building per-seed workloads and running one solver on them.

use std::path::Path;

use nalgebra::DVector;
use proxnag_core::io::{read_instance_dir, Instance};
use proxnag_core::model::SoftmaxLoss;
use proxnag_core::problems::{
    active_groups, compute_reference, gen_classification, gen_elastic_net, gen_group_lasso, sparsity,
    ClassificationInstance, ClassificationParams, DesignSpec, ElasticNetParams, GroupLassoParams,
    ReferenceSolution, SoftmaxPenalty, REFERENCE_ITER_CAP, REFERENCE_RESIDUAL_TOL, SUPPORT_THRESHOLD,
};
use proxnag_core::prox::GroupPartition;
use proxnag_core::solvers::{
    chambolle_pock_run, fista_run, ista_run, prox_naggs_run, prox_sgd_run, stochastic_prox_naggs_run,
    BaselineConfig, ChambollePockConfig, FistaConfig, ProxNagGsConfig, StepSchedule, StochasticConfig, StopOn,
    Trace,
};
use proxnag_core::{CompositeProblem, Error, Result};

use crate::config::{ProblemKind, RunConfig, SolverName};

/// Default penalty weight for softmax problems when none is configured.
pub const SOFTMAX_DEFAULT_PENALTY: f64 = 1e-3;

pub fn seed_dir_name(seed: u64) -> String {
    format!("seed-{seed}")
}

/// Generates the instance for `seed` from the configuration.
pub fn generate_instance(cfg: &RunConfig, seed: u64) -> Result<Instance> {
    match cfg.problem {
        ProblemKind::ElasticNet => {
            let base = ElasticNetParams::default();
            let params = ElasticNetParams {
                design: DesignSpec {
                    n: cfg.n.unwrap_or(base.design.n),
                    d: cfg.d.unwrap_or(base.design.d),
                    variant: cfg.variant,
                    cond_target: cfg.cond_target,
                    s_max: cfg.s_max,
                },
                lambda1: cfg.lambda1,
                lambda2: cfg.lambda2(),
                support_fraction: base.support_fraction,
                seed,
            };
            Ok(Instance::ElasticNet(gen_elastic_net(&params)?))
        }
        ProblemKind::GroupLasso => {
            let base = GroupLassoParams::default();
            let params = GroupLassoParams {
                design: DesignSpec {
                    n: cfg.n.unwrap_or(base.design.n),
                    d: cfg.d.unwrap_or(base.design.d),
                    variant: cfg.variant,
                    cond_target: cfg.cond_target,
                    s_max: cfg.s_max,
                },
                group_size: cfg.group_size,
                n_groups_active: cfg.active_groups,
                lambda_g: cfg.lambda_g,
                lambda2: cfg.lambda2(),
                seed,
            };
            Ok(Instance::GroupLasso(gen_group_lasso(&params)?))
        }
        ProblemKind::SoftmaxL1 | ProblemKind::SoftmaxGroup => {
            let base = ClassificationParams::default();
            let params = ClassificationParams {
                n: cfg.n.unwrap_or(base.n),
                d: cfg.d.unwrap_or(base.d),
                classes: cfg.classes,
                separation: cfg.separation,
                seed,
            };
            Ok(Instance::Classification(gen_classification(&params)?))
        }
    }
}

/// Regression problem with its reference attached.
#[derive(Debug, Clone)]
pub struct RegressionWork {
    pub seed: u64,
    pub problem: CompositeProblem,
    pub partition: Option<GroupPartition>,
    pub planted: Option<Vec<usize>>,
}

/// Softmax model trained on the train split and scored on the test split.
#[derive(Debug, Clone)]
pub struct ClassificationWork {
    pub seed: u64,
    pub train: CompositeProblem,
    pub test: SoftmaxLoss,
    pub partition: Option<GroupPartition>,
}

#[derive(Debug, Clone)]
pub enum Workload {
    Regression(RegressionWork),
    Classification(ClassificationWork),
}

impl Workload {
    pub fn seed(&self) -> u64 {
        match self {
            Workload::Regression(w) => w.seed,
            Workload::Classification(w) => w.seed,
        }
    }
}

pub fn softmax_penalty(cfg: &RunConfig, weight: Option<f64>) -> Result<SoftmaxPenalty> {
    match cfg.problem {
        ProblemKind::SoftmaxL1 => Ok(SoftmaxPenalty::L1(weight.or(cfg.lambda1).unwrap_or(SOFTMAX_DEFAULT_PENALTY))),
        ProblemKind::SoftmaxGroup => Ok(SoftmaxPenalty::Group(
            weight.or(cfg.lambda_g).unwrap_or(SOFTMAX_DEFAULT_PENALTY),
        )),
        other => Err(Error::Config(format!("{other} is not a softmax problem"))),
    }
}

pub fn classification_work(
    cfg: &RunConfig,
    inst: &ClassificationInstance,
    penalty: SoftmaxPenalty,
) -> Result<ClassificationWork> {
    let split = inst.split(cfg.split, inst.seed)?;
    let train = inst.problem_on(&split.train, penalty, cfg.lambda2())?;
    let test = inst.loss_on(&split.test, cfg.lambda2())?;
    let partition = match penalty {
        SoftmaxPenalty::Group(_) => Some(GroupPartition::per_feature(inst.features(), inst.classes)?),
        SoftmaxPenalty::L1(_) => None,
    };
    Ok(ClassificationWork {
        seed: inst.seed,
        train,
        test,
        partition,
    })
}

pub fn regression_work(instance: &Instance, reference: Option<ReferenceSolution>) -> Result<RegressionWork> {
    let problem = instance.problem()?;
    let reference = match reference {
        Some(r) => r,
        None => compute_reference(&problem, REFERENCE_RESIDUAL_TOL, REFERENCE_ITER_CAP)?,
    };
    let (partition, planted) = match instance {
        Instance::GroupLasso(g) => (Some(g.partition.clone()), Some(g.planted_support.clone())),
        _ => (None, None),
    };
    Ok(RegressionWork {
        seed: instance.seed(),
        problem: problem.with_reference(reference),
        partition,
        planted,
    })
}

/// Loads `<instances>/seed-<s>` when an instance directory is configured,
/// otherwise generates the instance in memory.
pub fn load_or_generate(cfg: &RunConfig, seed: u64) -> Result<(Instance, Option<ReferenceSolution>)> {
    match &cfg.instances {
        Some(dir) => {
            let path = dir.join(seed_dir_name(seed));
            let (inst, reference) = read_instance_dir(&path)?;
            if inst.seed() != seed {
                return Err(Error::Input(format!(
                    "{} holds seed {}, expected {seed}",
                    path.display(),
                    inst.seed()
                )));
            }
            Ok((inst, reference))
        }
        None => Ok((generate_instance(cfg, seed)?, None)),
    }
}

/// Builds the workload for `seed`. `penalty_override` replaces the
/// sparsity weight (`λ₁` or `λ_g`); a stored reference is then discarded.
pub fn prepare(cfg: &RunConfig, seed: u64, penalty_override: Option<f64>) -> Result<Workload> {
    let (inst, reference) = load_or_generate(cfg, seed)?;
    let reference = if penalty_override.is_some() { None } else { reference };
    match (inst, cfg.problem) {
        (Instance::Classification(c), ProblemKind::SoftmaxL1 | ProblemKind::SoftmaxGroup) => Ok(
            Workload::Classification(classification_work(cfg, &c, softmax_penalty(cfg, penalty_override)?)?),
        ),
        (Instance::ElasticNet(mut e), ProblemKind::ElasticNet) => {
            if let Some(w) = penalty_override {
                e.lambda1 = w;
            }
            Ok(Workload::Regression(regression_work(&Instance::ElasticNet(e), reference)?))
        }
        (Instance::GroupLasso(mut g), ProblemKind::GroupLasso) => {
            if let Some(w) = penalty_override {
                g.lambda_g = w;
            }
            Ok(Workload::Regression(regression_work(&Instance::GroupLasso(g), reference)?))
        }
        (inst, problem) => Err(Error::Input(format!(
            "instance kind {} does not match problem {problem}",
            inst.kind()
        ))),
    }
}

/// Fully resolved hyperparameters for one solver run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    /// Absolute `μ̂`.
    pub mu_hat: f64,
    pub alpha: f64,
    /// Absolute step size.
    pub eta: f64,
    pub max_iter: usize,
    pub gap_tol: f64,
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub solver: SolverName,
    pub final_obj: f64,
    /// First `k` with `F(x_k) − F* ≤ gap_tol`; `None` for stochastic runs.
    pub iterations: Option<usize>,
    pub reached: bool,
    pub wall_s: f64,
    pub active_groups: Option<Vec<usize>>,
    pub sparsity: f64,
    pub test_accuracy: Option<f64>,
    pub model: DVector<f64>,
    pub trace: Trace,
}

fn wall(trace: &Trace) -> f64 {
    trace.rows.last().and_then(|r| r.elapsed_s).unwrap_or(0.0)
}

/// Runs a deterministic solver from zero. Iterations to the gap and the
/// final objective refer to the output iterate (`x` for Prox-NAG-GS).
/// Sparsity and active groups are read from the model, which for
/// Prox-NAG-GS is the proximal iterate `v` since it carries exact zeros.
pub fn run_deterministic(w: &RegressionWork, solver: SolverName, params: &SolverParams) -> Result<SeedRun> {
    let p = &w.problem;
    let x0 = DVector::zeros(p.dimension());
    let mut output = None;
    let (model, trace) = match solver {
        SolverName::Ista => {
            let mut c = BaselineConfig::standard(p, params.max_iter).with_gap_tol(params.gap_tol);
            c.eta = params.eta;
            ista_run(p, &c, &x0)?
        }
        SolverName::Fista => {
            let mut c = FistaConfig::standard(p, params.max_iter);
            c.base.eta = params.eta;
            c.base.gap_tol = params.gap_tol;
            fista_run(p, &c, &x0)?
        }
        SolverName::ChambollePock => {
            let c = ChambollePockConfig::standard(p, params.max_iter)?.with_gap_tol(params.gap_tol);
            chambolle_pock_run(p, &c, &x0)?
        }
        SolverName::ProxNagGs => {
            let mut c = ProxNagGsConfig::constant(params.mu_hat, params.alpha, params.max_iter)
                .with_gap_tol(params.gap_tol);
            c.stop_on = StopOn::OutputIterate;
            let (st, trace) = prox_naggs_run(p, &c, &x0)?;
            output = Some(st.x);
            (st.v, trace)
        }
        other => return Err(Error::Config(format!("{other} is not a deterministic solver"))),
    };
    let iterations = trace.first_k_gap_x_below(params.gap_tol);
    let groups = w
        .partition
        .as_ref()
        .map(|part| active_groups(&model, part, SUPPORT_THRESHOLD).map(|a| a.indices))
        .transpose()?;
    Ok(SeedRun {
        seed: w.seed,
        solver,
        final_obj: p.composite_value(output.as_ref().unwrap_or(&model))?.to_f64(),
        iterations: Some(iterations.unwrap_or(params.max_iter)),
        reached: iterations.is_some(),
        wall_s: wall(&trace),
        active_groups: groups,
        sparsity: sparsity(&model, SUPPORT_THRESHOLD),
        test_accuracy: None,
        model,
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochasticParams {
    pub eta: f64,
    pub mu_hat: f64,
    pub alpha: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

/// Runs a stochastic solver from zero, seeding the batch order with the
/// workload seed. Stochastic Prox-NAG-GS reports its proximal iterate `v`.
pub fn run_stochastic(w: &ClassificationWork, solver: SolverName, params: &StochasticParams) -> Result<SeedRun> {
    let p = &w.train;
    let x0 = DVector::zeros(p.dimension());
    let scfg = StochasticConfig {
        batch_size: params.batch_size,
        epochs: params.epochs,
        seed: w.seed,
    };
    let (model, trace) = match solver {
        SolverName::ProxSgd => prox_sgd_run(p, StepSchedule::Constant(params.eta), &scfg, &x0)?,
        SolverName::StochasticProxNagGs => {
            let c = ProxNagGsConfig::constant(params.mu_hat, params.alpha, 0);
            let (st, trace) = stochastic_prox_naggs_run(p, &c, &scfg, &x0)?;
            (st.v, trace)
        }
        other => return Err(Error::Config(format!("{other} is not a stochastic solver"))),
    };
    let groups = w
        .partition
        .as_ref()
        .map(|part| active_groups(&model, part, SUPPORT_THRESHOLD).map(|a| a.indices))
        .transpose()?;
    Ok(SeedRun {
        seed: w.seed,
        solver,
        final_obj: p.composite_value(&model)?.to_f64(),
        iterations: None,
        reached: false,
        wall_s: wall(&trace),
        active_groups: groups,
        sparsity: sparsity(&model, SUPPORT_THRESHOLD),
        test_accuracy: Some(w.test.accuracy(&model)),
        model,
        trace,
    })
}

/// Step `eta/L` (configured multiple, 1 by default); `μ̂ = L` and `α = 1`
/// unless configured.
pub fn stochastic_params(cfg: &RunConfig, p: &CompositeProblem) -> StochasticParams {
    let l = p.f.smoothness();
    StochasticParams {
        eta: cfg.eta_l.unwrap_or(1.0) / l,
        mu_hat: cfg.mu_hat.map_or(l, |m| m.resolve(l)),
        alpha: cfg.alpha.unwrap_or(1.0),
        batch_size: cfg.batch_size,
        epochs: cfg.epochs,
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}
