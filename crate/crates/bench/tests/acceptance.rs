//! Acceptance criteria 1-10. Runs as a plain binary so every criterion
//! prints its own PASS/FAIL line; exits nonzero if any fails.

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use proxnag_bench::commands::{certify_seeds, run_solver, SeedCertificate};
use proxnag_bench::config::{effective_config, Command, RunConfig, SolverName};
use proxnag_bench::runner::{prepare, run_stochastic, stochastic_params, Workload};
use proxnag_bench::summary::summarize;
use proxnag_core::io::KvMap;
use proxnag_core::model::{LeastSquaresRidge, SoftmaxLoss};
use proxnag_core::prox::{prox_oracle_check, BoxIndicator, GridSpec, GroupL2Penalty, GroupPartition, L1Penalty, ZeroRegularizer};
use proxnag_core::solvers::{
    ista_run, prox_naggs_run, prox_naggs_run_observed, prox_sgd_run, stochastic_prox_naggs_run, BaselineConfig,
    ProxNagGsConfig, StepSchedule, StochasticConfig,
};
use proxnag_core::{CompositeProblem, Regularizer, SmoothOracle};

type Check = Result<(bool, String), String>;

fn config(cmd: Command, pairs: &[(&str, &str)]) -> RunConfig {
    let mut flags = KvMap::new();
    for (k, v) in pairs {
        flags.insert(*k, *v);
    }
    RunConfig::from_kv(&effective_config(cmd, None, &flags)).expect("valid acceptance config")
}

fn certify_runs(pairs: &[(&str, &str)]) -> Result<(Vec<SeedCertificate>, f64), String> {
    let cfg = config(Command::Certify, pairs);
    let start = Instant::now();
    let certs = certify_seeds(&cfg).map_err(|e| e.to_string())?;
    Ok((certs, start.elapsed().as_secs_f64()))
}

const HARD_EN: &[(&str, &str)] = &[
    ("problem", "elastic-net"),
    ("variant", "hard"),
    ("n", "200"),
    ("d", "100"),
    ("lambda2", "0.1"),
    ("mu_hat", "L"),
    ("alpha", "1"),
    ("max_iter", "2000"),
    ("seeds", "0,1,2,3,4"),
];

fn criterion_1(certs: &[SeedCertificate], secs: f64) -> Check {
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for c in certs {
        let p = c.report.params.as_ref().ok_or("strongly convex instance lost its Lyapunov parameters")?;
        if (p.a - 0.5).abs() > 1e-15 || (p.c - 0.5 * (p.c_lower + p.c_upper)).abs() > 1e-12 * p.c {
            return Err(format!("seed {}: a={} c={} not the requested setting", c.seed, p.a, p.c));
        }
        let check = c.report.contraction.as_ref().ok_or("contraction check missing")?;
        violations += check.violations.len();
        worst = worst.max(check.max_slack);
        if c.trace.len() != 2000 {
            return Err(format!("seed {} ran {} steps", c.seed, c.trace.len()));
        }
    }
    let ok = violations == 0 && certs.len() == 5 && secs < 30.0;
    Ok((
        ok,
        format!(
            "{} seeds x 2000 steps, {violations} contraction/envelope violations, max slack {worst:.3e}, {secs:.2}s",
            certs.len()
        ),
    ))
}

fn criterion_2(certs: &[SeedCertificate]) -> Check {
    let violations: usize = certs.iter().map(|c| c.report.mismatch.violations.len()).sum();
    let worst = certs
        .iter()
        .map(|c| c.report.mismatch.max_value)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((
        violations == 0,
        format!("{violations} mismatch violations, max expression {worst:.3e}"),
    ))
}

fn criterion_3() -> Check {
    let (certs, secs) = certify_runs(&[
        ("problem", "elastic-net"),
        ("variant", "easy"),
        ("n", "20"),
        ("d", "50"),
        ("lambda2", "0"),
        ("mu_hat", "L"),
        ("max_iter", "2000"),
        ("seeds", "0,1,2,3,4"),
    ])?;
    let mut ok = certs.len() == 5;
    let mut checkpoints = 0;
    for c in &certs {
        let v = &c.report.convex;
        ok &= v.descent_ok && v.sum_gap_ok && v.best_rate_ok && v.ergodic_ok;
        ok &= c.ergodic.iter().map(|p| p.k).collect::<Vec<_>>() == vec![10, 100, 1000];
        checkpoints += c.ergodic.len();
    }
    let violations: usize = certs.iter().map(|c| c.report.convex.violations.len()).sum();
    Ok((
        ok,
        format!("5 seeds, {violations} convex violations, {checkpoints} ergodic checkpoints, {secs:.2}s"),
    ))
}

struct FamilyResult {
    name: String,
    mean_iters: Vec<(SolverName, f64)>,
    max_obj_spread: f64,
    group_sets_agree: bool,
    all_reached: bool,
}

fn run_family(problem: &str, variant: &str) -> Result<FamilyResult, String> {
    let cfg = config(Command::Solve, &[("problem", problem), ("variant", variant)]);
    let works = cfg
        .seeds
        .iter()
        .map(|&s| prepare(&cfg, s, None))
        .collect::<Result<Vec<Workload>, _>>()
        .map_err(|e| e.to_string())?;
    let mut per_solver = Vec::new();
    for solver in SolverName::DETERMINISTIC {
        let (runs, _) = run_solver(&cfg, &works, solver).map_err(|e| e.to_string())?;
        per_solver.push((solver, runs));
    }
    let mut spread: f64 = 0.0;
    let mut groups_agree = true;
    for i in 0..cfg.seeds.len() {
        let objs: Vec<f64> = per_solver.iter().map(|(_, runs)| runs[i].final_obj).collect();
        let hi = objs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = objs.iter().copied().fold(f64::INFINITY, f64::min);
        spread = spread.max(hi - lo);
        let sets: BTreeSet<Option<Vec<usize>>> =
            per_solver.iter().map(|(_, runs)| runs[i].active_groups.clone()).collect();
        groups_agree &= sets.len() == 1;
    }
    let mut mean_iters = Vec::new();
    let mut all_reached = true;
    for (solver, runs) in &per_solver {
        let row = summarize(solver.as_str(), &runs.iter().collect::<Vec<_>>()).map_err(|e| e.to_string())?;
        all_reached &= row.not_reached == 0;
        mean_iters.push((*solver, row.iterations.map_or(f64::INFINITY, |s| s.mean)));
    }
    Ok(FamilyResult {
        name: format!("{variant} {problem}"),
        mean_iters,
        max_obj_spread: spread,
        group_sets_agree: groups_agree,
        all_reached,
    })
}

fn criterion_4(families: &[FamilyResult]) -> Check {
    let spread = families.iter().map(|f| f.max_obj_spread).fold(0.0, f64::max);
    let groups = families.iter().all(|f| f.group_sets_agree);
    let reached = families.iter().all(|f| f.all_reached);
    Ok((
        spread <= 1e-6 && groups && reached,
        format!(
            "{} instances, max final-objective spread {spread:.3e}, active-group sets identical: {groups}",
            families.len() * 5
        ),
    ))
}

fn criterion_5(families: &[FamilyResult]) -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for f in families {
        let get = |s: SolverName| f.mean_iters.iter().find(|(n, _)| *n == s).map_or(f64::INFINITY, |p| p.1);
        let (nag, ista, fista) = (get(SolverName::ProxNagGs), get(SolverName::Ista), get(SolverName::Fista));
        ok &= nag < ista && nag < fista;
        parts.push(format!("{}: {nag:.1} vs ista {ista:.1} / fista {fista:.1}", f.name));
    }
    Ok((ok, parts.join("; ")))
}

fn random_vec(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.random_range(-scale..scale))
}

fn operators(dim: usize) -> Vec<(&'static str, Box<dyn Regularizer>, f64)> {
    let groups = match dim {
        1 => vec![vec![0]],
        2 => vec![vec![0, 1]],
        _ => vec![vec![0, 2], vec![1]],
    };
    vec![
        ("l1", Box::new(L1Penalty::new(0.7).unwrap()), 0.7),
        (
            "group",
            Box::new(GroupL2Penalty::new(0.9, GroupPartition::new(dim, groups).unwrap()).unwrap()),
            0.9,
        ),
        (
            "box",
            Box::new(
                BoxIndicator::new(DVector::from_element(dim, -0.5), DVector::from_fn(dim, |i, _| 0.4 + 0.3 * i as f64))
                    .unwrap(),
            ),
            0.0,
        ),
    ]
}

fn criterion_6() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut oracle_inputs = [0usize; 3];
    let mut oracle_fail = 0;
    for i in 0..60 {
        let dim = 1 + i % 3;
        let grid = if dim == 3 {
            GridSpec {
                points_per_axis: 61,
                refinements: 4,
            }
        } else {
            GridSpec {
                points_per_axis: 401,
                refinements: 3,
            }
        };
        let z = random_vec(&mut rng, dim, 2.0);
        let tau = rng.random_range(0.1..2.0);
        for (j, (_, op, weight)) in operators(dim).iter().enumerate() {
            oracle_inputs[j] += 1;
            if !prox_oracle_check(op.as_ref(), *weight, tau, &z, grid).map_err(|e| e.to_string())? {
                oracle_fail += 1;
            }
        }
    }
    let mut nonexp_fail = 0;
    for _ in 0..1000 {
        let dim = rng.random_range(1..=3);
        let tau = rng.random_range(0.05..3.0);
        let (z1, z2) = (random_vec(&mut rng, dim, 3.0), random_vec(&mut rng, dim, 3.0));
        for (_, op, _) in operators(dim) {
            let lhs = (op.prox(tau, &z1) - op.prox(tau, &z2)).norm();
            if lhs > (&z1 - &z2).norm() * (1.0 + 1e-12) {
                nonexp_fail += 1;
            }
        }
    }
    Ok((
        oracle_fail == 0 && nonexp_fail == 0 && oracle_inputs.iter().all(|&n| n >= 50),
        format!(
            "oracle inputs per operator {:?}, {oracle_fail} oracle failures; 1000 pairs x 3 operators, {nonexp_fail} nonexpansiveness failures",
            oracle_inputs
        ),
    ))
}

fn fd_rel_error(f: &dyn SmoothOracle, x: &DVector<f64>) -> f64 {
    let g = f.gradient(x);
    let mut fd = DVector::zeros(x.len());
    for i in 0..x.len() {
        let h = 1e-5 * x[i].abs().max(1.0);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        fd[i] = (f.value(&xp) - f.value(&xm)) / (2.0 * h);
    }
    (&fd - &g).norm() / g.norm().max(1e-12)
}

fn criterion_7() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = DMatrix::from_fn(30, 10, |_, _| rng.random_range(-1.0..1.0));
    let b = random_vec(&mut rng, 30, 1.0);
    let ls = LeastSquaresRidge::new(a, b, 0.1).map_err(|e| e.to_string())?;
    let x = DMatrix::from_fn(40, 5, |_, _| rng.random_range(-2.0..2.0));
    let labels: Vec<usize> = (0..40).map(|i| i % 3).collect();
    let sm = SoftmaxLoss::new(&x, labels, 3, 1e-3).map_err(|e| e.to_string())?;
    let mut worst_ls: f64 = 0.0;
    let mut worst_sm: f64 = 0.0;
    for _ in 0..20 {
        worst_ls = worst_ls.max(fd_rel_error(&ls, &random_vec(&mut rng, ls.dimension(), 1.0)));
        worst_sm = worst_sm.max(fd_rel_error(&sm, &random_vec(&mut rng, sm.dimension(), 1.0)));
    }
    Ok((
        worst_ls <= 1e-5 && worst_sm <= 1e-5,
        format!("20 points each, max relative error ls-ridge {worst_ls:.2e}, softmax {worst_sm:.2e}"),
    ))
}

/// Smooth NAG-GS written out coordinate by coordinate.
fn smooth_naggs(f: &dyn SmoothOracle, mu_hat: f64, alpha: f64, x0: &[f64], steps: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    let a = alpha / (1.0 + alpha);
    let mut gamma = mu_hat;
    let mut x = x0.to_vec();
    let mut v = x0.to_vec();
    let mut out = vec![(x.clone(), v.clone())];
    for _ in 0..steps {
        let b = alpha * mu_hat / (alpha * mu_hat + gamma);
        let x_next: Vec<f64> = x.iter().zip(&v).map(|(xi, vi)| xi * (1.0 - a) + vi * a).collect();
        let g = f.gradient(&DVector::from_column_slice(&x_next));
        let step = b / mu_hat;
        let v_next: Vec<f64> = (0..x.len())
            .map(|i| (v[i] * (1.0 - b) + x_next[i] * b) - g[i] * step)
            .collect();
        gamma = (1.0 - a) * gamma + a * mu_hat;
        x = x_next;
        v = v_next;
        out.push((x.clone(), v.clone()));
    }
    out
}

fn criterion_8() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let a = DMatrix::from_fn(40, 15, |_, _| rng.random_range(-1.0..1.0));
    let b = random_vec(&mut rng, 40, 1.0);
    let f = Arc::new(LeastSquaresRidge::new(a, b, 0.05).map_err(|e| e.to_string())?);
    let p = CompositeProblem::new(f.clone(), Arc::new(ZeroRegularizer));
    let x0 = random_vec(&mut rng, 15, 1.0);
    let (mu_hat, alpha) = (f.smoothness(), 0.7);
    let mut states = Vec::new();
    let cfg = ProxNagGsConfig::constant(mu_hat, alpha, 100);
    let (last, _) = prox_naggs_run_observed(&p, &cfg, &x0, |st| states.push((st.x.clone(), st.v.clone())))
        .map_err(|e| e.to_string())?;
    states.push((last.x, last.v));
    let reference = smooth_naggs(f.as_ref(), mu_hat, alpha, x0.as_slice(), 100);
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    let mismatched = states
        .iter()
        .zip(&reference)
        .filter(|((x, v), (rx, rv))| bits(x.as_slice()) != bits(rx) || bits(v.as_slice()) != bits(rv))
        .count();
    Ok((
        mismatched == 0 && states.len() == 101,
        format!("{} states compared, {mismatched} differ in any bit", states.len()),
    ))
}

fn criterion_9() -> Check {
    let start = Instant::now();
    let cfg = config(
        Command::Solve,
        &[("problem", "softmax-l1"), ("n", "1000"), ("d", "50"), ("classes", "3"), ("seeds", "0,1,2,3,4")],
    );
    let works: Vec<_> = cfg
        .seeds
        .iter()
        .map(|&s| match prepare(&cfg, s, None) {
            Ok(Workload::Classification(c)) => Ok(c),
            Ok(_) => Err("expected a classification workload".to_string()),
            Err(e) => Err(e.to_string()),
        })
        .collect::<Result<_, _>>()?;

    // Full batch against the deterministic solvers, three epochs.
    let w = &works[0];
    let p = &w.train;
    let n = p.f.sampled().ok_or("softmax oracle is not finite-sum")?.n_samples();
    let x0 = DVector::zeros(p.dimension());
    let params = stochastic_params(&cfg, p);
    let full = StochasticConfig {
        batch_size: n,
        epochs: 3,
        seed: 11,
    };
    let (sgd_x, _) = prox_sgd_run(p, StepSchedule::Constant(params.eta), &full, &x0).map_err(|e| e.to_string())?;
    let mut ista_cfg = BaselineConfig::standard(p, 3);
    ista_cfg.eta = params.eta;
    let (ista_x, _) = ista_run(p, &ista_cfg, &x0).map_err(|e| e.to_string())?;
    let nag_cfg = ProxNagGsConfig::constant(params.mu_hat, params.alpha, 3);
    let (snag, _) = stochastic_prox_naggs_run(p, &nag_cfg, &full, &x0).map_err(|e| e.to_string())?;
    let (dnag, _) = prox_naggs_run(p, &nag_cfg, &x0).map_err(|e| e.to_string())?;
    let same = |a: &DVector<f64>, b: &DVector<f64>| a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits());
    let full_batch = same(&sgd_x, &ista_x) && same(&snag.x, &dnag.x) && same(&snag.v, &dnag.v);

    // Seeded mini-batch reproducibility and objective decrease over 10 epochs.
    let mut reproducible = true;
    let mut decreases = true;
    for w in &works {
        let f0 = w.train.composite_value(&DVector::zeros(w.train.dimension())).map_err(|e| e.to_string())?.to_f64();
        for solver in SolverName::STOCHASTIC {
            let params = stochastic_params(&cfg, &w.train);
            let r1 = run_stochastic(w, solver, &params).map_err(|e| e.to_string())?;
            let r2 = run_stochastic(w, solver, &params).map_err(|e| e.to_string())?;
            reproducible &= same(&r1.model, &r2.model);
            decreases &= r1.final_obj < f0 && params.epochs == 10;
        }
    }

    // λ₁ sweep for Prox-SGD.
    let mut sparsity = Vec::new();
    for lambda in [1e-4, 1e-3] {
        let works = cfg
            .seeds
            .iter()
            .map(|&s| prepare(&cfg, s, Some(lambda)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let (runs, _) = run_solver(&cfg, &works, SolverName::ProxSgd).map_err(|e| e.to_string())?;
        sparsity.push(runs.iter().map(|r| r.sparsity).sum::<f64>() / runs.len() as f64);
    }
    let monotone = sparsity.windows(2).all(|w| w[0] <= w[1]);
    let secs = start.elapsed().as_secs_f64();
    Ok((
        full_batch && reproducible && decreases && monotone && secs < 60.0,
        format!(
            "full batch bitwise {full_batch}, reproducible {reproducible}, objective decreases {decreases}, \
sparsity at lambda1 1e-4/1e-3 = {:.4}/{:.4}, {secs:.2}s",
            sparsity[0], sparsity[1]
        ),
    ))
}

fn criterion_10(certs: &[SeedCertificate]) -> Check {
    let mut ok = certs.len() == 5;
    let mut parts = Vec::new();
    for c in certs {
        let g = c.coupling;
        ok &= g.max_rel_after <= 0.1 && g.burn_in <= g.rows / 4;
        parts.push(g.burn_in.to_string());
    }
    Ok((ok, format!("burn-in per seed [{}] of 2000 rows, all within the first quarter", parts.join(", "))))
}

fn report(n: usize, check: Check, failures: &mut usize) {
    match check {
        Ok((true, detail)) => println!("criterion {n:>2}: PASS  {detail}"),
        Ok((false, detail)) => {
            *failures += 1;
            println!("criterion {n:>2}: FAIL  {detail}");
        }
        Err(e) => {
            *failures += 1;
            println!("criterion {n:>2}: FAIL  error: {e}");
        }
    }
}

fn main() {
    let mut failures = 0;
    let certs = certify_runs(HARD_EN);
    match &certs {
        Ok((certs, secs)) => {
            report(1, criterion_1(certs, *secs), &mut failures);
            report(2, criterion_2(certs), &mut failures);
        }
        Err(e) => {
            report(1, Err(e.clone()), &mut failures);
            report(2, Err(e.clone()), &mut failures);
        }
    }
    report(3, criterion_3(), &mut failures);
    let families: Result<Vec<_>, String> = [
        ("elastic-net", "easy"),
        ("elastic-net", "hard"),
        ("group-lasso", "easy"),
        ("group-lasso", "hard"),
    ]
    .iter()
    .map(|(p, v)| run_family(p, v))
    .collect();
    match &families {
        Ok(f) => {
            report(4, criterion_4(f), &mut failures);
            report(5, criterion_5(f), &mut failures);
        }
        Err(e) => {
            report(4, Err(e.clone()), &mut failures);
            report(5, Err(e.clone()), &mut failures);
        }
    }
    report(6, criterion_6(), &mut failures);
    report(7, criterion_7(), &mut failures);
    report(8, criterion_8(), &mut failures);
    report(9, criterion_9(), &mut failures);
    match &certs {
        Ok((certs, _)) => report(10, criterion_10(certs), &mut failures),
        Err(e) => report(10, Err(e.clone()), &mut failures),
    }
    if failures > 0 {
        println!("acceptance: {failures} of 10 criteria failed");
        std::process::exit(1);
    }
    println!("acceptance: all 10 criteria passed");
}
