//! The five subcommands. Each returns the lines it wants printed; every
//! failure carries the name of the stage it happened in.

use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use proxnag_core::certificates::{
    annotate_trace, certify, compute_params, envelope_series, gap_coupling, CChoice, CertificateReport,
    CertifyInputs, ErgodicPoint, GapCoupling,
};
use proxnag_core::io::{format_real, write_instance_dir, write_trace_csv, Instance, KvMap};
use proxnag_core::problems::{compute_reference, REFERENCE_ITER_CAP, REFERENCE_RESIDUAL_TOL};
use proxnag_core::solvers::{prox_naggs_run_observed, ProxNagGsConfig, RunningAverage, Trace};
use proxnag_core::{Error, Result};

use crate::config::{RunConfig, SolverName};
use crate::runner::{
    ensure_dir, generate_instance, load_or_generate, prepare, regression_work, run_deterministic, run_stochastic,
    seed_dir_name, stochastic_params, ClassificationWork, RegressionWork, SeedRun, SolverParams, Workload,
};
use crate::summary::{parse_summary_csv, runs_csv, summarize, summary_csv, SummaryRow};
use crate::table::render_table;
use crate::tuning::{tune, Tuned};

pub const EFFECTIVE_CONFIG_FILE: &str = "effective_config.txt";
/// Checkpoints for the ergodic rate `F(v̄_k) − F* ≤ 𝓔₀/k`.
pub const ERGODIC_CHECKPOINTS: [usize; 3] = [10, 100, 1000];
/// `|gap_x − gap_v| / max(gap_x, floor)` threshold and floor.
pub const GAP_COUPLING_REL: f64 = 0.1;
pub const GAP_COUPLING_FLOOR: f64 = 1e-12;

#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub source: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} failed: {}", self.stage, self.source)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

pub type StageResult<T> = std::result::Result<T, StageError>;

pub trait AtStage<T> {
    fn at(self, stage: &'static str) -> StageResult<T>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: &'static str) -> StageResult<T> {
        self.map_err(|source| StageError { stage, source })
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Creates `dir`, refusing a nonempty one unless `force`, in which case it
/// is cleared first. Writes the effective configuration into it.
pub fn prepare_out(dir: &Path, force: bool, effective: &KvMap) -> Result<()> {
    let occupied = std::fs::read_dir(dir).map(|mut d| d.next().is_some()).unwrap_or(false);
    if occupied {
        if !force {
            return Err(Error::Input(format!(
                "{} already exists and is not empty (use --force to overwrite)",
                dir.display()
            )));
        }
        std::fs::remove_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    ensure_dir(dir)?;
    write_file(&dir.join(EFFECTIVE_CONFIG_FILE), &effective.to_text())
}

fn trace_for_output(trace: &Trace, timing: bool) -> Trace {
    if timing {
        trace.clone()
    } else {
        trace.without_timing()
    }
}

/// Writes one instance directory per seed, with a reference solution for
/// regression problems.
pub fn cmd_gen(cfg: &RunConfig, effective: &KvMap) -> StageResult<Vec<String>> {
    prepare_out(&cfg.out, cfg.force, effective).at("gen/output")?;
    let built: Vec<(u64, Instance, Option<_>)> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let inst = generate_instance(cfg, seed)?;
            let reference = if cfg.problem.is_regression() {
                Some(compute_reference(&inst.problem()?, REFERENCE_RESIDUAL_TOL, REFERENCE_ITER_CAP)?)
            } else {
                None
            };
            Ok((seed, inst, reference))
        })
        .collect::<Result<_>>()
        .at("gen/generate")?;
    let mut lines = Vec::new();
    for (seed, inst, reference) in &built {
        let dir = cfg.out.join(seed_dir_name(*seed));
        ensure_dir(&dir).at("gen/write")?;
        write_instance_dir(&dir, inst, reference.as_ref()).at("gen/write")?;
        lines.push(match reference {
            Some(r) => format!("{}: {} F*={}", dir.display(), inst.kind(), format_real(r.f_star)),
            None => format!("{}: {}", dir.display(), inst.kind()),
        });
    }
    Ok(lines)
}

fn regression_works(works: &[Workload]) -> Option<Vec<RegressionWork>> {
    works
        .iter()
        .map(|w| match w {
            Workload::Regression(r) => Some(r.clone()),
            Workload::Classification(_) => None,
        })
        .collect()
}

fn classification_works(works: &[Workload]) -> Option<Vec<ClassificationWork>> {
    works
        .iter()
        .map(|w| match w {
            Workload::Classification(c) => Some(c.clone()),
            Workload::Regression(_) => None,
        })
        .collect()
}

/// How one solver's hyperparameters were chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Selection {
    Tuned(Tuned),
    /// Fixed by configuration or built-in defaults.
    Fixed,
}

/// Whether the configuration leaves this solver's parameters to the grid.
fn wants_tuning(cfg: &RunConfig, solver: SolverName) -> bool {
    match solver {
        SolverName::ProxNagGs => cfg.mu_hat.is_none() && cfg.alpha.is_none(),
        SolverName::Ista | SolverName::Fista => cfg.eta_l.is_none(),
        _ => false,
    }
}

fn fixed_params(cfg: &RunConfig, w: &RegressionWork) -> SolverParams {
    let l = w.problem.f.smoothness();
    SolverParams {
        mu_hat: cfg.mu_hat.map_or(l, |m| m.resolve(l)),
        alpha: cfg.alpha.unwrap_or(1.0),
        eta: cfg.eta_l.unwrap_or(1.0) / l,
        max_iter: cfg.max_iter,
        gap_tol: cfg.gap_tol,
    }
}

/// Runs `solver` on every workload, tuning first where the configuration
/// leaves the choice open. Seeds run in parallel.
pub fn run_solver(cfg: &RunConfig, works: &[Workload], solver: SolverName) -> StageResult<(Vec<SeedRun>, Selection)> {
    if solver.is_stochastic() {
        let cws = classification_works(works).ok_or_else(|| StageError {
            stage: "run",
            source: Error::Config(format!("{solver} needs a softmax problem, not {}", cfg.problem)),
        })?;
        let runs = cws
            .par_iter()
            .map(|w| run_stochastic(w, solver, &stochastic_params(cfg, &w.train)))
            .collect::<Result<Vec<_>>>()
            .at("run")?;
        return Ok((runs, Selection::Fixed));
    }
    let rws = regression_works(works).ok_or_else(|| StageError {
        stage: "run",
        source: Error::Config(format!("{solver} needs a regression problem, not {}", cfg.problem)),
    })?;
    let tuned = if wants_tuning(cfg, solver) {
        let t = tune(&rws, solver, cfg.gap_tol, cfg.max_iter).at("tune")?;
        if t.is_none() {
            return Err(StageError {
                stage: "tune",
                source: Error::Numerical {
                    k: cfg.max_iter,
                    what: format!("no {solver} grid point reaches gap {} on every seed", cfg.gap_tol),
                },
            });
        }
        t
    } else {
        None
    };
    let runs = rws
        .par_iter()
        .map(|w| {
            let l = w.problem.f.smoothness();
            let params = match &tuned {
                Some(t) => SolverParams {
                    mu_hat: t.mu_ratio * l,
                    alpha: t.alpha,
                    eta: t.eta_l / l,
                    ..fixed_params(cfg, w)
                },
                None => fixed_params(cfg, w),
            };
            run_deterministic(w, solver, &params)
        })
        .collect::<Result<Vec<_>>>()
        .at("run")?;
    Ok((runs, tuned.map_or(Selection::Fixed, Selection::Tuned)))
}

fn prepare_all(cfg: &RunConfig, penalty: Option<f64>) -> StageResult<Vec<Workload>> {
    cfg.seeds
        .par_iter()
        .map(|&seed| prepare(cfg, seed, penalty))
        .collect::<Result<Vec<_>>>()
        .at("prepare")
}

fn selection_text(solver: SolverName, sel: &Selection) -> String {
    match sel {
        Selection::Tuned(t) => match solver {
            SolverName::ProxNagGs => format!(
                "{solver}: tuned mu_hat={}L alpha={} mean_iters={}",
                t.mu_ratio, t.alpha, t.mean_iters
            ),
            _ => format!("{solver}: tuned eta={}/L mean_iters={}", t.eta_l, t.mean_iters),
        },
        Selection::Fixed => format!("{solver}: fixed"),
    }
}

fn summary_line(row: &SummaryRow) -> String {
    let mut s = format!("{}: final_obj={:.10}", row.method, row.final_obj.mean);
    if let Some(it) = row.iterations {
        s.push_str(&format!(" iters={:.1}", it.mean));
        if row.not_reached > 0 {
            s.push_str(&format!(" ({} not-reached)", row.not_reached));
        }
    }
    if let Some(g) = row.active_groups {
        s.push_str(&format!(" active_groups={:.1}", g.mean));
    }
    if let Some(sp) = row.sparsity {
        s.push_str(&format!(" sparsity={:.4}", sp.mean));
    }
    if let Some(acc) = row.test_accuracy {
        s.push_str(&format!(" test_accuracy={:.4}", acc.mean));
    }
    s
}

/// Runs every configured solver over all seeds and writes per-seed traces,
/// `runs.csv`, `summary.csv` and `tuning.txt`.
pub fn cmd_solve(cfg: &RunConfig, effective: &KvMap) -> StageResult<Vec<String>> {
    let works = prepare_all(cfg, None)?;
    prepare_out(&cfg.out, cfg.force, effective).at("solve/output")?;
    let mut all_runs = Vec::new();
    let mut rows = Vec::new();
    let mut tuning = String::new();
    for solver in cfg.solvers() {
        let (runs, sel) = run_solver(cfg, &works, solver)?;
        tuning.push_str(&selection_text(solver, &sel));
        tuning.push('\n');
        for r in &runs {
            let dir = cfg.out.join(solver.as_str()).join(seed_dir_name(r.seed));
            ensure_dir(&dir).at("solve/write")?;
            write_trace_csv(&trace_for_output(&r.trace, cfg.timing), dir.join("trace.csv")).at("solve/write")?;
        }
        rows.push(summarize(solver.as_str(), &runs.iter().collect::<Vec<_>>()).at("solve/summarize")?);
        all_runs.extend(runs);
    }
    write_file(&cfg.out.join("runs.csv"), &runs_csv(&all_runs)).at("solve/write")?;
    write_file(&cfg.out.join("summary.csv"), &summary_csv(&rows)).at("solve/write")?;
    write_file(&cfg.out.join("tuning.txt"), &tuning).at("solve/write")?;
    Ok(rows.iter().map(summary_line).collect())
}

/// Per-seed outcome of a certificate run.
#[derive(Debug, Clone)]
pub struct SeedCertificate {
    pub seed: u64,
    pub report: CertificateReport,
    pub coupling: GapCoupling,
    pub ergodic: Vec<ErgodicPoint>,
    pub trace: Trace,
}

fn certify_work(cfg: &RunConfig, w: &RegressionWork) -> Result<SeedCertificate> {
    let p = &w.problem;
    let f_star = p
        .reference
        .as_ref()
        .ok_or_else(|| Error::Input(format!("seed {} has no reference solution", w.seed)))?
        .f_star;
    let l = p.f.smoothness();
    let mu_hat = cfg.mu_hat.map_or(l, |m| m.resolve(l));
    let alpha = cfg.alpha.unwrap_or(1.0);
    let run_cfg = ProxNagGsConfig::constant(mu_hat, alpha, cfg.max_iter);
    let a = run_cfg.a();
    let c_choice = cfg.c.map_or(CChoice::Midpoint, CChoice::Explicit);
    let params = match compute_params(a, mu_hat, l, p.f.strong_convexity(), p.mu_big_f, c_choice) {
        Ok(params) => Some(params),
        Err(Error::DegenerateInterval) => None,
        Err(e) => return Err(e),
    };

    let mut avg = RunningAverage::default();
    let mut ergodic = Vec::new();
    let mut observe_err = None;
    let x0 = nalgebra::DVector::zeros(p.dimension());
    let (_, mut trace) = prox_naggs_run_observed(p, &run_cfg, &x0, |st| {
        avg.push(&st.v);
        let k = avg.count();
        if ERGODIC_CHECKPOINTS.contains(&k) && observe_err.is_none() {
            let mean = avg.mean().expect("nonempty average");
            match p.composite_value(&mean) {
                Ok(v) => ergodic.push(ErgodicPoint {
                    k,
                    gap: v.to_f64() - f_star,
                }),
                Err(e) => observe_err = Some(e),
            }
        }
    })?;
    if let Some(e) = observe_err {
        return Err(e);
    }
    annotate_trace(&mut trace, params.as_ref(), Some((mu_hat, a)));
    let report = certify(
        &trace,
        &CertifyInputs {
            a,
            mu_hat,
            l,
            mu_f: p.f.strong_convexity(),
            mu_big_f: p.mu_big_f,
            c_choice,
            ergodic: ergodic.clone(),
        },
    )?;
    let coupling = gap_coupling(&trace, GAP_COUPLING_REL, GAP_COUPLING_FLOOR)?;
    Ok(SeedCertificate {
        seed: w.seed,
        report,
        coupling,
        ergodic,
        trace,
    })
}

/// Builds the certificate workload for one seed. A loaded instance must
/// carry its reference; generated instances are solved to get one.
pub fn certify_workload(cfg: &RunConfig, seed: u64) -> Result<RegressionWork> {
    if !cfg.problem.is_regression() {
        return Err(Error::Config(format!(
            "certify needs elastic-net or group-lasso, not {}",
            cfg.problem
        )));
    }
    let (inst, reference) = load_or_generate(cfg, seed)?;
    if cfg.instances.is_some() && reference.is_none() {
        return Err(Error::Input(format!("instance for seed {seed} has no reference.csv")));
    }
    regression_work(&inst, reference)
}

/// Runs the certificate checks on every seed.
pub fn certify_seeds(cfg: &RunConfig) -> StageResult<Vec<SeedCertificate>> {
    let works = cfg
        .seeds
        .par_iter()
        .map(|&s| certify_workload(cfg, s))
        .collect::<Result<Vec<_>>>()
        .at("certify/prepare")?;
    works
        .par_iter()
        .map(|w| certify_work(cfg, w))
        .collect::<Result<Vec<_>>>()
        .at("certify/run")
}

fn series_csv(c: &SeedCertificate) -> String {
    let lyap0 = c.trace.rows.first().and_then(|r| r.lyap);
    let env = match (lyap0, &c.report.params) {
        (Some(l0), Some(p)) => envelope_series(l0, p.theta, c.trace.len()),
        _ => Vec::new(),
    };
    let mut s = String::from("k,gap_x,gap_v,lyap,envelope\n");
    let opt = |v: Option<f64>| v.map(format_real).unwrap_or_default();
    for (i, r) in c.trace.rows.iter().enumerate() {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.k,
            opt(r.gap_x),
            opt(r.gap_v),
            opt(r.lyap),
            opt(env.get(i).copied())
        ));
    }
    s
}

fn ergodic_csv(c: &SeedCertificate) -> String {
    let mut s = String::from("k,gap,bound\n");
    for p in &c.ergodic {
        s.push_str(&format!(
            "{},{},{}\n",
            p.k,
            format_real(p.gap),
            format_real(c.report.convex.energy0 / p.k as f64)
        ));
    }
    s
}

pub const CERTIFY_SUMMARY_HEADER: &str =
    "seed,status,rows,theta,contraction_violations,mismatch_violations,mismatch_max,convex_violations,burn_in,coupling_max_rel";

fn certify_summary_csv(certs: &[SeedCertificate]) -> String {
    let mut s = String::from(CERTIFY_SUMMARY_HEADER);
    s.push('\n');
    for c in certs {
        let r = &c.report;
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            c.seed,
            r.status(),
            r.rows,
            r.params.as_ref().map(|p| format_real(p.theta)).unwrap_or_default(),
            r.contraction.as_ref().map(|c| c.violations.len().to_string()).unwrap_or_default(),
            r.mismatch.violations.len(),
            format_real(r.mismatch.max_value),
            r.convex.violations.len(),
            c.coupling.burn_in,
            format_real(c.coupling.max_rel_after),
        ));
    }
    s
}

/// Runs Prox-NAG-GS with the certificate bookkeeping on every seed. Fails
/// (after writing all outputs) when any in-regime seed has a violation.
pub fn cmd_certify(cfg: &RunConfig, effective: &KvMap) -> StageResult<Vec<String>> {
    let certs = certify_seeds(cfg)?;
    prepare_out(&cfg.out, cfg.force, effective).at("certify/output")?;
    let mut lines = Vec::new();
    for c in &certs {
        let dir = cfg.out.join(seed_dir_name(c.seed));
        ensure_dir(&dir).at("certify/write")?;
        let mut report = c.report.to_kv();
        report.push_str(&format!(
            "gap_coupling_burn_in={}\ngap_coupling_max_rel={}\n",
            c.coupling.burn_in,
            format_real(c.coupling.max_rel_after)
        ));
        write_trace_csv(&trace_for_output(&c.trace, cfg.timing), dir.join("trace.csv")).at("certify/write")?;
        write_file(&dir.join("report.txt"), &report).at("certify/write")?;
        write_file(&dir.join("violations.csv"), &c.report.violations_csv()).at("certify/write")?;
        write_file(&dir.join("series.csv"), &series_csv(c)).at("certify/write")?;
        write_file(&dir.join("ergodic.csv"), &ergodic_csv(c)).at("certify/write")?;
        lines.push(format!(
            "seed {}: {} ({} violations, burn-in {} of {} rows)",
            c.seed,
            c.report.status(),
            c.report.violations().len(),
            c.coupling.burn_in,
            c.coupling.rows
        ));
    }
    write_file(&cfg.out.join("certify_summary.csv"), &certify_summary_csv(&certs)).at("certify/write")?;
    let failed = certs.iter().filter(|c| c.report.status() == "fail").count();
    if failed > 0 {
        return Err(StageError {
            stage: "certify/check",
            source: Error::Numerical {
                k: cfg.max_iter,
                what: format!("{failed} of {} seeds violate the certificate", certs.len()),
            },
        });
    }
    Ok(lines)
}

/// Runs every configured solver for each penalty weight on the grid
/// (`λ₁`, or `λ_g` for group penalties) and writes `sweep.csv`.
pub fn cmd_sweep(cfg: &RunConfig, effective: &KvMap) -> StageResult<Vec<String>> {
    if cfg.lambda1_grid.is_empty() {
        return Err(StageError {
            stage: "sweep/config",
            source: Error::Config("sweep grid is empty".into()),
        });
    }
    prepare_out(&cfg.out, cfg.force, effective).at("sweep/output")?;
    let mut csv = format!("lambda,{}\n", crate::summary::SUMMARY_HEADER);
    let mut lines = Vec::new();
    for &lambda in &cfg.lambda1_grid {
        let works = prepare_all(cfg, Some(lambda))?;
        for solver in cfg.solvers() {
            let (runs, _) = run_solver(cfg, &works, solver)?;
            let row = summarize(solver.as_str(), &runs.iter().collect::<Vec<_>>()).at("sweep/summarize")?;
            let body = summary_csv(std::slice::from_ref(&row));
            let data = body.lines().nth(1).unwrap_or_default();
            csv.push_str(&format!("{},{data}\n", format_real(lambda)));
            lines.push(format!("lambda={lambda} {}", summary_line(&row)));
        }
    }
    write_file(&cfg.out.join("sweep.csv"), &csv).at("sweep/write")?;
    Ok(lines)
}

/// Renders `summary.csv` from each run directory. Warnings go to the
/// second element.
pub fn cmd_table(dirs: &[PathBuf]) -> StageResult<(String, Vec<String>)> {
    if dirs.is_empty() {
        return Err(StageError {
            stage: "table/input",
            source: Error::Config("no run directories given".into()),
        });
    }
    let mut out = String::new();
    let mut warnings = Vec::new();
    for dir in dirs {
        let path = dir.join("summary.csv");
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Io { path, source: e })
            .at("table/read")?;
        let rows = parse_summary_csv(&text).at("table/parse")?;
        let (table, w) = render_table(&rows);
        out.push_str(&format!("{}\n{table}\n", dir.display()));
        warnings.extend(w.into_iter().map(|m| format!("{}: {m}", dir.display())));
    }
    Ok((out, warnings))
}
