//! Deterministic grid search for iterations to the target gap.
//!
//! Every candidate is scored by the total number of iterations it needs
//! over all workloads of a family; the first candidate in grid order with
//! the smallest total wins. A candidate is abandoned as soon as its running
//! total can no longer beat the incumbent, which keeps the sweep cheap
//! without changing its result.

use proxnag_core::Result;

use crate::config::SolverName;
use crate::runner::{run_deterministic, RegressionWork, SolverParams};

/// `μ̂/L` values tried for Prox-NAG-GS.
pub const MU_RATIO_GRID: [f64; 13] = [
    1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01, 5e-3, 2e-3, 1e-3, 5e-4, 2e-4, 1e-4,
];
/// `α` values tried for Prox-NAG-GS.
pub const ALPHA_GRID: [f64; 12] = [
    20.0, 10.0, 5.0, 2.0, 1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005,
];
/// Step sizes tried for ISTA and FISTA, as multiples of `1/L`.
pub const ETA_GRID: [f64; 4] = [0.5, 1.0, 1.5, 1.9];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tuned {
    pub solver: SolverName,
    pub mu_ratio: f64,
    pub alpha: f64,
    pub eta_l: f64,
    /// Mean iterations to the gap over the workloads.
    pub mean_iters: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub mu_ratio: f64,
    pub alpha: f64,
    pub eta_l: f64,
}

/// Candidates searched for `solver`, in grid order.
pub fn candidates(solver: SolverName) -> Vec<Candidate> {
    match solver {
        SolverName::ProxNagGs => MU_RATIO_GRID
            .iter()
            .flat_map(|&mu_ratio| {
                ALPHA_GRID.iter().map(move |&alpha| Candidate {
                    mu_ratio,
                    alpha,
                    eta_l: 1.0,
                })
            })
            .collect(),
        SolverName::Ista | SolverName::Fista => ETA_GRID
            .iter()
            .map(|&eta_l| Candidate {
                mu_ratio: 1.0,
                alpha: 1.0,
                eta_l,
            })
            .collect(),
        _ => Vec::new(),
    }
}

fn params_for(w: &RegressionWork, c: &Candidate, gap_tol: f64, max_iter: usize) -> SolverParams {
    let l = w.problem.f.smoothness();
    SolverParams {
        mu_hat: c.mu_ratio * l,
        alpha: c.alpha,
        eta: c.eta_l / l,
        max_iter,
        gap_tol,
    }
}

/// Total iterations of `c` over `works`, or `None` once it exceeds
/// `budget` or fails to reach the gap.
fn score(
    works: &[RegressionWork],
    solver: SolverName,
    c: &Candidate,
    gap_tol: f64,
    max_iter: usize,
    budget: Option<usize>,
) -> Result<Option<usize>> {
    let mut total = 0usize;
    for w in works {
        let cap = match budget {
            Some(b) => max_iter.min(b.saturating_sub(total)),
            None => max_iter,
        };
        let run = match run_deterministic(w, solver, &params_for(w, c, gap_tol, cap)) {
            Ok(run) => run,
            // Divergent settings surface as numerical errors; they simply lose.
            Err(proxnag_core::Error::Numerical { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        if !run.reached {
            return Ok(None);
        }
        total += run.iterations.unwrap_or(max_iter);
        if budget.is_some_and(|b| total >= b) {
            return Ok(None);
        }
    }
    Ok(Some(total))
}

/// Best grid point for `solver` on `works`; `None` if no candidate reaches
/// the gap on every workload within `max_iter`.
pub fn tune(works: &[RegressionWork], solver: SolverName, gap_tol: f64, max_iter: usize) -> Result<Option<Tuned>> {
    let mut best: Option<(usize, Candidate)> = None;
    for c in candidates(solver) {
        if let Some(total) = score(works, solver, &c, gap_tol, max_iter, best.map(|b| b.0))? {
            best = Some((total, c));
        }
    }
    Ok(best.map(|(total, c)| Tuned {
        solver,
        mu_ratio: c.mu_ratio,
        alpha: c.alpha,
        eta_l: c.eta_l,
        mean_iters: total as f64 / works.len().max(1) as f64,
    }))
}
