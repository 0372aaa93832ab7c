//! Prox-NAG-GS: semi-implicit accelerated proximal gradient.
//!
//! Each step averages `x` towards `v`, evaluates the gradient at the new
//! `x`, and takes a proximal step for `v` from a point pulled towards the
//! new `x`:
//!
//! ```text
//! a_k     = α/(1+α)
//! x_{k+1} = (1 − a_k) x_k + a_k v_k
//! b_k     = α μ̂ / (α μ̂ + γ_k)
//! z_{k+1} = (1 − b_k) v_k + b_k x_{k+1}
//! v_{k+1} = prox_{(b_k/μ̂) r}(z_{k+1} − (b_k/μ̂) ∇f(x_{k+1}))
//! γ_{k+1} = (1 − a_k) γ_k + a_k μ̂
//! ```
//!
//! With `γ₀ = μ̂` the damping stays at `μ̂` and `b_k = a_k` for all `k`.

use nalgebra::DVector;

use super::trace::{point_stats, StepClock, Trace, TraceRow};
use crate::error::{Error, Result};
use crate::model::{CompositeProblem, Regularizer};

/// Which iterate's gap drives the `gap_tol` stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StopOn {
    /// `F(v_k) − F*`
    #[default]
    ProxIterate,
    /// `F(x_k) − F*`, the reported output iterate.
    OutputIterate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxNagGsConfig {
    pub mu_hat: f64,
    pub gamma0: f64,
    pub alpha: f64,
    pub max_iter: usize,
    /// Stop once the selected gap is `≤ gap_tol`; needs a reference when > 0.
    pub gap_tol: f64,
    /// Without a reference, stop once the optimality residual at `x_k` is
    /// `≤ residual_tol` (0 disables).
    pub residual_tol: f64,
    pub stop_on: StopOn,
    pub record_trace: bool,
}

impl ProxNagGsConfig {
    /// Constant-damping regime `γ₀ = μ̂`.
    pub fn constant(mu_hat: f64, alpha: f64, max_iter: usize) -> Self {
        ProxNagGsConfig {
            mu_hat,
            gamma0: mu_hat,
            alpha,
            max_iter,
            gap_tol: 0.0,
            residual_tol: 0.0,
            stop_on: StopOn::ProxIterate,
            record_trace: true,
        }
    }

    /// Constant regime from the averaging weight `a ∈ (0,1)`.
    pub fn from_a(mu_hat: f64, a: f64, max_iter: usize) -> Self {
        Self::constant(mu_hat, a / (1.0 - a), max_iter)
    }

    pub fn with_gap_tol(mut self, tol: f64) -> Self {
        self.gap_tol = tol;
        self
    }

    /// `a = α/(1+α)`.
    pub fn a(&self) -> f64 {
        self.alpha / (1.0 + self.alpha)
    }

    pub fn is_constant_regime(&self) -> bool {
        self.gamma0 == self.mu_hat
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("mu_hat", self.mu_hat), ("gamma0", self.gamma0), ("alpha", self.alpha)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if !(self.gap_tol >= 0.0) || !(self.residual_tol >= 0.0) {
            return Err(Error::Config("tolerances must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxNagGsState {
    pub x: DVector<f64>,
    pub v: DVector<f64>,
    pub gamma: f64,
    pub k: usize,
}

impl ProxNagGsState {
    /// `v₀ = x₀`, `γ = γ₀`.
    pub fn new(x0: DVector<f64>, cfg: &ProxNagGsConfig) -> Self {
        ProxNagGsState {
            v: x0.clone(),
            x: x0,
            gamma: cfg.gamma0,
            k: 0,
        }
    }
}

/// Intermediate quantities of one step.
#[derive(Debug, Clone)]
pub struct ProxStepDiagnostics {
    pub a: f64,
    pub b: f64,
    pub z: DVector<f64>,
    /// `(μ̂/b)(z_{k+1} − v_{k+1})`
    pub q: DVector<f64>,
    /// `q − g`, an element of `∂r(v_{k+1})`.
    pub s: DVector<f64>,
    /// `‖x_k − v_k‖²`
    pub d: f64,
    /// `‖v_{k+1} − z_{k+1}‖²`
    pub r: f64,
    /// `‖v_{k+1} − x_{k+1}‖²`
    pub m: f64,
}

/// One Prox-NAG-GS step. `grad_at` is called exactly once, at `x_{k+1}`.
pub fn prox_naggs_step<G>(
    r: &dyn Regularizer,
    cfg: &ProxNagGsConfig,
    st: &ProxNagGsState,
    grad_at: G,
) -> Result<(ProxNagGsState, ProxStepDiagnostics)>
where
    G: FnOnce(&DVector<f64>) -> DVector<f64>,
{
    let a = cfg.alpha / (1.0 + cfg.alpha);
    let x_next = &st.x * (1.0 - a) + &st.v * a;
    let b = cfg.alpha * cfg.mu_hat / (cfg.alpha * cfg.mu_hat + st.gamma);
    let z = &st.v * (1.0 - b) + &x_next * b;
    let g = grad_at(&x_next);
    if g.len() != x_next.len() {
        return Err(Error::Dimension {
            expected: x_next.len(),
            got: g.len(),
        });
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical {
            k: st.k,
            what: "non-finite gradient".into(),
        });
    }
    let step = b / cfg.mu_hat;
    let v_next = r.prox(step, &(&z - &g * step));
    let gamma_next = (1.0 - a) * st.gamma + a * cfg.mu_hat;

    let q = (&z - &v_next) * (cfg.mu_hat / b);
    let s = &q - &g;
    let diag = ProxStepDiagnostics {
        a,
        b,
        d: (&st.x - &st.v).norm_squared(),
        r: (&v_next - &z).norm_squared(),
        m: (&v_next - &x_next).norm_squared(),
        z,
        q,
        s,
    };
    let next = ProxNagGsState {
        x: x_next,
        v: v_next,
        gamma: gamma_next,
        k: st.k + 1,
    };
    Ok((next, diag))
}

pub(crate) fn require_reference(p: &CompositeProblem, gap_tol: f64) -> Result<()> {
    if gap_tol > 0.0 && p.reference.is_none() {
        return Err(Error::Config(
            "gap_tol > 0 requires a reference solution attached to the problem".into(),
        ));
    }
    Ok(())
}

/// Deterministic run. Returns the final state and one trace row per state
/// visited. A run that meets its tolerance stops at, and returns, the state
/// that met it; that last row has no step diagnostics.
pub fn prox_naggs_run(
    p: &CompositeProblem,
    cfg: &ProxNagGsConfig,
    x0: &DVector<f64>,
) -> Result<(ProxNagGsState, Trace)> {
    prox_naggs_run_observed(p, cfg, x0, |_| {})
}

/// As [`prox_naggs_run`], calling `observe` on every state, the initial one
/// included, before the step taken from it.
pub fn prox_naggs_run_observed<O>(
    p: &CompositeProblem,
    cfg: &ProxNagGsConfig,
    x0: &DVector<f64>,
    mut observe: O,
) -> Result<(ProxNagGsState, Trace)>
where
    O: FnMut(&ProxNagGsState),
{
    cfg.validate()?;
    p.check_dim(x0)?;
    require_reference(p, cfg.gap_tol)?;
    let mut st = ProxNagGsState::new(x0.clone(), cfg);
    let mut trace = Trace::default();
    let mut clock = StepClock::default();
    let need_stats = cfg.record_trace || cfg.gap_tol > 0.0;
    let use_residual = p.reference.is_none() && cfg.residual_tol > 0.0;

    while st.k < cfg.max_iter {
        observe(&st);
        let mut row = TraceRow {
            k: st.k,
            ..TraceRow::default()
        };
        if need_stats {
            let sx = point_stats(p, &st.x);
            let sv = point_stats(p, &st.v);
            row.f_x = Some(sx.f);
            row.f_v = Some(sv.f);
            row.gap_x = sx.gap;
            row.gap_v = sv.gap;
            row.x_dist_sq = sx.dist_sq;
            row.v_dist_sq = sv.dist_sq;
        }
        let converged = match cfg.stop_on {
            _ if cfg.gap_tol <= 0.0 => false,
            StopOn::ProxIterate => row.gap_v.is_some_and(|g| g <= cfg.gap_tol),
            StopOn::OutputIterate => row.gap_x.is_some_and(|g| g <= cfg.gap_tol),
        } || (use_residual && p.optimality_residual(&st.x)? <= cfg.residual_tol);
        if converged {
            if cfg.record_trace {
                row.xv_dist_sq = Some((&st.x - &st.v).norm_squared());
                row.elapsed_s = Some(clock.seconds());
                trace.rows.push(row);
            }
            break;
        }

        clock.start();
        let (next, diag) = prox_naggs_step(p.r.as_ref(), cfg, &st, |x| p.f.gradient(x))?;
        clock.stop();

        if cfg.record_trace {
            row.xv_dist_sq = Some(diag.d);
            row.vz_next_sq = Some(diag.r);
            row.mismatch_next_sq = Some(diag.m);
            row.elapsed_s = Some(clock.seconds());
            trace.rows.push(row);
        }
        st = next;
    }
    Ok((st, trace))
}
