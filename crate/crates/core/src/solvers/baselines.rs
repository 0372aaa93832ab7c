//! Forward-backward baselines: ISTA, FISTA and Chambolle-Pock.

use nalgebra::DVector;

use super::naggs::require_reference;
use super::trace::{point_stats, StepClock, Trace, TraceRow};
use crate::error::{Error, Result};
use crate::model::{CompositeProblem, Regularizer};

/// `prox_{eta r}(x − eta g)`.
pub(crate) fn forward_backward(r: &dyn Regularizer, eta: f64, x: &DVector<f64>, g: &DVector<f64>) -> DVector<f64> {
    r.prox(eta, &(x - g * eta))
}

/// One proximal gradient step `prox_{eta r}(x − eta ∇f(x))`.
pub fn ista_step(p: &CompositeProblem, eta: f64, x: &DVector<f64>) -> DVector<f64> {
    let g = p.f.gradient(x);
    forward_backward(p.r.as_ref(), eta, x, &g)
}

/// Settings shared by the single-sequence baselines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub eta: f64,
    pub max_iter: usize,
    pub gap_tol: f64,
    pub record_trace: bool,
}

impl BaselineConfig {
    /// Step `1/L`.
    pub fn standard(p: &CompositeProblem, max_iter: usize) -> Self {
        BaselineConfig {
            eta: 1.0 / p.f.smoothness(),
            max_iter,
            gap_tol: 0.0,
            record_trace: true,
        }
    }

    pub fn with_gap_tol(mut self, tol: f64) -> Self {
        self.gap_tol = tol;
        self
    }

    fn validate(&self, p: &CompositeProblem) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::Config(format!("step must be finite and > 0, got {}", self.eta)));
        }
        if !(self.gap_tol >= 0.0) {
            return Err(Error::Config("gap_tol must be >= 0".into()));
        }
        require_reference(p, self.gap_tol)
    }
}

fn stats_row(p: &CompositeProblem, k: usize, x: &DVector<f64>) -> TraceRow {
    let s = point_stats(p, x);
    TraceRow {
        k,
        f_x: Some(s.f),
        gap_x: s.gap,
        x_dist_sq: s.dist_sq,
        ..TraceRow::default()
    }
}

fn check_finite(x: &DVector<f64>, k: usize) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical {
            k,
            what: "non-finite iterate".into(),
        });
    }
    Ok(())
}

pub fn ista_run(p: &CompositeProblem, cfg: &BaselineConfig, x0: &DVector<f64>) -> Result<(DVector<f64>, Trace)> {
    cfg.validate(p)?;
    p.check_dim(x0)?;
    let mut x = x0.clone();
    let mut trace = Trace::default();
    let mut clock = StepClock::default();
    for k in 0..cfg.max_iter {
        let mut row = stats_row(p, k, &x);
        if cfg.gap_tol > 0.0 && row.gap_x.is_some_and(|g| g <= cfg.gap_tol) {
            if cfg.record_trace {
                row.elapsed_s = Some(clock.seconds());
                trace.rows.push(row);
            }
            break;
        }
        clock.start();
        x = ista_step(p, cfg.eta, &x);
        clock.stop();
        check_finite(&x, k)?;
        if cfg.record_trace {
            row.elapsed_s = Some(clock.seconds());
            trace.rows.push(row);
        }
    }
    Ok((x, trace))
}

/// `t_{k+1} = (1 + √(1 + 4 t_k²)) / 2`.
pub fn fista_momentum(t: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FistaConfig {
    pub base: BaselineConfig,
    /// With momentum off every extrapolation weight is zero and FISTA is ISTA.
    pub momentum: bool,
    /// Gradient-based adaptive restart of the momentum sequence.
    pub restart: bool,
}

impl FistaConfig {
    pub fn standard(p: &CompositeProblem, max_iter: usize) -> Self {
        FistaConfig {
            base: BaselineConfig::standard(p, max_iter),
            momentum: true,
            restart: false,
        }
    }
}

/// FISTA with `t₁ = 1`; rows report the proximal iterate `x_k`.
pub fn fista_run(p: &CompositeProblem, cfg: &FistaConfig, x0: &DVector<f64>) -> Result<(DVector<f64>, Trace)> {
    let base = &cfg.base;
    base.validate(p)?;
    p.check_dim(x0)?;
    let mut x = x0.clone();
    let mut y = x0.clone();
    let mut t = 1.0;
    let mut trace = Trace::default();
    let mut clock = StepClock::default();
    for k in 0..base.max_iter {
        let mut row = stats_row(p, k, &x);
        if base.gap_tol > 0.0 && row.gap_x.is_some_and(|g| g <= base.gap_tol) {
            if base.record_trace {
                row.elapsed_s = Some(clock.seconds());
                trace.rows.push(row);
            }
            break;
        }
        clock.start();
        let g = p.f.gradient(&y);
        let x_next = forward_backward(p.r.as_ref(), base.eta, &y, &g);
        let t_next = fista_momentum(t);
        let weight = if cfg.momentum { (t - 1.0) / t_next } else { 0.0 };
        let restart = cfg.restart && (&y - &x_next).dot(&(&x_next - &x)) > 0.0;
        if restart {
            t = 1.0;
            y = x_next.clone();
        } else {
            y = &x_next + (&x_next - &x) * weight;
            t = t_next;
        }
        x = x_next;
        clock.stop();
        check_finite(&x, k)?;
        if base.record_trace {
            row.elapsed_s = Some(clock.seconds());
            trace.rows.push(row);
        }
    }
    Ok((x, trace))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChambollePockConfig {
    pub sigma: f64,
    pub tau: f64,
    pub theta: f64,
    pub max_iter: usize,
    pub gap_tol: f64,
    pub record_trace: bool,
}

impl ChambollePockConfig {
    /// `σ = τ = 0.99/‖A‖`, `θ = 1`.
    pub fn standard(p: &CompositeProblem, max_iter: usize) -> Result<Self> {
        let ls = least_squares(p)?;
        let op_norm = (p.f.smoothness() - ls.lambda2()).max(0.0).sqrt();
        let step = if op_norm > 0.0 { 0.99 / op_norm } else { 1.0 };
        Ok(ChambollePockConfig {
            sigma: step,
            tau: step,
            theta: 1.0,
            max_iter,
            gap_tol: 0.0,
            record_trace: true,
        })
    }

    pub fn with_gap_tol(mut self, tol: f64) -> Self {
        self.gap_tol = tol;
        self
    }
}

fn least_squares(p: &CompositeProblem) -> Result<&crate::model::LeastSquaresRidge> {
    p.f.as_least_squares()
        .ok_or_else(|| Error::Config("Chambolle-Pock needs a least-squares smooth part".into()))
}

/// Primal-dual iteration on
/// `min_x max_y ⟨Ax, y⟩ − ½‖y‖² − ⟨b, y⟩ + (λ₂/2)‖x‖² + r(x)`.
///
/// The dual prox is `(y + σ(Ax̄ − b)) / (1 + σ)`; the primal prox of
/// `τ((λ₂/2)‖·‖² + r)` is `prox_{τ/(1+τλ₂) r}(w / (1 + τλ₂))`.
pub fn chambolle_pock_run(
    p: &CompositeProblem,
    cfg: &ChambollePockConfig,
    x0: &DVector<f64>,
) -> Result<(DVector<f64>, Trace)> {
    let ls = least_squares(p)?;
    p.check_dim(x0)?;
    require_reference(p, cfg.gap_tol)?;
    if !(cfg.sigma > 0.0 && cfg.tau > 0.0) {
        return Err(Error::Config("sigma and tau must be > 0".into()));
    }
    if !(0.0..=1.0).contains(&cfg.theta) {
        return Err(Error::Config(format!("theta must lie in [0, 1], got {}", cfg.theta)));
    }
    let op_norm_sq = (p.f.smoothness() - ls.lambda2()).max(0.0);
    if cfg.sigma * cfg.tau * op_norm_sq > 1.0 + 1e-12 {
        return Err(Error::Config(format!(
            "step product sigma*tau*||A||^2 = {} exceeds 1",
            cfg.sigma * cfg.tau * op_norm_sq
        )));
    }
    let a = ls.a();
    let b = ls.b();
    let shrink = 1.0 + cfg.tau * ls.lambda2();
    let mut x = x0.clone();
    let mut x_bar = x0.clone();
    let mut y = DVector::zeros(a.nrows());
    let mut trace = Trace::default();
    let mut clock = StepClock::default();
    for k in 0..cfg.max_iter {
        let mut row = stats_row(p, k, &x);
        if cfg.gap_tol > 0.0 && row.gap_x.is_some_and(|g| g <= cfg.gap_tol) {
            if cfg.record_trace {
                row.elapsed_s = Some(clock.seconds());
                trace.rows.push(row);
            }
            break;
        }
        clock.start();
        y = dual_prox(&y, &(a * &x_bar), b, cfg.sigma);
        let w = &x - a.tr_mul(&y) * cfg.tau;
        let x_next = p.r.prox(cfg.tau / shrink, &(w / shrink));
        x_bar = &x_next + (&x_next - &x) * cfg.theta;
        x = x_next;
        clock.stop();
        check_finite(&x, k)?;
        if cfg.record_trace {
            row.elapsed_s = Some(clock.seconds());
            trace.rows.push(row);
        }
    }
    Ok((x, trace))
}

/// Prox of `σ h*` with `h*(y) = ½‖y‖² + ⟨b, y⟩`, at `y + σ·ax_bar`.
pub fn dual_prox(y: &DVector<f64>, ax_bar: &DVector<f64>, b: &DVector<f64>, sigma: f64) -> DVector<f64> {
    (y + (ax_bar - b) * sigma) / (1.0 + sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LeastSquaresRidge;
    use crate::prox::{L1Penalty, ZeroRegularizer};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn random_elastic_net(seed: u64) -> CompositeProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(30, 10, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(30, |_, _| rng.random_range(-1.0..1.0));
        let f = LeastSquaresRidge::new(a, b, 0.1).unwrap();
        CompositeProblem::new(Arc::new(f), Arc::new(L1Penalty::new(0.2).unwrap()))
    }

    #[test]
    fn ista_exact_on_unit_quadratic() {
        let f = LeastSquaresRidge::new(DMatrix::identity(1, 1), DVector::zeros(1), 0.0).unwrap();
        let p = CompositeProblem::new(Arc::new(f), Arc::new(ZeroRegularizer));
        assert_eq!(ista_step(&p, 1.0, &DVector::from_element(1, 1.0))[0], 0.0);
        assert_eq!(ista_step(&p, 1.0, &DVector::zeros(1))[0], 0.0);
    }

    #[test]
    fn ista_step_descends() {
        for seed in 0..10 {
            let p = random_elastic_net(seed);
            let eta = 1.0 / p.f.smoothness();
            let mut x = DVector::from_element(10, 1.0);
            for _ in 0..5 {
                let next = ista_step(&p, eta, &x);
                let before = p.composite_value(&x).unwrap().to_f64();
                let after = p.composite_value(&next).unwrap().to_f64();
                assert!(after <= before + 1e-14);
                x = next;
            }
        }
    }

    #[test]
    fn momentum_recurrence() {
        let t2 = fista_momentum(1.0);
        assert!((t2 - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-15);
        assert!((t2 - 1.6180).abs() < 1e-4);
    }

    #[test]
    fn fista_without_momentum_is_ista() {
        let p = random_elastic_net(3);
        let x0 = DVector::from_element(10, 0.5);
        let mut cfg = FistaConfig::standard(&p, 50);
        cfg.momentum = false;
        let (xf, tf) = fista_run(&p, &cfg, &x0).unwrap();
        let (xi, ti) = ista_run(&p, &cfg.base, &x0).unwrap();
        assert_eq!(xf, xi);
        let strip = |t: Trace| t.without_timing();
        assert_eq!(strip(tf), strip(ti));
    }

    #[test]
    fn dual_prox_fixed_point_at_consistency() {
        let b = DVector::from_vec(vec![1.0, -2.0]);
        let y = dual_prox(&DVector::zeros(2), &b, &b, 1.0);
        assert_eq!(y, DVector::zeros(2));
    }

    #[test]
    fn chambolle_pock_zero_iterations() {
        let p = random_elastic_net(1);
        let cfg = ChambollePockConfig::standard(&p, 0).unwrap();
        let x0 = DVector::from_element(10, 0.25);
        let (x, trace) = chambolle_pock_run(&p, &cfg, &x0).unwrap();
        assert_eq!(x, x0);
        assert!(trace.is_empty());
    }

    #[test]
    fn chambolle_pock_rejects_large_steps() {
        let p = random_elastic_net(1);
        let mut cfg = ChambollePockConfig::standard(&p, 10).unwrap();
        cfg.sigma *= 2.0;
        assert!(matches!(
            chambolle_pock_run(&p, &cfg, &DVector::zeros(10)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn chambolle_pock_matches_fista() {
        let p = random_elastic_net(2);
        let x0 = DVector::zeros(10);
        let (x_cp, _) = chambolle_pock_run(&p, &ChambollePockConfig::standard(&p, 20_000).unwrap(), &x0).unwrap();
        let (x_f, _) = fista_run(&p, &FistaConfig::standard(&p, 20_000), &x0).unwrap();
        let f_cp = p.composite_value(&x_cp).unwrap().to_f64();
        let f_f = p.composite_value(&x_f).unwrap().to_f64();
        assert!((f_cp - f_f).abs() < 1e-9, "{f_cp} vs {f_f}");
    }

    #[test]
    fn fista_reaches_quadratic_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = DMatrix::from_fn(20, 8, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(20, |_, _| rng.random_range(-1.0..1.0));
        let x_star = (a.transpose() * &a).lu().solve(&(a.transpose() * &b)).unwrap();
        let f = LeastSquaresRidge::new(a, b, 0.0).unwrap();
        let f_star = f.value(&x_star);
        let p = CompositeProblem::new(Arc::new(f), Arc::new(ZeroRegularizer));
        let (x, _) = fista_run(&p, &FistaConfig::standard(&p, 2000), &DVector::zeros(8)).unwrap();
        use crate::model::SmoothOracle;
        assert!(p.f.value(&x) - f_star <= 1e-10);
    }
}
