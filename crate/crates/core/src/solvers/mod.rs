//! Prox-NAG-GS and the baseline solvers. Every deterministic run emits a
//! [`Trace`] with the same column layout.

mod baselines;
mod naggs;
mod stochastic;
mod trace;

use nalgebra::DVector;

use crate::error::{Error, Result};

pub use baselines::{
    chambolle_pock_run, dual_prox, fista_momentum, fista_run, ista_run, ista_step, BaselineConfig,
    ChambollePockConfig, FistaConfig,
};
pub use naggs::{
    prox_naggs_run, prox_naggs_run_observed, prox_naggs_step, ProxNagGsConfig, ProxNagGsState,
    ProxStepDiagnostics, StopOn,
};
pub use stochastic::{prox_sgd_run, stochastic_prox_naggs_run, StepSchedule, StochasticConfig};
pub use trace::{Trace, TraceRow, TRACE_HEADER};

/// `v̄_k = (1/k) Σ_{i<k} v_i`.
pub fn averaged_iterate(vs: &[DVector<f64>], k: usize) -> Result<DVector<f64>> {
    if k == 0 {
        return Err(Error::Input("averaged iterate needs k >= 1".into()));
    }
    if k > vs.len() {
        return Err(Error::Input(format!("k = {k} exceeds the {} stored iterates", vs.len())));
    }
    let mut sum = vs[0].clone();
    for v in &vs[1..k] {
        sum += v;
    }
    Ok(sum / k as f64)
}

/// Streaming form of [`averaged_iterate`].
#[derive(Debug, Clone, Default)]
pub struct RunningAverage {
    sum: Option<DVector<f64>>,
    count: usize,
}

impl RunningAverage {
    pub fn push(&mut self, v: &DVector<f64>) {
        match &mut self.sum {
            Some(s) => *s += v,
            None => self.sum = Some(v.clone()),
        }
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> Option<DVector<f64>> {
        self.sum.as_ref().map(|s| s / self.count as f64)
    }
}
