//! Mini-batch Prox-SGD and stochastic Prox-NAG-GS over finite-sum oracles.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::baselines::forward_backward;
use super::naggs::{prox_naggs_step, ProxNagGsConfig, ProxNagGsState};
use super::trace::{point_stats, StepClock, Trace, TraceRow};
use crate::error::{Error, Result};
use crate::model::{CompositeProblem, SampledOracle};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochasticConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    Constant(f64),
    /// `eta0 / (1 + decay·epoch)`
    InverseEpoch { eta0: f64, decay: f64 },
}

impl StepSchedule {
    pub fn at_epoch(&self, epoch: usize) -> f64 {
        match *self {
            StepSchedule::Constant(eta) => eta,
            StepSchedule::InverseEpoch { eta0, decay } => eta0 / (1.0 + decay * epoch as f64),
        }
    }
}

fn sampler<'a>(p: &'a CompositeProblem, cfg: &StochasticConfig) -> Result<&'a dyn SampledOracle> {
    let oracle = p
        .f
        .sampled()
        .ok_or_else(|| Error::Config("stochastic solvers need a finite-sum smooth part".into()))?;
    let n = oracle.n_samples();
    if n == 0 {
        return Err(Error::Input("empty dataset".into()));
    }
    if cfg.batch_size == 0 || cfg.batch_size > n {
        return Err(Error::Input(format!(
            "batch size {} must lie in 1..={n}",
            cfg.batch_size
        )));
    }
    Ok(oracle)
}

/// Seeded per-epoch batches. Each batch is sorted so that summation order is
/// independent of the shuffle; a full batch is exactly `0..n`.
struct BatchStream {
    rng: ChaCha8Rng,
    order: Vec<usize>,
    batch_size: usize,
}

impl BatchStream {
    fn new(n: usize, batch_size: usize, seed: u64) -> Self {
        BatchStream {
            rng: ChaCha8Rng::seed_from_u64(seed),
            order: (0..n).collect(),
            batch_size,
        }
    }

    fn epoch(&mut self) -> Vec<Vec<usize>> {
        self.order.shuffle(&mut self.rng);
        self.order
            .chunks(self.batch_size)
            .map(|chunk| {
                let mut batch = chunk.to_vec();
                batch.sort_unstable();
                batch
            })
            .collect()
    }
}

fn epoch_row(p: &CompositeProblem, epoch: usize, x: &DVector<f64>, v: Option<&DVector<f64>>, secs: f64) -> TraceRow {
    let sx = point_stats(p, x);
    let sv = v.map(|v| point_stats(p, v));
    TraceRow {
        k: epoch,
        f_x: Some(sx.f),
        gap_x: sx.gap,
        x_dist_sq: sx.dist_sq,
        f_v: sv.as_ref().map(|s| s.f),
        gap_v: sv.as_ref().and_then(|s| s.gap),
        v_dist_sq: sv.as_ref().and_then(|s| s.dist_sq),
        elapsed_s: Some(secs),
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

/// Mini-batch `x⁺ = prox_{ηr}(x − η g_B)`. Row `e` of the trace holds the
/// full objective after `e` epochs (row 0 is the starting point).
pub fn prox_sgd_run(
    p: &CompositeProblem,
    schedule: StepSchedule,
    cfg: &StochasticConfig,
    x0: &DVector<f64>,
) -> Result<(DVector<f64>, Trace)> {
    let oracle = sampler(p, cfg)?;
    p.check_dim(x0)?;
    let mut stream = BatchStream::new(oracle.n_samples(), cfg.batch_size, cfg.seed);
    let mut x = x0.clone();
    let mut clock = StepClock::default();
    let mut trace = Trace::default();
    trace.rows.push(epoch_row(p, 0, &x, None, 0.0));
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        let eta = schedule.at_epoch(epoch);
        if !(eta > 0.0) {
            return Err(Error::Config(format!("step size must be > 0, got {eta}")));
        }
        clock.start();
        for batch in stream.epoch() {
            let g = oracle.batch_gradient(&x, &batch);
            x = forward_backward(p.r.as_ref(), eta, &x, &g);
            check_finite(&x, step)?;
            step += 1;
        }
        clock.stop();
        trace.rows.push(epoch_row(p, epoch + 1, &x, None, clock.seconds()));
    }
    Ok((x, trace))
}

/// Prox-NAG-GS with mini-batch gradients taken at `x_{k+1}`; one step per
/// batch. `cfg.max_iter` and the stopping fields are ignored.
pub fn stochastic_prox_naggs_run(
    p: &CompositeProblem,
    cfg: &ProxNagGsConfig,
    scfg: &StochasticConfig,
    x0: &DVector<f64>,
) -> Result<(ProxNagGsState, Trace)> {
    cfg.validate()?;
    let oracle = sampler(p, scfg)?;
    p.check_dim(x0)?;
    let mut stream = BatchStream::new(oracle.n_samples(), scfg.batch_size, scfg.seed);
    let mut st = ProxNagGsState::new(x0.clone(), cfg);
    let mut clock = StepClock::default();
    let mut trace = Trace::default();
    trace.rows.push(epoch_row(p, 0, &st.x, Some(&st.v), 0.0));
    for epoch in 0..scfg.epochs {
        clock.start();
        for batch in stream.epoch() {
            let (next, _) = prox_naggs_step(p.r.as_ref(), cfg, &st, |x| oracle.batch_gradient(x, &batch))?;
            st = next;
        }
        clock.stop();
        trace.rows.push(epoch_row(p, epoch + 1, &st.x, Some(&st.v), clock.seconds()));
    }
    Ok((st, trace))
}
