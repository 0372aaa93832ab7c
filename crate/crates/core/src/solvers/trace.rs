use std::time::{Duration, Instant};

use nalgebra::DVector;

use crate::model::CompositeProblem;

/// Header of the trace CSV, in column order.
pub const TRACE_HEADER: &str = "k,F_x,F_v,gap_x,gap_v,V,X,D,R,M,lyap,energy,elapsed_s";

/// One iteration of a solver run.
///
/// Row `k` describes the state *before* step `k`: `F_x`, `gap_x`, `X` are
/// taken at `x_k`, the `v` columns at `v_k`, and `D = ‖x_k − v_k‖²`. The `R`
/// and `M` columns belong to the step taken from that state, i.e.
/// `R = ‖v_{k+1} − z_{k+1}‖²` and `M = ‖v_{k+1} − x_{k+1}‖²`. Stochastic
/// runs emit one row per epoch instead.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceRow {
    pub k: usize,
    pub f_x: Option<f64>,
    pub f_v: Option<f64>,
    pub gap_x: Option<f64>,
    pub gap_v: Option<f64>,
    /// `‖v_k − x*‖²`
    pub v_dist_sq: Option<f64>,
    /// `‖x_k − x*‖²`
    pub x_dist_sq: Option<f64>,
    /// `‖x_k − v_k‖²`
    pub xv_dist_sq: Option<f64>,
    /// `‖v_{k+1} − z_{k+1}‖²`
    pub vz_next_sq: Option<f64>,
    /// `‖v_{k+1} − x_{k+1}‖²`
    pub mismatch_next_sq: Option<f64>,
    pub lyap: Option<f64>,
    pub energy: Option<f64>,
    pub elapsed_s: Option<f64>,
}

impl TraceRow {
    /// Fields in [`TRACE_HEADER`] order, skipping `k`.
    pub fn values(&self) -> [Option<f64>; 12] {
        [
            self.f_x,
            self.f_v,
            self.gap_x,
            self.gap_v,
            self.v_dist_sq,
            self.x_dist_sq,
            self.xv_dist_sq,
            self.vz_next_sq,
            self.mismatch_next_sq,
            self.lyap,
            self.energy,
            self.elapsed_s,
        ]
    }

    pub fn from_values(k: usize, v: [Option<f64>; 12]) -> Self {
        TraceRow {
            k,
            f_x: v[0],
            f_v: v[1],
            gap_x: v[2],
            gap_v: v[3],
            v_dist_sq: v[4],
            x_dist_sq: v[5],
            xv_dist_sq: v[6],
            vz_next_sq: v[7],
            mismatch_next_sq: v[8],
            lyap: v[9],
            energy: v[10],
            elapsed_s: v[11],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Copy with the wall-clock column cleared, for byte-reproducible output.
    pub fn without_timing(&self) -> Trace {
        Trace {
            rows: self
                .rows
                .iter()
                .map(|r| TraceRow {
                    elapsed_s: None,
                    ..r.clone()
                })
                .collect(),
        }
    }

    /// First `k` at which `gap_x ≤ tol`.
    pub fn first_k_gap_x_below(&self, tol: f64) -> Option<usize> {
        self.rows
            .iter()
            .find(|r| r.gap_x.is_some_and(|g| g <= tol))
            .map(|r| r.k)
    }
}

/// Accumulates solver time while excluding diagnostics.
#[derive(Debug, Default)]
pub(crate) struct StepClock {
    total: Duration,
    started: Option<Instant>,
}

impl StepClock {
    pub fn start(&mut self) {
        self.started = Some(Instant::now());
    }

    pub fn stop(&mut self) {
        if let Some(t) = self.started.take() {
            self.total += t.elapsed();
        }
    }

    pub fn seconds(&self) -> f64 {
        self.total.as_secs_f64()
    }
}

/// Objective values and distances to the reference at one iterate.
pub(crate) struct PointStats {
    pub f: f64,
    pub gap: Option<f64>,
    pub dist_sq: Option<f64>,
}

pub(crate) fn point_stats(p: &CompositeProblem, x: &DVector<f64>) -> PointStats {
    let f = p.value_unchecked(x).to_f64();
    match &p.reference {
        Some(reference) => PointStats {
            f,
            gap: Some(f - reference.f_star),
            dist_sq: Some((x - &reference.x_star).norm_squared()),
        },
        None => PointStats {
            f,
            gap: None,
            dist_sq: None,
        },
    }
}
