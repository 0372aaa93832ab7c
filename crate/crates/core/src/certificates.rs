//! Numerical certificates for Prox-NAG-GS in the constant regime.
//!
//! Strongly convex case: `𝓛_k = G_k + b V_k + c X_k` with `b = μ̂/(2a)`,
//! `β = (μ̂ − μ_f)/2`, `c` inside `(β(1−a)/a, (μ̂+μ_F)/(2a) − β)` contracts by
//!
//! ```text
//! θ = max{ (b(1−a) + a(β+c)) / (b + μ_F/2),  (1−a)(β+c)/c }.
//! ```
//!
//! Convex case: `𝓔_k = G_k + (μ̂/2a) V_k + (μ̂(1−a)/2a) X_k` satisfies
//! `𝓔_{k+1} ≤ 𝓔_k − G_k − (μ̂(1−a)/2) D_k`, which yields the `𝓔₀/k` rates for
//! the best and the averaged iterate.
//!
//! Both rely on the mismatch term being absorbed when `μ̂ ≥ L`:
//! `−(μ̂(1−a)³/2) D_k − (μ̂/2a) R_{k+1} + (L/2) M_{k+1} ≤ 0`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::solvers::{Trace, TraceRow};

/// Relative slack for the contraction and descent inequalities.
pub const CONTRACTION_REL_TOL: f64 = 1e-10;
/// Absolute slack for the mismatch expression, scaled by `max(1, μ̂(D+R+M))`.
pub const MISMATCH_ABS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CChoice {
    Explicit(f64),
    Midpoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovParams {
    pub a: f64,
    pub mu_hat: f64,
    pub l: f64,
    pub mu_f: f64,
    pub mu_big_f: f64,
    pub b: f64,
    pub beta: f64,
    pub c: f64,
    pub c_lower: f64,
    pub c_upper: f64,
    pub theta: f64,
    /// `μ̂ ≥ L`; outside it the certificate is informative only.
    pub in_regime: bool,
}

pub fn compute_params(a: f64, mu_hat: f64, l: f64, mu_f: f64, mu_big_f: f64, c_choice: CChoice) -> Result<LyapunovParams> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::Input(format!("a must lie in (0, 1), got {a}")));
    }
    if !(mu_hat > 0.0) || !(l >= 0.0) || !(mu_f >= 0.0) || !(mu_big_f >= 0.0) {
        return Err(Error::Input("curvature constants must be nonnegative, mu_hat > 0".into()));
    }
    if mu_f + mu_big_f <= 0.0 {
        return Err(Error::DegenerateInterval);
    }
    let b = mu_hat / (2.0 * a);
    let beta = (mu_hat - mu_f) / 2.0;
    let c_lower = beta * (1.0 - a) / a;
    let c_upper = (mu_hat + mu_big_f) / (2.0 * a) - beta;
    let c = match c_choice {
        CChoice::Midpoint => 0.5 * (c_lower + c_upper),
        CChoice::Explicit(c) => {
            if !(c >= c_lower && c <= c_upper) {
                return Err(Error::Input(format!(
                    "c = {c} outside the admissible interval [{c_lower}, {c_upper}]"
                )));
            }
            c
        }
    };
    if !(c > 0.0) {
        return Err(Error::Input(format!("c must be > 0, got {c}")));
    }
    let theta = theta_for(a, b, beta, c, mu_big_f);
    Ok(LyapunovParams {
        a,
        mu_hat,
        l,
        mu_f,
        mu_big_f,
        b,
        beta,
        c,
        c_lower,
        c_upper,
        theta,
        in_regime: mu_hat >= l,
    })
}

fn theta_for(a: f64, b: f64, beta: f64, c: f64, mu_big_f: f64) -> f64 {
    let first = (b * (1.0 - a) + a * (beta + c)) / (b + mu_big_f / 2.0);
    let second = (1.0 - a) * (beta + c) / c;
    first.max(second)
}

/// `𝓛 = G + bV + cX`.
pub fn lyapunov_value(params: &LyapunovParams, gap_v: f64, v_dist_sq: f64, x_dist_sq: f64) -> f64 {
    gap_v + params.b * v_dist_sq + params.c * x_dist_sq
}

/// `𝓔 = G + (μ̂/2a)V + (μ̂(1−a)/2a)X`.
pub fn convex_energy(mu_hat: f64, a: f64, gap_v: f64, v_dist_sq: f64, x_dist_sq: f64) -> f64 {
    gap_v + mu_hat / (2.0 * a) * v_dist_sq + mu_hat * (1.0 - a) / (2.0 * a) * x_dist_sq
}

/// `−(μ̂(1−a)³/2)D − (μ̂/2a)R + (L/2)M`.
pub fn mismatch_expression(mu_hat: f64, l: f64, a: f64, d: f64, r: f64, m: f64) -> f64 {
    -(mu_hat * (1.0 - a).powi(3) / 2.0) * d - mu_hat / (2.0 * a) * r + l / 2.0 * m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Contraction,
    Envelope,
    Mismatch,
    ConvexDescent,
    SumGap,
    BestRate,
    ErgodicRate,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::Contraction => "contraction",
            ViolationKind::Envelope => "envelope",
            ViolationKind::Mismatch => "mismatch",
            ViolationKind::ConvexDescent => "convex_descent",
            ViolationKind::SumGap => "sum_gap",
            ViolationKind::BestRate => "best_rate",
            ViolationKind::ErgodicRate => "ergodic_rate",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "contraction" => ViolationKind::Contraction,
            "envelope" => ViolationKind::Envelope,
            "mismatch" => ViolationKind::Mismatch,
            "convex_descent" => ViolationKind::ConvexDescent,
            "sum_gap" => ViolationKind::SumGap,
            "best_rate" => ViolationKind::BestRate,
            "ergodic_rate" => ViolationKind::ErgodicRate,
            _ => return None,
        })
    }
}

/// An inequality that failed at step `k`; `slack` is how far the left side
/// exceeded the right side (before tolerance).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub k: usize,
    pub kind: ViolationKind,
    pub slack: f64,
}

fn field(row: &TraceRow, value: Option<f64>, name: &str) -> Result<f64> {
    value.ok_or_else(|| Error::Input(format!("trace row {} is missing {name}", row.k)))
}

fn lyapunov_series(trace: &Trace, params: &LyapunovParams) -> Result<Vec<f64>> {
    trace
        .rows
        .iter()
        .map(|row| {
            Ok(lyapunov_value(
                params,
                field(row, row.gap_v, "gap_v")?,
                field(row, row.v_dist_sq, "V")?,
                field(row, row.x_dist_sq, "X")?,
            ))
        })
        .collect()
}

fn energy_series(trace: &Trace, mu_hat: f64, a: f64) -> Result<Vec<f64>> {
    trace
        .rows
        .iter()
        .map(|row| {
            Ok(convex_energy(
                mu_hat,
                a,
                field(row, row.gap_v, "gap_v")?,
                field(row, row.v_dist_sq, "V")?,
                field(row, row.x_dist_sq, "X")?,
            ))
        })
        .collect()
}

/// Fills the `lyap` and `energy` columns wherever the inputs are present.
pub fn annotate_trace(trace: &mut Trace, params: Option<&LyapunovParams>, convex: Option<(f64, f64)>) {
    for row in &mut trace.rows {
        let (Some(g), Some(v), Some(x)) = (row.gap_v, row.v_dist_sq, row.x_dist_sq) else {
            continue;
        };
        if let Some(p) = params {
            row.lyap = Some(lyapunov_value(p, g, v, x));
        }
        if let Some((mu_hat, a)) = convex {
            row.energy = Some(convex_energy(mu_hat, a, g, v, x));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContractionCheck {
    pub violations: Vec<Violation>,
    /// Largest `𝓛_{k+1} − θ𝓛_k` observed.
    pub max_slack: f64,
}

/// Flags `k` with `𝓛_{k+1} > θ𝓛_k + rel_tol·max(1, 𝓛_k)`, and `k` with
/// `𝓛_k > 𝓛₀θᵏ + E_k`, where `E_k` accumulates the per-step slack
/// (`E_{k+1} = θE_k + rel_tol·max(1, 𝓛_k)`).
pub fn contraction_violations(lyap: &[f64], theta: f64, rel_tol: f64) -> Result<ContractionCheck> {
    if lyap.len() < 2 {
        return Err(Error::Input(format!(
            "contraction check needs at least 2 rows, got {}",
            lyap.len()
        )));
    }
    let mut out = ContractionCheck {
        max_slack: f64::NEG_INFINITY,
        ..Default::default()
    };
    let mut envelope = lyap[0];
    let mut allowance = 0.0;
    for k in 0..lyap.len() - 1 {
        let tol = rel_tol * lyap[k].abs().max(1.0);
        let slack = lyap[k + 1] - theta * lyap[k];
        out.max_slack = out.max_slack.max(slack);
        if slack > tol {
            out.violations.push(Violation {
                k,
                kind: ViolationKind::Contraction,
                slack,
            });
        }
        envelope *= theta;
        allowance = theta * allowance + tol;
        let env_slack = lyap[k + 1] - envelope;
        if env_slack > allowance {
            out.violations.push(Violation {
                k: k + 1,
                kind: ViolationKind::Envelope,
                slack: env_slack,
            });
        }
    }
    Ok(out)
}

pub fn check_contraction(trace: &Trace, params: &LyapunovParams, rel_tol: f64) -> Result<ContractionCheck> {
    let lyap = lyapunov_series(trace, params)?;
    contraction_violations(&lyap, params.theta, rel_tol)
}

/// `𝓛₀θᵏ` for each row.
pub fn envelope_series(lyap0: f64, theta: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut e = lyap0;
    for _ in 0..len {
        out.push(e);
        e *= theta;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MismatchCheck {
    pub violations: Vec<Violation>,
    pub max_value: f64,
}

pub fn check_mismatch_absorption(trace: &Trace, mu_hat: f64, l: f64, a: f64, abs_tol: f64) -> Result<MismatchCheck> {
    if trace.is_empty() {
        return Err(Error::Input("mismatch check needs a nonempty trace".into()));
    }
    let mut out = MismatchCheck {
        max_value: f64::NEG_INFINITY,
        ..Default::default()
    };
    for row in &trace.rows {
        let d = field(row, row.xv_dist_sq, "D")?;
        let r = field(row, row.vz_next_sq, "R")?;
        let m = field(row, row.mismatch_next_sq, "M")?;
        let value = mismatch_expression(mu_hat, l, a, d, r, m);
        out.max_value = out.max_value.max(value);
        if value > abs_tol * (mu_hat * (d + r + m)).max(1.0) {
            out.violations.push(Violation {
                k: row.k,
                kind: ViolationKind::Mismatch,
                slack: value,
            });
        }
    }
    Ok(out)
}

/// `F(v̄_k) − F*` at a checkpoint `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErgodicPoint {
    pub k: usize,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvexCheck {
    pub energy0: f64,
    pub violations: Vec<Violation>,
    pub descent_ok: bool,
    pub sum_gap_ok: bool,
    pub best_rate_ok: bool,
    pub ergodic_ok: bool,
    pub max_slack: f64,
}

/// Checks the per-step energy descent, `Σ_{i<k} G_i ≤ 𝓔₀`,
/// `min_{i<k} G_i ≤ 𝓔₀/k` for every `k`, and `F(v̄_k) − F* ≤ 𝓔₀/k` at the
/// supplied checkpoints.
pub fn check_convex_descent(
    trace: &Trace,
    mu_hat: f64,
    a: f64,
    rel_tol: f64,
    ergodic: &[ErgodicPoint],
) -> Result<ConvexCheck> {
    if trace.len() < 2 {
        return Err(Error::Input(format!(
            "convex descent check needs at least 2 rows, got {}",
            trace.len()
        )));
    }
    let energy = energy_series(trace, mu_hat, a)?;
    let gaps: Vec<f64> = trace
        .rows
        .iter()
        .map(|r| field(r, r.gap_v, "gap_v"))
        .collect::<Result<_>>()?;
    let ds: Vec<f64> = trace
        .rows
        .iter()
        .map(|r| field(r, r.xv_dist_sq, "D"))
        .collect::<Result<_>>()?;
    let e0 = energy[0];
    let base_tol = rel_tol * e0.abs().max(1.0);
    let mut out = ConvexCheck {
        energy0: e0,
        max_slack: f64::NEG_INFINITY,
        ..Default::default()
    };
    for k in 0..energy.len() - 1 {
        let rhs = energy[k] - gaps[k] - mu_hat * (1.0 - a) / 2.0 * ds[k];
        let slack = energy[k + 1] - rhs;
        out.max_slack = out.max_slack.max(slack);
        if slack > rel_tol * energy[k].abs().max(1.0) {
            out.violations.push(Violation {
                k,
                kind: ViolationKind::ConvexDescent,
                slack,
            });
        }
    }
    let mut sum = 0.0;
    let mut best = f64::INFINITY;
    for k in 1..=gaps.len() {
        sum += gaps[k - 1];
        best = best.min(gaps[k - 1]);
        let tol = base_tol * k as f64;
        if sum > e0 + tol {
            out.violations.push(Violation {
                k,
                kind: ViolationKind::SumGap,
                slack: sum - e0,
            });
        }
        let bound = e0 / k as f64;
        if best > bound + base_tol {
            out.violations.push(Violation {
                k,
                kind: ViolationKind::BestRate,
                slack: best - bound,
            });
        }
    }
    for point in ergodic {
        if point.k == 0 {
            return Err(Error::Input("ergodic checkpoint k must be >= 1".into()));
        }
        let bound = e0 / point.k as f64;
        if point.gap > bound + base_tol {
            out.violations.push(Violation {
                k: point.k,
                kind: ViolationKind::ErgodicRate,
                slack: point.gap - bound,
            });
        }
    }
    let none_of = |kind| !out.violations.iter().any(|v| v.kind == kind);
    out.descent_ok = none_of(ViolationKind::ConvexDescent);
    out.sum_gap_ok = none_of(ViolationKind::SumGap);
    out.best_rate_ok = none_of(ViolationKind::BestRate);
    out.ergodic_ok = none_of(ViolationKind::ErgodicRate);
    Ok(out)
}

/// Agreement of `gap_x` and `gap_v` after a burn-in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapCoupling {
    /// Smallest `K₀` such that `|gap_x − gap_v| / max(gap_x, floor) ≤ rel`
    /// for every row from `K₀` on (equal to the row count if none).
    pub burn_in: usize,
    pub rows: usize,
    pub max_rel_after: f64,
}

pub fn gap_coupling(trace: &Trace, rel: f64, floor: f64) -> Result<GapCoupling> {
    let ratios: Vec<f64> = trace
        .rows
        .iter()
        .map(|r| {
            let gx = field(r, r.gap_x, "gap_x")?;
            let gv = field(r, r.gap_v, "gap_v")?;
            Ok((gx - gv).abs() / gx.max(floor))
        })
        .collect::<Result<_>>()?;
    let mut burn_in = ratios.len();
    let mut max_after: f64 = 0.0;
    for (k, &q) in ratios.iter().enumerate().rev() {
        if q > rel {
            break;
        }
        burn_in = k;
        max_after = max_after.max(q);
    }
    Ok(GapCoupling {
        burn_in,
        rows: ratios.len(),
        max_rel_after: max_after,
    })
}

/// Inputs of a full certificate run beyond the trace itself.
#[derive(Debug, Clone, PartialEq)]
pub struct CertifyInputs {
    pub a: f64,
    pub mu_hat: f64,
    pub l: f64,
    pub mu_f: f64,
    pub mu_big_f: f64,
    pub c_choice: CChoice,
    pub ergodic: Vec<ErgodicPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    /// `None` when `μ_f = μ_F = 0` and only the convex certificate applies.
    pub params: Option<LyapunovParams>,
    pub in_regime: bool,
    pub rows: usize,
    pub contraction: Option<ContractionCheck>,
    pub mismatch: MismatchCheck,
    pub convex: ConvexCheck,
}

impl CertificateReport {
    pub fn violations(&self) -> Vec<Violation> {
        let mut all = Vec::new();
        if let Some(c) = &self.contraction {
            all.extend(c.violations.iter().copied());
        }
        all.extend(self.mismatch.violations.iter().copied());
        all.extend(self.convex.violations.iter().copied());
        all.sort_by_key(|v| (v.k, v.kind.as_str()));
        all
    }

    pub fn passes(&self) -> bool {
        self.violations().is_empty()
    }

    /// `pass`, `fail`, or `outside theoretical regime` when `μ̂ < L`.
    pub fn status(&self) -> &'static str {
        if !self.in_regime {
            "outside theoretical regime"
        } else if self.passes() {
            "pass"
        } else {
            "fail"
        }
    }

    /// Flat `key=value` text.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        kv("status", self.status().to_string());
        kv("rows", self.rows.to_string());
        kv("in_regime", self.in_regime.to_string());
        if let Some(p) = &self.params {
            kv("a", fmt_f(p.a));
            kv("mu_hat", fmt_f(p.mu_hat));
            kv("L", fmt_f(p.l));
            kv("mu_f", fmt_f(p.mu_f));
            kv("mu_F", fmt_f(p.mu_big_f));
            kv("b", fmt_f(p.b));
            kv("beta", fmt_f(p.beta));
            kv("c", fmt_f(p.c));
            kv("c_lower", fmt_f(p.c_lower));
            kv("c_upper", fmt_f(p.c_upper));
            kv("theta", fmt_f(p.theta));
        }
        if let Some(c) = &self.contraction {
            kv("contraction_violations", c.violations.len().to_string());
            kv("contraction_max_slack", fmt_f(c.max_slack));
        }
        kv("mismatch_violations", self.mismatch.violations.len().to_string());
        kv("mismatch_max_value", fmt_f(self.mismatch.max_value));
        kv("energy0", fmt_f(self.convex.energy0));
        kv("convex_descent_ok", self.convex.descent_ok.to_string());
        kv("convex_sum_gap_ok", self.convex.sum_gap_ok.to_string());
        kv("convex_best_rate_ok", self.convex.best_rate_ok.to_string());
        kv("convex_ergodic_rate_ok", self.convex.ergodic_ok.to_string());
        kv("convex_max_slack", fmt_f(self.convex.max_slack));
        s
    }

    /// `k,kind,slack` rows for every violation.
    pub fn violations_csv(&self) -> String {
        let mut s = String::from("k,kind,slack\n");
        for v in self.violations() {
            let _ = writeln!(s, "{},{},{}", v.k, v.kind.as_str(), fmt_f(v.slack));
        }
        s
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

/// Runs every applicable check on a Prox-NAG-GS trace.
pub fn certify(trace: &Trace, inputs: &CertifyInputs) -> Result<CertificateReport> {
    let params = match compute_params(inputs.a, inputs.mu_hat, inputs.l, inputs.mu_f, inputs.mu_big_f, inputs.c_choice) {
        Ok(p) => Some(p),
        Err(Error::DegenerateInterval) => None,
        Err(e) => return Err(e),
    };
    let contraction = params
        .as_ref()
        .map(|p| check_contraction(trace, p, CONTRACTION_REL_TOL))
        .transpose()?;
    let mismatch = check_mismatch_absorption(trace, inputs.mu_hat, inputs.l, inputs.a, MISMATCH_ABS_TOL)?;
    let convex = check_convex_descent(trace, inputs.mu_hat, inputs.a, CONTRACTION_REL_TOL, &inputs.ergodic)?;
    Ok(CertificateReport {
        params,
        in_regime: inputs.mu_hat >= inputs.l,
        rows: trace.len(),
        contraction,
        mismatch,
        convex,
    })
}
