//! Per-seed run records and their aggregation over seeds.

use std::fmt::Write as _;

use proxnag_core::io::format_real;
use proxnag_core::{Error, Result};

use crate::runner::SeedRun;

pub const RUNS_HEADER: &str = "method,seed,final_obj,iterations,reached,wall_s,active_groups,sparsity,test_accuracy";
pub const SUMMARY_HEADER: &str = "method,seeds,final_obj_mean,final_obj_std,iters_mean,iters_std,not_reached,\
time_mean,time_std,active_groups_mean,active_groups_std,sparsity_mean,sparsity_std,test_accuracy_mean,test_accuracy_std";

/// Mean and sample standard deviation (`None` with fewer than two values).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: Option<f64>,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.len() > 1)
            .then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
        Some(Stat { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub seeds: usize,
    pub final_obj: Stat,
    pub iterations: Option<Stat>,
    pub not_reached: usize,
    pub time: Stat,
    pub active_groups: Option<Stat>,
    pub sparsity: Option<Stat>,
    pub test_accuracy: Option<Stat>,
}

fn collect<T>(runs: &[&SeedRun], f: impl Fn(&SeedRun) -> Option<T>) -> Option<Vec<T>> {
    runs.iter().map(|r| f(r)).collect()
}

/// Aggregates the runs of one method over exactly the seeds present.
pub fn summarize(method: &str, runs: &[&SeedRun]) -> Result<SummaryRow> {
    if runs.is_empty() {
        return Err(Error::Input(format!("no runs to summarize for {method}")));
    }
    let stat = |v: Option<Vec<f64>>| v.and_then(|v| Stat::of(&v));
    Ok(SummaryRow {
        method: method.to_string(),
        seeds: runs.len(),
        final_obj: Stat::of(&runs.iter().map(|r| r.final_obj).collect::<Vec<_>>()).expect("nonempty"),
        iterations: stat(collect(runs, |r| r.iterations.map(|k| k as f64))),
        not_reached: runs.iter().filter(|r| r.iterations.is_some() && !r.reached).count(),
        time: Stat::of(&runs.iter().map(|r| r.wall_s).collect::<Vec<_>>()).expect("nonempty"),
        active_groups: stat(collect(runs, |r| r.active_groups.as_ref().map(|g| g.len() as f64))),
        sparsity: Stat::of(&runs.iter().map(|r| r.sparsity).collect::<Vec<_>>()),
        test_accuracy: stat(collect(runs, |r| r.test_accuracy)),
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(format_real).unwrap_or_default()
}

fn stat_fields(s: Option<Stat>) -> String {
    match s {
        Some(s) => format!("{},{}", format_real(s.mean), opt(s.std)),
        None => ",".to_string(),
    }
}

pub fn runs_csv(runs: &[SeedRun]) -> String {
    let mut s = String::from(RUNS_HEADER);
    s.push('\n');
    for r in runs {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.solver,
            r.seed,
            format_real(r.final_obj),
            r.iterations.map(|k| k.to_string()).unwrap_or_default(),
            if r.iterations.is_none() {
                String::new()
            } else if r.reached {
                "true".into()
            } else {
                "not-reached".into()
            },
            format_real(r.wall_s),
            r.active_groups
                .as_ref()
                .map(|g| g.iter().map(usize::to_string).collect::<Vec<_>>().join(";"))
                .unwrap_or_default(),
            format_real(r.sparsity),
            opt(r.test_accuracy),
        );
    }
    s
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.method,
            r.seeds,
            stat_fields(Some(r.final_obj)),
            stat_fields(r.iterations),
            r.not_reached,
            stat_fields(Some(r.time)),
            stat_fields(r.active_groups),
            stat_fields(r.sparsity),
            stat_fields(r.test_accuracy),
        );
    }
    s
}

fn parse_opt(field: &str, line: usize) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse::<f64>()
        .map(Some)
        .map_err(|_| Error::ParseAtLine {
            context: "summary csv",
            line,
            msg: format!("'{field}' is not a number"),
        })
}

fn parse_stat(mean: &str, std: &str, line: usize) -> Result<Option<Stat>> {
    Ok(parse_opt(mean, line)?.map(|mean| Stat { mean, std: None }).map(|mut s| {
        s.std = std.parse().ok();
        s
    }))
}

pub fn parse_summary_csv(text: &str) -> Result<Vec<SummaryRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == SUMMARY_HEADER => {}
        _ => {
            return Err(Error::ParseAtLine {
                context: "summary csv",
                line: 1,
                msg: "unexpected or missing header".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, raw) in lines {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = raw.split(',').collect();
        if f.len() != 15 {
            return Err(Error::ParseAtLine {
                context: "summary csv",
                line,
                msg: format!("expected 15 fields, found {}", f.len()),
            });
        }
        let int = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::ParseAtLine {
                context: "summary csv",
                line,
                msg: format!("'{s}' is not a count"),
            })
        };
        let required = |s: Option<Stat>| {
            s.ok_or_else(|| Error::ParseAtLine {
                context: "summary csv",
                line,
                msg: "missing required value".into(),
            })
        };
        rows.push(SummaryRow {
            method: f[0].to_string(),
            seeds: int(f[1])?,
            final_obj: required(parse_stat(f[2], f[3], line)?)?,
            iterations: parse_stat(f[4], f[5], line)?,
            not_reached: int(f[6])?,
            time: required(parse_stat(f[7], f[8], line)?)?,
            active_groups: parse_stat(f[9], f[10], line)?,
            sparsity: parse_stat(f[11], f[12], line)?,
            test_accuracy: parse_stat(f[13], f[14], line)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stat_examples() {
        let s = Stat::of(&[1.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert!((s.std.unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(Stat::of(&[4.0]).unwrap().std, None);
        assert!(Stat::of(&[]).is_none());
    }

    #[test]
    fn summary_round_trip() {
        let row = SummaryRow {
            method: "ista".into(),
            seeds: 2,
            final_obj: Stat { mean: 1.5, std: Some(0.25) },
            iterations: Some(Stat { mean: 10.0, std: Some(1.0) }),
            not_reached: 0,
            time: Stat { mean: 0.01, std: None },
            active_groups: None,
            sparsity: Some(Stat { mean: 0.5, std: Some(0.0) }),
            test_accuracy: None,
        };
        let text = summary_csv(std::slice::from_ref(&row));
        assert_eq!(parse_summary_csv(&text).unwrap(), vec![row]);
        assert!(parse_summary_csv("bad\n").is_err());
    }
}
