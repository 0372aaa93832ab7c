//! Aligned text tables from summary rows.

use crate::summary::{Stat, SummaryRow};

/// Which way is better for a column, if either.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Better {
    Lower,
    Higher,
    Neither,
}

struct Column {
    title: &'static str,
    better: Better,
    precision: usize,
    scientific: bool,
    get: fn(&SummaryRow) -> Option<Stat>,
}

fn fmt_num(v: f64, precision: usize, scientific: bool) -> String {
    if scientific {
        format!("{v:.precision$e}")
    } else {
        format!("{v:.precision$}")
    }
}

/// `mean ± std`, with the `±` part dropped when the standard deviation is
/// missing (one seed) or exactly zero.
pub fn format_stat(s: Option<Stat>, precision: usize, scientific: bool) -> String {
    match s {
        None => "-".to_string(),
        Some(Stat { mean, std }) => match std {
            Some(sd) if sd != 0.0 => format!(
                "{} ± {}",
                fmt_num(mean, precision, scientific),
                fmt_num(sd, precision, scientific)
            ),
            _ => fmt_num(mean, precision, scientific),
        },
    }
}

/// The fourth metric column: active groups, else test accuracy, else
/// sparsity, whichever the rows carry first.
fn extra_column(rows: &[SummaryRow]) -> Column {
    if rows.iter().any(|r| r.active_groups.is_some()) {
        Column {
            title: "Active groups",
            better: Better::Neither,
            precision: 1,
            scientific: false,
            get: |r| r.active_groups,
        }
    } else if rows.iter().any(|r| r.test_accuracy.is_some()) {
        Column {
            title: "Test acc.",
            better: Better::Higher,
            precision: 4,
            scientific: false,
            get: |r| r.test_accuracy,
        }
    } else {
        Column {
            title: "Sparsity",
            better: Better::Neither,
            precision: 4,
            scientific: false,
            get: |r| r.sparsity,
        }
    }
}

/// One row per method with final objective, iterations to the gap, time
/// and one domain column. The best mean of each directed column is marked
/// with `*`. Returns the table and any warnings.
pub fn render_table(rows: &[SummaryRow]) -> (String, Vec<String>) {
    let columns = [
        Column {
            title: "Final obj.",
            better: Better::Lower,
            precision: 8,
            scientific: false,
            get: |r| Some(r.final_obj),
        },
        Column {
            title: "Iters to gap",
            better: Better::Lower,
            precision: 1,
            scientific: false,
            get: |r| r.iterations,
        },
        Column {
            title: "Time (s)",
            better: Better::Lower,
            precision: 2,
            scientific: true,
            get: |r| Some(r.time),
        },
        extra_column(rows),
    ];

    let mut warnings = Vec::new();
    if let Some(first) = rows.first() {
        if rows.iter().any(|r| r.seeds != first.seeds) {
            let counts: Vec<String> = rows.iter().map(|r| format!("{}={}", r.method, r.seeds)).collect();
            warnings.push(format!("inconsistent seed counts ({})", counts.join(", ")));
        }
    }

    let mut cells: Vec<Vec<String>> = vec![std::iter::once("Method".to_string())
        .chain(columns.iter().map(|c| c.title.to_string()))
        .collect()];
    for r in rows {
        let mut line = vec![r.method.clone()];
        for c in &columns {
            line.push(format_stat((c.get)(r), c.precision, c.scientific));
        }
        cells.push(line);
    }
    for (j, c) in columns.iter().enumerate() {
        let means: Vec<Option<f64>> = rows.iter().map(|r| (c.get)(r).map(|s| s.mean)).collect();
        let best = match c.better {
            Better::Lower => means.iter().flatten().copied().reduce(f64::min),
            Better::Higher => means.iter().flatten().copied().reduce(f64::max),
            Better::Neither => None,
        };
        if let Some(best) = best {
            for (i, m) in means.iter().enumerate() {
                if *m == Some(best) {
                    cells[i + 1][j + 1].push_str(" *");
                }
            }
        }
    }

    let widths: Vec<usize> = (0..cells[0].len())
        .map(|j| cells.iter().map(|row| row[j].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in cells.iter().enumerate() {
        let padded: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:<w$}"))
            .collect();
        out.push_str(padded.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            let total = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
    (out, warnings)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: &str, seeds: usize, obj: f64, iters: f64) -> SummaryRow {
        SummaryRow {
            method: method.into(),
            seeds,
            final_obj: Stat { mean: obj, std: Some(0.0) },
            iterations: Some(Stat { mean: iters, std: Some(1.5) }),
            not_reached: 0,
            time: Stat { mean: 0.01, std: None },
            active_groups: None,
            sparsity: Some(Stat { mean: 0.3, std: Some(0.1) }),
            test_accuracy: None,
        }
    }

    #[test]
    fn two_methods_give_two_rows_and_four_metrics() {
        let (t, w) = render_table(&[row("ista", 5, 1.0, 90.0), row("prox-naggs", 5, 1.0, 28.0)]);
        assert!(w.is_empty());
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("Method"));
        for title in ["Final obj.", "Iters to gap", "Time (s)", "Sparsity"] {
            assert!(lines[0].contains(title));
        }
        assert!(lines[3].contains("28.0 ± 1.5 *"));
        assert!(!lines[2].contains("90.0 ± 1.5 *"));
    }

    #[test]
    fn zero_or_missing_std_is_suppressed() {
        assert_eq!(format_stat(Some(Stat { mean: 2.0, std: None }), 1, false), "2.0");
        assert_eq!(format_stat(Some(Stat { mean: 2.0, std: Some(0.0) }), 1, false), "2.0");
        assert_eq!(format_stat(Some(Stat { mean: 2.0, std: Some(0.5) }), 1, false), "2.0 ± 0.5");
    }

    #[test]
    fn inconsistent_seed_counts_warn() {
        let (_, w) = render_table(&[row("ista", 5, 1.0, 90.0), row("fista", 4, 1.0, 50.0)]);
        assert_eq!(w.len(), 1);
    }
}
