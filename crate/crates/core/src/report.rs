//! Human-readable report tables and plot-ready data exports.

use serde::Serialize;

use crate::data::{ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::metrics::{ci_overlap_percent, Aggregate, Metric, MetricReport};
use crate::profile::{confidence_interval, describe, level_frequencies, pearson, round_half_away};

/// A report with the column heading it is shown under.
#[derive(Clone, Debug, Serialize)]
pub struct LabeledReport {
    pub label: String,
    pub report: MetricReport,
}

fn decimals(metric: Metric) -> u32 {
    if metric == Metric::CiOverlap {
        2
    } else {
        3
    }
}

fn format_aggregate(metric: Metric, agg: &Aggregate) -> String {
    let d = decimals(metric) as usize;
    let unit = if metric == Metric::CiOverlap { "%" } else { "" };
    let mean = round_half_away(agg.mean, d as u32);
    if agg.count == 1 {
        format!("{mean:.d$}{unit}")
    } else {
        let sd = round_half_away(agg.sd, d as u32);
        format!("{mean:.d$} ± {sd:.d$}{unit}")
    }
}

fn cell_mean(metric: Metric, report: &MetricReport) -> Option<Aggregate> {
    match metric {
        Metric::CiOverlap if report.amplified => None,
        Metric::NewRowSynthesis => Some(Aggregate {
            mean: report.new_row_synthesis.value,
            sd: 0.0,
            count: 1,
        }),
        _ => report.summary(metric).and_then(|s| s.aggregate),
    }
}

/// Metric-by-run markdown table. Each cell holds `mean ± sd` over the
/// per-column (or per-pair) scores, or the bare value when there is only
/// one. The best displayed value of each metric is bolded when at least two
/// runs have one. Cells with no applicable score show `-`, and so does CI
/// overlap for amplified runs. Rows with no value in any run are left out,
/// except CI overlap, which is always listed.
pub fn markdown_table(runs: &[LabeledReport]) -> String {
    let mut out = String::from("| Metric |");
    for run in runs {
        out.push_str(&format!(" {} |", run.label));
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(runs.len()));
    out.push('\n');

    let blank = " |".repeat(runs.len());
    let sections = [
        (
            "Fidelity",
            Metric::FIDELITY
                .iter()
                .copied()
                .chain([Metric::CiOverlap])
                .collect::<Vec<_>>(),
        ),
        ("Privacy", vec![Metric::NewRowSynthesis]),
    ];
    for (title, metrics) in sections {
        out.push_str(&format!("| **{title}** |{blank}\n"));
        for metric in metrics {
            render_row(&mut out, metric, runs);
        }
    }
    out.push_str("| Rows |");
    for run in runs {
        out.push_str(&format!(" {} |", run.report.synthetic_rows));
    }
    out.push_str("\n| Constraint violations |");
    for run in runs {
        out.push_str(&format!(" {} |", run.report.total_violations()));
    }
    out.push('\n');
    out
}

fn render_row(out: &mut String, metric: Metric, runs: &[LabeledReport]) {
    let cells: Vec<Option<Aggregate>> = runs.iter().map(|r| cell_mean(metric, &r.report)).collect();
    if metric != Metric::CiOverlap && cells.iter().all(Option::is_none) {
        return;
    }
    let shown: Vec<Option<f64>> = cells
        .iter()
        .map(|c| c.map(|a| round_half_away(a.mean, decimals(metric))))
        .collect();
    let best = shown
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let bold = shown.iter().flatten().count() >= 2;
    out.push_str(&format!("| {} |", metric.label()));
    for (cell, value) in cells.iter().zip(&shown) {
        let text = match cell {
            None => "-".to_string(),
            Some(agg) if bold && *value == Some(best) => {
                format!("**{}**", format_aggregate(metric, agg))
            }
            Some(agg) => format_aggregate(metric, agg),
        };
        out.push_str(&format!(" {text} |"));
    }
    out.push('\n');
}

fn csv_string(rows: Vec<Vec<String>>) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    for row in rows {
        wtr.write_record(&row)?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::Io {
        path: "<memory>".into(),
        source: e.into_error(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Full symmetric Pearson matrix. Pairs involving a constant column are
/// `None`; the diagonal is 1.
#[allow(clippy::needless_range_loop)]
pub fn correlation_matrix(ds: &Dataset) -> Vec<Vec<Option<f64>>> {
    let k = ds.n_cols();
    let mut m = vec![vec![None; k]; k];
    for i in 0..k {
        for j in i..k {
            let r = if i == j {
                Some(1.0)
            } else {
                pearson(ds.column(i), ds.column(j)).ok()
            };
            m[i][j] = r;
            m[j][i] = r;
        }
    }
    m
}

/// [`correlation_matrix`] as CSV with a leading name column; `None` entries
/// are written as empty cells.
pub fn heatmap_csv(ds: &Dataset) -> Result<String> {
    let names: Vec<String> = ds.schema().names().map(str::to_string).collect();
    let mut rows = vec![std::iter::once(String::new())
        .chain(names.iter().cloned())
        .collect()];
    for (name, row) in names.iter().zip(correlation_matrix(ds)) {
        let mut line = vec![name.clone()];
        line.extend(
            row.into_iter()
                .map(|r| r.map(|v| v.to_string()).unwrap_or_default()),
        );
        rows.push(line);
    }
    csv_string(rows)
}

/// Per continuous column: mean and 95% CI bounds for every dataset.
pub fn ci_table_csv(datasets: &[(&str, &Dataset)]) -> Result<String> {
    let mut rows = vec![["dataset", "column", "mean", "lo", "hi"]
        .map(String::from)
        .to_vec()];
    for (label, ds) in datasets {
        for (col, values) in ds.iter_columns() {
            if col.kind != ColumnKind::Continuous {
                continue;
            }
            let (mean, ..) = describe(values);
            let (lo, hi) = match confidence_interval(values, 0.95) {
                Ok(ci) => (ci.lo.to_string(), ci.hi.to_string()),
                Err(_) => (String::new(), String::new()),
            };
            rows.push(vec![
                label.to_string(),
                col.name.clone(),
                mean.to_string(),
                lo,
                hi,
            ]);
        }
    }
    csv_string(rows)
}

/// CI overlap percentages of each synthetic dataset against `real`.
/// Amplified datasets (row count differing from the real one) are skipped.
pub fn ci_overlap_csv(real: &Dataset, synths: &[(&str, &Dataset)]) -> Result<String> {
    let mut rows = vec![["dataset", "column", "overlap_percent"]
        .map(String::from)
        .to_vec()];
    for (label, ds) in synths {
        if ds.n_rows() != real.n_rows() {
            continue;
        }
        for ((col, r), (_, s)) in real.iter_columns().zip(ds.iter_columns()) {
            if col.kind != ColumnKind::Continuous {
                continue;
            }
            let value = ci_overlap_percent(r, s)
                .map(|v| v.to_string())
                .unwrap_or_default();
            rows.push(vec![label.to_string(), col.name.clone(), value]);
        }
    }
    csv_string(rows)
}

/// Level counts and proportions of every ordinal column, including declared
/// levels that never occur and observed levels outside the declared set.
pub fn ordinal_frequencies_csv(datasets: &[(&str, &Dataset)]) -> Result<String> {
    let mut rows = vec![["dataset", "column", "level", "count", "proportion"]
        .map(String::from)
        .to_vec()];
    for (label, ds) in datasets {
        for (col, values) in ds.iter_columns() {
            if col.kind != ColumnKind::Ordinal {
                continue;
            }
            for f in level_frequencies(col.levels(), values) {
                rows.push(vec![
                    label.to_string(),
                    col.name.clone(),
                    f.level.to_string(),
                    f.count.to_string(),
                    f.proportion.to_string(),
                ]);
            }
        }
    }
    csv_string(rows)
}

/// Long-format values (`dataset,column,value`) for distribution plots.
pub fn long_values_csv(datasets: &[(&str, &Dataset)]) -> Result<String> {
    let mut rows = vec![["dataset", "column", "value"].map(String::from).to_vec()];
    for (label, ds) in datasets {
        for (col, values) in ds.iter_columns() {
            for v in values {
                rows.push(vec![label.to_string(), col.name.clone(), v.to_string()]);
            }
        }
    }
    csv_string(rows)
}
