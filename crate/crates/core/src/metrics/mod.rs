//! Fidelity and privacy scoring of a synthetic table against a real one.
//!
//! [`evaluate`] runs the whole battery. Continuous columns get statistic
//! similarity, range coverage, boundary adherence, KS complement and CI
//! overlap; ordinal columns get category coverage, category adherence and
//! TV complement; every column pair gets correlation similarity; the table as
//! a whole gets new-row synthesis and a violation audit.

mod audit;
mod fidelity;
mod privacy;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, Dataset};
use crate::error::{Error, Result};

pub use audit::{violation_audit, ColumnViolations};
pub use fidelity::{
    boundary_adherence, category_adherence, category_coverage, ci_overlap_percent,
    correlation_similarity, correlation_similarity_from, ks_complement, ks_statistic,
    range_coverage, statistic_similarity, tv_complement,
};
pub use privacy::{new_row_synthesis, row_overlap, DEFAULT_TOL_REL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    StatisticSimilarity,
    RangeCoverage,
    BoundaryAdherence,
    #[serde(rename = "KSComplement")]
    KsComplement,
    CategoryCoverage,
    CategoryAdherence,
    #[serde(rename = "TVComplement")]
    TvComplement,
    CorrelationSimilarity,
    #[serde(rename = "CIOverlap")]
    CiOverlap,
    NewRowSynthesis,
}

impl Metric {
    /// Fidelity metrics in report order.
    pub const FIDELITY: [Metric; 8] = [
        Metric::StatisticSimilarity,
        Metric::RangeCoverage,
        Metric::BoundaryAdherence,
        Metric::KsComplement,
        Metric::CorrelationSimilarity,
        Metric::CategoryCoverage,
        Metric::CategoryAdherence,
        Metric::TvComplement,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Metric::StatisticSimilarity => "StatisticSimilarity",
            Metric::RangeCoverage => "RangeCoverage",
            Metric::BoundaryAdherence => "BoundaryAdherence",
            Metric::KsComplement => "KSComplement",
            Metric::CategoryCoverage => "CategoryCoverage",
            Metric::CategoryAdherence => "CategoryAdherence",
            Metric::TvComplement => "TVComplement",
            Metric::CorrelationSimilarity => "CorrelationSimilarity",
            Metric::CiOverlap => "95% CI Overlap",
            Metric::NewRowSynthesis => "NewRowSynthesis",
        }
    }

    /// Upper end of the value range: 100 for the CI overlap, 1 otherwise.
    pub fn scale(self) -> f64 {
        if self == Metric::CiOverlap {
            100.0
        } else {
            1.0
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Column(String),
    Pair(String, String),
    Table,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    pub metric: Metric,
    pub target: Target,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl MetricScore {
    fn new(metric: Metric, target: Target, value: f64) -> Result<Self> {
        if !(0.0..=metric.scale()).contains(&value) {
            return Err(Error::InvalidProfile(format!(
                "{metric} produced out-of-range value {value}"
            )));
        }
        Ok(MetricScore {
            metric,
            target,
            value,
            warnings: Vec::new(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    /// Sample SD; 0 for a single score.
    pub sd: f64,
    pub count: usize,
}

/// Mean and sample SD of the values, `None` when there are none.
pub fn aggregate(values: &[f64]) -> Option<Aggregate> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some(Aggregate {
        mean,
        sd,
        count: values.len(),
    })
}

pub fn aggregate_scores(scores: &[MetricScore]) -> Option<Aggregate> {
    aggregate(&scores.iter().map(|s| s.value).collect::<Vec<_>>())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: Metric,
    pub aggregate: Option<Aggregate>,
    pub scores: Vec<MetricScore>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl MetricSummary {
    fn new(metric: Metric, scores: Vec<MetricScore>, warnings: Vec<String>) -> Self {
        MetricSummary {
            metric,
            aggregate: aggregate_scores(&scores),
            scores,
            warnings,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub real_rows: usize,
    pub synthetic_rows: usize,
    /// Synthetic row count differs from the real one.
    pub amplified: bool,
    pub fidelity: Vec<MetricSummary>,
    pub ci_overlap: MetricSummary,
    pub new_row_synthesis: MetricScore,
    pub violations: Vec<ColumnViolations>,
}

impl MetricReport {
    pub fn summary(&self, metric: Metric) -> Option<&MetricSummary> {
        match metric {
            Metric::CiOverlap => Some(&self.ci_overlap),
            _ => self.fidelity.iter().find(|s| s.metric == metric),
        }
    }

    pub fn total_violations(&self) -> usize {
        self.violations.iter().map(ColumnViolations::total).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvaluateOptions {
    pub tol_rel: f64,
}

impl Default for EvaluateOptions {
    fn default() -> Self {
        EvaluateOptions {
            tol_rel: DEFAULT_TOL_REL,
        }
    }
}

fn check_schemas(real: &Dataset, synth: &Dataset) -> Result<()> {
    let (rs, ss) = (real.schema(), synth.schema());
    if rs.len() != ss.len() {
        return Err(Error::SchemaMismatch(format!(
            "{} real columns vs {} synthetic",
            rs.len(),
            ss.len()
        )));
    }
    for (a, b) in rs.columns().iter().zip(ss.columns()) {
        if a.name != b.name || a.kind != b.kind {
            return Err(Error::SchemaMismatch(format!(
                "column `{}` ({:?}) vs `{}` ({:?})",
                a.name, a.kind, b.name, b.kind
            )));
        }
    }
    Ok(())
}

type ColumnMetric = fn(&[f64], &[f64]) -> Result<f64>;

const CONTINUOUS: [(Metric, ColumnMetric); 4] = [
    (Metric::StatisticSimilarity, statistic_similarity),
    (Metric::RangeCoverage, range_coverage),
    (Metric::BoundaryAdherence, boundary_adherence),
    (Metric::KsComplement, ks_complement),
];

const ORDINAL: [(Metric, ColumnMetric); 3] = [
    (Metric::CategoryCoverage, category_coverage),
    (Metric::CategoryAdherence, category_adherence),
    (Metric::TvComplement, tv_complement),
];

fn column_scores(
    real: &Dataset,
    synth: &Dataset,
    kind: ColumnKind,
    metric: Metric,
    f: ColumnMetric,
) -> Result<Vec<MetricScore>> {
    real.iter_columns()
        .zip(synth.iter_columns())
        .filter(|((c, _), _)| c.kind == kind)
        .map(|((col, r), (_, s))| {
            MetricScore::new(metric, Target::Column(col.name.clone()), f(r, s)?)
        })
        .collect()
}

fn correlation_summary(real: &Dataset, synth: &Dataset) -> Result<MetricSummary> {
    let names: Vec<&str> = real.schema().names().collect();
    let mut scores = Vec::new();
    let mut warnings = Vec::new();
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            let (a, b) = (names[i], names[j]);
            match correlation_similarity(real, synth, a, b) {
                Ok(v) => scores.push(MetricScore::new(
                    Metric::CorrelationSimilarity,
                    Target::Pair(a.to_string(), b.to_string()),
                    v,
                )?),
                Err(Error::ZeroVariance(what)) => {
                    warnings.push(format!("{what} excluded: zero variance"))
                }
                Err(Error::TooFewRows(n)) => {
                    warnings.push(format!("pair ({a}, {b}) excluded: {n} row(s)"))
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(MetricSummary::new(
        Metric::CorrelationSimilarity,
        scores,
        warnings,
    ))
}

fn ci_summary(real: &Dataset, synth: &Dataset) -> Result<MetricSummary> {
    let mut scores = Vec::new();
    let mut warnings = Vec::new();
    for ((col, r), (_, s)) in real
        .iter_columns()
        .zip(synth.iter_columns())
        .filter(|((c, _), _)| c.kind == ColumnKind::Continuous)
    {
        match ci_overlap_percent(r, s) {
            Ok(v) => scores.push(MetricScore::new(
                Metric::CiOverlap,
                Target::Column(col.name.clone()),
                v,
            )?),
            Err(Error::TooFewRows(n)) => {
                warnings.push(format!("`{}` skipped: {n} row(s)", col.name))
            }
            Err(e) => return Err(e),
        }
    }
    Ok(MetricSummary::new(Metric::CiOverlap, scores, warnings))
}

/// Scores `synth` against `real`. Both must share column names and kinds;
/// the violation audit uses the real dataset's schema. Metrics with no
/// applicable column are left out of `fidelity`.
pub fn evaluate(real: &Dataset, synth: &Dataset, opts: &EvaluateOptions) -> Result<MetricReport> {
    check_schemas(real, synth)?;
    if real.n_rows() == 0 {
        return Err(Error::EmptyDataset("real"));
    }
    if synth.n_rows() == 0 {
        return Err(Error::EmptyDataset("synthetic"));
    }

    let mut fidelity = Vec::new();
    for metric in Metric::FIDELITY {
        let column_metric = CONTINUOUS
            .iter()
            .map(|&(m, f)| (m, f, ColumnKind::Continuous))
            .chain(ORDINAL.iter().map(|&(m, f)| (m, f, ColumnKind::Ordinal)))
            .find(|(m, _, _)| *m == metric);
        match column_metric {
            Some((_, f, kind)) => {
                let scores = column_scores(real, synth, kind, metric, f)?;
                if !scores.is_empty() {
                    fidelity.push(MetricSummary::new(metric, scores, Vec::new()));
                }
            }
            None if real.n_cols() >= 2 => fidelity.push(correlation_summary(real, synth)?),
            None => {}
        }
    }

    Ok(MetricReport {
        real_rows: real.n_rows(),
        synthetic_rows: synth.n_rows(),
        amplified: real.n_rows() != synth.n_rows(),
        fidelity,
        ci_overlap: ci_summary(real, synth)?,
        new_row_synthesis: MetricScore::new(
            Metric::NewRowSynthesis,
            Target::Table,
            new_row_synthesis(real, synth, opts.tol_rel)?,
        )?,
        violations: violation_audit(synth, real.schema())?,
    })
}
