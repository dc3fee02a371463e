//! Univariate and bivariate summaries of a dataset.
//!
//! A [`DatasetProfile`] is the information payload of a generation prompt and
//! the parameter set of the local sampler. It serializes to JSON with a fixed
//! key order, so a saved profile can drive prompts and sampling without the
//! raw data.

use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::data::{ColumnKind, Dataset};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelFrequency {
    pub level: f64,
    pub count: usize,
    pub proportion: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub name: String,
    pub kind: ColumnKind,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub ci95: Interval,
    /// Level frequencies, present for ordinal columns only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<LevelFrequency>>,
}

impl ColumnStats {
    /// Levels that actually occur in the data.
    pub fn observed_levels(&self) -> Vec<f64> {
        self.levels
            .iter()
            .flatten()
            .filter(|f| f.count > 0)
            .map(|f| f.level)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub col_a: String,
    pub col_b: String,
    pub r: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetProfile {
    pub n_rows: usize,
    pub stats: Vec<ColumnStats>,
    /// Upper-triangle pairs in schema order. Pairs involving a zero-variance
    /// column are absent.
    pub correlations: Vec<CorrelationEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl DatasetProfile {
    pub fn column(&self, name: &str) -> Option<&ColumnStats> {
        self.stats.iter().find(|s| s.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.stats.iter().map(|s| s.name.as_str())
    }

    /// Symmetric lookup. `r(x, x)` is 1; undefined pairs yield `None`.
    pub fn r(&self, a: &str, b: &str) -> Option<f64> {
        if a == b {
            return self.column(a).map(|_| 1.0);
        }
        self.correlations
            .iter()
            .find(|e| (e.col_a == a && e.col_b == b) || (e.col_a == b && e.col_b == a))
            .map(|e| e.r)
    }

    /// Full k x k matrix in column order with unit diagonal.
    pub fn correlation_matrix(&self) -> Vec<Vec<Option<f64>>> {
        let names: Vec<&str> = self.names().collect();
        names
            .iter()
            .map(|a| names.iter().map(|b| self.r(a, b)).collect())
            .collect()
    }

    /// Profile restricted to the named columns, preserving order.
    pub fn restrict(&self, keep: &[&str]) -> DatasetProfile {
        DatasetProfile {
            n_rows: self.n_rows,
            stats: self
                .stats
                .iter()
                .filter(|s| keep.contains(&s.name.as_str()))
                .cloned()
                .collect(),
            correlations: self
                .correlations
                .iter()
                .filter(|e| keep.contains(&e.col_a.as_str()) && keep.contains(&e.col_b.as_str()))
                .cloned()
                .collect(),
            warnings: self
                .warnings
                .iter()
                .filter(|w| keep.iter().any(|k| w.contains(&format!("`{k}`"))))
                .cloned()
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Mean, sample SD, min and max. A constant column gets an SD of exactly 0.
pub(crate) fn describe(values: &[f64]) -> (f64, f64, f64, f64) {
    let n = values.len() as f64;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return (min, 0.0, min, max);
    }
    // Summing in sorted order makes every statistic independent of row order.
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = (sorted.iter().sum::<f64>() / n).clamp(min, max);
    let ss: f64 = sorted.iter().map(|v| (v - mean).powi(2)).sum();
    let sd = if values.len() > 1 {
        (ss / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd, min, max)
}

fn has_variance(values: &[f64]) -> bool {
    values.windows(2).any(|w| w[0] != w[1])
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::TooFewRows(x.len()));
    }
    if !has_variance(x) {
        return Err(Error::ZeroVariance("x".into()));
    }
    if !has_variance(y) {
        return Err(Error::ZeroVariance("y".into()));
    }
    // Every sum runs over sorted terms, so the result depends neither on row
    // order nor on which argument comes first.
    fn sorted_sum(mut terms: Vec<f64>) -> f64 {
        terms.sort_by(f64::total_cmp);
        terms.iter().sum()
    }
    let n = x.len() as f64;
    let mx = sorted_sum(x.to_vec()) / n;
    let my = sorted_sum(y.to_vec()) / n;
    let dx: Vec<f64> = x.iter().map(|v| v - mx).collect();
    let dy: Vec<f64> = y.iter().map(|v| v - my).collect();
    let sxy = sorted_sum(dx.iter().zip(&dy).map(|(a, b)| a * b).collect());
    let sxx = sorted_sum(dx.iter().map(|a| a * a).collect());
    let syy = sorted_sum(dy.iter().map(|b| b * b).collect());
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Two-sided Student-t quantile `t(df, 1 - (1 - level) / 2)`.
pub(crate) fn t_critical(df: f64, level: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .expect("df is positive")
        .inverse_cdf(1.0 - (1.0 - level) / 2.0)
}

/// `mean ± t(n-1) · sd / √n`.
pub fn confidence_interval(values: &[f64], level: f64) -> Result<Interval> {
    if values.len() < 2 {
        return Err(Error::TooFewRows(values.len()));
    }
    let (mean, sd, _, _) = describe(values);
    if !sd.is_finite() {
        return Err(Error::InvalidProfile(
            "non-finite standard deviation".into(),
        ));
    }
    let half = t_critical(values.len() as f64 - 1.0, level) * sd / (values.len() as f64).sqrt();
    Ok(Interval {
        lo: mean - half,
        hi: mean + half,
    })
}

pub fn profile(ds: &Dataset) -> Result<DatasetProfile> {
    let n = ds.n_rows();
    if n < 2 {
        return Err(Error::TooFewRows(n));
    }
    let mut warnings = Vec::new();
    let mut stats = Vec::with_capacity(ds.n_cols());
    for (col, values) in ds.iter_columns() {
        let (mean, sd, min, max) = describe(values);
        if sd == 0.0 {
            warnings.push(format!(
                "column `{}` has zero variance; its correlations are excluded",
                col.name
            ));
        }
        let levels = col
            .is_ordinal()
            .then(|| level_frequencies(col.levels(), values));
        stats.push(ColumnStats {
            name: col.name.clone(),
            kind: col.kind,
            n,
            mean,
            sd,
            min,
            max,
            ci95: confidence_interval(values, 0.95)?,
            levels,
        });
    }

    let mut correlations = Vec::new();
    for i in 0..ds.n_cols() {
        for j in i + 1..ds.n_cols() {
            if let Ok(r) = pearson(ds.column(i), ds.column(j)) {
                correlations.push(CorrelationEntry {
                    col_a: stats[i].name.clone(),
                    col_b: stats[j].name.clone(),
                    r,
                });
            }
        }
    }
    Ok(DatasetProfile {
        n_rows: n,
        stats,
        correlations,
        warnings,
    })
}

/// Counts for every declared level, followed by any undeclared values seen.
pub(crate) fn level_frequencies(declared: &[f64], values: &[f64]) -> Vec<LevelFrequency> {
    let mut levels: Vec<f64> = declared.to_vec();
    let mut extra: Vec<f64> = values
        .iter()
        .copied()
        .filter(|v| !declared.contains(v))
        .collect();
    extra.sort_by(f64::total_cmp);
    extra.dedup();
    levels.extend(extra);
    let total = values.len().max(1) as f64;
    levels
        .into_iter()
        .map(|level| {
            let count = values.iter().filter(|&&v| v == level).count();
            LevelFrequency {
                level,
                count,
                proportion: count as f64 / total,
            }
        })
        .collect()
}

/// Pairs with `|r| >= threshold`, in schema order. `include_all` bypasses
/// the filter.
pub fn significant_pairs(
    p: &DatasetProfile,
    threshold: f64,
    include_all: bool,
) -> Vec<CorrelationEntry> {
    p.correlations
        .iter()
        .filter(|e| include_all || e.r.abs() >= threshold)
        .cloned()
        .collect()
}

/// Rounds half away from zero at `decimals` places.
///
/// Rounding works on the shortest decimal representation of `x`, so
/// `-0.1175` becomes `-0.118` even though the nearest `f64` lies slightly
/// above the midpoint.
pub fn round_half_away(x: f64, decimals: u32) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    let repr = format!("{:e}", x.abs());
    let (mantissa, exp) = repr
        .split_once('e')
        .expect("LowerExp always has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let digits: Vec<u8> = mantissa
        .bytes()
        .filter(u8::is_ascii_digit)
        .map(|b| b - b'0')
        .collect();

    let keep = exp + 1 + decimals as i32;
    if keep < 0 {
        return 0.0;
    }
    let keep = keep as usize;
    if keep >= digits.len() {
        return x;
    }
    let mut scaled: u128 = digits[..keep]
        .iter()
        .fold(0, |acc, &d| acc * 10 + d as u128);
    if digits[keep] >= 5 {
        scaled += 1;
    }
    let sign = if x < 0.0 { "-" } else { "" };
    format!("{sign}{scaled}e-{decimals}")
        .parse()
        .expect("well-formed float literal")
}

pub fn is_rounded(x: f64, decimals: u32) -> bool {
    round_half_away(x, decimals) == x
}

/// Every numeric field of the profile rounded to `decimals` places.
pub fn round_profile(p: &DatasetProfile, decimals: u32) -> DatasetProfile {
    let r = |x: f64| round_half_away(x, decimals);
    DatasetProfile {
        n_rows: p.n_rows,
        stats: p
            .stats
            .iter()
            .map(|s| ColumnStats {
                name: s.name.clone(),
                kind: s.kind,
                n: s.n,
                mean: r(s.mean),
                sd: r(s.sd),
                min: r(s.min),
                max: r(s.max),
                ci95: Interval {
                    lo: r(s.ci95.lo),
                    hi: r(s.ci95.hi),
                },
                levels: s.levels.as_ref().map(|ls| {
                    ls.iter()
                        .map(|f| LevelFrequency {
                            level: r(f.level),
                            count: f.count,
                            proportion: r(f.proportion),
                        })
                        .collect()
                }),
            })
            .collect(),
        correlations: p
            .correlations
            .iter()
            .map(|e| CorrelationEntry {
                col_a: e.col_a.clone(),
                col_b: e.col_b.clone(),
                r: r(e.r),
            })
            .collect(),
        warnings: p.warnings.clone(),
    }
}

/// Every numeric value in the profile, in a fixed order.
pub(crate) fn numeric_fields(p: &DatasetProfile) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    for s in &p.stats {
        for (field, v) in [
            ("mean", s.mean),
            ("sd", s.sd),
            ("min", s.min),
            ("max", s.max),
            ("ci95.lo", s.ci95.lo),
            ("ci95.hi", s.ci95.hi),
        ] {
            out.push((format!("{}.{field}", s.name), v));
        }
        for f in s.levels.iter().flatten() {
            out.push((format!("{}.level", s.name), f.level));
            out.push((format!("{}.proportion", s.name), f.proportion));
        }
    }
    for e in &p.correlations {
        out.push((format!("r({},{})", e.col_a, e.col_b), e.r));
    }
    out
}
