//! Column- and pair-level fidelity scores. Every score lies in `[0, 1]`
//! except the CI overlap, which is a percentage.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::profile::{confidence_interval, describe, pearson};

fn nonempty(real: &[f64], synth: &[f64]) -> Result<()> {
    if real.is_empty() {
        return Err(Error::EmptyDataset("real"));
    }
    if synth.is_empty() {
        return Err(Error::EmptyDataset("synthetic"));
    }
    Ok(())
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let (_, _, min, max) = describe(values);
    (min, max)
}

fn distinct(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// `1 - |mean_s - mean_r| / (max_r - min_r)`, clipped to `[0, 1]`.
pub fn statistic_similarity(real: &[f64], synth: &[f64]) -> Result<f64> {
    nonempty(real, synth)?;
    let (mean_r, _, min_r, max_r) = describe(real);
    let (mean_s, _, _, _) = describe(synth);
    let range = max_r - min_r;
    if range == 0.0 {
        return Ok(if mean_s == mean_r { 1.0 } else { 0.0 });
    }
    Ok((1.0 - (mean_s - mean_r).abs() / range).clamp(0.0, 1.0))
}

/// One minus the fractions of the real range left uncovered below and above
/// the synthetic range, floored at 0.
pub fn range_coverage(real: &[f64], synth: &[f64]) -> Result<f64> {
    nonempty(real, synth)?;
    let (min_r, max_r) = bounds(real);
    let range = max_r - min_r;
    if range == 0.0 {
        return Ok(if synth.contains(&min_r) { 1.0 } else { 0.0 });
    }
    let (min_s, max_s) = bounds(synth);
    let below = ((min_s - min_r) / range).max(0.0);
    let above = ((max_r - max_s) / range).max(0.0);
    Ok((1.0 - (below + above)).clamp(0.0, 1.0))
}

/// Fraction of synthetic values inside `[min_r, max_r]`.
pub fn boundary_adherence(real: &[f64], synth: &[f64]) -> Result<f64> {
    nonempty(real, synth)?;
    let (min_r, max_r) = bounds(real);
    let inside = synth.iter().filter(|&&v| min_r <= v && v <= max_r).count();
    Ok(inside as f64 / synth.len() as f64)
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

pub fn ks_complement(real: &[f64], synth: &[f64]) -> Result<f64> {
    nonempty(real, synth)?;
    Ok(1.0 - ks_statistic(real, synth))
}

/// Share of the real levels that also occur in the synthetic column.
pub fn category_coverage(real: &[f64], synth: &[f64]) -> Result<f64> {
    nonempty(real, synth)?;
    let levels = distinct(real);
    let present = distinct(synth);
    let covered = levels.iter().filter(|l| present.contains(l)).count();
    Ok(covered as f64 / levels.len() as f64)
}

/// Fraction of synthetic values whose level occurs in the real column.
pub fn category_adherence(real: &[f64], synth: &[f64]) -> Result<f64> {
    nonempty(real, synth)?;
    let levels = distinct(real);
    let ok = synth.iter().filter(|v| levels.contains(v)).count();
    Ok(ok as f64 / synth.len() as f64)
}

/// `1 - TVD`, with `TVD = ½ Σ |p_r(l) - p_s(l)|` over the union of levels.
pub fn tv_complement(real: &[f64], synth: &[f64]) -> Result<f64> {
    nonempty(real, synth)?;
    let mut union = distinct(real);
    union.extend(distinct(synth));
    let union = distinct(&union);
    let freq = |values: &[f64], level: f64| {
        values.iter().filter(|&&v| v == level).count() as f64 / values.len() as f64
    };
    let l1: f64 = union
        .iter()
        .map(|&l| (freq(real, l) - freq(synth, l)).abs())
        .sum();
    Ok((1.0 - 0.5 * l1).clamp(0.0, 1.0))
}

/// `1 - |r_real - r_synth| / 2`.
pub fn correlation_similarity_from(r_real: f64, r_synth: f64) -> f64 {
    (1.0 - (r_real - r_synth).abs() / 2.0).clamp(0.0, 1.0)
}

/// Correlation similarity for one column pair. Fails with `ZeroVariance`
/// when either dataset has a constant column in the pair.
pub fn correlation_similarity(real: &Dataset, synth: &Dataset, a: &str, b: &str) -> Result<f64> {
    fn col<'a>(ds: &'a Dataset, name: &str) -> Result<&'a [f64]> {
        ds.column_by_name(name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }
    let (ra, rb) = (col(real, a)?, col(real, b)?);
    let (sa, sb) = (col(synth, a)?, col(synth, b)?);
    nonempty(ra, sa)?;
    let zero_variance = |which: &str, e: Error| match e {
        Error::ZeroVariance(_) => Error::ZeroVariance(format!("{which} pair ({a}, {b})")),
        other => other,
    };
    let r_real = pearson(ra, rb).map_err(|e| zero_variance("real", e))?;
    let r_synth = pearson(sa, sb).map_err(|e| zero_variance("synthetic", e))?;
    Ok(correlation_similarity_from(r_real, r_synth))
}

/// Percentage of the real 95% CI covered by the synthetic 95% CI.
pub fn ci_overlap_percent(real: &[f64], synth: &[f64]) -> Result<f64> {
    nonempty(real, synth)?;
    let ci_r = confidence_interval(real, 0.95)?;
    let ci_s = confidence_interval(synth, 0.95)?;
    let width = ci_r.width();
    if width == 0.0 {
        return Ok(if ci_s.contains(ci_r.lo) { 100.0 } else { 0.0 });
    }
    let inter = (ci_r.hi.min(ci_s.hi) - ci_r.lo.max(ci_s.lo)).max(0.0);
    Ok((100.0 * (inter / width)).clamp(0.0, 100.0))
}
