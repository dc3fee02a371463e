//! Row-level privacy checks.

use crate::data::{ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::profile::describe;

pub const DEFAULT_TOL_REL: f64 = 0.01;

/// Per-column match tolerances relative to the reference dataset's ranges.
/// Ordinal columns get `None` and must match exactly.
fn tolerances(reference: &Dataset, tol_rel: f64) -> Result<Vec<Option<f64>>> {
    if !(tol_rel >= 0.0 && tol_rel.is_finite()) {
        return Err(Error::InvalidTolerance(tol_rel));
    }
    Ok(reference
        .iter_columns()
        .map(|(col, values)| match col.kind {
            ColumnKind::Ordinal => None,
            ColumnKind::Continuous => {
                let (_, _, min, max) = describe(values);
                Some(tol_rel * (max - min))
            }
        })
        .collect())
}

fn rows_match(a: &[f64], b: &[f64], tol: &[Option<f64>]) -> bool {
    a.iter().zip(b).zip(tol).all(|((&x, &y), t)| match t {
        Some(t) => (x - y).abs() <= *t,
        None => x == y,
    })
}

fn check_same_columns(a: &Dataset, b: &Dataset) -> Result<()> {
    let same = a.n_cols() == b.n_cols()
        && a.schema()
            .columns()
            .iter()
            .zip(b.schema().columns())
            .all(|(x, y)| x.name == y.name && x.kind == y.kind);
    if same {
        Ok(())
    } else {
        Err(Error::SchemaMismatch(
            "datasets do not share the same columns".into(),
        ))
    }
}

/// Number of `rows` that match some row of `reference`.
fn matched_count(reference: &Dataset, rows: &Dataset, tol_rel: f64) -> Result<usize> {
    check_same_columns(reference, rows)?;
    let tol = tolerances(reference, tol_rel)?;
    let reference_rows: Vec<Vec<f64>> = reference.rows().collect();
    Ok(rows
        .rows()
        .filter(|row| reference_rows.iter().any(|r| rows_match(row, r, &tol)))
        .count())
}

/// Fraction of synthetic rows that match no real row. A match needs every
/// continuous cell within `tol_rel` times the real column range and every
/// ordinal cell exactly equal.
pub fn new_row_synthesis(real: &Dataset, synth: &Dataset, tol_rel: f64) -> Result<f64> {
    if real.n_rows() == 0 {
        return Err(Error::EmptyDataset("real"));
    }
    if synth.n_rows() == 0 {
        return Err(Error::EmptyDataset("synthetic"));
    }
    let matched = matched_count(real, synth, tol_rel)?;
    Ok((synth.n_rows() - matched) as f64 / synth.n_rows() as f64)
}

/// Fraction of rows of `a` matching some row of `b`, using the
/// [`new_row_synthesis`] rule with `b` as the reference.
pub fn row_overlap(a: &Dataset, b: &Dataset, tol_rel: f64) -> Result<f64> {
    if a.n_rows() == 0 || b.n_rows() == 0 {
        return Err(Error::EmptyDataset("synthetic"));
    }
    Ok(matched_count(b, a, tol_rel)? as f64 / a.n_rows() as f64)
}
