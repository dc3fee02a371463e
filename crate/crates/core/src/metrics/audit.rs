//! Domain-violation audit against schema hard bounds and level sets.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, TableSchema};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnViolations {
    pub column: String,
    pub below_min: usize,
    pub above_max: usize,
    pub invalid_level: usize,
}

impl ColumnViolations {
    pub fn total(&self) -> usize {
        self.below_min + self.above_max + self.invalid_level
    }
}

/// Counts cells outside `hard_min`/`hard_max` and ordinal cells outside the
/// declared levels, per column in schema order.
pub fn violation_audit(ds: &Dataset, schema: &TableSchema) -> Result<Vec<ColumnViolations>> {
    schema
        .columns()
        .iter()
        .map(|col| {
            let values = ds
                .column_by_name(&col.name)
                .ok_or_else(|| Error::MissingColumn(col.name.clone()))?;
            let mut v = ColumnViolations {
                column: col.name.clone(),
                ..Default::default()
            };
            for &x in values {
                if col.hard_min.is_some_and(|lo| x < lo) {
                    v.below_min += 1;
                }
                if col.hard_max.is_some_and(|hi| x > hi) {
                    v.above_max += 1;
                }
                if !col.admits_level(x) {
                    v.invalid_level += 1;
                }
            }
            Ok(v)
        })
        .collect()
}
