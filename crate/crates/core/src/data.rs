//! Table schema, the immutable [`Dataset`] value model, and CSV ingestion.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    Ordinal,
}

/// One column of a table: its name, kind, optional domain bounds and, for
/// ordinal columns, the ordered set of allowed levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hard_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hard_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<f64>>,
}

impl ColumnSchema {
    pub fn continuous(name: impl Into<String>) -> Self {
        ColumnSchema {
            name: name.into(),
            kind: ColumnKind::Continuous,
            hard_min: None,
            hard_max: None,
            levels: None,
        }
    }

    pub fn ordinal(name: impl Into<String>, levels: impl Into<Vec<f64>>) -> Self {
        ColumnSchema {
            name: name.into(),
            kind: ColumnKind::Ordinal,
            hard_min: None,
            hard_max: None,
            levels: Some(levels.into()),
        }
    }

    pub fn with_hard_min(mut self, min: f64) -> Self {
        self.hard_min = Some(min);
        self
    }

    pub fn with_hard_max(mut self, max: f64) -> Self {
        self.hard_max = Some(max);
        self
    }

    pub fn is_ordinal(&self) -> bool {
        self.kind == ColumnKind::Ordinal
    }

    /// Allowed levels; empty for continuous columns.
    pub fn levels(&self) -> &[f64] {
        self.levels.as_deref().unwrap_or(&[])
    }

    /// Exact membership test against the level set. Always true for
    /// continuous columns.
    pub fn admits_level(&self, value: f64) -> bool {
        match self.kind {
            ColumnKind::Continuous => true,
            ColumnKind::Ordinal => self.levels().contains(&value),
        }
    }

    /// True when `value` lies outside the hard domain bounds.
    pub fn violates_bounds(&self, value: f64) -> bool {
        self.hard_min.is_some_and(|lo| value < lo) || self.hard_max.is_some_and(|hi| value > hi)
    }

    fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::InvalidSchema("column name is empty".into()));
        }
        for bound in [self.hard_min, self.hard_max].into_iter().flatten() {
            if !bound.is_finite() {
                return Err(Error::InvalidSchema(format!(
                    "column `{}` has a non-finite bound",
                    self.name
                )));
            }
        }
        if let (Some(lo), Some(hi)) = (self.hard_min, self.hard_max) {
            if lo > hi {
                return Err(Error::InvalidSchema(format!(
                    "column `{}`: hard_min {lo} > hard_max {hi}",
                    self.name
                )));
            }
        }
        match self.kind {
            ColumnKind::Ordinal => {
                let levels = self.levels();
                if levels.is_empty() {
                    return Err(Error::InvalidSchema(format!(
                        "ordinal column `{}` needs levels",
                        self.name
                    )));
                }
                if levels.iter().any(|l| !l.is_finite()) || levels.windows(2).any(|w| w[0] >= w[1])
                {
                    return Err(Error::InvalidSchema(format!(
                        "levels of `{}` must be finite and strictly increasing",
                        self.name
                    )));
                }
            }
            ColumnKind::Continuous => {
                if self.levels.is_some() {
                    return Err(Error::InvalidSchema(format!(
                        "continuous column `{}` cannot declare levels",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Ordered list of columns with unique, non-empty names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTableSchema", into = "RawTableSchema")]
pub struct TableSchema {
    columns: Vec<ColumnSchema>,
}

#[derive(Serialize, Deserialize)]
struct RawTableSchema {
    columns: Vec<ColumnSchema>,
}

impl TryFrom<RawTableSchema> for TableSchema {
    type Error = Error;

    fn try_from(raw: RawTableSchema) -> Result<Self> {
        TableSchema::new(raw.columns)
    }
}

impl From<TableSchema> for RawTableSchema {
    fn from(schema: TableSchema) -> Self {
        RawTableSchema {
            columns: schema.columns,
        }
    }
}

impl TableSchema {
    pub fn new(columns: Vec<ColumnSchema>) -> Result<Self> {
        let mut seen = HashSet::new();
        for col in &columns {
            col.validate()?;
            if !seen.insert(col.name.as_str()) {
                return Err(Error::DuplicateName(col.name.clone()));
            }
        }
        Ok(TableSchema { columns })
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let schema: TableSchema = serde_json::from_str(&text)?;
        if schema.is_empty() {
            return Err(Error::InvalidSchema("schema has no columns".into()));
        }
        Ok(schema)
    }

    pub fn columns(&self) -> &[ColumnSchema] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSchema> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }
}

/// How ordinal level membership is treated while building a dataset.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LevelCheck {
    /// Reject any ordinal cell outside the declared levels.
    #[default]
    Strict,
    /// Accept out-of-level cells. Synthetic tables are loaded this way so
    /// that category adherence and the violation audit can see them.
    Lenient,
}

#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    /// Remove rows with missing cells instead of failing.
    pub drop_incomplete: bool,
    /// Ignore CSV columns absent from the schema instead of failing.
    pub ignore_extra_columns: bool,
    pub levels: LevelCheck,
}

impl LoadOptions {
    pub fn lenient() -> Self {
        LoadOptions {
            levels: LevelCheck::Lenient,
            ..Default::default()
        }
    }
}

/// An immutable, complete, column-major table of finite numbers.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    schema: TableSchema,
    n_rows: usize,
    columns: Vec<Vec<f64>>,
}

impl Dataset {
    /// Builds a dataset, enforcing finiteness and ordinal membership.
    pub fn from_columns(schema: TableSchema, columns: Vec<Vec<f64>>) -> Result<Self> {
        Self::build(schema, columns, LevelCheck::Strict)
    }

    /// Like [`Dataset::from_columns`] but accepts ordinal cells outside the
    /// declared level set.
    pub fn from_columns_lenient(schema: TableSchema, columns: Vec<Vec<f64>>) -> Result<Self> {
        Self::build(schema, columns, LevelCheck::Lenient)
    }

    pub fn from_rows(schema: TableSchema, rows: &[Vec<f64>], levels: LevelCheck) -> Result<Self> {
        let k = schema.len();
        let mut columns = vec![Vec::with_capacity(rows.len()); k];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::RaggedRow {
                    row: i + 1,
                    found: row.len(),
                    expected: k,
                });
            }
            for (col, &v) in columns.iter_mut().zip(row) {
                col.push(v);
            }
        }
        Self::build(schema, columns, levels)
    }

    fn build(schema: TableSchema, columns: Vec<Vec<f64>>, levels: LevelCheck) -> Result<Self> {
        if columns.len() != schema.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} value columns for {} schema columns",
                columns.len(),
                schema.len()
            )));
        }
        let n_rows = columns.first().map_or(0, Vec::len);
        for (col_schema, values) in schema.columns().iter().zip(&columns) {
            if values.len() != n_rows {
                return Err(Error::LengthMismatch(values.len(), n_rows));
            }
            for (i, &v) in values.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::MissingValue {
                        row: i + 1,
                        column: col_schema.name.clone(),
                    });
                }
                if levels == LevelCheck::Strict && !col_schema.admits_level(v) {
                    return Err(Error::InvalidLevel {
                        row: i + 1,
                        column: col_schema.name.clone(),
                        value: v,
                    });
                }
            }
        }
        Ok(Dataset {
            schema,
            n_rows,
            columns,
        })
    }

    pub fn schema(&self) -> &TableSchema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, index: usize) -> &[f64] {
        &self.columns[index]
    }

    pub fn column_by_name(&self, name: &str) -> Option<&[f64]> {
        self.schema.index_of(name).map(|i| self.column(i))
    }

    /// Iterates `(schema, values)` in schema order.
    pub fn iter_columns(&self) -> impl Iterator<Item = (&ColumnSchema, &[f64])> {
        self.schema
            .columns()
            .iter()
            .zip(self.columns.iter().map(Vec::as_slice))
    }

    pub fn row(&self, index: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[index]).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.n_rows).map(|i| self.row(i))
    }

    /// New dataset made of the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            n_rows: indices.len(),
            columns: self
                .columns
                .iter()
                .map(|c| indices.iter().map(|&i| c[i]).collect())
                .collect(),
        }
    }
}

/// Reads a CSV file, reordering its columns into schema order.
pub fn load_csv(
    path: impl AsRef<Path>,
    schema: &TableSchema,
    opts: &LoadOptions,
) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema, opts)
}

const MISSING_TOKENS: [&str; 6] = ["", "na", "n/a", "nan", "null", "none"];

pub fn read_csv<R: Read>(reader: R, schema: &TableSchema, opts: &LoadOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(Error::EmptyFile);
    }

    let mut positions = Vec::with_capacity(schema.len());
    for col in schema.columns() {
        match headers.iter().position(|h| h == col.name) {
            Some(p) => positions.push(p),
            None => return Err(Error::MissingColumn(col.name.clone())),
        }
    }
    if !opts.ignore_extra_columns {
        if let Some(extra) = headers.iter().find(|h| schema.index_of(h).is_none()) {
            return Err(Error::UnexpectedColumn(extra.to_string()));
        }
    }

    let mut columns = vec![Vec::new(); schema.len()];
    let mut cells = Vec::with_capacity(schema.len());
    'rows: for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        if record.len() != headers.len() {
            return Err(Error::RaggedRow {
                row,
                found: record.len(),
                expected: headers.len(),
            });
        }
        cells.clear();
        for (col, &p) in schema.columns().iter().zip(&positions) {
            let raw = &record[p];
            if MISSING_TOKENS.contains(&raw.to_ascii_lowercase().as_str()) {
                if opts.drop_incomplete {
                    continue 'rows;
                }
                return Err(Error::MissingValue {
                    row,
                    column: col.name.clone(),
                });
            }
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => cells.push(v),
                _ => {
                    return Err(Error::NonNumericCell {
                        row,
                        column: col.name.clone(),
                        value: raw.to_string(),
                    })
                }
            }
        }
        for (col, &v) in columns.iter_mut().zip(&cells) {
            col.push(v);
        }
    }
    Dataset::build(schema.clone(), columns, opts.levels)
}

/// Writes the dataset with a header row; values use the shortest decimal
/// representation that parses back to the same `f64`.
pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(ds.schema().names())?;
    let mut record = Vec::with_capacity(ds.n_cols());
    for i in 0..ds.n_rows() {
        record.clear();
        record.extend(ds.columns.iter().map(|c| c[i].to_string()));
        wtr.write_record(&record)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(ds, std::io::BufWriter::new(file))
}

pub fn drop_columns<S: AsRef<str>>(ds: &Dataset, names: &[S]) -> Result<Dataset> {
    for name in names {
        if ds.schema.index_of(name.as_ref()).is_none() {
            return Err(Error::UnknownColumn(name.as_ref().to_string()));
        }
    }
    let (cols, values): (Vec<_>, Vec<_>) = ds
        .iter_columns()
        .filter(|(c, _)| !names.iter().any(|n| n.as_ref() == c.name))
        .map(|(c, v)| (c.clone(), v.to_vec()))
        .unzip();
    Ok(Dataset {
        schema: TableSchema::new(cols)?,
        n_rows: ds.n_rows,
        columns: values,
    })
}

pub fn rename_columns(ds: &Dataset, mapping: &BTreeMap<String, String>) -> Result<Dataset> {
    for key in mapping.keys() {
        if ds.schema.index_of(key).is_none() {
            return Err(Error::UnknownColumn(key.clone()));
        }
    }
    let columns = ds
        .schema
        .columns()
        .iter()
        .map(|c| {
            let mut c = c.clone();
            if let Some(new) = mapping.get(&c.name) {
                c.name = new.clone();
            }
            c
        })
        .collect();
    Ok(Dataset {
        schema: TableSchema::new(columns)?,
        n_rows: ds.n_rows,
        columns: ds.columns.clone(),
    })
}
