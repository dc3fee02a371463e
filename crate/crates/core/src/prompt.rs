//! Plain-language generation prompts built from a rounded, obfuscated profile.
//!
//! The prompt carries, in a fixed order: the output-format instruction, the
//! row count, per-column mean/SD/range, per-column restrictions, the
//! significant correlations with signed `r`, and the column naming
//! instruction. Rendering is a pure function of `(profile, spec, template)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, TableSchema};
use crate::error::{Error, Result};
use crate::profile::{
    is_rounded, numeric_fields, round_profile, significant_pairs, DatasetProfile,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    /// Ask for a downloadable spreadsheet file.
    #[default]
    SpreadsheetFile,
    /// Ask for CSV text directly in the response.
    InlineCsv,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Restriction {
    pub column: String,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationSpec {
    pub n_rows: usize,
    pub decimals: u32,
    pub corr_threshold: f64,
    pub include_all_correlations: bool,
    pub output_format: OutputFormat,
    /// Keyed by the column names used in the prompt profile.
    pub restrictions: Vec<Restriction>,
}

impl GenerationSpec {
    pub fn new(n_rows: usize) -> Self {
        GenerationSpec {
            n_rows,
            decimals: 3,
            corr_threshold: 0.20,
            include_all_correlations: false,
            output_format: OutputFormat::SpreadsheetFile,
            restrictions: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_rows == 0 {
            return Err(Error::InvalidSpec("n_rows must be at least 1".into()));
        }
        if !(self.corr_threshold.is_finite() && self.corr_threshold >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "correlation threshold {} is not a non-negative number",
                self.corr_threshold
            )));
        }
        Ok(())
    }
}

/// Same spec with a different target row count.
pub fn amplify(spec: &GenerationSpec, n: usize) -> GenerationSpec {
    GenerationSpec {
        n_rows: n,
        ..spec.clone()
    }
}

/// Restriction text for each column that has hard bounds or levels, keyed
/// through `names` when given (original name -> prompt name).
pub fn derive_restrictions(schema: &TableSchema, names: Option<&NameMap>) -> Vec<Restriction> {
    schema
        .columns()
        .iter()
        .filter_map(|col| {
            let text = match (col.kind, col.hard_min, col.hard_max) {
                (ColumnKind::Ordinal, _, _) => {
                    "values must be one of the allowed values listed above".to_string()
                }
                (_, Some(0.0), None) => "values must be non-negative".to_string(),
                (_, Some(lo), None) => format!("values must be at least {lo}"),
                (_, None, Some(hi)) => format!("values must be at most {hi}"),
                (_, Some(lo), Some(hi)) => format!("values must be between {lo} and {hi}"),
                (_, None, None) => return None,
            };
            let column = names
                .and_then(|m| m.obfuscated(&col.name))
                .unwrap_or(&col.name)
                .to_string();
            Some(Restriction { column, text })
        })
        .collect()
}

/// Bijection between original column names and `X1..Xk`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameMap {
    entries: Vec<NameMapEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct NameMapEntry {
    original: String,
    obfuscated: String,
}

impl NameMap {
    pub fn for_columns<'a>(names: impl IntoIterator<Item = &'a str>) -> Self {
        NameMap {
            entries: names
                .into_iter()
                .enumerate()
                .map(|(i, n)| NameMapEntry {
                    original: n.to_string(),
                    obfuscated: format!("X{}", i + 1),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn obfuscated(&self, original: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.original == original)
            .map(|e| e.obfuscated.as_str())
    }

    pub fn original(&self, obfuscated: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.obfuscated == obfuscated)
            .map(|e| e.original.as_str())
    }

    pub fn obfuscated_names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.obfuscated.as_str())
    }

    /// Obfuscated -> original, in the shape `data::rename_columns` takes.
    pub fn inverse_mapping(&self) -> BTreeMap<String, String> {
        self.entries
            .iter()
            .map(|e| (e.obfuscated.clone(), e.original.clone()))
            .collect()
    }

    pub fn forward_mapping(&self) -> BTreeMap<String, String> {
        self.entries
            .iter()
            .map(|e| (e.original.clone(), e.obfuscated.clone()))
            .collect()
    }

    /// Renames a profile from obfuscated names back to the originals.
    pub fn restore(&self, p: &DatasetProfile) -> DatasetProfile {
        rename_profile(p, &self.inverse_mapping())
    }
}

fn rename_profile(p: &DatasetProfile, map: &BTreeMap<String, String>) -> DatasetProfile {
    let rename = |n: &str| map.get(n).cloned().unwrap_or_else(|| n.to_string());
    let mut out = p.clone();
    for s in &mut out.stats {
        s.name = rename(&s.name);
    }
    for e in &mut out.correlations {
        e.col_a = rename(&e.col_a);
        e.col_b = rename(&e.col_b);
    }
    for w in &mut out.warnings {
        for (from, to) in map {
            let tagged = format!("`{from}`");
            if w.contains(&tagged) {
                *w = w.replace(&tagged, &format!("`{to}`"));
                break;
            }
        }
    }
    out
}

/// Replaces column names with `X1..Xk` in schema order.
pub fn obfuscate(p: &DatasetProfile) -> (DatasetProfile, NameMap) {
    let map = NameMap::for_columns(p.names());
    (rename_profile(p, &map.forward_mapping()), map)
}

const PLACEHOLDERS: [&str; 7] = [
    "output_format",
    "n_rows",
    "n_cols",
    "column_stats",
    "restrictions",
    "correlations",
    "column_names",
];

/// Prompt text with `{placeholder}` slots. `{{` and `}}` are literal braces.
/// A line holding only a placeholder that expands to nothing is dropped.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptTemplate {
    text: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            text: DEFAULT_TEMPLATE.to_string(),
        }
    }
}

pub const DEFAULT_TEMPLATE: &str = "\
{output_format}
The dataset must contain {n_rows} rows and {n_cols} columns.
Summary statistics for each column:
{column_stats}
{restrictions}
{correlations}
{column_names}
";

#[derive(Debug)]
enum Piece {
    Literal(String),
    Slot(&'static str),
}

impl PromptTemplate {
    pub fn parse(text: &str) -> Result<Self> {
        let pieces = tokenize(text)?;
        let row_slots = pieces
            .iter()
            .filter(|p| matches!(p, Piece::Slot("n_rows")))
            .count();
        if row_slots != 1 {
            return Err(Error::InvalidTemplate(format!(
                "{{n_rows}} must appear exactly once, found {row_slots}"
            )));
        }
        Ok(PromptTemplate {
            text: text.to_string(),
        })
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    fn render(&self, values: &BTreeMap<&str, String>) -> String {
        let mut out = String::new();
        for line in self.text.split_inclusive('\n') {
            let body = line.trim_end_matches('\n');
            let pieces = tokenize(body).expect("template validated on construction");
            if let [Piece::Slot(name)] = pieces.as_slice() {
                if values[name].is_empty() {
                    continue;
                }
            }
            for piece in pieces {
                match piece {
                    Piece::Literal(s) => out.push_str(&s),
                    Piece::Slot(name) => out.push_str(&values[name]),
                }
            }
            if line.ends_with('\n') {
                out.push('\n');
            }
        }
        out
    }
}

fn tokenize(text: &str) -> Result<Vec<Piece>> {
    let mut pieces = Vec::new();
    let mut literal = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '{' if chars.peek() == Some(&'{') => {
                chars.next();
                literal.push('{');
            }
            '}' if chars.peek() == Some(&'}') => {
                chars.next();
                literal.push('}');
            }
            '{' => {
                let name: String = chars.by_ref().take_while(|&c| c != '}').collect();
                let slot = PLACEHOLDERS.iter().find(|&&p| p == name).ok_or_else(|| {
                    Error::InvalidTemplate(format!("unknown placeholder {{{name}}}"))
                })?;
                if !literal.is_empty() {
                    pieces.push(Piece::Literal(std::mem::take(&mut literal)));
                }
                pieces.push(Piece::Slot(slot));
            }
            '}' => return Err(Error::InvalidTemplate("unmatched `}`".into())),
            c => literal.push(c),
        }
    }
    if !literal.is_empty() {
        pieces.push(Piece::Literal(literal));
    }
    Ok(pieces)
}

fn format_instruction(format: OutputFormat) -> &'static str {
    match format {
        OutputFormat::SpreadsheetFile => {
            "Generate a synthetic dataset and provide it as a downloadable spreadsheet file (.xlsx)."
        }
        OutputFormat::InlineCsv => {
            "Generate a synthetic dataset and output it directly as comma-separated values (CSV) \
             inside a single code block, with a header row and no other text."
        }
    }
}

fn join_numbers(values: impl IntoIterator<Item = f64>) -> String {
    values
        .into_iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn build_prompt(p: &DatasetProfile, spec: &GenerationSpec) -> Result<String> {
    build_prompt_with(p, spec, &PromptTemplate::default())
}

pub fn build_prompt_with(
    p: &DatasetProfile,
    spec: &GenerationSpec,
    template: &PromptTemplate,
) -> Result<String> {
    spec.validate()?;
    if p.stats.is_empty() {
        return Err(Error::EmptyProfile);
    }
    for (field, value) in numeric_fields(p) {
        if !is_rounded(value, spec.decimals) {
            return Err(Error::NotRounded {
                field,
                value,
                decimals: spec.decimals,
            });
        }
    }
    for r in &spec.restrictions {
        if p.column(&r.column).is_none() {
            return Err(Error::InvalidSpec(format!(
                "restriction refers to unknown column `{}`",
                r.column
            )));
        }
    }

    let mut column_stats = String::new();
    for (i, s) in p.stats.iter().enumerate() {
        if i > 0 {
            column_stats.push('\n');
        }
        write!(column_stats, "- {}: ", s.name).unwrap();
        if let Some(levels) = &s.levels {
            write!(
                column_stats,
                "ordinal with allowed values {}; ",
                join_numbers(levels.iter().map(|f| f.level))
            )
            .unwrap();
        }
        write!(
            column_stats,
            "mean = {}, standard deviation = {}, range = {} to {}",
            s.mean, s.sd, s.min, s.max
        )
        .unwrap();
        if let Some(levels) = &s.levels {
            let props: Vec<String> = levels
                .iter()
                .map(|f| format!("{} = {}", f.level, f.proportion))
                .collect();
            write!(
                column_stats,
                "; proportion of rows at each value: {}",
                props.join(", ")
            )
            .unwrap();
        }
    }

    let mut restrictions = String::new();
    let column_order = |name: &str| p.stats.iter().position(|s| s.name == name);
    let mut ordered: Vec<&Restriction> = spec.restrictions.iter().collect();
    ordered.sort_by_key(|r| column_order(&r.column));
    if !ordered.is_empty() {
        restrictions.push_str("Restrictions on data:");
        for r in ordered {
            write!(restrictions, "\n- {}: {}", r.column, r.text).unwrap();
        }
    }

    let pairs = significant_pairs(p, spec.corr_threshold, spec.include_all_correlations);
    let mut correlations = String::new();
    if !pairs.is_empty() {
        correlations.push_str("The columns must have the following Pearson correlations (r):");
        for e in &pairs {
            write!(correlations, "\n- {} and {}: r = {}", e.col_a, e.col_b, e.r).unwrap();
        }
    }

    let names: Vec<&str> = p.names().collect();
    let column_names = format!("Name the columns {}, in this order.", names.join(", "));

    let values = BTreeMap::from([
        (
            "output_format",
            format_instruction(spec.output_format).to_string(),
        ),
        ("n_rows", spec.n_rows.to_string()),
        ("n_cols", p.stats.len().to_string()),
        ("column_stats", column_stats),
        ("restrictions", restrictions),
        ("correlations", correlations),
        ("column_names", column_names),
    ]);
    Ok(template.render(&values))
}

/// A rendered prompt with the profile it was rendered from and the name
/// map needed to read the response back.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedPrompt {
    pub text: String,
    /// Rounded profile under the prompt column names.
    pub profile: DatasetProfile,
    pub names: NameMap,
}

/// Rounds `p` to `spec.decimals`, renames its columns to `X1..Xk`, adds the
/// restrictions implied by `schema` ahead of any already in `spec`, and
/// renders the result.
pub fn prepare_prompt(
    p: &DatasetProfile,
    schema: &TableSchema,
    spec: &GenerationSpec,
    template: &PromptTemplate,
) -> Result<PreparedPrompt> {
    let (obfuscated, names) = obfuscate(&round_profile(p, spec.decimals));
    let mut spec = spec.clone();
    let mut restrictions = derive_restrictions(schema, Some(&names));
    restrictions.append(&mut spec.restrictions);
    spec.restrictions = restrictions;
    let text = build_prompt_with(&obfuscated, &spec, template)?;
    Ok(PreparedPrompt {
        text,
        profile: obfuscated,
        names,
    })
}
