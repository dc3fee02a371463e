//! Chat-completion backend and response-table parsing.
//!
//! Every call sends a single user message built from the prompt alone, so no
//! conversational context ever carries over between generations. Raw HTTP
//! bodies are written to the audit directory, when one is set, before any
//! parsing happens.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, LevelCheck, TableSchema};
use crate::error::{Error, Result};
use crate::prompt::NameMap;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    /// Full URL of an OpenAI-compatible chat-completions endpoint.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    /// Base delay between attempts; doubles after each failure.
    pub retry_backoff_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    /// Each request runs in a fresh context. Only `true` is supported.
    pub stateless: bool,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_secs: 300,
            max_retries: 3,
            retry_backoff_ms: 1000,
            temperature: None,
            stateless: true,
        }
    }
}

#[derive(Clone)]
pub struct ApiKey(String);

impl ApiKey {
    pub fn new(key: impl Into<String>) -> Self {
        ApiKey(key.into())
    }

    pub fn from_env(var: &str) -> Result<Self> {
        match std::env::var(var) {
            Ok(k) if !k.trim().is_empty() => Ok(ApiKey(k)),
            _ => Err(Error::Auth(format!(
                "environment variable {var} is not set"
            ))),
        }
    }
}

impl fmt::Debug for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ApiKey(***)")
    }
}

/// One generation as sent and received, kept verbatim for audit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawGeneration {
    pub prompt: String,
    /// Full HTTP response body.
    pub response: String,
    /// Assistant message text extracted from the response.
    pub content: String,
    pub retrieved_at_unix: u64,
    pub model: String,
    pub attempts: u32,
}

impl RawGeneration {
    /// A generation whose content did not come over HTTP (e.g. a saved
    /// transcript or a file downloaded from a chat interface).
    pub fn from_text(prompt: impl Into<String>, content: impl Into<String>) -> Self {
        let content = content.into();
        RawGeneration {
            prompt: prompt.into(),
            response: content.clone(),
            content,
            retrieved_at_unix: 0,
            model: String::new(),
            attempts: 0,
        }
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    #[serde(skip_serializing_if = "Option::is_none")]
    temperature: Option<f64>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReply,
}

#[derive(Deserialize)]
struct ChatReply {
    #[serde(default)]
    content: Option<String>,
}

enum Attempt {
    Done(RawGeneration),
    Retry(Error),
    Fail(Error),
}

pub struct LlmClient {
    cfg: LlmConfig,
    key: ApiKey,
    agent: ureq::Agent,
    audit_dir: Option<PathBuf>,
    sequence: AtomicUsize,
}

impl LlmClient {
    pub fn new(cfg: LlmConfig, key: ApiKey) -> Result<Self> {
        if !cfg.stateless {
            return Err(Error::InvalidSpec(
                "stateful sessions are not supported; set stateless = true".into(),
            ));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(LlmClient {
            cfg,
            key,
            agent,
            audit_dir: None,
            sequence: AtomicUsize::new(0),
        })
    }

    /// Persist every request and raw response under `dir`.
    pub fn with_audit_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.audit_dir = Some(dir.into());
        self
    }

    pub fn config(&self) -> &LlmConfig {
        &self.cfg
    }

    pub fn generate(&self, prompt: &str) -> Result<RawGeneration> {
        let seq = self.sequence.fetch_add(1, Ordering::Relaxed) + 1;
        let body = serde_json::to_string(&ChatRequest {
            model: &self.cfg.model,
            messages: [ChatMessage {
                role: "user",
                content: prompt,
            }],
            temperature: self.cfg.temperature,
        })?;
        self.audit(seq, 0, "request.json", &body)?;

        let attempts = self.cfg.max_retries + 1;
        let mut last = Error::Network("no attempt made".into());
        for attempt in 1..=attempts {
            if attempt > 1 {
                let delay = self
                    .cfg
                    .retry_backoff_ms
                    .saturating_mul(1 << (attempt - 2).min(10));
                std::thread::sleep(Duration::from_millis(delay));
            }
            match self.attempt(prompt, &body, seq, attempt) {
                Attempt::Done(generation) => return Ok(generation),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(e) => last = e,
            }
        }
        Err(match last {
            Error::Timeout(_) => Error::Timeout(attempts),
            other => other,
        })
    }

    fn attempt(&self, prompt: &str, body: &str, seq: usize, attempt: u32) -> Attempt {
        let sent = self
            .agent
            .post(&self.cfg.endpoint)
            .header("Authorization", &format!("Bearer {}", self.key.0))
            .header("Content-Type", "application/json")
            .send(body);
        let mut response = match sent {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Attempt::Retry(Error::Timeout(attempt)),
            Err(e) => return Attempt::Retry(Error::Network(e.to_string())),
        };
        let status = response.status().as_u16();
        let text = match response.body_mut().read_to_string() {
            Ok(t) => t,
            Err(ureq::Error::Timeout(_)) => return Attempt::Retry(Error::Timeout(attempt)),
            Err(e) => return Attempt::Retry(Error::Network(e.to_string())),
        };
        if let Err(e) = self.audit(seq, attempt, "response.txt", &text) {
            return Attempt::Fail(e);
        }
        match status {
            200..=299 => {}
            401 | 403 => return Attempt::Fail(Error::Auth(format!("HTTP {status}"))),
            408 | 429 | 500..=599 => {
                return Attempt::Retry(Error::Network(format!("HTTP {status}")))
            }
            _ => return Attempt::Fail(Error::Network(format!("HTTP {status}: {text}"))),
        }

        let content = match serde_json::from_str::<ChatResponse>(&text) {
            Ok(parsed) => parsed
                .choices
                .into_iter()
                .next()
                .and_then(|c| c.message.content)
                .unwrap_or_default(),
            Err(e) => return Attempt::Retry(Error::Network(format!("malformed response: {e}"))),
        };
        if extract_table(&content).is_none() {
            return Attempt::Retry(Error::RefusalDetected);
        }
        Attempt::Done(RawGeneration {
            prompt: prompt.to_string(),
            response: text,
            content,
            retrieved_at_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            model: self.cfg.model.clone(),
            attempts: attempt,
        })
    }

    fn audit(&self, seq: usize, attempt: u32, suffix: &str, text: &str) -> Result<()> {
        let Some(dir) = &self.audit_dir else {
            return Ok(());
        };
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let name = if attempt == 0 {
            format!("generation-{seq:03}.{suffix}")
        } else {
            format!("generation-{seq:03}.attempt-{attempt}.{suffix}")
        };
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(path, e))
    }
}

/// Sends `prompt` with the key read from `cfg.api_key_env`.
pub fn llm_generate(
    prompt: &str,
    cfg: &LlmConfig,
    audit_dir: Option<&Path>,
) -> Result<RawGeneration> {
    let key = ApiKey::from_env(&cfg.api_key_env)?;
    let mut client = LlmClient::new(cfg.clone(), key)?;
    if let Some(dir) = audit_dir {
        client = client.with_audit_dir(dir);
    }
    client.generate(prompt)
}

fn split_line(line: &str) -> Option<Vec<String>> {
    let trimmed = line.trim();
    if trimmed.contains('|') {
        let inner = trimmed.trim_start_matches('|').trim_end_matches('|');
        let cells: Vec<String> = inner.split('|').map(|c| c.trim().to_string()).collect();
        return (cells.len() >= 2).then_some(cells);
    }
    if !trimmed.contains(',') {
        return None;
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(trimmed.as_bytes());
    let record = rdr.records().next()?.ok()?;
    let cells: Vec<String> = record.iter().map(str::to_string).collect();
    (cells.len() >= 2).then_some(cells)
}

fn is_separator(line: &str) -> bool {
    let t = line.trim();
    t.contains('-') && t.chars().all(|c| matches!(c, '|' | '-' | ':' | ' ' | '+'))
}

fn longest_table(lines: &[&str]) -> Option<Vec<Vec<String>>> {
    let mut best: Option<Vec<Vec<String>>> = None;
    let mut current: Vec<Vec<String>> = Vec::new();
    let mut flush = |current: &mut Vec<Vec<String>>| {
        if current.len() >= 2 && best.as_ref().is_none_or(|b| current.len() > b.len()) {
            best = Some(std::mem::take(current));
        }
        current.clear();
    };
    for line in lines {
        if is_separator(line) && !current.is_empty() {
            continue;
        }
        match split_line(line) {
            Some(cells) if current.first().is_none_or(|h| h.len() == cells.len()) => {
                current.push(cells)
            }
            Some(cells) => {
                flush(&mut current);
                current.push(cells);
            }
            None => flush(&mut current),
        }
    }
    flush(&mut current);
    best
}

/// Finds a header-plus-rows table in free text: the first fenced code block
/// holding one, otherwise the longest run of delimited lines.
pub fn extract_table(text: &str) -> Option<Vec<Vec<String>>> {
    let lines: Vec<&str> = text.lines().collect();
    let mut in_fence = false;
    let mut block: Vec<&str> = Vec::new();
    for line in &lines {
        if line.trim_start().starts_with("```") {
            if in_fence {
                if let Some(t) = longest_table(&block) {
                    return Some(t);
                }
                block.clear();
            }
            in_fence = !in_fence;
        } else if in_fence {
            block.push(line);
        }
    }
    longest_table(&lines)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ParseWarning {
    RowCountMismatch { expected: usize, actual: usize },
    InvalidLevels { column: String, count: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParsedTable {
    pub dataset: Dataset,
    pub warnings: Vec<ParseWarning>,
}

fn clean_header(cell: &str) -> &str {
    cell.trim()
        .trim_matches(|c| matches!(c, '"' | '\'' | '`' | '*'))
}

/// Extracts the table from a generation, renames `X1..Xk` back to the
/// original names and validates it against the schema. Row-count mismatches
/// and out-of-level ordinal cells are reported as warnings.
pub fn parse_tabular(
    raw: &RawGeneration,
    schema: &TableSchema,
    map: &NameMap,
    expected_rows: Option<usize>,
) -> Result<ParsedTable> {
    let table = extract_table(&raw.content).ok_or(Error::NoTableFound)?;
    let (header, body) = table.split_first().expect("tables have a header row");

    let mut positions = vec![None; schema.len()];
    for (p, cell) in header.iter().enumerate() {
        let name = clean_header(cell);
        let original = map
            .original(name)
            .ok_or_else(|| Error::HeaderMismatch(format!("unexpected column `{name}`")))?;
        let index = schema.index_of(original).ok_or_else(|| {
            Error::HeaderMismatch(format!(
                "`{name}` maps to `{original}`, which is not in the schema"
            ))
        })?;
        if positions[index].replace(p).is_some() {
            return Err(Error::HeaderMismatch(format!(
                "column `{name}` appears twice"
            )));
        }
    }
    let positions: Vec<usize> = positions
        .into_iter()
        .zip(schema.columns())
        .map(|(p, col)| {
            p.ok_or_else(|| {
                let shown = map.obfuscated(&col.name).unwrap_or(&col.name);
                Error::HeaderMismatch(format!("missing column `{shown}`"))
            })
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(body.len());
    for (i, record) in body.iter().enumerate() {
        let row = i + 1;
        let cells = positions
            .iter()
            .zip(schema.columns())
            .map(|(&p, col)| {
                let raw_cell = record[p].trim();
                if raw_cell.is_empty() {
                    return Err(Error::MissingValue {
                        row,
                        column: col.name.clone(),
                    });
                }
                raw_cell
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::NonNumericCell {
                        row,
                        column: col.name.clone(),
                        value: raw_cell.to_string(),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(cells);
    }

    let dataset = Dataset::from_rows(schema.clone(), &rows, LevelCheck::Lenient)?;
    let mut warnings = Vec::new();
    if let Some(expected) = expected_rows {
        if expected != dataset.n_rows() {
            warnings.push(ParseWarning::RowCountMismatch {
                expected,
                actual: dataset.n_rows(),
            });
        }
    }
    for (col, values) in dataset.iter_columns() {
        let count = values.iter().filter(|&&v| !col.admits_level(v)).count();
        if count > 0 {
            warnings.push(ParseWarning::InvalidLevels {
                column: col.name.clone(),
                count,
            });
        }
    }
    Ok(ParsedTable { dataset, warnings })
}
