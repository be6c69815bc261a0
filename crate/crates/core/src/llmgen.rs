//! Candidate progress programs from a chat-completions endpoint or from a
//! fixture directory.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

use crate::dsl::{parse, EnvFeatures, FeatureSchema, ProgressProgram};
use crate::envs::{Task, TaskFamily};

pub const SYSTEM_PROMPT: &str = include_str!("../assets/prompts/system.txt");
pub const GRID_LIBRARY: &str = include_str!("../assets/prompts/grid_library.txt");
pub const VECTOR_LIBRARY: &str = include_str!("../assets/prompts/vector_library.txt");

pub const ENV_BASE_URL: &str = "PC_LLM_BASE_URL";
pub const ENV_API_KEY: &str = "PC_LLM_API_KEY";
pub const ENV_MODEL: &str = "PC_LLM_MODEL";

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("prompt section `{0}` is empty")]
    EmptySection(&'static str),
    #[error("n_samples must be at least 1")]
    NoSamples,
    #[error("endpoint not configured: set {ENV_BASE_URL} and {ENV_MODEL}")]
    NotConfigured,
    #[error("request failed after {attempts} attempts: {last}")]
    Transport { attempts: usize, last: TransportError },
    #[error("malformed completion response: {0}")]
    Response(String),
    #[error("all {} candidates invalid:\n{}", .0.len(), .0.join("\n"))]
    AllInvalid(Vec<String>),
    #[error("fixture directory {dir} has {found} candidate files, need {needed}")]
    NotEnoughFixtures { dir: PathBuf, found: usize, needed: usize },
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Everything that goes into a generation prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptBundle {
    pub system_text: String,
    pub feature_library_text: String,
    pub state_schema_text: String,
    pub task_description: String,
    pub n_samples: usize,
}

impl PromptBundle {
    pub fn for_task(task: &Task, n_samples: usize) -> Self {
        let library = match task.family {
            TaskFamily::Grid => GRID_LIBRARY,
            TaskFamily::Vector => VECTOR_LIBRARY,
        };
        Self {
            system_text: SYSTEM_PROMPT.to_string(),
            feature_library_text: library.to_string(),
            state_schema_text: task.schema.render(),
            task_description: task.spec.description.clone(),
            n_samples,
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        for (name, text) in [
            ("system", &self.system_text),
            ("feature library", &self.feature_library_text),
            ("state schema", &self.state_schema_text),
            ("task description", &self.task_description),
        ] {
            if text.trim().is_empty() {
                return Err(LlmError::EmptySection(name));
            }
        }
        if self.n_samples == 0 {
            return Err(LlmError::NoSamples);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// System message, then one user message with the library, state
/// description and task, in that order.
pub fn assemble_prompt(bundle: &PromptBundle) -> Result<Vec<ChatMessage>, LlmError> {
    bundle.validate()?;
    let user = format!(
        "## Helper functions\n\n{}\n\n## Environment state\n\nFeatures available to the program (name: type):\n{}\n\n## Task\n\n{}\n",
        bundle.feature_library_text.trim_end(),
        bundle.state_schema_text.trim_end(),
        bundle.task_description.trim()
    );
    Ok(vec![
        ChatMessage { role: "system".into(), content: bundle.system_text.trim_end().to_string() },
        ChatMessage { role: "user".into(), content: user },
    ])
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndpointConfig {
    /// Base URL; requests go to `{base_url}/chat/completions`.
    pub base_url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub max_attempts: usize,
    pub backoff: Duration,
    pub timeout: Duration,
}

impl EndpointConfig {
    pub fn new(base_url: &str, model: &str) -> Self {
        Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key: None,
            model: model.to_string(),
            temperature: 1.0,
            max_attempts: 3,
            backoff: Duration::from_millis(500),
            timeout: Duration::from_secs(120),
        }
    }

    pub fn from_env() -> Result<Self, LlmError> {
        let base = std::env::var(ENV_BASE_URL).map_err(|_| LlmError::NotConfigured)?;
        let model = std::env::var(ENV_MODEL).map_err(|_| LlmError::NotConfigured)?;
        let mut cfg = Self::new(&base, &model);
        cfg.api_key = std::env::var(ENV_API_KEY).ok().filter(|k| !k.is_empty());
        Ok(cfg)
    }

    pub fn url(&self) -> String {
        format!("{}/chat/completions", self.base_url)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransportError {
    #[error("network error: {0}")]
    Network(String),
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("invalid JSON body: {0}")]
    Decode(String),
}

impl TransportError {
    fn retryable(&self) -> bool {
        match self {
            TransportError::Network(_) => true,
            TransportError::Status { status, .. } => *status == 429 || *status >= 500,
            TransportError::Decode(_) => false,
        }
    }
}

/// Sends one JSON POST and returns the decoded JSON response.
pub trait Transport {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &Json) -> Result<Json, TransportError>;
}

/// Blocking HTTP transport.
pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { agent }
    }
}

impl Transport for HttpTransport {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &Json) -> Result<Json, TransportError> {
        let mut req = self.agent.post(url).header("Content-Type", "application/json");
        if let Some(key) = bearer {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| TransportError::Network(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| TransportError::Network(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(TransportError::Status { status, body: text });
        }
        serde_json::from_str(&text).map_err(|e| TransportError::Decode(e.to_string()))
    }
}

fn completion_texts(resp: &Json) -> Result<Vec<String>, LlmError> {
    let choices = resp
        .get("choices")
        .and_then(Json::as_array)
        .ok_or_else(|| LlmError::Response("missing `choices` array".into()))?;
    choices
        .iter()
        .map(|c| {
            c.pointer("/message/content")
                .and_then(Json::as_str)
                .map(str::to_string)
                .ok_or_else(|| LlmError::Response("choice without message.content".into()))
        })
        .collect()
}

/// Fetch `n` completions, retrying transient failures with exponential
/// backoff. Keeps requesting until `n` texts are collected, since some
/// servers ignore `n`.
pub fn request_completions(
    messages: &[ChatMessage],
    cfg: &EndpointConfig,
    n: usize,
    transport: &dyn Transport,
    sleep: &mut dyn FnMut(Duration),
) -> Result<Vec<String>, LlmError> {
    let mut texts = Vec::with_capacity(n);
    while texts.len() < n {
        let body = json!({
            "model": cfg.model,
            "messages": messages,
            "temperature": cfg.temperature,
            "n": n - texts.len(),
        });
        let mut attempt = 0;
        let resp = loop {
            attempt += 1;
            match transport.post_json(&cfg.url(), cfg.api_key.as_deref(), &body) {
                Ok(r) => break r,
                Err(e) if e.retryable() && attempt < cfg.max_attempts => {
                    log::warn!("completion request failed ({e}); retrying");
                    sleep(cfg.backoff * 2u32.pow(attempt as u32 - 1));
                }
                Err(e) => return Err(LlmError::Transport { attempts: attempt, last: e }),
            }
        };
        let got = completion_texts(&resp)?;
        if got.is_empty() {
            return Err(LlmError::Response("no choices returned".into()));
        }
        texts.extend(got);
    }
    texts.truncate(n);
    Ok(texts)
}

/// Contents of the first fenced code block, or the whole text when there is none.
pub fn extract_code(text: &str) -> String {
    let Some(open) = text.find("```") else { return text.trim().to_string() };
    let after = &text[open + 3..];
    // skip an info string such as ```text
    let body_start = after.find('\n').map_or(after.len(), |i| i + 1);
    let body = &after[body_start..];
    match body.find("```") {
        Some(close) => body[..close].trim_end().to_string(),
        None => body.trim_end().to_string(),
    }
}

#[derive(Debug, Clone)]
pub struct Candidate {
    /// File name or completion index.
    pub label: String,
    pub raw_text: String,
    pub result: Result<ProgressProgram, String>,
}

impl Candidate {
    pub fn is_valid(&self) -> bool {
        self.result.is_ok()
    }

    pub fn program(&self) -> Option<&ProgressProgram> {
        self.result.as_ref().ok()
    }
}

#[derive(Debug, Clone, Default)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn valid_count(&self) -> usize {
        self.candidates.iter().filter(|c| c.is_valid()).count()
    }

    pub fn diagnostics(&self) -> Vec<String> {
        self.candidates
            .iter()
            .filter_map(|c| c.result.as_ref().err().map(|e| format!("{}: {}", c.label, e)))
            .collect()
    }

    /// Fail when no candidate is usable.
    pub fn require_valid(self) -> Result<Self, LlmError> {
        if self.valid_count() == 0 {
            Err(LlmError::AllInvalid(self.diagnostics()))
        } else {
            Ok(self)
        }
    }
}

/// Parse, type-check and probe-evaluate one candidate.
pub fn validate_candidate(label: &str, raw_text: &str, schema: &FeatureSchema, probe: &EnvFeatures) -> Candidate {
    let code = extract_code(raw_text);
    let result = parse(&code, schema).map_err(|e| e.to_string()).and_then(|p| {
        let report = p.evaluate(probe).map_err(|e| format!("probe evaluation failed: {e}"))?;
        if report.values.iter().all(|v| v.is_finite()) {
            Ok(p)
        } else {
            Err("probe evaluation produced a non-finite value".to_string())
        }
    });
    Candidate { label: label.to_string(), raw_text: raw_text.to_string(), result }
}

pub fn validate_all(texts: &[(String, String)], schema: &FeatureSchema, probe: &EnvFeatures) -> CandidateSet {
    CandidateSet { candidates: texts.iter().map(|(l, t)| validate_candidate(l, t, schema, probe)).collect() }
}

/// Query the endpoint for `bundle.n_samples` candidates and validate them.
pub fn request_candidates(
    bundle: &PromptBundle,
    cfg: &EndpointConfig,
    transport: &dyn Transport,
    schema: &FeatureSchema,
    probe: &EnvFeatures,
    sleep: &mut dyn FnMut(Duration),
) -> Result<CandidateSet, LlmError> {
    let messages = assemble_prompt(bundle)?;
    let texts = request_completions(&messages, cfg, bundle.n_samples, transport, sleep)?;
    let labelled: Vec<(String, String)> =
        texts.into_iter().enumerate().map(|(i, t)| (format!("completion {i}"), t)).collect();
    validate_all(&labelled, schema, probe).require_valid()
}

/// `.prog` files of a directory ordered by numeric stem, then by name.
pub fn read_fixture_dir(dir: &Path) -> Result<Vec<(String, String)>, LlmError> {
    let io_err = |source| LlmError::Io { path: dir.to_path_buf(), source };
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "prog"))
        .collect();
    let key = |p: &PathBuf| {
        let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        (stem.parse::<u64>().unwrap_or(u64::MAX), stem)
    };
    files.sort_by_key(key);
    files
        .into_iter()
        .map(|p| {
            let text = std::fs::read_to_string(&p).map_err(|source| LlmError::Io { path: p.clone(), source })?;
            let name = p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((name, text))
        })
        .collect()
}

/// First `n` fixture candidates from `root/<task>/`.
pub fn fixture_candidates(
    root: &Path,
    task: &str,
    n: usize,
    schema: &FeatureSchema,
    probe: &EnvFeatures,
) -> Result<CandidateSet, LlmError> {
    let dir = root.join(task);
    let mut texts = read_fixture_dir(&dir)?;
    if texts.len() < n {
        return Err(LlmError::NotEnoughFixtures { dir, found: texts.len(), needed: n });
    }
    texts.truncate(n);
    validate_all(&texts, schema, probe).require_valid()
}

/// Outcome of one candidate's training run, as needed for selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub final_success: f64,
    pub steps_to_threshold: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub index: usize,
    /// Every candidate finished with zero success.
    pub none_succeeded: bool,
}

/// Highest final success wins; ties go to the run that crossed the
/// threshold in fewer steps (never crossing loses), then to the lower index.
pub fn select_best(runs: &[RunSummary]) -> Option<Selection> {
    let better = |a: &RunSummary, b: &RunSummary| {
        if a.final_success != b.final_success {
            return a.final_success > b.final_success;
        }
        match (a.steps_to_threshold, b.steps_to_threshold) {
            (Some(x), Some(y)) => x < y,
            (Some(_), None) => true,
            _ => false,
        }
    };
    let mut best = 0;
    for (i, r) in runs.iter().enumerate().skip(1) {
        if better(r, &runs[best]) {
            best = i;
        }
    }
    (!runs.is_empty()).then(|| Selection { index: best, none_succeeded: runs.iter().all(|r| r.final_success <= 0.0) })
}
