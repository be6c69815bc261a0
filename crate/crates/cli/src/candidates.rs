//! Where progress programs come from: the bundled reference, fixture
//! files, or a live endpoint.

use std::path::{Path, PathBuf};

use progresscounts::dsl::{parse, EnvFeatures, ProgressProgram};
use progresscounts::envs::Task;
use progresscounts::llmgen::{
    read_fixture_dir, request_candidates, validate_all, CandidateSet, EndpointConfig, HttpTransport, LlmError,
    PromptBundle,
};

use crate::config::CandidateSource;

#[derive(Debug, Clone)]
pub struct ResolvedCandidate {
    /// Position in the generated or fixture list.
    pub index: usize,
    pub label: String,
    pub text: String,
    pub program: ProgressProgram,
}

pub fn default_fixture_dir(task: &str) -> PathBuf {
    Path::new("fixtures").join(task)
}

/// Reset state used to probe-evaluate candidates.
pub fn probe_features(task: &Task) -> EnvFeatures {
    task.make_env().reset(0)
}

pub fn fixture_set(task: &Task, dir: &Path, count: Option<usize>) -> Result<CandidateSet, LlmError> {
    let mut texts = read_fixture_dir(dir)?;
    if let Some(n) = count {
        if texts.len() < n {
            return Err(LlmError::NotEnoughFixtures { dir: dir.to_path_buf(), found: texts.len(), needed: n });
        }
        texts.truncate(n);
    }
    Ok(validate_all(&texts, &task.schema, &probe_features(task)))
}

pub fn endpoint_set(task: &Task, count: usize) -> Result<CandidateSet, LlmError> {
    let cfg = EndpointConfig::from_env()?;
    let transport = HttpTransport::new(cfg.timeout);
    let bundle = PromptBundle::for_task(task, count);
    request_candidates(&bundle, &cfg, &transport, &task.schema, &probe_features(task), &mut std::thread::sleep)
}

/// Valid candidates for a run. Invalid ones are reported and skipped.
pub fn resolve(source: &CandidateSource, task: &Task, offline: bool) -> Result<Vec<ResolvedCandidate>, LlmError> {
    let set = match source {
        CandidateSource::Reference => {
            let program = parse(&task.reference_program, &task.schema)
                .unwrap_or_else(|e| panic!("bundled program for {} does not parse: {e}", task.spec.name));
            return Ok(vec![ResolvedCandidate {
                index: 0,
                label: "reference".into(),
                text: task.reference_program.clone(),
                program,
            }]);
        }
        CandidateSource::Fixtures { dir, count } => {
            let dir = dir.clone().unwrap_or_else(|| default_fixture_dir(&task.spec.name));
            fixture_set(task, &dir, Some(*count))?
        }
        CandidateSource::Endpoint { count, dir } if offline => {
            let dir = dir.clone().unwrap_or_else(|| default_fixture_dir(&task.spec.name));
            log::info!("offline: reading candidates from {}", dir.display());
            fixture_set(task, &dir, Some(*count))?
        }
        CandidateSource::Endpoint { count, .. } => endpoint_set(task, *count)?,
    };
    for diag in set.diagnostics() {
        log::warn!("skipping invalid candidate {diag}");
    }
    let set = set.require_valid()?;
    Ok(set
        .candidates
        .into_iter()
        .enumerate()
        .filter_map(|(index, c)| {
            let program = c.program()?.clone();
            Some(ResolvedCandidate { index, label: c.label, text: progresscounts::llmgen::extract_code(&c.raw_text), program })
        })
        .collect())
}
