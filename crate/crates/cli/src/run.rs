//! `run`: one training run per (candidate, seed).

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{Context, Result};
use progresscounts::envs::Task;
use progresscounts::llmgen::{select_best, RunSummary};
use progresscounts::rl::{train, MetricsRow};
use serde::{Deserialize, Serialize};

use crate::candidates::ResolvedCandidate;
use crate::config::ExperimentConfig;

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub task: String,
    pub mode: String,
    pub seed: u64,
    pub final_success: f64,
    pub steps_to_threshold: Option<u64>,
    #[serde(default)]
    pub candidate: String,
    #[serde(default)]
    pub env_steps: u64,
    #[serde(default)]
    pub episodes: u64,
    #[serde(default)]
    pub threshold: f64,
}

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";

pub fn run_dir(out: &Path, candidate: usize, seed: u64) -> PathBuf {
    out.join(format!("candidate_{candidate}")).join(format!("seed_{seed}"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Train one (candidate, seed) pair, streaming metrics to disk so a
/// failure leaves the rows written so far.
fn run_one(cfg: &ExperimentConfig, task: &Task, cand: &ResolvedCandidate, seed: u64) -> Result<Summary> {
    let dir = run_dir(&cfg.output_dir, cand.index, seed);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let file = File::create(dir.join(METRICS_FILE)).with_context(|| format!("creating metrics in {}", dir.display()))?;
    let mut csv = csv::Writer::from_writer(BufWriter::new(file));
    let train_cfg = cfg.train_config(seed, cfg.checkpoints.then(|| dir.clone()));
    let result = train(task, &cand.program, &train_cfg, |row: &MetricsRow| {
        csv.serialize(row).map_err(std::io::Error::other)?;
        csv.flush()
    });
    csv.flush()?;
    let log = result.with_context(|| format!("run {} failed", dir.display()))?;
    let summary = Summary {
        task: cfg.task.clone(),
        mode: cfg.variant.label().to_string(),
        seed,
        final_success: log.final_success,
        steps_to_threshold: log.steps_to_threshold,
        candidate: cand.label.clone(),
        env_steps: log.rows.last().map_or(0, |r| r.env_steps),
        episodes: log.episodes,
        threshold: cfg.threshold,
    };
    write_json(&dir.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

#[derive(Debug, Serialize)]
struct CandidateScore {
    index: usize,
    label: String,
    mean_final_success: f64,
    mean_steps_to_threshold: Option<f64>,
}

#[derive(Debug, Serialize)]
struct SelectionFile {
    selected: usize,
    label: String,
    none_succeeded: bool,
    candidates: Vec<CandidateScore>,
}

pub struct RunOutcome {
    pub summaries: Vec<Summary>,
    pub failures: Vec<String>,
}

/// Train every (candidate, seed) pair on up to `jobs` threads, then write
/// `selection.json` over the candidates that completed all seeds.
pub fn run_all(cfg: &ExperimentConfig, candidates: &[ResolvedCandidate], jobs: usize) -> Result<RunOutcome> {
    fs::create_dir_all(&cfg.output_dir).with_context(|| format!("creating {}", cfg.output_dir.display()))?;
    write_json(&cfg.output_dir.join("config.json"), cfg)?;
    for cand in candidates {
        let dir = cfg.output_dir.join(format!("candidate_{}", cand.index));
        fs::create_dir_all(&dir)?;
        let mut text = cand.text.trim_end().to_string();
        text.push('\n');
        fs::write(dir.join("program.prog"), text)?;
    }

    let task = cfg.task();
    let work: Vec<(usize, u64)> =
        (0..candidates.len()).flat_map(|c| cfg.seeds.iter().map(move |&s| (c, s))).collect();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, u64, Result<Summary, String>)>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, work.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(c, seed)) = work.get(i) else { break };
                let cand = &candidates[c];
                log::info!("training {} seed {seed}", cand.label);
                let r = run_one(cfg, &task, cand, seed).map_err(|e| format!("{e:#}"));
                if let Ok(s) = &r {
                    println!(
                        "{} seed {}: final_success {:.3}, steps_to_threshold {}",
                        cand.label,
                        seed,
                        s.final_success,
                        s.steps_to_threshold.map_or("not reached".to_string(), |v| v.to_string())
                    );
                }
                results.lock().expect("results lock").push((c, seed, r));
            });
        }
    });

    let mut results = results.into_inner().expect("results lock");
    results.sort_by_key(|(c, s, _)| (*c, *s));
    let mut summaries = Vec::new();
    let mut failures = Vec::new();
    let mut per_candidate: Vec<Vec<Summary>> = vec![Vec::new(); candidates.len()];
    for (c, _, r) in results {
        match r {
            Ok(s) => {
                per_candidate[c].push(s.clone());
                summaries.push(s);
            }
            Err(e) => failures.push(e),
        }
    }

    let complete: Vec<(usize, RunSummary, CandidateScore)> = per_candidate
        .iter()
        .enumerate()
        .filter(|(_, runs)| runs.len() == cfg.seeds.len())
        .map(|(c, runs)| {
            let n = runs.len() as f64;
            let mean_final = runs.iter().map(|r| r.final_success).sum::<f64>() / n;
            let steps: Option<Vec<u64>> = runs.iter().map(|r| r.steps_to_threshold).collect();
            let mean_steps = steps.map(|v| v.iter().sum::<u64>() as f64 / n);
            let run = RunSummary { final_success: mean_final, steps_to_threshold: mean_steps.map(|m| m.round() as u64) };
            let score = CandidateScore {
                index: candidates[c].index,
                label: candidates[c].label.clone(),
                mean_final_success: mean_final,
                mean_steps_to_threshold: mean_steps,
            };
            (c, run, score)
        })
        .collect();
    let runs: Vec<RunSummary> = complete.iter().map(|(_, r, _)| *r).collect();
    if let Some(sel) = select_best(&runs) {
        let chosen = &candidates[complete[sel.index].0];
        if sel.none_succeeded {
            log::warn!("no candidate produced any success; selection is arbitrary");
        }
        let file = SelectionFile {
            selected: chosen.index,
            label: chosen.label.clone(),
            none_succeeded: sel.none_succeeded,
            candidates: complete.into_iter().map(|(_, _, s)| s).collect(),
        };
        write_json(&cfg.output_dir.join("selection.json"), &file)?;
    }
    Ok(RunOutcome { summaries, failures })
}
