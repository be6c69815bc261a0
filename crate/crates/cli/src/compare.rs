//! `compare`: aggregate finished run directories by mode.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use progresscounts::rl::MetricsRow;
use serde::Serialize;

use crate::run::{Summary, METRICS_FILE, SUMMARY_FILE};

#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub run_set: String,
    /// Position of the run set on the command line.
    pub set_index: usize,
    pub dir: PathBuf,
    pub summary: Summary,
}

/// Every `summary.json` below `root`, in path order.
pub fn load_run_set(root: &Path) -> Result<Vec<LoadedRun>> {
    let mut found = Vec::new();
    collect(root, &mut found)?;
    found.sort();
    let label = root.display().to_string();
    found
        .into_iter()
        .map(|dir| {
            let path = dir.join(SUMMARY_FILE);
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let summary: Summary = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            Ok(LoadedRun { run_set: label.clone(), set_index: 0, dir, summary })
        })
        .collect()
}

fn collect(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))?;
    if dir.join(SUMMARY_FILE).is_file() {
        out.push(dir.to_path_buf());
    }
    for entry in entries {
        let path = entry?.path();
        if path.is_dir() {
            collect(&path, out)?;
        }
    }
    Ok(())
}

/// Mean and sample standard deviation; `None` for an empty slice.
pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Some((mean, var.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupStats {
    pub run_set: String,
    pub mode: String,
    pub runs: usize,
    pub reached: usize,
    /// Over runs that reached the threshold.
    pub steps_mean: Option<f64>,
    pub steps_std: Option<f64>,
    /// Over all runs, counting a miss as the run's full step budget.
    pub steps_mean_with_misses: f64,
    pub final_mean: f64,
    pub final_std: f64,
}

pub fn group_stats(runs: &[LoadedRun]) -> Vec<GroupStats> {
    let mut groups: BTreeMap<(usize, String, String), Vec<&Summary>> = BTreeMap::new();
    let mut order = Vec::new();
    for r in runs {
        let key = (r.set_index, r.run_set.clone(), r.summary.mode.clone());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(&r.summary);
    }
    order
        .into_iter()
        .map(|key| {
            let members = &groups[&key];
            let reached: Vec<f64> = members.iter().filter_map(|s| s.steps_to_threshold.map(|v| v as f64)).collect();
            let with_misses: Vec<f64> =
                members.iter().map(|s| s.steps_to_threshold.unwrap_or(s.env_steps) as f64).collect();
            let finals: Vec<f64> = members.iter().map(|s| s.final_success).collect();
            let steps = mean_std(&reached);
            let (final_mean, final_std) = mean_std(&finals).unwrap_or((0.0, 0.0));
            GroupStats {
                run_set: key.1,
                mode: key.2,
                runs: members.len(),
                reached: reached.len(),
                steps_mean: steps.map(|s| s.0),
                steps_std: steps.map(|s| s.1),
                steps_mean_with_misses: mean_std(&with_misses).map_or(0.0, |s| s.0),
                final_mean,
                final_std,
            }
        })
        .collect()
}

/// Human-readable table; differences are relative to the first row.
pub fn render_table(stats: &[GroupStats]) -> String {
    let mut out = String::new();
    let width = stats.iter().map(|s| s.run_set.len()).max().unwrap_or(7).max(7);
    writeln!(
        out,
        "{:<width$}  {:<18}  {:>7}  {:>22}  {:>15}  {:>10}  {:>8}",
        "run_set", "mode", "reached", "steps_to_threshold", "final_success", "d_steps", "d_final"
    )
    .unwrap();
    let first = stats.first();
    for s in stats {
        let steps = match (s.steps_mean, s.steps_std) {
            (Some(m), Some(sd)) => format!("{m:.0} ± {sd:.0}"),
            _ => "not reached".to_string(),
        };
        let (d_steps, d_final) = first.map_or((0.0, 0.0), |f| {
            (s.steps_mean_with_misses - f.steps_mean_with_misses, s.final_mean - f.final_mean)
        });
        writeln!(
            out,
            "{:<width$}  {:<18}  {:>7}  {:>22}  {:>15}  {:>10.0}  {:>8.3}",
            s.run_set,
            s.mode,
            format!("{}/{}", s.reached, s.runs),
            steps,
            format!("{:.3} ± {:.3}", s.final_mean, s.final_std),
            d_steps,
            d_final
        )
        .unwrap();
    }
    out
}

/// Long-format metrics: one row per (run, iteration, metric).
pub fn write_long_csv(runs: &[LoadedRun], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["run_set", "mode", "candidate", "seed", "iteration", "env_steps", "metric", "value"])?;
    for r in runs {
        let metrics = r.dir.join(METRICS_FILE);
        let mut rd = csv::Reader::from_path(&metrics).with_context(|| format!("reading {}", metrics.display()))?;
        for row in rd.deserialize() {
            let row: MetricsRow = row.with_context(|| format!("parsing {}", metrics.display()))?;
            for (name, value) in [
                ("mean_episode_reward", row.mean_episode_reward),
                ("success_rate", row.success_rate),
                ("distinct_bins", row.distinct_bins as f64),
                ("intrinsic_mean", row.intrinsic_mean),
            ] {
                w.write_record([
                    r.run_set.as_str(),
                    r.summary.mode.as_str(),
                    r.summary.candidate.as_str(),
                    &r.summary.seed.to_string(),
                    &row.iteration.to_string(),
                    &row.env_steps.to_string(),
                    name,
                    &value.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, thiserror::Error)]
#[error("run sets disagree on the task: {0}")]
pub struct TaskMismatch(pub String);

/// Load all run sets and check that they share one task.
pub fn load_all(dirs: &[PathBuf]) -> Result<Vec<LoadedRun>> {
    let mut runs = Vec::new();
    for (i, d) in dirs.iter().enumerate() {
        let mut set = load_run_set(d)?;
        set.iter_mut().for_each(|r| r.set_index = i);
        if set.is_empty() {
            bail!("no {SUMMARY_FILE} found under {}", d.display());
        }
        runs.extend(set);
    }
    let mut tasks: Vec<&str> = runs.iter().map(|r| r.summary.task.as_str()).collect();
    tasks.sort_unstable();
    tasks.dedup();
    if tasks.len() > 1 {
        return Err(TaskMismatch(tasks.join(", ")).into());
    }
    Ok(runs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(set: &str, mode: &str, steps: Option<u64>, fin: f64) -> LoadedRun {
        LoadedRun {
            run_set: set.into(),
            set_index: 0,
            dir: PathBuf::new(),
            summary: Summary {
                task: "t".into(),
                mode: mode.into(),
                seed: 0,
                final_success: fin,
                steps_to_threshold: steps,
                candidate: "reference".into(),
                env_steps: 1000,
                episodes: 10,
                threshold: 0.75,
            },
        }
    }

    #[test]
    fn mean_std_values() {
        assert_eq!(mean_std(&[]), None);
        assert_eq!(mean_std(&[3.0]), Some((3.0, 0.0)));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn groups_by_set_and_mode() {
        let runs = [
            run("a", "counts", Some(400), 0.8),
            run("a", "counts", None, 0.2),
            run("a", "sparse_only", None, 0.0),
            run("b", "counts", Some(600), 0.9),
        ];
        let stats = group_stats(&runs);
        assert_eq!(stats.len(), 3);
        assert_eq!((stats[0].reached, stats[0].runs), (1, 2));
        assert_eq!(stats[0].steps_mean, Some(400.0));
        assert_eq!(stats[0].steps_mean_with_misses, 700.0);
        assert_eq!(stats[1].steps_mean, None);
        assert!(render_table(&stats).contains("not reached"));
    }
}
