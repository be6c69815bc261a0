use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_progresscounts"))
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run_cli(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn cli")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A small, fast experiment config in `dir`.
fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let base = dir.join("base.toml");
    fs::write(
        &base,
        "seeds = [0]\ntotal_steps = 2048\n[ppo]\nnum_envs = 4\nhorizon = 64\nminibatch_size = 64\nepochs = 2\nhidden = 16\n",
    )
    .unwrap();
    let path = dir.join(name);
    fs::write(&path, format!("base = \"base.toml\"\n{body}")).unwrap();
    path
}

fn read_summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn metric_columns(path: &Path) -> Vec<Vec<String>> {
    let mut rd = csv::Reader::from_path(path).unwrap();
    let headers = rd.headers().unwrap().clone();
    rd.records()
        .map(|r| {
            let r = r.unwrap();
            headers.iter().zip(r.iter()).filter(|(h, _)| *h != "wall_clock").map(|(_, v)| v.to_string()).collect()
        })
        .collect()
}

#[test]
fn run_writes_metrics_and_summary() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "exp.toml",
        &format!("task = \"keycorridor-s3\"\nvariant = \"noveld\"\noutput_dir = \"{}\"\n", out.display()),
    );
    let o = run_cli(&["run", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));

    let run = out.join("candidate_0/seed_0");
    let summary = read_summary(&run);
    for key in ["task", "mode", "seed", "final_success", "steps_to_threshold"] {
        assert!(summary.get(key).is_some(), "missing {key}");
    }
    assert_eq!(summary["task"], "keycorridor-s3");
    assert_eq!(summary["mode"], "noveld");

    let mut rd = csv::Reader::from_path(run.join("metrics.csv")).unwrap();
    let headers: Vec<String> = rd.headers().unwrap().iter().map(str::to_string).collect();
    assert_eq!(
        headers,
        ["iteration", "env_steps", "mean_episode_reward", "success_rate", "distinct_bins", "intrinsic_mean", "wall_clock"]
    );
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 8);
    let steps: Vec<u64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(steps.windows(2).all(|w| w[0] < w[1]));
    let first_hit = rows.iter().find(|r| r[3].parse::<f64>().unwrap() >= 0.75).map(|r| r[1].parse::<u64>().unwrap());
    assert_eq!(summary["steps_to_threshold"].as_u64(), first_hit);
    assert!(out.join("config.json").is_file());
    assert!(out.join("selection.json").is_file());
    assert!(out.join("candidate_0/program.prog").is_file());
}

#[test]
fn identical_configs_reproduce_metrics() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "exp.toml", "task = \"doorkey\"\nvariant = \"counts\"\noutput_dir = \"unused\"\n");
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        let o = run_cli(&["run", cfg.to_str().unwrap(), "--output-dir", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = metric_columns(&tmp.path().join("a/candidate_0/seed_0/metrics.csv"));
    let b = metric_columns(&tmp.path().join("b/candidate_0/seed_0/metrics.csv"));
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn candidate_grid_creates_one_dir_per_pair() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let fixtures = workspace_root().join("fixtures/doorkey");
    let cfg = write_config(
        tmp.path(),
        "exp.toml",
        &format!(
            "task = \"doorkey\"\nvariant = \"noveld\"\nseeds = [0, 1]\ntotal_steps = 256\noutput_dir = \"{}\"\n\
             [candidates]\nsource = \"endpoint\"\ncount = 4\ndir = \"{}\"\n",
            out.display(),
            fixtures.display()
        ),
    );
    let o = run_cli(&["--offline", "run", cfg.to_str().unwrap(), "--jobs", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for c in 0..4 {
        for s in 0..2 {
            assert!(out.join(format!("candidate_{c}/seed_{s}/summary.json")).is_file());
        }
    }
    let sel: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("selection.json")).unwrap()).unwrap();
    assert_eq!(sel["candidates"].as_array().unwrap().len(), 4);
}

#[test]
fn invalid_configs_exit_with_status_two() {
    let tmp = TempDir::new().unwrap();
    let missing_task = write_config(tmp.path(), "a.toml", "variant = \"counts\"\noutput_dir = \"o\"\n");
    let o = run_cli(&["run", missing_task.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing `task`"), "{}", stderr(&o));

    let bad_key = write_config(tmp.path(), "b.toml", "task = \"doorkey\"\nvariant = \"counts\"\noutput_dir = \"o\"\nwarp = 1\n");
    assert_eq!(run_cli(&["run", bad_key.to_str().unwrap()]).status.code(), Some(2));

    let o = run_cli(&["run", tmp.path().join("nope.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let tmp = TempDir::new().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let cfg = write_config(
        tmp.path(),
        "exp.toml",
        &format!("task = \"doorkey\"\nvariant = \"counts\"\noutput_dir = \"{}\"\n", blocker.join("out").display()),
    );
    assert_eq!(run_cli(&["run", cfg.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn compare_reports_modes_and_differences() {
    let tmp = TempDir::new().unwrap();
    let mut sets = Vec::new();
    for variant in ["noveld", "sparse_only"] {
        let out = tmp.path().join(variant);
        let cfg = write_config(
            tmp.path(),
            &format!("{variant}.toml"),
            &format!("task = \"doorkey\"\nvariant = \"{variant}\"\nseeds = [0, 1]\noutput_dir = \"{}\"\n", out.display()),
        );
        assert!(run_cli(&["run", cfg.to_str().unwrap()]).status.success());
        sets.push(out);
    }
    let long = tmp.path().join("long.csv");
    let o = run_cli(&["compare", sets[0].to_str().unwrap(), sets[1].to_str().unwrap(), "--csv", long.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = stdout(&o);
    assert!(table.contains("noveld") && table.contains("sparse_only"), "{table}");
    assert!(table.contains("not reached"), "{table}");
    let mut rd = csv::Reader::from_path(&long).unwrap();
    assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>(), [
        "run_set", "mode", "candidate", "seed", "iteration", "env_steps", "metric", "value"
    ]);
    assert_eq!(rd.records().count(), 2 * 2 * 8 * 4);

    // the same run set twice differs by nothing
    let o = run_cli(&["compare", sets[0].to_str().unwrap(), sets[0].to_str().unwrap()]);
    let table = stdout(&o);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 3, "{table}");
    let tail: Vec<&str> = lines[2].split_whitespace().rev().take(2).collect();
    assert_eq!(tail, ["0.000", "0"], "{table}");
}

#[test]
fn compare_rejects_bad_input() {
    let o = run_cli(&["compare"]);
    assert_eq!(o.status.code(), Some(2));

    let tmp = TempDir::new().unwrap();
    let mut sets = Vec::new();
    for task in ["doorkey", "keycorridor-s3"] {
        let out = tmp.path().join(task);
        let cfg = write_config(
            tmp.path(),
            &format!("{task}.toml"),
            &format!("task = \"{task}\"\nvariant = \"counts\"\ntotal_steps = 256\noutput_dir = \"{}\"\n", out.display()),
        );
        assert!(run_cli(&["run", cfg.to_str().unwrap()]).status.success());
        sets.push(out);
    }
    let o = run_cli(&["compare", sets[0].to_str().unwrap(), sets[1].to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("disagree on the task"), "{}", stderr(&o));
}

#[test]
fn validate_candidates_reports_counts_and_locations() {
    let good = workspace_root().join("fixtures/keycorridor-s3");
    let o = run_cli(&["validate-candidates", "--task", "keycorridor-s3", good.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("4/4 valid"), "{}", stdout(&o));

    let tmp = TempDir::new().unwrap();
    for entry in fs::read_dir(&good).unwrap() {
        let p = entry.unwrap().path();
        fs::copy(&p, tmp.path().join(p.file_name().unwrap())).unwrap();
    }
    fs::write(tmp.path().join("2.prog"), "subtask decreasing: path_len(bfs(grid, agent_pos)\n").unwrap();
    let o = run_cli(&["validate-candidates", "--task", "keycorridor-s3", tmp.path().to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("3/4 valid"), "{text}");
    assert!(text.contains("2.prog: invalid: line 1, column"), "{text}");

    let empty = TempDir::new().unwrap();
    let o = run_cli(&["validate-candidates", "--task", "keycorridor-s3", empty.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("warning"), "{}", stderr(&o));
}

#[test]
fn offline_gen_copies_valid_fixtures() {
    let tmp = TempDir::new().unwrap();
    let fixtures = workspace_root().join("fixtures/reach-carry");
    let out = tmp.path().join("gen");
    let o = run_cli(&[
        "--offline",
        "gen",
        "--task",
        "reach-carry",
        "--out",
        out.to_str().unwrap(),
        "--fixtures",
        fixtures.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("4/4 valid"));
    assert_eq!(fs::read_dir(&out).unwrap().count(), 4);

    let o = run_cli(&["--offline", "gen", "--task", "nope", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bundled_configs_load() {
    let root = workspace_root().join("configs");
    let mut checked = 0;
    for entry in fs::read_dir(&root).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if name.starts_with("base_") || path.extension().is_none_or(|e| e != "toml") {
            continue;
        }
        // an empty seed list fails validation after loading, proving the file parsed
        let tmp = TempDir::new().unwrap();
        let probe = tmp.path().join("probe.toml");
        fs::write(&probe, format!("base = \"{}\"\nseeds = []\n", path.display())).unwrap();
        let o = run_cli(&["run", probe.to_str().unwrap()]);
        assert!(stderr(&o).contains("`seeds` must not be empty"), "{name}: {}", stderr(&o));
        checked += 1;
    }
    assert!(checked >= 6);
}
