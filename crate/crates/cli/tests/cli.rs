use std::path::Path;
use std::process::{Command, Output};

fn unfoldcp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unfoldcp"))
        .args(args)
        .current_dir(dir)
        .env_clear()
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = unfoldcp(dir.path(), &["generate", "--preset", "sbm-paper", "--seed", "7", "--output", out]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for file in ["edges.csv", "nodes.csv", "labels.csv", "dataset.toml"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
    let manifest = std::fs::read_to_string(dir.path().join("a/dataset.toml")).unwrap();
    assert!(manifest.contains("seed = 7"));
    assert!(manifest.contains("windows = 8"));
}

#[test]
fn config_errors_exit_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.toml"),
        "[dataset]\npreset = \"sbm-paper\"\n\n[regime]\nratios = [0.3, 0.1, 0.35, 0.35]\n",
    )
    .unwrap();
    let o = unfoldcp(dir.path(), &["run", "--config", "bad.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("regime.ratios"), "{}", stderr(&o));

    let o = unfoldcp(dir.path(), &["run", "--config", "no_such_preset"]);
    assert_eq!(o.status.code(), Some(1));

    std::fs::write(dir.path().join("typo.toml"), "[dataset]\npreset = \"sbm-paper\"\n[model]\nhiden_dim = 3\n").unwrap();
    let o = unfoldcp(dir.path(), &["run", "--config", "typo.toml"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn run_writes_hashed_outputs() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("exp.toml"),
        "output = \"out\"\nrepresentation = \"unfolded\"\n\n[dataset]\npreset = \"sbm-paper\"\nseed = 1\n\n\
         [regime]\nn_fits = 2\nn_permutations = 3\n",
    )
    .unwrap();
    let o = unfoldcp(dir.path(), &["run", "--config", "exp.toml", "--jobs", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("ugcn / transductive (6 instances, 0 skipped)"), "{}", stdout(&o));

    let out = dir.path().join("out");
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let hash_line = summary.lines().next().unwrap();
    assert!(hash_line.starts_with("# config_hash="));
    assert_eq!(hash_line.len(), "# config_hash=".len() + 64);
    assert!(summary.contains("ugcn,transductive,coverage,"));
    let per_time = std::fs::read_to_string(out.join("per_time.csv")).unwrap();
    assert_eq!(per_time.lines().next().unwrap(), hash_line);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["rng_algorithm"], "chacha20");
    assert_eq!(format!("# config_hash={}", manifest["config_hash"].as_str().unwrap()), hash_line);

    // Same config, same bytes.
    let first = summary.clone();
    let o = unfoldcp(dir.path(), &["run", "--config", "exp.toml"]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(out.join("summary.csv")).unwrap(), first);
}

#[test]
fn reproduce_small_grid_and_skips_missing_real_data() {
    let dir = tempfile::tempdir().unwrap();
    let o = unfoldcp(
        dir.path(),
        &[
            "reproduce",
            "table-coverage",
            "--dataset",
            "sbm",
            "--dataset",
            "school",
            "--fits",
            "1",
            "--permutations",
            "2",
            "--output",
            "cmp",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("cmp/comparison.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 16);
    let sbm: Vec<&&str> = rows.iter().filter(|r| r.starts_with("sbm,")).collect();
    assert_eq!(sbm.len(), 8);
    assert!(sbm.iter().all(|r| r.ends_with(",PASS") || r.ends_with(",FAIL")));
    let school: Vec<&&str> = rows.iter().filter(|r| r.starts_with("school,")).collect();
    assert_eq!(school.len(), 8);
    assert!(school.iter().all(|r| r.ends_with(",SKIPPED")));
    assert!(stdout(&o).contains("no manifest"));
}

#[test]
fn presets_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let o = unfoldcp(dir.path(), &["presets"]);
    assert!(o.status.success());
    let names = stdout(&o);
    assert_eq!(names.lines().count(), 24);
    assert!(names.lines().any(|l| l == "sbm_ugcn_semiind"));
}
