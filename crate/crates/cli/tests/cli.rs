use promptner_cli::workdir::{verify_chain, Workdir};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const ALL: [&str; 12] = [
    "ingest",
    "segment",
    "build-datasets",
    "gen-prompts",
    "select-prompts",
    "infer",
    "evaluate",
    "report",
    "export-sft",
    "export-dpo",
    "gate-dpo",
    "token-usage",
];

fn config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini/config.toml")
}

fn promptner(work: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_promptner"))
        .arg("-c")
        .arg(config())
        .args(args)
        .arg("--workdir")
        .arg(work)
        .output()
        .expect("binary runs")
}

fn run_ok(work: &Path, args: &[&str]) {
    let out = promptner(work, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

#[test]
fn full_run_is_reproducible_and_chained() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for cmd in ALL {
        run_ok(&a, &[cmd]);
    }
    let first = snapshot(&a);
    assert!(first.contains_key(Path::new("usage/token_usage.json")));
    assert!(verify_chain(&Workdir::new(&a)).unwrap().is_empty());

    for cmd in ALL {
        run_ok(&a, &[cmd]);
        run_ok(&b, &[cmd]);
    }
    assert_eq!(snapshot(&a), first, "rerun changed artifacts");
    assert_eq!(snapshot(&b).keys().collect::<Vec<_>>(), first.keys().collect::<Vec<_>>());
    for (path, bytes) in snapshot(&b) {
        if !path.starts_with("manifests") {
            assert_eq!(&bytes, &first[&path], "{} differs between workdirs", path.display());
        }
    }

    std::fs::write(a.join("eval/report.json"), "{}\n").unwrap();
    let problems = verify_chain(&Workdir::new(&a)).unwrap();
    assert!(problems.iter().any(|p| p.contains("eval/report.json")), "{problems:?}");
}

#[test]
fn missing_predecessor_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = promptner(dir.path(), &["infer"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing datasets/index.json; run `promptner build-datasets` first"), "{err}");
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(promptner(dir.path(), &["ingest", "--no-such-key", "1"]).status.code(), Some(1));
    assert_eq!(promptner(dir.path(), &["ingest", "--seed", "seven"]).status.code(), Some(1));
    assert_eq!(promptner(dir.path(), &["ingest", "--train-ratio", "0.9"]).status.code(), Some(1));
    assert_eq!(promptner(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(promptner(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn unanswerable_backend_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let rules = dir.path().join("rules.jsonl");
    std::fs::write(&rules, "{\"user\": \"^never$\", \"response\": \"x\"}\n").unwrap();
    let work = dir.path().join("work");
    let rules = rules.to_str().unwrap();
    for cmd in ["ingest", "segment", "build-datasets"] {
        run_ok(&work, &[cmd, "--mock-rules", rules]);
    }
    let out = promptner(&work, &["gen-prompts", "--mock-rules", rules]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
