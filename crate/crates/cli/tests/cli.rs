use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bridgechat"))
}

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin()
        .args(args)
        .current_dir(dir)
        .env_remove("RUST_LOG")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn generate(dir: &Path, out: &str, n: &str) -> Output {
    let config = data("mock.toml");
    run(
        &[
            "generate",
            "--config",
            config.to_str().unwrap(),
            "--n",
            n,
            "--out",
            out,
        ],
        dir,
    )
}

#[test]
fn generate_is_reproducible_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    assert!(generate(dir.path(), "a.jsonl", "25").status.success());
    assert!(generate(dir.path(), "b.jsonl", "25").status.success());
    let a = fs::read(dir.path().join("a.jsonl")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.jsonl")).unwrap());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a.jsonl.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 2024);
    assert_eq!(manifest["n_dialogues"], 25);
    assert_eq!(manifest["config"]["transition"]["decoding"]["top_k"], 80);
    assert_eq!(manifest["config"]["io"]["output_path"], "a.jsonl");
    assert!(manifest["version"].is_string());
}

#[test]
fn seed_and_mode_flags_apply() {
    let dir = tempfile::tempdir().unwrap();
    let config = data("mock.toml");
    let c = config.to_str().unwrap();
    let o = run(
        &[
            "generate", "--config", c, "--n", "10", "--out", "s.jsonl", "--mode", "sim", "--seed", "7",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let body = fs::read_to_string(dir.path().join("s.jsonl")).unwrap();
    assert!(body.lines().all(|l| l.contains("\"provenance\":\"SIMULATION\"")));
    assert!(body.contains("\"id\":\"dlg-7-"));
}

#[test]
fn env_override_reaches_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = data("mock.toml");
    let o = bin()
        .args(["generate", "--config", config.to_str().unwrap(), "--n", "2"])
        .env("BRIDGECHAT__IO__OUTPUT_PATH", "env.jsonl")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = fs::read_to_string(dir.path().join("env.jsonl.manifest.json")).unwrap();
    assert!(manifest.contains("\"output_path\": \"env.jsonl\""));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["generate", "--n", "x"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(
        run(
            &["export-amt", "--corpus", "c", "--task", "4", "--out", "o"],
            dir.path()
        )
        .status
        .code(),
        Some(1)
    );
    assert_eq!(run(&["--help"], dir.path()).status.code(), Some(0));
    assert_eq!(run(&["--version"], dir.path()).status.code(), Some(0));
    let missing = run(&["stats", "--corpus", "missing.jsonl"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("missing.jsonl"));
    fs::write(dir.path().join("bad.toml"), "[detection]\nthreshold = \"high\"\n").unwrap();
    let bad = run(&["generate", "--config", "bad.toml", "--n", "1"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("detection.threshold"));
}

#[test]
fn stats_table_and_json() {
    let dir = tempfile::tempdir().unwrap();
    assert!(generate(dir.path(), "c.jsonl", "12").status.success());
    let table = run(&["stats", "--corpus", "c.jsonl"], dir.path());
    assert!(table.status.success());
    assert!(stdout(&table).contains("Total"));
    let json = run(&["stats", "--corpus", "c.jsonl", "--json"], dir.path());
    let v: serde_json::Value = serde_json::from_str(&stdout(&json)).unwrap();
    assert_eq!(v["total"]["count"], 12);
}

#[test]
fn tod_qa_from_sgd() {
    let dir = tempfile::tempdir().unwrap();
    let sgd = data("sgd_mock");
    let o = run(
        &[
            "build-tod-qa",
            "--sgd",
            sgd.to_str().unwrap(),
            "--out",
            "qa.jsonl",
            "--no-downsample",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lines = fs::read_to_string(dir.path().join("qa.jsonl")).unwrap();
    let rows: Vec<serde_json::Value> = lines.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len() % 6, 0);
    assert!(rows.iter().all(|r| r["answer"] == "yes" || r["answer"] == "no"));
    assert!(stdout(&o).contains("1 dialogue(s) skipped"));

    let all = run(
        &[
            "build-tod-qa",
            "--sgd",
            sgd.to_str().unwrap(),
            "--out",
            "all.jsonl",
            "--all-intents",
            "--no-downsample",
        ],
        dir.path(),
    );
    assert!(stdout(&all).contains("0 dialogue(s) skipped"));
}

#[test]
fn transition_data_from_corpus_and_otters() {
    let dir = tempfile::tempdir().unwrap();
    assert!(generate(dir.path(), "c.jsonl", "5").status.success());
    fs::write(dir.path().join("o.tsv"), "a\tb\tc\nbroken\n").unwrap();
    let o = run(
        &[
            "build-transition-data",
            "--corpus",
            "c.jsonl",
            "--otters",
            "o.tsv",
            "--out",
            "t.jsonl",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    assert!(stdout(&o).contains("otters: 1 triples, 1 skipped"));
    let lines = fs::read_to_string(dir.path().join("t.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 6);
    assert!(lines
        .lines()
        .last()
        .unwrap()
        .contains("\"source\":\"past: a future: c\""));
    assert_eq!(
        run(&["build-transition-data", "--out", "t.jsonl"], dir.path())
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn export_then_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    assert!(generate(dir.path(), "c.jsonl", "4").status.success());
    let o = run(
        &[
            "export-amt",
            "--corpus",
            "c.jsonl",
            "--task",
            "1",
            "--out",
            "t1.csv",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    assert!(dir.path().join("t1.instructions.txt").exists());

    let corpus = fs::read_to_string(dir.path().join("c.jsonl")).unwrap();
    let ids: Vec<String> = corpus
        .lines()
        .map(|l| {
            serde_json::from_str::<serde_json::Value>(l).unwrap()["id"]
                .as_str()
                .unwrap()
                .to_string()
        })
        .collect();
    let mut csv = String::from("dialogue_id,worker_id,q1,q2,q3\n");
    for id in &ids {
        for (w, s) in [("a", 3), ("b", 4), ("c", 5)] {
            csv.push_str(&format!("{id},{w},{s},{s},{s}\n"));
        }
    }
    fs::write(dir.path().join("ann.csv"), csv).unwrap();
    let agg = run(
        &[
            "aggregate",
            "--task",
            "1",
            "--annotations",
            "ann.csv",
            "--corpus",
            "c.jsonl",
            "--json-out",
            "r.json",
        ],
        dir.path(),
    );
    assert!(agg.status.success(), "{}", String::from_utf8_lossy(&agg.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["scores"]["questions"][2]["mean"], 4.0);
    assert_eq!(report["by_provenance"]["missing"], 0);

    fs::write(
        dir.path().join("bad.csv"),
        "dialogue_id,worker_id,q1,q2,q3\nd,a,6,1,1\n",
    )
    .unwrap();
    let bad = run(
        &["aggregate", "--task", "1", "--annotations", "bad.csv"],
        dir.path(),
    );
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("row 2"));
}

#[test]
fn rank_aggregation_table() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("r.csv"),
        "snippet_id,worker_id,rank_d1,rank_d2,rank_d3,own_intents\n\
         s,a,1,2,3,FindMovies\ns,b,2,1,3,NONE\ns,c,1,2,3,\n",
    )
    .unwrap();
    let o = run(
        &["aggregate", "--task", "3", "--annotations", "r.csv"],
        dir.path(),
    );
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("Detector1   1.33 ± 0.47"), "{out}");
    assert!(out.contains("Detector3   3.00 ± 0.00"));
}
