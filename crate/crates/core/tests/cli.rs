//! End-to-end runs of the `kgalign` binary.

use std::path::Path;
use std::process::{Command, Output};

use kgalign::datasets::{isomorphic_cycles, split, write_pair};

fn kgalign(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kgalign"))
        .args(args)
        .env_remove("KGALIGN_DATA")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn error_json(o: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|e| panic!("{e}: {text}"))
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn toy_config(out: &Path) -> String {
    format!(
        "dataset.family = toy-cycles\n\
         split.enabled = false\n\
         encoder.dim = 16\n\
         training.epochs = 200\n\
         output.dir = {}\n\
         output.save_embeddings = true\n",
        out.display()
    )
}

#[test]
fn train_then_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "run.txt", &toy_config(tmp.path()));
    let o = kgalign(&["--json", "train", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let id = report["run_id"].as_str().unwrap();
    assert_eq!(id.len(), 16);
    assert_eq!(report["test"]["n_test"], 4);

    let dir = tmp.path().join(id);
    for f in ["config.txt", "report.json", "report.txt", "loss.tsv", "embeddings.bin"] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    let again = kgalign(&["--json", "evaluate", dir.to_str().unwrap()]);
    assert!(again.status.success());
    let re: serde_json::Value = serde_json::from_str(&stdout(&again)).unwrap();
    assert_eq!(re["test"], report["test"]);

    let text = kgalign(&["train", &cfg]);
    assert!(stdout(&text).contains("H@1"));
}

#[test]
fn grid_dry_run_counts_the_large_search() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "grid.txt",
        "dataset.family = dbp15k-jape\ndataset.subset = zh-en\ngrid.preset = large\n",
    );
    let o = kgalign(&["--json", "grid", "--dry-run", &cfg]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["runs"], 1440);
}

#[test]
fn grid_and_ablation_on_toy_data() {
    let tmp = tempfile::tempdir().unwrap();
    let base = format!(
        "{}training.negatives = 5\n",
        toy_config(tmp.path()).replace("split.enabled = false\n", "dataset.nodes = 20\ndataset.seeds = 10\n")
    );
    let grid = write(
        tmp.path(),
        "grid.txt",
        &format!("{base}grid.epochs = 5, 20\ngrid.cells = no/unit, yes/scaled\ngrid.workers = 2\n"),
    );
    let o = kgalign(&["grid", &grid]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("best no/unit"));
    assert!(tmp.path().join("grid_results.jsonl").is_file());
    assert!(tmp.path().join("leaderboard.tsv").is_file());

    let ablation = write(
        tmp.path(),
        "ablate.txt",
        &format!("{base}n_seeds = 2\nablation.preset = base\n"),
    );
    let o = kgalign(&["--threads", "1", "ablate", &ablation]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = stdout(&o);
    for cell in ["no/unit", "no/scaled", "yes/unit", "yes/scaled"] {
        assert!(table.contains(cell), "{table}");
    }
    assert!(tmp.path().join("ablation.json").is_file());
}

#[test]
fn stats_reads_a_pinned_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("dbp15k-jape").join("zh-en");
    std::fs::create_dir_all(&dir).unwrap();
    let mut pair = isomorphic_cycles(12, 12);
    pair.alignment = split(&pair.alignment, 0.5, 0.2, 0).unwrap();
    write_pair(&pair, &dir).unwrap();

    let root = tmp.path().to_str().unwrap();
    let o = kgalign(&["--data-root", root, "stats", "dbp15k-jape:zh-en", "--write-manifest"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("differs"), "{out}");
    assert!(dir.join("manifest.sha256").is_file());

    // a drifted file is refused once a manifest pins the layout
    std::fs::write(dir.join("triples_1"), "0\t0\t1\n").unwrap();
    let o = kgalign(&["--data-root", root, "stats", "dbp15k-jape:zh-en"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_json(&o)["error"]["category"], "dataset");
}

#[test]
fn errors_are_machine_readable() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write(tmp.path(), "bad.txt", "dataset.family = toy-cycles\nencoder.layers = 7\n");
    let o = kgalign(&["train", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"]["category"], "config");

    let o = kgalign(&["--data-root", tmp.path().to_str().unwrap(), "stats", "wk3l-15k:en-fr"]);
    assert_eq!(o.status.code(), Some(3));

    let o = kgalign(&["evaluate", tmp.path().join("nope").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(error_json(&o)["error"]["message"].is_string());
}
