use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn dcap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dcap"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("DCAP_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// `users` users x 30 movies; users with an even id like even movies.
fn write_movielens_users(dir: &Path, users_n: usize) {
    let mut users = String::new();
    for u in 1..=users_n {
        let g = if u % 2 == 0 { "F" } else { "M" };
        users += &format!("{u}::{g}::{}::{}::0000{u}\n", [1, 18, 25, 35][u % 4], u % 21);
    }
    let mut movies = String::new();
    for m in 1..=30 {
        movies += &format!("{m}::Title {m} (2000)::Drama\n");
    }
    let mut ratings = String::new();
    for u in 1..=users_n {
        for m in 1..=30usize {
            if (u * 7 + m * 3) % 4 == 0 {
                continue;
            }
            let r = if u % 2 == m % 2 { 5 } else { 1 };
            ratings += &format!("{u}::{m}::{r}::97830000{m}\n");
        }
    }
    fs::write(dir.join("users.dat"), users).unwrap();
    fs::write(dir.join("movies.dat"), movies).unwrap();
    fs::write(dir.join("ratings.dat"), ratings).unwrap();
}

fn write_movielens(dir: &Path) {
    write_movielens_users(dir, 40);
}

fn prepared(root: &Path) -> PathBuf {
    let raw = root.join("ml");
    fs::create_dir_all(&raw).unwrap();
    write_movielens(&raw);
    let cache = root.join("ml.dcapds");
    let out = dcap(&["prepare", "--format", "movielens", "--input", raw.to_str().unwrap(), "--out", cache.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    cache
}

#[test]
fn prepare_reports_stats_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = prepared(tmp.path());
    let first = fs::read(&cache).unwrap();
    let stats = fs::read_to_string(cache.with_extension("stats")).unwrap();
    assert!(stats.starts_with("instances=900 fields=5 dimension="), "{stats}");

    let again = tmp.path().join("again.dcapds");
    let raw = tmp.path().join("ml");
    let out = dcap(&["prepare", "--input", raw.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(first, fs::read(&again).unwrap());
    assert_eq!(stdout(&out).trim(), stats.trim());
}

#[test]
fn prepare_names_missing_file() {
    let tmp = tempfile::tempdir().unwrap();
    write_movielens(tmp.path());
    fs::remove_file(tmp.path().join("users.dat")).unwrap();
    let out = dcap(&["prepare", "--input", tmp.path().to_str().unwrap(), "--out", tmp.path().join("x").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("users.dat"), "{}", stderr(&out));
}

#[test]
fn train_evaluate_and_export() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = prepared(tmp.path());
    let runs = tmp.path().join("runs");
    let config = tmp.path().join("run.conf");
    fs::write(&config, "# tiny run\nembedding-dim = 4\nheads = 1,2\nhidden = 8\nbatch_size = 64\nmax_epochs = 2\n").unwrap();
    let out = dcap(&[
        "train",
        "--config",
        config.to_str().unwrap(),
        "--data",
        cache.to_str().unwrap(),
        "--trials",
        "2",
        "--seed",
        "5",
        "--out",
        runs.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("dcap_L2_h2: AUC "), "{}", stdout(&out));

    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(runs.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["dropout"], 0.5);
    assert_eq!(summary["config"]["embedding_dim"], "4");
    assert_eq!(summary["config_hash"].as_str().unwrap().len(), 64);
    let grid = summary["runs"].as_array().unwrap();
    assert_eq!(grid.len(), 2);
    for run in grid {
        let trials = run["trials"].as_array().unwrap();
        assert_eq!(trials.iter().map(|t| t["seed"].as_u64().unwrap()).collect::<Vec<_>>(), [5, 6]);
        assert!(run["auc"].as_str().unwrap().contains("+/-"));
    }
    let log = fs::read_to_string(runs.join("dcap_L2_h1/trial_5.tsv")).unwrap();
    assert_eq!(log.lines().count(), 3);

    let ckpt = runs.join("dcap_L2_h2/trial_6.ckpt");
    let out = dcap(&["evaluate", "--checkpoint", ckpt.to_str().unwrap(), "--data", cache.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let line = stdout(&out);
    assert!(line.starts_with("test"), "{line}");
    let auc = grid[1]["trials"][1]["test_auc"].as_f64().unwrap();
    assert!(line.contains(&format!("{auc:.4}")), "{line} vs {auc}");

    let att = tmp.path().join("att");
    let out = dcap(&[
        "export-attention",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--data",
        cache.to_str().unwrap(),
        "--samples",
        "50",
        "--out",
        att.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    for (l, h) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
        let text = fs::read_to_string(att.join(format!("attention_l{l}_h{h}.tsv"))).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        if l == 1 {
            assert_eq!(header, "query\\key\tUserID\tMovieID\tGender\tAge\tOccupation");
        }
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 5);
        for row in rows {
            let s: f64 = row.split('\t').skip(1).map(|v| v.parse::<f64>().unwrap()).sum();
            assert!((s - 1.0).abs() < 1e-4, "{row}");
        }
    }
}

#[test]
fn baseline_has_no_attention_and_vocab_must_match() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = prepared(tmp.path());
    let runs = tmp.path().join("runs");
    let out = dcap(&[
        "train", "--data", cache.to_str().unwrap(), "--model", "lr", "--max-epochs", "1", "--batch-size", "128", "--out",
        runs.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let ckpt = runs.join("lr/trial_0.ckpt");
    let out = dcap(&["export-attention", "--checkpoint", ckpt.to_str().unwrap(), "--data", cache.to_str().unwrap(), "--out", tmp.path().join("a").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("no attention"), "{}", stderr(&out));

    // A differently sized dataset cannot be scored by this checkpoint.
    let raw = tmp.path().join("ml20");
    fs::create_dir_all(&raw).unwrap();
    write_movielens_users(&raw, 20);
    let small = tmp.path().join("small.dcapds");
    assert!(dcap(&["prepare", "--input", raw.to_str().unwrap(), "--out", small.to_str().unwrap()]).status.success());
    let out = dcap(&["evaluate", "--checkpoint", ckpt.to_str().unwrap(), "--data", small.to_str().unwrap(), "--part", "all"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("vocabulary sizes"), "{}", stderr(&out));
}

#[test]
fn train_rejects_unknown_keys() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("bad.conf");
    fs::write(&config, "learning_rate = 0.1\n").unwrap();
    let out = dcap(&["train", "--config", config.to_str().unwrap(), "--data", "nowhere"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("learning_rate"), "{}", stderr(&out));
}

#[test]
fn verify_passes_and_catches_injected_fault() {
    let tmp = tempfile::tempdir().unwrap();
    let out = dcap(&["verify", "--reference-instances", "10", "--out", tmp.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}{}", stdout(&out), stderr(&out));
    let checks = fs::read_to_string(tmp.path().join("checks.tsv")).unwrap();
    assert!(checks.starts_with("check\tstatus\tdetail\n"));
    assert!(!checks.contains("FAIL"));
    assert!(tmp.path().join("homogeneity.tsv").exists());

    let out = dcap(&["verify", "--reference-instances", "10", "--inject-fault"]);
    assert!(!out.status.success());
    assert!(stdout(&out).contains("gradient\tFAIL"), "{}", stdout(&out));
}

#[test]
fn diverged_training_keeps_checkpoint_and_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = prepared(tmp.path());
    let runs = tmp.path().join("runs");
    let out = dcap(&[
        "train", "--data", cache.to_str().unwrap(), "--lr", "1e200", "--embedding-dim", "4", "--hidden", "4", "--max-epochs",
        "3", "--out", runs.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("diverged"), "{}", stderr(&out));
    assert!(runs.join("dcap_L2_h4/trial_0.ckpt").exists());
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(runs.join("summary.json")).unwrap()).unwrap();
    assert!(summary["runs"][0]["auc"].is_null());
}
