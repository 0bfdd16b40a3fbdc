use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/toy").join(name)
}

fn senseforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_senseforge"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("SENSEFORGE_THREADS")
        .output()
        .unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn profile(store: &Path, extra: &[&str]) -> Output {
    let synsets = fixture("synsets.tsv");
    let edges = fixture("edges.tsv");
    let mut args = vec!["profile", "--synsets", path(&synsets), "--edges", path(&edges), "--out", path(store)];
    args.extend_from_slice(extra);
    senseforge(&args)
}

fn annotate(store: &Path, out: &Path, extra: &[&str]) -> Output {
    let corpus = fixture("corpus.txt");
    let ranking = fixture("ranking.tsv");
    let mut args = vec![
        "annotate",
        "--store",
        path(store),
        "--corpus",
        path(&corpus),
        "--ranking",
        path(&ranking),
        "--out",
        path(out),
    ];
    args.extend_from_slice(extra);
    senseforge(&args)
}

fn records(out: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(out.join("annotations.tsv"))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split('\t').map(String::from).collect())
        .collect()
}

#[test]
fn help_lists_defaults() {
    let out = senseforge(&["annotate", "--help"]);
    assert!(out.status.success());
    let help = text(&out.stdout);
    for needle in ["--k", "[default: 100]", "--z", "[default: 2]", "--min-confidence"] {
        assert!(help.contains(needle), "missing {needle}");
    }
    let out = senseforge(&["profile", "--help"]);
    let help = text(&out.stdout);
    for needle in ["[default: 0.85]", "[default: 0.000001]", "[default: 30]", "[default: 1000]"] {
        assert!(help.contains(needle), "missing {needle} in\n{help}");
    }
}

#[test]
fn out_of_range_alpha_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = profile(&dir.path().join("store"), &["--alpha", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("store").exists());
}

#[test]
fn bad_thread_env_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let synsets = fixture("synsets.tsv");
    let edges = fixture("edges.tsv");
    let store = dir.path().join("store");
    let out = Command::new(env!("CARGO_BIN_EXE_senseforge"))
        .args(["profile", "--synsets", path(&synsets), "--edges", path(&edges), "--out", path(&store)])
        .env("SENSEFORGE_THREADS", "abc")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_store_is_fatal_with_a_machine_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = annotate(&dir.path().join("nowhere"), &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = text(&out.stderr);
    let line = stderr.lines().find(|l| l.starts_with("error\t")).expect(&stderr);
    assert!(line.contains("\texit=1\t"), "{line}");
    assert!(line.contains("kind="), "{line}");
}

#[test]
fn stats_on_empty_file_reports_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.tsv");
    fs::write(&empty, "").unwrap();
    let synsets = fixture("synsets.tsv");
    let out = senseforge(&["stats", path(&empty), "--synsets", path(&synsets)]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("Number of Annotations             0"), "{stdout}");
    assert!(stdout.contains("Average confidence score          0.0000 (0.00 x100)"), "{stdout}");
}

#[test]
fn stats_on_hand_written_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("a.tsv");
    fs::write(
        &file,
        "#format=senseforge-tsv-v1\n\
         c.1\t0\tmatch\tn\tt:match_sport\t0.800000\t0.900000:t:match_sport,0.100000:t:match_fire\tx\n\
         c.2\t3\tmatch\tn\tt:match_sport\t0.600000\t0.800000:t:match_sport,0.200000:t:match_fire\tx\n\
         c.3\t1\tmatch\tn\tt:match_fire\t0.400000\t0.700000:t:match_fire,0.300000:t:match_sport\tx\n\
         c.4\t2\tbat\tn\tt:bat_club\t0.200000\t0.600000:t:bat_club,0.400000:t:bat_animal\tx\n",
    )
    .unwrap();
    let synsets = fixture("synsets.tsv");
    let out = senseforge(&["stats", path(&file), "--synsets", path(&synsets)]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    for row in [
        "Number of Annotations             4",
        "Distinct lemmas covered           2",
        "Distinct senses covered           3",
        "Average # of sentences per sense  1.33",
        "Average confidence score          0.5000 (50.00 x100)",
        "Average Polisemy                  2.00",
    ] {
        assert!(stdout.contains(row), "missing `{row}` in\n{stdout}");
    }
}

#[test]
fn resume_and_min_confidence() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let first = profile(&store, &[]);
    assert!(first.status.success(), "{}", text(&first.stderr));
    let index = fs::read(store.join("index.tsv")).unwrap();

    let again = profile(&store, &["--resume"]);
    assert!(again.status.success(), "{}", text(&again.stderr));
    assert!(text(&again.stdout).contains("profiled 0 synsets (40 reused"), "{}", text(&again.stdout));
    assert_eq!(fs::read(store.join("index.tsv")).unwrap(), index);

    let all = dir.path().join("all");
    let out = annotate(&store, &all, &["--k", "1000000", "--z", "0"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let filtered = dir.path().join("filtered");
    let out = annotate(&store, &filtered, &["--k", "1000000", "--z", "0", "--min-confidence", "0.9"]);
    assert!(out.status.success(), "{}", text(&out.stderr));

    let all = records(&all);
    let kept = records(&filtered);
    let expected: Vec<_> = all
        .iter()
        .filter(|r| r[5].parse::<f64>().unwrap() >= 0.9)
        .cloned()
        .collect();
    assert!(kept.len() < all.len());
    assert_eq!(kept, expected);

    let stats = senseforge(&["stats", path(&filtered.join("annotations.tsv")), "--store", path(&store)]);
    assert!(stats.status.success(), "{}", text(&stats.stderr));
    assert!(text(&stats.stdout).contains(&format!("Number of Annotations             {}", kept.len())));
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    assert!(profile(&store, &[]).status.success());
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "k = 1\nz = 0\n").unwrap();
    let a = dir.path().join("a");
    let out = annotate(&store, &a, &["--config", path(&cfg)]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    // One per (lemma, sense) bucket; every bucket has at least two candidates.
    assert_eq!(records(&a).len(), 39);
    let b = dir.path().join("b");
    let out = annotate(&store, &b, &["--config", path(&cfg), "--k", "2"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert_eq!(records(&b).len(), 78);
}
