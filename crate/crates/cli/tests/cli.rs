use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const GRAMDIFF: &str = env!("CARGO_BIN_EXE_gramdiff");
const REFC: &str = env!("CARGO_BIN_EXE_refc");

const NESTED_OVERLOADS: &str = "fun f0(): Int {
    fun p(): Char {
        return 'c'
    }
    fun p(): Float {
        return 2.5f
    }
    return 1
}
fun main() {}
";

fn run(args: &[&str]) -> Output {
    Command::new(GRAMDIFF)
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("GRAMDIFF_OUT")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn refc_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("p.kt");
    fs::write(&file, NESTED_OVERLOADS).unwrap();
    let status = |profile: &str| {
        Command::new(REFC)
            .arg(&file)
            .args(["--profile", profile])
            .output()
            .unwrap()
    };
    let ok = status("none");
    assert_eq!(ok.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&ok.stderr).starts_with("ERROR CONFLICTING_OVERLOADS: "));
    assert_eq!(status("D1").status.code(), Some(0));
    let missing = Command::new(REFC).arg(dir.path().join("nope.kt")).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));

    let sub = run(&["refc", file.to_str().unwrap(), "--profile", "all"]);
    assert_eq!(code(&sub), 0);
}

#[test]
fn difftest_replays_a_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("p.kt");
    fs::write(&file, NESTED_OVERLOADS).unwrap();
    let f = file.to_str().unwrap();

    let defect = run(&["difftest", f, "--compiler-b", "refc {input} --profile D1"]);
    assert_eq!(code(&defect), 10);
    let stdout = String::from_utf8_lossy(&defect.stdout);
    assert!(
        stdout.contains("classification: divergent-verdict-A-rejects"),
        "{stdout}"
    );
    assert!(stdout.contains("CONFLICTING_OVERLOADS"), "{stdout}");

    let agree = run(&["difftest", f, "--compiler-b", "refc {input} --profile none"]);
    assert_eq!(code(&agree), 0);
    assert!(String::from_utf8_lossy(&agree.stdout).contains("classification: agree-reject"));

    assert_eq!(
        code(&run(&["difftest", dir.path().join("nope.kt").to_str().unwrap()])),
        2
    );
    let bad = run(&["difftest", f, "--compiler-a", "refc"]);
    assert_eq!(code(&bad), 2);
    let spawn = run(&["difftest", f, "--compiler-a", "/nonexistent/compiler {input}"]);
    assert_eq!(code(&spawn), 3);
}

#[test]
fn identical_compilers_never_diverge() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&[
        "fuzz",
        "--budget",
        "10",
        "--compiler-b",
        "refc {input} --profile none",
        "--out",
        out,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(summary["programs"].as_u64().unwrap() > 0);
    assert_eq!(summary["unique_defects"], 0);
    assert_eq!(summary["auc"], 0.0);
}

#[test]
fn fuzz_rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["fuzz", "--budget=-3"])), 2);
    assert_eq!(code(&run(&["fuzz", "--bias", "1.5"])), 2);
    assert_eq!(code(&run(&["fuzz", "--compiler-a", "refc"])), 2);
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "unknown_field = 1\n").unwrap();
    assert_eq!(code(&run(&["fuzz", "--config", cfg.to_str().unwrap()])), 2);
    let o = run(&[
        "fuzz",
        "--budget",
        "2",
        "--compiler-a",
        "/nonexistent/compiler {input}",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3);
}

#[test]
fn output_dir_falls_back_to_env() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(GRAMDIFF)
        .args(["fuzz", "--budget", "5", "--max-programs", "3", "--run-id", "envrun"])
        .env("GRAMDIFF_OUT", dir.path())
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("envrun/summary.json").is_file());
}

/// Exact step integral of the unique-defect curve read from the raw log.
fn auc_from_log(log: &[Value], horizon: f64) -> f64 {
    let mut first: BTreeMap<String, f64> = BTreeMap::new();
    for r in log {
        if let Some(sig) = r["signature"].as_str() {
            first.entry(sig.to_string()).or_insert(r["t"].as_f64().unwrap());
        }
    }
    if first.is_empty() {
        return 0.0;
    }
    let n = first.len() as f64;
    first.values().map(|t| (horizon - t).max(0.0)).sum::<f64>() / (n * horizon)
}

#[test]
fn report_is_a_projection_of_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    assert_eq!(code(&run(&["report", empty.to_str().unwrap()])), 2);

    let config = dir.path().join("campaign.toml");
    fs::write(
        &config,
        format!(
            "algorithm = \"rs\"\nbudget = 6\nseed = 5\nworkers = 1\nrun_id = \"r\"\noutput = {:?}\n\n[sampler]\nsimplicity_bias = 0.45\n\n[compiler_b]\nlabel = \"refc-bug\"\ncommand = \"{REFC} {{input}} --profile all\"\n",
            dir.path().to_str().unwrap()
        ),
    )
    .unwrap();
    let o = run(&["fuzz", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let run_dir = dir.path().join("r");

    let o = run(&["report", run_dir.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary: Value = serde_json::from_str(&fs::read_to_string(run_dir.join("summary.json")).unwrap()).unwrap();
    let log = jsonl(&run_dir.join("campaign.jsonl"));
    let registry: Vec<Value> =
        serde_json::from_str(&fs::read_to_string(run_dir.join("defects.json")).unwrap()).unwrap();

    let registry_categories: BTreeSet<String> = registry
        .iter()
        .map(|d| d["category"].as_str().unwrap().to_string())
        .collect();
    let mut rdr = csv_rows(&run_dir.join("report/categories.csv"));
    let report_categories: BTreeSet<String> = rdr.drain(..).map(|r| r[0].clone()).collect();
    assert_eq!(report_categories, registry_categories);
    assert!(
        !registry.is_empty(),
        "a run against the seeded checker should find something"
    );

    let horizon = summary["duration"].as_f64().unwrap();
    let text = String::from_utf8_lossy(&o.stdout);
    let auc_line = text.lines().find(|l| l.starts_with("auc ")).unwrap();
    let reported: f64 = auc_line[4..].parse().unwrap();
    assert!((reported - auc_from_log(&log, horizon)).abs() < 1e-4, "{reported}");
    assert!((summary["auc"].as_f64().unwrap() - auc_from_log(&log, horizon)).abs() < 1e-9);

    // Every reproducer replays to its category.
    for d in &registry {
        let o = run(&[
            "difftest",
            d["reproducer_path"].as_str().unwrap(),
            "--compiler-b",
            &format!("{REFC} {{input}} --profile all"),
        ]);
        assert_eq!(code(&o), 10);
        let want = format!("classification: {}", d["category"].as_str().unwrap());
        assert!(String::from_utf8_lossy(&o.stdout).contains(&want));
    }

    // A second report of the same directory is identical.
    let before = fs::read_to_string(run_dir.join("report/defects.csv")).unwrap();
    assert_eq!(code(&run(&["report", run_dir.to_str().unwrap()])), 0);
    assert_eq!(fs::read_to_string(run_dir.join("report/defects.csv")).unwrap(), before);

    // Tampering with the recorded config is detected.
    let cfg_path = run_dir.join("config.json");
    let tampered = fs::read_to_string(&cfg_path)
        .unwrap()
        .replacen("\"seed\": 5", "\"seed\": 6", 1);
    fs::write(&cfg_path, tampered).unwrap();
    assert_eq!(code(&run(&["report", run_dir.to_str().unwrap()])), 2);
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}
