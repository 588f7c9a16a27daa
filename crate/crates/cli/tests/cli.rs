use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mco_core::analysis::check_theorem_hypotheses;
use mco_core::graph::{build_graph, laplacian, GraphKind};
use mco_core::swarm::{CoeffSample, RunRecord};

fn mco(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mco"))
        .args(args)
        .env_remove("SWARM_OPT_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

const SMALL: &[&str] = &["--n", "3", "--q", "5", "--iters", "40"];

#[test]
fn run_smoke_emits_run_record() {
    let out = mco(&[
        "run", "--objective", "sphere", "--n", "30", "--q", "30", "--iters", "1000", "--seed", "7", "--algo", "mco",
        "--topology", "complete",
    ]);
    let rec: RunRecord = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!((rec.seed, rec.params.q, rec.params.n), (7, 30, 30));
    assert_eq!(rec.objective, "sphere");
    assert!(rec.trace.len() as u64 == rec.iterations + 1);
    assert!(rec.best_value.is_finite());
}

#[test]
fn same_argv_gives_identical_artifacts_and_sidecar_holds_timing() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for k in 0..2 {
        let path = dir.path().join(format!("r{k}.json"));
        let p = path.to_str().unwrap();
        let mut args = vec!["run", "--seed", "3", "--output", p];
        args.extend_from_slice(SMALL);
        stdout(&mco(&args));
        bytes.push(fs::read(&path).unwrap());
        let meta: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(format!("r{k}.json.meta.json"))).unwrap()).unwrap();
        assert!(meta["duration_seconds"].as_f64().unwrap() >= 0.0);
    }
    assert_eq!(bytes[0], bytes[1]);
    assert!(!String::from_utf8_lossy(&bytes[0]).contains("duration"));
}

#[test]
fn worker_count_does_not_change_results() {
    let mut args = vec!["bench", "--runs", "4", "--format", "json"];
    args.extend_from_slice(SMALL);
    let one = stdout(&mco(&[args.as_slice(), &["--workers", "1"]].concat()));
    let four = stdout(&mco(&[args.as_slice(), &["--workers", "4"]].concat()));
    let env = Command::new(env!("CARGO_BIN_EXE_mco"))
        .args(&args)
        .env("SWARM_OPT_WORKERS", "3")
        .output()
        .unwrap();
    assert_eq!(one, four);
    assert_eq!(one, stdout(&env));
}

#[test]
fn analyze_matches_library_verdict() {
    let out = mco(&[
        "analyze", "--mu", "0.3", "--eta", "0.2", "--kappa", "0.5", "--h", "0.1", "--n", "1", "--q", "2", "--topology",
        "complete", "--j", "1",
    ]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let l = laplacian(&build_graph(GraphKind::Complete, 2, 0).unwrap());
    let coeffs = CoeffSample {
        eta: 0.2,
        mu: 0.3,
        kappa: 0.5,
        h: 0.1,
    };
    let want = check_theorem_hypotheses(coeffs, &l, 1, 0, 1e-9).unwrap();
    let got = &v["verdict"];
    for (key, flag) in [("h1", want.h1), ("h2", want.h2), ("h3", want.h3), ("h4", want.h4), ("pass", want.pass)] {
        assert_eq!(got[key].as_bool(), Some(flag), "{key}");
    }
    assert_eq!(got["h_dagger"].as_f64(), want.h_dagger);
    assert_eq!(v["smoothing"]["side"], 5);
    assert!(v["h1_limit"].as_f64().unwrap() > 0.1);
}

#[test]
fn analyze_dumps_matrices_and_reads_graph_files() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.json");
    fs::write(&graph, r#"{"q": 3, "directed": true, "edges": [[0,1],[1,2],[2,0]]}"#).unwrap();
    let dump = dir.path().join("m");
    stdout(&mco(&[
        "analyze",
        "--q",
        "3",
        "--topology-file",
        graph.to_str().unwrap(),
        "--j",
        "3",
        "--dump-matrices",
        dump.to_str().unwrap(),
    ]));
    let a = fs::read_to_string(dump.join("a_family.csv")).unwrap();
    assert_eq!(a.lines().count(), 7);
    assert!(a.lines().all(|l| l.split(',').count() == 7));
    assert!(dump.join("b_family.csv").exists() && dump.join("laplacian.csv").exists());
}

#[test]
fn bench_example_has_csv_schema() {
    let text = stdout(&mco(&["bench", "--objective", "griewank", "--runs", "20", "--seeds-from", "1"]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "objective,algorithm,runs,min,max,median,average");
    assert_eq!(lines.len(), 2);
    let cells: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(&cells[..3], &["griewank", "mco", "20"]);
    let nums: Vec<f64> = cells[3..].iter().map(|c| c.parse().unwrap()).collect();
    assert!(nums[0] <= nums[2] && nums[2] <= nums[1]);
}

#[test]
fn compare_reports_both_algorithms_on_same_seeds() {
    let mut args = vec!["compare", "--runs", "3", "--seeds-from", "5", "--format", "json"];
    args.extend_from_slice(SMALL);
    let v: serde_json::Value = serde_json::from_str(&stdout(&mco(&args))).unwrap();
    assert_eq!(v[0]["algorithm"], "mco");
    assert_eq!(v[1]["algorithm"], "pso");
    assert_eq!(v[0]["seeds"], serde_json::json!([5, 6, 7]));
    assert_eq!(v[0]["seeds"], v[1]["seeds"]);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "q = 4\nn = 3\niters = 5\nobjective = \"rastrigin\"\nalgorithm = \"pso\"\n").unwrap();
    let out = mco(&["run", "--config", cfg.to_str().unwrap(), "--n", "2", "--algo", "mco"]);
    let rec: RunRecord = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!((rec.params.q, rec.params.n, rec.iterations), (4, 2, 5));
    assert_eq!(rec.objective, "rastrigin");
    assert_eq!(rec.algorithm, mco_core::swarm::Algorithm::Mco);
}

#[test]
fn run_csv_is_the_trace() {
    let mut args = vec!["run", "--format", "csv"];
    args.extend_from_slice(SMALL);
    let text = stdout(&mco(&args));
    assert_eq!(text.lines().next(), Some("iter,best_value"));
    assert_eq!(text.lines().count(), 42);
}

#[test]
fn sweep_reports_each_worker_count() {
    let mut args = vec!["sweep", "--worker-list", "1,2", "--format", "json"];
    args.extend_from_slice(SMALL);
    let v: serde_json::Value = serde_json::from_str(&stdout(&mco(&args))).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert_eq!(v[1]["workers"], 2);
}

#[test]
fn list_objectives_table_and_json() {
    let table = stdout(&mco(&["list-objectives"]));
    assert!(table.lines().any(|l| l.starts_with("griewank") && l.contains("±600")));
    let v: serde_json::Value = serde_json::from_str(&stdout(&mco(&["list-objectives", "--format", "json"]))).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 9);
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &["run", "--objective", "rosenbrock", "--n", "1"][..],
        &["run", "--bogus"],
        &["run", "--format", "xml"],
        &["run", "--objective", "nope"],
        &["run", "--topology", "hypercube"],
        &["run", "--workers", "0"],
        &["bench", "--runs", "0"],
        &["analyze", "--j", "0"],
        &["analyze", "--q", "3", "--j", "4"],
        &["analyze", "--topology", "random:0.5"],
        &["frobnicate"],
    ] {
        let out = mco(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
        assert!(out.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn runtime_errors_exit_one_and_name_the_path() {
    let mut args = vec!["run", "--output", "/nonexistent-dir/out.json"];
    args.extend_from_slice(SMALL);
    let out = mco(&args);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent-dir/out.json"));
    let out = mco(&["run", "--config", "/nonexistent-dir/c.toml"]);
    assert_eq!(out.status.code(), Some(1));
}

/// Every option in every subcommand's help names its default.
#[test]
fn help_documents_every_default() {
    for sub in ["run", "bench", "compare", "sweep", "analyze", "list-objectives"] {
        let help = stdout(&mco(&[sub, "--help"]));
        let mut entries: Vec<String> = Vec::new();
        for line in help.lines().skip_while(|l| !l.starts_with("Options:")).skip(1) {
            if line.trim_start().starts_with('-') {
                entries.push(line.trim().to_string());
            } else if let Some(last) = entries.last_mut() {
                last.push(' ');
                last.push_str(line.trim());
            }
        }
        assert!(entries.len() > 1, "{sub}");
        for e in entries.iter().filter(|e| !e.starts_with("-h, --help")) {
            assert!(e.contains("[default:"), "{sub}: {e}");
        }
    }
}

#[test]
fn output_to_stdout_keeps_logs_on_stderr() {
    let mut args = vec!["run", "--output", "-"];
    args.extend_from_slice(SMALL);
    let out = mco(&args);
    let text = stdout(&out);
    assert!(text.trim_start().starts_with('{'));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    assert!(!Path::new("-.meta.json").exists());
}
