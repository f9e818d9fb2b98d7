use restartlab_core::cvrp::{Customer, SolutionFile};
use restartlab_core::harness::{from_csv, RecordRow, SummaryRow, RECORDS_SCHEMA, SUMMARY_SCHEMA};
use restartlab_core::ranker::{load_model, save_model, ModelKind, RankerModel, ScorerConfig};
use restartlab_core::{Instance, Point};
use std::path::Path;
use std::process::{Command, Output};

fn restartlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_restartlab"))
        .args(args)
        .env_remove("RESTARTLAB_SEED")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = restartlab(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn tiny_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("tiny.json");
    std::fs::write(&path, serde_json::to_string(&ScorerConfig::tiny()).unwrap()).unwrap();
    path
}

#[test]
fn gen_data_is_deterministic_across_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a.bin"), dir.path().join("b.bin"), dir.path().join("c.bin"));
    let base = ["gen-data", "--n", "20", "--capacity", "30", "--count", "200", "--seed", "7"];
    ok(&[&base[..], &["--jobs", "1", "--out", p(&a)]].concat());
    ok(&[&base[..], &["--jobs", "8", "--out", p(&b)]].concat());
    ok(&[&base[..], &["--jobs", "1", "--out", p(&c)]].concat());
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    assert_eq!(bytes, std::fs::read(&c).unwrap());
    let manifest = |f: &Path| std::fs::read(format!("{}.manifest.json", f.display())).unwrap();
    assert_eq!(manifest(&a), manifest(&b));
}

#[test]
fn flag_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.bin");
    let r = restartlab(&["gen-data", "--count", "0", "--out", p(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("Usage"));
    let r = restartlab(&["gen-data", "--count", "5", "--eps", "0", "--out", p(&out)]);
    assert_eq!(r.status.code(), Some(2));
    let r = restartlab(&["gen-data", "--n", "7", "--count", "5", "--out", p(&out)]);
    assert_eq!(r.status.code(), Some(2), "non-standard size needs --capacity");
    assert!(!out.exists());
}

#[test]
fn runtime_errors_exit_one() {
    let r = restartlab(&["exact", "--instance-file", "/nonexistent/instance.json"]);
    assert_eq!(r.status.code(), Some(1));
}

fn write_instance(dir: &Path, customers: &[(f64, f64, u32)], capacity: u32) -> std::path::PathBuf {
    let cs = customers.iter().map(|&(x, y, demand)| Customer { x, y, demand }).collect();
    let inst = Instance::new(Point::new(0.5, 0.5), cs, capacity, 0).unwrap();
    let path = dir.join("instance.json");
    std::fs::write(&path, inst.to_json()).unwrap();
    path
}

#[test]
fn solve_single_customer() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_instance(dir.path(), &[(0.2, 0.9, 4)], 10);
    let out = ok(&["solve", "--instance-file", p(&inst), "--iters", "2"]);
    let sol: SolutionFile = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(sol.routes.len(), 1);
    assert_eq!(sol.routes[0].0, vec![1]);
}

#[test]
fn solve_is_never_below_exact() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_instance(
        dir.path(),
        &[(0.1, 0.1, 3), (0.9, 0.2, 5), (0.3, 0.8, 4), (0.7, 0.7, 6), (0.5, 0.1, 2), (0.2, 0.4, 7)],
        12,
    );
    let exact: SolutionFile = serde_json::from_slice(&ok(&["exact", "--instance-file", p(&inst)]).stdout).unwrap();
    for strategy in ["sequential-random", "sequential-perturb", "population", "population-best-offspring"] {
        let out = ok(&["solve", "--instance-file", p(&inst), "--strategy", strategy, "--k", "3", "--i", "3"]);
        let sol: SolutionFile = serde_json::from_slice(&out.stdout).unwrap();
        assert!(sol.distance >= exact.distance - 1e-9, "{strategy}");
    }
}

#[test]
fn learned_ranking_needs_model() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_instance(dir.path(), &[(0.2, 0.9, 4), (0.3, 0.3, 5)], 10);
    let r = restartlab(&["solve", "--instance-file", p(&inst), "--ranking", "learned"]);
    assert_eq!(r.status.code(), Some(2));
    let r = restartlab(&["experiment", "--arms", "baseline,learned", "--out", p(dir.path())]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn zero_epochs_and_zero_head() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("pairs.bin");
    ok(&["gen-data", "--n", "10", "--capacity", "20", "--count", "60", "--seed", "3", "--out", p(&data)]);
    let cfg = tiny_config(dir.path());
    let model = dir.path().join("m.json");
    ok(&["train-ranker", "--data", p(&data), "--config", p(&cfg), "--epochs", "0", "--out", p(&model)]);
    let (trained, kind) = load_model(&model).unwrap();
    assert_eq!(kind, ModelKind::Siamese);
    let init = RankerModel::new(ScorerConfig { epochs: 0, ..ScorerConfig::tiny() });
    assert_eq!(trained.tensors(), init.tensors());

    let mut zero = init;
    zero.zero_output_layer();
    let zpath = dir.path().join("zero.json");
    save_model(&zpath, &zero, ModelKind::Siamese).unwrap();
    let out = String::from_utf8(ok(&["eval-ranker", "--model", p(&zpath), "--data", p(&data)]).stdout).unwrap();
    assert!(out.contains("accuracy 0.000000"), "{out}");
    assert!(out.contains("auc 0.500000"), "{out}");
}

#[test]
fn train_and_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("pairs.bin");
    ok(&["gen-data", "--n", "10", "--capacity", "20", "--count", "60", "--seed", "3", "--out", p(&data)]);
    let cfg = tiny_config(dir.path());
    for (flag, name) in [(None, "s.json"), (Some("--regression"), "r.json")] {
        let model = dir.path().join(name);
        let mut args = vec!["train-ranker", "--data", p(&data), "--config", p(&cfg), "--out", p(&model)];
        args.extend(flag);
        ok(&args);
        let out = String::from_utf8(ok(&["eval-ranker", "--model", p(&model), "--data", p(&data)]).stdout).unwrap();
        assert!(out.lines().count() == 3 && out.starts_with("accuracy "), "{out}");
    }
}

#[test]
fn experiment_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str, jobs: &str| {
        let out = dir.path().join(sub);
        ok(&[
            "experiment", "--n", "12", "--capacity", "30", "--arms", "baseline,oracle", "--instances", "8",
            "--iters", "3", "--k", "4", "--seed", "11", "--jobs", jobs, "--out", p(&out),
        ]);
        let read = |f: &str| std::fs::read_to_string(out.join(f)).unwrap();
        (read("records.csv"), read("summary.csv"))
    };
    let first = run("one", "1");
    assert_eq!(first, run("two", "4"));
    let rows: Vec<RecordRow> = from_csv(RECORDS_SCHEMA, &first.0).unwrap();
    let summary: Vec<SummaryRow> = from_csv(SUMMARY_SCHEMA, &first.1).unwrap();
    assert_eq!(rows.len(), 2 * 8 * 3);
    assert_eq!(summary.len(), 2 * 3);
    for s in &summary {
        let ds: Vec<f64> =
            rows.iter().filter(|r| r.arm == s.arm && r.iteration == s.iteration).map(|r| r.distance).collect();
        assert!((ds.iter().sum::<f64>() / ds.len() as f64 - s.mean_distance).abs() < 1e-9);
    }
}

#[test]
fn sweep_emits_one_row_per_budget() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let run = || {
        String::from_utf8(
            ok(&[
                "sweep-complexity", "--n", "8", "--capacity", "20", "--cycles", "1,3", "--train-pairs", "40",
                "--test-pairs", "20", "--config", p(&cfg), "--seed", "2",
            ])
            .stdout,
        )
        .unwrap()
    };
    let csv = run();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "#schema=restartlab.sweep.v1");
    assert_eq!(lines[1], "cycles,train_pairs,test_pairs,accuracy,auc");
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("1,") && lines[3].starts_with("3,"));
    assert_eq!(csv, run());
}

#[test]
fn gen_instances_writes_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("inst.jsonl");
    ok(&["gen-instances", "--n", "50", "--count", "3", "--seed", "1", "--out", p(&out)]);
    let text = std::fs::read_to_string(&out).unwrap();
    let insts: Vec<Instance> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(insts.len(), 3);
    assert!(insts.iter().all(|i| i.len() == 50 && i.capacity() == 40));
}
