use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_leverage"))
}

fn scenario() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios/default.toml")
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Compares against a checked-in file; `UPDATE_GOLDEN=1` rewrites it.
fn check_golden(name: &str, actual: &str) {
    let path = golden(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, actual).unwrap();
        return;
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "golden file {name} differs");
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario();
    let mut outputs = Vec::new();
    for (i, seed) in ["7", "7", "8"].iter().enumerate() {
        let trace = dir.path().join(format!("trace{i}.jsonl"));
        let ledger = dir.path().join(format!("ledger{i}.jsonl"));
        let o = run(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            seed,
            "--out",
            trace.to_str().unwrap(),
            "--ledger-out",
            ledger.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push((fs::read(&trace).unwrap(), fs::read(&ledger).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_ne!(outputs[0].0, outputs[2].0);
    assert!(!outputs[0].1.is_empty());
}

#[test]
fn experiment_is_deterministic_across_runs_and_threads() {
    let cfg = scenario();
    let args = |extra: &[&'static str]| {
        let mut v = vec![
            "experiment".to_string(),
            "--config".into(),
            cfg.to_str().unwrap().into(),
            "--replicas".into(),
            "4".into(),
            "--repetitions".into(),
            "3".into(),
        ];
        v.extend(extra.iter().map(|s| s.to_string()));
        v
    };
    let a = bin().args(args(&[])).output().unwrap();
    let b = bin().args(args(&[])).output().unwrap();
    let c = bin().args(args(&["--sequential"])).output().unwrap();
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    check_golden("experiment_small.json", &stdout(&a));
}

#[test]
fn schedule_with_oracle_prints_equal_objectives() {
    let o = run(&[
        "schedule",
        "--config",
        scenario().to_str().unwrap(),
        "--oracle",
        "--format",
        "text",
    ]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let objective = |prefix: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(prefix)).expect(prefix);
        let rest = line.split("objective ").nth(1).unwrap();
        rest.split_whitespace().next().unwrap().parse().unwrap()
    };
    assert_eq!(objective("instance release"), objective("oracle objective"));
}

#[test]
fn schedule_json_matches_golden() {
    let o = run(&["schedule", "--config", scenario().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    check_golden("schedule_release.json", &stdout(&o));
}

#[test]
fn window_flag_shortens_the_schedule() {
    let cfg = scenario();
    let o = run(&[
        "schedule",
        "--config",
        cfg.to_str().unwrap(),
        "--window",
        "1,3",
        "--format",
        "csv",
    ]);
    assert_eq!(code(&o), 0);
    let csv = stdout(&o);
    assert!(csv.starts_with("task,resource,phase,index,start,end\n"));
    for line in csv.lines().skip(1).filter(|l| l.contains(",operator,")) {
        let end: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(end <= 2.0);
    }
}

const VIOLATED: &str = r#"{"task_id":"ok","h_displaced":4.0,"operator_hours":{"t_planning":0.5,"t_interrupts":[],"t_review":0.5},"t_agent":2.0,"completed_at":3.0}
{"task_id":"thin","h_displaced":2.0,"operator_hours":{"t_planning":0.25,"t_interrupts":[0.1],"t_review":0.25},"t_agent":1.0,"completed_at":5.0,"information":{"i_task":1000.0,"i_novel":100.0,"channels":{"i_planning":300.0,"i_interrupts":[50.0],"i_review":200.0}}}
"#;

#[test]
fn analyze_warns_on_violated_conservation() {
    let dir = tempfile::tempdir().unwrap();
    let ledger = dir.path().join("ledger.jsonl");
    fs::write(&ledger, VIOLATED).unwrap();
    let o = run(&["analyze", ledger.to_str().unwrap(), "--format", "text", "--window", "0,6"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("warning: task `thin`"), "{text}");
    assert!(text.contains("window (0, 6]"), "{text}");
    check_golden("analyze_violated.txt", &text);
}

#[test]
fn analyze_then_report_renders_every_table() {
    let dir = tempfile::tempdir().unwrap();
    let ledger = dir.path().join("ledger.jsonl");
    let doc = dir.path().join("report.json");
    let cfg = scenario();
    let o = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("trace.jsonl").to_str().unwrap(),
        "--ledger-out",
        ledger.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let o = run(&[
        "analyze",
        ledger.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        doc.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let doc = doc.to_str().unwrap();
    let text = stdout(&run(&["report", doc]));
    assert!(text.contains("window (0, 40]"), "{text}");

    let density = stdout(&run(&["report", doc, "--format", "csv", "--table", "density"]));
    let mut lines = density.lines();
    assert_eq!(lines.next(), Some("m,alpha,rho_eff"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (f[0], f[2])
        })
        .collect();
    assert_eq!(rows.len(), 202);
    for pair in rows.windows(2).filter(|w| w[0].0 == w[1].0) {
        assert!(pair[1].1 <= pair[0].1);
    }
    for table in ["tasks", "windows", "phases"] {
        let o = run(&["report", doc, "--format", "csv", "--table", table]);
        assert_eq!(code(&o), 0, "{table}");
    }
    assert_eq!(code(&run(&["report", doc, "--format", "csv", "--table", "gantt"])), 1);
}

#[test]
fn exit_codes_follow_the_table() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["simulate"])), 1);
    assert_eq!(code(&run(&["schedule", "--window", "3,1"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);

    let bad = dir.path().join("bad.toml");
    let text = fs::read_to_string(scenario()).unwrap().replacen("version = 1", "version = 9", 1);
    fs::write(&bad, text).unwrap();
    assert_eq!(code(&run(&["simulate", "--config", bad.to_str().unwrap()])), 2);

    let ledger = dir.path().join("neg.jsonl");
    fs::write(&ledger, VIOLATED.replace("\"t_agent\":1.0", "\"t_agent\":-1.0")).unwrap();
    let o = run(&["analyze", ledger.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("t_agent"), "{err}");

    let missing = dir.path().join("missing.jsonl");
    assert_eq!(code(&run(&["analyze", missing.to_str().unwrap()])), 3);
}
