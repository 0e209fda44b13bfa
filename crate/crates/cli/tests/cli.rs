use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_urtlab"));
    // keep the caller's URTLAB_* settings out of the runs under test
    for (k, _) in std::env::vars() {
        if k.starts_with("URTLAB_") {
            c.env_remove(k);
        }
    }
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json_file(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn schema() -> jsonschema::JSONSchema {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("schemas/run_record.schema.json");
    let schema: Value = serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap();
    jsonschema::JSONSchema::compile(&schema).expect("schema compiles")
}

fn assert_valid(record: &Value) {
    let schema = schema();
    let msgs: Vec<String> = match schema.validate(record) {
        Ok(()) => return,
        Err(errors) => errors.map(|e| format!("{e} at {}", e.instance_path)).collect(),
    };
    panic!("record does not match the schema: {msgs:?}");
}

#[test]
fn rate_fn_csv_grid() {
    let o = run(&["rate-fn", "--d", "4", "--samples", "3", "--format", "csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,phi,I,phi_second"));
    let ts: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(ts, vec![0.25, 0.5, 0.75]);
}

#[test]
fn exponent_of_binary_subtree() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e.json");
    let o = run(&[
        "exponent",
        "--profile",
        "subtree:d=4,dp=3",
        "--n",
        "4096",
        "--method",
        "ratio",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rec = json_file(&out);
    assert_valid(&rec);
    let rho = rec["results"]["rho_lazy"].as_f64().unwrap();
    assert!((rho - 0.9375).abs() < 1e-3, "{rho}");
    assert!(rec.get("wall_time_s").is_none());
    assert!(rec["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
}

#[test]
fn identical_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 3] = [
        &["percolate", "--d", "4", "--p", "0.3", "--r", "10", "--samples", "300", "--seed", "5"],
        &["two-three-audit", "--d", "4", "--p", "0.35", "--l", "1", "--samples", "200", "--seed", "7"],
        &["walk", "series", "--profile", "bernoulli:d=4,p=0.3,r=6,seed=2", "--n", "6"],
    ];
    for (i, args) in cases.iter().enumerate() {
        let mut bytes = Vec::new();
        // the output path is echoed in the record, so every run reuses it
        let out = dir.path().join(format!("{i}.json"));
        for threads in ["1", "4", "4"] {
            let mut full: Vec<&str> = args.to_vec();
            let out_s = out.to_str().unwrap().to_string();
            full.extend(["--threads", threads, "--out", &out_s]);
            let o = run(&full);
            assert_eq!(code(&o), 0, "{args:?}: {}", stderr(&o));
            bytes.push(std::fs::read(&out).unwrap());
        }
        assert_eq!(bytes[0], bytes[1], "{args:?} depends on the thread count");
        assert_eq!(bytes[1], bytes[2], "{args:?} is not reproducible");
    }
}

#[test]
fn audit_records_follow_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, extra) in [("two-three-audit", "0.35"), ("mtp-audit", "0.3")] {
        let out = dir.path().join(format!("{cmd}.json"));
        let o = run(&[cmd, "--p", extra, "--l", "2", "--samples", "300", "--seed", "7", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let rec = json_file(&out);
        assert_valid(&rec);
        assert_eq!(rec["results"]["per_sample"].as_array().unwrap().len(), 300);
        assert!(rec["results"]["min_slack1"].as_f64().unwrap() >= -1e-10);
    }
    for args in [
        vec!["cogrowth", "--d", "4", "--gamma", "0.6931472"],
        vec!["cogrowth", "--d", "4", "--invert", "0.875"],
        vec!["rate-fn", "--samples", "5"],
        vec!["percolate", "--samples", "20"],
        vec!["verify", "--criteria", "1,2,4"],
        vec!["growth", "--profile", "canopy:d=4,level=0"],
        vec!["ldp-check"],
        vec!["spine", "--half-length", "6", "--samples", "50"],
        vec!["walk", "kernel", "--n", "5"],
    ] {
        let o = run(&args);
        assert_eq!(code(&o), 0, "{args:?}: {}", stderr(&o));
        let rec: Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_valid(&rec);
        assert!(rec["wall_time_s"].as_f64().unwrap() >= 0.0);
    }
}

#[test]
fn cogrowth_values() {
    let o = run(&["cogrowth", "--d", "4", "--invert", "0.875"]);
    let rec: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((rec["results"]["gamma"].as_f64().unwrap() - 2f64.ln()).abs() < 1e-10);
    assert_eq!(rec["results"]["branch"], "supercritical");
    let o = run(&["cogrowth", "--d", "4", "--invert", "0.8"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn exit_codes() {
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["rate-fn", "--nope", "1"])), 1);
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["exponent", "--profile", "hexagon:d=4"])), 2);
    assert_eq!(code(&run(&["exponent", "--profile", "subtree:d=4,dp=3", "--n", "x"])), 2);
    assert_eq!(code(&run(&["ldp-check", "--tol=-1"])), 2);
    assert_eq!(code(&run(&["rate-fn", "--d", "2"])), 2);
    assert_eq!(code(&run(&["rate-fn", "--threads", "0"])), 2);
    assert_eq!(code(&run(&["cogrowth"])), 2);
    assert_eq!(code(&run(&["cogrowth", "--format", "csv", "--gamma", "1"])), 2);
    assert_eq!(code(&run(&["exponent", "--profile", "single:d=4", "--n", "10"])), 3);
    assert_eq!(code(&run(&["percolate", "--p", "0.9", "--r", "60"])), 3);
}

#[test]
fn failures_leave_no_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never.json");
    let o = run(&["exponent", "--profile", "single:d=4", "--n", "10", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn verify_passes_at_d4_and_d3() {
    for d in ["4", "3"] {
        let o = run(&["verify", "--d", d, "--format", "csv"]);
        assert_eq!(code(&o), 0, "d={d}: {}", stderr(&o));
        let text = String::from_utf8(o.stdout).unwrap();
        assert_eq!(text.lines().next(), Some("id,name,passed,measured,gap,tolerance"));
        assert_eq!(text.lines().filter(|l| l.contains(",true,")).count(), 12, "{text}");
    }
}

#[test]
fn verify_reports_injected_fault() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.json");
    let o = run(&["verify", "--criteria", "10,11", "--inject-fault", "wrong-sphere-size", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 4);
    let failures: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(failures["failures"], serde_json::json!(["criterion_11"]));
    assert_eq!(failures["results"], serde_json::json!([11]));
    let rec = json_file(&out);
    assert_valid(&rec);
    let c11 = &rec["results"]["criteria"][1];
    assert_eq!(c11["passed"], false);
    assert!(c11["gap"].as_f64().unwrap() > 0.05);
    assert!(stderr(&o).contains("[FAIL] criterion_11"));
}

#[test]
fn config_file_with_env_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("p.json");
    std::fs::write(
        &cfg,
        format!("# cluster sizes\ncommand = percolate\np = 0.25\nsamples = 40 # few\nout = {}\n", out.display()),
    )
    .unwrap();
    let o = bin().args(["run", "--config", cfg.to_str().unwrap()]).env("URTLAB_SEED", "9").output().unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rec = json_file(&out);
    assert_eq!(rec["seed"], 9);
    assert_eq!(rec["config"]["params"]["p"], "0.25");
    assert_eq!(rec["config"]["params"]["r"], "8");
    assert_eq!(rec["results"]["params"]["seed"], 9);

    // flags beat the environment
    let o = bin().args(["cogrowth", "--gamma", "0.5", "--d", "5"]).env("URTLAB_D", "6").output().unwrap();
    let rec: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rec["results"]["d"], 5);
    let o = bin().args(["cogrowth", "--gamma", "0.5"]).env("URTLAB_D", "6").output().unwrap();
    let rec: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rec["results"]["d"], 6);

    std::fs::write(&cfg, "command = percolate\nwidth = 3\n").unwrap();
    assert_eq!(code(&run(&["run", "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn tree_output_feeds_spine_and_growth() {
    let dir = tempfile::tempdir().unwrap();
    let tree = dir.path().join("c.tree");
    let o = run(&["percolate", "--p", "0.6", "--r", "5", "--seed", "3", "--tree-out", tree.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&tree).unwrap();
    assert!(text.starts_with("tree d=4 root="));
    let o = run(&["spine", "--tree", tree.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = String::from_utf8(o.stdout).unwrap();
    assert_eq!(csv.lines().next(), Some("vertex,label,depth,on_spine,weight"));
    let spec = format!("tree:file={}", tree.display());
    let o = run(&["growth", "--profile", &spec, "--format", "csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().next(), Some("r,ln_s,ln_a,ball_root,half_ratio"));
}

#[test]
fn walk_outputs() {
    let o = run(&["walk", "kernel", "--d", "4", "--n", "2", "--format", "csv"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<(usize, usize, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 1 + 2 + 3);
    let q2: Vec<f64> = rows.iter().filter(|r| r.0 == 2).map(|r| r.2.exp()).collect();
    for (got, want) in q2.iter().zip([5.0 / 16.0, 0.5, 3.0 / 16.0]) {
        assert!((got - want).abs() < 1e-15);
    }
    let o = run(&["walk", "series", "--profile", "regular:d=4", "--n", "8", "--format", "csv"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("n,logp"));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",0.0")), "{text}");
}
