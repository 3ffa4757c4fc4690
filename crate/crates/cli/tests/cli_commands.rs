use bioknock_cli::{
    run_with_args, CliError, COST_FILE, DELETION_CSV, FBA_JSON, FLUX_CSV, SEARCH_LOG_FILE, SOLUTION_FILE,
};
use std::path::{Path, PathBuf};
use std::process::Command;

const CORE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/e_coli_core.json");

fn config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.json");
    let model = serde_json::to_string(CORE).unwrap();
    std::fs::write(&path, format!(r#"{{"model_path": {model}{body}}}"#)).unwrap();
    path
}

fn run(cfg: &Path, out: &Path, args: &[&str]) -> Result<String, CliError> {
    let mut all = vec!["bioknock".to_string()];
    all.extend(args.iter().map(|s| s.to_string()));
    all.extend([
        "--config".into(),
        cfg.display().to_string(),
        "--out".into(),
        out.display().to_string(),
    ]);
    run_with_args(all)
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn fba_reports_wild_type_and_deletion() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "");
    let out = tmp.path().join("fba");
    let msg = run(&cfg, &out, &["fba", "--knockouts", "PGI"]).unwrap();
    assert!(msg.starts_with("wild-type growth 0.8817"), "{msg}");
    let report: serde_json::Value = serde_json::from_str(&read(&out, FBA_JSON)).unwrap();
    let wt = report["wild_type"]["growth"].as_f64().unwrap();
    assert!((wt - 0.881713).abs() < 1e-5);
    let ko = report["knockout"]["growth"].as_f64().unwrap();
    assert!(ko > 0.0 && ko < wt);
    let fluxes = read(&out, FLUX_CSV);
    assert_eq!(fluxes.lines().next().unwrap(), "reaction_id;wild_type;knockout");
    assert_eq!(fluxes.lines().count(), 1 + 95);
    let pgi = fluxes.lines().find(|l| l.starts_with("PGI;")).unwrap();
    assert!(pgi.ends_with(";0"), "{pgi}");
    let deletions = read(&out, DELETION_CSV);
    assert!(deletions.lines().any(|l| l.starts_with("GLCpts;")));
}

#[test]
fn unknown_knockout_and_missing_model_are_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "");
    assert!(matches!(
        run(&cfg, tmp.path(), &["fba", "--knockouts", "NOPE"]),
        Err(CliError::Model(_))
    ));
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"model_path": "does/not/exist.json"}"#).unwrap();
    assert!(run(&bad, tmp.path(), &["fba"]).is_err());
    assert!(matches!(
        run(&cfg, tmp.path(), &["optimize", "--threads", "0"]),
        Err(CliError::Usage(_))
    ));
    assert!(matches!(
        run_with_args(["bioknock", "frobnicate"]),
        Err(CliError::Usage(_))
    ));
}

#[test]
fn optimize_writes_solution_log_and_breakdown() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "");
    let out = tmp.path().join("opt");
    let msg = run(&cfg, &out, &["optimize"]).unwrap();
    assert!(msg.contains("{ATPS4r}"), "{msg}");
    let sol: serde_json::Value = serde_json::from_str(&read(&out, SOLUTION_FILE)).unwrap();
    assert_eq!(sol["status"], "optimal");
    let log = read(&out, SEARCH_LOG_FILE);
    assert_eq!(
        log.lines().count(),
        1 + sol["visits"]["evaluated"].as_u64().unwrap() as usize
    );
    let breakdown = read(&out, COST_FILE);
    let rows: Vec<(String, f64)> = breakdown
        .lines()
        .skip(1)
        .map(|l| {
            let (k, v) = l.split_once(';').unwrap();
            (k.to_string(), v.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 7);
    let total = rows.iter().find(|r| r.0 == "total").unwrap().1;
    let sum: f64 = rows.iter().filter(|r| r.0 != "total").map(|r| r.1).sum();
    assert!((sum - total).abs() <= 1e-9 * total);
    assert!((total - sol["cost"]["specific_cost"].as_f64().unwrap()).abs() <= 1e-12 * total);

    // report rebuilds the same breakdown from the solution alone
    std::fs::remove_file(out.join(COST_FILE)).unwrap();
    run_with_args(["bioknock", "report", out.to_str().unwrap()]).unwrap();
    assert_eq!(read(&out, COST_FILE), breakdown);
}

#[test]
fn repeated_runs_are_identical_and_sweep_point_matches_optimize() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), r#", "product": "EX_ac_e""#);
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    run(&cfg, &a, &["optimize"]).unwrap();
    run(&cfg, &b, &["optimize", "--threads", "2"]).unwrap();
    for f in [SOLUTION_FILE, SEARCH_LOG_FILE, COST_FILE] {
        assert_eq!(read(&a, f), read(&b, f), "{f}");
    }
    run(&cfg, &c, &["sweep", "--axis", "knockouts", "--points", "1"]).unwrap();
    let sweep: serde_json::Value = serde_json::from_str(&read(&c, "sweep.json")).unwrap();
    let sol: serde_json::Value = serde_json::from_str(&read(&a, SOLUTION_FILE)).unwrap();
    assert_eq!(sweep[0]["simultaneous"], sol);
    let csv = read(&c, "sweep.csv");
    assert!(csv
        .lines()
        .next()
        .unwrap()
        .starts_with("max_knockouts;status;knockouts;specific_cost;"));
    assert!(csv.lines().nth(1).unwrap().starts_with("1;optimal;ATPS4r;"));
}

#[test]
fn sequential_reports_outcome_and_report_reads_it() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "");
    let out = tmp.path().join("seq");
    run(&cfg, &out, &["sequential"]).unwrap();
    let v: serde_json::Value = serde_json::from_str(&read(&out, SOLUTION_FILE)).unwrap();
    assert_eq!(v["outcome"]["class"], "D");
    assert!(v["simultaneous"]["cost"].is_object());
    run_with_args(["bioknock", "report", out.to_str().unwrap()]).unwrap();
    assert!(read(&out, COST_FILE).starts_with("category;USD_per_kg\n"));
}

#[test]
fn report_needs_a_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(matches!(
        run_with_args(["bioknock", "report", tmp.path().to_str().unwrap()]),
        Err(CliError::Io { .. })
    ));
    std::fs::write(tmp.path().join(SOLUTION_FILE), "{}").unwrap();
    assert!(matches!(
        run_with_args(["bioknock", "report", tmp.path().to_str().unwrap()]),
        Err(CliError::Report(_))
    ));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_bioknock");
    let ok = Command::new(bin).arg("--help").output().unwrap();
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("sweep"));
    let usage = Command::new(bin).args(["sweep"]).output().unwrap();
    assert_eq!(usage.status.code(), Some(2));
    let missing = Command::new(bin)
        .args(["report", "/nonexistent/run"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error: "));
}
