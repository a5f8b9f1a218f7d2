use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use tempfile::TempDir;

fn mtf(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_mtf")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).display().to_string()
}

fn simulate_small(dir: &TempDir, name: &str, seed: &str) -> String {
    let out = p(dir, name);
    let (code, _, err) = mtf(&[
        "simulate", "--scenario", "cp", "--n", "20", "--d1", "6", "--d2", "5", "--l", "4", "--seed", seed, "--out", &out,
    ]);
    assert_eq!(code, 0, "{err}");
    out
}

fn fit_small(input: &str, output: &str, model: &str) {
    let (code, _, err) = mtf(&[
        "fit", "--model", model, "--k", "3", "--chains", "2", "--burnin", "30", "--samples", "5", "--thin", "4", "--seed",
        "3", input, output,
    ]);
    assert_eq!(code, 0, "{err}");
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn simulate_writes_requested_dims_deterministically() {
    let d = TempDir::new().unwrap();
    let a = simulate_small(&d, "a", "5");
    let b = simulate_small(&d, "b", "5");
    assert_eq!(files(Path::new(&a)), files(Path::new(&b)));
    let manifest = fs::read_to_string(Path::new(&a).join("collection.toml")).unwrap();
    assert!(manifest.contains("d = 6") && manifest.contains("d = 5") && manifest.contains("l = 4"));
    let c = simulate_small(&d, "c", "6");
    assert_ne!(files(Path::new(&a)), files(Path::new(&c)));
}

#[test]
fn simulate_reps_write_subdirectories() {
    let d = TempDir::new().unwrap();
    let out = p(&d, "batch");
    let (code, stdout, _) = mtf(&["simulate", "--n", "10", "--d1", "3", "--d2", "3", "--l", "2", "--reps", "3", "--out", &out]);
    assert_eq!(code, 0);
    assert_eq!(stdout.lines().count(), 3);
    for r in ["rep_000", "rep_001", "rep_002"] {
        assert!(Path::new(&out).join(r).join("collection.toml").is_file());
    }
}

#[test]
fn invalid_rho_is_a_usage_error() {
    let d = TempDir::new().unwrap();
    let (code, _, err) = mtf(&["simulate", "--scenario", "continuum", "--rho", "1.2", "--out", &p(&d, "x")]);
    assert_eq!(code, 2);
    assert!(err.contains("rho"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(mtf(&["fit", "--bogus"]).0, 2);
}

#[test]
fn smoke_fit_is_fast_and_reproducible() {
    let d = TempDir::new().unwrap();
    let input = simulate_small(&d, "data", "1");
    let t = Instant::now();
    fit_small(&input, &p(&d, "a1"), "mtf");
    assert!(t.elapsed().as_secs_f64() < 10.0);
    fit_small(&input, &p(&d, "a2"), "mtf");
    assert_eq!(files(&d.path().join("a1")), files(&d.path().join("a2")));
    let names: Vec<String> = files(&d.path().join("a1")).into_iter().map(|f| f.0).collect();
    for f in ["run.toml", "transform.csv", "chain_0.json", "chain_1.json", "trace_0.csv", "summary.toml"] {
        assert!(names.iter().any(|n| n == f), "{f} missing");
    }
}

#[test]
fn gfa_archive_has_no_third_mode_factors() {
    let d = TempDir::new().unwrap();
    let input = simulate_small(&d, "data", "1");
    fit_small(&input, &p(&d, "g"), "gfa");
    let chain = fs::read_to_string(d.path().join("g/chain_0.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&chain).unwrap();
    for snap in v["snapshots"].as_array().unwrap() {
        assert_eq!(snap["u"].as_array().unwrap().len(), 0);
        assert!(snap["group_of"].as_array().unwrap().iter().all(|g| g.is_null()));
    }
    fit_small(&input, &p(&d, "m"), "mtf");
    let chain = fs::read_to_string(d.path().join("m/chain_0.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&chain).unwrap();
    assert_eq!(v["snapshots"][0]["u"].as_array().unwrap().len(), 1);
}

#[test]
fn config_file_supplies_flags_and_command_line_wins() {
    let d = TempDir::new().unwrap();
    let cfg = p(&d, "cfg.toml");
    fs::write(&cfg, "[simulate]\nn = 12\nd1 = 3\nd2 = 3\nl = 2\nseed = 9\n").unwrap();
    let out = p(&d, "s");
    let (code, _, err) = mtf(&["--config", &cfg, "simulate", "--n", "14", "--out", &out]);
    assert_eq!(code, 0, "{err}");
    let spec = fs::read_to_string(Path::new(&out).join("spec.toml")).unwrap();
    assert!(spec.contains("n = 14") && spec.contains("seed = 9") && spec.contains("d1 = 3"));
    fs::write(&cfg, "[simulate]\nbogus = 1\n").unwrap();
    assert_eq!(mtf(&["--config", &cfg, "simulate", "--out", &out]).0, 2);
}

#[test]
fn predict_reports_with_and_without_truth() {
    let d = TempDir::new().unwrap();
    let data = p(&d, "c");
    let (code, _, err) = mtf(&["simulate", "--scenario", "continuum", "--rho", "1", "--seed", "4", "--out", &data]);
    assert_eq!(code, 0, "{err}");
    let arch = p(&d, "arch");
    let (code, _, err) = mtf(&[
        "fit", "--k", "4", "--chains", "1", "--burnin", "20", "--samples", "3", "--thin", "2", "--scale", "none", &data, &arch,
    ]);
    assert_eq!(code, 0, "{err}");
    let test = format!("{data}/test");
    let truth = format!("{data}/test_truth");
    let (code, stdout, err) = mtf(&["predict", "--archive", &arch, "--test", &test, "--truth", &truth]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.starts_with("rmse "));
    let report = fs::read_to_string(Path::new(&arch).join("prediction.csv")).unwrap();
    assert!(report.starts_with("view,sample,feature,slab,predicted,posterior_std,truth\n"));
    assert!(report.contains("# rmse=") && report.contains("# n_targets=5000"));

    let bare = p(&d, "bare.csv");
    let (code, _, _) = mtf(&["predict", "--archive", &arch, "--test", &test, "--out", &bare]);
    assert_eq!(code, 0);
    let report = fs::read_to_string(&bare).unwrap();
    assert!(report.starts_with("view,sample,feature,slab,predicted,posterior_std\n"));
    assert!(!report.contains("rmse"));

    let other = simulate_small(&d, "other", "1");
    assert_eq!(mtf(&["predict", "--archive", &arch, "--test", &other]).0, 2);
    assert_eq!(mtf(&["predict", "--archive", &p(&d, "missing"), "--test", &test]).0, 1);

    let (code, table, _) = mtf(&["report", &arch]);
    assert_eq!(code, 0);
    assert!(table.contains("# rmse by rho\nrho,model,n,rmse_mean,rmse_sd\n1,mtf,1,"));
}

#[test]
fn report_tables_and_mixed_models() {
    let d = TempDir::new().unwrap();
    let input = simulate_small(&d, "data", "1");
    fit_small(&input, &p(&d, "runs/m1"), "mtf");
    fit_small(&input, &p(&d, "runs/m2"), "mtf");
    fit_small(&input, &p(&d, "g"), "gfa");

    let (code, single, _) = mtf(&["report", &p(&d, "runs/m1")]);
    assert_eq!(code, 0);
    let rows: Vec<&str> = single.lines().skip(2).take_while(|l| !l.is_empty()).collect();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].split(',').count(), 6);
    assert!(single.contains("# tensor-specific loading correlation"));

    let (code, batch, _) = mtf(&["report", &p(&d, "runs")]);
    assert_eq!(code, 0);
    assert!(batch.contains("\nmtf,2,"));

    assert_eq!(mtf(&["report", &p(&d, "runs"), &p(&d, "g")]).0, 2);
    let (code, mixed, _) = mtf(&["report", "--allow-mixed", &p(&d, "runs"), &p(&d, "g")]);
    assert_eq!(code, 0);
    assert!(mixed.contains("\ngfa,1,") && mixed.contains("\nmtf,2,"));
}

#[test]
fn diagnose_flags_short_chains() {
    let d = TempDir::new().unwrap();
    let input = simulate_small(&d, "data", "1");
    fit_small(&input, &p(&d, "a"), "mtf");
    let (code, out, _) = mtf(&["diagnose", &p(&d, "a")]);
    assert_eq!(code, 1);
    assert!(out.contains("flagged_chains = 2"));

    let (code, _, err) = mtf(&[
        "fit", "--k", "3", "--chains", "1", "--burnin", "300", "--samples", "30", "--thin", "10", "--seed", "2", &input,
        &p(&d, "b"),
    ]);
    assert_eq!(code, 0, "{err}");
    let (code, out, _) = mtf(&["diagnose", &p(&d, "b")]);
    assert!(out.contains("geweke.log_joint"));
    assert_eq!(code, if out.contains("flagged = true") { 1 } else { 0 });
}
