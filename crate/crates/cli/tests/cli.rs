use std::path::Path;
use std::process::{Command, Output};

use sphere_ramsey::certificate::Certificate;
use sphere_ramsey_cli::{run, RunManifest};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sphere-ramsey"))
        .args(args)
        .env_remove("SPHERE_RAMSEY_WORKERS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn in_process(args: &[&str]) -> (u8, String, String) {
    let mut argv = vec!["sphere-ramsey"];
    argv.extend_from_slice(args);
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let c = run(argv, &mut out, &mut err);
    (c, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn red_clique_estimate_is_byte_identical() {
    let args = [
        "estimate", "--quantity", "red-clique", "--r", "3", "--k", "100", "--p", "auto", "--samples", "10000000",
        "--seed", "1", "--workers", "8",
    ];
    let a = bin(&args);
    let b = bin(&args);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    for key in ["quantity", "params", "estimate", "stderr", "prediction", "prediction_source", "z_score", "seed", "workers"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    // Red triangles sit below the independent value p^3.
    let p: f64 = v["params"]["p"].as_f64().unwrap();
    assert!(v["estimate"].as_f64().unwrap() < p.powi(3) - 3.0 * v["stderr"].as_f64().unwrap());
}

#[test]
fn certificate_search_and_recheck() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let found = bin(&["certify", "--C", "1", "--ell", "3", "--n", "5", "--k", "50", "--seed", "7", "--out", out]);
    assert_eq!(code(&found), 0, "{}", String::from_utf8_lossy(&found.stderr));
    let cert_path = dir.path().join("certify.json");
    let cert = Certificate::decode(&read(&cert_path)).unwrap();
    assert!(cert.verify().unwrap().passed);
    let manifest = RunManifest::decode(&read(&dir.path().join("certify.manifest.json"))).unwrap();
    assert_eq!(manifest.seed, 7);
    assert!(!manifest.seed_from_entropy);

    let check = bin(&["certify", "--check", cert_path.to_str().unwrap()]);
    assert_eq!(code(&check), 0);

    let six = bin(&["certify", "--C", "1", "--ell", "3", "--n", "6", "--k", "50", "--seed", "7"]);
    assert_eq!(code(&six), 1);
    assert!(String::from_utf8_lossy(&six.stderr).contains("no certificate after 10000 attempts"));
}

#[test]
fn tampered_certificate_fails_recheck() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&bin(&["certify", "--C", "1", "--ell", "3", "--n", "5", "--k", "50", "--seed", "7", "--out", out])), 0);
    let path = dir.path().join("certify.json");
    let mut cert = Certificate::decode(&read(&path)).unwrap();
    cert.c += 1e-3;
    std::fs::write(&path, cert.to_json()).unwrap();
    assert_eq!(code(&bin(&["certify", "--check", path.to_str().unwrap()])), 1);
    std::fs::write(&path, "{\"version\": 1}").unwrap();
    assert_eq!(code(&bin(&["certify", "--check", path.to_str().unwrap()])), 2);
}

#[test]
fn manifest_replay_reproduces_output() {
    let first = tempfile::tempdir().unwrap();
    let args = ["estimate", "--quantity", "blue-clique", "--r", "4", "--k", "60", "--samples", "20000", "--format", "csv"];
    let mut with_out = args.to_vec();
    with_out.extend(["--out", first.path().to_str().unwrap()]);
    let (c, stdout, _) = in_process(&with_out);
    assert_eq!(c, 0);
    assert!(stdout.is_empty());
    let manifest = RunManifest::decode(&read(&first.path().join("estimate.manifest.json"))).unwrap();
    assert!(manifest.seed_from_entropy);
    assert_eq!(manifest.subcommand, "estimate");
    assert_eq!(manifest.params["quantity"], "blue-clique");

    let second = tempfile::tempdir().unwrap();
    let mut replay: Vec<String> = manifest.argv.iter().filter(|a| !a.starts_with("--out")).cloned().collect();
    if let Some(i) = replay.iter().position(|a| a == first.path().to_str().unwrap()) {
        replay.remove(i);
    }
    replay.extend(["--out".to_string(), second.path().to_str().unwrap().to_string()]);
    let replay: Vec<&str> = replay.iter().map(String::as_str).collect();
    assert_eq!(in_process(&replay).0, 0);
    assert_eq!(read(&first.path().join("estimate.csv")), read(&second.path().join("estimate.csv")));
}

#[test]
fn csv_estimate_has_the_json_columns() {
    let (c, out, _) = in_process(&[
        "estimate", "--quantity", "perfect-fraction", "--k", "400", "--r", "4", "--ell", "2", "--samples", "5000",
        "--seed", "3", "--format", "csv",
    ]);
    assert_eq!(c, 0);
    let header = out.lines().next().unwrap();
    assert_eq!(header, "quantity,params,estimate,stderr,prediction,prediction_source,z_score,seed,workers");
    assert_eq!(out.lines().count(), 2);
}

#[test]
fn exit_codes() {
    let unknown = bin(&["estimate", "--bogus"]);
    assert_eq!(code(&unknown), 2);
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("Usage"));
    assert_eq!(code(&bin(&["frobnicate"])), 2);
    assert_eq!(code(&bin(&["cap", "--k", "10", "--p", "0.7"])), 2);
    assert_eq!(code(&bin(&["estimate", "--quantity", "red-clique", "--k", "40000", "--samples", "1000"])), 1);
    assert_eq!(code(&bin(&["certify", "--C", "1", "--ell", "31", "--n", "40", "--k", "10"])), 1);
    assert_eq!(code(&bin(&["--help"])), 0);
    assert_eq!(code(&bin(&["--workers", "0", "cap", "--k", "3", "--p", "0.5"])), 2);
}

#[test]
fn constants_and_baseline_outputs() {
    let (c, out, _) = in_process(&["constants", "--C", "2", "--format", "json"]);
    assert_eq!(c, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((v["p_C"].as_f64().unwrap() - 0.381_966_011_3).abs() < 1e-10);

    let (c, out, _) = in_process(&["baseline", "--C", "2", "--ell", "20,30", "--format", "csv"]);
    assert_eq!(c, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "C,ell,p_opt,log_n,beta_C,improvement_log_ratio");
    assert_eq!(lines.len(), 3);
}

#[test]
fn graph_reports_cliques() {
    let (c, out, _) = in_process(&[
        "graph", "--k", "20", "--n", "12", "--p", "0.4", "--red-size", "3", "--blue-size", "4", "--seed", "5",
    ]);
    assert_eq!(c, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["red_edges"].as_u64().unwrap() + v["blue_edges"].as_u64().unwrap(), 66);
    assert!(v.get("red_clique").is_some() && v.get("points").is_none());
}

#[test]
fn quick_verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let (c, _, err) = in_process(&["verify", "--level", "quick", "--seed", "9", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(c, 0, "{err}");
    let report: serde_json::Value = serde_json::from_str(&read(&dir.path().join("verify.json"))).unwrap();
    assert_eq!(report["checks"].as_array().unwrap().len(), 16);
}
