use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn locdep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_locdep")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p: PathBuf = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn blocks(sizes: &[usize]) -> String {
    let mut s = String::from("node_id\tblock_id\n");
    let mut id = 1;
    for (k, &n) in sizes.iter().enumerate() {
        for _ in 0..n {
            s.push_str(&format!("{id}\t{}\n", k + 1));
            id += 1;
        }
    }
    s
}

struct Files {
    _dir: tempfile::TempDir,
    blocks: String,
    model: String,
    edges: String,
}

fn sbm_files() -> Files {
    let dir = tempfile::tempdir().unwrap();
    let blocks = write(dir.path(), "b.tsv", &blocks(&[6, 6, 6]));
    let model = write(
        dir.path(),
        "m.json",
        r#"{"within": ["within_edges", "transitive_edges"], "between": ["between_edges"],
            "theta": {"within": [-1.0, 0.3], "between": [-2.5]}}"#,
    );
    let edges = dir.path().join("e.tsv").to_string_lossy().into_owned();
    let out = locdep(&["simulate", "--blocks", &blocks, "--model", &model, "--seed", "3", "--out", &edges]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    Files { _dir: dir, blocks, model, edges }
}

#[test]
fn fit_writes_json_and_is_reproducible() {
    let f = sbm_files();
    let args =
        ["fit", "--blocks", &f.blocks, "--model", &f.model, "--edges", &f.edges, "--seed", "7", "--n-mcmc", "2000"];
    let a = locdep(&args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let b = locdep(&args);
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["theta_hat"]["within"].as_array().unwrap().len(), 2);
    assert_eq!(v["status"], "Converged");
    assert_eq!(v["seed"], 7);
    assert!(v["ess_trace"].as_array().unwrap().iter().all(|e| e.as_f64().unwrap() <= 2000.0));
}

#[test]
fn fit_with_intervals_and_csv() {
    let f = sbm_files();
    let base = ["fit", "--blocks", &f.blocks, "--model", &f.model, "--edges", &f.edges, "--n-mcmc", "2000"];
    let out = locdep(&[&base[..], &["--ci", "0.05"]].concat());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let iv = &v["intervals"][1];
    assert_eq!(iv["term"], "transitive_edges");
    assert!(iv["lower"].as_f64().unwrap() < iv["upper"].as_f64().unwrap());

    let out = locdep(&[&base[..], &["--format", "csv"]].concat());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("term,estimate,std_error\nwithin_edges,"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn fit_writes_manifest_next_to_output() {
    let f = sbm_files();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fit.json");
    let o = out.to_string_lossy().into_owned();
    let r = locdep(&[
        "fit", "--blocks", &f.blocks, "--model", &f.model, "--edges", &f.edges, "--n-mcmc", "500", "--out", &o,
    ]);
    assert!(r.status.success());
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fit.json.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(m["command"], "fit");
}

#[test]
fn complete_block_exits_with_numerical_code() {
    let dir = tempfile::tempdir().unwrap();
    let b = write(dir.path(), "b.tsv", &blocks(&[3, 3]));
    let m = write(dir.path(), "m.json", r#"{"within": ["within_edges_per_block"]}"#);
    let e = write(dir.path(), "e.tsv", "source\ttarget\n1\t2\n1\t3\n2\t3\n4\t5\n");
    let out = locdep(&["fit", "--blocks", &b, "--model", &m, "--edges", &e, "--n-mcmc", "200"]);
    assert_eq!(out.status.code(), Some(3));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["status"], "Nonexistence");
}

#[test]
fn exact_over_cap_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let b = write(dir.path(), "b.tsv", &blocks(&[7]));
    let m = write(dir.path(), "m.json", r#"{"within": ["within_edges"], "theta": {"within": [0.0]}}"#);
    let out = locdep(&["exact", "--blocks", &b, "--model", &m]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("21"));
}

#[test]
fn exact_moments_of_free_block() {
    let dir = tempfile::tempdir().unwrap();
    let b = write(dir.path(), "b.tsv", &blocks(&[3]));
    let m = write(dir.path(), "m.json", r#"{"within": ["within_edges"], "theta": {"within": [0.0]}}"#);
    let out = locdep(&["exact", "--blocks", &b, "--model", &m]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["log_normalizer"].as_f64().unwrap() - 3.0 * 2f64.ln()).abs() < 1e-12);
    assert_eq!(v["mean"][0], 1.5);
}

#[test]
fn exact_mle_of_observed_graph() {
    let dir = tempfile::tempdir().unwrap();
    let b = write(dir.path(), "b.tsv", &blocks(&[4, 4]));
    let m = write(dir.path(), "m.json", r#"{"within": ["within_edges"]}"#);
    let e = write(dir.path(), "e.tsv", "source\ttarget\n1\t2\n5\t6\n6\t7\n");
    let out = locdep(&["exact", "--blocks", &b, "--model", &m, "--edges", &e]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let t = v["theta_hat"]["within"][0].as_f64().unwrap();
    assert!((t - (3.0f64 / 9.0).ln()).abs() < 1e-8);
}

#[test]
fn diagnose_reports_quantities() {
    let dir = tempfile::tempdir().unwrap();
    let b = write(dir.path(), "b.tsv", &blocks(&[4, 4, 4]));
    let m = write(
        dir.path(),
        "m.json",
        r#"{"within": ["within_edges", "transitive_edges"], "between": ["between_edges"],
            "theta": {"within": [-1.0, 0.5], "between": [-2.0]}}"#,
    );
    let out = locdep(&["diagnose", "--blocks", &b, "--model", &m]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["quantities"]["a_avg"], 4.0);
    assert_eq!(v["quantities"]["n"], 12);
    assert!(v["bounds"]["within"].as_f64().unwrap() > 0.0);
}

#[test]
fn qq_subcommand_emits_two_columns() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "c.csv", "id,z\n1,0.5\n2,-0.5\n3,0\n");
    let out = locdep(&["qq", "--input", &input]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "theoretical,sample");
    assert_eq!(lines[2], "0,0");
    assert_eq!(lines.len(), 4);
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(locdep(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(locdep(&["fit", "--blocks", "x"]).status.code(), Some(1));
    assert_eq!(locdep(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_model_names_the_term() {
    let dir = tempfile::tempdir().unwrap();
    let b = write(dir.path(), "b.tsv", &blocks(&[4]));
    let m = write(dir.path(), "m.json", r#"{"within": ["stars"], "theta": {"within": [0.0]}}"#);
    let out = locdep(&["exact", "--blocks", &b, "--model", &m]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("within[0]") && err.contains("stars"), "{err}");
}

#[test]
fn study_rerun_from_manifest_matches() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.json",
        r#"{"case": "Case1", "n_values": [50], "replications": 3, "n_mcmc": 300, "seed": 4}"#,
    );
    let a = dir.path().join("a").to_string_lossy().into_owned();
    let b = dir.path().join("b").to_string_lossy().into_owned();
    assert!(locdep(&["study1", "--config", &cfg, "--out", &a]).status.success());
    let manifest = format!("{a}/manifest.json");
    assert!(locdep(&["study1", "--config", &manifest, "--out", &b]).status.success());
    for f in ["errors.csv", "summary.json", "config.json"] {
        assert_eq!(std::fs::read(Path::new(&a).join(f)).unwrap(), std::fs::read(Path::new(&b).join(f)).unwrap(), "{f}");
    }
    let errors = std::fs::read_to_string(Path::new(&a).join("errors.csv")).unwrap();
    assert!(errors.starts_with("case,n,p,replication,status,l2_error\nCase1,50,4,0,"));
}
