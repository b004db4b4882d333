use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn mgmoments(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mgmoments")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Parses a dense matrix CSV into its ids and rows.
fn matrix(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let ids: Vec<String> = lines.next().unwrap().split(',').skip(1).map(String::from).collect();
    let rows = lines.map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect()).collect();
    (ids, rows)
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const TWO_TRIANGLES: &str = "a b\nb c\na c\nx y\ny z\nx z\n";

#[test]
fn solve_beta_regular_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let degrees = write(dir.path(), "d.txt", &"4\n".repeat(10));
    let out = dir.path().join("out");
    let o = mgmoments(&["solve-beta", "--degrees", s(&degrees), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let text = fs::read_to_string(out.join("beta.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("node_id,degree,beta"));
    let mut rows = 0;
    for line in lines {
        let beta: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!((beta - 40.0 / 13.0).abs() < 1e-10, "{beta}");
        rows += 1;
    }
    assert_eq!(rows, 10);

    let meta = json(&out.join("solve-beta.json"));
    assert_eq!(meta["converged"], true);
    assert_eq!(meta["tool"], "mgmoments");
    assert!(meta["version"].is_string() && meta["core_version"].is_string());
    assert!(meta["iterations"].as_u64().unwrap() >= 1);
    assert_eq!(meta["classification"]["kind"], "well_behaved");
    assert!(out.join("trace.csv").exists());
}

#[test]
fn star_exits_three_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let degrees = write(dir.path(), "star.csv", "node_id,degree\nc,5\nl1,1\nl2,1\nl3,1\nl4,1\nl5,1\n");
    let out = dir.path().join("out");
    let o = mgmoments(&["solve-beta", "--degrees", s(&degrees), "--out", s(&out)]);
    assert_eq!(code(&o), 3);
    let meta = json(&out.join("solve-beta.json"));
    assert_eq!(meta["converged"], false);
    let beta = fs::read_to_string(out.join("beta.csv")).unwrap();
    assert!(beta.lines().nth(1).unwrap().starts_with("c,5,"));
}

#[test]
fn chung_lu_estimate_is_degree_product() {
    let dir = tempfile::tempdir().unwrap();
    let degrees = write(dir.path(), "d.txt", "3\n1\n2\n2\n");
    let out = dir.path().join("out");
    let o = mgmoments(&["estimate", "--model", "cl", "--degrees", s(&degrees), "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let (ids, m) = matrix(&out.join("omega.csv"));
    assert_eq!(ids, ["0", "1", "2", "3"]);
    let d = [3.0, 1.0, 2.0, 2.0];
    for i in 0..4 {
        for j in 0..4 {
            let want = if i == j { 0.0 } else { d[i] * d[j] / 8.0 };
            assert_eq!(m[i][j], want);
        }
    }
}

#[test]
fn uniform_estimate_rows_sum_to_degrees() {
    let dir = tempfile::tempdir().unwrap();
    let degrees = write(dir.path(), "d.txt", "3\n1\n2\n2\n4\n2\n");
    let out = dir.path().join("out");
    let o = mgmoments(&["estimate", "--model", "uniform-I", "--degrees", s(&degrees), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (_, m) = matrix(&out.join("omega.csv"));
    for (row, d) in m.iter().zip([3.0, 1.0, 2.0, 2.0, 4.0, 2.0]) {
        assert!((row.iter().sum::<f64>() - d).abs() < 1e-5);
    }
    for f in ["chi.csv", "sigma.csv", "eps.csv", "beta.csv", "estimate.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn missing_input_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no-such-degrees.txt");
    let o = mgmoments(&["solve-beta", "--degrees", s(&missing), "--out", s(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no-such-degrees.txt"));
}

#[test]
fn malformed_edge_list_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let edges = write(dir.path(), "e.txt", "a b 1\nb c oops\n");
    let o = mgmoments(&["ingest", "--edges", s(&edges), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("e.txt:2:"));
}

#[test]
fn usage_errors() {
    assert_eq!(code(&mgmoments(&[])), 1);
    assert_eq!(code(&mgmoments(&["estimate", "--model", "poisson", "--degrees", "x"])), 1);
    assert_eq!(code(&mgmoments(&["sample", "--model", "uniform"])), 1);
    assert_eq!(code(&mgmoments(&["--version"])), 0);
}

#[test]
fn ingest_threshold_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let edges = write(dir.path(), "e.txt", "# u v t\na b 1\nb c 2\nc a 3\nc d 4\nd a 5\nd a 6\n");
    let out = dir.path().join("out");
    let o = mgmoments(&["ingest", "--edges", s(&edges), "--fraction", "0.5", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let meta = json(&out.join("ingest.json"));
    assert_eq!(meta["records"], 6);
    assert_eq!(meta["kept_records"], 3);
    assert_eq!(meta["m"], 3);
    assert_eq!(meta["simple"], false);
    assert_eq!(fs::read_to_string(out.join("degrees.csv")).unwrap(), "node_id,degree\nc,1\nd,3\na,2\n");

    let again = dir.path().join("again");
    let o = mgmoments(&["ingest", "--edges", s(&out.join("graph.txt")), "--out", s(&again)]);
    assert_eq!(code(&o), 0);
    let mut a: Vec<String> = fs::read_to_string(out.join("degrees.csv")).unwrap().lines().map(String::from).collect();
    let mut b: Vec<String> = fs::read_to_string(again.join("degrees.csv")).unwrap().lines().map(String::from).collect();
    a.sort();
    b.sort();
    assert_eq!(a, b);
}

#[test]
fn sample_is_idempotent_and_threaded_runs_merge() {
    let dir = tempfile::tempdir().unwrap();
    let degrees = write(dir.path(), "d.txt", "2\n2\n2\n2\n");
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = mgmoments(&[
            "sample", "--degrees", s(&degrees), "--samples", "2000", "--dt", "20", "--threads", threads, "--out", s(&out),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let a = run("a", "2");
    let b = run("b", "2");
    let files = json(&a.join("sample.json"))["outputs"].as_array().unwrap().clone();
    for f in files.iter().map(|f| f.as_str().unwrap()) {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let meta = json(&a.join("sample.json"));
    assert_eq!(meta["seed"], meta["chain"]["seed"]);
    assert_eq!(meta["chain"]["samples"], 2000);
    assert_eq!(meta["chain"]["dt"], 20);
    assert_eq!(meta["chain"]["chains"].as_array().unwrap().len(), 2);
    let rate = meta["chain"]["acceptance_rate"].as_f64().unwrap();
    assert!(rate > 0.0 && rate <= 1.0);
    let (_, omega) = matrix(&a.join("omega.csv"));
    for row in &omega {
        assert!((row.iter().sum::<f64>() - 2.0).abs() < 1e-12);
    }
}

#[test]
fn sparse_json_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = mgmoments(&["enumerate", "--sequence", "2,2,2", "--format", "json", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let omega = json(&out.join("omega.json"));
    assert_eq!(omega["n"], 3);
    assert_eq!(omega["ids"], serde_json::json!(["0", "1", "2"]));
    let entries = omega["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 6);
    assert!(entries.iter().all(|e| e[2] == 1.0));
}

#[test]
fn enumerate_oracle_and_identity() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = mgmoments(&["enumerate", "--sequence", "2,2,2,2", "--model", "configuration", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let meta = json(&out.join("enumerate.json"));
    assert_eq!(meta["count"], 6);
    assert!(meta["identity_max_abs_residual"].as_f64().unwrap() < 1e-12);
    let weights: Vec<u64> = meta["graphs"].as_array().unwrap().iter().map(|g| g["config_weight"].as_u64().unwrap()).collect();
    assert_eq!(weights.iter().sum::<u64>(), 60);
    let (_, omega) = matrix(&out.join("omega.csv"));
    assert!((omega[0][1] - 2.0 / 3.0).abs() < 1e-15);

    let o = mgmoments(&["enumerate", "--sequence", "2,2,2,2,2,2", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let o = mgmoments(&["enumerate", "--sequence", "3,3,3,3,3,3", "--out", s(&out)]);
    assert_eq!(code(&o), 1, "m = 9 exceeds the default cap");
}

#[test]
fn msp_recovers_two_triangles_and_cross_evaluates() {
    let dir = tempfile::tempdir().unwrap();
    let edges = write(dir.path(), "t.txt", TWO_TRIANGLES);
    let out = dir.path().join("out");
    let o = mgmoments(&[
        "msp", "--edges", s(&edges), "--null", "cl", "--k", "2", "--restarts", "10", "--threads", "2",
        "--cross-null", "uniform-I", "--out", s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let meta = json(&out.join("msp.json"));
    assert!((meta["Q"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(meta["k_requested"], 2);
    assert_eq!(meta["k_used"], 2);
    assert_eq!(meta["null_source"], "cl");
    assert_eq!(meta["cross"]["null_source"], "uniform-I");
    assert!(meta["cross"]["Q"].as_f64().unwrap().is_finite());

    let labels = fs::read_to_string(out.join("partition.csv")).unwrap();
    let label: std::collections::HashMap<&str, &str> =
        labels.lines().skip(1).map(|l| l.split_once(',').unwrap()).collect();
    assert_eq!(label["a"], label["b"]);
    assert_eq!(label["b"], label["c"]);
    assert_eq!(label["x"], label["z"]);
    assert_ne!(label["a"], label["x"]);

    let o = mgmoments(&[
        "modularity", "--edges", s(&edges), "--partition", s(&out.join("partition.csv")), "--null", "cl", "--out",
        s(&dir.path().join("q")),
    ]);
    assert_eq!(code(&o), 0);
    let q = json(&dir.path().join("q").join("modularity.json"));
    assert_eq!(q["Q"].as_f64().unwrap(), meta["Q"].as_f64().unwrap());
}

#[test]
fn modularity_with_custom_null_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let edges = write(dir.path(), "t.txt", TWO_TRIANGLES);
    let part = write(dir.path(), "p.csv", "node_id,label\nx,1\ny,1\nz,1\na,0\nb,0\nc,0\n");
    // Chung-Lu null written by `estimate`, with ids in a different order.
    let degrees = write(dir.path(), "d.csv", "node_id,degree\nz,2\ny,2\nx,2\nc,2\nb,2\na,2\n");
    let est = dir.path().join("est");
    assert_eq!(code(&mgmoments(&["estimate", "--model", "cl", "--degrees", s(&degrees), "--out", s(&est)])), 0);
    let out = dir.path().join("out");
    let o = mgmoments(&[
        "modularity", "--edges", s(&edges), "--partition", s(&part), "--null-matrix", s(&est.join("omega.csv")),
        "--out", s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let meta = json(&out.join("modularity.json"));
    assert_eq!(meta["null_source"], "custom");
    assert!((meta["Q"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn compare_against_reference_file() {
    let dir = tempfile::tempdir().unwrap();
    let exact = dir.path().join("exact");
    assert_eq!(code(&mgmoments(&["enumerate", "--sequence", "3,3,2,2", "--out", s(&exact)])), 0);
    let degrees = write(dir.path(), "d.txt", "3\n3\n2\n2\n");
    let out = dir.path().join("out");
    let o = mgmoments(&[
        "compare", "--degrees", s(&degrees), "--reference", s(&exact.join("omega.csv")), "--out", s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let meta = json(&out.join("compare.json"));
    for key in ["cl", "uniform-I"] {
        let e = &meta[key];
        assert!(e["mean_abs_rel_error"].as_f64().unwrap().is_finite());
        assert!(e["excluded_pairs"].is_u64());
        assert!(out.join(e["per_entry_csv_path"].as_str().unwrap()).exists());
    }
}

#[test]
fn experiment_files_embed_name_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = mgmoments(&[
        "bootstrap-u", "--synthetic", "uniform", "--n", "30", "--trials", "6", "--threads", "3", "--seed", "17", "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let meta = json(&out.join("bootstrap-u_uniform_seed17.json"));
    assert_eq!(meta["summary"]["trials"], 6);
    assert!(meta["summary"]["max_change"].as_f64().unwrap() <= 1.0);
    assert_eq!(fs::read_to_string(out.join("bootstrap-u_uniform_seed17.csv")).unwrap().lines().count(), 7);

    let o = mgmoments(&["convergence", "--synthetic", "zipf", "--n", "50", "--seed", "3", "--out", s(&out)]);
    assert!(matches!(code(&o), 0 | 3));
    let meta = json(&out.join("convergence_zipf_seed3.json"));
    assert_eq!(meta["input"]["support_cap"], 1_000_000);
    assert!(out.join("convergence_zipf_seed3.csv").exists());

    let o = mgmoments(&["synthesize", "zipf", "--seed", "9", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let meta = json(&out.join("synthetic_zipf_seed9.json"));
    assert!(meta["sequence"]["truncation_mass"].as_f64().unwrap() > 0.0);
    let d = out.join("synthetic_zipf_seed9.csv");
    assert_eq!(fs::read_to_string(&d).unwrap().lines().count(), 201);
}
