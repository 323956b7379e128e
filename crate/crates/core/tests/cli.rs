use std::path::Path;
use std::process::{Command, Output};

use csad::evaluation::{edge_set, EdgeSet};
use csad::io::{read_matrix_csv, read_sym_matrix, write_dataset, write_sym_matrix};
use csad::simulator::{gen_sparse_pd, make_scenario, sample_mvn};
use serde_json::Value;

fn csad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csad")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn simulate(dir: &Path, p: usize, n: usize, seed: u64) {
    let out = csad(&[
        "simulate", "--p", &p.to_string(), "--n", &n.to_string(), "--seed", &seed.to_string(),
        "--bg-density", "0.2", "--delta-density", "0.1", "--out-dir", s(dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_rejects_empty_sample_without_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("sim");
    let out = csad(&["simulate", "--p", "10", "--n", "0", "--out-dir", s(&dir)]);
    assert_eq!(code(&out), 2);
    assert!(!dir.exists());
}

#[test]
fn scenario_metadata_matches_change_matrix() {
    let tmp = tempfile::tempdir().unwrap();
    simulate(tmp.path(), 10, 50, 3);
    let meta = json(&tmp.path().join("scenario.json"));
    let listed: EdgeSet = serde_json::from_value(meta["true_change_edges"].clone()).unwrap();
    let p_delta = read_sym_matrix(&tmp.path().join("p_delta.csv")).unwrap();
    assert_eq!(listed, edge_set(&p_delta, 0.0));
    assert_eq!(meta["p"], 10);
    assert_eq!(read_matrix_csv(&tmp.path().join("foreground.csv")).unwrap().shape(), (50, 10));
}

#[test]
fn estimate_defaults_to_plain_graphical_lasso() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("x.csv");
    write_dataset(&data, &sample_mvn(&gen_sparse_pd(6, 0.3, 1, 0.5).unwrap(), 500, 2).unwrap()).unwrap();
    let out_dir = tmp.path().join("est");
    let out = csad(&["estimate", "--data", s(&data), "--lambda", "0.05", "--out-dir", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let report = json(&out_dir.join("report.json"));
    assert_eq!(report["admm"]["eps_abs"], 1e-4);
    assert_eq!(report["admm"]["eps_rel"], 1e-2);
    assert_eq!(report["admm"]["rho"], 1.0);
    assert_eq!(report["converged"], true);
    let z = read_sym_matrix(&out_dir.join("z.csv")).unwrap();
    assert_eq!(report["z_nonzero_offdiag_pairs"], edge_set(&z, 0.0).len());

    let trace = std::fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), report["iterations"].as_u64().unwrap() as usize + 1);
}

#[test]
fn estimate_non_convergence_exits_3_with_report() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("x.csv");
    write_dataset(&data, &sample_mvn(&gen_sparse_pd(6, 0.3, 1, 0.5).unwrap(), 500, 2).unwrap()).unwrap();
    let out_dir = tmp.path().join("est");
    let out = csad(&["estimate", "--data", s(&data), "--max-iters", "1", "--out-dir", s(&out_dir)]);
    assert_eq!(code(&out), 3);
    assert_eq!(json(&out_dir.join("report.json"))["converged"], false);
}

#[test]
fn estimate_rejects_bad_input() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.csv");
    std::fs::write(&bad, "1,2\n3,oops\n").unwrap();
    let out_dir = tmp.path().join("est");
    assert_eq!(code(&csad(&["estimate", "--data", s(&bad), "--out-dir", s(&out_dir)])), 2);
    assert!(!out_dir.exists());

    let data = tmp.path().join("x.csv");
    write_dataset(&data, &sample_mvn(&gen_sparse_pd(4, 0.3, 1, 0.5).unwrap(), 100, 2).unwrap()).unwrap();
    let wrong = tmp.path().join("tb.csv");
    write_sym_matrix(&wrong, &gen_sparse_pd(3, 0.3, 1, 0.5).unwrap()).unwrap();
    let out = csad(&["estimate", "--data", s(&data), "--background", s(&wrong), "--out-dir", s(&out_dir)]);
    assert_eq!(code(&out), 2);
    let out = csad(&["estimate", "--data", s(&data), "--lambda", "-1", "--out-dir", s(&out_dir)]);
    assert_eq!(code(&out), 2);
    assert!(!out_dir.exists());
}

#[test]
fn sweep_writes_two_rows_per_lambda() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    simulate(&sim, 10, 2000, 5);
    let out_dir = tmp.path().join("sweep");
    let out = csad(&[
        "sweep", "--scenario-dir", s(&sim), "--lambda-min", "0.005", "--lambda-max", "0.5",
        "--lambda-count", "10", "--workers", "2", "--out-dir", s(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 21);
    assert_eq!(lines[0], csad::io::SWEEP_HEADER);
    assert!(lines[1].contains(",CSAD,") && lines[2].contains(",BSAD,"));
    assert!(out_dir.join("theta_b.csv").exists());
}

#[test]
fn monitor_with_prebuilt_background() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = make_scenario(8, 0.2, 0.1, 9).unwrap();
    let tb = tmp.path().join("tb.csv");
    write_sym_matrix(&tb, &sc.p_b).unwrap();
    let stream = tmp.path().join("stream.csv");
    write_dataset(&stream, &sc.sample_foreground(1050).unwrap()).unwrap();
    let out_dir = tmp.path().join("mon");
    let out = csad(&[
        "monitor", "--stream", s(&stream), "--background", s(&tb), "--window-size", "200",
        "--lambda", "0.05", "--out-dir", s(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!out_dir.join("theta_b.csv").exists());

    let lines: Vec<Value> = std::fs::read_to_string(out_dir.join("windows.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 5);
    for (k, w) in lines.iter().enumerate() {
        assert_eq!(w["window_index"], k);
        assert_eq!(w["start_row"], 200 * k);
        assert_eq!(w["end_row"], 200 * k + 200);
    }
}

#[test]
fn monitor_requires_a_background_source() {
    let tmp = tempfile::tempdir().unwrap();
    let stream = tmp.path().join("stream.csv");
    write_dataset(&stream, &sample_mvn(&gen_sparse_pd(4, 0.3, 1, 0.5).unwrap(), 100, 2).unwrap()).unwrap();
    let out_dir = tmp.path().join("mon");
    let out = csad(&["monitor", "--stream", s(&stream), "--window-size", "50", "--out-dir", s(&out_dir)]);
    assert_eq!(code(&out), 2);
    let out = csad(&[
        "monitor", "--stream", s(&stream), "--background-data", s(&stream), "--window-size", "500",
        "--out-dir", s(&out_dir),
    ]);
    assert_eq!(code(&out), 2, "window longer than stream");
    assert!(!out_dir.exists());
}
