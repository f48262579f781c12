use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use desc_sync::io::format_pose_graph;
use desc_sync::rotation::Rotation;
use desc_sync::ViewGraph;

fn desc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_desc")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generated_files_round_trip_through_run() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst");
    let out = desc(&["generate", "--ucm", "n=30,p=0.6,q=0.2,sigma=0", "--seed", "4", "--out", path(&inst)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(inst.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["n"], 30);

    let res = dir.path().join("res");
    let out = desc(&[
        "run",
        "--input",
        path(&inst.join("graph.txt")),
        "--truth",
        path(&inst.join("truth.txt")),
        "--per-node-csv",
        "--out",
        path(&res),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(res.join("report.json")).unwrap()).unwrap();
    assert!(report["desc"]["mean_rotation_err_deg"].as_f64().unwrap() < 1e-4);
    for f in ["s_hat.csv", "rotations.txt", "init_rotations.txt", "pgd_trace.csv", "refine_trace.csv", "node_errors.csv", "manifest.json"] {
        assert!(res.join(f).exists(), "{f}");
    }
    let trace = fs::read_to_string(res.join("pgd_trace.csv")).unwrap();
    assert!(trace.starts_with("iter,objective,mean_abs_err,median_abs_err\n"));
    assert_eq!(trace.lines().count(), 102);
    let refine = fs::read_to_string(res.join("refine_trace.csv")).unwrap();
    assert!(refine.starts_with("iter,max_step_norm,mean_residual,truncated_count\n"));

    let out = desc(&["eval", "--estimate", path(&res.join("rotations.txt")), "--truth", path(&inst.join("truth.txt"))]);
    assert!(out.status.success());
    let eval: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(eval["mean_rotation_err_deg"].as_f64().unwrap() < 1e-4);
}

fn pendant_graph(dir: &Path) -> std::path::PathBuf {
    // K4 plus a node hanging off node 3: edge (3, 4) lies on no triangle.
    let mut edges: Vec<(usize, usize, Rotation)> = Vec::new();
    for i in 0..4 {
        for j in i + 1..4 {
            edges.push((i, j, Rotation::identity()));
        }
    }
    edges.push((3, 4, Rotation::about_z(0.3)));
    let g = ViewGraph::new(5, edges).unwrap();
    let file = dir.join("pendant.txt");
    fs::write(&file, format_pose_graph(&g)).unwrap();
    file
}

#[test]
fn uncovered_edges_fail_with_code_four() {
    let dir = tempfile::tempdir().unwrap();
    let file = pendant_graph(dir.path());
    let out = desc(&["run", "--input", path(&file), "--out", path(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(4));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "uncovered_edges");
    assert!(err["message"].as_str().unwrap().contains("(3, 4)"));
}

#[test]
fn pruning_that_isolates_a_node_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = pendant_graph(dir.path());
    let out = desc(&["run", "--input", path(&file), "--prune-uncovered", "--out", path(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn pruning_drops_a_chord_without_triangles() {
    // Two K4s joined through the triangle 3-4-5, plus the chord (0, 7) whose
    // endpoints share no neighbor.
    let mut pairs = Vec::new();
    for block in [[0, 1, 2, 3], [4, 5, 6, 7]] {
        for a in 0..4 {
            for b in a + 1..4 {
                pairs.push((block[a], block[b]));
            }
        }
    }
    pairs.extend([(3, 4), (3, 5), (0, 7)]);
    let g = ViewGraph::new(8, pairs.iter().map(|&(i, j)| (i, j, Rotation::identity()))).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("chord.txt");
    fs::write(&file, format_pose_graph(&g)).unwrap();
    let res = dir.path().join("o");
    let out = desc(&["run", "--input", path(&file), "--prune-uncovered", "--out", path(&res)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(res.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["pruned_edges"], 1);
    assert_eq!(report["num_edges"], pairs.len() - 1);
    let csv = fs::read_to_string(res.join("s_hat.csv")).unwrap();
    assert!(csv.starts_with("edge_i,edge_j,s_hat\n"));
    assert!(!csv.contains("\n0,7,"));
}

#[test]
fn malformed_input_fails_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.txt");
    fs::write(&file, "EDGE 0 1 1 0 0\n").unwrap();
    let out = desc(&["run", "--input", path(&file), "--out", path(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "input");
    assert!(err["message"].as_str().unwrap().contains("line 1"));
}

#[test]
fn sweep_and_plot_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = desc(&[
        "sweep", "--q", "0,0.2", "--sigma", "0", "--seeds", "2", "--n", "25", "--p", "0.7", "--methods",
        "desc,uniform-gcw", "--out", path(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 2);
    let fig = fs::read_to_string(dir.path().join("fig_rotation_mean_sigma_0.csv")).unwrap();
    assert!(fig.starts_with("q,method,value,log10_value\n"));
    assert_eq!(fig.lines().count(), 1 + 2 * 2);

    // drop one row: plotting must name the incomplete cell
    let truncated: Vec<&str> = csv.lines().take(csv.lines().count() - 1).collect();
    fs::write(dir.path().join("sweep.csv"), truncated.join("\n") + "\n").unwrap();
    let out = desc(&["plot", "--sweep", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["message"].as_str().unwrap().contains("q=0.2,sigma=0,seed=1"));
}
