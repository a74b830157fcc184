use continua_core::cover::{Cover, FiniteSpace};
use continua_core::graph::{Graph, MetricBall, Point};
use continua_core::plmap::PLMap;
use continua_core::rational::q;
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::Command;

fn continua(args: &[&str]) -> (i32, Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_continua")).args(args).output().expect("binary runs");
    let stdout = String::from_utf8(out.stdout).unwrap();
    let json = serde_json::from_str(&stdout).unwrap_or(Value::Null);
    (out.status.code().unwrap(), json)
}

fn write(dir: &Path, name: &str, v: &impl serde::Serialize) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string(v).unwrap()).unwrap();
    p
}

#[test]
fn classify_chain() {
    let dir = tempfile::tempdir().unwrap();
    let space = serde_json::json!({ "graph": Graph::path(2), "per_edge": 2 });
    let cover = serde_json::json!({ "members": [
        { "name": "a", "points": [0, 1, 3] },
        { "name": "b", "points": [1, 2, 4] }
    ] });
    let s = write(dir.path(), "s.json", &space);
    let c = write(dir.path(), "c.json", &cover);
    let before = std::fs::read(&c).unwrap();
    let (code, out) = continua(&["classify", "--space", s.to_str().unwrap(), "--cover", c.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(out["class"], "ChainLike");
    assert_eq!(out["witness"], serde_json::json!([0, 1]));
    assert_eq!(out["order"], 2);
    assert_eq!(std::fs::read(&c).unwrap(), before);
    let cover_back: Cover = serde_json::from_value(cover).unwrap();
    assert_eq!(cover_back.len(), 2);
}

#[test]
fn color_rejects_c5() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "c5.json", &Graph::cycle(5));
    let (code, out) = continua(&["color", "--graph", g.to_str().unwrap(), "--oracle"]);
    assert_eq!(code, 2);
    assert_eq!(out["precondition"]["kind"], "short_cycle");
    assert!(out["error"].as_str().unwrap().contains("C5"));
    assert_eq!(out["oracle"]["feasible"], false);
    let (_, five) = continua(&["color", "--graph", g.to_str().unwrap(), "--oracle", "--colors", "5"]);
    assert_eq!(five["oracle"]["feasible"], true);
}

#[test]
fn color_c12() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "c12.json", &Graph::cycle(12));
    let (code, out) = continua(&["color", "--graph", g.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(out["check"]["valid"], true);
}

#[test]
fn reduce_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "k5.json", &Graph::complete(5));
    let (code, out) = continua(&["reduce", "--graph", g.to_str().unwrap()]);
    assert_eq!(code, 0);
    let graph: Graph = serde_json::from_value(out["graph"].clone()).unwrap();
    assert!(graph.max_degree() <= 3);
    let collapse: PLMap = serde_json::from_value(out["collapse"].clone()).unwrap();
    assert_eq!(collapse.domain(), &graph);
    assert_eq!(collapse.codomain(), &Graph::complete(5));
    // the emitted graph is itself valid input
    let again = write(dir.path(), "out.json", &graph);
    assert_eq!(continua(&["reduce", "--graph", again.to_str().unwrap()]).0, 0);
}

#[test]
fn hat_run_on_a_double_cover() {
    let dir = tempfile::tempdir().unwrap();
    let c12 = Graph::cycle(12);
    let space = FiniteSpace::sampled(&c12, 8);
    let u = Cover::from_sets(c12.vertices().map(|v| space.ball(&MetricBall::open(Point::Vertex(v), q(3, 2)))));
    let f = write(dir.path(), "f.json", &PLMap::identity(&c12));
    let g = write(dir.path(), "g.json", &PLMap::cyclic_cover(6, 2));
    let c = write(dir.path(), "u.json", &u);
    let y = write(dir.path(), "y.json", &Graph::cycle(6));
    let args = ["hat-run", "--f", f.to_str().unwrap(), "--g", g.to_str().unwrap(), "--cover", c.to_str().unwrap(), "--y", y.to_str().unwrap(), "--x-per-edge", "8"];
    let (code, out) = continua(&args);
    assert_eq!(code, 0, "{out}");
    assert_eq!(out["ok"], true);
    assert_eq!(out["projection"]["min_sheets"], 2);
    // a Y that does not match g is an input error
    let wrong = write(dir.path(), "y2.json", &Graph::cycle(7));
    let mut bad = args.to_vec();
    bad[8] = wrong.to_str().unwrap();
    assert_eq!(continua(&bad).0, 1);
}

#[test]
fn analyze_small_solenoid() {
    let (code, out) = continua(&["analyze", "--model", "solenoid", "--stage", "1", "--p", "2", "--members", "3", "--target", "circle"]);
    assert_eq!(code, 0, "{out}");
    assert_eq!(out["all_pass"], true);
    assert_eq!(out["manifest"]["verdicts"][0]["operation"], "empirical_k_likeness");
}

#[test]
fn analyze_figure_eight_fails_for_chains() {
    let (code, out) = continua(&["analyze", "--model", "figure-eight", "--edges", "3", "--members", "4", "--target", "chain", "--max-covers", "200"]);
    assert_eq!(code, 2);
    assert_eq!(out["all_pass"], false);
}

#[test]
fn input_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.json");
    std::fs::write(&junk, "{ not json").unwrap();
    let (code, out) = continua(&["color", "--graph", junk.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(out["hint"].as_str().unwrap().contains("vertices"));
    let loops = write(dir.path(), "loop.json", &serde_json::json!({ "vertices": [0], "edges": [[0, 0]] }));
    assert_eq!(continua(&["reduce", "--graph", loops.to_str().unwrap()]).0, 1);
    assert_eq!(Command::new(env!("CARGO_BIN_EXE_continua")).arg("frobnicate").status().unwrap().code(), Some(1));
}

#[test]
fn schema_lists_every_format() {
    let (code, out) = continua(&["--json-schema"]);
    assert_eq!(code, 0);
    for key in ["graph", "point", "space", "cover", "pl_map", "ball_list"] {
        assert!(out["inputs"].get(key).is_some(), "{key}");
    }
}
