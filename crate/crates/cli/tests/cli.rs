use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run(args: &[&str], file: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_otduals")).args(args).arg(data(file)).output().expect("binary runs")
}

fn parse(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn strings(v: &Value) -> Vec<String> {
    v.as_array().unwrap().iter().map(|s| s.as_str().unwrap().to_string()).collect()
}

#[test]
fn duals_reports_three_components_and_intervals() {
    let out = run(&["duals"], "three_components.json");
    assert!(out.status.success());
    let v = parse(&out);
    assert_eq!(v["unique"], false);
    assert_eq!(v["num_components"], 3);
    let intervals: Vec<(u64, u64, String, String)> = v["constraints"]
        .as_array()
        .unwrap()
        .iter()
        .map(|k| {
            (
                k["n"].as_u64().unwrap(),
                k["m"].as_u64().unwrap(),
                k["lower"].as_str().unwrap().to_string(),
                k["upper"].as_str().unwrap().to_string(),
            )
        })
        .collect();
    let expected = [(1, 2, "0", "2"), (1, 3, "0", "1"), (2, 3, "-1", "-1")];
    assert_eq!(intervals, expected.map(|(n, m, l, u)| (n, m, l.to_string(), u.to_string())));
    let comps = v["union_graph"]["components"].as_array().unwrap();
    assert_eq!(strings(&comps[0]["xs"]), ["1", "2"]);
}

#[test]
fn centroid_of_shifted_example() {
    let out = run(&["centroid"], "three_components_shifted.json");
    assert!(out.status.success());
    let v = parse(&out);
    assert_eq!(strings(&v["alpha"]), ["0", "-1", "-1/2"]);
    assert_eq!(v["tree"]["edges"], serde_json::json!([[1, 3], [1, 2]]));
    assert_eq!(strings(&v["tree"]["levels"]), ["1/2", "1"]);
    assert_eq!(strings(&v["dual"]["phi"]), ["0", "-1", "-1", "-1/2"]);
    assert_eq!(strings(&v["dual"]["psi"]), ["1", "2", "1", "3/2", "3/2"]);
}

#[test]
fn anchor_moves_the_zero() {
    let out = run(&["centroid", "--anchor", "4"], "three_components_shifted.json");
    assert!(out.status.success());
    let v = parse(&out);
    assert_eq!(strings(&v["dual"]["phi"])[3], "0");
    assert_eq!(run(&["centroid", "--anchor", "5"], "three_components_shifted.json").status.code(), Some(1));
}

#[test]
fn unnormalized_measure_is_an_instance_error() {
    let out = run(&["solve"], "mu_not_normalized.json");
    assert_eq!(out.status.code(), Some(2));
    let v = parse(&out);
    assert_eq!(v["error"], "instance");
    assert_eq!(v["check"], "measure");
}

#[test]
fn unknown_field_is_a_schema_error() {
    let out = run(&["solve"], "unknown_field.json");
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(parse(&out)["error"], "schema");
    assert_eq!(run(&["solve"], "no_such_file.json").status.code(), Some(1));
    assert_eq!(run(&["sinkhorn", "--epsilon", "-1"], "three_components.json").status.code(), Some(1));
}

#[test]
fn output_is_deterministic() {
    for cmd in ["solve", "duals", "centroid", "sinkhorn", "validate"] {
        let a = run(&[cmd], "three_components.json");
        let b = run(&[cmd], "three_components.json");
        assert!(a.status.success(), "{cmd}");
        assert_eq!(a.stdout, b.stdout, "{cmd}");
    }
}

#[test]
fn output_file_round_trips() {
    let path = std::env::temp_dir().join(format!("otduals-cli-{}.json", std::process::id()));
    let out = Command::new(env!("CARGO_BIN_EXE_otduals"))
        .args(["solve", "--output"])
        .arg(&path)
        .arg(data("three_components.json"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v, parse(&run(&["solve"], "three_components.json")));
    assert_eq!(v["cost"], "3/4");
}

#[test]
fn sinkhorn_respects_epsilon() {
    let out = run(&["sinkhorn", "--epsilon", "0.05"], "three_components.json");
    let v = parse(&out);
    assert_eq!(v["epsilon"], 0.05);
    assert_eq!(v["converged"], true);
    let total: f64 = v["plan"].as_array().unwrap().iter().flat_map(|r| r.as_array().unwrap()).map(|x| x.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn cne_on_congestion_game() {
    let out = run(&["cne"], "congestion_game.json");
    assert!(out.status.success());
    let v = parse(&out);
    assert_eq!(v["kind"], "cne");
    let nu: Vec<f64> = v["nu"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    let printed = [0.0030, 0.3115, 0.0030, 0.0030, 0.2423, 0.2082, 0.2261, 0.0030];
    assert!(nu.iter().zip(printed).all(|(a, b)| (a - b).abs() < 1e-3), "{nu:?}");
}

#[test]
fn scne_equalizes_the_actions() {
    let v = parse(&run(&["scne"], "congestion_game.json"));
    assert_eq!(v["kind"], "scne");
    assert!(v["nu"].as_array().unwrap().iter().all(|x| (x.as_f64().unwrap() - 0.125).abs() < 1e-6));
    assert_eq!(v["experimental"], false);
}

#[test]
fn validate_passes_on_examples() {
    for file in ["three_components.json", "three_components_shifted.json"] {
        let out = run(&["validate"], file);
        assert!(out.status.success(), "{file}");
        let v = parse(&out);
        assert_eq!(v["passed"], true);
        assert!(v["checks"].as_array().unwrap().len() >= 5);
    }
}
