mod common;

use serde_json::Value;

use common::*;
use transtte::trips::{filter_trips, load_trips};
use transtte::RoadNetwork;
use transtte_service::cli::{run, CONFIG_ENV};

fn transtte(args: &[&str]) -> (i32, String, String) {
    let argv: Vec<String> = std::iter::once("transtte")
        .chain(args.iter().copied())
        .map(String::from)
        .collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(&argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn json_lines(s: &str) -> Vec<Value> {
    s.lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn usage_errors_exit_2() {
    let (code, _, err) = transtte(&["frobnicate"]);
    assert_eq!(code, 2);
    assert!(err.contains("Usage"), "{err}");
    let (code, _, _) = transtte(&["route", "--config", "x.json"]);
    assert_eq!(code, 2);
    let (code, out, _) = transtte(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("ingest"));
}

#[test]
fn config_from_env_or_missing() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, _) = write_city(dir.path());
    std::env::remove_var(CONFIG_ENV);
    let (code, _, err) = transtte(&["ingest"]);
    assert_eq!(code, 2, "{err}");
    std::env::set_var(CONFIG_ENV, &cfg);
    let (code, out, _) = transtte(&["ingest"]);
    std::env::remove_var(CONFIG_ENV);
    assert_eq!(code, 0);
    assert_eq!(json_lines(&out)[0]["city"], "grid");
}

#[test]
fn ingest_reports_filter_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, _) = write_city(dir.path());
    let (code, out, err) = transtte(&["ingest", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let report = &json_lines(&out)[0];
    let city = dir.path().join("grid");
    let net = RoadNetwork::load(&city.join("nodes.csv"), &city.join("edges.csv")).unwrap();
    let trips = load_trips(&city.join("trips.csv"), &net).unwrap();
    let kept = filter_trips(&trips, &load_config(&cfg).filter).len();
    assert_eq!(report["trips_total"], 100);
    assert_eq!(report["trips_kept"], kept);
    assert_eq!(report["trips_dropped"], 100 - kept);
    assert_eq!(report["trips_dropped"], 40);
    assert_eq!(report["nodes"], 25);
    assert_eq!(report["pois"], 80);
}

#[test]
fn train_eval_route_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, _) = write_city(dir.path());
    let cfg = cfg.to_str().unwrap();

    let (code, _, err) = transtte(&["eval", "--config", cfg]);
    assert_eq!(code, 1, "eval without a model must fail: {err}");

    let (code, out, err) = transtte(&["train", "--config", cfg, "--city", "grid"]);
    assert_eq!(code, 0, "{err}");
    assert!(err.contains("epoch"));
    let trained = &json_lines(&out)[0];
    assert_eq!(trained["epochs"], 2);
    assert!(dir.path().join("grid/model.bin").exists());

    let (code, out, err) = transtte(&["eval", "--config", cfg]);
    assert_eq!(code, 0, "{err}");
    let eval = &json_lines(&out)[0];
    for split in ["train", "test"] {
        let mae = eval[split]["mae"].as_f64().unwrap();
        let rmse = eval[split]["rmse"].as_f64().unwrap();
        assert!(mae > 0.0 && mae <= rmse);
    }
    assert_eq!(eval["test"], trained["test"]);
    assert_eq!(eval["model_version"], trained["model_version"]);

    let (code, out, err) = transtte(&[
        "route",
        "--config",
        cfg,
        "--city",
        "grid",
        "--from",
        "1",
        "--to",
        "25",
        "--kind",
        "picturesque",
        "--depart",
        "1606800000",
    ]);
    assert_eq!(code, 0, "{err}");
    let resp: Value = serde_json::from_str(&out).unwrap();
    assert!(resp["eta"].as_f64().unwrap() > 0.0);
    assert_eq!(resp["kind"], "picturesque");
    assert_eq!(resp["model_version"], trained["model_version"]);

    let (code, _, err) = transtte(&[
        "route", "--config", cfg, "--city", "narnia", "--from", "1", "--to", "2",
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("narnia"));
}
