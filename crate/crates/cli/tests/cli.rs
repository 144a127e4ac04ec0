use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gpsanno"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn gpsanno")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty(), "stdout must stay empty");
    out
}

fn repo_configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn noiseless_spec(seed: u64) -> Value {
    json!({
        "seed": seed,
        "duration_s": 15.0,
        "objects": [
            {
                "width_m": 0.6, "height_m": 1.7, "target": true,
                "path": {"waypoints": [{"x": -6.0, "y": 12.0}, {"x": 4.0, "y": 18.0}, {"x": -2.0, "y": 26.0}], "speed_mps": 1.3}
            },
            {
                "width_m": 0.6, "height_m": 1.7,
                "path": {"waypoints": [{"x": 8.0, "y": 30.0}, {"x": -12.0, "y": 24.0}], "speed_mps": 1.1}
            }
        ],
        "gps_noise": {"gaussian_sigma_m": 0.0},
        "flow_noise": {"jitter_px": 0.0, "dropout_rate": 0.0}
    })
}

fn write_json(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p.to_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn line_count(p: &Path) -> usize {
    fs::read_to_string(p).unwrap().lines().count()
}

#[test]
fn simulate_is_deterministic_and_complete() {
    let t = TempDir::new().unwrap();
    let spec = write_json(t.path(), "spec.json", &noiseless_spec(4));
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    ok(&["simulate", "--config", &spec, "--out", s(&a)]);
    ok(&["simulate", "--config", &spec, "--out", s(&b)]);
    let fa = files(&a);
    assert_eq!(fa.len(), 5);
    assert_eq!(fa, files(&b));
    // 15 s at the default 10 fps.
    assert_eq!(line_count(&a.join("clip.jsonl")), 150);
    assert_eq!(line_count(&a.join("ground_truth.jsonl")), 150);
    let c = t.path().join("c");
    ok(&["simulate", "--config", &spec, "--seed", "5", "--out", s(&c)]);
    assert_ne!(fs::read(a.join("clip.jsonl")).unwrap(), fs::read(c.join("clip.jsonl")).unwrap());
}

#[test]
fn malformed_config_exits_2_with_field_path() {
    let t = TempDir::new().unwrap();
    let mut spec = noiseless_spec(1);
    spec["objects"][1]["path"]["speed_mps"] = json!("fast");
    let bad = write_json(t.path(), "bad.json", &spec);
    let out = run(&["simulate", "--config", &bad, "--out", s(&t.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("objects[1].path.speed_mps"), "{err}");
    assert!(out.stdout.is_empty());

    fs::write(t.path().join("trunc.json"), "{\"seed\": 1, \"objects\": [").unwrap();
    let out = run(&["annotate", "--scenario", s(&t.path().join("trunc.json")), "--out", s(&t.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));

    let mut two_targets = noiseless_spec(1);
    two_targets["objects"][1]["target"] = json!(true);
    let inv = write_json(t.path(), "inv.json", &two_targets);
    let out = run(&["simulate", "--config", &inv, "--out", s(&t.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("target"));
}

#[test]
fn missing_calibration_exits_2_and_names_file() {
    let t = TempDir::new().unwrap();
    let spec = write_json(t.path(), "spec.json", &noiseless_spec(2));
    let clip = t.path().join("clip");
    ok(&["simulate", "--config", &spec, "--out", s(&clip)]);
    fs::remove_file(clip.join("calibration.txt")).unwrap();
    let out = run(&["annotate", "--clip", s(&clip), "--out", s(&t.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("calibration.txt"));
}

#[test]
fn ingest_matches_simulated_input() {
    let t = TempDir::new().unwrap();
    let spec = write_json(t.path(), "spec.json", &noiseless_spec(3));
    let clip = t.path().join("clip");
    ok(&["simulate", "--config", &spec, "--out", s(&clip)]);
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    ok(&["annotate", "--clip", s(&clip), "--out", s(&a)]);
    ok(&["annotate", "--scenario", &spec, "--out", s(&b)]);
    assert_eq!(files(&a), files(&b));
}

#[test]
fn keep_top_keeps_half_rounded_up() {
    let t = TempDir::new().unwrap();
    let spec = write_json(t.path(), "spec.json", &noiseless_spec(6));
    let spec2 = write_json(t.path(), "spec2.json", &{
        let mut v = noiseless_spec(7);
        v["duration_s"] = json!(12.3);
        v
    });
    let (all, half) = (t.path().join("all"), t.path().join("half"));
    for policy in ["inter", "intra"] {
        ok(&["annotate", "--scenario", &spec, "--scenario", &spec2, "--policy", policy, "--out", s(&all)]);
        ok(&["annotate", "--scenario", &spec, "--scenario", &spec2, "--policy", policy, "--keep-top", "50", "--out", s(&half)]);
        let n = line_count(&all.join("annotations.jsonl"));
        assert!(n > 0);
        let kept = line_count(&half.join("annotations.jsonl"));
        match policy {
            "inter" => assert_eq!(kept, n.div_ceil(2)),
            _ => assert!(kept >= n / 2 && kept <= n / 2 + 2),
        }
    }
}

#[test]
fn noiseless_clip_is_annotated_precisely() {
    let t = TempDir::new().unwrap();
    let spec = write_json(t.path(), "spec.json", &noiseless_spec(8));
    let out = t.path().join("o");
    ok(&["annotate", "--scenario", &spec, "--version", "v3", "--out", s(&out)]);
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let p = report["mean_precision"].as_f64().unwrap();
    assert!(p >= 0.9, "precision {p}");
}

#[test]
fn shipped_pipeline_config_runs_with_stage_dumps() {
    let t = TempDir::new().unwrap();
    let out = t.path().join("o");
    ok(&["annotate", "--config", s(&repo_configs().join("annotate.json")), "--dump-stages", "--out", s(&out)]);
    for k in 0..2 {
        for kind in ["candidates", "match", "boxes"] {
            let p = out.join(format!("stages/clip{k:03}_{kind}.jsonl"));
            assert!(line_count(&p) > 0, "{}", p.display());
        }
    }
    let first: Value = serde_json::from_str(fs::read_to_string(out.join("stages/clip000_match.jsonl")).unwrap().lines().next().unwrap()).unwrap();
    assert!(first["cof"].is_u64() || first["cof"] == "out");
}

fn small_benchmark(dir: &Path) -> String {
    write_json(
        dir,
        "bench.json",
        &json!({
            "seed": 5,
            "suite": {"n_clips": 6, "duration_s": 15.0},
            "search_budget": 6,
            "refiner_training": {"epochs": 30},
            "ranker_training": {"epochs": 30}
        }),
    )
}

#[test]
fn benchmark_and_training_are_deterministic() {
    let t = TempDir::new().unwrap();
    let cfg = small_benchmark(t.path());
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    ok(&["benchmark", "--config", &cfg, "--out", s(&a)]);
    ok(&["--jobs", "1", "benchmark", "--config", &cfg, "--out", s(&b)]);
    let strip = |v: Vec<(PathBuf, Vec<u8>)>| v.into_iter().filter(|(p, _)| p != Path::new("timing.json")).collect::<Vec<_>>();
    let fa = strip(files(&a));
    assert!(fa.iter().any(|(p, _)| p == Path::new("purification.svg")));
    assert_eq!(fa, strip(files(&b)));

    for cmd in ["search-params", "train-refiner", "train-ranker"] {
        let (x, y) = (t.path().join(format!("{cmd}-x")), t.path().join(format!("{cmd}-y")));
        ok(&[cmd, "--config", &cfg, "--out", s(&x)]);
        ok(&["--jobs", "1", cmd, "--config", &cfg, "--out", s(&y)]);
        assert_eq!(files(&x), files(&y), "{cmd}");
    }
}

#[test]
fn benchmark_precision_is_recomputable_from_exports() {
    let t = TempDir::new().unwrap();
    let cfg = small_benchmark(t.path());
    let out = t.path().join("o");
    ok(&["benchmark", "--config", &cfg, "--out", s(&out)]);
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let all = report["purification"]["inter"].as_array().unwrap().iter().find(|r| r["fraction"] == 1.0).unwrap().clone();

    let anns = gpsanno::io::read_annotations(&out.join("annotations.jsonl")).unwrap();
    let gt = gpsanno::io::read_ground_truth(&out.join("ground_truth.jsonl")).unwrap();
    let correct = anns
        .iter()
        .filter(|a| gt[a.clip][a.frame].is_some_and(|g| gpsanno::geometry::iou(&a.bbox, &g) > 0.5))
        .count();
    assert_eq!(all["kept"].as_u64().unwrap() as usize, anns.len());
    assert_eq!(all["precision_at_iou_05"].as_f64().unwrap(), correct as f64 / anns.len() as f64);
}
