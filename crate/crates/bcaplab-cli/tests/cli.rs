use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bcaplab"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn stdout_json(o: &Output) -> Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join("out/manifest.json")).unwrap()).unwrap()
}

#[test]
fn snake_a0_in_d6() {
    let t = tempfile::tempdir().unwrap();
    let v = stdout_json(&run(t.path(), &["snake-a0", "--d", "6"]));
    assert!((v["a0"].as_f64().unwrap() - 6.0).abs() < 1e-6);
    let b = v["bracket"].as_array().unwrap();
    assert!(b[0].as_f64().unwrap() <= 6.0 + 1e-8 && 6.0 - 1e-8 <= b[1].as_f64().unwrap());
    let a0: Value = serde_json::from_slice(&std::fs::read(t.path().join("out/snake_a0.json")).unwrap()).unwrap();
    assert_eq!(a0["schema"], "bcaplab.snake_a0/1");
}

#[test]
fn bcap_methods_are_coherent_for_a_point() {
    let t = tempfile::tempdir().unwrap();
    let v = stdout_json(&run(t.path(), &["bcap", "--method", "all", "--set", "point:0", "--d", "5", "--box", "12"]));
    let vals: Vec<f64> = ["sum_escape", "far_field", "harmonic_measure"].iter().map(|k| v[k]["value"].as_f64().unwrap()).collect();
    for w in &vals {
        assert!((w / vals[0] - 1.0).abs() < 0.05, "{vals:?}");
    }
    assert!(v["relative_spread"].as_f64().unwrap() < 0.05);
    let ladder = std::fs::read_to_string(t.path().join("out/ladder.csv")).unwrap();
    assert!(ladder.starts_with("x,norm,r_over_x,p_c,g,ratio,ci_half,reliable\n"));
}

#[test]
fn supercritical_law_is_a_validation_error() {
    let t = tempfile::tempdir().unwrap();
    let o = run(t.path(), &["hit-mc", "--offspring", "custom:0.4,0.1,0.5"]);
    assert_eq!(o.status.code(), Some(1));
    let e: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(e["error"]["kind"], "validation");
    assert_eq!(e["error"]["exit_code"], 1);
    assert!(!t.path().join("out").exists());
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let t = tempfile::tempdir().unwrap();
    // the Riesz cloud is larger than the point budget
    let o = run(t.path(), &["riesz", "--set", "ball:1", "--h", "0.4", "--max-points", "10"]);
    assert_eq!(o.status.code(), Some(3));
    let o = run(t.path(), &["riesz", "--max-iter", "0", "--set", "box:0,0,0,0,0;1,1,1,1,1", "--h", "0.4"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(t.path(), &["solve", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
    let e: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(e["error"]["kind"], "validation");
}

#[test]
fn cache_hits_reproduce_the_artifacts() {
    let t = tempfile::tempdir().unwrap();
    let args = ["tree-size-law", "--samples", "20000", "--seed", "3"];
    let first = stdout_json(&run(t.path(), &args));
    let bytes = std::fs::read(t.path().join("out/tree_size.csv")).unwrap();
    assert_eq!(manifest(t.path())["cache"]["hit"], false);
    std::fs::remove_dir_all(t.path().join("out")).unwrap();

    let second = stdout_json(&run(t.path(), &args));
    assert_eq!(first, second);
    assert_eq!(manifest(t.path())["cache"]["hit"], true);
    assert_eq!(std::fs::read(t.path().join("out/tree_size.csv")).unwrap(), bytes);

    let mut forced = args.to_vec();
    forced.push("--no-cache");
    stdout_json(&run(t.path(), &forced));
    let m = manifest(t.path());
    assert_eq!(m["cache"]["hit"], false);
    assert_eq!(m["cache"]["enabled"], false);
    assert_eq!(std::fs::read(t.path().join("out/tree_size.csv")).unwrap(), bytes);

    // a different seed is a different key
    stdout_json(&run(t.path(), &["tree-size-law", "--samples", "20000", "--seed", "4"]));
    assert_eq!(manifest(t.path())["cache"]["hit"], false);
}

#[test]
fn config_file_precedence() {
    let t = tempfile::tempdir().unwrap();
    std::fs::write(t.path().join("run.toml"), "d = 5\nseed = 2\n[tree-size-law]\nsamples = 5000\nseed = 9\n").unwrap();
    stdout_json(&run(t.path(), &["--config", "run.toml", "tree-size-law", "--no-cache"]));
    let m = manifest(t.path());
    assert_eq!(m["config"]["samples"], 5000);
    assert_eq!(m["config"]["seed"], 9);
    stdout_json(&run(t.path(), &["--config", "run.toml", "tree-size-law", "--seed", "11", "--no-cache"]));
    assert_eq!(manifest(t.path())["config"]["seed"], 11);

    std::fs::write(t.path().join("bad.toml"), "[tree-size-law]\nsampels = 5\n").unwrap();
    let o = run(t.path(), &["--config", "bad.toml", "tree-size-law"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn manifest_lists_every_artifact_with_its_hash() {
    let t = tempfile::tempdir().unwrap();
    stdout_json(&run(t.path(), &["snake-series", "--d", "6", "--terms", "200", "--no-cache"]));
    let m = manifest(t.path());
    assert_eq!(m["schema"], "bcaplab.manifest/1");
    assert_eq!(m["subcommand"], "snake-series");
    assert_eq!(m["config"]["terms"], 200);
    let names: Vec<&str> = m["artifacts"].as_array().unwrap().iter().map(|a| a["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["coefficients.csv", "u.csv", "snake_series.json"]);
    assert!(m["runtime"]["timestamp_unix"].as_u64().unwrap() > 0);
}

#[test]
fn custom_step_file_feeds_the_cache_key() {
    let t = tempfile::tempdir().unwrap();
    let mut lines = String::new();
    for i in 0..5 {
        for s in [1, -1] {
            let z: Vec<String> = (0..5).map(|j| if j == i { s.to_string() } else { "0".into() }).collect();
            lines.push_str(&format!("{} 0.1\n", z.join(" ")));
        }
    }
    std::fs::write(t.path().join("step.txt"), &lines).unwrap();
    let args = ["green", "--step", "custom:step.txt", "--radius", "4"];
    let a = stdout_json(&run(t.path(), &args));
    let key = manifest(t.path())["cache"]["key"].clone();
    let simple = stdout_json(&run(t.path(), &["green", "--radius", "4", "--no-cache"]));
    assert!((a["c_g"].as_f64().unwrap() - simple["c_g"].as_f64().unwrap()).abs() < 1e-12);

    // same flags, different file contents
    std::fs::write(t.path().join("step.txt"), lines.replace("0.1\n", "0.10\n")).unwrap();
    stdout_json(&run(t.path(), &args));
    let m = manifest(t.path());
    assert_ne!(m["cache"]["key"], key);
    assert_eq!(m["cache"]["hit"], false);
}
