use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::{json, Value};
use tempfile::TempDir;

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_skorokhod")).args(args).output().expect("binary runs");
    (
        out.status.code().expect("exit code"),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn write(dir: &TempDir, name: &str, v: &Value) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, v.to_string()).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn problem(steps: usize, target: &[(i64, f64)], cost: Value, tracked: &[&str]) -> Value {
    json!({
        "lattice": {"steps": steps, "step_size": 1.0, "tracked": tracked},
        "start": {"atoms": [[0, 1.0]]},
        "target": {"atoms": target},
        "cost": cost,
    })
}

fn two_point() -> Value {
    problem(3, &[(-1, 0.5), (1, 0.5)], json!({"name": "root", "h": "t^2"}), &[])
}

fn solve_to(dir: &TempDir, p: &Path, name: &str) -> PathBuf {
    let out = dir.path().join(name);
    let (code, _, err) = run(&["solve", "--problem", s(p), "--out", s(&out)]);
    assert_eq!(code, 0, "{err}");
    out
}

#[test]
fn solve_two_point_root() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "p.json", &two_point());
    let (code, out, _) = run(&["solve", "--problem", s(&p), "--oracle"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["status"], "optimal");
    assert_eq!(v["objective"], 1.0);
    assert_eq!(v["stop_prob"]["1:1"], 1.0);
    assert!(v["oracle"]["difference"].as_f64().unwrap() <= 1e-8);
    assert_eq!(v["monotonicity"]["violations"], json!([]));
}

#[test]
fn solve_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let p = write(
        &dir,
        "p.json",
        &problem(8, &[(-2, 0.25), (0, 0.5), (2, 0.25)], json!({"name": "rost", "h": "sqrt"}), &[]),
    );
    let a = fs::read(solve_to(&dir, &p, "a.json")).unwrap();
    let b = fs::read(solve_to(&dir, &p, "b.json")).unwrap();
    assert_eq!(a, b);
    let (_, stdout, _) = run(&["solve", "--problem", s(&p)]);
    assert_eq!(stdout.as_bytes(), a.as_slice());
}

#[test]
fn infeasible_target_exits_two_with_a_certificate() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "p.json", &problem(6, &[(-2, 0.5), (2, 0.5)], json!({"name": "root", "h": "t^2"}), &[]));
    let out = dir.path().join("s.json");
    let (code, _, err) = run(&["solve", "--problem", s(&p), "--out", s(&out)]);
    assert_eq!(code, 2);
    assert!(err.contains("infeasible"), "{err}");
    let v: Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v["status"], "infeasible");
    assert!(v["margin"].as_f64().unwrap() > 0.0);
    assert!(!v["farkas"].as_array().unwrap().is_empty());
}

#[test]
fn soft_mode_accepts_the_same_target() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "p.json", &problem(6, &[(-2, 0.5), (2, 0.5)], json!({"name": "root", "h": "t^2"}), &[]));
    let out = dir.path().join("s.json");
    let (code, _, err) = run(&["solve", "--problem", s(&p), "--mode", "soft", "--epsilon", "0.2", "--out", s(&out)]);
    assert_eq!(code, 0, "{err}");
    let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!(v["deviation"].as_f64().unwrap() <= 0.2 + 1e-9);
    let (code, _, err) = run(&[
        "verify",
        "--problem",
        s(&p),
        "--solution",
        s(&out),
        "--mode",
        "soft",
        "--epsilon",
        "0.2",
        "--samples",
        "20000",
    ]);
    assert_eq!(code, 0, "{err}");
}

#[test]
fn input_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"lattice\": ").unwrap();
    assert_eq!(run(&["solve", "--problem", s(&bad)]).0, 1);
    assert_eq!(run(&["solve", "--problem", "/nonexistent/p.json"]).0, 1);
    let p = write(&dir, "p.json", &two_point());
    assert_eq!(run(&["solve", "--problem", s(&p), "--epsilon", "1.5"]).0, 1);
    assert_eq!(run(&["solve", "--problem", s(&p), "--mode", "soft"]).0, 1);
    assert_eq!(run(&["solve", "--problem", s(&p), "--tol-gap", "-1"]).0, 1);
    assert_eq!(run(&["solve", "--problem", s(&p), "--no-such-flag"]).0, 1);
    assert_eq!(run(&["verify", "--problem", s(&p), "--solution", s(&p)]).0, 1);
    let sol = solve_to(&dir, &p, "s.json");
    assert_eq!(run(&["verify", "--problem", s(&p), "--solution", s(&sol), "--samples", "0"]).0, 1);
    let unknown = write(&dir, "u.json", &problem(3, &[(-1, 0.5), (1, 0.5)], json!({"name": "nope"}), &[]));
    assert_eq!(run(&["solve", "--problem", s(&unknown)]).0, 1);
    assert_eq!(run(&["--help"]).0, 0);
}

#[test]
fn verify_passes_on_solved_instances_and_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let five = [(-3, 0.15), (-1, 0.2), (0, 0.3), (1, 0.2), (3, 0.15)];
    let mut ay = problem(17, &five, json!({"name": "azema_yor"}), &["max"]);
    ay["secondary"] = json!(true);
    let cases = [
        ay,
        problem(30, &five, json!({"name": "cave", "t0": 3}), &[]),
        problem(12, &[(-2, 0.25), (-1, 0.25), (1, 0.25), (2, 0.25)], json!({"name": "root", "h": "t^3"}), &[]),
    ];
    for (i, case) in cases.iter().enumerate() {
        let p = write(&dir, &format!("p{i}.json"), case);
        let sol = solve_to(&dir, &p, &format!("s{i}.json"));
        let args = ["verify", "--problem", s(&p), "--solution", s(&sol), "--seed", "11", "--samples", "100000"];
        let (code, first, err) = run(&args);
        assert_eq!(code, 0, "case {i}: {err}");
        let v: Value = serde_json::from_str(&first).unwrap();
        assert_eq!(v["passed"], true);
        assert_eq!(v["seed"], 11);
        let names: Vec<&str> = v["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
        assert_eq!(names, ["certificate", "monotonicity", "embedding"]);
        assert!(v["checks"][2]["report"]["kolmogorov"].as_f64().unwrap() <= 0.01);
        assert_eq!(run(&args).1, first);
    }
}

#[test]
fn corrupted_solution_fails_verification() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "p.json", &two_point());
    let sol = solve_to(&dir, &p, "s.json");
    let mut v: Value = serde_json::from_str(&fs::read_to_string(&sol).unwrap()).unwrap();
    v["stop_prob"]["1:1"] = json!(0.0);
    let bad = write(&dir, "bad.json", &v);
    let out = dir.path().join("report.json");
    let (code, _, err) = run(&["verify", "--problem", s(&p), "--solution", s(&bad), "--out", s(&out)]);
    assert_eq!(code, 3);
    assert!(err.contains("certificate/marginal"), "{err}");
    let report: Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(report["passed"], false);
    assert_eq!(report["checks"][2]["passed"], false);
}

#[test]
fn barrier_exports() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "p.json", &two_point());
    let sol = solve_to(&dir, &p, "s.json");
    let (code, csv, _) = run(&["barrier", "--problem", s(&p), "--solution", s(&sol)]);
    assert_eq!(code, 0);
    assert_eq!(csv, "phase,level,threshold,physical,fraction\nt,-1,1,1.0,1.0\nt,1,1,1.0,1.0\n");
    let (code, json_out, _) = run(&["barrier", "--problem", s(&p), "--format", "json"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&json_out).unwrap();
    assert_eq!(v["kind"], "barrier");
    assert_eq!(v["thresholds"].as_array().unwrap().len(), 2);

    let cave =
        write(&dir, "c.json", &problem(8, &[(-2, 0.25), (0, 0.5), (2, 0.25)], json!({"name": "cave", "t0": 3}), &[]));
    let (code, csv, _) = run(&["barrier", "--problem", s(&cave)]);
    assert_eq!(code, 0);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("phase,level,threshold,physical,fraction,region"));
    assert!(lines.all(|l| l.ends_with(",pre-t0") || l.ends_with(",post-t0")));
}

#[test]
fn support_of_the_wrong_shape_exits_four() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "p.json", &problem(5, &[(-1, 0.5), (1, 0.5)], json!({"name": "root", "h": "t^2"}), &[]));
    let sol = solve_to(&dir, &p, "s.json");
    // Stop half the mass at (1,1) and all of it at (1,−1), then let the
    // rest run to step 4: (3,1) continues while (1,1) stops.
    let mut v: Value = serde_json::from_str(&fs::read_to_string(&sol).unwrap()).unwrap();
    let probs = v["stop_prob"].as_object_mut().unwrap();
    for (key, p) in probs.iter_mut() {
        let mut parts = key.split(':').map(|t| t.parse::<i64>().unwrap());
        let (k, x) = (parts.next().unwrap(), parts.next().unwrap());
        *p = json!(match (k, x) {
            (1, 1) => 0.5,
            (1, -1) => 1.0,
            (k, _) if k >= 4 => 1.0,
            _ => 0.0,
        });
    }
    let bad = write(&dir, "bad.json", &v);
    let (code, _, err) = run(&["barrier", "--problem", s(&p), "--solution", s(&bad)]);
    assert_eq!(code, 4, "{err}");
    assert!(err.contains("barrier kind violated"), "{err}");
}
