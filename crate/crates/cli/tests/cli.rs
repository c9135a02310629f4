use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn solgroup(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_solgroup")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&o.stdout)))
}

fn stderr_json(o: &Output) -> Value {
    let line = String::from_utf8_lossy(&o.stderr);
    serde_json::from_str(line.lines().next().expect("one error line")).expect("stderr is a JSON line")
}

fn write(dir: &TempDir, name: &str, v: &Value) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, v.to_string()).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn build_cp_round_trips_through_validate() {
    let dir = TempDir::new().unwrap();
    for format in ["exact", "float"] {
        let out = dir.path().join(format!("cp_{format}.json"));
        let o = solgroup(&["dihedral", "build-cp", "--p", "5", "--format", format, "--out", s(&out)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let doc: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
        assert!(doc["version"].as_str().unwrap().starts_with("solgroup "));
        assert_eq!(doc["kind"], "correlation");
        let v = solgroup(&["corr", "validate", "--corr", s(&out)]);
        assert_eq!(code(&v), 0);
        let r = stdout_json(&v);
        assert_eq!(r["data"]["synchronous"], true);
        assert_eq!(r["data"]["validity"]["ok"], true);
    }
}

#[test]
fn check_perfect_exit_codes() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.json", &json!({ "n": 3, "rows": [[0, 1, 2]] }));
    // Deterministic strategy for x = 0 via the regular representation of the trivial group.
    let one = json!({ "rows": 1, "cols": 1, "data": [[1.0, 0.0]] });
    let zero = json!({ "rows": 1, "cols": 1, "data": [[0.0, 0.0]] });
    let fam: Vec<Value> = (0..8).map(|k| if k == 0 { one.clone() } else { zero.clone() }).collect();
    let questions = json!([0, { "var": 0 }, { "var": 1 }, { "var": 2 }]);
    let answers: Vec<Value> = (0..8).map(|v| json!([(v >> 2) & 1, (v >> 1) & 1, v & 1])).collect();
    let scenario = json!({ "questions_a": questions, "questions_b": questions, "answers_a": answers, "answers_b": answers });
    let strategy = json!({
        "scenario": scenario,
        "mode": { "Tensor": { "dim_a": 1, "dim_b": 1 } },
        "state": [[1.0, 0.0]],
        "alice": vec![fam.clone(); 4],
        "bob": vec![fam.clone(); 4],
    });
    let sp = write(&dir, "s.json", &strategy);
    let cpath = dir.path().join("c.json");
    let o = solgroup(&["corr", "from-strategy", "--strategy", s(&sp), "--out", s(&cpath)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = solgroup(&["corr", "check-perfect", "--corr", s(&cpath), "--linsys", s(&a)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(stdout_json(&o)["data"]["violations"], 0);
    // A wrong system: the dihedral correlation lacks the row questions.
    let cp = dir.path().join("cp.json");
    assert_eq!(code(&solgroup(&["dihedral", "build-cp", "--p", "5", "--out", s(&cp)])), 0);
    let o = solgroup(&["corr", "check-perfect", "--corr", s(&cp), "--linsys", s(&a)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn malformed_input_exits_two_with_json_error() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("bad.json");
    fs::write(&p, "{ not json").unwrap();
    let o = solgroup(&["corr", "validate", "--corr", s(&p)]);
    assert_eq!(code(&o), 2);
    let e = stderr_json(&o);
    assert_eq!(e["error"], "parse");
    assert_eq!(e["exit_code"], 2);
    let o = solgroup(&["dihedral", "build-cp"]);
    assert_eq!(code(&o), 2);
    assert_eq!(stderr_json(&o)["error"], "usage");
    let o = solgroup(&["dihedral", "build-cp", "--p", "9"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn coxeter_cap_exits_three() {
    let dir = TempDir::new().unwrap();
    let ctx = write(&dir, "ctx.json", &json!({ "generators": 6, "commuting": [[2, 3], [2, 4], [3, 4], [2, 5], [4, 5]], "t1": 0, "t2": 1, "p": 5 }));
    let o = solgroup(&["coxeter", "normal-form", "--ctx", s(&ctx), "--word", "1 0 1 0 1"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["data"]["normal_form"], json!([0, 1, 0, 1, 0]));
    let long = "2 3 4 5 2 4 3 5 4 2 3 5 2 4 5 3 4 2 5 3";
    let o = solgroup(&["coxeter", "normal-form", "--ctx", s(&ctx), "--word", long, "--cap", "5"]);
    assert_eq!(code(&o), 3);
    assert_eq!(stderr_json(&o)["error"], "coxeter_cap_exceeded");
    let o = solgroup(&["coxeter", "equal", "--ctx", s(&ctx), "--w1", "0 1 0 1 0", "--w2", "1 0 1 0 1"]);
    assert_eq!(code(&o), 0);
    let o = solgroup(&["coxeter", "equal", "--ctx", s(&ctx), "--w1", "0", "--w2", "1"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn verify_fcp_passes() {
    let o = solgroup(&["dihedral", "verify-fcp", "--p", "5", "--r", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = stdout_json(&o);
    assert_eq!(r["data"]["hypotheses_hold"], true);
    assert_eq!(r["data"]["conclusion_holds"], true);
    let o = solgroup(&["dihedral", "verify-fcp", "--p", "5", "--r", "4"]);
    assert_eq!(code(&o), 2);
    assert_eq!(stderr_json(&o)["error"], "not_primitive_root");
}

#[test]
fn minsky_and_kms() {
    let dir = TempDir::new().unwrap();
    let m = write(
        &dir,
        "m.json",
        &json!({ "glasses": 3, "states": 3, "commands": [
            { "kind": "Sub", "from": 1, "to": 1, "glasses": [1] },
            { "kind": "EmptyCheck", "from": 1, "to": 2, "glasses": [1] },
            { "kind": "Stop", "from": 2, "to": 0 }
        ] }),
    );
    let o = solgroup(&["minsky", "run", "--machine", s(&m), "--input", "4"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["data"]["steps"], 6);
    let o = solgroup(&["minsky", "run", "--machine", s(&m), "--input", "4", "--max-steps", "2"]);
    assert_eq!(code(&o), 1);
    let ext = dir.path().join("ext.json");
    assert_eq!(code(&solgroup(&["minsky", "extend-glass", "--machine", s(&m), "--out", s(&ext)])), 0);
    let o = solgroup(&["minsky", "run", "--machine", s(&ext), "--input", "4"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = solgroup(&["kms", "relator", "--machine", s(&m), "--command", "0"]);
    assert_eq!(code(&o), 0);
    assert!(stdout_json(&o)["data"].as_array().unwrap().iter().all(|l| l["gen"].is_string()));
    let o = solgroup(&["kms", "relator", "--machine", s(&m), "--command", "9"]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&solgroup(&["kms", "input-word", "--n", "2"])), 0);
    assert_eq!(code(&solgroup(&["kms", "presentation", "--machine", s(&m)])), 0);
}

#[test]
fn linsys_commands() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.json", &json!({ "n": 5, "rows": [[0, 1, 2, 3, 4], [0, 1]] }));
    let out = dir.path().join("norm.json");
    assert_eq!(code(&solgroup(&["linsys", "normalize", "--linsys", s(&a), "--out", s(&out)])), 0);
    let doc: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!(doc["data"]["system"]["rows"].as_array().unwrap().iter().all(|r| r.as_array().unwrap().len() == 3));
    let o = solgroup(&["linsys", "solution-group", "--linsys", s(&a)]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["data"]["generators"], 5);
}

fn split_ctx(dir: &TempDir) -> PathBuf {
    write(dir, "fn_ctx.json", &json!({ "n": 6, "rows": [[0, 2, 3], [1, 4, 5]], "x0": 2, "t1": 0, "t2": 1, "p": 3 }))
}

#[test]
fn fn_pipeline() {
    let dir = TempDir::new().unwrap();
    let ctx = split_ctx(&dir);
    let o = solgroup(&["fn", "wn", "--ctx", s(&ctx)]);
    assert_eq!(code(&o), 0);
    let wn = stdout_json(&o);
    assert!(wn["data"]["wn"].as_array().unwrap().contains(&json!([])));
    let members = dir.path().join("members");
    let o = solgroup(&["fn", "enumerate", "--ctx", s(&ctx), "--limit", "2", "--out", s(&members)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = stdout_json(&o);
    let listed = summary["data"]["members"].as_array().unwrap();
    assert_eq!(listed.len(), 2);
    for m in listed {
        let f = m["f"].as_str().unwrap();
        let o = solgroup(&["fn", "eval", "--ctx", s(&ctx), "--f", f]);
        assert_eq!(code(&o), 0);
        assert_eq!(stdout_json(&o)["data"]["in_fn"], true);
        let c = m["correlation"].as_str().unwrap();
        let v = solgroup(&["corr", "validate", "--corr", c]);
        assert_eq!(stdout_json(&v)["data"]["synchronous"], true);
    }
    // Resuming after the first member yields the second first.
    let resume = listed[0]["index"].as_str().unwrap().parse::<u128>().unwrap() + 1;
    let again = dir.path().join("again");
    let o = solgroup(&["fn", "enumerate", "--ctx", s(&ctx), "--limit", "1", "--start", &resume.to_string(), "--out", s(&again)]);
    assert_eq!(stdout_json(&o)["data"]["members"][0]["index"], listed[1]["index"]);
    // Without a directory the command is a usage error.
    assert_eq!(code(&solgroup(&["fn", "enumerate", "--ctx", s(&ctx)])), 2);
    // A function missing its values is rejected.
    let bad = write(&dir, "bad_f.json", &json!([[[], 1]]));
    let o = solgroup(&["fn", "eval", "--ctx", s(&ctx), "--f", s(&bad)]);
    assert_eq!(code(&o), 2);
    assert_eq!(stderr_json(&o)["error"], "constraint_violation");
}

fn mat(rows: &[&[(f64, f64)]]) -> Value {
    Value::Array(
        rows.iter()
            .map(|r| Value::Array(r.iter().map(|(re, im)| json!([re.to_string(), im.to_string()])).collect()))
            .collect(),
    )
}

#[test]
fn num_commands() {
    let dir = TempDir::new().unwrap();
    let z = mat(&[&[(1.0, 0.0), (0.0, 0.0)], &[(0.0, 0.0), (-1.0, 0.0)]]);
    let pres = write(&dir, "p.json", &json!({ "generators": 1, "relators": [[{ "gen": 0, "exp": 1 }, { "gen": 0, "exp": 1 }]] }));
    let asg = write(&dir, "a.json", &json!({ "dimension": 2, "operators": [{ "label": "0", "matrix": z }] }));
    let o = solgroup(&["num", "defect", "--presentation", s(&pres), "--assignment", s(&asg)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout_json(&o)["data"]["epsilon"], 0.0);
    let p0 = mat(&[&[(1.0, 0.0), (0.001, 0.0)], &[(0.0, 0.0), (0.0, 0.0)]]);
    let p1 = mat(&[&[(0.0, 0.0), (0.0, 0.0)], &[(0.0, 0.0), (1.0, 0.0)]]);
    let fam = write(&dir, "f.json", &json!({ "dimension": 2, "operators": [{ "label": "a", "matrix": p0 }, { "label": "b", "matrix": p1 }] }));
    let out = dir.path().join("r.json");
    let o = solgroup(&["num", "round-pvm", "--family", s(&fam), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!(r["data"]["pvm_defect"].as_f64().unwrap() < 1e-12);
    let trial = |jobs: &str| {
        let o = solgroup(&["num", "trials", "--trials", "6", "--d", "6", "--n", "3", "--seed", "11", "--jobs", jobs]);
        assert_eq!(code(&o), 0);
        stdout_json(&o)
    };
    let (a, b) = (trial("1"), trial("3"));
    assert_eq!(a, b);
    assert_eq!(a["data"]["seed"], 11);
    assert_eq!(code(&solgroup(&["num", "trials"])), 2);
}

#[test]
fn version_and_help() {
    let o = solgroup(&["--version"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains(env!("CARGO_PKG_VERSION")));
    assert_eq!(code(&solgroup(&["--help"])), 0);
}
