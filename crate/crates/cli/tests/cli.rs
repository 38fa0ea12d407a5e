use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn primequo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_primequo"))
        .args(args)
        .env_remove("PRIMEQUO_PROFILE")
        .env_remove("PRIMEQUO_SIEVE_LIMIT")
        .env_remove("PRIMEQUO_SEED")
        .env_remove("PRIMEQUO_JOBS")
        .env_remove("PRIMEQUO_PRIME_CACHE")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}):\n{}\nstderr:\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

#[test]
fn sieve_counts() {
    let out = primequo(&["sieve", "--limit", "100"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["count"], 25);
    assert_eq!(v["last"], 97);

    let v = json(&primequo(&["sieve", "--limit", "1000000"]));
    assert_eq!(v["count"], 78498);
    assert_eq!(v["last"], 999983);
}

#[test]
fn usage_errors_exit_64() {
    let out = primequo(&["sieve", "--limit", "1"]);
    assert_eq!(code(&out), 64);
    assert!(String::from_utf8_lossy(&out.stderr).contains("at least 2"));
    assert_eq!(code(&primequo(&["verify", "no-such-check"])), 64);
    assert_eq!(
        code(&primequo(&["check-class", "--oracle", "sqrt-like:0"])),
        64
    );
    assert_eq!(code(&primequo(&["check-class", "--params", "1,2"])), 64);
    assert_eq!(code(&primequo(&["frobnicate"])), 64);
    assert_eq!(code(&primequo(&["--help"])), 0);
}

#[test]
fn class_membership() {
    let out = primequo(&[
        "check-class",
        "--oracle",
        "sqrt-like:1",
        "--params",
        "0,1,1",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let v = json(&out);
    assert_eq!(v["check"], "class");
    assert_eq!(v["ranges"]["n"]["end"], 9_999);

    let out = primequo(&["check-class", "--oracle", "prime", "--params", "1,1,11"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));

    // f^-1(n+1) - f^-1(n) = n + 1 > n holds for n = 0 too
    let out = primequo(&[
        "check-class",
        "--oracle",
        "sqrt-like:1",
        "--params",
        "0,1,0",
        "--nmax",
        "2000",
    ]);
    assert_eq!(code(&out), 0);
}

#[test]
fn class_violations_fail_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.txt");
    // f(1..) = 1 1 2 2 2 0 3 3 3 3 ...: a drop of 2 at argument 6
    let mut values = vec![1, 1, 2, 2, 2, 0];
    values.extend(std::iter::repeat_n(3, 40));
    let text: String = values.iter().map(|v| format!("{v}\n")).collect();
    std::fs::write(&path, text).unwrap();
    let oracle = format!("table:{}", path.display());
    let out = primequo(&[
        "check-class",
        "--oracle",
        &oracle,
        "--params",
        "1,1,0",
        "--nmax",
        "2",
    ]);
    assert_eq!(code(&out), 1);
    let v = json(&out);
    assert_eq!(v["result"], "fail");
    assert_eq!(v["witness"]["kind"], "descent");
    // a table oracle needs explicit parameters
    assert_eq!(code(&primequo(&["check-class", "--oracle", &oracle])), 64);
}

#[test]
fn pseudo_inverse_exhaustion_is_inconclusive() {
    let out = primequo(&[
        "check-class",
        "--oracle",
        "prime",
        "--params",
        "1,1,11",
        "--nmax",
        "40",
    ]);
    assert_eq!(code(&out), 2);
    assert_eq!(json(&out)["result"], "inconclusive");
}

#[test]
fn max_quotient_check() {
    let out = primequo(&["verify", "max-quotient"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["observations"]["argmax"], 7012);
    assert_eq!(v["config"]["command"], "verify max-quotient");
    for key in [
        "check",
        "anchor",
        "oracle",
        "params",
        "ranges",
        "result",
        "seed",
        "runtime_ms",
    ] {
        assert!(v.get(key).is_some(), "report lacks {key}");
    }
}

#[test]
fn emit_formula() {
    let out = primequo(&["emit-formula", "ftilde", "--params", "0,1,1"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    // without an oracle the threshold stays symbolic
    assert!(text.contains("x0"));
    // the congruence has k + d + 1 = 2 branches h = 0, 1, each two equations
    assert_eq!(text.matches('|').count(), 3);

    let out = primequo(&[
        "emit-formula",
        "mult",
        "--params",
        "0,1,1",
        "--oracle",
        "sqrt-like:1",
        "--envelope",
    ]);
    let v = json(&out);
    assert_eq!(v["name"], "mult");
    assert_eq!(v["constants"]["n1"], 8);
    assert_eq!(v["constants"]["c"], 5);
    assert!(v["size"]["nodes"].as_u64().unwrap() > 1000);

    assert_eq!(code(&primequo(&["emit-formula", "csquare"])), 64);
}

fn emit_to(dir: &Path, relation: &str) -> String {
    let path = dir.join(format!("{relation}.txt"));
    let out = primequo(&[
        "emit-formula",
        relation,
        "--params",
        "0,1,1",
        "--oracle",
        "sqrt-like:1",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    path.to_str().unwrap().to_string()
}

#[test]
fn eval_multiplication() {
    let dir = tempfile::tempdir().unwrap();
    let m = emit_to(dir.path(), "mult");
    let run = |assign: &str| {
        primequo(&[
            "eval",
            "--formula",
            &m,
            "--assign",
            assign,
            "--oracle",
            "sqrt-like:1",
        ])
    };

    let out = run("a=3,b=4,z=12");
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("true"));
    // witnesses of the resolved existentials follow
    assert!(lines.any(|l| l.starts_with("q_a=")));

    let out = run("a=3,b=4,z=13");
    assert_eq!(code(&out), 1);
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "false");

    // z is free in the formula
    assert_eq!(code(&run("a=3,b=4")), 2);
}

#[test]
fn eval_parse_errors_have_locations() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    std::fs::write(&path, "x = \n  (y + )").unwrap();
    let out = primequo(&[
        "eval",
        "--formula",
        path.to_str().unwrap(),
        "--assign",
        "x=1,y=1",
        "--oracle",
        "sqrt-like:1",
    ]);
    assert_eq!(code(&out), 64);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains(":2:"), "{err}");
}

#[test]
fn reports_are_reproducible() {
    let args = [
        "verify",
        "short-range-drift",
        "--oracle",
        "sqrt-like:2",
        "--range",
        "0..3000",
        "--sweep-cap",
        "20",
        "--seed",
        "42",
        "--no-timing",
    ];
    let (a, b) = (primequo(&args), primequo(&args));
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["seed"], 42);
    assert_eq!(v["config"]["seed"], 42);
    assert_eq!(v["config"]["oracle"], "sqrt-like:2");
    assert_eq!(v["runtime_ms"], 0);
}

#[test]
fn worker_count_does_not_change_reports() {
    let run = |jobs: &str| {
        let out = primequo(&[
            "verify",
            "ftilde",
            "--oracle",
            "sqrt-like:1",
            "--count",
            "60",
            "--jobs",
            jobs,
            "--no-timing",
        ]);
        assert_eq!(code(&out), 0);
        let mut v = json(&out);
        v.as_object_mut().unwrap().remove("config");
        v
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn environment_overrides_profile_defaults() {
    let out = Command::new(env!("CARGO_BIN_EXE_primequo"))
        .args(["verify", "max-quotient", "--no-timing"])
        .env("PRIMEQUO_SIEVE_LIMIT", "200000")
        .env("PRIMEQUO_SEED", "9")
        .output()
        .unwrap();
    let v = json(&out);
    assert_eq!(v["config"]["sieve_limit"], 200_000);
    assert_eq!(v["config"]["seed"], 9);
    assert_eq!(v["oracle"], "primes<= 200000");
}

#[test]
fn out_flag_and_prime_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("primes.bin");
    let report = dir.path().join("report.json");
    let out = primequo(&[
        "sieve",
        "--limit",
        "500000",
        "--cache",
        cache.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(cache.exists());
    let out = primequo(&[
        "verify",
        "max-quotient",
        "--sieve-limit",
        "500000",
        "--prime-cache",
        cache.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["observations"]["argmax"], 7012);
}

#[test]
fn symbolic_threshold_is_inconclusive() {
    for id in ["ftilde", "csquare"] {
        let out = primequo(&["verify", id, "--count", "3"]);
        assert_eq!(code(&out), 2, "{id}");
        assert_eq!(json(&out)["result"], "inconclusive");
    }
}

#[test]
fn estimates_report_the_upper_violations() {
    let out = primequo(&["verify", "estimates", "--range", "2..10000"]);
    assert_eq!(code(&out), 1);
    let v = json(&out);
    assert_eq!(v["witness"]["kind"], "rosser_upper");
    assert_eq!(v["witness"]["m"], 7022);
}
