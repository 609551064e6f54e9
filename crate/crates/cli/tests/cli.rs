use std::io::Write as _;
use std::process::{Command, Output, Stdio};

fn run(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_fewclean"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn pacc_prints_twelve_decimals() {
    let o = run(&["pacc", "-", "--clean", "1", "--exact"], "qubits 1\nh 0\n");
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "0.500000000000\n");
    let o = run(&["pacc", "-", "--clean", "1"], "qubits 2\nt 0\ncx 1 0\n");
    assert_eq!(stdout(&o), "0.500000000000\n");
}

#[test]
fn trest_identity_is_yes() {
    for mode in ["oracle", "dqc1-exact", "dqc1-sampled"] {
        let o = run(
            &["trest", "-", "--a", "0.9", "--b", "0.1", "--mode", mode],
            "qubits 2\n",
        );
        assert_eq!(o.status.code(), Some(0), "{mode}");
        assert_eq!(stdout(&o), "yes\n", "{mode}");
    }
    let o = run(&["trest", "-", "--a", "0.9", "--b", "0.1"], "qubits 1\nz 0\n");
    assert_eq!(stdout(&o), "no\n");
}

#[test]
fn usage_and_input_errors_exit_2() {
    assert_eq!(run(&["verify", "--suite", "nonsense"], "").status.code(), Some(2));
    assert_eq!(run(&["frobnicate"], "").status.code(), Some(2));
    assert_eq!(
        run(&["pacc", "-", "--clean", "1"], "qubits 2\ncx 5 0\n").status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["pacc", "/nonexistent/file", "--clean", "1"], "").status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["trest", "-", "--a", "0.1", "--b", "0.5"], "qubits 1\n")
            .status
            .code(),
        Some(2)
    );
    let o = run(&["lower", "-"], "qubits 2\nfoo 1\n");
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn verification_failure_exits_1() {
    // A negative tolerance makes every equality case fail.
    let o = run(&["verify", "--suite", "parity", "--tolerance=-1", "--no-timestamp"], "");
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["overall"], false);
}

#[test]
fn verify_is_deterministic_without_timestamps() {
    let args = [
        "verify",
        "--suite",
        "randomness-amplification",
        "--seed",
        "7",
        "--no-timestamp",
    ];
    let a = run(&args, "");
    let b = run(&args, "");
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(!text.contains("runtime_ms") && !text.contains("timestamp"));
    let c = run(
        &[
            "verify",
            "--suite",
            "randomness-amplification",
            "--seed",
            "8",
            "--no-timestamp",
        ],
        "",
    );
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn lowering_output_parses_back_base_only() {
    let o = run(&["lower", "-", "--strategy", "split"], "qubits 4\nmcx 0 1 2 3\n");
    assert_eq!(o.status.code(), Some(0));
    let parsed = fewclean::format::parse_circuit(&stdout(&o)).unwrap();
    assert!(parsed.circuit.is_base_only());
    assert_eq!(parsed.circuit.width(), 5);
    assert_eq!(parsed.layout.unwrap().get("borrowed").unwrap().len, 1);
    let o = run(
        &["lower", "-", "--pool", "mixed", "--clean", "4"],
        "qubits 4\nmcx 0 1 2 3\n",
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn build_output_round_trips_and_matches_pacc() {
    let src = "qubits 2\nh 0\nt 0\ncx 1 0\nh 0\n";
    let o = run(&["build", "--proc", "ramp", "-", "--n", "2"], src);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("# clean 1\n"));
    let parsed = fewclean::format::parse_circuit(&text).unwrap();
    assert_eq!(parsed.circuit.width(), 5);
    let p = run(&["pacc", "-", "--clean", "1"], src);
    let p: f64 = stdout(&p).trim().parse().unwrap();
    let r = run(&["pacc", "-", "--clean", "1"], &text);
    let r: f64 = stdout(&r).trim().parse().unwrap();
    assert!((r - (0.5 + 0.5 * (2.0 * p - 1.0).powi(2))).abs() < 1e-11);

    let o = run(
        &["build", "--proc", "pipeline-t1", "-", "--ramp-n", "2", "--stab-n", "1"],
        src,
    );
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.matches("# stage").count(), 3);
    assert!(text.starts_with("# clean 2\n"));
}

#[test]
fn eval_reports_json() {
    let o = run(&["eval", "ramp", "--p", "0.75", "--n", "2"], "");
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() - 0.625).abs() < 1e-15);
    let o = run(&["eval", "stab1", "--p", "0.625", "--n", "64"], "");
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["upper_applicable"], false);
    let o = run(&["eval", "ramp", "--n", "2"], "");
    assert_eq!(o.status.code(), Some(2));
}
