use std::fs;
use std::process::{Command, Output};

fn dynspan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynspan"))
        .args(args)
        .env_remove("DYNSPAN_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn tmp(name: &str, content: &str) -> String {
    let dir = std::env::temp_dir().join(format!("dynspan-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    fs::write(&p, content).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn compile_prints_class() {
    let cases: [(&[&str], &str); 4] = [
        (
            &[
                "compile",
                "--kind",
                "pattern",
                "--alphabet",
                "ab",
                "a<x>b<x>",
            ],
            "class: DynCQ",
        ),
        (
            &[
                "compile",
                "--kind",
                "splog",
                "--neg",
                "exists(p, exists(s, and(eq(W, <p><x><s>), not(eq(W, <p><x><x>)))))",
            ],
            "class: DynFO",
        ),
        (&["compile", "--kind", "rgx", ".*x{ab}.*"], "class: DynPROP"),
        (&["compile", "--kind", "regex", "(ab)*"], "class: DynPROP"),
    ];
    for (args, want) in cases {
        let o = dynspan(args);
        assert!(o.status.success(), "{args:?}");
        assert_eq!(stdout(&o).lines().last(), Some(want), "{args:?}");
    }
}

#[test]
fn negation_needs_flag() {
    let o = dynspan(&["compile", "--kind", "splog", "not(eq(W, ))"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_dump_reproduces_example() {
    let dump = tmp("sp.dump", "");
    let o = dynspan(&["compile", "--kind", "rgx", ".*x{ab}.*", "--out", &dump]);
    assert!(o.status.success());
    let trace = tmp("t.txt", "ins a 1\nins b 3\nins a 5 # aba\nins b 6\n");
    let o = dynspan(&[
        "run",
        "--program",
        &dump,
        "--n",
        "6",
        "--trace",
        &trace,
        "--every",
    ]);
    assert!(o.status.success());
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[3], "R_P: (1,5)");
    assert_eq!(lines[4], "R_P: (1,5) (5,$)");
}

#[test]
fn run_verify_and_bad_lines() {
    let trace = tmp("v.txt", "ins a 1\nins b 2\nreset 1\nins b 4\n");
    let o = dynspan(&[
        "run",
        "--builtin",
        "splog:len",
        "--n",
        "5",
        "--trace",
        &trace,
        "--verify",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(stdout(&o).contains("verified 4 steps"));

    let bad = tmp("bad.txt", "ins a 1\n\nreset 2\n");
    let o = dynspan(&["run", "--builtin", "base", "--n", "4", "--trace", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let garbage = tmp("g.txt", "ins a 1\nfrobnicate\n");
    let o = dynspan(&["run", "--builtin", "base", "--n", "4", "--trace", &garbage]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn eval_outputs() {
    let o = dynspan(&[
        "eval",
        "--kind",
        "pattern",
        "--erasing",
        "a<x><x>b",
        "--word",
        "ababab",
    ]);
    assert_eq!(stdout(&o).trim(), "member: true (x=ba)");
    let o = dynspan(&[
        "eval",
        "--kind",
        "rgx",
        "--alphabet",
        "winecak",
        ".*x{(wine)|(cake)}.*",
        "--word",
        "winecake",
    ]);
    assert!(stdout(&o).starts_with("tuples: 2"));
    let o = dynspan(&[
        "eval",
        "--kind",
        "splog",
        "eq(W, <x><x><x>)",
        "--word",
        "aa",
    ]);
    assert_eq!(stdout(&o).trim(), "false");
    let o = dynspan(&["eval", "--kind", "pattern", "a<x><x>b", "--word", "ab"]);
    assert_eq!(stdout(&o).trim(), "member: false");
}

#[test]
fn fuzz_summary_and_determinism() {
    let args = [
        "fuzz",
        "--builtin",
        "regular",
        "--trials",
        "40",
        "--n",
        "6",
        "--seed",
        "7",
    ];
    let a = dynspan(&args);
    let b = dynspan(&[&args[..], &["--jobs", "1"]].concat());
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).lines().all(|l| l.ends_with("ok 40/40")));

    let o = dynspan(&["fuzz", "--builtin", "base", "--trials", "30", "--corrupt"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("DIVERGE step="));
}

#[test]
fn spec_file_and_unknown_builtin() {
    let spec = tmp(
        "p.spec",
        "kind: pattern\nalphabet: ab\nbody: a<x><x>b\nerasing: true\n",
    );
    let o = dynspan(&["eval", "--spec-file", &spec, "--word", "ab"]);
    assert_eq!(stdout(&o).trim(), "member: true (x=)");
    let o = dynspan(&["fuzz", "--builtin", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}
