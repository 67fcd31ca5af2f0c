mod common;

use std::path::PathBuf;
use std::process::{Command, Output};

use common::*;
use icmaus::Alignment;

fn icmaus(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_icmaus"))
        .args(args)
        .output()
        .unwrap()
}

fn fx(name: &str) -> String {
    fixture_path(name).to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch_file(name: &str, text: &str) -> PathBuf {
    let p = std::env::temp_dir().join(format!("icmaus-cli-{}-{name}", std::process::id()));
    std::fs::write(&p, text).unwrap();
    p
}

/// The canonical block of the first alignment in `align --canonical` output.
fn first_canonical(out: &str) -> String {
    out.lines()
        .skip(1)
        .take_while(|l| !l.is_empty())
        .map(|l| format!("{l}\n"))
        .collect()
}

#[test]
fn align_prints_the_committed_canonical_form() {
    let out = stdout(&icmaus(&[
        "align",
        "--old",
        &fx("fig1.old"),
        "--new",
        &fx("fig1.new"),
        "--canonical",
    ]));
    assert!(out.starts_with("alignment 1 cd "));
    let text = first_canonical(&out);
    assert_eq!(text.trim_end(), expected_canonical("fig1").trim_end());
    // and the text reloads into the same alignment
    let (s, _) = load("fig1");
    assert_eq!(
        Alignment::from_canonical(&text, &s)
            .unwrap()
            .canonical_text(&s)
            .trim_end(),
        text.trim_end()
    );
}

#[test]
fn align_picture_and_probabilities() {
    let out = stdout(&icmaus(&[
        "align",
        "--old",
        &fx("fig11.old"),
        "--new",
        &fx("fig11.new"),
        "--top",
        "3",
        "--probs",
    ]));
    assert!(out.contains(&read_fixture("expected/fig11.render")));
    let probs: Vec<f64> = out
        .lines()
        .skip_while(|l| *l != "probabilities")
        .skip(1)
        .map(|l| l.split_whitespace().nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(probs.len(), 3);
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-5);
}

#[test]
fn zero_score_still_succeeds() {
    let old = scratch_file("zero.old", "x y\n");
    let new = scratch_file("zero.new", "a b\n");
    let out = stdout(&icmaus(&[
        "align",
        "--old",
        old.to_str().unwrap(),
        "--new",
        new.to_str().unwrap(),
    ]));
    assert!(out.starts_with("alignment 1 cd 0.0000"));
}

#[test]
fn empty_new_fails() {
    let new = scratch_file("empty.new", "// nothing here\n");
    let o = icmaus(&[
        "align",
        "--old",
        &fx("fig1.old"),
        "--new",
        new.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("empty New"), "{err}");
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn diagnostics_are_one_line() {
    let bad = scratch_file("bad.old", "a b *zero\n");
    for args in [
        vec!["align", "--old", "/no/such/file", "--new", &fx("fig1.new")],
        vec![
            "align",
            "--old",
            bad.to_str().unwrap(),
            "--new",
            &fx("fig1.new"),
        ],
        vec![
            "align",
            "--old",
            &fx("fig1.old"),
            "--new",
            &fx("fig1.new"),
            "--beam",
            "0",
        ],
        vec![
            "setops",
            "--old",
            &fx("fig1.old"),
            "--new",
            &fx("fig1.new"),
            "--op",
            "xor",
        ],
    ] {
        let o = icmaus(&args);
        assert!(!o.status.success(), "{args:?}");
        assert_eq!(
            String::from_utf8_lossy(&o.stderr).lines().count(),
            1,
            "{args:?}"
        );
    }
}

#[test]
fn recast_reproduces_the_pattern_listing() {
    let out = stdout(&icmaus(&["recast", "--bnf", &fx("fig2.bnf")]));
    let strip = |t: &str| {
        t.split_whitespace()
            .filter(|w| *w != "|")
            .collect::<Vec<_>>()
            .join(" ")
    };
    assert_eq!(strip(&out), strip(&read_fixture("fig3.patterns")));
}

#[test]
fn retrieve_a_sentence() {
    let out = stdout(&icmaus(&[
        "retrieve",
        "--old",
        &fx("fig1.old"),
        "--code",
        "S N 0 #N V 1 #V #S",
    ]));
    let want = read_fixture("fig1.new");
    let got: Vec<&str> = out.split_whitespace().collect();
    let mut it = got.iter();
    assert!(
        want.split_whitespace().all(|w| it.any(|g| *g == w)),
        "{out}"
    );
}

#[test]
fn setops() {
    let old = scratch_file("set.old", "A\nB\nC\nE\nF\n");
    let new = scratch_file("set.new", "B\nC\nD\nF\nG\n");
    let bag = scratch_file("bag.new", "A\nB\nC\nD\nA\nD\nB\nA\nC\nC\nA\nC\n");
    let (o, n, b) = (
        old.to_str().unwrap(),
        new.to_str().unwrap(),
        bag.to_str().unwrap(),
    );
    assert_eq!(
        stdout(&icmaus(&[
            "setops", "--old", o, "--new", n, "--op", "union"
        ])),
        "A\nB\nC\nE\nF\nD\nG\n"
    );
    assert_eq!(
        stdout(&icmaus(&[
            "setops",
            "--old",
            o,
            "--new",
            n,
            "--op",
            "intersect"
        ])),
        "B\nC\nF\n"
    );
    assert_eq!(
        stdout(&icmaus(&[
            "setops", "--old", o, "--new", b, "--op", "toset"
        ])),
        "A *4\nB *2\nC *4\nD *2\n"
    );
}

#[test]
fn output_is_deterministic() {
    let args = [
        "align",
        "--old",
        &fx("fig6.old"),
        "--new",
        &fx("fig6.new"),
        "--top",
        "3",
    ];
    assert_eq!(stdout(&icmaus(&args)), stdout(&icmaus(&args)));
}
