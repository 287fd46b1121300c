use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn framefill(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_framefill"))
        .current_dir(dir)
        .env_remove("FRAMEFILL_SEED")
        .env_remove("FRAMEFILL_BEAM")
        .arg("--data-dir")
        .arg(data_dir())
        .arg("--model")
        .arg(dir.join("model.ngram"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Vec<u8> {
    let out = framefill(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn trained() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["train-lm"]);
    dir
}

const DANCE: &str = "I went to a dance party. I danced terribly and broke a friend's toe. [blank] I felt terrible. We are still friends.";

#[test]
fn request_frame_is_honoured() {
    let dir = trained();
    let out = ok(
        dir.path(),
        &[
            "--json",
            "infill",
            DANCE,
            "--frames",
            "[Request]",
            "--ordered",
        ],
    );
    let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
    let blank = &v["blanks"][0];
    assert_eq!(blank["position"], 2);
    let lus = [
        "ask", "asked", "request", "beg", "begged", "plead", "order", "urge", "call", "called",
    ];
    for c in blank["candidates"].as_array().unwrap() {
        let text = c["text"].as_str().unwrap().to_lowercase();
        assert!(
            text.split(|ch: char| !ch.is_alphabetic())
                .any(|w| lus.contains(&w)),
            "{text}"
        );
    }
}

#[test]
fn unknown_frame_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = framefill(
        dir.path(),
        &["infill", "A. [blank]", "--frames", "[Not_a_frame]"],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.contains("[Not_a_frame]"));
}

#[test]
fn other_failures_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    // no model trained yet
    let out = framefill(dir.path(), &["suggest", "A. [blank]"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("train-lm"));
    let out = framefill(dir.path(), &["--json", "prepare", "--variants", "Q"]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"]["message"].as_str().unwrap().contains("Q"));
}

#[test]
fn flags_beat_env_beat_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("framefill.toml");
    std::fs::write(&cfg, "seed = 1\n").unwrap();
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_framefill"));
        cmd.arg("--config")
            .arg(&cfg)
            .arg("--data-dir")
            .arg(data_dir());
        cmd.args(["prepare", "--variants", "M"]);
        if let Some(s) = flag {
            cmd.args(["--seed", s]);
        }
        match env {
            Some(s) => cmd.env("FRAMEFILL_SEED", s),
            None => cmd.env_remove("FRAMEFILL_SEED"),
        };
        cmd.output().unwrap().stdout
    };
    let seeded = |s: &str| run(None, Some(s));
    assert_eq!(run(None, None), seeded("1"));
    assert_eq!(run(Some("5"), None), seeded("5"));
    assert_eq!(run(Some("5"), Some("9")), seeded("9"));
    assert_ne!(seeded("1"), seeded("5"));
}

#[test]
fn every_stage_is_reproducible() {
    let runs: Vec<Vec<Vec<u8>>> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let d = dir.path();
            let p = |name: &str| d.join(name).to_str().unwrap().to_string();
            let mut outputs = Vec::new();
            outputs.push(ok(
                d,
                &[
                    "--seed",
                    "3",
                    "prepare",
                    "--variants",
                    "ILM,S,M:ordered,A",
                    "--blanks",
                    "each",
                    "--slice-context",
                    "--slots",
                    "5",
                ],
            ));
            ok(
                d,
                &[
                    "--seed",
                    "3",
                    "prepare",
                    "--variants",
                    "ILM,A,A:ordered",
                    "--blanks",
                    "each",
                    "--out",
                    &p("train.jsonl"),
                ],
            );
            outputs.push(std::fs::read(d.join("train.jsonl")).unwrap());
            outputs.push(ok(
                d,
                &["train-bpe", "--merges", "200", "--out-dir", &p("bpe")],
            ));
            for f in ["vocab.json", "merges.txt", "specials.json"] {
                outputs.push(std::fs::read(d.join("bpe").join(f)).unwrap());
            }
            ok(d, &["train-lm", "--input", &p("train.jsonl")]);
            outputs.push(std::fs::read(d.join("model.ngram")).unwrap());
            outputs.push(ok(
                d,
                &[
                    "--json",
                    "infill",
                    "Charles went shopping. [blank] Then he left.",
                    "--frames",
                    "[Commerce_buy] [Food]",
                ],
            ));
            outputs.push(ok(
                d,
                &["infill", DANCE, "--frames", "[Request]", "--diversify", "4"],
            ));
            outputs.push(ok(
                d,
                &[
                    "--seed",
                    "3",
                    "--json",
                    "eval-fidelity",
                    "--limit",
                    "10",
                    "--targets",
                    "1",
                ],
            ));
            outputs.push(ok(
                d,
                &[
                    "--seed",
                    "3",
                    "eval-ppl",
                    "--limit",
                    "60",
                    "--variant",
                    "M",
                    "--ordered",
                ],
            ));
            outputs.push(ok(
                d,
                &[
                    "suggest",
                    "Alice went to the grocery store. [blank]",
                    "-k",
                    "4",
                ],
            ));
            outputs
        })
        .collect();
    for (i, (a, b)) in runs[0].iter().zip(&runs[1]).enumerate() {
        assert!(!a.is_empty(), "stage {i} produced nothing");
        assert!(a == b, "stage {i} differs between runs");
    }
}
