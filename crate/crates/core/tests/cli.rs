//! Exit codes and output of the `ttdreach` binary, plus the text format
//! round trip.

use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;

use ttdreach::frontend::{emit_tts, generate_random_ttd, parse_tts, TtsDocument};

const RUNNING_EXAMPLE: &str = "\
4 4
0 0 -> 1 1
1 0 -> 2 1
2 1 -> 2 2
2 2 -> 1 3
2 2 -> 3 1
3 3 -> 2 2
target 3 3
";

fn ttdreach(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ttdreach"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn reachable_exits_one_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "fig.tts", RUNNING_EXAMPLE);
    let o = ttdreach(&["check", &f, "--witness"]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.starts_with("reachable\n"), "{out}");
    assert!(out.contains("-->") || out.contains("--("), "{out}");
}

#[test]
fn unreachable_exits_zero_in_every_mode() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "fig.tts", RUNNING_EXAMPLE);
    for mode in ["symbolic", "bws", "compare"] {
        let o = ttdreach(&["check", &f, "--target", "0,2", "--mode", mode]);
        assert_eq!(o.status.code(), Some(0), "mode {mode}");
        assert_eq!(stdout(&o).lines().next(), Some("unreachable"));
    }
}

#[test]
fn bws_mode_reports_the_minimal_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "fig.tts", RUNNING_EXAMPLE);
    let o = ttdreach(&["check", &f, "--mode", "bws"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("minimal initial state: shared 0 counts [3, 0, 0, 0]"));
}

#[test]
fn emit_smt_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "fig.tts", RUNNING_EXAMPLE);
    let smt = dir.path().join("smt");
    let o = ttdreach(&["check", &f, "--emit-smt", smt.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let files: Vec<_> = std::fs::read_dir(&smt).unwrap().collect();
    assert!(!files.is_empty());
}

#[test]
fn bad_input_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "bad.tts", "2 2\n0 0 -> 5 0\ntarget 1 1\n");
    assert_eq!(ttdreach(&["check", &f]).status.code(), Some(3));
    let g = write(dir.path(), "junk.tts", "2 2\nfoo\n");
    assert_eq!(ttdreach(&["check", &g]).status.code(), Some(3));
    let missing = dir.path().join("missing.tts");
    assert_eq!(
        ttdreach(&["check", missing.to_str().unwrap()]).status.code(),
        Some(3)
    );
    let h = write(dir.path(), "degenerate.tts", "2 2\n0 0 -> 1 1\ntarget 0 0\n");
    assert_eq!(ttdreach(&["check", &h]).status.code(), Some(3));
}

#[test]
fn gen_output_parses_back() {
    let o = ttdreach(&["gen", "--seed", "7", "--shared", "3", "--local", "3", "--edges", "6"]);
    assert_eq!(o.status.code(), Some(0));
    let ttd = parse_tts(&stdout(&o)).unwrap();
    assert_eq!(ttd, generate_random_ttd(7, 3, 3, 6).unwrap());
    let o = ttdreach(&["gen", "--seed", "7", "--shared", "1", "--local", "1", "--edges", "1"]);
    assert_eq!(o.status.code(), Some(3));
}

proptest! {
    #[test]
    fn emit_then_parse_is_identity(
        seed in any::<u64>(),
        ns in 1..=5u32,
        nl in 1..=5u32,
        edges in 1..=12usize,
    ) {
        let Ok(ttd) = generate_random_ttd(seed, ns, nl, edges) else { return Ok(()) };
        let text = emit_tts(&ttd);
        prop_assert_eq!(parse_tts(&text).unwrap(), ttd);
        let doc = TtsDocument::parse(&text).unwrap();
        prop_assert_eq!(doc.emit(), text);
    }
}
