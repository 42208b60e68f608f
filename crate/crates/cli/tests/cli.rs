use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hsaw(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hsaw")).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = hsaw(dir, args);
    assert_eq!(o.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

const QUICK: &str = "# tiny run\nheight = 16\nwidth = 16\nframes_per_segment = 8\nepisode_frames = 6\nepochs = 1\nsom_rows = 2\nsom_cols = 2\nsom_epochs = 5\n";

#[test]
fn synth_writes_a_128_frame_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(tmp.path(), &["synth", "--scenario", "1", "--laps", "1", "--frames-per-segment", "16", "--seed", "7", "--out", "d1"]);
    assert!(out.contains("128 frames"), "{out}");
    let ds = hsaw::store::load_dataset(&tmp.path().join("d1")).unwrap();
    assert_eq!(ds.len(), 128);
    assert_eq!(ds.manifest.seed, 7);
}

#[test]
fn usage_errors_exit_1_and_runtime_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hsaw(tmp.path(), &["synth", "--out", "d", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(hsaw(tmp.path(), &["fly"]).status.code(), Some(1));
    fs::write(tmp.path().join("bad.cfg"), "speed = 3\n").unwrap();
    assert_eq!(hsaw(tmp.path(), &["--config", "bad.cfg", "synth", "--out", "d"]).status.code(), Some(1));
    assert_eq!(hsaw(tmp.path(), &["synth", "--scenario", "3", "--out", "d"]).status.code(), Some(1));
    let o = hsaw(tmp.path(), &["detect", "--model", "none", "--data", "none", "--out", "s.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(hsaw(tmp.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn gradcheck_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(tmp.path(), &["gradcheck", "--seeds", "2"]);
    assert!(out.contains(" 0 failed"), "{out}");
}

#[test]
fn pipeline_runs_end_to_end_and_reproduces_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("quick.cfg"), QUICK).unwrap();
    let run = |tag: &str| {
        let p = |s: &str| format!("{tag}{s}");
        fn with<'a>(rest: &[&'a str]) -> Vec<&'a str> {
            [&["--config", "quick.cfg", "--seed", "5"][..], rest].concat()
        }
        ok(d, &with(&["synth", "--scenario", "1", "--out", &p("d1")]));
        ok(d, &with(&["synth", "--scenario", "2", "--out", &p("d2")]));
        ok(d, &with(&["train-base", "--data", &p("d1"), "--out", &p("base")]));
        ok(d, &with(&["build", "--data", &p("d1"), "--theta", "auto:0", "--max-levels", "2", "--out", &p("model")]));
        ok(d, &with(&["detect", "--model", &p("model"), "--data", &p("d2"), "--out", &p("s.csv")]));
        ok(d, &with(&["evaluate", "--signal", &p("s.csv"), "--data", &p("d2"), "--out", &p("rpt")]));
        ok(d, &with(&["compare", "--train", &p("d1"), "--test", &p("d2"), "--out", &p("cmp")]));
    };
    run("a_");
    run("b_");
    for f in ["roc.csv", "metrics.json", "roc.svg"] {
        assert!(d.join("a_rpt").join(f).is_file(), "{f}");
    }
    let base = hsaw::store::load_model(&d.join("a_base")).unwrap();
    assert_eq!(base.levels.len(), 1);
    let metrics: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("a_cmp/metrics.json")).unwrap()).unwrap();
    assert!(metrics["hierarchy"]["auc"].is_number());
    for entry in walk(&d.join("a_model")).into_iter().chain(walk(&d.join("a_cmp"))).chain(walk(&d.join("a_d2"))) {
        let rel = entry.strip_prefix(d).unwrap().to_string_lossy().replacen("a_", "b_", 1);
        assert_eq!(fs::read(&entry).unwrap(), fs::read(d.join(rel)).unwrap(), "{}", entry.display());
    }
    assert_eq!(fs::read(d.join("a_s.csv")).unwrap(), fs::read(d.join("b_s.csv")).unwrap());
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}
