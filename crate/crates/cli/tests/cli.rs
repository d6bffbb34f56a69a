use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pointmatch"));
    cmd.env("SOURCE_DATE_EPOCH", "0").env_remove("RUST_LOG");
    cmd
}

fn run(args: &[&str], stdin: Option<&[u8]>) -> Output {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut pipe = child.stdin.take().unwrap();
    if let Some(bytes) = stdin {
        // the child may exit on bad flags before reading stdin
        if let Err(e) = pipe.write_all(bytes) {
            assert_eq!(e.kind(), std::io::ErrorKind::BrokenPipe, "{e}");
        }
    }
    drop(pipe);
    child.wait_with_output().unwrap()
}

fn ok(args: &[&str], stdin: Option<&[u8]>) -> Vec<u8> {
    let out = run(args, stdin);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn figure3_files(dir: &Path) -> (PathBuf, PathBuf) {
    ok(&["synth", "--fixture", "figure3", "--out-dir", dir.to_str().unwrap()], None);
    (dir.join("gt.csv"), dir.join("pred.csv"))
}

fn macro_f1(args: &[&str], stdin: Option<&[u8]>) -> f64 {
    let mut full = args.to_vec();
    full.extend(["--format", "json"]);
    json(&ok(&full, stdin))["macro_f1"].as_f64().unwrap()
}

#[test]
fn figure3_protocols_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let (gt, pred) = figure3_files(dir.path());
    let (gt, pred) = (gt.to_str().unwrap(), pred.to_str().unwrap());
    let base = ["evaluate", "--gt", gt, "--pred", pred, "--radius", "6"];
    for (protocol, want) in [("matched", 0.5), ("raw-hungarian", 0.0), ("greedy", 0.5)] {
        let mut args = base.to_vec();
        args.extend(["--protocol", protocol]);
        assert_eq!(macro_f1(&args, None), want, "{protocol}");
    }
}

#[test]
fn synth_pipes_into_evaluate() {
    let bundle = ok(&["synth", "--fixture", "figure3"], None);
    assert_eq!(macro_f1(&["evaluate", "--radius", "6", "--protocol", "matched"], Some(&bundle)), 0.5);
    assert_eq!(macro_f1(&["evaluate", "--protocol", "raw-hungarian"], Some(&bundle)), 0.0);
}

#[test]
fn eval_json_shape() {
    let bundle = ok(&["synth", "--fixture", "figure3"], None);
    let v = json(&ok(&["evaluate", "--format", "json", "--classes", "pos"], Some(&bundle)));
    assert_eq!(v["protocol"], "matched");
    let c = &v["per_class"][0];
    assert_eq!((c["class_id"].as_u64(), c["name"].as_str()), (Some(1), Some("pos")));
    assert_eq!((c["tp"].as_u64(), c["fp"].as_u64(), c["fn"].as_u64()), (Some(1), Some(1), Some(1)));
    assert_eq!(v["manifest"]["config"]["radius"], 6.0);
    assert_eq!(v["manifest"]["timestamp"], "1970-01-01T00:00:00Z");
    assert!(v["manifest"]["input_digests"]["bundle"].as_str().unwrap().starts_with("sha256:"));
}

#[test]
fn compare_reports_deltas() {
    let bundle = ok(&["synth", "--fixture", "figure3"], None);
    let v = json(&ok(&["compare", "--format", "json"], Some(&bundle)));
    let rows = v["rows"].as_array().unwrap();
    let row = |name: &str| rows.iter().find(|r| r["protocol"] == name).unwrap();
    assert_eq!(row("matched")["macro_f1"], 0.5);
    assert_eq!(row("raw-hungarian")["macro_delta_pct"], -100.0);
    assert_eq!(row("greedy")["macro_delta_pct"], 0.0);
    let table = String::from_utf8(ok(&["compare"], Some(&bundle))).unwrap();
    let raw_line = table.lines().find(|l| l.starts_with("raw-hungarian")).unwrap();
    assert!(raw_line.contains("-100.00%"), "{table}");
}

#[test]
fn compare_perfect_predictions_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let pts = write(dir.path(), "pts.csv", "image_id,x,y,class_id\na,1,1,1\na,20,20,2\nb,5,5,1\n");
    let p = pts.to_str().unwrap();
    let v = json(&ok(&["compare", "--gt", p, "--pred", p, "--format", "json"], None));
    for row in v["rows"].as_array().unwrap() {
        assert_eq!(row["macro_f1"], 1.0);
        assert_eq!(row["macro_delta_pct"], 0.0);
    }
}

#[test]
fn compare_on_synthetic_data_respects_dominance() {
    let bundle = ok(&["synth", "--seed", "3", "--jitter", "2", "--drop", "0.1", "--spurious", "3", "--images", "4"], None);
    let v = json(&ok(&["compare", "--format", "json", "--jobs", "3"], Some(&bundle)));
    let rows = v["rows"].as_array().unwrap();
    for (row, sign) in [(&rows[1], -1.0), (&rows[2], 1.0)] {
        for c in row["per_class"].as_array().unwrap() {
            if let Some(d) = c["delta_pct"].as_f64() {
                assert!(sign * d >= 0.0, "{row}");
            }
        }
    }
}

#[test]
fn jobs_do_not_change_output() {
    let bundle = ok(&["synth", "--seed", "11", "--images", "9", "--jitter", "3"], None);
    let one = ok(&["evaluate", "--jobs", "1", "--format", "csv"], Some(&bundle));
    let many = ok(&["evaluate", "--jobs", "4", "--format", "csv"], Some(&bundle));
    assert_eq!(one, many);
}

#[test]
fn csv_report_has_leading_manifest() {
    let bundle = ok(&["synth", "--fixture", "figure3"], None);
    let text = String::from_utf8(ok(&["evaluate", "--format", "csv"], Some(&bundle))).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# tool_version"));
    assert!(text.contains("\nclass_id,name,tp,fp,fn,f1\n1,,1,1,1,0.5\n"), "{text}");
}

#[test]
fn output_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = ok(&["synth", "--fixture", "figure3"], None);
    let out = dir.path().join("report.json");
    let stdout = ok(&["evaluate", "--format", "json", "--output", out.to_str().unwrap()], Some(&bundle));
    assert!(stdout.is_empty());
    assert_eq!(json(&std::fs::read(out).unwrap())["macro_f1"], 0.5);
}

#[test]
fn exit_status_contract() {
    let dir = tempfile::tempdir().unwrap();
    let (gt, pred) = figure3_files(dir.path());
    let (gt, pred) = (gt.to_str().unwrap(), pred.to_str().unwrap());
    let status = |args: &[&str]| run(args, None).status.code().unwrap();

    assert_eq!(status(&["evaluate", "--gt", gt, "--pred", pred]), 0);
    assert_eq!(status(&["evaluate", "--gt", gt, "--pred", pred, "--protocol", "nearest"]), 3);
    assert_eq!(status(&["evaluate", "--gt", gt, "--pred", pred, "--radius", "0"]), 3);
    assert_eq!(status(&["evaluate", "--gt", gt, "--pred", pred, "--radius", "-2"]), 3);
    assert_eq!(status(&["evaluate", "--gt", gt, "--pred", pred, "--format", "xml"]), 3);
    assert_eq!(status(&["evaluate", "--gt", gt]), 3);
    assert_eq!(status(&["evaluate", "--bogus-flag"]), 3);
    assert_eq!(status(&["synth", "--drop", "1.5"]), 3);
    assert_eq!(status(&["synth", "--fixture", "figure9"]), 3);

    let bad = write(dir.path(), "bad.csv", "image_id,x,y,class_id\na,1,1,1\na,2,2,0\n");
    let out = run(&["evaluate", "--gt", bad.to_str().unwrap(), "--pred", pred], None);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("class_id must be ≥ 1") && err.contains("line 3"), "{err}");

    let garbled = write(dir.path(), "garbled.csv", "image_id,x,y,class_id\na,one,1,1\n");
    assert_eq!(status(&["evaluate", "--gt", garbled.to_str().unwrap(), "--pred", pred]), 2);
    let missing = dir.path().join("absent.csv");
    assert_eq!(status(&["evaluate", "--gt", missing.to_str().unwrap(), "--pred", pred]), 2);
    assert_eq!(run(&["evaluate"], Some(b"{not json")).status.code(), Some(2));
    assert_eq!(status(&["evaluate", "--help"]), 0);
}

#[test]
fn every_subcommand_has_help() {
    for sub in ["evaluate", "compare", "match", "synth"] {
        let out = ok(&[sub, "--help"], None);
        assert!(String::from_utf8(out).unwrap().contains("Usage"));
    }
}

#[test]
fn synth_is_deterministic() {
    let a = ok(&["synth", "--seed", "7"], None);
    let b = ok(&["synth", "--seed", "7"], None);
    assert_eq!(a, b);
    assert_ne!(a, ok(&["synth", "--seed", "8"], None));

    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&d1, &d2] {
        ok(&["synth", "--seed", "7", "--images", "3", "--out-dir", d.path().to_str().unwrap()], None);
    }
    for name in ["gt.csv", "pred.csv", "model.json"] {
        assert_eq!(std::fs::read(d1.path().join(name)).unwrap(), std::fs::read(d2.path().join(name)).unwrap());
    }
}

#[test]
fn zero_density_gives_header_only() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["synth", "--density", "0", "--out-dir", dir.path().to_str().unwrap()], None);
    assert_eq!(std::fs::read_to_string(dir.path().join("gt.csv")).unwrap(), "image_id,x,y,class_id\n");
}

#[test]
fn synth_json_files_round_trip_through_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    ok(&["synth", "--seed", "5", "--format", "json", "--out-dir", d], None);
    let gt = dir.path().join("gt.json");
    let f1 = macro_f1(&["evaluate", "--gt", gt.to_str().unwrap(), "--pred", gt.to_str().unwrap()], None);
    assert_eq!(f1, 1.0);
}

fn match_files(dir: &Path) -> (PathBuf, PathBuf) {
    let gt = write(dir, "gt.csv", "image_id,x,y,class_id\na,10,10,1\n");
    let pred = write(
        dir,
        "pred.csv",
        "image_id,x,y,class_id,conf_bg,conf_1\na,11,10,1,0.2,0.8\na,13,10,1,0.4,0.6\na,30,30,1,0.9,0.1\n",
    );
    (gt, pred)
}

#[test]
fn match_beta_controls_one_to_many() {
    let dir = tempfile::tempdir().unwrap();
    let (gt, pred) = match_files(dir.path());
    let (gt, pred) = (gt.to_str().unwrap(), pred.to_str().unwrap());
    let pairs = |beta: &str| {
        let v = json(&ok(&["match", "--gt", gt, "--pred", pred, "--beta", beta, "--format", "json"], None));
        let img = &v["images"][0];
        (
            img["one2one"]["pairs"].as_array().unwrap().len(),
            img["one2many"]["pairs"].as_array().unwrap().len(),
        )
    };
    assert_eq!(pairs("1"), (1, 1));
    assert_eq!(pairs("2"), (1, 2));
}

#[test]
fn match_echoes_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let (gt, pred) = match_files(dir.path());
    let v = json(&ok(&["match", "--gt", gt.to_str().unwrap(), "--pred", pred.to_str().unwrap(), "--format", "json"], None));
    let cfg = &v["manifest"]["config"];
    assert_eq!(cfg["tau"], 0.05);
    assert_eq!(cfg["beta"], 2);
    assert_eq!(cfg["class_weights"], serde_json::json!([0.5, 10.0]));
    assert_eq!(cfg["reg_weight"], 2e-3);
    assert_eq!(cfg["one2many_weight"], 0.5);
    let pair = &v["images"][0]["one2one"]["pairs"][0];
    assert_eq!((pair["gt"].as_u64(), pair["pred"].as_u64()), (Some(0), Some(0)));
    assert_eq!(pair["distance"], 1.0);
    assert!((pair["cost"].as_f64().unwrap() - (0.05 - 0.8)).abs() < 1e-12);
    assert_eq!(v["images"][0]["one2many"]["negatives"], serde_json::json!([2]));
}

#[test]
fn match_tau_zero_follows_confidence() {
    let dir = tempfile::tempdir().unwrap();
    let gt = write(dir.path(), "gt.csv", "image_id,x,y,class_id\na,0,0,1\n");
    let pred = write(dir.path(), "pred.csv", "image_id,x,y,class_id,confidence\na,0,0,1,0.5\na,50,50,1,0.9\n");
    let v = json(&ok(
        &["match", "--gt", gt.to_str().unwrap(), "--pred", pred.to_str().unwrap(), "--tau", "0", "--beta", "1", "--format", "json"],
        None,
    ));
    assert_eq!(v["images"][0]["one2one"]["pairs"][0]["pred"], 1);
}

#[test]
fn match_needs_enough_proposals() {
    let dir = tempfile::tempdir().unwrap();
    let gt = write(dir.path(), "gt.csv", "image_id,x,y,class_id\na,0,0,1\na,5,5,1\n");
    let pred = write(dir.path(), "pred.csv", "image_id,x,y,class_id,conf_bg,conf_1\na,0,0,1,0.1,0.9\n");
    let out = run(&["match", "--gt", gt.to_str().unwrap(), "--pred", pred.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(3));
}
