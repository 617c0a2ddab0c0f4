use std::path::Path;
use std::process::{Command, Output};

fn nsdvpr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsdvpr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = nsdvpr(args);
    assert!(
        out.status.success(),
        "nsdvpr {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_match_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&[
        "synth",
        "--out",
        s(d),
        "--places",
        "80",
        "--dim",
        "16",
        "--seed",
        "4",
        "--scale-min",
        "0.5",
        "--scale-max",
        "2",
        "--offset-sigma",
        "1",
    ]);
    for f in [
        "reference.bin",
        "reference_cr.bin",
        "reference_traverse.csv",
        "query.bin",
        "query_cr.bin",
        "query_traverse.csv",
        "ground_truth.csv",
        "manifest.txt",
    ] {
        assert!(d.join(f).exists(), "{f} missing");
    }
    assert!(read(&d.join("manifest.txt")).contains("seed = 4"));

    let matches = d.join("matches.csv");
    ok(&[
        "match",
        "--reference",
        s(&d.join("reference.bin")),
        "--query",
        s(&d.join("query.bin")),
        "--seq-len-m",
        "20",
        "--out",
        s(&matches),
    ]);
    let text = read(&matches);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("query_index,best_reference,seq_cost,uniqueness")
    );
    assert_eq!(lines.count(), 80);
    let manifest = read(&d.join("matches.manifest.txt"));
    assert!(manifest.contains("mode = nsd"));
    assert!(manifest.contains("seq_len_frames = 10"));

    let pr = d.join("pr.csv");
    let summary = ok(&[
        "eval",
        "--matches",
        s(&matches),
        "--gt",
        s(&d.join("ground_truth.csv")),
        "--seq-len-m",
        "20",
        "--out",
        s(&pr),
    ]);
    assert!(summary.starts_with("max_f1=1 "), "{summary}");
    assert!(read(&pr).starts_with("threshold,precision,recall,f1\n"));

    // traverse-based ground truth gives the same answer
    let summary = ok(&[
        "eval",
        "--matches",
        s(&matches),
        "--query-traverse",
        s(&d.join("query_traverse.csv")),
        "--reference-traverse",
        s(&d.join("reference_traverse.csv")),
        "--seq-len-m",
        "20",
        "--out",
        s(&pr),
    ]);
    assert!(summary.starts_with("max_f1=1 "), "{summary}");
}

#[test]
fn reverse_world_through_composite_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&[
        "synth",
        "--out",
        s(d),
        "--places",
        "60",
        "--dim",
        "12",
        "--reverse",
    ]);
    let matches = d.join("m.csv");
    ok(&[
        "match",
        "--reference",
        s(&d.join("reference_cr.bin")),
        "--query",
        s(&d.join("query_cr.bin")),
        "--mode",
        "nsd_cr",
        "--reverse-reference",
        "--seq-len-m",
        "10",
        "--out",
        s(&matches),
    ]);
    let summary = ok(&[
        "eval",
        "--matches",
        s(&matches),
        "--gt",
        s(&d.join("ground_truth.csv")),
        "--seq-len-m",
        "10",
        "--out",
        s(&d.join("pr.csv")),
    ]);
    assert!(summary.starts_with("max_f1=1 "), "{summary}");
}

#[test]
fn sweep_and_viz_write_their_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&[
        "synth",
        "--out",
        s(d),
        "--places",
        "60",
        "--dim",
        "8",
        "--noise-sigma",
        "0.5",
    ]);
    let sweep = d.join("sweep.csv");
    ok(&[
        "sweep",
        "--reference",
        s(&d.join("reference.bin")),
        "--query",
        s(&d.join("query.bin")),
        "--gt",
        s(&d.join("ground_truth.csv")),
        "--lengths-m",
        "4,10,20",
        "--out",
        s(&sweep),
    ]);
    let text = read(&sweep);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "seq_len_m,seq_len_frames,max_f1");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("4,2,"));

    let raw = d.join("raw.csv");
    let norm = d.join("norm.csv");
    ok(&[
        "viz",
        "--input",
        s(&d.join("query.bin")),
        "--out",
        s(&raw),
        "--normalized-out",
        s(&norm),
    ]);
    for p in [&raw, &norm] {
        let text = read(p);
        assert!(text.starts_with("index,pc1,pc2\n"));
        assert_eq!(text.lines().count(), 61);
    }
}

#[test]
fn errors_go_to_stderr_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let bogus = d.join("bogus.bin");
    std::fs::write(&bogus, b"definitely not descriptors").unwrap();
    let out = nsdvpr(&[
        "match",
        "--reference",
        s(&bogus),
        "--query",
        s(&bogus),
        "--out",
        s(&d.join("m.csv")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("not a descriptor file"));
    assert!(out.stdout.is_empty());

    // every query is inside the warm-up, so nothing can be scored
    ok(&["synth", "--out", s(d), "--places", "10", "--dim", "4"]);
    let matches = d.join("m.csv");
    ok(&[
        "match",
        "--reference",
        s(&d.join("reference.bin")),
        "--query",
        s(&d.join("query.bin")),
        "--seq-len-m",
        "40",
        "--out",
        s(&matches),
    ]);
    let out = nsdvpr(&[
        "eval",
        "--matches",
        s(&matches),
        "--gt",
        s(&d.join("ground_truth.csv")),
        "--seq-len-m",
        "40",
        "--out",
        s(&d.join("pr.csv")),
    ]);
    assert!(!out.status.success());
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn segmented_mode_reads_segments_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["synth", "--out", s(d), "--places", "40", "--dim", "8"]);
    let segs = d.join("segments.csv");
    std::fs::write(
        &segs,
        "side,start,end\nreference,0,20\nreference,20,40\nquery,0,20\nquery,20,40\n",
    )
    .unwrap();
    ok(&[
        "match",
        "--reference",
        s(&d.join("reference.bin")),
        "--query",
        s(&d.join("query.bin")),
        "--mode",
        "nsd_segmented",
        "--segments",
        s(&segs),
        "--seq-len-m",
        "10",
        "--out",
        s(&d.join("m.csv")),
    ]);
    std::fs::write(&segs, "side,start,end\nquery,0,50\n").unwrap();
    let out = nsdvpr(&[
        "match",
        "--reference",
        s(&d.join("reference.bin")),
        "--query",
        s(&d.join("query.bin")),
        "--mode",
        "nsd_segmented",
        "--segments",
        s(&segs),
        "--out",
        s(&d.join("m.csv")),
    ]);
    assert!(!out.status.success());
}
