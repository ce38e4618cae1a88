use std::path::Path;
use std::process::{Command, Output};

use mrfcs::io::{self, Container};

const SMALL: [&str; 6] = ["--size", "32", "--n-tr", "100", "--grid", "desk"];

fn mrfcs(args: &[&str], paths: &[&Path]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mrfcs"));
    cmd.env("MRFCS_THREADS", "2").args(args);
    for p in paths {
        cmd.arg(p);
    }
    cmd.output().unwrap()
}

fn ok(out: Output) -> String {
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(out.status.success(), "stdout: {stdout}\nstderr: {}", String::from_utf8_lossy(&out.stderr));
    stdout
}

fn run(args: &[&str], flag: &str, path: &Path) -> String {
    let mut all = args.to_vec();
    all.push(flag);
    ok(mrfcs(&all, &[path]))
}

#[test]
fn phantom_is_reproducible_byte_for_byte() {
    let d = tempfile::tempdir().unwrap();
    let (a, b) = (d.path().join("a.bin"), d.path().join("b.bin"));
    run(&["phantom", "--size", "64", "--seed", "7"], "--out", &a);
    run(&["phantom", "--size", "64", "--seed", "7"], "--out", &b);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let c = Container::read(&a).unwrap();
    assert_eq!(c.header.shape, vec![5, 64, 64]);
    assert_eq!(io::regenerate(&c).unwrap().to_bytes().unwrap(), std::fs::read(&a).unwrap());
}

#[test]
fn noiseless_cartesian_chain_is_exact() {
    let d = tempfile::tempdir().unwrap();
    let p = |n: &str| d.path().join(n);
    let cfg = [&SMALL[..], &["--trajectory", "cartesian", "--quantize"]].concat();

    run(&[&["dict"], &cfg[..]].concat(), "--out", &p("dict.bin"));
    run(&[&["acquire"], &cfg[..]].concat(), "--out", &p("k.bin"));
    ok(mrfcs(&["recon", "--in"], &[&p("k.bin"), Path::new("--out"), &p("series.bin")]));
    ok(mrfcs(
        &["match", "--in"],
        &[&p("series.bin"), Path::new("--dict"), &p("dict.bin"), Path::new("--out"), &p("maps.bin")],
    ));
    ok(mrfcs(
        &["synth", "--in"],
        &[&p("maps.bin"), Path::new("--out"), &p("synth.bin"), Path::new("--png-dir"), &p("png")],
    ));
    let table = ok(mrfcs(&["eval", "--pred"], &[&p("synth.bin"), Path::new("--report"), &p("report.json")]));
    assert!(table.contains("nRMSE"));

    // every foreground pixel of a series built from dictionary atoms matches with similarity 1
    let [t1, _, _, similarity] = io::read_maps(&Container::read(&p("maps.bin")).unwrap()).unwrap();
    let fg: Vec<f32> = t1.iter().zip(similarity.iter()).filter(|(t, _)| **t > 0.0).map(|(_, s)| *s as f32).collect();
    assert!(!fg.is_empty());
    assert!(fg.iter().all(|&s| (s - 1.0).abs() < 1e-5), "{:?}", fg.iter().cloned().fold(f32::INFINITY, f32::min));

    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p("report.json")).unwrap()).unwrap();
    let aggregate = report["report"]["aggregate"].as_object().unwrap();
    assert_eq!(aggregate.len(), 3);
    for (name, m) in aggregate {
        assert!(m["nrmse_percent"]["mean"].as_f64().unwrap() < 1.0, "{name}: {m}");
    }
    assert!(p("png").read_dir().unwrap().count() >= 3);

    for name in ["k.bin", "series.bin", "maps.bin", "synth.bin"] {
        let bytes = std::fs::read(p(name)).unwrap();
        let c = Container::from_bytes(&bytes).unwrap();
        assert_eq!(io::regenerate(&c).unwrap().to_bytes().unwrap(), bytes, "{name} does not regenerate");
    }
}

#[test]
fn exit_codes() {
    let out = mrfcs(&["--help"], &[]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(mrfcs(&["no-such-verb"], &[]).status.code(), Some(1));

    let d = tempfile::tempdir().unwrap();
    let missing = d.path().join("missing.bin");
    let out = mrfcs(&["recon", "--in"], &[&missing, Path::new("--out"), &d.path().join("x.bin")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());

    let garbage = d.path().join("garbage.bin");
    std::fs::write(&garbage, b"not a container").unwrap();
    let out = mrfcs(&["synth", "--in"], &[&garbage, Path::new("--out"), &d.path().join("y.bin")]);
    assert_eq!(out.status.code(), Some(1));

    let out = mrfcs(&["phantom", "--size", "4", "--out"], &[&d.path().join("p.bin")]);
    assert_eq!(out.status.code(), Some(1));
    let out = mrfcs(&["dict", "--grid", "huge", "--out"], &[&d.path().join("d.bin")]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn wrong_artifact_role_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    let phantom = d.path().join("p.bin");
    run(&["phantom", "--size", "32"], "--out", &phantom);
    let out = mrfcs(&["recon", "--in"], &[&phantom, Path::new("--out"), &d.path().join("s.bin")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("phantom"));
}

#[test]
fn export_dataset_splits_twenty_slices() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("ds");
    let args = ["export-dataset", "--size", "32", "--n-tr", "8", "--samples-per-tr", "128", "--slices", "20"];
    run(&args, "--out", &out);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("dataset.json")).unwrap()).unwrap();
    let len = |s: &str| manifest["splits"][s].as_array().unwrap().len();
    assert_eq!((len("train"), len("val"), len("test")), (16, 2, 2));
    let mrf = Container::read(&out.join("slice_0000/mrf.bin")).unwrap();
    assert_eq!(mrf.header.shape, vec![16, 32, 32]);
    let maps = Container::read(&out.join("slice_0019/maps.bin")).unwrap();
    assert_eq!(maps.header.shape, vec![4, 32, 32]);

    let bad = mrfcs(&["export-dataset", "--split", "0.5,0.5,0.5", "--slices", "2", "--out"], &[&d.path().join("x")]);
    assert_eq!(bad.status.code(), Some(1));
}
