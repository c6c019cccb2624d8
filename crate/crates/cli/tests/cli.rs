use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use wtx_cli::io::{read_cloud, read_dendrogram, read_distance, read_input, Input, InputKind};
use wtx_core::PointCloud;

fn wtx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wtx"))
        .args(args)
        .env_remove("WTX_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = wtx(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn gen_dataset_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    ok(&["gen-dataset", "--kind", "dumbbell", "--seed", "7", "--output", s(&a)]);
    ok(&["gen-dataset", "--kind", "dumbbell", "--seed", "7", "--output", s(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let stdout = ok(&["gen-dataset", "--kind", "dumbbell", "--seed", "7"]).stdout;
    assert_eq!(stdout, fs::read(&a).unwrap());
    let cloud = read_cloud(&a).unwrap();
    assert_eq!(cloud.len(), 230);
    let c = dir.path().join("c.csv");
    ok(&["gen-dataset", "--kind", "dumbbell", "--seed", "8", "--output", s(&c)]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
    let circle = dir.path().join("circle.csv");
    ok(&["gen-dataset", "--kind", "noisy-circle", "--scale", "desk", "--output", s(&circle)]);
    assert_eq!(read_cloud(&circle).unwrap().len(), 500);
}

#[test]
fn ot_between_diracs_prints_the_ground_distance() {
    let dir = tempfile::tempdir().unwrap();
    let ground = write(dir.path(), "d.csv", "0,2.5,1\n2.5,0,3\n1,3,0\n");
    let a = write(dir.path(), "a.csv", "1\n0\n0\n");
    let b = write(dir.path(), "b.csv", "1,1.0\n");
    for solver in ["exact", "sinkhorn"] {
        let out = ok(&["ot", "--mu", s(&a), "--nu", s(&b), "--ground", s(&ground), "--solver", solver]);
        let cost: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
        assert!((cost - 2.5).abs() < 1e-12, "{solver}: {cost}");
    }
    let line = write(dir.path(), "line.csv", "0\n0.3\n2\n");
    let out = ok(&["ot", "--mu", s(&a), "--nu", s(&b), "--ground", s(&line), "--solver", "one-dim", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["cost"].as_f64().unwrap() - 0.3).abs() < 1e-15);
}

#[test]
fn transform_outputs_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let pts: String = (0..12)
        .map(|i| format!("{},{}\n", (i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()))
        .collect();
    let input = write(dir.path(), "pts.csv", &pts);
    let out = dir.path().join("run");
    ok(&["transform", "--input", s(&input), "--epsilon", "0.8", "--iterations", "3", "--out-dir", s(&out)]);
    for k in 1..=3 {
        let d = read_distance(&out.join(format!("iter_{k}.csv"))).unwrap();
        assert_eq!(d.len(), 12);
    }
    let trace: serde_json::Value = serde_json::from_slice(&fs::read(out.join("trace.json")).unwrap()).unwrap();
    let recs = trace.as_array().unwrap();
    assert_eq!(recs.len(), 3);
    for (k, r) in recs.iter().enumerate() {
        assert_eq!(r["iteration"].as_u64().unwrap(), k as u64 + 1);
        for key in ["diameter", "epsilon_used", "solve_count", "wall_ms"] {
            assert!(r[key].is_number(), "{key}");
        }
    }

    // Feeding an iterate back in continues the iteration exactly.
    let again = dir.path().join("again");
    let first = out.join("iter_1.csv");
    ok(&["transform", "--input", s(&first), "--epsilon", "0.8", "--iterations", "2", "--out-dir", s(&again)]);
    assert_eq!(fs::read(again.join("iter_2.csv")).unwrap(), fs::read(out.join("iter_3.csv")).unwrap());

    let clusters = dir.path().join("clusters");
    let last = out.join("iter_3.csv");
    ok(&["cluster", "--input", s(&last), "--k", "2", "--out-dir", s(&clusters)]);
    let merges = read_dendrogram(&clusters.join("dendrogram.csv")).unwrap();
    assert_eq!(merges.len(), 11);
    assert!(merges.windows(2).all(|w| w[0][2] <= w[1][2]));
    let labels = fs::read_to_string(clusters.join("labels.csv")).unwrap();
    assert_eq!(labels.lines().count(), 12);

    let emb = dir.path().join("emb");
    ok(&["mds", "--input", s(&last), "--dim", "3", "--out-dir", s(&emb)]);
    match read_input(&emb.join("embedding.csv"), InputKind::Auto).unwrap() {
        Input::Points(c) => assert_eq!((c.len(), c.dim()), (12, 3)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn threads_do_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("pts.csv");
    ok(&["gen-dataset", "--kind", "noisy-circle", "--seed", "3", "--output", s(&input)]);
    let cloud = read_cloud(&input).unwrap();
    let small = PointCloud::from_rows(&cloud.points().take(40).map(<[f64]>::to_vec).collect::<Vec<_>>()).unwrap();
    let input = write(dir.path(), "small.csv", &wtx_cli::io::cloud_csv(&small));
    let run = |threads: &str, solver: &str| {
        let out = dir.path().join(format!("t{threads}-{solver}"));
        ok(&[
            "transform", "--input", s(&input), "--epsilon", "0.3", "--epsilon-mode", "relative",
            "--iterations", "2", "--solver", solver, "--threads", threads, "--out-dir", s(&out),
        ]);
        (1..=2).map(|k| fs::read(out.join(format!("iter_{k}.csv"))).unwrap()).collect::<Vec<_>>()
    };
    for solver in ["exact", "sinkhorn"] {
        assert_eq!(run("1", solver), run("4", solver), "{solver}");
    }
}

#[test]
fn meanshift_writes_clouds() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "pts.csv", "0,0,a\n0.1,0,a\n3,0,b\n3.2,0,b\n");
    let out = dir.path().join("ms");
    ok(&["meanshift", "--input", s(&input), "--epsilon", "0.5", "--iterations", "2", "--out-dir", s(&out)]);
    let c = read_cloud(&out.join("iter_2.csv")).unwrap();
    assert_eq!(c.labels().unwrap(), ["a", "a", "b", "b"]);
    assert!((c.point(0)[0] - 0.05).abs() < 1e-15 && (c.point(3)[0] - 3.1).abs() < 1e-15);
    let trace: serde_json::Value = serde_json::from_slice(&fs::read(out.join("trace.json")).unwrap()).unwrap();
    assert_eq!(trace.as_array().unwrap().len(), 2);
}

#[test]
fn verify_stability_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    ok(&["verify-stability", "--trials", "20", "--seed", "1", "--n-points", "6", "--output", s(&out)]);
    let v: serde_json::Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(v["violations"].as_u64(), Some(0));
    assert_eq!(v["checks"].as_array().unwrap().len(), 6);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let d = write(dir.path(), "d.csv", "0,1\n1,0\n");

    let usage = |args: &[&str]| {
        let o = wtx(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty());
    };
    usage(&[]);
    usage(&["transform", "--input", s(&d), "--out-dir", s(&out)]);
    usage(&["transform", "--input", s(&d), "--epsilon", "0.5", "--out-dir", s(&out), "--bogus"]);
    usage(&["transform", "--input", s(&d), "--epsilon", "0.5", "--localization", "meanshift", "--out-dir", s(&out)]);
    usage(&["transform", "--input", s(&d), "--epsilon", "-1", "--out-dir", s(&out)]);
    usage(&["transform", "--input", s(&d), "--epsilon", "2", "--epsilon-mode", "relative", "--out-dir", s(&out)]);
    usage(&["transform", "--input", s(&d), "--epsilon", "0.5", "--sinkhorn-reg", "0.1", "--out-dir", s(&out)]);
    usage(&["transform", "--input", s(&d), "--epsilon", "0.5", "--threads", "0", "--out-dir", s(&out)]);
    usage(&["meanshift", "--input", s(&d), "--epsilon", "0.5", "--out-dir", s(&out)]);
    assert!(!out.exists(), "nothing is written on usage errors");

    let missing = dir.path().join("nope.csv");
    let o = wtx(&["transform", "--input", s(&missing), "--epsilon", "0.5", "--out-dir", s(&out)]);
    assert_eq!(o.status.code(), Some(1));

    let bad = write(dir.path(), "bad.csv", "0,1,2\n1,0,1\n2,1\n");
    let o = wtx(&["cluster", "--input", s(&bad), "--out-dir", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&o.stderr);
    assert!(msg.contains("line 3"), "{msg}");

    let asym = write(dir.path(), "asym.csv", "0,1,5\n1,0,1\n5,1,0\n");
    let o = wtx(&["transform", "--input", s(&asym), "--epsilon", "0.5", "--out-dir", s(&out)]);
    assert_eq!(o.status.code(), Some(1), "triangle violation rejected");

    assert_eq!(wtx(&["--help"]).status.code(), Some(0));
}
