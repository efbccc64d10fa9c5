use std::path::Path;
use std::process::{Command, Output};

fn plfc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plfc"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn plfc")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = plfc(dir, args);
    assert!(
        out.status.success(),
        "plfc {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn simulated(dir: &Path) {
    ok(
        dir,
        &["simulate", "--model", "2", "--sigma", "1", "--n-curves", "40", "--seed", "11", "--out", "curves.csv", "--truth", "truth.csv"],
    );
}

#[test]
fn malformed_csv_exits_2_with_row() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "curve_id,x,y\na,0,1\na,oops,2\n").unwrap();
    let out = plfc(dir.path(), &["segment", "--input", "bad.csv", "--out", "s.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("row 3"), "{msg}");
    assert!(msg.starts_with("plfc segment:"), "{msg}");
}

#[test]
fn kmax_zero_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    simulated(dir.path());
    let out = plfc(dir.path(), &["segment", "--input", "curves.csv", "--kmax", "0", "--out", "s.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("k_max"));
    assert!(!dir.path().join("s.csv").exists());
}

#[test]
fn seed_is_required_for_simulate_and_bench() {
    let dir = tempfile::tempdir().unwrap();
    let sim = plfc(dir.path(), &["simulate", "--model", "1", "--sigma", "1", "--out", "c.csv"]);
    assert_eq!(sim.status.code(), Some(2));
    let bench = plfc(dir.path(), &["bench", "ari", "--reps", "1"]);
    assert_eq!(bench.status.code(), Some(2));
}

#[test]
fn pipeline_equals_manual_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulated(d);
    ok(d, &["segment", "--input", "curves.csv", "--kmax", "8", "--s", "0.7", "--out", "m/segments.csv"]);
    ok(d, &["featurize", "--segments", "m/segments.csv", "--out", "m/features.csv"]);
    ok(d, &["cluster", "--features", "m/features.csv", "--kmin", "2", "--kmax", "6", "--restarts", "5", "--seed", "4", "--out", "m/labels.csv"]);
    ok(
        d,
        &[
            "pipeline", "--input", "curves.csv", "--kmax", "8", "--s", "0.7", "--cluster-kmin", "2", "--cluster-kmax", "6",
            "--restarts", "5", "--seed", "4", "--out-dir", "p",
        ],
    );
    for f in ["segments.csv", "features.csv", "labels.csv", "kselection.json"] {
        assert_eq!(read(d, &format!("m/{f}")), read(d, &format!("p/{f}")), "{f}");
    }
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulated(d);
    ok(d, &["--threads", "1", "pipeline", "--input", "curves.csv", "--seed", "2", "--out-dir", "t1"]);
    ok(d, &["--threads", "4", "pipeline", "--input", "curves.csv", "--seed", "2", "--out-dir", "t4"]);
    ok(d, &["--sequential", "pipeline", "--input", "curves.csv", "--seed", "2", "--out-dir", "ts"]);
    for f in ["segments.csv", "features.csv", "labels.csv", "kselection.json", "config.resolved.json"] {
        let one = read(d, &format!("t1/{f}"));
        assert_eq!(one, read(d, &format!("t4/{f}")), "{f}");
        assert_eq!(one, read(d, &format!("ts/{f}")), "{f}");
    }
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulated(d);
    std::fs::write(d.join("cfg.json"), r#"{"k_max": 6, "restarts": 3, "seed": 8}"#).unwrap();
    ok(d, &["--config", "cfg.json", "segment", "--input", "curves.csv", "--kmax", "9", "--out", "o/s.csv"]);
    let resolved: serde_json::Value = serde_json::from_slice(&read(d, "o/config.resolved.json")).unwrap();
    assert_eq!(resolved["k_max"], 9);
    assert_eq!(resolved["restarts"], 3);
    assert_eq!(resolved["seed"], 8);
    assert_eq!(resolved["s_threshold"], 0.75);

    std::fs::write(d.join("typo.json"), r#"{"kmax": 6}"#).unwrap();
    let out = plfc(d, &["--config", "typo.json", "segment", "--input", "curves.csv", "--out", "o/s.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_is_reproducible_and_ari_reads_truth() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulated(d);
    let first = read(d, "curves.csv");
    simulated(d);
    assert_eq!(first, read(d, "curves.csv"));
    let out = ok(d, &["ari", "--labels-a", "truth.csv", "--labels-b", "truth.csv"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "1");
}

#[test]
fn cpfreq_counts_knots_over_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::create_dir(d.join("runs")).unwrap();
    let header = "curve_id,k_hat,knots,theta,rss,lambda,underfilled,candidates\n";
    std::fs::write(d.join("runs/a.csv"), format!("{header}c1,2,10;30,0;1;2;3,0,1,false,10;30\n")).unwrap();
    std::fs::write(d.join("runs/b.csv"), format!("{header}c1,1,30,0;1;2,0,1,false,30\n")).unwrap();
    ok(d, &["cpfreq", "--segments-dir", "runs", "--grid", "0:10:40", "--out", "freq.csv"]);
    let text = String::from_utf8(read(d, "freq.csv")).unwrap();
    assert_eq!(text, "x,frequency\n0,0\n10,0.5\n20,0\n30,1\n40,0\n");

    let bad = plfc(d, &["cpfreq", "--segments-dir", "runs", "--grid", "0:0:40", "--out", "f.csv"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn bench_ari_writes_outputs_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = |out: &'static str| {
        vec!["bench", "ari", "--model", "1", "--sigma", "1", "--reps", "2", "--n-curves", "30", "--seed", "5", "--out-dir", out]
    };
    ok(d, &args("b1"));
    let mut threaded = vec!["--threads", "2"];
    threaded.extend(args("b2"));
    ok(d, &threaded);
    for f in ["ari.csv", "summary.json", "failures.csv", "config.resolved.json"] {
        assert_eq!(read(d, &format!("b1/{f}")), read(d, &format!("b2/{f}")), "{f}");
    }
    let ari = String::from_utf8(read(d, "b1/ari.csv")).unwrap();
    assert!(ari.starts_with("replicate,method,sigma,model,ari\n"));
    assert_eq!(ari.lines().count(), 1 + 2 * 2);
}
