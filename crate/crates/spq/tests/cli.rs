//! End-to-end runs of the `spq` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spq::formats::{read_csv_path, CONFIG_PREFIX};
use spq::presets::{preset_spec, Preset};

fn spq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spq"))
        .args(args)
        .env("VQ_THREADS", "1")
        .output()
        .expect("spq runs")
}

fn ok(args: &[&str]) -> Output {
    let out = spq(args);
    assert!(
        out.status.success(),
        "spq {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

struct Scratch(PathBuf);

impl Scratch {
    fn new(tag: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("spq-cli-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        Scratch(dir)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }
}

impl Drop for Scratch {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small hexagon/disk build shared by the tests that need a quantizer file.
fn build_small(dir: &Scratch) -> PathBuf {
    let q = dir.path("hex.json");
    ok(&[
        "build",
        "--preset",
        "hexagon-disk",
        "-k",
        "8",
        "--budget",
        "20000",
        "--volume-budget",
        "50000",
        "-o",
        s(&q),
    ]);
    q
}

#[test]
fn build_then_quantize_reports_consistent_rows() {
    let dir = Scratch::new("quantize");
    let q = build_small(&dir);
    let input = dir.path("in.csv");
    std::fs::write(&input, "x0,x1\n0,0\n0.3,-0.2\n7.25,-3.5\n-12,4.75\n").unwrap();
    let out = dir.path("out.csv");
    ok(&["quantize", "-q", s(&q), "-i", s(&input), "-o", s(&out)]);

    let text = std::fs::read_to_string(&out).unwrap();
    assert!(
        text.starts_with(CONFIG_PREFIX),
        "missing config line:\n{text}"
    );
    let table = read_csv_path(Some(&out)).unwrap();
    assert_eq!(table.config.as_ref().unwrap()["command"], "quantize");
    assert_eq!(
        table.header,
        ["x0", "x1", "q0", "q1", "e0", "e1", "piece", "residual"]
    );
    assert_eq!(table.rows.len(), 4);
    for row in &table.rows {
        for i in 0..2 {
            assert_eq!(row[i] - row[2 + i], row[4 + i], "e = x - q in {row:?}");
        }
    }

    // Same input, same rows (the config line names the output path).
    let again = dir.path("again.csv");
    ok(&["quantize", "-q", s(&q), "-i", s(&input), "-o", s(&again)]);
    let body = |t: &str| t.lines().skip(1).map(str::to_owned).collect::<Vec<_>>();
    assert_eq!(body(&text), body(&std::fs::read_to_string(&again).unwrap()));
}

#[test]
fn build_json_format_carries_the_summary() {
    let dir = Scratch::new("json");
    let q = dir.path("interval.json");
    let out = ok(&[
        "build",
        "--preset",
        "interval",
        "-o",
        s(&q),
        "--format",
        "json",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["command"], "build");
    assert_eq!(v["summary"]["normalized_entropy"], -1.0);
    assert_eq!(v["summary"]["pieces"], 1);
}

#[test]
fn empty_partition_grid_writes_only_the_header() {
    let dir = Scratch::new("partition");
    let q = build_small(&dir);
    let out = dir.path("grid.csv");
    ok(&[
        "partition-export",
        "-q",
        s(&q),
        "--grid",
        "0",
        "-o",
        s(&out),
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2, "{text}");
    assert!(lines[0].starts_with(CONFIG_PREFIX));

    ok(&[
        "partition-export",
        "-q",
        s(&q),
        "--grid",
        "10",
        "-o",
        s(&out),
    ]);
    assert_eq!(read_csv_path(Some(&out)).unwrap().rows.len(), 100);
}

#[test]
fn sampling_does_not_depend_on_the_thread_count() {
    let dir = Scratch::new("threads");
    let q = build_small(&dir);
    let run = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_spq"))
            .args(["sample-error", "-q", s(&q), "-n", "5000", "--seed", "7"])
            .env("VQ_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success());
        // The config line records the thread count; the samples must not.
        String::from_utf8(out.stdout)
            .unwrap()
            .lines()
            .skip(1)
            .collect::<Vec<_>>()
            .join("\n")
    };
    let one = run("1");
    assert_eq!(one, run("3"));
    assert_eq!(one.lines().count(), 5001);
}

#[test]
fn dither_channel_errors_stay_in_the_error_region() {
    let dir = Scratch::new("dither");
    let q = build_small(&dir);
    let out = dir.path("dither.csv");
    ok(&[
        "dither-channel",
        "-q",
        s(&q),
        "--x",
        "-7.3,2.1",
        "--trials",
        "2000",
        "-o",
        s(&out),
    ]);
    let table = read_csv_path(Some(&out)).unwrap();
    assert_eq!(table.rows.len(), 2000);
    let (i0, i1) = (table.column("e0").unwrap(), table.column("e1").unwrap());
    let r_max = table
        .rows
        .iter()
        .map(|r| r[i0].hypot(r[i1]))
        .fold(0.0, f64::max);
    // Residual pieces may leave the disk, but never by more than the basic cell's reach.
    assert!(r_max < 3.0, "largest error radius {r_max}");
}

#[test]
fn bad_spec_is_a_usage_error_naming_the_field() {
    let dir = Scratch::new("spec");
    let spec = dir.path("spec.json");
    let good = serde_json::to_string_pretty(&preset_spec(Preset::Interval).unwrap()).unwrap();
    std::fs::write(&spec, good.replacen("\"cell\"", "\"cel\"", 1)).unwrap();
    let out = spq(&["build", "--spec", s(&spec), "-o", s(&dir.path("q.json"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`cel`") && err.contains("line"), "{err}");

    let out = spq(&["quantize", "-q", s(&dir.path("missing.json"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn layered_demo_summary_is_json() {
    let dir = Scratch::new("layered");
    let summary = dir.path("summary.json");
    let trials = dir.path("trials.csv");
    ok(&[
        "layered-demo",
        "--trials",
        "3000",
        "-k",
        "8",
        "--budget",
        "20000",
        "--volume-budget",
        "50000",
        "-o",
        s(&trials),
        "--summary",
        s(&summary),
    ]);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    for key in ["ks_radial", "tv", "mean_rate_bits"] {
        assert!(v.get(key).is_some(), "summary lacks {key}: {v}");
    }
    assert_eq!(read_csv_path(Some(&trials)).unwrap().rows.len(), 3000);
}

#[test]
fn ball_bounds_report_runs() {
    let out = ok(&["bounds", "--report", "ball", "-n", "3", "--budget", "20000"]);
    assert!(!out.stdout.is_empty());
}
