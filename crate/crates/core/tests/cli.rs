use std::net::UdpSocket;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Duration;

use wicsi::cli::{self, files};
use wicsi::codec::{encode_frame, read_capture};
use wicsi::csi::{ground_truth_bearing, wrap_angle, Pose2D};

const GEOM: &str = "0,0 0.022,0 0,0.022 0.022,0.022";

fn scenario(seed: u64, count: usize, snr_db: f64, calibration: &str) -> String {
    format!(
        r#"
seed = {seed}
snr_db = {snr_db}
per_packet_phase = true

[channel]
number = 155
bandwidth_mhz = 80

[array]
positions = [[0.0, 0.0], [0.022, 0.0], [0.0, 0.022], [0.022, 0.022]]

[transmitter]
x = 1.0
y = -2.0

[calibration]
{calibration}

[trajectory]
kind = "disc"
radius_m = 5.0
count = {count}
rate_hz = 10.0
"#
    )
}

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["wicsi"];
    argv.extend_from_slice(args);
    let code = cli::run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

struct Work(tempfile::TempDir);

impl Work {
    fn new() -> Self {
        Self(tempfile::tempdir().unwrap())
    }

    fn path(&self, name: &str) -> String {
        self.0.path().join(name).to_str().unwrap().to_string()
    }

    fn write(&self, name: &str, text: &str) -> String {
        std::fs::write(self.0.path().join(name), text).unwrap();
        self.path(name)
    }
}

fn simulate(w: &Work, name: &str, toml: &str) -> (String, String) {
    let scene = w.write(&format!("{name}.toml"), toml);
    let (cap, poses) = (
        w.path(&format!("{name}.wcap")),
        w.path(&format!("{name}.csv")),
    );
    let (code, _, err) = run(&[
        "simulate",
        "--scenario",
        &scene,
        "--out",
        &cap,
        "--poses",
        &poses,
    ]);
    assert_eq!(code, 0, "{err}");
    (cap, poses)
}

#[test]
fn simulate_calibrate_bearing_end_to_end() {
    let w = Work::new();
    let (cap, poses) = simulate(&w, "cal", &scenario(4, 150, 30.0, "mode = \"random\""));
    let truth = w.path("truth.cal");
    let scene = w.path("cal.toml");
    run(&[
        "simulate",
        "--scenario",
        &scene,
        "--out",
        &cap,
        "--poses",
        &poses,
        "--truth",
        &truth,
    ]);

    let fit = w.path("fit.cal");
    let (code, out, err) = run(&[
        "calibrate",
        "--capture",
        &cap,
        "--poses",
        &poses,
        "--tx",
        "1,-2",
        "--geometry",
        GEOM,
        "--out",
        &fit,
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("pairs_used 150"));
    let gap: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("spectral_gap "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(gap >= 3.0);

    // held-out frames with the same hardware offsets
    let held = scenario(5, 80, 30.0, &format!("mode = \"file\"\npath = \"{truth}\""));
    let (hcap, hposes) = simulate(&w, "held", &held);
    let csv = w.path("bearings.csv");
    let (code, _, err) = run(&[
        "bearing",
        "--capture",
        &hcap,
        "--calibration",
        &fit,
        "--window",
        "1",
        "--rssi-floor",
        "-150",
        "--out",
        &csv,
    ]);
    assert_eq!(code, 0, "{err}");

    let poses = files::parse_poses(&std::fs::read_to_string(&hposes).unwrap()).unwrap();
    let rows = files::parse_bearings(&std::fs::read_to_string(&csv).unwrap()).unwrap();
    assert_eq!(rows.len(), 80);
    let mut errs: Vec<f64> = rows
        .iter()
        .map(|r| {
            let pose = files::pose_at(&poses, r.timestamp_ns, 0).unwrap();
            let truth = ground_truth_bearing(&pose, [1.0, -2.0]).unwrap();
            wrap_angle(r.theta_deg.to_radians() - truth)
                .abs()
                .to_degrees()
        })
        .collect();
    errs.sort_by(f64::total_cmp);
    let median = errs[errs.len() / 2];
    assert!(median < 1.0, "median bearing error {median} deg");
}

#[test]
fn truncated_capture_emits_frames_then_exits_2() {
    let w = Work::new();
    let (cap, _) = simulate(&w, "s", &scenario(1, 5, 30.0, ""));
    let bytes = std::fs::read(&cap).unwrap();
    let cut = w.path("cut.wcap");
    std::fs::write(&cut, &bytes[..bytes.len() - 100]).unwrap();
    let (code, out, err) = run(&["decode", "--capture", &cut, "--csv"]);
    assert_eq!(code, 2);
    assert_eq!(out.lines().count(), 1 + 4, "{out}");
    assert!(err.starts_with("error kind=data code=2 reason="));
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn too_few_pairs_exits_2() {
    let w = Work::new();
    let (cap, poses) = simulate(&w, "s", &scenario(1, 3, 30.0, ""));
    let (code, _, err) = run(&[
        "calibrate",
        "--capture",
        &cap,
        "--poses",
        &poses,
        "--tx",
        "1,-2",
        "--geometry",
        GEOM,
        "--out",
        &w.path("x.cal"),
    ]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("pairs"));
    assert!(!Path::new(&w.path("x.cal")).exists());
}

#[test]
fn noise_only_calibration_exits_3() {
    let w = Work::new();
    let (cap, poses) = simulate(&w, "s", &scenario(2, 60, -30.0, ""));
    let (code, _, err) = run(&[
        "calibrate",
        "--capture",
        &cap,
        "--poses",
        &poses,
        "--tx",
        "1,-2",
        "--geometry",
        GEOM,
        "--out",
        &w.path("x.cal"),
        "--min-pairs",
        "50",
    ]);
    assert_eq!(code, 3, "{err}");
    assert!(err.starts_with("error kind=low-confidence code=3"));
}

#[test]
fn config_validation() {
    let w = Work::new();
    let (cap, _) = simulate(&w, "s", &scenario(1, 4, 30.0, ""));

    let bad = w.write("bad.toml", "[login]\nuser = \"root\"\n");
    let (code, _, _) = run(&["--config", &bad, "decode", "--capture", &cap]);
    assert_eq!(code, 1);

    // chanspec mismatch is caught before any estimation
    let other = w.write("other.toml", "[channel]\nchanspec = \"42/80\"\n");
    let (code, out, err) = run(&[
        "--config",
        &other,
        "bearing",
        "--capture",
        &cap,
        "--geometry",
        GEOM,
    ]);
    assert_eq!(code, 2, "{err}");
    assert_eq!(out.lines().count(), 1);
    assert!(err.contains("42/80"));

    let (code, _, err) = run(&["bearing", "--capture", &cap, "--geometry", "0,0 0,0.026"]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("antennas"));

    let (code, _, _) = run(&["bearing", "--capture", &cap]);
    assert_eq!(code, 1);
    let (code, _, _) = run(&[
        "bearing",
        "--capture",
        &cap,
        "--geometry",
        GEOM,
        "--algorithm",
        "esprit",
    ]);
    assert_eq!(code, 1);
}

#[test]
fn config_file_supplies_paths_and_settings() {
    let w = Work::new();
    let (cap, _) = simulate(&w, "s", &scenario(1, 6, 30.0, ""));
    let cfg = w.write(
        "run.toml",
        &format!(
            r#"
[channel]
chanspec = "155/80"
[packet]
rssi_floor_dbm = -150.0
[algorithm]
name = "music"
window = 1
[array]
positions = [[0.0, 0.0], [0.022, 0.0], [0.0, 0.022], [0.022, 0.022]]
[paths]
capture = "{}"
"#,
            Path::new(&cap).file_name().unwrap().to_str().unwrap()
        ),
    );
    let (code, out, err) = run(&["--config", &cfg, "bearing"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out.lines().count(), 1 + 6);
}

#[test]
fn profile_image_peaks_at_the_source() {
    let w = Work::new();
    let toml =
        scenario(1, 4, 40.0, "").replace("per_packet_phase = true", "per_packet_phase = false");
    let (cap, poses) = simulate(&w, "s", &toml);
    let img = w.path("f.pgm");
    let (code, out, err) = run(&[
        "profile",
        "--capture",
        &cap,
        "--geometry",
        GEOM,
        "--index",
        "2",
        "--out",
        &img,
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.starts_with("peak theta_deg="));

    let pgm = std::fs::read(&img).unwrap();
    let side = std::fs::read_to_string(format!("{img}.txt")).unwrap();
    let p = files::read_profile_image(&pgm, &side).unwrap();
    let (i, j) = p.argmax();
    let poses = files::parse_poses(&std::fs::read_to_string(&poses).unwrap()).unwrap();
    let pose: Pose2D = poses[2].1;
    let theta = ground_truth_bearing(&pose, [1.0, -2.0]).unwrap();
    let dist = (pose.x - 1.0).hypot(pose.y + 2.0);
    assert!(wrap_angle(p.theta_grid[i] - theta).abs() <= 1f64.to_radians() + 1e-9);
    assert!((p.dist_grid[j] - dist).abs() <= 0.25 + 1e-9);
    assert!(side.contains("frame_index 2"));

    let (code, _, err) = run(&[
        "profile",
        "--capture",
        &cap,
        "--geometry",
        GEOM,
        "--index",
        "9",
        "--out",
        &img,
    ]);
    assert_eq!(code, 2);
    assert!(err.contains("out of range"));
}

#[test]
fn spotfi_profile_records_smoothing() {
    let w = Work::new();
    let toml = scenario(1, 2, 40.0, "").replace(
        "[[0.0, 0.0], [0.022, 0.0], [0.0, 0.022], [0.022, 0.022]]",
        "[[0.0, 0.0], [0.0, 0.026], [0.0, 0.052]]",
    );
    let (cap, _) = simulate(&w, "s", &toml);
    let img = w.path("f.pgm");
    let (code, _, err) = run(&[
        "profile",
        "--capture",
        &cap,
        "--geometry",
        "0,0 0,0.026 0,0.052",
        "--algorithm",
        "spotfi",
        "--out",
        &img,
    ]);
    assert_eq!(code, 0, "{err}");
    let side = std::fs::read_to_string(format!("{img}.txt")).unwrap();
    assert!(side.contains("algorithm spotfi"));
    assert!(side.contains("smoothing 2x122"));
}

#[test]
fn scan_writes_walkthrough_and_summary() {
    let w = Work::new();
    let toml = format!(
        "{}\n[[ap]]\nx = 0.0\ny = 0.0\nchannel = 42\nbandwidth_mhz = 80\nmac = \"02:00:00:00:01:01\"\n\n[[ap]]\nx = 30.0\ny = 0.0\nchannel = 155\nbandwidth_mhz = 80\nmac = \"02:00:00:00:01:02\"\n",
        scenario(1, 50, 30.0, "")
    );
    let scene = w.write("s.toml", &toml);
    let csv = w.path("walk.csv");
    let (code, out, err) = run(&["scan", "--scenario", &scene, "--out", &csv]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("switches") && out.contains("downtime_ms"));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 51);

    let fixed = w.write("fixed.toml", "[setup]\nscan = false\n");
    let (code, out, _) = run(&[
        "--config",
        &fixed,
        "scan",
        "--scenario",
        &scene,
        "--out",
        &csv,
    ]);
    assert_eq!(code, 0);
    assert!(out.contains("switches 0") && out.contains("scans 0"));

    let (code, _, _) = run(&[
        "scan",
        "--scenario",
        &scene,
        "--out",
        &csv,
        "--switch-cost-ms",
        "700",
    ]);
    assert_eq!(code, 1);
}

#[test]
fn decode_filters_by_mac() {
    let w = Work::new();
    let (cap, _) = simulate(&w, "s", &scenario(1, 3, 30.0, ""));
    let (code, out, _) = run(&[
        "decode",
        "--capture",
        &cap,
        "--mac-filter",
        "02:00:00:00:00:09",
    ]);
    assert_eq!(code, 0);
    assert!(out.is_empty());
    let (code, out, _) = run(&[
        "decode",
        "--capture",
        &cap,
        "--mac-filter",
        "02:00:00:00:00:01",
    ]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 3);
}

#[test]
fn decode_listens_on_udp() {
    let w = Work::new();
    let (cap, _) = simulate(&w, "s", &scenario(1, 3, 30.0, ""));
    let frames = read_capture(Path::new(&cap)).unwrap().frames;
    let port = {
        let probe = UdpSocket::bind("127.0.0.1:0").unwrap();
        probe.local_addr().unwrap().port()
    };
    let port_s = port.to_string();
    let listener = std::thread::spawn(move || {
        run(&[
            "decode",
            "--udp",
            &port_s,
            "--bind",
            "127.0.0.1",
            "--idle-ms",
            "1500",
            "--csv",
        ])
    });
    std::thread::sleep(Duration::from_millis(300));
    let tx = UdpSocket::bind("127.0.0.1:0").unwrap();
    for f in &frames {
        tx.send_to(&encode_frame(f).unwrap(), ("127.0.0.1", port))
            .unwrap();
        std::thread::sleep(Duration::from_millis(20));
    }
    tx.send_to(b"junk", ("127.0.0.1", port)).unwrap();
    let (code, out, err) = listener.join().unwrap();
    assert_eq!(code, 0, "{err}");
    assert_eq!(out.lines().count(), 1 + frames.len(), "{out}");
}

#[test]
fn binary_propagates_exit_codes() {
    let exe = PathBuf::from(env!("CARGO_BIN_EXE_wicsi"));
    let out = Command::new(&exe).arg("--version").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let out = Command::new(&exe).arg("nonsense").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = Command::new(&exe)
        .args(["decode", "--capture", "/nonexistent.wcap"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error kind=data code=2 reason="), "{err}");
}
