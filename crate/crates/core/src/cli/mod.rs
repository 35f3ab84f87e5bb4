//! The `wicsi` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 low-confidence result. Failures print one line to stderr:
//! `error kind=<usage|data|low-confidence> code=<n> reason=<text>`.

pub mod config;
pub mod files;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crate::aoa::{
    estimate_bearing, frame_profile, Algorithm, AoaConfig, BearingOutcome, ProfileAverager,
};
use crate::calibration::file::{read_calibration, write_calibration};
use crate::calibration::{
    calibrate_with_report, CalibrationDataset, CalibrationError, CalibrationOptions,
};
use crate::codec::{
    ingest_stream, write_capture, CaptureReader, CodecError, PacketFilter, UdpSource,
    DEFAULT_UDP_PORT,
};
use crate::csi::{apply_calibration, ArrayGeometry, CalibrationMatrix, ChannelSpec, CsiFrame};
use crate::scanner::{run_fixed_channel, run_walkthrough, write_walkthrough_csv, ScanPolicy};
use crate::synth::{load_scenario, synth_trajectory};
use config::{parse_geometry, parse_point, Resolved, RunConfig};
use files::{
    parse_poses, pose_at, profile_pgm, profile_sidecar, write_bearing, write_bearing_header,
    write_file, write_poses, SidecarInfo,
};

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Usage(String),
    Data(String),
    LowConfidence(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Data(_) => 2,
            Self::LowConfidence(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Self::Usage(_) => "usage",
            Self::Data(_) => "data",
            Self::LowConfidence(_) => "low-confidence",
        }
    }

    fn reason(&self) -> &str {
        match self {
            Self::Usage(s) | Self::Data(s) | Self::LowConfidence(s) => s,
        }
    }

    /// The single stderr line for this error.
    pub fn line(&self) -> String {
        let reason: String = self
            .reason()
            .chars()
            .map(|c| if c == '\n' || c == '\r' { ' ' } else { c })
            .collect();
        format!(
            "error kind={} code={} reason={}",
            self.kind(),
            self.code(),
            reason.trim()
        )
    }
}

fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "wicsi", version, about = "Wi-Fi CSI bearing toolkit")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a capture and pose log from a scenario file.
    Simulate(SimulateArgs),
    /// Print frame summaries from a capture or UDP stream.
    Decode(DecodeArgs),
    /// Estimate a phase calibration from a capture with known poses.
    Calibrate(CalibrateArgs),
    /// Estimate per-frame bearings.
    Bearing(BearingArgs),
    /// Run the channel-switching scanner along a scenario trajectory.
    Scan(ScanArgs),
    /// Write one frame's bearing/range profile as a PGM image.
    Profile(ProfileArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output capture (.wcap).
    #[arg(long)]
    out: PathBuf,
    /// Output poses CSV.
    #[arg(long)]
    poses: PathBuf,
    /// Also write the injected calibration.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
struct Source {
    /// Capture file (.wcap).
    #[arg(long, conflicts_with = "udp")]
    capture: Option<PathBuf>,
    /// Listen for frames on this UDP port.
    #[arg(long, num_args = 0..=1, default_missing_value = "5500")]
    udp: Option<u16>,
    /// Address to bind for --udp.
    #[arg(long, default_value = "0.0.0.0")]
    bind: String,
    /// Stop listening after this long without traffic.
    #[arg(long, default_value_t = 2000)]
    idle_ms: u64,
}

#[derive(Debug, Args, Clone, Default)]
struct FilterArgs {
    /// Comma-separated MAC allow-list.
    #[arg(long)]
    mac_filter: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    rssi_floor: Option<f64>,
}

#[derive(Debug, Args)]
struct DecodeArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    filter: FilterArgs,
    /// CSV instead of text lines.
    #[arg(long)]
    csv: bool,
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[arg(long)]
    capture: Option<PathBuf>,
    #[arg(long)]
    poses: Option<PathBuf>,
    /// Transmitter location `x,y`.
    #[arg(long, allow_hyphen_values = true)]
    tx: String,
    /// Antenna positions `x,y x,y ...`.
    #[arg(long, allow_hyphen_values = true)]
    geometry: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = crate::calibration::DEFAULT_MIN_PAIRS)]
    min_pairs: usize,
    #[arg(long, default_value_t = crate::calibration::DEFAULT_MIN_SPECTRAL_GAP)]
    min_gap: f64,
    #[arg(long, default_value_t = 0)]
    tx_index: usize,
    /// Largest frame/pose timestamp difference accepted.
    #[arg(long, default_value_t = 5)]
    pose_tolerance_ms: u64,
}

#[derive(Debug, Args, Clone, Default)]
struct EstimatorArgs {
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    geometry: Option<String>,
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    sources: Option<usize>,
}

#[derive(Debug, Args)]
struct BearingArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    filter: FilterArgs,
    #[command(flatten)]
    est: EstimatorArgs,
    /// Packets per averaging window (1 = no averaging).
    #[arg(long)]
    window: Option<usize>,
    /// Output CSV (default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScanArgs {
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Walkthrough CSV.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    scan_period_s: Option<f64>,
    #[arg(long)]
    dwell_ms: Option<u64>,
    #[arg(long)]
    margin_db: Option<f64>,
    #[arg(long)]
    switch_cost_ms: Option<u64>,
}

#[derive(Debug, Args)]
struct ProfileArgs {
    #[arg(long)]
    capture: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    index: usize,
    #[command(flatten)]
    est: EstimatorArgs,
    /// Output image (.pgm).
    #[arg(long)]
    out: PathBuf,
    /// Sidecar metadata (default: `<out>.txt`).
    #[arg(long)]
    meta: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let first = e.to_string();
            let first = first.lines().next().unwrap_or("invalid arguments");
            let err = usage(first.trim_start_matches("error: "));
            let _ = writeln!(stderr, "{}", err.line());
            return err.code();
        }
    };
    match dispatch(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = stdout.flush();
            let _ = writeln!(stderr, "{}", e.line());
            e.code()
        }
    }
}

struct Ctx {
    file: RunConfig,
    cfg: Resolved,
    seed: Option<u64>,
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    let file = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(usage)?,
        None => RunConfig::default(),
    };
    let cfg = file.resolve().map_err(usage)?;
    let ctx = Ctx {
        file,
        cfg,
        seed: cli.seed,
    };
    match cli.command {
        Command::Simulate(a) => simulate(&ctx, a, out),
        Command::Decode(a) => decode(&ctx, a, out),
        Command::Calibrate(a) => calibrate_cmd(&ctx, a, out),
        Command::Bearing(a) => bearing(&ctx, a, out),
        Command::Scan(a) => scan(&ctx, a, out),
        Command::Profile(a) => profile(&ctx, a, out),
    }
}

fn io_err(e: std::io::Error) -> CliError {
    data(format!("write failed: {e}"))
}

fn scenario_path(ctx: &Ctx, flag: Option<PathBuf>) -> CliResult<PathBuf> {
    flag.or_else(|| ctx.file.paths.scenario.clone())
        .ok_or_else(|| usage("--scenario is required"))
}

fn simulate(ctx: &Ctx, a: SimulateArgs, out: &mut dyn Write) -> CliResult<()> {
    let path = scenario_path(ctx, a.scenario)?;
    let (sc, geom) = load_scenario(&path, ctx.seed).map_err(data)?;
    let pairs = synth_trajectory(&sc, &geom).map_err(data)?;
    let frames: Vec<CsiFrame> = pairs.iter().map(|(_, f)| f.clone()).collect();
    write_capture(&a.out, &frames).map_err(data)?;
    let poses: Vec<_> = pairs.iter().map(|(p, f)| (f.timestamp_ns, *p)).collect();
    let mut buf = Vec::new();
    write_poses(&mut buf, &poses).map_err(io_err)?;
    write_file(&a.poses, &buf).map_err(data)?;
    if let Some(t) = &a.truth {
        write_calibration(t, &sc.true_calibration, Some(&geom)).map_err(data)?;
    }
    writeln!(out, "frames {}", frames.len()).map_err(io_err)?;
    writeln!(out, "chanspec {}", sc.chanspec).map_err(io_err)?;
    writeln!(out, "antennas {}", geom.len()).map_err(io_err)?;
    Ok(())
}

fn merged_filter(ctx: &Ctx, f: &FilterArgs) -> CliResult<PacketFilter> {
    let mut filter = ctx.cfg.filter.clone();
    if let Some(m) = &f.mac_filter {
        filter.allow = PacketFilter::parse_macs(m).map_err(usage)?;
    }
    if let Some(r) = f.rssi_floor {
        filter.rssi_floor_dbm = Some(r);
    }
    Ok(filter)
}

fn capture_path(ctx: &Ctx, flag: &Option<PathBuf>) -> Option<PathBuf> {
    flag.clone().or_else(|| ctx.file.paths.capture.clone())
}

/// Feeds filtered frames to `sink` in arrival order. A capture that breaks
/// off mid-file is reported after the frames before the damage.
fn for_each_frame(
    ctx: &Ctx,
    source: &Source,
    filter: &PacketFilter,
    mut sink: impl FnMut(CsiFrame) -> CliResult<bool>,
) -> CliResult<()> {
    if let Some(port) = source.udp {
        let port = if port == 0 { DEFAULT_UDP_PORT } else { port };
        let addr: SocketAddr = format!("{}:{port}", source.bind)
            .parse()
            .map_err(|_| usage(format!("bad bind address `{}`", source.bind)))?;
        let src = UdpSource::bind(addr, Duration::from_millis(source.idle_ms.max(1)))
            .map_err(|e| data(format!("udp bind {addr}: {e}")))?;
        for frame in ingest_stream(src, filter.clone()) {
            if !sink(frame)? {
                break;
            }
        }
        return Ok(());
    }
    let path = capture_path(ctx, &source.capture)
        .ok_or_else(|| usage("--capture or --udp is required"))?;
    for_each_capture_frame(&path, filter, sink)
}

fn for_each_capture_frame(
    path: &Path,
    filter: &PacketFilter,
    mut sink: impl FnMut(CsiFrame) -> CliResult<bool>,
) -> CliResult<()> {
    let file = File::open(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    let reader = CaptureReader::new(BufReader::new(file))
        .map_err(|e| data(format!("{}: {e}", path.display())))?;
    for item in reader {
        let frame = item.map_err(|e: CodecError| data(format!("{}: {e}", path.display())))?;
        if filter.check(&frame).is_ok() && !sink(frame)? {
            break;
        }
    }
    Ok(())
}

fn decode(ctx: &Ctx, a: DecodeArgs, out: &mut dyn Write) -> CliResult<()> {
    let filter = merged_filter(ctx, &a.filter)?;
    if a.csv {
        writeln!(
            out,
            "index,timestamp_ns,seq,source_mac,chanspec,n_rx,n_tx,rssi_dbm,mean_amplitude"
        )
        .map_err(io_err)?;
    }
    let mut index = 0usize;
    let limit = a.limit.unwrap_or(usize::MAX);
    for_each_frame(ctx, &a.source, &filter, |f| {
        if index >= limit {
            return Ok(false);
        }
        let mean_amp =
            f.csi().iter().map(|z| f64::from(z.norm())).sum::<f64>() / f.csi().len() as f64;
        if a.csv {
            writeln!(
                out,
                "{index},{},{},{},{},{},{},{},{mean_amp:.6}",
                f.timestamp_ns,
                f.seq,
                f.source_mac,
                f.chanspec(),
                f.n_rx(),
                f.n_tx(),
                f.rssi_dbm
            )
        } else {
            writeln!(
                out,
                "#{index} ts={} seq={} mac={} chanspec={} rx={} tx={} rssi={} mean_amp={mean_amp:.6}",
                f.timestamp_ns,
                f.seq,
                f.source_mac,
                f.chanspec(),
                f.n_rx(),
                f.n_tx(),
                f.rssi_dbm
            )
        }
        .map_err(io_err)?;
        out.flush().map_err(io_err)?;
        index += 1;
        Ok(true)
    })
}

fn geometry(
    ctx: &Ctx,
    flag: &Option<String>,
    from_cal: Option<ArrayGeometry>,
) -> CliResult<ArrayGeometry> {
    if let Some(g) = flag {
        return parse_geometry(g).map_err(usage);
    }
    ctx.cfg
        .geometry
        .clone()
        .or(from_cal)
        .ok_or_else(|| usage("antenna geometry required (--geometry, [array] or calibration file)"))
}

fn check_chanspec(ctx: &Ctx, actual: ChannelSpec) -> CliResult<()> {
    match ctx.cfg.chanspec {
        Some(c) if c != actual => Err(data(format!(
            "configured chanspec {c} does not match data chanspec {actual}"
        ))),
        _ => Ok(()),
    }
}

fn calibrate_cmd(ctx: &Ctx, a: CalibrateArgs, out: &mut dyn Write) -> CliResult<()> {
    let tx = parse_point(&a.tx).map_err(usage)?;
    let geom = geometry(ctx, &a.geometry, None)?;
    let cap = capture_path(ctx, &a.capture).ok_or_else(|| usage("--capture is required"))?;
    let poses_path = a
        .poses
        .clone()
        .or_else(|| ctx.file.paths.poses.clone())
        .ok_or_else(|| usage("--poses is required"))?;
    let poses_text = std::fs::read_to_string(&poses_path)
        .map_err(|e| data(format!("{}: {e}", poses_path.display())))?;
    let poses = parse_poses(&poses_text).map_err(data)?;

    let mut frames = Vec::new();
    for_each_capture_frame(&cap, &PacketFilter::all_pass(), |f| {
        frames.push(f);
        Ok(true)
    })?;
    let chanspec = frames
        .first()
        .map(CsiFrame::chanspec)
        .ok_or_else(|| data("capture has no frames"))?;
    check_chanspec(ctx, chanspec)?;
    if frames[0].n_rx() != geom.len() {
        return Err(data(format!(
            "geometry has {} antennas, frames have {}",
            geom.len(),
            frames[0].n_rx()
        )));
    }
    let tol = a.pose_tolerance_ms * 1_000_000;
    let pairs: Vec<_> = frames
        .into_iter()
        .filter_map(|f| pose_at(&poses, f.timestamp_ns, tol).map(|p| (p, f)))
        .collect();
    let ds = CalibrationDataset {
        pairs,
        tx_location: tx,
        geom: geom.clone(),
        chanspec,
    };
    let opts = CalibrationOptions {
        min_pairs: a.min_pairs,
        min_spectral_gap: a.min_gap,
        tx_index: a.tx_index,
        ..CalibrationOptions::default()
    };
    let (cal, rep) = calibrate_with_report(&ds, &opts).map_err(|e| match e {
        CalibrationError::LowConfidence { .. } => CliError::LowConfidence(e.to_string()),
        other => data(other),
    })?;
    write_calibration(&a.out, &cal, Some(&geom)).map_err(data)?;
    let report = format!(
        "pairs_used {}\nspectral_gap {:.6}\nobjective_coarse {:.9e}\nobjective_fine {:.9e}\niterations {}\nconverged {}\n",
        rep.pairs_used,
        rep.spectral_gap,
        rep.objective_coarse,
        rep.objective_fine,
        rep.iterations,
        rep.converged
    );
    if let Some(p) = &a.report {
        write_file(p, report.as_bytes()).map_err(data)?;
    }
    out.write_all(report.as_bytes()).map_err(io_err)
}

struct Estimator {
    cal: Option<CalibrationMatrix>,
    geom: ArrayGeometry,
    aoa: AoaConfig,
}

fn estimator(ctx: &Ctx, est: &EstimatorArgs, window: Option<usize>) -> CliResult<Estimator> {
    let (cal, cal_geom) = match est
        .calibration
        .clone()
        .or_else(|| ctx.file.paths.calibration.clone())
    {
        Some(p) => {
            let (c, g) = read_calibration(&p).map_err(data)?;
            (Some(c), g)
        }
        None => (None, None),
    };
    let geom = geometry(ctx, &est.geometry, cal_geom)?;
    let mut aoa = ctx.cfg.aoa.clone();
    if let Some(a) = &est.algorithm {
        aoa.algorithm = a.parse::<Algorithm>().map_err(usage)?;
    }
    if let Some(s) = est.sources {
        aoa.sources = s;
    }
    if let Some(w) = window {
        aoa.window = w;
    }
    aoa.validate().map_err(usage)?;
    if let Some(c) = &cal {
        if c.n_rx() != geom.len() {
            return Err(data(format!(
                "calibration has {} antennas, geometry has {}",
                c.n_rx(),
                geom.len()
            )));
        }
        check_chanspec(ctx, c.chanspec)?;
    }
    Ok(Estimator { cal, geom, aoa })
}

impl Estimator {
    fn prepare(&self, frame: CsiFrame) -> CliResult<CsiFrame> {
        if frame.n_rx() != self.geom.len() {
            return Err(data(format!(
                "frame has {} antennas, geometry has {}",
                frame.n_rx(),
                self.geom.len()
            )));
        }
        match &self.cal {
            Some(c) => apply_calibration(c, &frame).map_err(data),
            None => Ok(frame),
        }
    }
}

fn bearing(ctx: &Ctx, a: BearingArgs, out: &mut dyn Write) -> CliResult<()> {
    let filter = merged_filter(ctx, &a.filter)?;
    let mut est = estimator(ctx, &a.est, a.window)?;
    if let Some(r) = a.filter.rssi_floor {
        est.aoa.rssi_floor_dbm = r;
    }
    let mut file_out;
    let sink: &mut dyn Write = match &a.out {
        Some(p) => {
            file_out =
                BufWriter::new(File::create(p).map_err(|e| data(format!("{}: {e}", p.display())))?);
            &mut file_out
        }
        None => out,
    };
    write_bearing_header(sink).map_err(io_err)?;
    let mut averager = ProfileAverager::new(est.aoa.window).map_err(usage)?;
    let mut first = true;
    let result = for_each_frame(ctx, &a.source, &filter, |frame| {
        if first {
            check_chanspec(ctx, frame.chanspec())?;
            first = false;
        }
        if !(frame.rssi_dbm >= est.aoa.rssi_floor_dbm) {
            return Ok(true);
        }
        let frame = est.prepare(frame)?;
        let profile = frame_profile(&frame, &est.geom, &est.aoa).map_err(data)?;
        let profile = if est.aoa.window > 1 {
            averager.push(frame.source_mac, profile)
        } else {
            profile
        };
        if let BearingOutcome::Accepted(mut b) =
            estimate_bearing(&profile, frame.rssi_dbm, &est.aoa)
        {
            b.source_mac = frame.source_mac;
            b.timestamp_ns = frame.timestamp_ns;
            write_bearing(sink, &b).map_err(io_err)?;
            sink.flush().map_err(io_err)?;
        }
        Ok(true)
    });
    sink.flush().map_err(io_err)?;
    result
}

fn scan(ctx: &Ctx, a: ScanArgs, out: &mut dyn Write) -> CliResult<()> {
    let path = scenario_path(ctx, a.scenario)?;
    let (sc, _) = load_scenario(&path, ctx.seed).map_err(data)?;
    let d = ctx.cfg.policy;
    let policy = ScanPolicy {
        scan_period_s: a.scan_period_s.unwrap_or(d.scan_period_s),
        dwell_ms: a.dwell_ms.unwrap_or(d.dwell_ms),
        switch_margin_db: a.margin_db.unwrap_or(d.switch_margin_db),
        switch_cost_ms: a.switch_cost_ms.unwrap_or(d.switch_cost_ms),
        stale_timeout_s: d.stale_timeout_s,
    };
    policy.validate().map_err(usage)?;
    let walk = if ctx.cfg.scan_enabled {
        run_walkthrough(&sc, &policy)
    } else {
        run_fixed_channel(&sc, ctx.cfg.chanspec.unwrap_or(sc.chanspec))
    }
    .map_err(data)?;
    let mut buf = Vec::new();
    write_walkthrough_csv(&mut buf, &walk.log).map_err(io_err)?;
    write_file(&a.out, &buf).map_err(data)?;
    writeln!(out, "{}", walk.summary).map_err(io_err)?;
    writeln!(out, "per_switch_downtime_ms {}", policy.switch_cost_ms).map_err(io_err)
}

fn profile(ctx: &Ctx, a: ProfileArgs, out: &mut dyn Write) -> CliResult<()> {
    let est = estimator(ctx, &a.est, None)?;
    let cap = capture_path(ctx, &a.capture).ok_or_else(|| usage("--capture is required"))?;
    let mut found = None;
    let mut seen = 0usize;
    for_each_capture_frame(&cap, &PacketFilter::all_pass(), |f| {
        if seen == a.index {
            found = Some(f);
            return Ok(false);
        }
        seen += 1;
        Ok(true)
    })?;
    let frame = found.ok_or_else(|| {
        data(format!(
            "frame index {} out of range ({seen} frames)",
            a.index
        ))
    })?;
    check_chanspec(ctx, frame.chanspec())?;
    let frame = est.prepare(frame)?;
    let p = frame_profile(&frame, &est.geom, &est.aoa).map_err(data)?;

    let mut extra = Vec::new();
    if est.aoa.algorithm == Algorithm::Spotfi {
        let n_sub_sub = est
            .aoa
            .smoothing
            .n_sub_sub
            .unwrap_or(crate::aoa::uniform_subcarrier_grid(&frame.chanspec()).len() / 2);
        extra.push((
            "smoothing".to_string(),
            format!("{}x{}", est.aoa.smoothing.n_ant_sub, n_sub_sub),
        ));
    }
    extra.push(("calibrated".to_string(), est.cal.is_some().to_string()));
    let algorithm = est.aoa.algorithm.to_string();
    let source = cap.display().to_string();
    let info = SidecarInfo {
        source: &source,
        frame_index: a.index,
        frame: &frame,
        algorithm: &algorithm,
        extra,
    };
    write_file(&a.out, &profile_pgm(&p)).map_err(data)?;
    let meta = a.meta.unwrap_or_else(|| {
        let mut m = a.out.clone().into_os_string();
        m.push(".txt");
        PathBuf::from(m)
    });
    write_file(&meta, profile_sidecar(&p, &info).as_bytes()).map_err(data)?;
    let (ti, dj) = p.argmax();
    writeln!(
        out,
        "peak theta_deg={:.3} dist_m={:.3}",
        p.theta_grid[ti].to_degrees(),
        p.dist_grid[dj]
    )
    .map_err(io_err)
}
