//! Text and image formats written by the command-line tool.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::csi::{BearingEstimate, CsiFrame, Pose2D, Profile2D};

pub const POSES_HEADER: &str = "timestamp_ns,x,y,theta";
pub const BEARINGS_HEADER: &str = "timestamp_ns,source_mac,theta_deg,strength,rssi_dbm";

pub fn write_poses<W: Write + ?Sized>(out: &mut W, poses: &[(u64, Pose2D)]) -> io::Result<()> {
    writeln!(out, "{POSES_HEADER}")?;
    for (t, p) in poses {
        writeln!(out, "{t},{},{},{}", p.x, p.y, p.theta)?;
    }
    Ok(())
}

/// Parses a poses CSV; timestamps must be strictly increasing.
pub fn parse_poses(text: &str) -> Result<Vec<(u64, Pose2D)>, String> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == POSES_HEADER => {}
        _ => return Err(format!("poses: expected header `{POSES_HEADER}`")),
    }
    let mut out: Vec<(u64, Pose2D)> = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = || format!("poses line {}: `{line}`", n + 1);
        if f.len() != 4 {
            return Err(bad());
        }
        let t: u64 = f[0].parse().map_err(|_| bad())?;
        let v: Vec<f64> = f[1..]
            .iter()
            .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<_>>()
            .ok_or_else(bad)?;
        if out.last().is_some_and(|(prev, _)| *prev >= t) {
            return Err(format!("poses line {}: timestamps must increase", n + 1));
        }
        out.push((t, Pose2D::new(v[0], v[1], v[2])));
    }
    Ok(out)
}

/// Pose with the nearest timestamp, if within `tolerance_ns`.
pub fn pose_at(poses: &[(u64, Pose2D)], t: u64, tolerance_ns: u64) -> Option<Pose2D> {
    let i = poses.partition_point(|(pt, _)| *pt < t);
    [i.checked_sub(1), Some(i)]
        .into_iter()
        .flatten()
        .filter_map(|k| poses.get(k))
        .min_by_key(|(pt, _)| pt.abs_diff(t))
        .filter(|(pt, _)| pt.abs_diff(t) <= tolerance_ns)
        .map(|(_, p)| *p)
}

pub fn write_bearing_header<W: Write + ?Sized>(out: &mut W) -> io::Result<()> {
    writeln!(out, "{BEARINGS_HEADER}")
}

pub fn write_bearing<W: Write + ?Sized>(out: &mut W, b: &BearingEstimate) -> io::Result<()> {
    writeln!(
        out,
        "{},{},{:.4},{:.6},{}",
        b.timestamp_ns,
        b.source_mac,
        b.theta.to_degrees(),
        b.strength,
        b.rssi_dbm
    )
}

/// One row of parsed bearings CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct BearingRow {
    pub timestamp_ns: u64,
    pub source_mac: String,
    pub theta_deg: f64,
    pub strength: f64,
    pub rssi_dbm: f64,
}

pub fn parse_bearings(text: &str) -> Result<Vec<BearingRow>, String> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(BEARINGS_HEADER) {
        return Err(format!("bearings: expected header `{BEARINGS_HEADER}`"));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || format!("bearings: bad line `{line}`");
            if f.len() != 5 {
                return Err(bad());
            }
            Ok(BearingRow {
                timestamp_ns: f[0].parse().map_err(|_| bad())?,
                source_mac: f[1].to_string(),
                theta_deg: f[2].parse().map_err(|_| bad())?,
                strength: f[3].parse().map_err(|_| bad())?,
                rssi_dbm: f[4].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

/// 8-bit greyscale, rows = bearings (ascending), columns = distances,
/// scaled so the profile maximum maps to 255.
pub fn profile_pgm(profile: &Profile2D) -> Vec<u8> {
    let (rows, cols) = profile.values.shape();
    let max = profile.values.max();
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    for i in 0..rows {
        for j in 0..cols {
            let v = if max > 0.0 {
                (profile.values[(i, j)] / max * 255.0).round()
            } else {
                0.0
            };
            out.push(v.clamp(0.0, 255.0) as u8);
        }
    }
    out
}

/// Metadata written next to a profile image.
pub struct SidecarInfo<'a> {
    pub source: &'a str,
    pub frame_index: usize,
    pub frame: &'a CsiFrame,
    pub algorithm: &'a str,
    /// e.g. SpotFi sub-array sizes.
    pub extra: Vec<(String, String)>,
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x}"))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn profile_sidecar(profile: &Profile2D, info: &SidecarInfo<'_>) -> String {
    let (ti, dj) = profile.argmax();
    let mut s = String::new();
    let _ = writeln!(s, "# wicsi profile v1");
    let _ = writeln!(s, "source {}", info.source);
    let _ = writeln!(s, "frame_index {}", info.frame_index);
    let _ = writeln!(s, "timestamp_ns {}", info.frame.timestamp_ns);
    let _ = writeln!(s, "source_mac {}", info.frame.source_mac);
    let _ = writeln!(s, "seq {}", info.frame.seq);
    let _ = writeln!(s, "rssi_dbm {}", info.frame.rssi_dbm);
    let _ = writeln!(s, "chanspec {}", info.frame.chanspec());
    let _ = writeln!(s, "algorithm {}", info.algorithm);
    for (k, v) in &info.extra {
        let _ = writeln!(s, "{k} {v}");
    }
    let _ = writeln!(s, "rows theta_rad {}", profile.theta_grid.len());
    let _ = writeln!(s, "cols dist_m {}", profile.dist_grid.len());
    let _ = writeln!(s, "peak_theta_deg {}", profile.theta_grid[ti].to_degrees());
    let _ = writeln!(s, "peak_dist_m {}", profile.dist_grid[dj]);
    let _ = writeln!(s, "theta_rad {}", join(&profile.theta_grid));
    let _ = writeln!(s, "dist_m {}", join(&profile.dist_grid));
    s
}

/// Rebuilds a (quantized) profile from an image and its sidecar.
pub fn read_profile_image(pgm: &[u8], sidecar: &str) -> Result<Profile2D, String> {
    let grid = |key: &str| -> Result<Vec<f64>, String> {
        let line = sidecar
            .lines()
            .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(' ')))
            .ok_or_else(|| format!("sidecar missing `{key}`"))?;
        line.split(',')
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| format!("bad `{key}` value `{v}`"))
            })
            .collect()
    };
    let theta = grid("theta_rad")?;
    let dist = grid("dist_m")?;
    let header = format!("P5\n{} {}\n255\n", dist.len(), theta.len()).into_bytes();
    if !pgm.starts_with(&header) || pgm.len() != header.len() + theta.len() * dist.len() {
        return Err("image does not match sidecar grids".into());
    }
    let pixels = &pgm[header.len()..];
    let values = DMatrix::from_fn(theta.len(), dist.len(), |i, j| {
        f64::from(pixels[i * dist.len() + j]) / 255.0
    });
    Profile2D::new(values, theta, dist).map_err(|e| e.to_string())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), String> {
    std::fs::write(path, bytes).map_err(|e| format!("{}: {e}", path.display()))
}
