//! Plain-text calibration files.
//!
//! ```text
//! # wicsi calibration v1
//! chanspec 155/80
//! n_rx 4
//! n_sub 234
//! geometry 0,0 0.022,0 0,0.022 0.022,0.022
//! 0.000,0.000,...        one row per antenna, degrees
//! ```
//!
//! `geometry` is optional. Blank lines and further `#` lines are ignored.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use super::{CalibrationError, Result};
use crate::csi::{ArrayGeometry, CalibrationMatrix, ChannelSpec};

pub const CALIBRATION_HEADER: &str = "# wicsi calibration v1";

fn bad(msg: impl Into<String>) -> CalibrationError {
    CalibrationError::File(msg.into())
}

pub fn format_calibration(cal: &CalibrationMatrix, geom: Option<&ArrayGeometry>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{CALIBRATION_HEADER}");
    let _ = writeln!(out, "chanspec {}", cal.chanspec);
    let _ = writeln!(out, "n_rx {}", cal.n_rx());
    let _ = writeln!(out, "n_sub {}", cal.phase.ncols());
    if let Some(g) = geom {
        let pts: Vec<String> = g
            .positions()
            .iter()
            .map(|p| format!("{},{}", p[0], p[1]))
            .collect();
        let _ = writeln!(out, "geometry {}", pts.join(" "));
    }
    for row in cal.phase.row_iter() {
        let vals: Vec<String> = row
            .iter()
            .map(|v| format!("{:.9}", v.to_degrees()))
            .collect();
        let _ = writeln!(out, "{}", vals.join(","));
    }
    out
}

pub fn parse_calibration(text: &str) -> Result<(CalibrationMatrix, Option<ArrayGeometry>)> {
    let mut lines = text.lines().map(str::trim);
    if lines.next() != Some(CALIBRATION_HEADER) {
        return Err(bad(format!("missing `{CALIBRATION_HEADER}` header")));
    }
    let mut chanspec: Option<ChannelSpec> = None;
    let mut n_rx: Option<usize> = None;
    let mut n_sub: Option<usize> = None;
    let mut geom = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();

    for (lineno, line) in lines.enumerate() {
        let lineno = lineno + 2;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        match key {
            "chanspec" => {
                chanspec = Some(
                    rest.parse()
                        .map_err(|e| bad(format!("line {lineno}: {e}")))?,
                )
            }
            "n_rx" | "n_sub" => {
                let v: usize = rest
                    .parse()
                    .map_err(|_| bad(format!("line {lineno}: bad {key} `{rest}`")))?;
                if key == "n_rx" {
                    n_rx = Some(v);
                } else {
                    n_sub = Some(v);
                }
            }
            "geometry" => {
                let pts = rest
                    .split_whitespace()
                    .map(|p| {
                        let (x, y) = p.split_once(',').ok_or(())?;
                        Ok([x.parse().map_err(|_| ())?, y.parse().map_err(|_| ())?])
                    })
                    .collect::<std::result::Result<Vec<[f64; 2]>, ()>>()
                    .map_err(|_| bad(format!("line {lineno}: bad geometry")))?;
                geom = Some(ArrayGeometry::new(pts)?);
            }
            _ => {
                let row = line
                    .split(',')
                    .map(|v| v.trim().parse::<f64>().map(f64::to_radians))
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| bad(format!("line {lineno}: unparsable phase row")))?;
                rows.push(row);
            }
        }
    }

    let chanspec = chanspec.ok_or_else(|| bad("missing chanspec"))?;
    let n_rx = n_rx.ok_or_else(|| bad("missing n_rx"))?;
    let n_sub = n_sub.ok_or_else(|| bad("missing n_sub"))?;
    if n_sub != chanspec.n_sub() {
        return Err(bad(format!(
            "n_sub {n_sub} does not match chanspec {chanspec} ({})",
            chanspec.n_sub()
        )));
    }
    if rows.len() != n_rx {
        return Err(bad(format!(
            "expected {n_rx} phase rows, found {}",
            rows.len()
        )));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != n_sub) {
        return Err(bad(format!(
            "phase row has {} values, expected {n_sub}",
            r.len()
        )));
    }
    if let Some(g) = &geom {
        if g.len() != n_rx {
            return Err(bad(format!(
                "geometry has {} antennas, n_rx is {n_rx}",
                g.len()
            )));
        }
    }
    let flat: Vec<f64> = rows.concat();
    let cal = CalibrationMatrix::new(DMatrix::from_row_slice(n_rx, n_sub, &flat), chanspec)?;
    Ok((cal, geom))
}

pub fn read_calibration(path: &Path) -> Result<(CalibrationMatrix, Option<ArrayGeometry>)> {
    let text =
        std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    parse_calibration(&text)
}

pub fn write_calibration(
    path: &Path,
    cal: &CalibrationMatrix,
    geom: Option<&ArrayGeometry>,
) -> Result<()> {
    std::fs::write(path, format_calibration(cal, geom))
        .map_err(|e| bad(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (CalibrationMatrix, ArrayGeometry) {
        let ch = ChannelSpec::new(36, 20).unwrap();
        let phase = DMatrix::from_fn(2, 52, |i, j| (i as f64 * 0.3 - j as f64 * 0.01).sin());
        let geom = ArrayGeometry::new(vec![[0.0, 0.0], [0.0, 0.025]]).unwrap();
        (CalibrationMatrix::new(phase, ch).unwrap(), geom)
    }

    #[test]
    fn roundtrip() {
        let (cal, geom) = sample();
        let text = format_calibration(&cal, Some(&geom));
        let (back, g) = parse_calibration(&text).unwrap();
        assert_eq!(g.unwrap(), geom);
        assert_eq!(back.chanspec, cal.chanspec);
        assert!((back.phase - &cal.phase).abs().max() < 1e-9);
    }

    #[test]
    fn geometry_is_optional() {
        let (cal, _) = sample();
        let (_, g) = parse_calibration(&format_calibration(&cal, None)).unwrap();
        assert!(g.is_none());
    }

    #[test]
    fn rejects_malformed() {
        let (cal, geom) = sample();
        let good = format_calibration(&cal, Some(&geom));
        assert!(parse_calibration(&good.replace("# wicsi", "# other")).is_err());
        assert!(parse_calibration(&good.replace("n_sub 52", "n_sub 108")).is_err());
        assert!(parse_calibration(&good.replace("n_rx 2", "n_rx 3")).is_err());
        let truncated: String = good.lines().take(6).map(|l| format!("{l}\n")).collect();
        assert!(parse_calibration(&truncated).is_err());
        assert!(parse_calibration(&format!("{good}1,2,x\n")).is_err());
    }
}
