//! Domain types and channel math shared by every other module.
//!
//! Angles are radians throughout the library; only file formats and the CLI
//! speak degrees. CSI tensors are stored rx-major, then tx, then subcarrier.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::{Complex32, Complex64};
use thiserror::Error;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// OFDM subcarrier spacing for 802.11n/ac, Hz.
pub const SUBCARRIER_SPACING_HZ: f64 = 312_500.0;

pub const MAX_ANTENNAS: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CsiError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("chanspec mismatch: expected {expected}, got {actual}")]
    ChanspecMismatch {
        expected: ChannelSpec,
        actual: ChannelSpec,
    },
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
}

pub type Result<T> = std::result::Result<T, CsiError>;

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(angle: f64) -> f64 {
    let a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a - 2.0 * PI
    } else {
        a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Bandwidth {
    Mhz20,
    Mhz40,
    Mhz80,
}

impl Bandwidth {
    pub fn from_mhz(mhz: u32) -> Result<Self> {
        match mhz {
            20 => Ok(Bandwidth::Mhz20),
            40 => Ok(Bandwidth::Mhz40),
            80 => Ok(Bandwidth::Mhz80),
            other => Err(CsiError::Config(format!(
                "unsupported bandwidth {other} MHz"
            ))),
        }
    }

    pub fn mhz(self) -> u32 {
        match self {
            Bandwidth::Mhz20 => 20,
            Bandwidth::Mhz40 => 40,
            Bandwidth::Mhz80 => 80,
        }
    }

    /// 5 GHz channel numbers whose center sits at this bandwidth.
    pub fn channel_plan(self) -> &'static [u16] {
        match self {
            Bandwidth::Mhz20 => &[
                36, 40, 44, 48, 52, 56, 60, 64, 100, 104, 108, 112, 116, 120, 124, 128, 132, 136,
                140, 144, 149, 153, 157, 161, 165,
            ],
            Bandwidth::Mhz40 => &[38, 46, 54, 62, 102, 110, 118, 126, 134, 142, 151, 159],
            Bandwidth::Mhz80 => &[42, 58, 106, 122, 138, 155],
        }
    }

    /// Signed OFDM indices of the data subcarriers (pilots, DC and guards removed).
    pub fn subcarrier_indices(self) -> Vec<i32> {
        let (edge, inner, pilots): (i32, i32, &[i32]) = match self {
            Bandwidth::Mhz20 => (28, 1, &[7, 21]),
            Bandwidth::Mhz40 => (58, 2, &[11, 25, 53]),
            Bandwidth::Mhz80 => (122, 2, &[11, 39, 75, 103]),
        };
        (-edge..=edge)
            .filter(|k| k.abs() >= inner && !pilots.contains(&k.abs()))
            .collect()
    }

    pub fn subcarrier_count(self) -> usize {
        match self {
            Bandwidth::Mhz20 => 52,
            Bandwidth::Mhz40 => 108,
            Bandwidth::Mhz80 => 234,
        }
    }
}

/// A 5 GHz sensing channel: channel number plus bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChannelSpec {
    channel: u16,
    bandwidth: Bandwidth,
}

impl ChannelSpec {
    pub fn new(channel: u16, bandwidth_mhz: u32) -> Result<Self> {
        let bandwidth = Bandwidth::from_mhz(bandwidth_mhz)?;
        if !bandwidth.channel_plan().contains(&channel) {
            return Err(CsiError::Config(format!(
                "channel {channel} is not a {bandwidth_mhz} MHz center channel"
            )));
        }
        Ok(Self { channel, bandwidth })
    }

    pub fn channel_number(&self) -> u16 {
        self.channel
    }

    pub fn bandwidth(&self) -> Bandwidth {
        self.bandwidth
    }

    pub fn bandwidth_mhz(&self) -> u32 {
        self.bandwidth.mhz()
    }

    pub fn center_freq_hz(&self) -> f64 {
        5000e6 + 5e6 * f64::from(self.channel)
    }

    pub fn n_sub(&self) -> usize {
        self.bandwidth.subcarrier_count()
    }

    pub fn subcarrier_indices(&self) -> Vec<i32> {
        self.bandwidth.subcarrier_indices()
    }

    /// Absolute frequency of each usable subcarrier, ascending.
    pub fn subcarrier_frequencies(&self) -> Vec<f64> {
        let fc = self.center_freq_hz();
        self.subcarrier_indices()
            .into_iter()
            .map(|k| fc + SUBCARRIER_SPACING_HZ * f64::from(k))
            .collect()
    }

    /// Wavelength of the center frequency.
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.center_freq_hz()
    }

    /// Every 80 MHz channel, the set the scanner sweeps by default.
    pub fn all_80mhz() -> Vec<ChannelSpec> {
        Bandwidth::Mhz80
            .channel_plan()
            .iter()
            .map(|&channel| ChannelSpec {
                channel,
                bandwidth: Bandwidth::Mhz80,
            })
            .collect()
    }
}

impl fmt::Display for ChannelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.channel, self.bandwidth.mhz())
    }
}

impl FromStr for ChannelSpec {
    type Err = CsiError;

    /// Parses `"155/80"`.
    fn from_str(s: &str) -> Result<Self> {
        let (ch, bw) = s
            .trim()
            .split_once('/')
            .ok_or_else(|| CsiError::Config(format!("chanspec `{s}` is not <channel>/<mhz>")))?;
        let ch = ch
            .parse()
            .map_err(|_| CsiError::Config(format!("bad channel number in `{s}`")))?;
        let bw = bw
            .parse()
            .map_err(|_| CsiError::Config(format!("bad bandwidth in `{s}`")))?;
        ChannelSpec::new(ch, bw)
    }
}

pub fn subcarrier_frequencies(chanspec: &ChannelSpec) -> Vec<f64> {
    chanspec.subcarrier_frequencies()
}

pub fn wavelength(chanspec: &ChannelSpec) -> f64 {
    chanspec.wavelength()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct MacAddr(pub [u8; 6]);

impl fmt::Display for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.0;
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            b[0], b[1], b[2], b[3], b[4], b[5]
        )
    }
}

impl FromStr for MacAddr {
    type Err = CsiError;

    fn from_str(s: &str) -> Result<Self> {
        let mut out = [0u8; 6];
        let mut parts = s.trim().split(':');
        for byte in out.iter_mut() {
            let part = parts
                .next()
                .filter(|p| p.len() == 2)
                .ok_or_else(|| CsiError::Config(format!("bad MAC address `{s}`")))?;
            *byte = u8::from_str_radix(part, 16)
                .map_err(|_| CsiError::Config(format!("bad MAC address `{s}`")))?;
        }
        if parts.next().is_some() {
            return Err(CsiError::Config(format!("bad MAC address `{s}`")));
        }
        Ok(MacAddr(out))
    }
}

/// Robot or sensor pose in SE(2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// Relative 2-D antenna positions; the first antenna is the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    positions: Vec<[f64; 2]>,
}

impl ArrayGeometry {
    pub fn new(positions: Vec<[f64; 2]>) -> Result<Self> {
        if positions.is_empty() || positions.len() > MAX_ANTENNAS {
            return Err(CsiError::Config(format!(
                "array needs 1..={MAX_ANTENNAS} antennas, got {}",
                positions.len()
            )));
        }
        if positions[0] != [0.0, 0.0] {
            return Err(CsiError::Config(
                "reference antenna must sit at the origin".into(),
            ));
        }
        if positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(CsiError::Config("antenna position is not finite".into()));
        }
        for (i, a) in positions.iter().enumerate() {
            for b in &positions[i + 1..] {
                if a == b {
                    return Err(CsiError::Config(format!(
                        "duplicate antenna position ({}, {})",
                        a[0], a[1]
                    )));
                }
            }
        }
        Ok(Self { positions })
    }

    /// `n` antennas along the local y axis, `spacing` meters apart.
    pub fn uniform_linear(n: usize, spacing: f64) -> Result<Self> {
        Self::new((0..n).map(|i| [0.0, i as f64 * spacing]).collect())
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Returns `(unit direction, spacing)` if antennas are equally spaced on a
    /// line, in index order.
    pub fn uniform_linear_axis(&self) -> Option<([f64; 2], f64)> {
        if self.positions.len() < 2 {
            return None;
        }
        let step = self.positions[1];
        let spacing = step[0].hypot(step[1]);
        let tol = 1e-9 * spacing.max(1e-3);
        for (i, p) in self.positions.iter().enumerate() {
            let expect = [step[0] * i as f64, step[1] * i as f64];
            if (p[0] - expect[0]).abs() > tol || (p[1] - expect[1]).abs() > tol {
                return None;
            }
        }
        Some(([step[0] / spacing, step[1] / spacing], spacing))
    }
}

/// Expected bearing of the transmitter in the robot's local frame.
///
/// Evaluates `pi/2 - (atan2(r_y - t_y, r_x - t_x) - r_theta)`, wrapped to
/// (-pi, pi]. This is the bearing convention used by every estimator.
pub fn ground_truth_bearing(robot: &Pose2D, tx: [f64; 2]) -> Result<f64> {
    let dy = robot.y - tx[1];
    let dx = robot.x - tx[0];
    if dx.hypot(dy) < 1e-9 {
        return Err(CsiError::DegenerateGeometry(
            "robot and transmitter coincide".into(),
        ));
    }
    Ok(wrap_angle(PI / 2.0 - (dy.atan2(dx) - robot.theta)))
}

/// World-frame direction (radians) of the ray from a sensor at `pose` toward
/// a source observed at local `bearing`; the inverse of [`ground_truth_bearing`].
pub fn bearing_to_world_direction(pose: &Pose2D, bearing: f64) -> f64 {
    wrap_angle(pose.theta - bearing - PI / 2.0)
}

pub fn steering_vector(theta: f64, geom: &ArrayGeometry, lambda: f64) -> Vec<Complex64> {
    let k = 2.0 * PI / lambda;
    let (s, c) = theta.sin_cos();
    geom.positions
        .iter()
        .map(|a| Complex64::from_polar(1.0, k * (c * a[0] + s * a[1])))
        .collect()
}

/// The noiseless, calibration-free CSI the robot should see from `tx`,
/// shape `n_rx x n_sub`. Columns are identical (center-wavelength model).
pub fn expected_csi(
    robot: &Pose2D,
    tx: [f64; 2],
    geom: &ArrayGeometry,
    chanspec: &ChannelSpec,
) -> Result<DMatrix<Complex64>> {
    let theta = ground_truth_bearing(robot, tx)?;
    let sv = steering_vector(theta, geom, chanspec.wavelength());
    Ok(DMatrix::from_fn(geom.len(), chanspec.n_sub(), |i, _| sv[i]))
}

/// One packet's channel tensor plus radio metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiFrame {
    chanspec: ChannelSpec,
    n_rx: usize,
    n_tx: usize,
    csi: Vec<Complex32>,
    pub rssi_dbm: f64,
    pub source_mac: MacAddr,
    pub seq: u16,
    pub timestamp_ns: u64,
}

impl CsiFrame {
    /// `csi` is laid out `[rx][tx][sub]`, `n_sub` taken from the chanspec.
    pub fn new(
        chanspec: ChannelSpec,
        n_rx: usize,
        n_tx: usize,
        csi: Vec<Complex32>,
    ) -> Result<Self> {
        if !(1..=MAX_ANTENNAS).contains(&n_rx) || !(1..=MAX_ANTENNAS).contains(&n_tx) {
            return Err(CsiError::InvalidFrame(format!(
                "antenna counts {n_rx}x{n_tx} outside 1..={MAX_ANTENNAS}"
            )));
        }
        let expected = n_rx * n_tx * chanspec.n_sub();
        if csi.len() != expected {
            return Err(CsiError::InvalidFrame(format!(
                "payload has {} entries, expected {expected}",
                csi.len()
            )));
        }
        if csi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(CsiError::InvalidFrame("non-finite CSI entry".into()));
        }
        Ok(Self {
            chanspec,
            n_rx,
            n_tx,
            csi,
            rssi_dbm: 0.0,
            source_mac: MacAddr::default(),
            seq: 0,
            timestamp_ns: 0,
        })
    }

    /// Builds a single-tx frame from an `n_rx x n_sub` matrix.
    pub fn from_matrix(chanspec: ChannelSpec, m: &DMatrix<Complex64>) -> Result<Self> {
        if m.ncols() != chanspec.n_sub() {
            return Err(CsiError::DimensionMismatch(format!(
                "matrix has {} subcarriers, chanspec {chanspec} needs {}",
                m.ncols(),
                chanspec.n_sub()
            )));
        }
        let csi = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| to_c32(m[(i, j)]))
            .collect();
        Self::new(chanspec, m.nrows(), 1, csi)
    }

    pub fn with_meta(mut self, rssi_dbm: f64, source_mac: MacAddr, seq: u16, ts: u64) -> Self {
        self.rssi_dbm = rssi_dbm;
        self.source_mac = source_mac;
        self.seq = seq;
        self.timestamp_ns = ts;
        self
    }

    pub fn chanspec(&self) -> ChannelSpec {
        self.chanspec
    }

    pub fn n_rx(&self) -> usize {
        self.n_rx
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn n_sub(&self) -> usize {
        self.chanspec.n_sub()
    }

    pub fn csi(&self) -> &[Complex32] {
        &self.csi
    }

    fn index(&self, rx: usize, tx: usize, sub: usize) -> usize {
        (rx * self.n_tx + tx) * self.n_sub() + sub
    }

    pub fn get(&self, rx: usize, tx: usize, sub: usize) -> Complex32 {
        self.csi[self.index(rx, tx, sub)]
    }

    /// The `n_rx x n_sub` slice for one transmit antenna, widened to f64.
    pub fn tx_slice(&self, tx: usize) -> DMatrix<Complex64> {
        assert!(tx < self.n_tx, "tx index {tx} out of range");
        DMatrix::from_fn(self.n_rx, self.n_sub(), |i, j| {
            let z = self.get(i, tx, j);
            Complex64::new(f64::from(z.re), f64::from(z.im))
        })
    }

    /// Replaces the CSI of one transmit antenna.
    pub fn set_tx_slice(&mut self, tx: usize, m: &DMatrix<Complex64>) -> Result<()> {
        if m.nrows() != self.n_rx || m.ncols() != self.n_sub() || tx >= self.n_tx {
            return Err(CsiError::DimensionMismatch(format!(
                "slice {}x{} (tx {tx}) does not fit frame {}x{}x{}",
                m.nrows(),
                m.ncols(),
                self.n_rx,
                self.n_tx,
                self.n_sub()
            )));
        }
        for i in 0..self.n_rx {
            for j in 0..self.n_sub() {
                let idx = self.index(i, tx, j);
                self.csi[idx] = to_c32(m[(i, j)]);
            }
        }
        Ok(())
    }

    /// Swaps the antenna axes of one receive antenna's data, so transmit
    /// antennas play the role of the array (angle-of-departure estimation).
    pub fn departure_view(&self, rx: usize) -> Result<CsiFrame> {
        if rx >= self.n_rx {
            return Err(CsiError::DimensionMismatch(format!(
                "rx index {rx} out of range for {} antennas",
                self.n_rx
            )));
        }
        let n_sub = self.n_sub();
        let csi = (0..self.n_tx)
            .flat_map(|k| (0..n_sub).map(move |j| (k, j)))
            .map(|(k, j)| self.get(rx, k, j))
            .collect();
        let mut out = CsiFrame::new(self.chanspec, self.n_tx, 1, csi)?;
        out.rssi_dbm = self.rssi_dbm;
        out.source_mac = self.source_mac;
        out.seq = self.seq;
        out.timestamp_ns = self.timestamp_ns;
        Ok(out)
    }

    /// Multiplies every entry by `phase` (unit complex).
    pub fn rotate(&mut self, phase: Complex64) {
        for z in &mut self.csi {
            *z = to_c32(Complex64::new(f64::from(z.re), f64::from(z.im)) * phase);
        }
    }
}

pub(crate) fn to_c32(z: Complex64) -> Complex32 {
    Complex32::new(z.re as f32, z.im as f32)
}

/// Per-antenna, per-subcarrier phase corrections.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationMatrix {
    pub phase: DMatrix<f64>,
    pub chanspec: ChannelSpec,
}

impl CalibrationMatrix {
    pub fn new(phase: DMatrix<f64>, chanspec: ChannelSpec) -> Result<Self> {
        if phase.ncols() != chanspec.n_sub() {
            return Err(CsiError::DimensionMismatch(format!(
                "calibration has {} subcarriers, chanspec {chanspec} needs {}",
                phase.ncols(),
                chanspec.n_sub()
            )));
        }
        if phase.iter().any(|v| !v.is_finite()) {
            return Err(CsiError::Config("non-finite calibration phase".into()));
        }
        Ok(Self { phase, chanspec })
    }

    pub fn identity(n_rx: usize, chanspec: ChannelSpec) -> Self {
        Self {
            phase: DMatrix::zeros(n_rx, chanspec.n_sub()),
            chanspec,
        }
    }

    pub fn n_rx(&self) -> usize {
        self.phase.nrows()
    }

    /// `exp(j * phase)`, element-wise.
    pub fn complex(&self) -> DMatrix<Complex64> {
        self.phase.map(|p| Complex64::from_polar(1.0, p))
    }

    pub fn negated(&self) -> Self {
        Self {
            phase: -&self.phase,
            chanspec: self.chanspec,
        }
    }

    /// Re-expresses the calibration relative to antenna 0 (row 0 becomes zero).
    pub fn relative_to_reference(&self) -> Self {
        let mut phase = self.phase.clone();
        for j in 0..phase.ncols() {
            let r = phase[(0, j)];
            for i in 0..phase.nrows() {
                phase[(i, j)] = wrap_angle(phase[(i, j)] - r);
            }
        }
        Self {
            phase,
            chanspec: self.chanspec,
        }
    }
}

/// Hadamard product of the calibration with every transmit slice of `frame`.
pub fn apply_calibration(cal: &CalibrationMatrix, frame: &CsiFrame) -> Result<CsiFrame> {
    if cal.chanspec != frame.chanspec {
        return Err(CsiError::ChanspecMismatch {
            expected: cal.chanspec,
            actual: frame.chanspec,
        });
    }
    if cal.n_rx() != frame.n_rx {
        return Err(CsiError::DimensionMismatch(format!(
            "calibration has {} antennas, frame has {}",
            cal.n_rx(),
            frame.n_rx
        )));
    }
    let c = cal.complex();
    let mut out = frame.clone();
    for i in 0..frame.n_rx {
        for k in 0..frame.n_tx {
            for j in 0..frame.n_sub() {
                let idx = frame.index(i, k, j);
                let z = frame.csi[idx];
                out.csi[idx] = to_c32(c[(i, j)] * Complex64::new(f64::from(z.re), f64::from(z.im)));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BearingEstimate {
    pub theta: f64,
    pub strength: f64,
    pub rssi_dbm: f64,
    pub source_mac: MacAddr,
    pub timestamp_ns: u64,
}

/// Bearing x relative-distance likelihood grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile2D {
    /// `n_theta x n_dist`.
    pub values: DMatrix<f64>,
    pub theta_grid: Vec<f64>,
    pub dist_grid: Vec<f64>,
}

impl Profile2D {
    pub fn new(values: DMatrix<f64>, theta_grid: Vec<f64>, dist_grid: Vec<f64>) -> Result<Self> {
        if values.nrows() != theta_grid.len() || values.ncols() != dist_grid.len() {
            return Err(CsiError::DimensionMismatch(format!(
                "profile {}x{} does not match grids {}x{}",
                values.nrows(),
                values.ncols(),
                theta_grid.len(),
                dist_grid.len()
            )));
        }
        check_grid(&theta_grid, "theta")?;
        check_grid(&dist_grid, "distance")?;
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(CsiError::Config(
                "profile values must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            values,
            theta_grid,
            dist_grid,
        })
    }

    /// Index of the strongest cell, ties going to the smallest (theta, dist).
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0, 0);
        let mut best_v = f64::NEG_INFINITY;
        for i in 0..self.values.nrows() {
            for j in 0..self.values.ncols() {
                if self.values[(i, j)] > best_v {
                    best_v = self.values[(i, j)];
                    best = (i, j);
                }
            }
        }
        best
    }

    /// Rescales so the maximum is 1; all-zero profiles are left alone.
    pub fn normalize(&mut self) {
        let max = self.values.max();
        if max > 0.0 {
            self.values /= max;
        }
    }

    pub fn same_grid(&self, other: &Profile2D) -> bool {
        self.theta_grid == other.theta_grid && self.dist_grid == other.dist_grid
    }
}

pub(crate) fn check_grid(grid: &[f64], name: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(CsiError::Config(format!("{name} grid is empty")));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|v| !v.is_finite()) {
        return Err(CsiError::Config(format!(
            "{name} grid must be finite and strictly increasing"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ch155() -> ChannelSpec {
        ChannelSpec::new(155, 80).unwrap()
    }

    #[test]
    fn subcarrier_counts_and_symmetry() {
        for (bw, n) in [(20, 52), (40, 108), (80, 234)] {
            let ch =
                ChannelSpec::new(Bandwidth::from_mhz(bw).unwrap().channel_plan()[0], bw).unwrap();
            let idx = ch.subcarrier_indices();
            assert_eq!(idx.len(), n);
            assert_eq!(ch.n_sub(), n);
            let mut neg: Vec<i32> = idx.iter().map(|k| -k).collect();
            neg.sort();
            assert_eq!(neg, idx);
            let f = ch.subcarrier_frequencies();
            assert!(f.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn eighty_mhz_first_subcarrier() {
        let ch = ch155();
        assert_eq!(ch.center_freq_hz(), 5775e6);
        let f = ch.subcarrier_frequencies();
        assert_eq!(f.len(), 234);
        assert_eq!(f[0], 5775e6 - 122.0 * 312.5e3);
        assert!(!ch.subcarrier_indices().contains(&11));
        assert!(!ch.subcarrier_indices().contains(&-103));
    }

    #[test]
    fn unsupported_bandwidth_rejected() {
        assert!(matches!(
            ChannelSpec::new(155, 160),
            Err(CsiError::Config(_))
        ));
        assert!(matches!(ChannelSpec::new(36, 80), Err(CsiError::Config(_))));
        assert_eq!("155/80".parse::<ChannelSpec>().unwrap(), ch155());
        assert!("155".parse::<ChannelSpec>().is_err());
    }

    #[test]
    fn wavelengths() {
        assert!((ch155().wavelength() - 0.05191).abs() < 1e-5);
        let ch36 = ChannelSpec::new(36, 20).unwrap();
        assert_eq!(ch36.center_freq_hz(), 5180e6);
        assert!((ch36.wavelength() - 0.05788).abs() < 1e-5);
    }

    #[test]
    fn bearing_examples() {
        let b = ground_truth_bearing(&Pose2D::new(1.0, 0.0, 0.0), [0.0, 0.0]).unwrap();
        assert!((b - PI / 2.0).abs() < 1e-12);
        let b = ground_truth_bearing(&Pose2D::new(0.0, 1.0, 0.0), [0.0, 0.0]).unwrap();
        assert!(b.abs() < 1e-12);
        assert!(matches!(
            ground_truth_bearing(&Pose2D::new(2.0, 3.0, 0.1), [2.0, 3.0]),
            Err(CsiError::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn world_direction_inverts_bearing() {
        let robot = Pose2D::new(1.5, -2.0, 0.7);
        let tx = [4.0, 3.0];
        let b = ground_truth_bearing(&robot, tx).unwrap();
        let dir = bearing_to_world_direction(&robot, b);
        let expect = (tx[1] - robot.y).atan2(tx[0] - robot.x);
        assert!(wrap_angle(dir - expect).abs() < 1e-12);
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_angle(0.0), 0.0);
    }

    #[test]
    fn steering_half_wavelength_line() {
        let lambda = 0.05;
        let geom = ArrayGeometry::uniform_linear(4, lambda / 2.0).unwrap();
        let sv = steering_vector(PI / 2.0, &geom, lambda);
        assert_eq!(sv[0], Complex64::new(1.0, 0.0));
        for (i, z) in sv.iter().enumerate() {
            let expect = Complex64::from_polar(1.0, PI * i as f64);
            assert!((z - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn expected_csi_broadside_is_all_ones() {
        let geom = ArrayGeometry::uniform_linear(4, 0.02).unwrap();
        // bearing 0 is perpendicular to a y-axis array
        let robot = Pose2D::new(0.0, 1.0, 0.0);
        let w = expected_csi(&robot, [0.0, 0.0], &geom, &ch155()).unwrap();
        assert!(w
            .iter()
            .all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn expected_csi_columns_identical() {
        let geom =
            ArrayGeometry::new(vec![[0.0, 0.0], [0.02, 0.0], [0.0, 0.02], [0.02, 0.02]]).unwrap();
        let w = expected_csi(&Pose2D::new(2.0, 1.0, 0.3), [0.0, 0.0], &geom, &ch155()).unwrap();
        for j in 1..w.ncols() {
            assert_eq!(w.column(j), w.column(0));
        }
        assert!(w.row(0).iter().all(|z| *z == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn geometry_validation() {
        assert!(ArrayGeometry::new(vec![[0.1, 0.0]]).is_err());
        assert!(ArrayGeometry::new(vec![[0.0, 0.0], [0.0, 0.0]]).is_err());
        assert!(ArrayGeometry::new(vec![]).is_err());
        let ula = ArrayGeometry::uniform_linear(4, 0.026).unwrap();
        let (dir, d) = ula.uniform_linear_axis().unwrap();
        assert!((d - 0.026).abs() < 1e-12 && dir == [0.0, 1.0]);
        let sq = ArrayGeometry::new(vec![[0.0, 0.0], [0.02, 0.0], [0.0, 0.02]]).unwrap();
        assert!(sq.uniform_linear_axis().is_none());
    }

    #[test]
    fn mac_roundtrip() {
        let m: MacAddr = "aa:bb:0c:dd:ee:01".parse().unwrap();
        assert_eq!(m.0, [0xaa, 0xbb, 0x0c, 0xdd, 0xee, 0x01]);
        assert_eq!(m.to_string(), "aa:bb:0c:dd:ee:01");
        assert!("aa:bb:cc".parse::<MacAddr>().is_err());
        assert!("aa:bb:cc:dd:ee:ff:00".parse::<MacAddr>().is_err());
    }

    #[test]
    fn calibration_identity_and_mismatch() {
        let ch = ch155();
        let frame = CsiFrame::new(ch, 2, 1, vec![Complex32::new(0.5, -1.0); 2 * 234]).unwrap();
        let id = CalibrationMatrix::identity(2, ch);
        assert_eq!(apply_calibration(&id, &frame).unwrap(), frame);
        let other = ChannelSpec::new(42, 80).unwrap();
        assert!(matches!(
            apply_calibration(&CalibrationMatrix::identity(2, other), &frame),
            Err(CsiError::ChanspecMismatch { .. })
        ));
        assert!(matches!(
            apply_calibration(&CalibrationMatrix::identity(3, ch), &frame),
            Err(CsiError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn frame_rejects_bad_payloads() {
        let ch = ch155();
        assert!(CsiFrame::new(ch, 5, 1, vec![Complex32::new(0.0, 0.0); 5 * 234]).is_err());
        assert!(CsiFrame::new(ch, 1, 1, vec![Complex32::new(0.0, 0.0); 233]).is_err());
        let mut bad = vec![Complex32::new(0.0, 0.0); 234];
        bad[3].re = f32::NAN;
        assert!(CsiFrame::new(ch, 1, 1, bad).is_err());
    }

    #[test]
    fn departure_view_swaps_axes() {
        let ch = ChannelSpec::new(36, 20).unwrap();
        let csi: Vec<Complex32> = (0..2 * 3 * 52)
            .map(|v| Complex32::new(v as f32, 0.0))
            .collect();
        let f = CsiFrame::new(ch, 2, 3, csi).unwrap();
        let d = f.departure_view(1).unwrap();
        assert_eq!((d.n_rx(), d.n_tx()), (3, 1));
        assert_eq!(d.get(2, 0, 5), f.get(1, 2, 5));
    }
}
