//! Bearing estimation: Bartlett bearing/range profiles, MUSIC, SpotFi-style
//! joint angle/delay search, incoherent profile averaging and bearing-only
//! triangulation.
//!
//! All estimators take calibrated frames. The distance axis of a profile is
//! the path length `c * tau` of each component; with real hardware only the
//! differences between paths are meaningful.

mod spotfi;
mod triangulate;

pub use spotfi::{spotfi_estimate, spotfi_profile, uniform_subcarrier_grid, PathEstimate};
pub use triangulate::{triangulate, Triangulation};

use std::collections::{HashMap, VecDeque};
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::csi::{
    check_grid, steering_vector, ArrayGeometry, BearingEstimate, ChannelSpec, CsiError, CsiFrame,
    MacAddr, Profile2D, SPEED_OF_LIGHT,
};

#[derive(Debug, Error)]
pub enum AoaError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Csi(#[from] CsiError),
}

pub type Result<T> = std::result::Result<T, AoaError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Algorithm {
    #[default]
    Bartlett,
    Music,
    Spotfi,
}

impl std::str::FromStr for Algorithm {
    type Err = AoaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bartlett" => Ok(Self::Bartlett),
            "music" => Ok(Self::Music),
            "spotfi" => Ok(Self::Spotfi),
            other => Err(AoaError::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Bartlett => "bartlett",
            Self::Music => "music",
            Self::Spotfi => "spotfi",
        })
    }
}

/// SpotFi sub-array sizes. `n_sub_sub = None` means half the interpolated
/// subcarrier grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Smoothing {
    pub n_ant_sub: usize,
    pub n_sub_sub: Option<usize>,
}

impl Default for Smoothing {
    fn default() -> Self {
        Self {
            n_ant_sub: 2,
            n_sub_sub: None,
        }
    }
}

pub const DEFAULT_RSSI_FLOOR_DBM: f64 = -65.0;
pub const DEFAULT_WINDOW: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct AoaConfig {
    pub theta_grid: Vec<f64>,
    pub dist_grid: Vec<f64>,
    pub rssi_floor_dbm: f64,
    pub algorithm: Algorithm,
    pub smoothing: Smoothing,
    /// Packets per averaging window.
    pub window: usize,
    /// Assumed number of sources (MUSIC noise subspace, SpotFi peaks).
    pub sources: usize,
}

impl Default for AoaConfig {
    fn default() -> Self {
        Self {
            theta_grid: default_theta_grid(360),
            dist_grid: default_dist_grid(30.0, 0.25),
            rssi_floor_dbm: DEFAULT_RSSI_FLOOR_DBM,
            algorithm: Algorithm::Bartlett,
            smoothing: Smoothing::default(),
            window: DEFAULT_WINDOW,
            sources: 1,
        }
    }
}

/// `n` evenly spaced bearings covering (-pi, pi].
pub fn default_theta_grid(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|k| -PI + 2.0 * PI * k as f64 / n as f64)
        .collect()
}

/// `0, step, ..., max` inclusive.
pub fn default_dist_grid(max: f64, step: f64) -> Vec<f64> {
    let n = (max / step).round() as usize;
    (0..=n).map(|k| k as f64 * step).collect()
}

impl AoaConfig {
    pub fn validate(&self) -> Result<()> {
        check_grid(&self.theta_grid, "theta")?;
        check_grid(&self.dist_grid, "distance")?;
        if self.window == 0 {
            return Err(AoaError::Config("averaging window must be >= 1".into()));
        }
        if self.sources == 0 {
            return Err(AoaError::Config("source count must be >= 1".into()));
        }
        if self.smoothing.n_ant_sub == 0 || self.smoothing.n_sub_sub == Some(0) {
            return Err(AoaError::Config("smoothing sizes must be >= 1".into()));
        }
        if !self.rssi_floor_dbm.is_finite() {
            return Err(AoaError::Config("rssi floor must be finite".into()));
        }
        Ok(())
    }

    /// Distance grid as delays in seconds.
    pub fn tau_grid(&self) -> Vec<f64> {
        self.dist_grid.iter().map(|d| d / SPEED_OF_LIGHT).collect()
    }
}

fn check_frame(frame: &CsiFrame, geom: &ArrayGeometry) -> Result<()> {
    if frame.n_rx() != geom.len() {
        return Err(AoaError::DimensionMismatch(format!(
            "frame has {} rx antennas, geometry has {}",
            frame.n_rx(),
            geom.len()
        )));
    }
    Ok(())
}

/// Precomputed steering and range-compensation matrices for one
/// (geometry, channel, grid) combination.
#[derive(Debug, Clone)]
pub struct BartlettPlan {
    chanspec: ChannelSpec,
    n_rx: usize,
    /// `n_theta x n_rx`, conjugated steering vectors.
    steer_conj: DMatrix<Complex64>,
    /// `n_sub x n_dist`, `exp(+j 2 pi (f_j - f_c) d / c)`.
    range: DMatrix<Complex64>,
    theta_grid: Vec<f64>,
    dist_grid: Vec<f64>,
}

impl BartlettPlan {
    pub fn new(geom: &ArrayGeometry, chanspec: ChannelSpec, cfg: &AoaConfig) -> Result<Self> {
        cfg.validate()?;
        let lambda = chanspec.wavelength();
        let n_rx = geom.len();
        let mut steer_conj = DMatrix::zeros(cfg.theta_grid.len(), n_rx);
        for (t, &theta) in cfg.theta_grid.iter().enumerate() {
            for (i, s) in steering_vector(theta, geom, lambda).into_iter().enumerate() {
                steer_conj[(t, i)] = s.conj();
            }
        }
        // Dropping the carrier term only changes a unit factor per distance.
        let fc = chanspec.center_freq_hz();
        let freqs = chanspec.subcarrier_frequencies();
        let range = DMatrix::from_fn(freqs.len(), cfg.dist_grid.len(), |j, k| {
            Complex64::from_polar(
                1.0,
                2.0 * PI * (freqs[j] - fc) * cfg.dist_grid[k] / SPEED_OF_LIGHT,
            )
        });
        Ok(Self {
            chanspec,
            n_rx,
            steer_conj,
            range,
            theta_grid: cfg.theta_grid.clone(),
            dist_grid: cfg.dist_grid.clone(),
        })
    }

    /// Unnormalized power, summed over transmit antennas.
    pub fn raw_power(&self, frame: &CsiFrame) -> Result<DMatrix<f64>> {
        if frame.chanspec() != self.chanspec {
            return Err(CsiError::ChanspecMismatch {
                expected: self.chanspec,
                actual: frame.chanspec(),
            }
            .into());
        }
        if frame.n_rx() != self.n_rx {
            return Err(AoaError::DimensionMismatch(format!(
                "frame has {} rx antennas, plan expects {}",
                frame.n_rx(),
                self.n_rx
            )));
        }
        let mut power = DMatrix::zeros(self.theta_grid.len(), self.dist_grid.len());
        for tx in 0..frame.n_tx() {
            let beam = &self.steer_conj * frame.tx_slice(tx);
            let field = beam * &self.range;
            power += field.map(|z| z.norm_sqr());
        }
        Ok(power)
    }

    pub fn profile(&self, frame: &CsiFrame) -> Result<Profile2D> {
        let mut p = Profile2D::new(
            self.raw_power(frame)?,
            self.theta_grid.clone(),
            self.dist_grid.clone(),
        )?;
        p.normalize();
        Ok(p)
    }
}

/// Bearing/range likelihood `|sum_ij csi_ij conj(s_i(theta)) exp(j 2 pi f_j d / c)|^2`,
/// normalized to a maximum of 1.
pub fn bartlett_profile(
    frame: &CsiFrame,
    geom: &ArrayGeometry,
    cfg: &AoaConfig,
) -> Result<Profile2D> {
    check_frame(frame, geom)?;
    BartlettPlan::new(geom, frame.chanspec(), cfg)?.profile(frame)
}

/// Scores over a bearing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub theta_grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl Spectrum {
    pub fn new(theta_grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_grid(&theta_grid, "theta")?;
        if values.len() != theta_grid.len() {
            return Err(AoaError::DimensionMismatch(format!(
                "{} values for {} bearings",
                values.len(),
                theta_grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(AoaError::Config(
                "spectrum values must be finite and non-negative".into(),
            ));
        }
        Ok(Self { theta_grid, values })
    }

    /// A one-column profile, so spectra can share the averaging path.
    pub fn to_profile(&self) -> Profile2D {
        Profile2D {
            values: DMatrix::from_column_slice(self.values.len(), 1, &self.values),
            theta_grid: self.theta_grid.clone(),
            dist_grid: vec![0.0],
        }
    }

    pub fn normalized(mut self) -> Self {
        let max = self.values.iter().copied().fold(0.0, f64::max);
        if max > 0.0 {
            self.values.iter_mut().for_each(|v| *v /= max);
        }
        self
    }
}

/// Spatial covariance of per-subcarrier antenna snapshots, averaged over
/// subcarriers, transmit antennas and frames.
fn spatial_covariance(frames: &[CsiFrame], n_rx: usize) -> DMatrix<Complex64> {
    let mut r = DMatrix::<Complex64>::zeros(n_rx, n_rx);
    let mut count = 0usize;
    for f in frames {
        for tx in 0..f.n_tx() {
            let w = f.tx_slice(tx);
            r += &w * w.adjoint();
            count += w.ncols();
        }
    }
    r / Complex64::new(count.max(1) as f64, 0.0)
}

/// MUSIC pseudospectrum `1 / ||E_n^H s(theta)||^2` with `cfg.sources`
/// assumed sources.
pub fn music_spectrum(
    frames: &[CsiFrame],
    geom: &ArrayGeometry,
    cfg: &AoaConfig,
) -> Result<Spectrum> {
    cfg.validate()?;
    let first = frames
        .first()
        .ok_or_else(|| AoaError::Degenerate("no frames".into()))?;
    let chanspec = first.chanspec();
    for f in frames {
        check_frame(f, geom)?;
        if f.chanspec() != chanspec {
            return Err(CsiError::ChanspecMismatch {
                expected: chanspec,
                actual: f.chanspec(),
            }
            .into());
        }
    }
    let n_rx = geom.len();
    if cfg.sources >= n_rx {
        return Err(AoaError::Config(format!(
            "{} sources leave no noise subspace with {n_rx} antennas",
            cfg.sources
        )));
    }
    let mut r = spatial_covariance(frames, n_rx);
    // Hermitian part, plus a ridge so the eigensolver sees a PD matrix.
    r = (&r + r.adjoint()) * Complex64::new(0.5, 0.0);
    let trace: f64 = (0..n_rx).map(|i| r[(i, i)].re).sum();
    if !(trace > 0.0) {
        return Err(AoaError::Degenerate("zero-power snapshots".into()));
    }
    for i in 0..n_rx {
        r[(i, i)] += Complex64::new(1e-9 * trace, 0.0);
    }
    let eig = r.symmetric_eigen();
    let mut order: Vec<usize> = (0..n_rx).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let noise: Vec<usize> = order[..n_rx - cfg.sources].to_vec();

    let lambda = chanspec.wavelength();
    let floor = 1e-15 * n_rx as f64;
    let values = cfg
        .theta_grid
        .iter()
        .map(|&theta| {
            let s = steering_vector(theta, geom, lambda);
            let denom: f64 = noise
                .iter()
                .map(|&k| {
                    eig.eigenvectors
                        .column(k)
                        .iter()
                        .zip(&s)
                        .map(|(e, s)| e.conj() * s)
                        .sum::<Complex64>()
                        .norm_sqr()
                })
                .sum();
            1.0 / denom.max(floor)
        })
        .collect();
    Spectrum::new(cfg.theta_grid.clone(), values)
}

/// Element-wise mean of the last `window` profiles, normalized to max 1.
pub fn average_profiles(profiles: &[Profile2D], window: usize) -> Result<Profile2D> {
    if window == 0 {
        return Err(AoaError::Config("averaging window must be >= 1".into()));
    }
    let last = profiles
        .last()
        .ok_or_else(|| AoaError::Degenerate("no profiles to average".into()))?;
    let start = profiles.len().saturating_sub(window);
    let tail = &profiles[start..];
    if tail.iter().any(|p| !p.same_grid(last)) {
        return Err(AoaError::DimensionMismatch(
            "profiles use different grids".into(),
        ));
    }
    let mut sum = DMatrix::zeros(last.values.nrows(), last.values.ncols());
    for p in tail {
        sum += &p.values;
    }
    let mut out = Profile2D {
        values: sum / tail.len() as f64,
        theta_grid: last.theta_grid.clone(),
        dist_grid: last.dist_grid.clone(),
    };
    out.normalize();
    Ok(out)
}

/// Sliding-window averager keeping separate history per source MAC.
#[derive(Debug, Clone)]
pub struct ProfileAverager {
    window: usize,
    history: HashMap<MacAddr, VecDeque<Profile2D>>,
}

impl ProfileAverager {
    pub fn new(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(AoaError::Config("averaging window must be >= 1".into()));
        }
        Ok(Self {
            window,
            history: HashMap::new(),
        })
    }

    /// Adds a profile and returns the current window average for `mac`.
    /// A profile on a new grid restarts that source's history.
    pub fn push(&mut self, mac: MacAddr, profile: Profile2D) -> Profile2D {
        let h = self.history.entry(mac).or_default();
        if h.back().is_some_and(|p| !p.same_grid(&profile)) {
            h.clear();
        }
        h.push_back(profile);
        while h.len() > self.window {
            h.pop_front();
        }
        let mut sum = DMatrix::zeros(h[0].values.nrows(), h[0].values.ncols());
        for p in h.iter() {
            sum += &p.values;
        }
        let last = h.back().expect("just pushed");
        let mut out = Profile2D {
            values: sum / h.len() as f64,
            theta_grid: last.theta_grid.clone(),
            dist_grid: last.dist_grid.clone(),
        };
        out.normalize();
        out
    }

    pub fn len(&self, mac: &MacAddr) -> usize {
        self.history.get(mac).map_or(0, VecDeque::len)
    }

    pub fn is_empty(&self) -> bool {
        self.history.values().all(VecDeque::is_empty)
    }
}

/// Anything that scores bearings.
pub trait BearingScores {
    fn theta_grid(&self) -> &[f64];
    /// One score per bearing; profiles take the max over distance.
    fn bearing_scores(&self) -> Vec<f64>;
}

impl BearingScores for Profile2D {
    fn theta_grid(&self) -> &[f64] {
        &self.theta_grid
    }

    fn bearing_scores(&self) -> Vec<f64> {
        self.values.row_iter().map(|r| r.max()).collect()
    }
}

impl BearingScores for Spectrum {
    fn theta_grid(&self) -> &[f64] {
        &self.theta_grid
    }

    fn bearing_scores(&self) -> Vec<f64> {
        self.values.clone()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BearingOutcome {
    Accepted(BearingEstimate),
    Rejected { reason: String },
}

impl BearingOutcome {
    pub fn accepted(self) -> Option<BearingEstimate> {
        match self {
            Self::Accepted(b) => Some(b),
            Self::Rejected { .. } => None,
        }
    }
}

/// Index of the largest score; ties go to the smallest index.
pub fn argmax_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Picks the strongest bearing, or rejects packets below the RSSI floor.
/// MAC and timestamp are left zero for the caller to fill in.
pub fn estimate_bearing<S: BearingScores + ?Sized>(
    scores: &S,
    rssi_dbm: f64,
    cfg: &AoaConfig,
) -> BearingOutcome {
    if !(rssi_dbm >= cfg.rssi_floor_dbm) {
        return BearingOutcome::Rejected {
            reason: format!("rssi {rssi_dbm} dBm below floor {} dBm", cfg.rssi_floor_dbm),
        };
    }
    let values = scores.bearing_scores();
    match argmax_first(&values) {
        Some(i) => BearingOutcome::Accepted(BearingEstimate {
            theta: scores.theta_grid()[i],
            strength: values[i],
            rssi_dbm,
            source_mac: MacAddr::default(),
            timestamp_ns: 0,
        }),
        None => BearingOutcome::Rejected {
            reason: "empty bearing grid".into(),
        },
    }
}

/// Bearing profile of one frame with the configured algorithm.
pub fn frame_profile(frame: &CsiFrame, geom: &ArrayGeometry, cfg: &AoaConfig) -> Result<Profile2D> {
    match cfg.algorithm {
        Algorithm::Bartlett => bartlett_profile(frame, geom, cfg),
        Algorithm::Music => Ok(music_spectrum(std::slice::from_ref(frame), geom, cfg)?
            .normalized()
            .to_profile()),
        Algorithm::Spotfi => spotfi_profile(frame, geom, cfg),
    }
}

/// Runs the configured estimator on a frame, stamping MAC and timestamp.
pub fn estimate_frame_bearing(
    frame: &CsiFrame,
    geom: &ArrayGeometry,
    cfg: &AoaConfig,
) -> Result<BearingOutcome> {
    if !(frame.rssi_dbm >= cfg.rssi_floor_dbm) {
        return Ok(estimate_bearing(
            &Spectrum::new(vec![0.0], vec![0.0])?,
            frame.rssi_dbm,
            cfg,
        ));
    }
    let profile = frame_profile(frame, geom, cfg)?;
    Ok(stamp(
        estimate_bearing(&profile, frame.rssi_dbm, cfg),
        frame,
    ))
}

pub(crate) fn stamp(outcome: BearingOutcome, frame: &CsiFrame) -> BearingOutcome {
    match outcome {
        BearingOutcome::Accepted(mut b) => {
            b.source_mac = frame.source_mac;
            b.timestamp_ns = frame.timestamp_ns;
            BearingOutcome::Accepted(b)
        }
        r => r,
    }
}
