//! Ray-sum multipath channel simulator standing in for the radio hardware.
//!
//! Every frame is `sum_p a_p exp(-j 2 pi f_j tau_p) s_i(aoa_p) t_k(aod_p) + n`,
//! with the array term evaluated at the center wavelength and the delay term
//! at each subcarrier's absolute frequency. A scenario additionally injects a
//! hardware phase offset and an optional per-packet random common phase.

mod scenario;

pub use scenario::{load_scenario, parse_scenario, ScenarioFile};

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::csi::{
    ground_truth_bearing, steering_vector, wrap_angle, ArrayGeometry, CalibrationMatrix,
    ChannelSpec, CsiError, CsiFrame, MacAddr, Pose2D, SPEED_OF_LIGHT,
};

/// RSSI reported for a frame whose mean per-element power is 1.
pub const RSSI_REFERENCE_DBM: f64 = -30.0;

pub const DEFAULT_PATH_LOSS_EXPONENT: f64 = 2.2;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("at least one propagation path is required")]
    EmptyPaths,
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Csi(#[from] CsiError),
}

pub type Result<T> = std::result::Result<T, SynthError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathComponent {
    pub aoa: f64,
    pub aod: f64,
    pub delay_s: f64,
    pub amplitude: Complex64,
}

impl PathComponent {
    pub fn new(aoa: f64, delay_s: f64, amplitude: Complex64) -> Self {
        Self {
            aoa,
            aod: 0.0,
            delay_s,
            amplitude,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.delay_s >= 0.0) || !self.delay_s.is_finite() {
            return Err(SynthError::InvalidPath(format!("delay {} s", self.delay_s)));
        }
        if !(self.amplitude.norm() > 0.0) || !self.amplitude.norm().is_finite() {
            return Err(SynthError::InvalidPath(
                "zero or non-finite amplitude".into(),
            ));
        }
        Ok(())
    }
}

/// Array and radio setup shared by every frame of a synthesis run.
#[derive(Debug, Clone)]
pub struct Radio<'a> {
    pub rx_geom: &'a ArrayGeometry,
    /// Transmit array; `None` means a single transmit antenna.
    pub tx_geom: Option<&'a ArrayGeometry>,
    pub chanspec: ChannelSpec,
    /// SNR of the first (direct) path; `f64::INFINITY` disables noise.
    pub snr_db: f64,
}

impl Radio<'_> {
    fn n_tx(&self) -> usize {
        self.tx_geom.map_or(1, ArrayGeometry::len)
    }

    /// Noiseless ray sum, one `n_rx x n_sub` matrix per transmit antenna.
    pub fn ray_sum(&self, paths: &[PathComponent]) -> Result<Vec<DMatrix<Complex64>>> {
        if paths.is_empty() {
            return Err(SynthError::EmptyPaths);
        }
        for p in paths {
            p.validate()?;
        }
        let lambda = self.chanspec.wavelength();
        let freqs = self.chanspec.subcarrier_frequencies();
        let n_rx = self.rx_geom.len();
        let mut out = vec![DMatrix::zeros(n_rx, freqs.len()); self.n_tx()];
        for p in paths {
            let rx_sv = steering_vector(p.aoa, self.rx_geom, lambda);
            let tx_sv = match self.tx_geom {
                Some(g) => steering_vector(p.aod, g, lambda),
                None => vec![Complex64::new(1.0, 0.0)],
            };
            let delay: Vec<Complex64> = freqs
                .iter()
                .map(|f| Complex64::from_polar(1.0, -2.0 * PI * f * p.delay_s))
                .collect();
            for (k, t) in tx_sv.iter().enumerate() {
                for (i, s) in rx_sv.iter().enumerate() {
                    let g = p.amplitude * s * t;
                    for (j, d) in delay.iter().enumerate() {
                        out[k][(i, j)] += g * d;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Noise variance per complex element for the given direct-path gain.
    fn noise_variance(&self, direct: &PathComponent) -> f64 {
        if self.snr_db.is_finite() {
            direct.amplitude.norm_sqr() / 10f64.powf(self.snr_db / 10.0)
        } else {
            0.0
        }
    }

    fn finish<R: Rng>(
        &self,
        mut slices: Vec<DMatrix<Complex64>>,
        noise_var: f64,
        rng: &mut R,
    ) -> Result<CsiFrame> {
        if noise_var > 0.0 {
            let sigma = (noise_var / 2.0).sqrt();
            for s in &mut slices {
                for z in s.iter_mut() {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    *z += Complex64::new(re, im) * sigma;
                }
            }
        }
        let n_rx = self.rx_geom.len();
        let n_sub = self.chanspec.n_sub();
        let n_tx = slices.len();
        let mut frame = CsiFrame::new(
            self.chanspec,
            n_rx,
            n_tx,
            vec![Default::default(); n_rx * n_tx * n_sub],
        )?;
        let mut power = 0.0;
        for (k, s) in slices.iter().enumerate() {
            power += s.iter().map(|z| z.norm_sqr()).sum::<f64>();
            frame.set_tx_slice(k, s)?;
        }
        frame.rssi_dbm = rssi_from_power(power / (n_rx * n_tx * n_sub) as f64);
        Ok(frame)
    }
}

/// Integer-dB RSSI for a mean per-element power.
pub fn rssi_from_power(mean_power: f64) -> f64 {
    if mean_power > 0.0 {
        (10.0 * mean_power.log10() + RSSI_REFERENCE_DBM)
            .round()
            .clamp(-128.0, 127.0)
    } else {
        -128.0
    }
}

/// Synthesizes one single-tx frame. The first path sets the SNR reference.
pub fn synth_frame(
    paths: &[PathComponent],
    geom: &ArrayGeometry,
    chanspec: ChannelSpec,
    snr_db: f64,
    rng_seed: u64,
) -> Result<CsiFrame> {
    let radio = Radio {
        rx_geom: geom,
        tx_geom: None,
        chanspec,
        snr_db,
    };
    synth_frame_with(&radio, paths, &mut ChaCha8Rng::seed_from_u64(rng_seed))
}

pub fn synth_frame_with<R: Rng>(
    radio: &Radio<'_>,
    paths: &[PathComponent],
    rng: &mut R,
) -> Result<CsiFrame> {
    let slices = radio.ray_sum(paths)?;
    radio.finish(slices, radio.noise_variance(&paths[0]), rng)
}

/// Log-distance path loss.
pub fn rssi_at(ap_power_dbm: f64, distance_m: f64, exponent: f64) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(SynthError::NonPositiveDistance(distance_m));
    }
    Ok(ap_power_dbm - 10.0 * exponent * distance_m.log10())
}

/// An explicitly specified reflected path, relative to the direct path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reflection {
    pub aoa_offset: f64,
    pub excess_delay_s: f64,
    pub relative_amplitude: f64,
    /// Draw a fresh uniform phase for this path on every packet.
    pub random_phase: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccessPoint {
    pub mac: MacAddr,
    pub location: [f64; 2],
    pub chanspec: ChannelSpec,
    pub tx_power_dbm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimScenario {
    pub chanspec: ChannelSpec,
    pub tx_location: [f64; 2],
    pub tx_power_dbm: f64,
    pub tx_mac: MacAddr,
    pub aps: Vec<AccessPoint>,
    /// `(timestamp_ns, pose)`, strictly increasing in time.
    pub trajectory: Vec<(u64, Pose2D)>,
    /// The correction the receiver needs: the simulated hardware applies
    /// `exp(-j phase)`, so applying this matrix restores the ideal channel.
    pub true_calibration: CalibrationMatrix,
    pub snr_db: f64,
    pub per_packet_phase: bool,
    pub reflections: Vec<Reflection>,
    pub path_loss_exponent: f64,
    /// Bounded uniform RSSI jitter (dB) on scanner beacons.
    pub rssi_noise_db: f64,
    pub seed: u64,
}

impl SimScenario {
    /// A single-transmitter scenario with no APs, reflections or hardware offset.
    pub fn new(chanspec: ChannelSpec, n_rx: usize, tx_location: [f64; 2]) -> Self {
        Self {
            chanspec,
            tx_location,
            tx_power_dbm: 20.0,
            tx_mac: MacAddr([0x02, 0, 0, 0, 0, 0x01]),
            aps: Vec::new(),
            trajectory: Vec::new(),
            true_calibration: CalibrationMatrix::identity(n_rx, chanspec),
            snr_db: f64::INFINITY,
            per_packet_phase: true,
            reflections: Vec::new(),
            path_loss_exponent: DEFAULT_PATH_LOSS_EXPONENT,
            rssi_noise_db: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self, geom: &ArrayGeometry) -> Result<()> {
        if self.trajectory.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(SynthError::InvalidScenario(
                "trajectory timestamps must be strictly increasing".into(),
            ));
        }
        if self.true_calibration.chanspec != self.chanspec
            || self.true_calibration.n_rx() != geom.len()
        {
            return Err(SynthError::InvalidScenario(
                "true calibration does not match the channel and array".into(),
            ));
        }
        if self
            .reflections
            .iter()
            .any(|r| !(r.relative_amplitude > 0.0) || !(r.excess_delay_s >= 0.0))
        {
            return Err(SynthError::InvalidScenario(
                "reflections need positive amplitude and non-negative excess delay".into(),
            ));
        }
        if !(self.path_loss_exponent > 0.0) {
            return Err(SynthError::InvalidScenario(
                "path-loss exponent must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Direct plus configured reflected paths as seen from `pose`.
    pub fn paths_at<R: Rng>(&self, pose: &Pose2D, rng: &mut R) -> Result<Vec<PathComponent>> {
        let aoa = ground_truth_bearing(pose, self.tx_location)?;
        let tx_pose = Pose2D::new(self.tx_location[0], self.tx_location[1], 0.0);
        let aod = ground_truth_bearing(&tx_pose, pose.position())?;
        let dist = (pose.x - self.tx_location[0]).hypot(pose.y - self.tx_location[1]);
        let rssi = rssi_at(self.tx_power_dbm, dist, self.path_loss_exponent)?;
        let gain = 10f64.powf((rssi - RSSI_REFERENCE_DBM) / 20.0);
        let delay = dist / SPEED_OF_LIGHT;
        let mut paths = vec![PathComponent {
            aoa,
            aod,
            delay_s: delay,
            amplitude: Complex64::new(gain, 0.0),
        }];
        for r in &self.reflections {
            let phase = if r.random_phase {
                rng.random_range(-PI..PI)
            } else {
                0.0
            };
            paths.push(PathComponent {
                aoa: wrap_angle(aoa + r.aoa_offset),
                aod,
                delay_s: delay + r.excess_delay_s,
                amplitude: Complex64::from_polar(gain * r.relative_amplitude, phase),
            });
        }
        Ok(paths)
    }
}

/// Simulates the receiver along the scenario trajectory.
pub fn synth_trajectory(
    scenario: &SimScenario,
    geom: &ArrayGeometry,
) -> Result<Vec<(Pose2D, CsiFrame)>> {
    scenario.validate(geom)?;
    let radio = Radio {
        rx_geom: geom,
        tx_geom: None,
        chanspec: scenario.chanspec,
        snr_db: scenario.snr_db,
    };
    let hardware = scenario.true_calibration.negated().complex();
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut out = Vec::with_capacity(scenario.trajectory.len());
    for (seq, (ts, pose)) in scenario.trajectory.iter().enumerate() {
        let paths = scenario.paths_at(pose, &mut rng)?;
        let mut slices = radio.ray_sum(&paths)?;
        let common = if scenario.per_packet_phase {
            Complex64::from_polar(1.0, rng.random_range(-PI..PI))
        } else {
            Complex64::new(1.0, 0.0)
        };
        for s in &mut slices {
            s.component_mul_assign(&hardware);
            *s *= common;
        }
        let mut frame = radio.finish(slices, radio.noise_variance(&paths[0]), &mut rng)?;
        frame.source_mac = scenario.tx_mac;
        frame.seq = seq as u16;
        frame.timestamp_ns = *ts;
        out.push((*pose, frame));
    }
    Ok(out)
}

/// A plausible hardware phase offset: random per-antenna offset and
/// per-antenna linear slope, plus a few degrees of ripple.
pub fn random_calibration<R: Rng>(
    n_rx: usize,
    chanspec: ChannelSpec,
    rng: &mut R,
) -> CalibrationMatrix {
    let idx = chanspec.subcarrier_indices();
    let mut phase = DMatrix::zeros(n_rx, idx.len());
    for i in 0..n_rx {
        let offset: f64 = rng.random_range(-PI..PI);
        let slope: f64 = rng.random_range(-0.01..0.01);
        let ripple_amp: f64 = rng.random_range(0.0..5f64.to_radians());
        let ripple_period: f64 = rng.random_range(20.0..80.0);
        let ripple_phase: f64 = rng.random_range(-PI..PI);
        for (j, &k) in idx.iter().enumerate() {
            let k = f64::from(k);
            phase[(i, j)] = wrap_angle(
                offset
                    + slope * k
                    + ripple_amp * (2.0 * PI * k / ripple_period + ripple_phase).sin(),
            );
        }
    }
    CalibrationMatrix { phase, chanspec }
}

/// `count` poses uniform over an annulus `[min_radius, radius]` around
/// `center` with random headings, sampled at `rate_hz` from t = 0.
pub fn disc_trajectory<R: Rng>(
    center: [f64; 2],
    radius: f64,
    min_radius: f64,
    count: usize,
    rate_hz: f64,
    rng: &mut R,
) -> Vec<(u64, Pose2D)> {
    let period_ns = (1e9 / rate_hz).round() as u64;
    (0..count)
        .map(|n| {
            let r = (rng.random_range(min_radius * min_radius..radius * radius)).sqrt();
            let a: f64 = rng.random_range(-PI..PI);
            let heading: f64 = rng.random_range(-PI..PI);
            (
                n as u64 * period_ns,
                Pose2D::new(center[0] + r * a.cos(), center[1] + r * a.sin(), heading),
            )
        })
        .collect()
}

/// Constant-speed traversal of a closed polyline, `loops` times, heading
/// along the direction of travel.
pub fn waypoint_trajectory(
    waypoints: &[[f64; 2]],
    loops: usize,
    speed_mps: f64,
    rate_hz: f64,
) -> Vec<(u64, Pose2D)> {
    if waypoints.len() < 2 || loops == 0 || !(speed_mps > 0.0) || !(rate_hz > 0.0) {
        return Vec::new();
    }
    let n = waypoints.len();
    let legs: Vec<([f64; 2], [f64; 2], f64)> = (0..n)
        .map(|i| {
            let a = waypoints[i];
            let b = waypoints[(i + 1) % n];
            (a, b, (b[0] - a[0]).hypot(b[1] - a[1]))
        })
        .collect();
    let perimeter: f64 = legs.iter().map(|l| l.2).sum();
    let total = perimeter * loops as f64;
    let step = speed_mps / rate_hz;
    let period_ns = (1e9 / rate_hz).round() as u64;
    let count = (total / step).floor() as usize;
    (0..count)
        .map(|m| {
            let mut s = (m as f64 * step) % perimeter;
            let mut leg = &legs[0];
            for l in &legs {
                leg = l;
                if s < l.2 {
                    break;
                }
                s -= l.2;
            }
            let (a, b, len) = *leg;
            let t = if len > 0.0 { (s / len).min(1.0) } else { 0.0 };
            let heading = (b[1] - a[1]).atan2(b[0] - a[0]);
            (
                m as u64 * period_ns,
                Pose2D::new(a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), heading),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csi::{apply_calibration, expected_csi};

    fn ch() -> ChannelSpec {
        ChannelSpec::new(155, 80).unwrap()
    }

    fn square() -> ArrayGeometry {
        ArrayGeometry::new(vec![[0.0, 0.0], [0.022, 0.0], [0.0, 0.022], [0.022, 0.022]]).unwrap()
    }

    #[test]
    fn single_path_is_steering_vector() {
        let geom = square();
        let theta = 0.7;
        let f = synth_frame(
            &[PathComponent::new(theta, 0.0, Complex64::new(1.0, 0.0))],
            &geom,
            ch(),
            f64::INFINITY,
            1,
        )
        .unwrap();
        let sv = steering_vector(theta, &geom, ch().wavelength());
        let m = f.tx_slice(0);
        for j in 0..m.ncols() {
            for i in 0..4 {
                assert!((m[(i, j)] - sv[i]).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn opposite_paths_cancel() {
        let geom = square();
        let f = synth_frame(
            &[
                PathComponent::new(0.3, 0.0, Complex64::new(1.0, 0.0)),
                PathComponent::new(0.3, 0.0, Complex64::new(-1.0, 0.0)),
            ],
            &geom,
            ch(),
            f64::INFINITY,
            1,
        )
        .unwrap();
        assert!(f.csi().iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn delay_phase_slope() {
        // Oracle: adjacent subcarriers k, k+1 differ by 312.5 kHz, so the
        // model's phase ratio is exp(-j 2 pi 312.5e3 tau).
        let tau = 20e-9;
        let geom = square();
        let f = synth_frame(
            &[PathComponent::new(0.0, tau, Complex64::new(1.0, 0.0))],
            &geom,
            ch(),
            f64::INFINITY,
            1,
        )
        .unwrap();
        let idx = ch().subcarrier_indices();
        let m = f.tx_slice(0);
        let expect = -2.0 * PI * 312.5e3 * tau;
        for j in 0..idx.len() - 1 {
            if idx[j + 1] - idx[j] == 1 {
                let d = (m[(0, j + 1)] * m[(0, j)].conj()).arg();
                assert!((d - expect).abs() < 1e-5, "step {j}: {d} vs {expect}");
            }
        }
    }

    #[test]
    fn empty_paths_rejected() {
        assert!(matches!(
            synth_frame(&[], &square(), ch(), 30.0, 0),
            Err(SynthError::EmptyPaths)
        ));
    }

    #[test]
    fn rssi_model() {
        assert_eq!(rssi_at(17.0, 1.0, 2.2).unwrap(), 17.0);
        assert!((rssi_at(17.0, 10.0, 2.2).unwrap() - (17.0 - 22.0)).abs() < 1e-12);
        assert!(rssi_at(17.0, 2.0, 2.2).unwrap() > rssi_at(17.0, 2.1, 2.2).unwrap());
        assert!(matches!(
            rssi_at(0.0, 0.0, 2.2),
            Err(SynthError::NonPositiveDistance(_))
        ));
    }

    #[test]
    fn noiseless_trajectory_matches_expected_csi() {
        let geom = square();
        let mut sc = SimScenario::new(ch(), 4, [0.0, 0.0]);
        sc.per_packet_phase = false;
        sc.trajectory = vec![(0, Pose2D::new(2.0, 1.0, 0.4))];
        let out = synth_trajectory(&sc, &geom).unwrap();
        let (pose, frame) = &out[0];
        let w_hat = expected_csi(pose, sc.tx_location, &geom, &ch()).unwrap();
        let m = frame.tx_slice(0);
        // divide out the expected CSI; what remains is a per-subcarrier
        // ToF phase common to every antenna
        for j in 0..m.ncols() {
            let r0 = m[(0, j)] * w_hat[(0, j)].conj();
            for i in 1..4 {
                let ri = m[(i, j)] * w_hat[(i, j)].conj();
                assert!((ri - r0).norm() < 1e-5 * r0.norm());
            }
        }
    }

    #[test]
    fn per_packet_phase_preserves_antenna_differences() {
        let geom = square();
        let mut sc = SimScenario::new(ch(), 4, [0.0, 0.0]);
        sc.trajectory = vec![
            (0, Pose2D::new(2.0, 1.0, 0.4)),
            (1, Pose2D::new(-1.0, 3.0, 2.0)),
        ];
        let on = synth_trajectory(&sc, &geom).unwrap();
        sc.per_packet_phase = false;
        let off = synth_trajectory(&sc, &geom).unwrap();
        for ((_, a), (_, b)) in on.iter().zip(&off) {
            let (ma, mb) = (a.tx_slice(0), b.tx_slice(0));
            for j in 0..ma.ncols() {
                for i in 1..4 {
                    let da = (ma[(i, j)] * ma[(0, j)].conj()).arg();
                    let db = (mb[(i, j)] * mb[(0, j)].conj()).arg();
                    assert!(wrap_angle(da - db).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn injected_offset_is_recoverable() {
        let geom = square();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut sc = SimScenario::new(ch(), 4, [0.0, 0.0]);
        sc.true_calibration = random_calibration(4, ch(), &mut rng);
        sc.per_packet_phase = false;
        sc.trajectory = vec![(0, Pose2D::new(2.0, 1.0, 0.4))];
        let (pose, frame) = &synth_trajectory(&sc, &geom).unwrap()[0];
        let fixed = apply_calibration(&sc.true_calibration, frame).unwrap();
        let w_hat = expected_csi(pose, sc.tx_location, &geom, &ch()).unwrap();
        let m = fixed.tx_slice(0);
        for j in 0..m.ncols() {
            let r0 = m[(0, j)] * w_hat[(0, j)].conj();
            for i in 1..4 {
                let ri = m[(i, j)] * w_hat[(i, j)].conj();
                assert!((ri * r0.conj()).arg().abs() < 1e-5);
            }
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let geom = square();
        let mut sc = SimScenario::new(ch(), 4, [0.0, 0.0]);
        sc.snr_db = 20.0;
        sc.seed = 99;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        sc.trajectory = disc_trajectory([0.0, 0.0], 5.0, 0.5, 20, 10.0, &mut rng);
        let a = synth_trajectory(&sc, &geom).unwrap();
        let b = synth_trajectory(&sc, &geom).unwrap();
        assert_eq!(a, b);
        sc.seed = 100;
        assert_ne!(a, synth_trajectory(&sc, &geom).unwrap());
    }

    #[test]
    fn non_monotone_trajectory_rejected() {
        let mut sc = SimScenario::new(ch(), 4, [0.0, 0.0]);
        sc.trajectory = vec![
            (5, Pose2D::new(1.0, 0.0, 0.0)),
            (5, Pose2D::new(2.0, 0.0, 0.0)),
        ];
        assert!(matches!(
            synth_trajectory(&sc, &square()),
            Err(SynthError::InvalidScenario(_))
        ));
        sc.trajectory = vec![(0, Pose2D::new(0.0, 0.0, 0.0))];
        assert!(matches!(
            synth_trajectory(&sc, &square()),
            Err(SynthError::Csi(_))
        ));
    }

    #[test]
    fn waypoint_loop_is_closed() {
        let t = waypoint_trajectory(
            &[[0.0, 0.0], [4.0, 0.0], [4.0, 2.0], [0.0, 2.0]],
            2,
            1.0,
            2.0,
        );
        // 12 m perimeter, twice, sampled every 0.5 m
        assert_eq!(t.len(), 48);
        assert_eq!(t[0].1.position(), [0.0, 0.0]);
        assert_eq!(t[24].1.position(), [0.0, 0.0]);
        assert!((t[9].1.theta - PI / 2.0).abs() < 1e-12);
        assert!((t[14].1.theta - PI).abs() < 1e-12);
        assert!(t.windows(2).all(|w| w[1].0 > w[0].0));
    }
}
