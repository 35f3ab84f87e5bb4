//! TOML scenario files.
//!
//! ```toml
//! seed = 7
//! snr_db = 30.0
//! per_packet_phase = true
//!
//! [channel]
//! number = 155
//! bandwidth_mhz = 80
//!
//! [array]
//! positions = [[0.0, 0.0], [0.022, 0.0], [0.0, 0.022], [0.022, 0.022]]
//!
//! [transmitter]
//! x = 0.0
//! y = 0.0
//! power_dbm = 20.0
//! mac = "02:00:00:00:00:01"
//!
//! [calibration]
//! mode = "random"          # zero | random | file
//!
//! [trajectory]
//! kind = "disc"            # disc | waypoints | stationary
//! radius_m = 5.0
//! count = 200
//! rate_hz = 10.0
//!
//! [[reflection]]
//! aoa_offset_deg = 40.0
//! excess_delay_ns = 10.0
//! relative_amplitude = 0.5
//! random_phase = true
//!
//! [[ap]]
//! x = 5.0
//! y = 0.0
//! channel = 42
//! bandwidth_mhz = 80
//! power_dbm = 20.0
//! mac = "02:00:00:00:01:01"
//! ```

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use super::{
    disc_trajectory, random_calibration, waypoint_trajectory, AccessPoint, Reflection, Result,
    SimScenario, SynthError, DEFAULT_PATH_LOSS_EXPONENT,
};
use crate::calibration::file::read_calibration;
use crate::csi::{ArrayGeometry, CalibrationMatrix, ChannelSpec, MacAddr, Pose2D};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_snr")]
    pub snr_db: f64,
    #[serde(default = "default_true")]
    pub per_packet_phase: bool,
    #[serde(default = "default_ple")]
    pub path_loss_exponent: f64,
    #[serde(default)]
    pub rssi_noise_db: f64,
    pub channel: ChannelSection,
    pub array: ArraySection,
    pub transmitter: TransmitterSection,
    #[serde(default)]
    pub calibration: CalibrationSection,
    pub trajectory: TrajectorySection,
    #[serde(default)]
    pub reflection: Vec<ReflectionSection>,
    #[serde(default)]
    pub ap: Vec<ApSection>,
}

fn default_snr() -> f64 {
    30.0
}

fn default_true() -> bool {
    true
}

fn default_ple() -> f64 {
    DEFAULT_PATH_LOSS_EXPONENT
}

fn default_min_radius() -> f64 {
    0.5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub number: u16,
    pub bandwidth_mhz: u32,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySection {
    pub positions: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmitterSection {
    pub x: f64,
    pub y: f64,
    #[serde(default = "default_power")]
    pub power_dbm: f64,
    #[serde(default = "default_mac")]
    pub mac: String,
}

fn default_power() -> f64 {
    20.0
}

fn default_mac() -> String {
    "02:00:00:00:00:01".into()
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    #[serde(default)]
    pub mode: CalibrationMode,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMode {
    #[default]
    Zero,
    Random,
    File,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectorySection {
    Disc {
        radius_m: f64,
        #[serde(default = "default_min_radius")]
        min_radius_m: f64,
        count: usize,
        rate_hz: f64,
    },
    Waypoints {
        points: Vec<[f64; 2]>,
        loops: usize,
        speed_mps: f64,
        rate_hz: f64,
    },
    Stationary {
        x: f64,
        y: f64,
        #[serde(default)]
        theta_deg: f64,
        count: usize,
        rate_hz: f64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReflectionSection {
    pub aoa_offset_deg: f64,
    pub excess_delay_ns: f64,
    pub relative_amplitude: f64,
    #[serde(default)]
    pub random_phase: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApSection {
    pub x: f64,
    pub y: f64,
    pub channel: u16,
    pub bandwidth_mhz: u32,
    #[serde(default = "default_power")]
    pub power_dbm: f64,
    pub mac: String,
}

fn bad(msg: impl Into<String>) -> SynthError {
    SynthError::InvalidScenario(msg.into())
}

fn rate_ok(rate_hz: f64) -> Result<()> {
    if rate_hz > 0.0 && rate_hz.is_finite() {
        Ok(())
    } else {
        Err(bad(format!("rate_hz must be positive, got {rate_hz}")))
    }
}

impl ScenarioFile {
    /// Builds the scenario. `base_dir` resolves a relative calibration path;
    /// `seed` overrides the file's seed when given.
    pub fn build(
        &self,
        base_dir: &Path,
        seed: Option<u64>,
    ) -> Result<(SimScenario, ArrayGeometry)> {
        let seed = seed.unwrap_or(self.seed);
        let chanspec = ChannelSpec::new(self.channel.number, self.channel.bandwidth_mhz)?;
        let geom = ArrayGeometry::new(self.array.positions.clone())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let true_calibration = match self.calibration.mode {
            CalibrationMode::Zero => CalibrationMatrix::identity(geom.len(), chanspec),
            CalibrationMode::Random => random_calibration(geom.len(), chanspec, &mut rng),
            CalibrationMode::File => {
                let path = self
                    .calibration
                    .path
                    .as_ref()
                    .ok_or_else(|| bad("calibration mode `file` needs a path"))?;
                let (cal, _) = read_calibration(&base_dir.join(path))
                    .map_err(|e| bad(format!("calibration file: {e}")))?;
                cal
            }
        };

        let tx = [self.transmitter.x, self.transmitter.y];
        let trajectory = match &self.trajectory {
            TrajectorySection::Disc {
                radius_m,
                min_radius_m,
                count,
                rate_hz,
            } => {
                rate_ok(*rate_hz)?;
                if !(*min_radius_m > 0.0 && radius_m > min_radius_m) {
                    return Err(bad("disc needs 0 < min_radius_m < radius_m"));
                }
                disc_trajectory(tx, *radius_m, *min_radius_m, *count, *rate_hz, &mut rng)
            }
            TrajectorySection::Waypoints {
                points,
                loops,
                speed_mps,
                rate_hz,
            } => {
                rate_ok(*rate_hz)?;
                if points.len() < 2 || !(*speed_mps > 0.0) {
                    return Err(bad("waypoints need >= 2 points and positive speed"));
                }
                waypoint_trajectory(points, *loops, *speed_mps, *rate_hz)
            }
            TrajectorySection::Stationary {
                x,
                y,
                theta_deg,
                count,
                rate_hz,
            } => {
                rate_ok(*rate_hz)?;
                let period = (1e9 / rate_hz).round() as u64;
                (0..*count)
                    .map(|n| {
                        (
                            n as u64 * period,
                            Pose2D::new(*x, *y, theta_deg.to_radians()),
                        )
                    })
                    .collect()
            }
        };

        let aps = self
            .ap
            .iter()
            .map(|a| {
                Ok(AccessPoint {
                    mac: a.mac.parse::<MacAddr>()?,
                    location: [a.x, a.y],
                    chanspec: ChannelSpec::new(a.channel, a.bandwidth_mhz)?,
                    tx_power_dbm: a.power_dbm,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let scenario = SimScenario {
            chanspec,
            tx_location: tx,
            tx_power_dbm: self.transmitter.power_dbm,
            tx_mac: self.transmitter.mac.parse()?,
            aps,
            trajectory,
            true_calibration,
            snr_db: self.snr_db,
            per_packet_phase: self.per_packet_phase,
            reflections: self
                .reflection
                .iter()
                .map(|r| Reflection {
                    aoa_offset: r.aoa_offset_deg.to_radians(),
                    excess_delay_s: r.excess_delay_ns * 1e-9,
                    relative_amplitude: r.relative_amplitude,
                    random_phase: r.random_phase,
                })
                .collect(),
            path_loss_exponent: self.path_loss_exponent,
            rssi_noise_db: self.rssi_noise_db,
            seed,
        };
        scenario.validate(&geom)?;
        Ok((scenario, geom))
    }
}

pub fn parse_scenario(text: &str) -> Result<ScenarioFile> {
    toml::from_str(text).map_err(|e| bad(e.message().to_string()))
}

/// Reads and builds a scenario file.
pub fn load_scenario(path: &Path, seed: Option<u64>) -> Result<(SimScenario, ArrayGeometry)> {
    let text =
        std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_scenario(&text)?.build(base, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DISC: &str = r#"
seed = 3
[channel]
number = 155
bandwidth_mhz = 80
[array]
positions = [[0.0, 0.0], [0.022, 0.0], [0.0, 0.022], [0.022, 0.022]]
[transmitter]
x = 1.0
y = 2.0
[calibration]
mode = "random"
[trajectory]
kind = "disc"
radius_m = 5.0
count = 50
rate_hz = 10.0
[[reflection]]
aoa_offset_deg = 30.0
excess_delay_ns = 12.0
relative_amplitude = 0.3
"#;

    #[test]
    fn parses_disc_scenario() {
        let (sc, geom) = parse_scenario(DISC)
            .unwrap()
            .build(Path::new("."), None)
            .unwrap();
        assert_eq!(geom.len(), 4);
        assert_eq!(sc.trajectory.len(), 50);
        assert_eq!(sc.seed, 3);
        assert_eq!(sc.snr_db, 30.0);
        assert!(sc.per_packet_phase);
        assert_eq!(sc.reflections.len(), 1);
        for (_, p) in &sc.trajectory {
            let r = (p.x - 1.0).hypot(p.y - 2.0);
            assert!((0.5..=5.0).contains(&r));
        }
        // seed override changes the draw
        let (sc2, _) = parse_scenario(DISC)
            .unwrap()
            .build(Path::new("."), Some(4))
            .unwrap();
        assert_ne!(sc.trajectory, sc2.trajectory);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = DISC.replace("seed = 3", "seed = 3\nbogus = 1");
        assert!(parse_scenario(&text).is_err());
        let text = DISC.replace("count = 50", "count = 50\nspeed = 2");
        assert!(parse_scenario(&text).is_err());
    }

    #[test]
    fn bad_channel_rejected() {
        let text = DISC.replace("number = 155", "number = 36");
        let f = parse_scenario(&text).unwrap();
        assert!(f.build(Path::new("."), None).is_err());
    }
}
