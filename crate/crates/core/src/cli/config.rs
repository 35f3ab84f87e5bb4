//! Run configuration file.
//!
//! ```toml
//! [channel]
//! chanspec = "155/80"
//!
//! [packet]
//! mac_filter = ["02:00:00:00:00:01"]
//! rssi_floor_dbm = -65.0
//!
//! [setup]
//! scan = true
//! scan_period_s = 30.0
//! dwell_ms = 100
//! switch_margin_db = 6.0
//! switch_cost_ms = 400
//! stale_timeout_s = 120.0
//!
//! [algorithm]
//! name = "bartlett"        # bartlett | music | spotfi
//! theta_points = 360
//! dist_max_m = 30.0
//! dist_step_m = 0.25
//! window = 20
//! sources = 1
//! n_ant_sub = 2
//! n_sub_sub = 122          # optional
//!
//! [array]
//! positions = [[0.0, 0.0], [0.0, 0.026]]
//!
//! [paths]
//! capture = "run.wcap"
//! calibration = "run.cal"
//! poses = "poses.csv"
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::aoa::{default_dist_grid, default_theta_grid, Algorithm, AoaConfig, Smoothing};
use crate::codec::PacketFilter;
use crate::csi::{ArrayGeometry, ChannelSpec, MacAddr};
use crate::scanner::ScanPolicy;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub packet: PacketSection,
    #[serde(default)]
    pub setup: SetupSection,
    #[serde(default)]
    pub algorithm: AlgorithmSection,
    #[serde(default)]
    pub array: Option<ArraySection>,
    #[serde(default)]
    pub paths: PathsSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub chanspec: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSection {
    #[serde(default)]
    pub mac_filter: Vec<String>,
    pub rssi_floor_dbm: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetupSection {
    #[serde(default = "yes")]
    pub scan: bool,
    pub scan_period_s: Option<f64>,
    pub dwell_ms: Option<u64>,
    pub switch_margin_db: Option<f64>,
    pub switch_cost_ms: Option<u64>,
    pub stale_timeout_s: Option<f64>,
}

impl Default for SetupSection {
    fn default() -> Self {
        Self {
            scan: true,
            scan_period_s: None,
            dwell_ms: None,
            switch_margin_db: None,
            switch_cost_ms: None,
            stale_timeout_s: None,
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSection {
    pub name: Option<String>,
    pub theta_points: Option<usize>,
    pub dist_max_m: Option<f64>,
    pub dist_step_m: Option<f64>,
    pub window: Option<usize>,
    pub sources: Option<usize>,
    pub n_ant_sub: Option<usize>,
    pub n_sub_sub: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySection {
    pub positions: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub capture: Option<PathBuf>,
    pub calibration: Option<PathBuf>,
    pub poses: Option<PathBuf>,
    pub scenario: Option<PathBuf>,
}

/// Settings after merging file and flags, validated.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub chanspec: Option<ChannelSpec>,
    pub filter: PacketFilter,
    pub scan_enabled: bool,
    pub policy: ScanPolicy,
    pub aoa: AoaConfig,
    pub geometry: Option<ArrayGeometry>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.message().to_string())
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg = Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(q) = p.as_mut() {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        fix(&mut cfg.paths.capture);
        fix(&mut cfg.paths.calibration);
        fix(&mut cfg.paths.poses);
        fix(&mut cfg.paths.scenario);
        Ok(cfg)
    }

    pub fn resolve(&self) -> Result<Resolved, String> {
        let chanspec = self
            .channel
            .chanspec
            .as_deref()
            .map(|s| s.parse::<ChannelSpec>().map_err(|e| e.to_string()))
            .transpose()?;

        let allow = self
            .packet
            .mac_filter
            .iter()
            .map(|m| m.parse::<MacAddr>().map_err(|e| e.to_string()))
            .collect::<Result<Vec<_>, _>>()?;
        let floor = self.packet.rssi_floor_dbm;
        let filter = PacketFilter {
            allow,
            rssi_floor_dbm: floor,
        };

        let d = ScanPolicy::default();
        let s = &self.setup;
        let policy = ScanPolicy {
            scan_period_s: s.scan_period_s.unwrap_or(d.scan_period_s),
            dwell_ms: s.dwell_ms.unwrap_or(d.dwell_ms),
            switch_margin_db: s.switch_margin_db.unwrap_or(d.switch_margin_db),
            switch_cost_ms: s.switch_cost_ms.unwrap_or(d.switch_cost_ms),
            stale_timeout_s: s.stale_timeout_s.unwrap_or(d.stale_timeout_s),
        };
        policy.validate().map_err(|e| e.to_string())?;

        let a = &self.algorithm;
        let defaults = AoaConfig::default();
        let algorithm = match &a.name {
            Some(n) => n.parse::<Algorithm>().map_err(|e| e.to_string())?,
            None => defaults.algorithm,
        };
        let theta_points = a.theta_points.unwrap_or(360);
        if theta_points < 2 {
            return Err("algorithm.theta_points must be >= 2".into());
        }
        let dist_max = a.dist_max_m.unwrap_or(30.0);
        let dist_step = a.dist_step_m.unwrap_or(0.25);
        if !(dist_step > 0.0 && dist_max >= 0.0 && dist_max / dist_step <= 1e5) {
            return Err("algorithm distance grid is invalid".into());
        }
        let aoa = AoaConfig {
            theta_grid: default_theta_grid(theta_points),
            dist_grid: default_dist_grid(dist_max, dist_step),
            rssi_floor_dbm: floor.unwrap_or(defaults.rssi_floor_dbm),
            algorithm,
            smoothing: Smoothing {
                n_ant_sub: a.n_ant_sub.unwrap_or(defaults.smoothing.n_ant_sub),
                n_sub_sub: a.n_sub_sub.or(defaults.smoothing.n_sub_sub),
            },
            window: a.window.unwrap_or(defaults.window),
            sources: a.sources.unwrap_or(defaults.sources),
        };
        aoa.validate().map_err(|e| e.to_string())?;

        let geometry = self
            .array
            .as_ref()
            .map(|a| ArrayGeometry::new(a.positions.clone()).map_err(|e| e.to_string()))
            .transpose()?;

        Ok(Resolved {
            chanspec,
            filter,
            scan_enabled: self.setup.scan,
            policy,
            aoa,
            geometry,
        })
    }
}

/// Parses `x,y x,y ...` (whitespace or `;` between points).
pub fn parse_geometry(text: &str) -> Result<ArrayGeometry, String> {
    let pts = text
        .split(|c: char| c.is_whitespace() || c == ';')
        .filter(|s| !s.is_empty())
        .map(|p| {
            let (x, y) = p
                .split_once(',')
                .ok_or_else(|| format!("bad point `{p}`"))?;
            let x: f64 = x.trim().parse().map_err(|_| format!("bad point `{p}`"))?;
            let y: f64 = y.trim().parse().map_err(|_| format!("bad point `{p}`"))?;
            Ok([x, y])
        })
        .collect::<Result<Vec<_>, String>>()?;
    ArrayGeometry::new(pts).map_err(|e| e.to_string())
}

pub fn parse_point(text: &str) -> Result<[f64; 2], String> {
    let (x, y) = text
        .split_once(',')
        .ok_or_else(|| format!("expected `x,y`, got `{text}`"))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("expected `x,y`, got `{text}`"))
    };
    Ok([parse(x)?, parse(y)?])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_config_resolves() {
        let cfg = RunConfig::parse(
            r#"
[channel]
chanspec = "42/80"
[packet]
mac_filter = ["02:00:00:00:00:01"]
rssi_floor_dbm = -70.0
[setup]
scan = false
switch_cost_ms = 300
[algorithm]
name = "music"
theta_points = 180
window = 5
[array]
positions = [[0.0, 0.0], [0.0, 0.026]]
"#,
        )
        .unwrap();
        let r = cfg.resolve().unwrap();
        assert_eq!(r.chanspec, Some(ChannelSpec::new(42, 80).unwrap()));
        assert_eq!(r.filter.allow.len(), 1);
        assert_eq!(r.aoa.rssi_floor_dbm, -70.0);
        assert_eq!(r.aoa.algorithm, Algorithm::Music);
        assert_eq!(r.aoa.theta_grid.len(), 180);
        assert_eq!(r.policy.switch_cost_ms, 300);
        assert!(!r.scan_enabled);
        assert_eq!(r.geometry.unwrap().len(), 2);
    }

    #[test]
    fn empty_config_uses_defaults() {
        let r = RunConfig::parse("").unwrap().resolve().unwrap();
        assert_eq!(r.aoa, AoaConfig::default());
        assert_eq!(r.policy, ScanPolicy::default());
        assert!(r.chanspec.is_none() && r.geometry.is_none());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(RunConfig::parse("[channel]\nfoo = 1\n").is_err());
        assert!(RunConfig::parse("[login]\nuser = \"x\"\n").is_err());
        let bad = |t: &str| RunConfig::parse(t).unwrap().resolve().is_err();
        assert!(bad("[channel]\nchanspec = \"36/80\"\n"));
        assert!(bad("[setup]\nswitch_cost_ms = 600\n"));
        assert!(bad("[algorithm]\nname = \"esprit\"\n"));
        assert!(bad("[packet]\nmac_filter = [\"nope\"]\n"));
    }

    #[test]
    fn geometry_and_point_parsing() {
        assert_eq!(parse_geometry("0,0 0,0.026;0,0.052").unwrap().len(), 3);
        assert!(parse_geometry("0,0 0,0").is_err());
        assert_eq!(parse_point("1.5,-2").unwrap(), [1.5, -2.0]);
        assert!(parse_point("1.5").is_err());
    }
}
