//! Channel scanning and switching.
//!
//! The receiver can only listen on one channel at a time. It periodically
//! sweeps every channel to learn which APs are around, then stays on the
//! channel of the strongest one, moving only when another AP is stronger by
//! a margin. All time is simulated, in nanoseconds.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::csi::{ChannelSpec, MacAddr, Pose2D};
use crate::synth::{rssi_at, AccessPoint, SimScenario, SynthError};

const NS_PER_MS: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum ScannerError {
    #[error("invalid scan policy: {0}")]
    Policy(String),
    #[error("invalid walkthrough: {0}")]
    Scenario(String),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ScannerError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApRecord {
    pub mac: MacAddr,
    pub chanspec: ChannelSpec,
    pub last_rssi_dbm: f64,
    pub last_seen_ns: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPolicy {
    pub scan_period_s: f64,
    pub dwell_ms: u64,
    pub switch_margin_db: f64,
    pub switch_cost_ms: u64,
    pub stale_timeout_s: f64,
}

/// Sensing downtime allowed for one channel switch.
pub const MAX_SWITCH_COST_MS: u64 = 500;

impl Default for ScanPolicy {
    fn default() -> Self {
        Self {
            scan_period_s: 30.0,
            dwell_ms: 100,
            switch_margin_db: 6.0,
            switch_cost_ms: 400,
            stale_timeout_s: 120.0,
        }
    }
}

impl ScanPolicy {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ScannerError::Policy(m.into()));
        if !(self.scan_period_s > 0.0 && self.scan_period_s.is_finite()) {
            return bad("scan period must be positive");
        }
        if self.dwell_ms == 0 {
            return bad("dwell must be positive");
        }
        if !(self.switch_margin_db > 0.0 && self.switch_margin_db.is_finite()) {
            return bad("switch margin must be positive");
        }
        if self.switch_cost_ms == 0 || self.switch_cost_ms >= MAX_SWITCH_COST_MS {
            return Err(ScannerError::Policy(format!(
                "switch cost must be in 1..{MAX_SWITCH_COST_MS} ms"
            )));
        }
        if !(self.stale_timeout_s > 0.0 && self.stale_timeout_s.is_finite()) {
            return bad("stale timeout must be positive");
        }
        Ok(())
    }

    fn scan_period_ns(&self) -> u64 {
        (self.scan_period_s * 1e9).round() as u64
    }

    fn stale_timeout_ns(&self) -> u64 {
        (self.stale_timeout_s * 1e9).round() as u64
    }
}

/// What the radio hears on one channel at one instant.
pub trait RadioEnvironment {
    fn beacons(&mut self, chanspec: ChannelSpec, now_ns: u64) -> Vec<(MacAddr, f64)>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    /// Strongest first; ties by MAC.
    pub records: Vec<ApRecord>,
    pub downtime_ms: u64,
    pub end_ns: u64,
}

/// Dwells on every channel in turn, keeping the strongest beacon per MAC.
pub fn scan_all<E: RadioEnvironment + ?Sized>(
    env: &mut E,
    channels: &[ChannelSpec],
    start_ns: u64,
    policy: &ScanPolicy,
) -> ScanResult {
    let mut best: BTreeMap<MacAddr, ApRecord> = BTreeMap::new();
    let mut now = start_ns;
    for &ch in channels {
        for (mac, rssi) in env.beacons(ch, now) {
            let rec = ApRecord {
                mac,
                chanspec: ch,
                last_rssi_dbm: rssi,
                last_seen_ns: now,
            };
            best.entry(mac)
                .and_modify(|r| {
                    if rssi > r.last_rssi_dbm {
                        *r = rec;
                    }
                })
                .or_insert(rec);
        }
        now += policy.dwell_ms * NS_PER_MS;
    }
    let mut records: Vec<ApRecord> = best.into_values().collect();
    sort_records(&mut records);
    ScanResult {
        records,
        downtime_ms: channels.len() as u64 * policy.dwell_ms,
        end_ns: now,
    }
}

fn sort_records(records: &mut [ApRecord]) {
    records.sort_by(|a, b| {
        b.last_rssi_dbm
            .total_cmp(&a.last_rssi_dbm)
            .then(a.mac.cmp(&b.mac))
    });
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScannerState {
    pub tuned: Option<ChannelSpec>,
    /// The AP being followed on the tuned channel.
    pub current: Option<MacAddr>,
    pub records: Vec<ApRecord>,
    pub last_scan_ns: Option<u64>,
}

/// Beacons heard on the tuned channel since the previous step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Observation {
    pub now_ns: u64,
    pub heard: Vec<(MacAddr, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Stay,
    Switch(ChannelSpec),
    Rescan,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Stay => f.write_str("stay"),
            Self::Switch(ch) => write!(f, "switch {ch}"),
            Self::Rescan => f.write_str("rescan"),
        }
    }
}

impl ScannerState {
    /// Folds beacons heard on the tuned channel into the records.
    pub fn observe(&mut self, obs: &Observation) {
        let Some(tuned) = self.tuned else { return };
        for &(mac, rssi) in &obs.heard {
            match self.records.iter_mut().find(|r| r.mac == mac) {
                Some(r) => {
                    r.chanspec = tuned;
                    r.last_rssi_dbm = rssi;
                    r.last_seen_ns = r.last_seen_ns.max(obs.now_ns);
                }
                None => self.records.push(ApRecord {
                    mac,
                    chanspec: tuned,
                    last_rssi_dbm: rssi,
                    last_seen_ns: obs.now_ns,
                }),
            }
        }
        sort_records(&mut self.records);
    }

    /// Replaces the records with a fresh scan (keeping records the scan missed).
    pub fn absorb_scan(&mut self, scan: &ScanResult) {
        for rec in &scan.records {
            match self.records.iter_mut().find(|r| r.mac == rec.mac) {
                Some(r) => {
                    let seen = r.last_seen_ns.max(rec.last_seen_ns);
                    *r = *rec;
                    r.last_seen_ns = seen;
                }
                None => self.records.push(*rec),
            }
        }
        sort_records(&mut self.records);
        self.last_scan_ns = Some(scan.end_ns);
    }

    pub fn tune(&mut self, chanspec: ChannelSpec) {
        self.tuned = Some(chanspec);
        self.current = self
            .records
            .iter()
            .find(|r| r.chanspec == chanspec)
            .map(|r| r.mac);
    }

    fn record(&self, mac: MacAddr) -> Option<&ApRecord> {
        self.records.iter().find(|r| r.mac == mac)
    }
}

/// Decides the next action from the state, the newest beacons on the tuned
/// channel, and the policy. Pure: the state is not modified.
pub fn step(state: &ScannerState, obs: &Observation, policy: &ScanPolicy) -> Action {
    let (Some(tuned), Some(last_scan)) = (state.tuned, state.last_scan_ns) else {
        return Action::Rescan;
    };
    let mut view = state.clone();
    view.observe(obs);
    let now = obs.now_ns;

    let current = state.current.and_then(|m| view.record(m).copied());
    let Some(current) = current else {
        return Action::Rescan;
    };
    if now.saturating_sub(current.last_seen_ns) > policy.stale_timeout_ns() {
        return Action::Rescan;
    }
    if now.saturating_sub(last_scan) >= policy.scan_period_ns() {
        return Action::Rescan;
    }
    switch_target(&view, tuned, current.last_rssi_dbm, policy).map_or(Action::Stay, Action::Switch)
}

fn switch_target(
    state: &ScannerState,
    tuned: ChannelSpec,
    current_rssi: f64,
    policy: &ScanPolicy,
) -> Option<ChannelSpec> {
    state
        .records
        .iter()
        .find(|r| r.chanspec != tuned)
        .filter(|r| r.last_rssi_dbm >= current_rssi + policy.switch_margin_db)
        .map(|r| r.chanspec)
}

/// Channel to tune to right after `scan` was absorbed: stay with the
/// current AP unless another is better by the margin; adopt the strongest
/// AP if the scan did not hear the current one (or nothing is tuned yet).
pub fn choose_after_scan(
    state: &ScannerState,
    scan: &ScanResult,
    policy: &ScanPolicy,
) -> Option<ChannelSpec> {
    let best = scan.records.first()?;
    let current = state
        .current
        .and_then(|m| scan.records.iter().find(|r| r.mac == m));
    match (state.tuned, current) {
        (Some(tuned), Some(cur)) => {
            let fresh = ScannerState {
                records: scan.records.clone(),
                ..state.clone()
            };
            switch_target(&fresh, tuned, cur.last_rssi_dbm, policy)
        }
        (Some(tuned), None) if best.chanspec == tuned => None,
        _ => Some(best.chanspec),
    }
}

/// Log-distance beacon model over a fixed AP layout.
pub struct SimEnvironment {
    pub aps: Vec<AccessPoint>,
    pub path_loss_exponent: f64,
    /// Beacons jitter uniformly within +-this many dB.
    pub noise_bound_db: f64,
    pub position: [f64; 2],
    rng: ChaCha8Rng,
}

impl SimEnvironment {
    pub fn new(
        aps: Vec<AccessPoint>,
        path_loss_exponent: f64,
        noise_bound_db: f64,
        seed: u64,
    ) -> Self {
        Self {
            aps,
            path_loss_exponent,
            noise_bound_db,
            position: [0.0, 0.0],
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Noise-free RSSI of every AP at `pos`, in layout order.
    pub fn mean_rssi(&self, pos: [f64; 2]) -> Vec<f64> {
        self.aps
            .iter()
            .map(|ap| {
                let d = (ap.location[0] - pos[0])
                    .hypot(ap.location[1] - pos[1])
                    .max(0.1);
                rssi_at(ap.tx_power_dbm, d, self.path_loss_exponent).expect("positive distance")
            })
            .collect()
    }
}

impl RadioEnvironment for SimEnvironment {
    fn beacons(&mut self, chanspec: ChannelSpec, _now_ns: u64) -> Vec<(MacAddr, f64)> {
        let mean = self.mean_rssi(self.position);
        let mut out = Vec::new();
        for (ap, m) in self.aps.iter().zip(mean) {
            if ap.chanspec == chanspec {
                let jitter = if self.noise_bound_db > 0.0 {
                    self.rng
                        .random_range(-self.noise_bound_db..=self.noise_bound_db)
                } else {
                    0.0
                };
                out.push((ap.mac, m + jitter));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkEntry {
    pub time_s: f64,
    pub pose: Pose2D,
    pub tuned: Option<ChannelSpec>,
    /// Channel of the AP with the strongest noise-free RSSI.
    pub nearest: ChannelSpec,
    /// Strongest beacon heard on the tuned channel this step.
    pub rssi_dbm: Option<f64>,
    /// Actions taken this step, e.g. `rescan` then `switch 42/80`.
    pub actions: Vec<Action>,
    /// Excluded from the tuned-to-nearest fraction (see [`transition_mask`]).
    pub in_transition: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkSummary {
    pub steps: usize,
    pub switch_count: u64,
    pub scan_count: u64,
    pub channels_per_scan: u64,
    pub downtime_ms: u64,
    pub duration_s: f64,
    pub tuned_to_nearest: f64,
    pub tuned_to_nearest_outside_transitions: f64,
    pub transition_steps: usize,
}

impl WalkSummary {
    /// `switch_count * switch_cost + scans * channels * dwell`.
    pub fn expected_downtime_ms(&self, policy: &ScanPolicy) -> u64 {
        self.switch_count * policy.switch_cost_ms
            + self.scan_count * self.channels_per_scan * policy.dwell_ms
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Walkthrough {
    pub log: Vec<WalkEntry>,
    pub summary: WalkSummary,
}

/// Marks samples where not following the nearest AP is expected behavior:
/// the nearest AP leads the best other-channel AP by less than
/// `margin + 2 * noise_bound`, or it became the clear winner less than one
/// scan period (plus the scan itself) ago.
pub fn transition_mask(
    times_ns: &[u64],
    mean_rssi: &[Vec<f64>],
    channels: &[ChannelSpec],
    policy: &ScanPolicy,
    noise_bound_db: f64,
    scan_channels: usize,
) -> Vec<bool> {
    let guard = policy.switch_margin_db + 2.0 * noise_bound_db;
    let settle = policy.scan_period_ns() + scan_channels as u64 * policy.dwell_ms * NS_PER_MS;
    let mut clear: Option<ChannelSpec> = None;
    let mut clear_since = 0u64;
    times_ns
        .iter()
        .zip(mean_rssi)
        .map(|(&t, rssi)| {
            let (best, lead) = nearest_with_lead(rssi, channels);
            if lead >= guard {
                if clear != Some(channels[best]) {
                    clear = Some(channels[best]);
                    clear_since = t;
                }
                t.saturating_sub(clear_since) <= settle
            } else {
                true
            }
        })
        .collect()
}

/// Index of the strongest AP and its lead over the best AP on another channel.
fn nearest_with_lead(rssi: &[f64], channels: &[ChannelSpec]) -> (usize, f64) {
    let best = (0..rssi.len())
        .max_by(|&a, &b| rssi[a].total_cmp(&rssi[b]).then(b.cmp(&a)))
        .expect("at least one AP");
    let runner = (0..rssi.len())
        .filter(|&k| channels[k] != channels[best])
        .map(|k| rssi[k])
        .fold(f64::NEG_INFINITY, f64::max);
    (best, rssi[best] - runner)
}

/// Drives the scanner along the scenario trajectory, one step per pose.
pub fn run_walkthrough(scenario: &SimScenario, policy: &ScanPolicy) -> Result<Walkthrough> {
    run_walkthrough_on(scenario, policy, &ChannelSpec::all_80mhz())
}

pub fn run_walkthrough_on(
    scenario: &SimScenario,
    policy: &ScanPolicy,
    scan_channels: &[ChannelSpec],
) -> Result<Walkthrough> {
    walk(scenario, policy, scan_channels, None)
}

/// Baseline with scanning disabled: stays on `chanspec` for the whole walk.
pub fn run_fixed_channel(scenario: &SimScenario, chanspec: ChannelSpec) -> Result<Walkthrough> {
    walk(
        scenario,
        &ScanPolicy::default(),
        &ChannelSpec::all_80mhz(),
        Some(chanspec),
    )
}

fn walk(
    scenario: &SimScenario,
    policy: &ScanPolicy,
    scan_channels: &[ChannelSpec],
    fixed: Option<ChannelSpec>,
) -> Result<Walkthrough> {
    policy.validate()?;
    let aps = &scenario.aps;
    if aps.len() < 2 {
        return Err(ScannerError::Scenario("need at least 2 APs".into()));
    }
    let mut distinct: Vec<ChannelSpec> = aps.iter().map(|a| a.chanspec).collect();
    distinct.sort();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(ScannerError::Scenario(
            "APs must span at least 2 channels".into(),
        ));
    }
    if let Some(ap) = aps.iter().find(|a| !scan_channels.contains(&a.chanspec)) {
        return Err(ScannerError::Scenario(format!(
            "AP {} on {} is not on a scanned channel",
            ap.mac, ap.chanspec
        )));
    }
    if scenario.trajectory.is_empty() {
        return Err(ScannerError::Scenario("empty trajectory".into()));
    }

    let mut env = SimEnvironment::new(
        aps.clone(),
        scenario.path_loss_exponent,
        scenario.rssi_noise_db,
        scenario.seed,
    );
    let ap_channels: Vec<ChannelSpec> = aps.iter().map(|a| a.chanspec).collect();
    let mut state = ScannerState::default();
    if let Some(ch) = fixed {
        state.tune(ch);
    }
    let mut log = Vec::with_capacity(scenario.trajectory.len());
    let (mut switches, mut scans, mut downtime) = (0u64, 0u64, 0u64);
    let mut means = Vec::with_capacity(scenario.trajectory.len());

    for &(t, pose) in &scenario.trajectory {
        env.position = pose.position();
        let mean = env.mean_rssi(env.position);
        let (nearest, _) = nearest_with_lead(&mean, &ap_channels);
        let heard = match state.tuned {
            Some(ch) => env.beacons(ch, t),
            None => Vec::new(),
        };
        let obs = Observation { now_ns: t, heard };
        let rssi = obs
            .heard
            .iter()
            .map(|h| h.1)
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));

        let mut actions = vec![match fixed {
            Some(_) => Action::Stay,
            None => step(&state, &obs, policy),
        }];
        state.observe(&obs);
        match actions[0] {
            Action::Stay => {}
            Action::Switch(ch) => {
                state.tune(ch);
                switches += 1;
                downtime += policy.switch_cost_ms;
            }
            Action::Rescan => {
                let scan = scan_all(&mut env, scan_channels, t, policy);
                scans += 1;
                downtime += scan.downtime_ms;
                state.absorb_scan(&scan);
                if let Some(ch) = choose_after_scan(&state, &scan, policy) {
                    state.tune(ch);
                    switches += 1;
                    downtime += policy.switch_cost_ms;
                    actions.push(Action::Switch(ch));
                } else if let Some(ch) = state.tuned {
                    // re-pick the followed AP on this channel
                    state.tune(ch);
                }
            }
        }

        log.push(WalkEntry {
            time_s: t as f64 * 1e-9,
            pose,
            tuned: state.tuned,
            nearest: ap_channels[nearest],
            rssi_dbm: rssi,
            actions,
            in_transition: false,
        });
        means.push(mean);
    }

    let times: Vec<u64> = scenario.trajectory.iter().map(|(t, _)| *t).collect();
    let mask = transition_mask(
        &times,
        &means,
        &ap_channels,
        policy,
        scenario.rssi_noise_db,
        scan_channels.len(),
    );
    for (e, m) in log.iter_mut().zip(&mask) {
        e.in_transition = *m;
    }
    let tuned_ok = |e: &WalkEntry| e.tuned == Some(e.nearest);
    let all = log.iter().filter(|e| tuned_ok(e)).count() as f64 / log.len() as f64;
    let outside: Vec<&WalkEntry> = log.iter().filter(|e| !e.in_transition).collect();
    let outside_frac = if outside.is_empty() {
        1.0
    } else {
        outside.iter().filter(|e| tuned_ok(e)).count() as f64 / outside.len() as f64
    };
    let duration_s = (times[times.len() - 1] - times[0]) as f64 * 1e-9;
    let summary = WalkSummary {
        steps: log.len(),
        switch_count: switches,
        scan_count: scans,
        channels_per_scan: scan_channels.len() as u64,
        downtime_ms: downtime,
        duration_s,
        tuned_to_nearest: all,
        tuned_to_nearest_outside_transitions: outside_frac,
        transition_steps: log.len() - outside.len(),
    };
    Ok(Walkthrough { log, summary })
}

pub const WALK_CSV_HEADER: &str = "time_s,x,y,tuned_channel,nearest_channel,rssi_dbm,action";

pub fn write_walkthrough_csv<W: Write>(out: &mut W, log: &[WalkEntry]) -> std::io::Result<()> {
    writeln!(out, "{WALK_CSV_HEADER}")?;
    for e in log {
        let tuned = e
            .tuned
            .map_or_else(String::new, |c| c.channel_number().to_string());
        let rssi = e.rssi_dbm.map_or_else(String::new, |r| format!("{r:.2}"));
        let actions: Vec<String> = e.actions.iter().map(Action::to_string).collect();
        writeln!(
            out,
            "{:.3},{:.3},{:.3},{},{},{},{}",
            e.time_s,
            e.pose.x,
            e.pose.y,
            tuned,
            e.nearest.channel_number(),
            rssi,
            actions.join(";")
        )?;
    }
    Ok(())
}

impl fmt::Display for WalkSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "steps {}", self.steps)?;
        writeln!(f, "duration_s {:.3}", self.duration_s)?;
        writeln!(f, "switches {}", self.switch_count)?;
        writeln!(f, "scans {}", self.scan_count)?;
        writeln!(f, "downtime_ms {}", self.downtime_ms)?;
        writeln!(f, "tuned_to_nearest {:.4}", self.tuned_to_nearest)?;
        writeln!(
            f,
            "tuned_to_nearest_outside_transitions {:.4}",
            self.tuned_to_nearest_outside_transitions
        )?;
        write!(f, "transition_steps {}", self.transition_steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ch(n: u16) -> ChannelSpec {
        ChannelSpec::new(n, 80).unwrap()
    }

    fn rec(mac: u8, channel: u16, rssi: f64, seen: u64) -> ApRecord {
        ApRecord {
            mac: MacAddr([0, 0, 0, 0, 0, mac]),
            chanspec: ch(channel),
            last_rssi_dbm: rssi,
            last_seen_ns: seen,
        }
    }

    fn locked(current_rssi: f64, other_rssi: f64) -> ScannerState {
        ScannerState {
            tuned: Some(ch(42)),
            current: Some(MacAddr([0, 0, 0, 0, 0, 1])),
            records: vec![rec(1, 42, current_rssi, 0), rec(2, 155, other_rssi, 0)],
            last_scan_ns: Some(0),
        }
    }

    fn obs(t_s: f64, rssi: f64) -> Observation {
        Observation {
            now_ns: (t_s * 1e9) as u64,
            heard: vec![(MacAddr([0, 0, 0, 0, 0, 1]), rssi)],
        }
    }

    #[test]
    fn policy_defaults_and_validation() {
        let p = ScanPolicy::default();
        p.validate().unwrap();
        assert!(p.switch_cost_ms < 500);
        let bad = ScanPolicy {
            switch_cost_ms: 500,
            ..p
        };
        assert!(bad.validate().is_err());
        assert!(ScanPolicy { dwell_ms: 0, ..p }.validate().is_err());
    }

    #[test]
    fn hysteresis_rules() {
        let p = ScanPolicy::default();
        assert_eq!(
            step(&locked(-60.0, -57.0), &obs(1.0, -60.0), &p),
            Action::Stay
        );
        assert_eq!(
            step(&locked(-60.0, -50.0), &obs(1.0, -60.0), &p),
            Action::Switch(ch(155))
        );
        // the fresh observation counts, not the stored value
        assert_eq!(
            step(&locked(-70.0, -60.0), &obs(1.0, -58.0), &p),
            Action::Stay
        );
    }

    #[test]
    fn staleness_and_period() {
        let p = ScanPolicy {
            scan_period_s: 1000.0,
            ..ScanPolicy::default()
        };
        let silent = Observation {
            now_ns: 121_000_000_000,
            heard: vec![],
        };
        assert_eq!(step(&locked(-60.0, -57.0), &silent, &p), Action::Rescan);
        let p = ScanPolicy::default();
        assert_eq!(
            step(&locked(-60.0, -57.0), &obs(30.0, -60.0), &p),
            Action::Rescan
        );
        assert_eq!(
            step(&ScannerState::default(), &obs(0.0, -60.0), &p),
            Action::Rescan
        );
    }

    struct Fixed(Vec<(MacAddr, ChannelSpec, f64)>);

    impl RadioEnvironment for Fixed {
        fn beacons(&mut self, c: ChannelSpec, _: u64) -> Vec<(MacAddr, f64)> {
            self.0
                .iter()
                .filter(|b| b.1 == c)
                .map(|b| (b.0, b.2))
                .collect()
        }
    }

    #[test]
    fn scan_records_every_ap() {
        let p = ScanPolicy::default();
        let chans = ChannelSpec::all_80mhz();
        let m = |k| MacAddr([0, 0, 0, 0, 0, k]);
        let mut env = Fixed(vec![
            (m(1), ch(42), -70.0),
            (m(2), ch(58), -50.0),
            (m(3), ch(106), -60.0),
            (m(4), ch(155), -65.0),
            (m(5), ch(155), -40.0),
        ]);
        let r = scan_all(&mut env, &chans, 0, &p);
        let macs: Vec<u8> = r.records.iter().map(|r| r.mac.0[5]).collect();
        assert_eq!(macs, vec![5, 2, 3, 4, 1]);
        assert_eq!(r.downtime_ms, 600);
        assert_eq!(r.end_ns, 600 * NS_PER_MS);
        assert!(scan_all(&mut Fixed(vec![]), &chans, 0, &p)
            .records
            .is_empty());
    }

    fn ap(k: u8, x: f64, y: f64, channel: u16) -> AccessPoint {
        AccessPoint {
            mac: MacAddr([0, 0, 0, 0, 0, k]),
            location: [x, y],
            chanspec: ch(channel),
            tx_power_dbm: 20.0,
        }
    }

    fn scenario(aps: Vec<AccessPoint>, trajectory: Vec<(u64, Pose2D)>, noise: f64) -> SimScenario {
        let mut s = SimScenario::new(ch(155), 4, [0.0, 0.0]);
        s.aps = aps;
        s.trajectory = trajectory;
        s.rssi_noise_db = noise;
        s
    }

    #[test]
    fn stationary_robot_locks_once() {
        let traj = (0..2000)
            .map(|k| (k * 100_000_000, Pose2D::new(1.0, 1.0, 0.0)))
            .collect();
        let sc = scenario(vec![ap(1, 0.0, 0.0, 42), ap(2, 20.0, 0.0, 155)], traj, 1.0);
        let p = ScanPolicy::default();
        let w = run_walkthrough(&sc, &p).unwrap();
        assert_eq!(w.summary.switch_count, 1);
        assert!(w.log.iter().skip(1).all(|e| e.tuned == Some(ch(42))));
        assert_eq!(w.summary.downtime_ms, w.summary.expected_downtime_ms(&p));
        assert_eq!(w.summary.scan_count, 1 + 199_900 / 30_000);
    }

    #[test]
    fn equal_aps_never_oscillate() {
        let traj = (0..10_000)
            .map(|k| (k * 100_000_000, Pose2D::new(5.0, 3.0, 0.0)))
            .collect();
        let sc = scenario(vec![ap(1, 0.0, 0.0, 42), ap(2, 10.0, 0.0, 155)], traj, 2.9);
        let w = run_walkthrough(&sc, &ScanPolicy::default()).unwrap();
        assert_eq!(w.summary.switch_count, 1);
    }

    #[test]
    fn walkthrough_validation() {
        let traj = vec![(0, Pose2D::new(0.0, 0.0, 0.0))];
        let p = ScanPolicy::default();
        assert!(
            run_walkthrough(&scenario(vec![ap(1, 0.0, 0.0, 42)], traj.clone(), 0.0), &p).is_err()
        );
        let same = vec![ap(1, 0.0, 0.0, 42), ap(2, 1.0, 0.0, 42)];
        assert!(run_walkthrough(&scenario(same, traj, 0.0), &p).is_err());
    }

    #[test]
    fn csv_shape() {
        let traj = (0..5)
            .map(|k| (k * 100_000_000, Pose2D::new(1.0, 0.0, 0.0)))
            .collect();
        let sc = scenario(vec![ap(1, 0.0, 0.0, 42), ap(2, 20.0, 0.0, 155)], traj, 0.0);
        let w = run_walkthrough(&sc, &ScanPolicy::default()).unwrap();
        let mut buf = Vec::new();
        write_walkthrough_csv(&mut buf, &w.log).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], WALK_CSV_HEADER);
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[1], "0.000,1.000,0.000,42,42,,rescan;switch 42/80");
        // 20 dBm at 1 m from the AP
        assert_eq!(lines[2], "0.100,1.000,0.000,42,42,20.00,stay");
    }
}
