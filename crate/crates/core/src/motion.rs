//! Post-grasp motion primitives and the seven discrete actions.
//!
//! The helix sweeps an ellipse about `c_h` while rising linearly, reaching
//! the full height `h` after two turns (the largest sweep in the action
//! set). The spin is a two-way yaw oscillation `0 -> +theta_s -> -theta_s
//! -> 0` at a fixed tool position.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::grasp::Grasp;
use crate::{Error, Result};

/// Largest helix sweep in the action set.
pub const MAX_THETA_H: f64 = 4.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActionId {
    #[serde(rename = "a_dl")]
    Dl,
    #[serde(rename = "a_h")]
    H,
    #[serde(rename = "a_hs")]
    Hs,
    #[serde(rename = "a_f")]
    F,
    #[serde(rename = "a_fs")]
    Fs,
    #[serde(rename = "a_tf")]
    Tf,
    #[serde(rename = "a_tfs")]
    Tfs,
}

impl ActionId {
    pub const ALL: [ActionId; 7] = [
        ActionId::Dl,
        ActionId::H,
        ActionId::Hs,
        ActionId::F,
        ActionId::Fs,
        ActionId::Tf,
        ActionId::Tfs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActionId::Dl => "a_dl",
            ActionId::H => "a_h",
            ActionId::Hs => "a_hs",
            ActionId::F => "a_f",
            ActionId::Fs => "a_fs",
            ActionId::Tf => "a_tf",
            ActionId::Tfs => "a_tfs",
        }
    }

    pub fn complexity(self) -> u8 {
        self as u8
    }

    pub fn from_complexity(a: u8) -> Option<Self> {
        Self::ALL.get(a as usize).copied()
    }

    pub fn spec(self) -> ActionSpec {
        action_table()[self as usize]
    }
}

impl std::str::FromStr for ActionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown action {s:?}")))
    }
}

impl std::fmt::Display for ActionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    None,
    HelixOnly,
    HelixSpin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub id: ActionId,
    pub scheme: Scheme,
    pub theta_h: f64,
    pub theta_s: f64,
    /// Seconds for the post-grasp trajectory.
    pub exec_time: f64,
    pub complexity: u8,
    /// Single-object successes and attempts in the reference trials.
    pub trials: (u32, u32),
}

impl ActionSpec {
    pub fn success_rate(&self) -> f64 {
        self.trials.0 as f64 / self.trials.1 as f64
    }
}

pub fn action_table() -> [ActionSpec; 7] {
    let row = |id, scheme, theta_h, theta_s, exec_time, complexity, ok| ActionSpec {
        id,
        scheme,
        theta_h,
        theta_s,
        exec_time,
        complexity,
        trials: (ok, 80),
    };
    use ActionId::*;
    use Scheme::*;
    [
        row(Dl, None, 0.0, 0.0, 1.2, 0, 31),
        row(H, HelixOnly, PI, 0.0, 2.3, 1, 47),
        row(Hs, HelixSpin, PI, PI / 2.0, 2.8, 2, 60),
        row(F, HelixOnly, 2.0 * PI, 0.0, 5.0, 3, 65),
        row(Fs, HelixSpin, 2.0 * PI, PI / 2.0, 5.5, 4, 66),
        row(Tf, HelixOnly, 4.0 * PI, 0.0, 8.2, 5, 70),
        row(Tfs, HelixSpin, 4.0 * PI, PI / 2.0, 8.7, 6, 72),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HelixParams {
    pub c_h: [f64; 2],
    pub r_x: f64,
    pub r_y: f64,
    pub h0: f64,
    pub h: f64,
}

impl Default for HelixParams {
    fn default() -> Self {
        Self {
            c_h: [0.525, 0.065],
            r_x: 0.1,
            r_y: 0.225,
            h0: 0.32,
            h: 0.14,
        }
    }
}

impl HelixParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_x > 0.0 && self.r_x <= self.r_y && self.h0 > 0.0 && self.h > 0.0) {
            return Err(Error::Config(format!("invalid helix parameters {self:?}")));
        }
        Ok(())
    }

    fn ellipse(&self, angle: f64) -> [f64; 2] {
        [self.c_h[0] + self.r_x * angle.cos(), self.c_h[1] + self.r_y * angle.sin()]
    }

    /// Ellipse angle of the point nearest `p`: a coarse scan refined by
    /// golden-section search.
    pub fn nearest_phase(&self, p: [f64; 2]) -> f64 {
        let d2 = |a: f64| {
            let q = self.ellipse(a);
            (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)
        };
        let n = 720;
        let step = TAU / n as f64;
        let best = (0..n).min_by(|&i, &j| d2(i as f64 * step).total_cmp(&d2(j as f64 * step))).unwrap();
        let (mut lo, mut hi) = ((best as f64 - 1.0) * step, (best as f64 + 1.0) * step);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..80 {
            let a = hi - g * (hi - lo);
            let b = lo + g * (hi - lo);
            if d2(a) < d2(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        (0.5 * (lo + hi)).rem_euclid(TAU)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Descend,
    Lift,
    Helix,
    Spin,
    Transport,
}

/// Waypoints plus the index range each phase covers (phases share their
/// boundary waypoint).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<Waypoint>", into = "Vec<Waypoint>")]
pub struct Trajectory {
    pub waypoints: Vec<Waypoint>,
    pub phases: Vec<(Phase, usize, usize)>,
}

impl From<Vec<Waypoint>> for Trajectory {
    fn from(waypoints: Vec<Waypoint>) -> Self {
        Self { waypoints, phases: Vec::new() }
    }
}

impl From<Trajectory> for Vec<Waypoint> {
    fn from(t: Trajectory) -> Self {
        t.waypoints
    }
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        match (self.waypoints.first(), self.waypoints.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    pub fn phase(&self, p: Phase) -> Option<&[Waypoint]> {
        self.phases
            .iter()
            .find(|(q, _, _)| *q == p)
            .map(|&(_, a, b)| &self.waypoints[a..=b])
    }

    pub fn phase_duration(&self, p: Phase) -> f64 {
        self.phase(p).map(|w| w[w.len() - 1].t - w[0].t).unwrap_or(0.0)
    }

    /// Appends `pts` (without timestamps) so that the segment takes
    /// `duration` at uniform speed. A leading point equal to the current
    /// end is dropped. Speed is measured over position, or over yaw when
    /// the position does not move.
    fn push_segment(&mut self, phase: Phase, pts: &[[f64; 4]], duration: f64) {
        let mut pts = pts.to_vec();
        let t0 = match self.waypoints.last() {
            Some(last) => {
                if pts.first().is_some_and(|p| *p == [last.x, last.y, last.z, last.yaw]) {
                    pts.remove(0);
                }
                last.t
            }
            None => 0.0,
        };
        let start = self.waypoints.len().saturating_sub(1);
        let prev = self.waypoints.last().map(|w| [w.x, w.y, w.z, w.yaw]);
        let chain: Vec<[f64; 4]> = prev.into_iter().chain(pts.iter().copied()).collect();
        let step = |a: &[f64; 4], b: &[f64; 4]| {
            let d = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2) + (b[2] - a[2]).powi(2)).sqrt();
            (d, (b[3] - a[3]).abs())
        };
        let lengths: Vec<(f64, f64)> = chain.windows(2).map(|w| step(&w[0], &w[1])).collect();
        let total_pos: f64 = lengths.iter().map(|l| l.0).sum();
        let total_yaw: f64 = lengths.iter().map(|l| l.1).sum();
        let (use_pos, total) = if total_pos > 1e-12 { (true, total_pos) } else { (false, total_yaw) };
        let mut t = t0;
        if prev.is_none() {
            if let Some(p) = pts.first() {
                self.waypoints.push(Waypoint { x: p[0], y: p[1], z: p[2], yaw: p[3], t });
            }
        }
        let n = lengths.len();
        for (k, l) in lengths.iter().enumerate() {
            let p = chain[k + 1];
            t = if k + 1 == n {
                t0 + duration
            } else if total > 0.0 {
                t + duration * if use_pos { l.0 } else { l.1 } / total
            } else {
                t + duration / n as f64
            };
            self.waypoints.push(Waypoint { x: p[0], y: p[1], z: p[2], yaw: p[3], t });
        }
        let end = self.waypoints.len() - 1;
        self.phases.push((phase, start, end));
    }
}

fn check_samples(n: usize, min: usize, what: &str) -> Result<()> {
    if n < min {
        return Err(Error::Parameter(format!("{what} must be >= {min}, got {n}")));
    }
    Ok(())
}

/// Helix sample points (without timing): vertical lift to `h0`, then the
/// sweep. `theta_h = 0` is the lift alone.
pub fn helix_points(helix: &HelixParams, theta_h: f64, start: [f64; 3], n_per_turn: usize) -> Result<Vec<[f64; 3]>> {
    check_samples(n_per_turn, 8, "n_per_turn")?;
    if !(0.0..=MAX_THETA_H + 1e-12).contains(&theta_h) {
        return Err(Error::Parameter(format!("theta_H {theta_h} outside [0, 4 pi]")));
    }
    let mut pts = vec![start, [start[0], start[1], helix.h0]];
    if theta_h > 0.0 {
        let phase = helix.nearest_phase([start[0], start[1]]);
        let step = TAU / n_per_turn as f64;
        let n = (theta_h / step - 1e-9).ceil() as usize;
        for k in 0..=n {
            let th = (k as f64 * step).min(theta_h);
            let [x, y] = helix.ellipse(th + phase);
            pts.push([x, y, helix.h0 + helix.h * th / MAX_THETA_H]);
        }
    }
    Ok(pts)
}

/// Lift and helix as a trajectory at unit speed (metres per second).
pub fn helix_waypoints(helix: &HelixParams, theta_h: f64, start: [f64; 3], n_per_turn: usize) -> Result<Trajectory> {
    let pts = helix_points(helix, theta_h, start, n_per_turn)?;
    let mut traj = Trajectory::default();
    let len: f64 = pts
        .windows(2)
        .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2) + (w[1][2] - w[0][2]).powi(2)).sqrt())
        .sum();
    let four: Vec<[f64; 4]> = pts.iter().map(|p| [p[0], p[1], p[2], 0.0]).collect();
    traj.push_segment(Phase::Helix, &four, len.max(1e-9));
    Ok(traj)
}

/// Yaw offsets of the two-way spin, `n` samples per leg.
pub fn spin_yaws(theta_s: f64, n: usize) -> Result<Vec<f64>> {
    check_samples(n, 4, "spin samples per leg")?;
    if theta_s == 0.0 {
        return Ok(vec![0.0]);
    }
    let mut yaws = vec![0.0];
    for (from, to) in [(0.0, theta_s), (theta_s, -theta_s), (-theta_s, 0.0)] {
        for k in 1..=n {
            let f = k as f64 / n as f64;
            yaws.push(if k == n { to } else { from + (to - from) * f });
        }
    }
    Ok(yaws)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinParams {
    /// Gripper tip position.
    pub c_s: [f64; 3],
    /// One-way rotation angle.
    pub theta_s: f64,
}

/// Spin lasting `duration` seconds.
pub fn spin_waypoints(s: &SpinParams, n: usize, duration: f64) -> Result<Trajectory> {
    let SpinParams { c_s, theta_s } = *s;
    let yaws = spin_yaws(theta_s, n)?;
    let mut traj = Trajectory::default();
    let pts: Vec<[f64; 4]> = yaws.iter().map(|&y| [c_s[0], c_s[1], c_s[2], y]).collect();
    if pts.len() == 1 {
        traj.waypoints.push(Waypoint { x: c_s[0], y: c_s[1], z: c_s[2], yaw: 0.0, t: 0.0 });
        traj.phases.push((Phase::Spin, 0, 0));
        return Ok(traj);
    }
    traj.push_segment(Phase::Spin, &pts, duration);
    Ok(traj)
}

/// Timing and fixed poses around the primitives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionConfig {
    pub helix: HelixParams,
    /// Seconds per half turn of helix.
    pub helix_time_per_pi: f64,
    /// Seconds for the whole two-way spin.
    pub spin_time: f64,
    /// Height above the grasp the gripper approaches from.
    pub approach_height: f64,
    pub descend_time: f64,
    pub place_pose: [f64; 3],
    pub transport_time: f64,
    pub helix_samples_per_turn: usize,
    pub spin_samples_per_leg: usize,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            helix: HelixParams::default(),
            helix_time_per_pi: 1.1,
            spin_time: 0.5,
            approach_height: 0.1,
            descend_time: 0.8,
            place_pose: [0.1, 0.45, 0.3],
            transport_time: 2.0,
            helix_samples_per_turn: 32,
            spin_samples_per_leg: 8,
        }
    }
}

impl MotionConfig {
    /// Checks that every action's post-grasp time covers its helix and spin.
    pub fn validate(&self) -> Result<()> {
        self.helix.validate()?;
        for a in action_table() {
            let fixed = self.helix_time_per_pi * a.theta_h / PI + if a.theta_s > 0.0 { self.spin_time } else { 0.0 };
            if fixed >= a.exec_time {
                return Err(Error::Config(format!(
                    "{}: helix and spin take {fixed:.2} s of its {:.2} s",
                    a.id, a.exec_time
                )));
            }
        }
        if self.descend_time <= 0.0 || self.transport_time <= 0.0 {
            return Err(Error::Config("descend_time and transport_time must be > 0".into()));
        }
        Ok(())
    }
}

/// Descend and close at the grasp, lift (and move to the helix entry),
/// sweep the helix, spin, transport. The helix runs at a fixed time per
/// half turn and the spin takes a fixed time; the rest of the action's
/// execution time goes to the lift.
pub fn plan_action(a: &ActionSpec, g: &Grasp, cfg: &MotionConfig) -> Result<Trajectory> {
    let r = g
        .robot
        .ok_or_else(|| Error::Precondition("grasp has no robot-frame pose".into()))?;
    let yaw = r.gphi;
    let start = [r.gx, r.gy, r.gz];
    let helix_t = cfg.helix_time_per_pi * a.theta_h / PI;
    let spin_t = if a.theta_s > 0.0 { cfg.spin_time } else { 0.0 };
    let lift_t = a.exec_time - helix_t - spin_t;
    if lift_t <= 0.0 {
        return Err(Error::Config(format!("{} has no time left to lift", a.id)));
    }
    let mut traj = Trajectory::default();
    let above = [r.gx, r.gy, r.gz + cfg.approach_height, yaw];
    traj.push_segment(Phase::Descend, &[above, [r.gx, r.gy, r.gz, yaw]], cfg.descend_time);

    let pts = helix_points(&cfg.helix, a.theta_h, start, cfg.helix_samples_per_turn)?;
    let with_yaw = |p: &[f64; 3]| [p[0], p[1], p[2], yaw];
    // lift: up to h0, then across to the helix entry
    let lift_end = if a.theta_h > 0.0 { 3 } else { 2 };
    let lift: Vec<[f64; 4]> = pts[..lift_end].iter().map(with_yaw).collect();
    traj.push_segment(Phase::Lift, &lift, lift_t);
    if a.theta_h > 0.0 {
        let sweep: Vec<[f64; 4]> = pts[2..].iter().map(with_yaw).collect();
        traj.push_segment(Phase::Helix, &sweep, helix_t);
    }
    if a.theta_s > 0.0 {
        let end = *pts.last().unwrap();
        let spin: Vec<[f64; 4]> = spin_yaws(a.theta_s, cfg.spin_samples_per_leg)?
            .into_iter()
            .map(|dy| [end[0], end[1], end[2], yaw + dy])
            .collect();
        traj.push_segment(Phase::Spin, &spin, spin_t);
    }
    let last = *traj.waypoints.last().unwrap();
    let p = cfg.place_pose;
    traj.push_segment(
        Phase::Transport,
        &[[last.x, last.y, last.z, last.yaw], [p[0], p[1], p[2], yaw]],
        cfg.transport_time,
    );
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complexity_and_time_rise_together() {
        let t = action_table();
        for w in t.windows(2) {
            assert!(w[0].complexity < w[1].complexity);
            assert!(w[0].exec_time < w[1].exec_time);
        }
        for a in ActionId::ALL {
            assert_eq!(a.spec().id, a);
            assert_eq!(a.name().parse::<ActionId>().unwrap(), a);
            assert_eq!(ActionId::from_complexity(a.complexity()), Some(a));
        }
        assert!("a_x".parse::<ActionId>().is_err());
    }

    #[test]
    fn action_ids_serialize_by_name() {
        assert_eq!(serde_json::to_string(&ActionId::Tfs).unwrap(), "\"a_tfs\"");
        let a: ActionId = serde_json::from_str("\"a_hs\"").unwrap();
        assert_eq!(a, ActionId::Hs);
    }

    #[test]
    fn nearest_phase_finds_the_closest_ellipse_point() {
        let h = HelixParams::default();
        for p in [[0.3, 0.0], [0.525, 0.4], [0.7, -0.3], [0.525, 0.065]] {
            let a = h.nearest_phase(p);
            let q = h.ellipse(a);
            let d = (q[0] - p[0]).hypot(q[1] - p[1]);
            for k in 0..3600 {
                let r = h.ellipse(k as f64 * TAU / 3600.0);
                assert!(d <= (r[0] - p[0]).hypot(r[1] - p[1]) + 1e-9);
            }
        }
    }

    #[test]
    fn helix_rejects_over_long_sweeps() {
        let h = HelixParams::default();
        assert!(helix_points(&h, 5.0 * PI, [0.3, 0.0, 0.03], 16).is_err());
        assert!(helix_points(&h, PI, [0.3, 0.0, 0.03], 4).is_err());
    }

    #[test]
    fn trajectory_json_is_a_waypoint_list() {
        let t = spin_waypoints(&SpinParams { c_s: [0.1, 0.2, 0.3], theta_s: PI / 2.0 }, 4, 0.5).unwrap();
        let text = serde_json::to_string(&t).unwrap();
        assert!(text.starts_with("[{\"x\":0.1,"));
        let back: Trajectory = serde_json::from_str(&text).unwrap();
        assert_eq!(back.waypoints, t.waypoints);
    }
}
