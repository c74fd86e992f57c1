//! Velocity-threshold gesture parsing.
//!
//! Within a window, the movement toward constriction is the largest velocity
//! extremum in the constriction direction; the movement away is the largest
//! extremum in the opposite direction after it. Onset/Target are where the
//! speed crosses `threshold × peak` around the first, Release/Offset around the
//! second. Crossings are linearly interpolated between samples.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::score::Channel;
use crate::smoothing::velocity;

pub const DEFAULT_THRESHOLD: f64 = 0.2;
/// Peaks slower than this are treated as no movement at all.
pub const DEFAULT_VELOCITY_FLOOR: f64 = 5.0;

/// Which way the channel moves toward constriction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increasing,
    Decreasing,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Increasing => 1.0,
            Direction::Decreasing => -1.0,
        }
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inc" | "increasing" => Ok(Direction::Increasing),
            "dec" | "decreasing" => Ok(Direction::Decreasing),
            _ => Err(Error::InvalidArgument(format!("direction must be inc or dec, got `{s}`"))),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Increasing => "inc",
            Direction::Decreasing => "dec",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GestureLandmarks {
    pub onset_ms: f64,
    pub target_ms: f64,
    pub release_ms: f64,
    pub offset_ms: f64,
    /// Speed of the movement toward constriction, mm/s (positive).
    pub peak_vel_to: f64,
    pub peak_vel_to_ms: f64,
    /// Speed of the movement away from constriction, mm/s (positive).
    pub peak_vel_away: f64,
    pub peak_vel_away_ms: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParseSettings {
    pub threshold: f64,
    pub velocity_floor: f64,
}

impl Default for ParseSettings {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            velocity_floor: DEFAULT_VELOCITY_FLOOR,
        }
    }
}

/// Parses one gesture with the default velocity floor.
pub fn find_gesture(
    traj: &Trajectory,
    window_ms: (f64, f64),
    direction: Direction,
    threshold: f64,
) -> Result<GestureLandmarks> {
    find_gesture_with(
        traj,
        window_ms,
        direction,
        &ParseSettings {
            threshold,
            ..Default::default()
        },
    )
}

pub fn find_gesture_with(
    traj: &Trajectory,
    (a, b): (f64, f64),
    direction: Direction,
    settings: &ParseSettings,
) -> Result<GestureLandmarks> {
    let threshold = settings.threshold;
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} outside (0, 1)")));
    }
    let (lo, hi) = (traj.t0_ms, traj.end_ms());
    let eps = 1e-9 * traj.period_ms();
    if !(a < b) || a < lo - eps || b > hi + eps {
        return Err(Error::InvalidArgument(format!(
            "window [{a}, {b}] ms not inside trajectory [{lo}, {hi}] ms"
        )));
    }
    let vel = velocity(traj)?;
    let sign = direction.sign();
    let v: Vec<f64> = vel.iter().map(|x| sign * x).collect();

    let period = traj.period_ms();
    let first = ((a - lo) / period - 1e-9).ceil().max(0.0) as usize;
    let last = (((b - lo) / period + 1e-9).floor() as usize).min(v.len() - 1);
    if last < first + 2 {
        return Err(Error::InvalidArgument("window shorter than three samples".into()));
    }

    let p = (first..=last)
        .max_by(|&i, &j| v[i].total_cmp(&v[j]).then(j.cmp(&i)))
        .expect("nonempty window");
    if v[p] < settings.velocity_floor {
        return Err(Error::NoMovement {
            peak: v[p].max(0.0),
            floor: settings.velocity_floor,
        });
    }
    let q = ((p + 1)..=last)
        .min_by(|&i, &j| v[i].total_cmp(&v[j]).then(i.cmp(&j)))
        .filter(|&q| -v[q] >= settings.velocity_floor)
        .ok_or(Error::NoReturnMovement {
            t_ms: traj.time_ms(p),
        })?;

    let level_to = threshold * v[p];
    let level_away = threshold * -v[q];
    let away: Vec<f64> = v.iter().map(|x| -x).collect();

    let time = |i: usize| traj.time_ms(i);
    let crossing = |sig: &[f64], i: usize, j: usize, level: f64| -> f64 {
        // sig[i] and sig[j] straddle `level`, j = i + 1
        let frac = (level - sig[i]) / (sig[j] - sig[i]);
        time(i) + frac * (time(j) - time(i))
    };
    let outside = |what: &str| Error::Degenerate(format!("{what} crossing falls outside the window"));

    let onset = (first..p)
        .rev()
        .find(|&i| v[i] < level_to)
        .map(|i| crossing(&v, i, i + 1, level_to))
        .ok_or_else(|| outside("onset"))?;
    let target_idx = ((p + 1)..=q).find(|&j| v[j] < level_to).ok_or_else(|| outside("target"))?;
    let target = crossing(&v, target_idx - 1, target_idx, level_to);
    let release = (target_idx..q)
        .rev()
        .find(|&i| away[i] < level_away)
        .map(|i| crossing(&away, i, i + 1, level_away))
        .ok_or_else(|| outside("release"))?;
    let offset = ((q + 1)..=last)
        .find(|&j| away[j] < level_away)
        .map(|j| crossing(&away, j - 1, j, level_away))
        .ok_or_else(|| outside("offset"))?;

    Ok(GestureLandmarks {
        onset_ms: onset,
        target_ms: target,
        release_ms: release.max(target),
        offset_ms: offset,
        peak_vel_to: v[p],
        peak_vel_to_ms: time(p),
        peak_vel_away: -v[q],
        peak_vel_away_ms: time(q),
        direction,
    })
}

/// A 2-D sensor trace (e.g. an EMA lip coil) in mm.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorTrace {
    pub sample_rate_hz: f64,
    pub t0_ms: f64,
    pub points: Vec<[f64; 2]>,
}

/// Lip aperture as the pointwise Euclidean distance between two sensors.
pub fn compute_la(upper: &SensorTrace, lower: &SensorTrace) -> Result<Trajectory> {
    if upper.points.len() != lower.points.len() {
        return Err(Error::InvalidArgument(format!(
            "sensor traces differ in length ({} vs {})",
            upper.points.len(),
            lower.points.len()
        )));
    }
    if upper.sample_rate_hz != lower.sample_rate_hz || upper.t0_ms != lower.t0_ms {
        return Err(Error::InvalidArgument("sensor traces differ in time base".into()));
    }
    let samples = upper
        .points
        .iter()
        .zip(&lower.points)
        .map(|(u, l)| (u[0] - l[0]).hypot(u[1] - l[1]))
        .collect();
    Ok(Trajectory::new(Channel::La, upper.sample_rate_hz, upper.t0_ms, samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::analytic_step_response;

    /// Approach from 0 to Δ starting at `on`, then return to 0 from `off`.
    fn approach_release(delta: f64, w: f64, on: f64, off: f64, n: usize) -> Trajectory {
        let samples = (0..n)
            .map(|i| {
                let t = i as f64 * 5.0;
                let up = if t >= on { analytic_step_response(delta, w, t - on).unwrap().0 } else { 0.0 };
                let down = if t >= off { analytic_step_response(delta, w, t - off).unwrap().0 } else { 0.0 };
                up - down
            })
            .collect();
        Trajectory::new(Channel::TbCl, 200.0, 0.0, samples)
    }

    #[test]
    fn constant_signal_has_no_movement() {
        let t = Trajectory::new(Channel::La, 200.0, 0.0, vec![3.0; 100]);
        assert!(matches!(
            find_gesture(&t, (0.0, 400.0), Direction::Decreasing, 0.2),
            Err(Error::NoMovement { .. })
        ));
    }

    #[test]
    fn step_without_return() {
        let t = approach_release(10.0, 20.0, 100.0, 1e9, 200);
        assert!(matches!(
            find_gesture(&t, (0.0, 900.0), Direction::Increasing, 0.2),
            Err(Error::NoReturnMovement { .. })
        ));
    }

    #[test]
    fn landmark_ordering_and_levels() {
        let t = approach_release(10.0, 20.0, 100.0, 500.0, 220);
        let g = find_gesture(&t, (0.0, 1000.0), Direction::Increasing, 0.2).unwrap();
        assert!(g.onset_ms < g.target_ms && g.target_ms <= g.release_ms && g.release_ms < g.offset_ms);
        assert!((g.onset_ms - 104.0).abs() < 5.0);
        assert!((g.target_ms - 299.7).abs() < 5.0);
        assert!((g.release_ms - 504.0).abs() < 5.0);
        assert!((g.offset_ms - 699.7).abs() < 5.0);
    }

    #[test]
    fn decreasing_direction_mirrors_increasing() {
        let up = approach_release(10.0, 20.0, 100.0, 500.0, 220);
        let down = up.with_samples(up.samples.iter().map(|x| 15.0 - x).collect());
        let a = find_gesture(&up, (0.0, 1000.0), Direction::Increasing, 0.2).unwrap();
        let b = find_gesture(&down, (0.0, 1000.0), Direction::Decreasing, 0.2).unwrap();
        assert!((a.onset_ms - b.onset_ms).abs() < 1e-9);
        assert!((a.offset_ms - b.offset_ms).abs() < 1e-9);
    }

    #[test]
    fn amplitude_scaling_leaves_times_unchanged() {
        let t = approach_release(1.0, 20.0, 100.0, 500.0, 220);
        let big = t.with_samples(t.samples.iter().map(|x| 10.0 * x).collect());
        let a = find_gesture(&t, (0.0, 1000.0), Direction::Increasing, 0.2).unwrap();
        let b = find_gesture(&big, (0.0, 1000.0), Direction::Increasing, 0.2).unwrap();
        assert!((a.onset_ms - b.onset_ms).abs() < 1e-9);
        assert!((a.target_ms - b.target_ms).abs() < 1e-9);
    }

    #[test]
    fn bad_arguments() {
        let t = approach_release(10.0, 20.0, 100.0, 500.0, 220);
        assert!(find_gesture(&t, (0.0, 1000.0), Direction::Increasing, 0.0).is_err());
        assert!(find_gesture(&t, (0.0, 1000.0), Direction::Increasing, 1.0).is_err());
        assert!(find_gesture(&t, (-10.0, 1000.0), Direction::Increasing, 0.2).is_err());
        assert!(find_gesture(&t, (500.0, 400.0), Direction::Increasing, 0.2).is_err());
        assert!("up".parse::<Direction>().is_err());
    }

    #[test]
    fn lip_aperture_distances() {
        let trace = |p: [f64; 2]| SensorTrace {
            sample_rate_hz: 200.0,
            t0_ms: 0.0,
            points: vec![p; 4],
        };
        let la = compute_la(&trace([0.0, 3.0]), &trace([0.0, 0.0])).unwrap();
        assert_eq!(la.samples, vec![3.0; 4]);
        assert_eq!(la.channel, Channel::La);
        let same = compute_la(&trace([1.0, 2.0]), &trace([1.0, 2.0])).unwrap();
        assert_eq!(same.samples, vec![0.0; 4]);
        let five = compute_la(&trace([3.0, 4.0]), &trace([0.0, 0.0])).unwrap();
        assert_eq!(five.samples, vec![5.0; 4]);
        let mut short = trace([0.0, 0.0]);
        short.points.pop();
        assert!(compute_la(&trace([0.0, 0.0]), &short).is_err());
    }
}
