//! Step-response metrics extracted from a simulation log.

use super::{ScenarioConfig, SimLog};
use crate::spatial::rot_to_euler;

pub const AXIS_NAMES: [&str; 6] = ["x", "y", "z", "phi", "psi", "gamma"];

/// Relative settling band.
pub const SETTLING_BAND: f64 = 0.02;

/// Metrics of one axis. Position axes are in m, attitude axes in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisMetrics {
    /// Signed commanded change of the final step; 0 when the axis is held.
    pub step: f64,
    /// Peak excursion beyond the target as a percentage of `|step|`; `None` for held axes.
    pub overshoot_pct: Option<f64>,
    /// First entry into the settling band never left again, measured from the
    /// step time; `None` when the band is not held at the end of the log or
    /// the axis is held.
    pub settling_time: Option<f64>,
    /// Largest `|value - target|` after the step time.
    pub max_deviation: f64,
    /// `|mean(value - target)|` over the final 25% of the log.
    pub steady_error: f64,
    /// RMS of `value - target` over the final 25% of the log.
    pub rms_final: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub axes: [AxisMetrics; 6],
    /// Time of the last setpoint change, s.
    pub step_time: f64,
}

impl Metrics {
    /// Flat `key = value` text, one entry per line.
    pub fn to_key_values(&self) -> String {
        let mut s = format!("step_time = {}\n", self.step_time);
        for (name, m) in AXIS_NAMES.iter().zip(&self.axes) {
            s += &format!("{name}.step = {}\n", m.step);
            match m.overshoot_pct {
                Some(v) => s += &format!("{name}.overshoot_pct = {v}\n"),
                None => s += &format!("{name}.overshoot_pct = none\n"),
            }
            match m.settling_time {
                Some(v) => s += &format!("{name}.settling_s = {v}\n{name}.settled = true\n"),
                None => s += &format!("{name}.settling_s = none\n{name}.settled = false\n"),
            }
            s += &format!("{name}.max_deviation = {}\n", m.max_deviation);
            s += &format!("{name}.steady_error = {}\n", m.steady_error);
            s += &format!("{name}.rms_final = {}\n", m.rms_final);
        }
        s
    }
}

/// Step metrics of one signal sampled at `times`, with the step applied at
/// `times[start]` towards `target`. `held_tol` decides when a step counts as zero.
pub fn axis_metrics(times: &[f64], values: &[f64], start: usize, target: f64, held_tol: f64) -> AxisMetrics {
    let n = values.len();
    let initial = values[start];
    let step = target - initial;
    let held = step.abs() <= held_tol;
    let after = &values[start..];
    let max_deviation = after.iter().map(|v| (v - target).abs()).fold(0.0, f64::max);

    let tail = &values[n - (n / 4).max(1)..];
    let mean = tail.iter().map(|v| v - target).sum::<f64>() / tail.len() as f64;
    let rms = (tail.iter().map(|v| (v - target).powi(2)).sum::<f64>() / tail.len() as f64).sqrt();

    let (overshoot_pct, settling_time) = if held {
        (None, None)
    } else {
        let dir = step.signum();
        let peak = after.iter().map(|v| dir * (v - target)).fold(0.0, f64::max);
        let band = SETTLING_BAND * step.abs();
        let settling = match after.iter().rposition(|v| (v - target).abs() > band) {
            None => Some(0.0),
            Some(k) if start + k + 1 >= n => None,
            Some(k) => Some(times[start + k + 1] - times[start]),
        };
        (Some(100.0 * peak / step.abs()), settling)
    };
    AxisMetrics {
        step: if held { 0.0 } else { step },
        overshoot_pct,
        settling_time,
        max_deviation,
        steady_error: mean.abs(),
        rms_final: rms,
    }
}

/// Per-axis metrics of the true trajectory against the last setpoint change.
pub fn compute_metrics(log: &SimLog, cfg: &ScenarioConfig) -> Metrics {
    let times: Vec<f64> = log.rows.iter().map(|r| r.t).collect();
    let step_time = cfg.setpoints.iter().map(|s| s.t).fold(0.0, f64::max);
    let start = times.iter().position(|&t| t >= step_time - 1e-12).unwrap_or(0);
    let target = cfg.desired_at(step_time);
    let target_euler = rot_to_euler(&target.rot).angles.to_degrees();
    let axes = std::array::from_fn(|k| {
        let (values, goal, tol): (Vec<f64>, f64, f64) = if k < 3 {
            (log.rows.iter().map(|r| r.pose.pos[k]).collect(), target.pos[k], 1e-9)
        } else {
            (log.rows.iter().map(|r| r.euler_deg[k - 3]).collect(), target_euler[k - 3], 1e-7)
        };
        axis_metrics(&times, &values, start, goal, tol)
    });
    Metrics { axes, step_time }
}
