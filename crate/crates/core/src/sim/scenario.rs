use crate::control::{ControlMode, Gains};
use crate::error::{Error, Result};
use crate::kinematics::{JointMotion, JointVec, ARM_JOINTS};
use crate::spatial::Pose;

/// A pose target that becomes active at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setpoint {
    pub t: f64,
    pub pose: Pose,
}

/// Prescribed joint motion.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum JointTrajectory {
    /// Joints held at their initial angles.
    #[default]
    Fixed,
    /// `qd_j(t) = amplitude * sin(frequency * t)` on one joint (1-based), the rest held.
    SinRate { joint: usize, amplitude: f64, frequency: f64 },
}

impl JointTrajectory {
    /// Angles, rates and accelerations at time `t` starting from `q0`.
    pub fn motion(&self, q0: &JointVec, t: f64) -> JointMotion {
        let mut m = JointMotion::locked(*q0);
        if let JointTrajectory::SinRate { joint, amplitude, frequency } = *self {
            let j = joint - 1;
            let (s, c) = (frequency * t).sin_cos();
            m.q[j] += amplitude / frequency * (1.0 - c);
            m.qd[j] = amplitude * s;
            m.qdd[j] = amplitude * frequency * c;
        }
        m
    }

    fn validate(&self) -> Result<()> {
        if let JointTrajectory::SinRate { joint, amplitude, frequency } = *self {
            if !(1..=ARM_JOINTS).contains(&joint) {
                return Err(Error::InvalidScenario(format!("joint trajectory: joint {joint} is not in 1..={ARM_JOINTS}")));
            }
            if !(frequency > 0.0) || !amplitude.is_finite() {
                return Err(Error::InvalidScenario("joint trajectory: frequency must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// Uniform measurement noise bounds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseConfig {
    /// Per-axis position bound, m.
    pub pos_bound: f64,
    /// Per-axis Euler-angle bound, rad.
    pub ang_bound: f64,
}

/// Time-stepping scheme for the plant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    /// Constant-acceleration update of position and attitude; exact for
    /// constant accelerations.
    #[default]
    SecondOrder,
    /// Classical fourth-order Runge-Kutta with the rotor command held.
    Rk4,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub initial_pose: Pose,
    pub initial_joints: JointVec,
    /// Sorted by time. Before the first entry the initial pose is held.
    pub setpoints: Vec<Setpoint>,
    pub joint_trajectory: JointTrajectory,
    pub noise: NoiseConfig,
    pub uncertainty_pct: f64,
    pub filter_tau: f64,
    pub dt: f64,
    pub duration: f64,
    pub seed: u64,
    pub mode: ControlMode,
    pub gains: Gains,
    /// Time constant of the controller's twist estimate, s.
    pub velocity_tau: f64,
    pub integrator: Integrator,
}

impl ScenarioConfig {
    /// A hold-at-start scenario with default settings and no noise.
    pub fn hover(name: &str, pose: Pose, joints: JointVec, duration: f64) -> Self {
        Self {
            name: name.to_string(),
            initial_pose: pose,
            initial_joints: joints,
            setpoints: vec![Setpoint { t: 0.0, pose }],
            joint_trajectory: JointTrajectory::Fixed,
            noise: NoiseConfig::default(),
            uncertainty_pct: 0.0,
            filter_tau: 0.04,
            dt: 0.002,
            duration,
            seed: 0,
            mode: ControlMode::DcPid,
            gains: Gains::default(),
            velocity_tau: 0.1,
            integrator: Integrator::SecondOrder,
        }
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    /// Active target at time `t`.
    pub fn desired_at(&self, t: f64) -> Pose {
        self.setpoints.iter().rev().find(|s| s.t <= t).map_or(self.initial_pose, |s| s.pose)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(format!("{}: {m}", self.name)));
        if !(self.dt > 0.0 && self.dt <= 0.005) {
            return bad(format!("dt must be in (0, 0.005], got {}", self.dt));
        }
        if !(self.duration >= self.dt) {
            return bad(format!("duration {} is shorter than dt", self.duration));
        }
        if !(self.noise.pos_bound >= 0.0 && self.noise.ang_bound >= 0.0) {
            return bad("noise bounds must be >= 0".into());
        }
        if !(0.0..=0.5).contains(&self.uncertainty_pct) {
            return bad(format!("uncertainty must be in [0, 0.5], got {}", self.uncertainty_pct));
        }
        if !(self.filter_tau >= 0.0 && self.velocity_tau >= 0.0) {
            return bad("filter time constants must be >= 0".into());
        }
        if self.setpoints.windows(2).any(|w| w[1].t < w[0].t) {
            return bad("setpoints must be sorted by time".into());
        }
        self.gains.validate().or_else(|m| bad(m))?;
        self.joint_trajectory.validate()
    }
}
