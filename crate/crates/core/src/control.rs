//! Pose error, PID law and the dynamic-compensation wrench command.
//!
//! Six-vectors are ordered position block then attitude block. The PID output
//! is a desired platform acceleration (m/s^2, rad/s^2); [`dc_pid`] and
//! [`plain_pid`] turn it into a world-frame wrench.

use nalgebra::Vector6;

use crate::dynamics::{assemble, platform_mass_matrix, solve_with_platform_accel, InternalSolution, SystemModel, Wrench};
use crate::error::Result;
use crate::kinematics::{Accel, JointMotion, Twist};
use crate::spatial::{log_so3, Pose, Vec3};

pub type Vec6 = Vector6<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ControlMode {
    /// PID plus model-based cancellation of gravity, gyroscopic and arm reaction terms.
    #[default]
    DcPid,
    /// PID plus a constant weight feedforward.
    PlainPid,
}

impl ControlMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ControlMode::DcPid => "dc_pid",
            ControlMode::PlainPid => "plain_pid",
        }
    }
}

impl std::str::FromStr for ControlMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "dc_pid" => Ok(ControlMode::DcPid),
            "plain_pid" => Ok(ControlMode::PlainPid),
            other => Err(format!("unknown controller mode `{other}` (expected dc_pid or plain_pid)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gains {
    pub kp: Vec6,
    pub ki: Vec6,
    pub kd: Vec6,
    /// Per-axis bound on the error integral.
    pub integral_clamp: f64,
    /// The integral only accumulates on axes whose error magnitude is below this.
    pub integral_window: Vec6,
    /// Time constant of the first-order lag on the derivative term, s; 0 uses
    /// the raw backward difference.
    pub derivative_tau: f64,
    /// Bound on the norm of the commanded linear acceleration, m/s^2.
    pub max_linear_accel: f64,
    /// Bound on the norm of the commanded angular acceleration, rad/s^2.
    pub max_angular_accel: f64,
}

impl Gains {
    /// Gains applied identically to the three position and the three attitude axes.
    pub fn uniform(pos: [f64; 3], att: [f64; 3], integral_clamp: f64, window: [f64; 2]) -> Self {
        let split = |p: f64, a: f64| Vec6::new(p, p, p, a, a, a);
        Self {
            kp: split(pos[0], att[0]),
            ki: split(pos[1], att[1]),
            kd: split(pos[2], att[2]),
            integral_clamp,
            integral_window: split(window[0], window[1]),
            derivative_tau: 0.0,
            max_linear_accel: f64::INFINITY,
            max_angular_accel: f64::INFINITY,
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        let all = self.kp.iter().chain(self.ki.iter()).chain(self.kd.iter());
        if all.clone().any(|g| !(*g >= 0.0 && g.is_finite())) {
            return Err("controller gains must be finite and non-negative".into());
        }
        if !(self.integral_clamp >= 0.0) || self.integral_window.iter().any(|w| !(*w > 0.0)) {
            return Err("integral clamp must be >= 0 and integral window > 0".into());
        }
        if !(self.derivative_tau >= 0.0 && self.derivative_tau.is_finite()) {
            return Err("derivative time constant must be >= 0".into());
        }
        if !(self.max_linear_accel > 0.0 && self.max_angular_accel > 0.0) {
            return Err("acceleration limits must be > 0".into());
        }
        Ok(())
    }
}

impl Default for Gains {
    fn default() -> Self {
        Self {
            derivative_tau: 0.05,
            max_linear_accel: 5.0,
            max_angular_accel: 30.0,
            ..Self::uniform([25.0, 8.0, 10.0], [25.0, 40.0, 6.0], 2.0, [0.2, 0.1])
        }
    }
}

/// World-frame pose error: `e_f = P_d - P_c`, `e_tau = log(R_d R_c^T)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PoseError {
    pub e_f: Vec3,
    pub e_tau: Vec3,
}

impl PoseError {
    pub fn to_vector(&self) -> Vec6 {
        Vec6::new(self.e_f.x, self.e_f.y, self.e_f.z, self.e_tau.x, self.e_tau.y, self.e_tau.z)
    }
}

pub fn pose_error(current: &Pose, desired: &Pose) -> PoseError {
    PoseError { e_f: desired.pos - current.pos, e_tau: log_so3(&(desired.rot * current.rot.transpose())) }
}

/// PID memory. The integral is never reset on setpoint changes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControllerState {
    pub integral: Vec6,
    pub prev_error: Option<Vec6>,
    /// Filtered error derivative.
    pub derivative: Vec6,
    pub time: f64,
}

/// One PID update. Trapezoidal integral, backward-difference derivative of the
/// error through a first-order lag; the first call has no derivative term.
pub fn pid_step(e: &PoseError, ctrl: &mut ControllerState, dt: f64, g: &Gains) -> Vec6 {
    let e = e.to_vector();
    let prev = ctrl.prev_error.unwrap_or(e);
    let raw = (e - prev) / dt;
    ctrl.derivative += (raw - ctrl.derivative) * (dt / (g.derivative_tau + dt));
    let deriv = ctrl.derivative;
    for k in 0..6 {
        if e[k].abs() < g.integral_window[k] {
            let next = ctrl.integral[k] + 0.5 * (e[k] + prev[k]) * dt;
            ctrl.integral[k] = next.clamp(-g.integral_clamp, g.integral_clamp);
        }
    }
    ctrl.prev_error = Some(e);
    ctrl.time += dt;
    g.kp.component_mul(&e) + g.ki.component_mul(&ctrl.integral) + g.kd.component_mul(&deriv)
}

/// `u_pid` with its linear and angular halves each scaled down, direction kept,
/// to the norm bounds of `g`.
pub fn limit_accel(u_pid: &Vec6, g: &Gains) -> Vec6 {
    let mut u = *u_pid;
    for (start, bound) in [(0, g.max_linear_accel), (3, g.max_angular_accel)] {
        let norm = u.fixed_rows::<3>(start).norm();
        if norm > bound {
            u.fixed_rows_mut::<3>(start).scale_mut(bound / norm);
        }
    }
    u
}

/// Compensation wrench plus the internal solution it was derived from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Compensation {
    /// `[force; moment]`, world frame.
    pub u_dc: Vec6,
    pub internal: InternalSolution,
}

/// Feedforward that cancels gravity, gyroscopic and arm reaction terms of the
/// platform balance, evaluated on the given (nominal) model.
///
/// The arm reaction depends on the platform acceleration, which in turn depends
/// on the command being computed. The loop is closed by evaluating the arm at
/// the acceleration the PID asks for (`desired`); with an exact model the
/// platform then realises exactly that acceleration.
pub fn dynamic_compensation(
    model: &SystemModel,
    pose: &Pose,
    twist: &Twist,
    joints: &JointMotion,
    desired: &Accel,
) -> Result<Compensation> {
    let frames = model.kinematics(pose, twist, joints)?;
    let sys = assemble(model, &frames, joints, &Wrench::default(), &Wrench::default());
    let internal = solve_with_platform_accel(&sys, desired)?;
    let pa = frames.platform();
    let ia = crate::dynamics::world_inertia(&pa.rot, &model.platform.inertia);
    let (f1, tau1) = (internal.force[0], internal.torque[0]);
    let r_out = frames.link(1).pos - pa.com;
    let force = f1 - model.platform.mass * model.gravity;
    let moment = pa.omega.cross(&(ia * pa.omega)) + tau1 + r_out.cross(&f1);
    Ok(Compensation { u_dc: Wrench::new(force, moment).to_vector(), internal })
}

/// `blockdiag(m_A I, I_A world) u_pid + u_dc`.
pub fn dc_pid(u_pid: &Vec6, u_dc: &Vec6, model: &SystemModel, pose: &Pose) -> Wrench {
    Wrench::from_vector(&(platform_mass_matrix(&model.platform, &pose.rot) * u_pid + u_dc))
}

/// `blockdiag(m_A I, I_A world) u_pid` plus the total weight along world +z.
pub fn plain_pid(u_pid: &Vec6, model: &SystemModel, pose: &Pose) -> Wrench {
    let mut w = Wrench::from_vector(&(platform_mass_matrix(&model.platform, &pose.rot) * u_pid));
    w.force += -model.total_mass() * model.gravity;
    w
}

/// Low-pass filtered finite-difference twist from successive measured poses.
#[derive(Debug, Clone, PartialEq)]
pub struct TwistEstimator {
    pub tau: f64,
    prev: Option<Pose>,
    estimate: Twist,
}

impl TwistEstimator {
    pub fn new(tau: f64) -> Self {
        Self { tau, prev: None, estimate: Twist::default() }
    }

    pub fn update(&mut self, pose: &Pose, dt: f64) -> Twist {
        if let Some(prev) = self.prev {
            let raw_w = log_so3(&(pose.rot * prev.rot.transpose())) / dt;
            let raw_v = (pose.pos - prev.pos) / dt;
            let a = dt / (self.tau + dt);
            self.estimate.omega += (raw_w - self.estimate.omega) * a;
            self.estimate.vel += (raw_v - self.estimate.vel) * a;
        }
        self.prev = Some(*pose);
        self.estimate
    }

    pub fn estimate(&self) -> Twist {
        self.estimate
    }
}

/// Everything the controller produced in one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Command {
    pub u_pid: Vec6,
    pub wrench: Wrench,
}

/// One controller instance: PID state, twist estimate, gains and mode.
#[derive(Debug, Clone)]
pub struct Controller {
    pub gains: Gains,
    pub mode: ControlMode,
    pub state: ControllerState,
    pub estimator: TwistEstimator,
}

impl Controller {
    pub fn new(gains: Gains, mode: ControlMode, velocity_tau: f64) -> Self {
        Self { gains, mode, state: ControllerState::default(), estimator: TwistEstimator::new(velocity_tau) }
    }

    /// Command from a measured pose only; `nominal` is the controller's model.
    /// The PID output is limited before the compensation is evaluated, so the
    /// arm reaction is computed for an acceleration the platform can follow.
    pub fn command(
        &mut self,
        nominal: &SystemModel,
        measured: &Pose,
        desired: &Pose,
        joints: &JointMotion,
        dt: f64,
    ) -> Result<Command> {
        let twist = self.estimator.update(measured, dt);
        let e = pose_error(measured, desired);
        let u_pid = limit_accel(&pid_step(&e, &mut self.state, dt, &self.gains), &self.gains);
        let wrench = match self.mode {
            ControlMode::DcPid => {
                let accel = Accel { acc: u_pid.fixed_rows::<3>(0).into(), omega_dot: u_pid.fixed_rows::<3>(3).into() };
                let comp = dynamic_compensation(nominal, measured, &twist, joints, &accel)?;
                dc_pid(&u_pid, &comp.u_dc, nominal, measured)
            }
            ControlMode::PlainPid => plain_pid(&u_pid, nominal, measured),
        };
        Ok(Command { u_pid, wrench })
    }
}
