//! TOML model and scenario files.
//!
//! Angles in files are degrees; everything is converted to radians on load.
//! Unknown keys are rejected, and parse errors carry the file path plus the
//! line and column reported by the TOML parser.

use std::path::Path;

use serde::Deserialize;

use crate::allocation::{Rotor, RotorConfig};
use crate::control::{ControlMode, Vec6};
use crate::dynamics::{BodyParams, SystemModel};
use crate::error::{Error, Result};
use crate::kinematics::{ArmModel, CraigRow, ARM_JOINTS, ARM_LINKS};
use crate::sim::{Integrator, JointTrajectory, NoiseConfig, ScenarioConfig, Setpoint};
use crate::spatial::{EulerXyz, Mat3, Pose, Vec3};

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn parse<T: serde::de::DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.to_string() })
}

fn invalid(path: &Path, message: String) -> Error {
    Error::Parse { path: path.to_path_buf(), message }
}

/// Either the three diagonal entries or a full symmetric 3x3 matrix.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum InertiaFile {
    Diagonal([f64; 3]),
    Full([[f64; 3]; 3]),
}

impl InertiaFile {
    fn to_matrix(&self) -> Mat3 {
        match self {
            InertiaFile::Diagonal(d) => Mat3::from_diagonal(&Vec3::from(*d)),
            InertiaFile::Full(rows) => Mat3::from_fn(|i, j| rows[i][j]),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BodyFile {
    mass: f64,
    inertia: InertiaFile,
    #[serde(default)]
    com: [f64; 3],
}

impl BodyFile {
    fn to_params(&self) -> BodyParams {
        BodyParams::new(self.mass, self.inertia.to_matrix(), Vec3::from(self.com))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlatformFile {
    mass: f64,
    inertia: InertiaFile,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RowFile {
    a: f64,
    alpha_deg: f64,
    d: f64,
    #[serde(default)]
    theta_offset_deg: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArmFile {
    mount_offset: [f64; 3],
    joint_limits_deg: Vec<[f64; 2]>,
    rows: Vec<RowFile>,
}

/// A rotor given either by `azimuth_deg`/`radius`/`tilt_deg` on the platform
/// circle, or by explicit `position`/`direction`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RotorFile {
    spin: i8,
    azimuth_deg: Option<f64>,
    radius: Option<f64>,
    tilt_deg: Option<f64>,
    position: Option<[f64; 3]>,
    direction: Option<[f64; 3]>,
}

impl RotorFile {
    fn to_rotor(&self, index: usize, path: &Path) -> Result<Rotor> {
        let spin = f64::from(self.spin);
        let ring = (self.azimuth_deg, self.radius, self.tilt_deg);
        let explicit = (self.position, self.direction);
        match (ring, explicit) {
            ((Some(az), Some(r), Some(tilt)), (None, None)) => {
                let (az, tilt) = (az.to_radians(), tilt.to_radians());
                let tangent = Vec3::new(-az.sin(), az.cos(), 0.0);
                let dir = Vec3::z() * tilt.cos() + tangent * tilt.sin();
                Ok(Rotor { dir, pos: Vec3::new(az.cos(), az.sin(), 0.0) * r, spin })
            }
            ((None, None, None), (Some(p), Some(d))) => {
                let d = Vec3::from(d);
                if d.norm() == 0.0 {
                    return Err(invalid(path, format!("rotor {}: direction is zero", index + 1)));
                }
                Ok(Rotor { dir: d.normalize(), pos: Vec3::from(p), spin })
            }
            _ => Err(invalid(
                path,
                format!(
                    "rotor {}: give either azimuth_deg, radius and tilt_deg, or position and direction",
                    index + 1
                ),
            )),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RotorsFile {
    k_f: f64,
    k_tau: f64,
    omega_max: f64,
    #[serde(default)]
    rotor: Vec<RotorFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    gravity: [f64; 3],
    platform: PlatformFile,
    arm: ArmFile,
    links: Vec<BodyFile>,
    rotors: RotorsFile,
}

/// Parses a model from TOML text; `path` is only used in diagnostics.
pub fn parse_model(text: &str, path: &Path) -> Result<SystemModel> {
    let f: ModelFile = parse(text, path)?;
    if f.arm.rows.len() != ARM_LINKS {
        return Err(invalid(path, format!("arm.rows: expected {ARM_LINKS} rows, got {}", f.arm.rows.len())));
    }
    if f.arm.joint_limits_deg.len() != ARM_JOINTS {
        return Err(invalid(path, format!("arm.joint_limits_deg: expected {ARM_JOINTS} entries, got {}", f.arm.joint_limits_deg.len())));
    }
    if f.links.len() != ARM_LINKS {
        return Err(invalid(path, format!("links: expected {ARM_LINKS} entries, got {}", f.links.len())));
    }
    let rows = std::array::from_fn(|i| {
        let r = &f.arm.rows[i];
        CraigRow::new(r.a, r.alpha_deg.to_radians(), r.d, r.theta_offset_deg.to_radians())
    });
    let joint_limits = std::array::from_fn(|j| {
        let [lo, hi] = f.arm.joint_limits_deg[j];
        (lo.to_radians(), hi.to_radians())
    });
    let rotors = f.rotors.rotor.iter().enumerate().map(|(i, r)| r.to_rotor(i, path)).collect::<Result<Vec<_>>>()?;
    let model = SystemModel {
        platform: BodyParams::new(f.platform.mass, f.platform.inertia.to_matrix(), Vec3::zeros()),
        links: std::array::from_fn(|i| f.links[i].to_params()),
        arm: ArmModel { rows, mount_offset: Vec3::from(f.arm.mount_offset), joint_limits },
        rotors: RotorConfig { rotors, k_f: f.rotors.k_f, k_tau: f.rotors.k_tau, omega_max: f.rotors.omega_max },
        gravity: Vec3::from(f.gravity),
    };
    model.validate().map_err(|e| invalid(path, e.to_string()))?;
    Ok(model)
}

pub fn load_model(path: &Path) -> Result<SystemModel> {
    parse_model(&read(path)?, path)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseFile {
    position: [f64; 3],
    euler_deg: [f64; 3],
}

impl PoseFile {
    fn to_pose(&self) -> Pose {
        Pose::from_euler(Vec3::from(self.position), EulerXyz::from_degrees(self.euler_deg))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialFile {
    position: [f64; 3],
    euler_deg: [f64; 3],
    joints_deg: [f64; ARM_JOINTS],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SetpointFile {
    t: f64,
    position: [f64; 3],
    euler_deg: [f64; 3],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
enum TrajectoryFile {
    Fixed,
    /// `qd = amplitude * sin(frequency * t)`, amplitude in rad/s, frequency in rad/s.
    SinRate { joint: usize, amplitude: f64, frequency: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseFile {
    position: f64,
    angle_deg: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ControllerFile {
    mode: Option<String>,
    kp: Option<[f64; 6]>,
    ki: Option<[f64; 6]>,
    kd: Option<[f64; 6]>,
    integral_clamp: Option<f64>,
    /// Position window in m, attitude window in degrees.
    integral_window: Option<[f64; 2]>,
    velocity_tau: Option<f64>,
    derivative_tau: Option<f64>,
    max_linear_accel: Option<f64>,
    /// Degrees per second squared.
    max_angular_accel: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: Option<String>,
    seed: u64,
    dt: f64,
    duration: f64,
    #[serde(default)]
    uncertainty_pct: f64,
    filter_tau: Option<f64>,
    integrator: Option<String>,
    initial: InitialFile,
    #[serde(default)]
    setpoints: Vec<SetpointFile>,
    hold: Option<PoseFile>,
    joint_trajectory: Option<TrajectoryFile>,
    noise: Option<NoiseFile>,
    controller: Option<ControllerFile>,
}

/// Parses a scenario; `path` supplies the default name (file stem) and diagnostics.
pub fn parse_scenario(text: &str, path: &Path) -> Result<ScenarioConfig> {
    let f: ScenarioFile = parse(text, path)?;
    let name = f
        .name
        .clone()
        .unwrap_or_else(|| path.file_stem().map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned()));
    let initial_pose = Pose::from_euler(Vec3::from(f.initial.position), EulerXyz::from_degrees(f.initial.euler_deg));
    let mut cfg = ScenarioConfig::hover(&name, initial_pose, f.initial.joints_deg.map(f64::to_radians), f.duration);
    cfg.seed = f.seed;
    cfg.dt = f.dt;
    cfg.uncertainty_pct = f.uncertainty_pct;
    if let Some(tau) = f.filter_tau {
        cfg.filter_tau = tau;
    }
    if let Some(integ) = &f.integrator {
        cfg.integrator = match integ.as_str() {
            "second_order" => Integrator::SecondOrder,
            "rk4" => Integrator::Rk4,
            other => return Err(invalid(path, format!("integrator: unknown value `{other}`"))),
        };
    }
    if f.hold.is_some() && !f.setpoints.is_empty() {
        return Err(invalid(path, "give either `hold` or `setpoints`, not both".into()));
    }
    cfg.setpoints = match &f.hold {
        Some(h) => vec![Setpoint { t: 0.0, pose: h.to_pose() }],
        None if f.setpoints.is_empty() => vec![Setpoint { t: 0.0, pose: initial_pose }],
        None => f
            .setpoints
            .iter()
            .map(|s| Setpoint { t: s.t, pose: Pose::from_euler(Vec3::from(s.position), EulerXyz::from_degrees(s.euler_deg)) })
            .collect(),
    };
    cfg.joint_trajectory = match f.joint_trajectory {
        None | Some(TrajectoryFile::Fixed) => JointTrajectory::Fixed,
        Some(TrajectoryFile::SinRate { joint, amplitude, frequency }) => JointTrajectory::SinRate { joint, amplitude, frequency },
    };
    if let Some(n) = &f.noise {
        cfg.noise = NoiseConfig { pos_bound: n.position, ang_bound: n.angle_deg.to_radians() };
    }
    if let Some(c) = &f.controller {
        if let Some(mode) = &c.mode {
            cfg.mode = mode.parse::<ControlMode>().map_err(|m| invalid(path, format!("controller.mode: {m}")))?;
        }
        let g = &mut cfg.gains;
        if let Some(v) = c.kp {
            g.kp = Vec6::from(v);
        }
        if let Some(v) = c.ki {
            g.ki = Vec6::from(v);
        }
        if let Some(v) = c.kd {
            g.kd = Vec6::from(v);
        }
        if let Some(v) = c.integral_clamp {
            g.integral_clamp = v;
        }
        if let Some([p, a]) = c.integral_window {
            let a = a.to_radians();
            g.integral_window = Vec6::new(p, p, p, a, a, a);
        }
        if let Some(v) = c.derivative_tau {
            g.derivative_tau = v;
        }
        if let Some(v) = c.max_linear_accel {
            g.max_linear_accel = v;
        }
        if let Some(v) = c.max_angular_accel {
            g.max_angular_accel = v.to_radians();
        }
        if let Some(v) = c.velocity_tau {
            cfg.velocity_tau = v;
        }
    }
    cfg.validate().map_err(|e| invalid(path, e.to_string()))?;
    Ok(cfg)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    parse_scenario(&read(path)?, path)
}
