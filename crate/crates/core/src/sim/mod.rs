//! Closed-loop fixed-step simulation.
//!
//! Each tick: measure the true pose with noise, run the controller on the
//! measurement and the nominal model, filter and saturate the command,
//! allocate rotor speeds, then advance the true plant with those speeds.
//! The controller path never reads the true state.

mod log;
pub mod metrics;
mod scenario;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use log::{LogRow, SimLog};
pub use metrics::{compute_metrics, AxisMetrics, Metrics};
pub use scenario::{Integrator, JointTrajectory, NoiseConfig, ScenarioConfig, Setpoint};

use crate::allocation::{allocate, body_wrench_limits, prioritize, wrench_from_speeds};
use crate::control::{Controller, Vec6};
use crate::dynamics::{assemble, solve_internal, InternalSolution, SystemModel, Wrench};
use crate::error::{Error, Result};
use crate::kinematics::{Accel, JointMotion, JointVec, Twist};
use crate::spatial::{euler_to_rot, exp_so3, orthonormalize, rot_to_euler, skew, EulerXyz, Pose, RotMat, Vec3};

/// RNG stream used for parameter perturbation; measurement noise uses the next one.
const MODEL_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn uniform(rng: &mut impl Rng, bound: f64) -> f64 {
    (2.0 * rng.random::<f64>() - 1.0) * bound
}

/// Copy of `nominal` with every mass, inertia diagonal, `k_f` and `k_tau`
/// scaled by an independent factor drawn uniformly from `[1 - pct, 1 + pct]`.
pub fn true_model(nominal: &SystemModel, uncertainty_pct: f64, seed: u64) -> Result<SystemModel> {
    if !(0.0..=0.5).contains(&uncertainty_pct) {
        return Err(Error::InvalidScenario(format!("uncertainty must be in [0, 0.5], got {uncertainty_pct}")));
    }
    let mut m = nominal.clone();
    if uncertainty_pct == 0.0 {
        return Ok(m);
    }
    let mut rng = rng_for(seed, MODEL_STREAM);
    let mut factor = || 1.0 + uniform(&mut rng, uncertainty_pct);
    for body in std::iter::once(&mut m.platform).chain(m.links.iter_mut()) {
        body.mass *= factor();
        for k in 0..3 {
            body.inertia[(k, k)] *= factor();
        }
    }
    m.rotors.k_f *= factor();
    m.rotors.k_tau *= factor();
    Ok(m)
}

/// True pose corrupted by uniform position noise and a small world-frame
/// rotation built from uniform Euler-angle noise.
pub fn measure(pose: &Pose, noise: &NoiseConfig, rng: &mut impl Rng) -> Pose {
    let dp = Vec3::new(uniform(rng, noise.pos_bound), uniform(rng, noise.pos_bound), uniform(rng, noise.pos_bound));
    let de = EulerXyz::new(uniform(rng, noise.ang_bound), uniform(rng, noise.ang_bound), uniform(rng, noise.ang_bound));
    Pose::new(euler_to_rot(de) * pose.rot, pose.pos + dp)
}

/// First-order lag on the world-frame command, then a clamp of the body-frame
/// wrench to the rotor envelope `limits`. The memory keeps the clamped value.
pub fn filter_and_saturate(u: &Wrench, mem: &mut Vec6, tau: f64, dt: f64, limits: &(Vec6, Vec6), rot: &RotMat) -> Wrench {
    let a = dt / (tau + dt);
    let y = *mem + (u.to_vector() - *mem) * a;
    let w = Wrench::from_vector(&y);
    let mut body = Wrench::new(rot.transpose() * w.force, rot.transpose() * w.moment).to_vector();
    for k in 0..6 {
        body[k] = body[k].clamp(limits.0[k], limits.1[k]);
    }
    let body = Wrench::from_vector(&body);
    let out = Wrench::new(rot * body.force, rot * body.moment);
    *mem = out.to_vector();
    out
}

/// True rigid-body state of the platform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    pub pose: Pose,
    pub twist: Twist,
    pub t: f64,
}

/// Accelerations of the plant at one instant, with the rotor speeds held.
fn plant_derivative(
    model: &SystemModel,
    pose: &Pose,
    twist: &Twist,
    joints: &JointMotion,
    omega_sq: &DVector<f64>,
    ext: &Wrench,
) -> Result<InternalSolution> {
    let u = wrench_from_speeds(omega_sq, &pose.rot, &model.rotors)?;
    let frames = model.kinematics(pose, twist, joints)?;
    solve_internal(&assemble(model, &frames, joints, &u, ext))
}

/// Advances the plant by `dt` with the rotor speeds held. Joints follow
/// `traj` from `q0`. Returns the new state and the internal solution at the
/// start of the step.
pub fn step(
    model: &SystemModel,
    state: &PlantState,
    omega_sq: &DVector<f64>,
    traj: &JointTrajectory,
    q0: &JointVec,
    dt: f64,
    integrator: Integrator,
) -> Result<(PlantState, InternalSolution)> {
    let ext = Wrench::default();
    let t = state.t;
    let at = |e: Error| e.at_time(t);
    let sol0 = plant_derivative(model, &state.pose, &state.twist, &traj.motion(q0, t), omega_sq, &ext).map_err(at)?;
    let next = match integrator {
        Integrator::SecondOrder => {
            let (a, wd) = (sol0.platform_acc, sol0.platform_omega_dot);
            let (p, v, w) = (state.pose.pos, state.twist.vel, state.twist.omega);
            let rot = orthonormalize(&(exp_so3(&((w + wd * (0.5 * dt)) * dt)) * state.pose.rot));
            PlantState {
                pose: Pose::new(rot, p + v * dt + a * (0.5 * dt * dt)),
                twist: Twist { omega: w + wd * dt, vel: v + a * dt },
                t: t + dt,
            }
        }
        Integrator::Rk4 => {
            // State derivative (v, R-dot, a, w-dot) evaluated at a perturbed state.
            let deriv = |tt: f64, pose: &Pose, tw: &Twist| -> Result<(Vec3, RotMat, Accel)> {
                let sol = plant_derivative(model, pose, tw, &traj.motion(q0, tt), omega_sq, &ext)?;
                Ok((tw.vel, skew(&tw.omega) * pose.rot, sol.platform_accel()))
            };
            let advance = |h: f64, d: &(Vec3, RotMat, Accel)| {
                let pose = Pose::new(state.pose.rot + d.1 * h, state.pose.pos + d.0 * h);
                let tw = Twist { omega: state.twist.omega + d.2.omega_dot * h, vel: state.twist.vel + d.2.acc * h };
                (pose, tw)
            };
            let k1 = (state.twist.vel, skew(&state.twist.omega) * state.pose.rot, sol0.platform_accel());
            let (p2, t2) = advance(0.5 * dt, &k1);
            let k2 = deriv(t + 0.5 * dt, &p2, &t2).map_err(at)?;
            let (p3, t3) = advance(0.5 * dt, &k2);
            let k3 = deriv(t + 0.5 * dt, &p3, &t3).map_err(at)?;
            let (p4, t4) = advance(dt, &k3);
            let k4 = deriv(t + dt, &p4, &t4).map_err(at)?;
            let c = dt / 6.0;
            PlantState {
                pose: Pose::new(
                    orthonormalize(&(state.pose.rot + (k1.1 + k2.1 * 2.0 + k3.1 * 2.0 + k4.1) * c)),
                    state.pose.pos + (k1.0 + k2.0 * 2.0 + k3.0 * 2.0 + k4.0) * c,
                ),
                twist: Twist {
                    omega: state.twist.omega
                        + (k1.2.omega_dot + k2.2.omega_dot * 2.0 + k3.2.omega_dot * 2.0 + k4.2.omega_dot) * c,
                    vel: state.twist.vel + (k1.2.acc + k2.2.acc * 2.0 + k3.2.acc * 2.0 + k4.2.acc) * c,
                },
                t: t + dt,
            }
        }
    };
    Ok((next, sol0))
}

/// Full closed-loop state.
#[derive(Debug, Clone)]
pub struct SimState {
    pub plant: PlantState,
    pub joints: JointMotion,
    pub controller: Controller,
    /// Filtered world-frame command `[force; moment]`, primed with the first command.
    pub filter_mem: Vec6,
    pub omega_sq: DVector<f64>,
}

/// A scenario in progress. [`Simulation::tick`] advances one step.
pub struct Simulation<'a> {
    cfg: &'a ScenarioConfig,
    nominal: &'a SystemModel,
    plant_model: SystemModel,
    limits: (Vec6, Vec6),
    rng: ChaCha8Rng,
    pub state: SimState,
    tick: usize,
}

impl<'a> Simulation<'a> {
    pub fn new(cfg: &'a ScenarioConfig, nominal: &'a SystemModel) -> Result<Self> {
        cfg.validate()?;
        nominal.validate()?;
        nominal.arm.check_limits(&cfg.initial_joints)?;
        let plant_model = true_model(nominal, cfg.uncertainty_pct, cfg.seed)?;
        let limits = body_wrench_limits(&nominal.rotors);
        let state = SimState {
            plant: PlantState { pose: cfg.initial_pose, twist: Twist::default(), t: 0.0 },
            joints: cfg.joint_trajectory.motion(&cfg.initial_joints, 0.0),
            controller: Controller::new(cfg.gains, cfg.mode, cfg.velocity_tau),
            filter_mem: Vec6::zeros(),
            omega_sq: DVector::zeros(nominal.rotors.len()),
        };
        Ok(Self { cfg, nominal, plant_model, limits, rng: rng_for(cfg.seed, NOISE_STREAM), state, tick: 0 })
    }

    /// The perturbed model driving the plant.
    pub fn plant_model(&self) -> &SystemModel {
        &self.plant_model
    }

    pub fn done(&self) -> bool {
        self.tick >= self.cfg.steps()
    }

    /// One control and integration step; returns the record of the state at the start of it.
    pub fn tick(&mut self) -> Result<LogRow> {
        let cfg = self.cfg;
        let t = self.tick as f64 * cfg.dt;
        let s = &mut self.state;
        s.plant.t = t;
        s.joints = cfg.joint_trajectory.motion(&cfg.initial_joints, t);

        let measured = measure(&s.plant.pose, &cfg.noise, &mut self.rng);
        let desired = cfg.desired_at(t);
        let cmd = s
            .controller
            .command(self.nominal, &measured, &desired, &s.joints, cfg.dt)
            .map_err(|e| e.at_time(t))?;
        if self.tick == 0 {
            s.filter_mem = cmd.wrench.to_vector();
        }
        let u_filt = filter_and_saturate(&cmd.wrench, &mut s.filter_mem, cfg.filter_tau, cfg.dt, &self.limits, &measured.rot);
        let feasible = prioritize(&u_filt, &measured.rot, &self.nominal.rotors);
        let alloc = allocate(&feasible, &measured.rot, &self.nominal.rotors);
        s.omega_sq = alloc.omega_sq.clone();

        let (next, sol) = step(
            &self.plant_model,
            &s.plant,
            &s.omega_sq,
            &cfg.joint_trajectory,
            &cfg.initial_joints,
            cfg.dt,
            cfg.integrator,
        )?;
        let row = LogRow {
            t,
            pose: s.plant.pose,
            euler_deg: rot_to_euler(&s.plant.pose.rot).angles.to_degrees(),
            measured,
            measured_euler_deg: rot_to_euler(&measured.rot).angles.to_degrees(),
            u: cmd.wrench.to_vector(),
            u_filt: u_filt.to_vector(),
            omega_sq: alloc.omega_sq.iter().copied().collect(),
            residual: u_filt.to_vector() - feasible.to_vector() + alloc.residual,
            f1: sol.force[0],
            tau1: sol.torque[0],
        };
        s.plant = next;
        self.tick += 1;
        Ok(row)
    }
}

/// Runs a scenario to completion against the nominal model.
pub fn run_scenario(cfg: &ScenarioConfig, nominal: &SystemModel) -> Result<SimLog> {
    let mut sim = Simulation::new(cfg, nominal)?;
    let mut log = SimLog::new(nominal.rotors.len());
    while !sim.done() {
        log.rows.push(sim.tick()?);
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{energy, linear_momentum, tests::model};
    use crate::kinematics::FRAME_COUNT;
    use approx::assert_relative_eq;

    const P1_JOINTS: JointVec = [-std::f64::consts::FRAC_PI_2, -std::f64::consts::FRAC_PI_2, 0.0, 0.0];

    fn drift(m: &SystemModel, state0: PlantState, dt: f64, steps: usize, integ: Integrator, q0: &JointVec) -> (f64, f64) {
        let zero = DVector::zeros(m.rotors.len());
        let traj = JointTrajectory::Fixed;
        let e = |s: &PlantState| {
            let (k, p) = energy(m, &m.kinematics(&s.pose, &s.twist, &JointMotion::locked(*q0)).unwrap());
            k + p
        };
        let e0 = e(&state0);
        let mut s = state0;
        let mut worst = 0.0f64;
        let mut wrench = 0.0f64;
        for _ in 0..steps {
            let (n, sol) = step(m, &s, &zero, &traj, q0, dt, integ).unwrap();
            s = n;
            worst = worst.max((e(&s) - e0).abs() / e0.abs());
            wrench = wrench.max(sol.max_internal_wrench());
        }
        (worst, wrench)
    }

    #[test]
    fn free_fall_parabola() {
        let m = model();
        let mut s = PlantState { pose: Pose::identity(), twist: Twist::default(), t: 0.0 };
        let zero = DVector::zeros(6);
        for _ in 0..1000 {
            s = step(&m, &s, &zero, &JointTrajectory::Fixed, &P1_JOINTS, 1e-3, Integrator::SecondOrder).unwrap().0;
        }
        assert!((s.pose.pos.z + 0.5 * 9.81).abs() < 1e-4);
    }

    #[test]
    fn free_fall_energy_and_wrenches() {
        let m = model();
        let s0 = PlantState {
            pose: Pose::new(euler_to_rot(EulerXyz::new(0.2, -0.1, 0.4)), Vec3::new(9.0, 9.0, 9.0)),
            twist: Twist { omega: Vec3::zeros(), vel: Vec3::new(0.5, -0.2, 1.0) },
            t: 0.0,
        };
        let (d, w) = drift(&m, s0, 1e-3, 2000, Integrator::SecondOrder, &P1_JOINTS);
        assert!(d < 1e-5, "energy drift {d}");
        assert!(w < 1e-9, "internal wrench {w}");
    }

    #[test]
    fn tumbling_energy_and_momentum_conserved() {
        let mut m = model();
        m.gravity = Vec3::zeros();
        let q0 = [0.4, -0.8, 0.6, 0.2];
        let s0 = PlantState {
            pose: Pose::new(euler_to_rot(EulerXyz::new(0.2, -0.1, 0.4)), Vec3::zeros()),
            twist: Twist { omega: Vec3::new(0.8, -1.2, 2.0), vel: Vec3::new(0.1, 0.2, -0.3) },
            t: 0.0,
        };
        let (d, _) = drift(&m, s0, 1e-3, 2000, Integrator::Rk4, &q0);
        assert!(d < 1e-5, "energy drift {d}");

        let zero = DVector::zeros(6);
        let p = |s: &PlantState| linear_momentum(&m, &m.kinematics(&s.pose, &s.twist, &JointMotion::locked(q0)).unwrap());
        let p0 = p(&s0);
        let mut s = s0;
        for _ in 0..1000 {
            s = step(&m, &s, &zero, &JointTrajectory::Fixed, &q0, 1e-3, Integrator::Rk4).unwrap().0;
            assert!((p(&s) - p0).amax() < 1e-8);
        }
    }

    #[test]
    fn prescribed_joint_motion_power_balance() {
        // Servos do work on the system: the energy change equals the integral of
        // joint torque times joint rate.
        let mut m = model();
        m.gravity = Vec3::zeros();
        let q0 = [0.4, -0.8, 0.6, 0.2];
        let traj = JointTrajectory::SinRate { joint: 3, amplitude: 0.8, frequency: 2.0 };
        let zero = DVector::zeros(6);
        let dt = 1e-3;
        let mut s = PlantState { pose: Pose::identity(), twist: Twist::default(), t: 0.0 };
        let energy_at = |s: &PlantState| {
            let fs = m.kinematics(&s.pose, &s.twist, &traj.motion(&q0, s.t)).unwrap();
            let (k, p) = energy(&m, &fs);
            k + p
        };
        let power = |s: &PlantState| {
            let jm = traj.motion(&q0, s.t);
            let fs = m.kinematics(&s.pose, &s.twist, &jm).unwrap();
            let sol = plant_derivative(&m, &s.pose, &s.twist, &jm, &zero, &Wrench::default()).unwrap();
            (1..FRAME_COUNT - 1).map(|i| fs.link(i).axis().dot(&sol.torque[i - 1]) * jm.qd[i - 1]).sum::<f64>()
        };
        let e0 = energy_at(&s);
        let mut work = 0.0;
        let mut scale = 0.0f64;
        for _ in 0..2000 {
            let p_a = power(&s);
            s = step(&m, &s, &zero, &traj, &q0, dt, Integrator::Rk4).unwrap().0;
            work += 0.5 * dt * (p_a + power(&s));
            scale = scale.max(energy_at(&s).abs());
        }
        let mismatch = (energy_at(&s) - e0 - work).abs();
        assert!(mismatch < 1e-4 * scale, "mismatch {mismatch} vs scale {scale}");
    }

    #[test]
    fn hover_is_a_fixed_point() {
        let m = model();
        let pose = Pose::new(RotMat::identity(), Vec3::new(9.0, 9.0, 9.0));
        let fs = m.kinematics(&pose, &Twist::default(), &JointMotion::locked(P1_JOINTS)).unwrap();
        let arm_moment: Vec3 = (1..FRAME_COUNT).map(|i| (fs.link(i).com - pose.pos).cross(&(m.links[i - 1].mass * m.gravity))).sum();
        let need = Wrench::new(-m.total_mass() * m.gravity, -arm_moment);
        let alloc = allocate(&need, &pose.rot, &m.rotors);
        assert!(alloc.residual.amax() < 1e-9);
        let s0 = PlantState { pose, twist: Twist::default(), t: 0.0 };
        let (s1, _) = step(&m, &s0, &alloc.omega_sq, &JointTrajectory::Fixed, &P1_JOINTS, 0.002, Integrator::SecondOrder).unwrap();
        assert!((s1.pose.pos - s0.pose.pos).amax() < 1e-9);
        assert!((s1.pose.rot - s0.pose.rot).amax() < 1e-9);
        assert!(s1.twist.vel.amax() < 1e-9 && s1.twist.omega.amax() < 1e-9);
    }

    #[test]
    fn true_model_bounds_and_determinism() {
        let m = model();
        assert_eq!(true_model(&m, 0.0, 3).unwrap(), m);
        let a = true_model(&m, 0.1, 3).unwrap();
        assert_eq!(a, true_model(&m, 0.1, 3).unwrap());
        assert_ne!(a, true_model(&m, 0.1, 4).unwrap());
        let within = |x: f64, n: f64| (x / n - 1.0).abs() <= 0.1;
        assert!(within(a.platform.mass, m.platform.mass));
        for (l, n) in a.links.iter().zip(&m.links) {
            assert!(within(l.mass, n.mass));
            for k in 0..3 {
                assert!(within(l.inertia[(k, k)], n.inertia[(k, k)]));
            }
        }
        assert!(within(a.rotors.k_f, m.rotors.k_f) && within(a.rotors.k_tau, m.rotors.k_tau));
        assert!(true_model(&m, 0.6, 0).is_err());
    }

    #[test]
    fn measurement_noise_statistics() {
        let noise = NoiseConfig { pos_bound: 0.025, ang_bound: 3f64.to_radians() };
        let pose = Pose::new(euler_to_rot(EulerXyz::new(0.1, 0.2, 0.3)), Vec3::new(9.0, 9.0, 9.0));
        assert_eq!(measure(&pose, &NoiseConfig::default(), &mut rng_for(1, NOISE_STREAM)), pose);
        let mut rng = rng_for(7, NOISE_STREAM);
        let n = 100_000;
        let mut sum = Vec3::zeros();
        let mut max = 0.0f64;
        for _ in 0..n {
            let d = measure(&pose, &noise, &mut rng).pos - pose.pos;
            sum += d;
            max = max.max(d.amax());
        }
        assert!(max <= 0.025);
        let sigma_mean = 0.025 / 3f64.sqrt() / (n as f64).sqrt();
        assert!((sum / n as f64).amax() < 3.0 * sigma_mean);
    }

    #[test]
    fn filter_step_response_and_clamp() {
        let limits = (Vec6::repeat(-100.0), Vec6::repeat(100.0));
        let (tau, dt) = (0.04, 1e-4);
        let mut mem = Vec6::zeros();
        let u = Wrench::new(Vec3::new(1.0, 0.0, 0.0), Vec3::zeros());
        let mut t = 0.0;
        while t < tau - 1e-12 {
            filter_and_saturate(&u, &mut mem, tau, dt, &limits, &RotMat::identity());
            t += dt;
        }
        assert_relative_eq!(mem[0], 1.0 - (-1.0f64).exp(), epsilon = 2e-3);

        let mut mem = Vec6::zeros();
        let out = filter_and_saturate(&Wrench::new(Vec3::new(500.0, -3.0, 0.0), Vec3::zeros()), &mut mem, 0.0, 0.002, &limits, &RotMat::identity());
        assert_eq!(out.force, Vec3::new(100.0, -3.0, 0.0));
    }
}
