//! Forward kinematics of the platform-arm chain and the velocity and
//! acceleration recursions.
//!
//! Frames use the Craig (modified DH) convention: the transform from frame
//! `i-1` to frame `i` is `Rx(alpha) Tx(a) Rz(theta) Tz(d)`. The position of
//! frame `i` in frame `i-1` is therefore independent of `theta`, and joint `i`
//! rotates about the z axis of frame `i`.
//!
//! Frame index 0 is the platform frame `{A}`, whose origin is the platform
//! centre of mass. Frames 1..=5 belong to the arm links; frame 5 is the end
//! effector and never moves relative to frame 4's joint.

use crate::error::{Error, Result};
use crate::spatial::{rot_x, rot_z, Pose, RotMat, Vec3};

/// Number of actuated arm joints.
pub const ARM_JOINTS: usize = 4;
/// Number of arm links, including the fixed end-effector link.
pub const ARM_LINKS: usize = 5;
/// Platform plus links.
pub const FRAME_COUNT: usize = ARM_LINKS + 1;

pub type JointVec = [f64; ARM_JOINTS];

/// One row of the Craig parameter table.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CraigRow {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    /// Constant part of the joint angle.
    pub theta_offset: f64,
}

impl CraigRow {
    pub fn new(a: f64, alpha: f64, d: f64, theta_offset: f64) -> Self {
        Self { a, alpha, d, theta_offset }
    }

    /// Origin of this frame expressed in the parent frame. Constant in theta.
    pub fn parent_offset(&self) -> Vec3 {
        let (s, c) = self.alpha.sin_cos();
        Vec3::new(self.a, -s * self.d, c * self.d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmModel {
    pub rows: [CraigRow; ARM_LINKS],
    /// Fixed translation from the platform origin to the root of row 1, in `{A}`.
    pub mount_offset: Vec3,
    /// Inclusive `(lo, hi)` limits per actuated joint, rad.
    pub joint_limits: [(f64, f64); ARM_JOINTS],
}

impl ArmModel {
    /// The standard five-row table parameterised by the four link lengths.
    pub fn from_lengths(l: [f64; 4], mount_offset: Vec3, limit: f64) -> Self {
        use std::f64::consts::FRAC_PI_2;
        Self {
            rows: [
                CraigRow::new(0.0, 0.0, 0.0, 0.0),
                CraigRow::new(l[0], 0.0, 0.0, 0.0),
                CraigRow::new(l[1], -FRAC_PI_2, 0.0, 0.0),
                CraigRow::new(0.0, -FRAC_PI_2, l[2], 0.0),
                CraigRow::new(0.0, 0.0, l[3], 0.0),
            ],
            mount_offset,
            joint_limits: [(-limit, limit); ARM_JOINTS],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            let vals = [row.a, row.alpha, row.d, row.theta_offset];
            if vals.iter().any(|v| !v.is_finite()) || row.a < 0.0 {
                return Err(Error::InvalidModel(format!("arm row {} has invalid parameters {vals:?}", i + 1)));
            }
        }
        for (j, &(lo, hi)) in self.joint_limits.iter().enumerate() {
            if !(lo <= hi) {
                return Err(Error::InvalidModel(format!("joint {} limits [{lo}, {hi}] are empty", j + 1)));
            }
        }
        if self.mount_offset.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("mount offset is not finite".into()));
        }
        Ok(())
    }

    pub fn check_limits(&self, q: &JointVec) -> Result<()> {
        for (j, (&angle, &(lo, hi))) in q.iter().zip(&self.joint_limits).enumerate() {
            if !(lo..=hi).contains(&angle) {
                return Err(Error::JointLimit { joint: j + 1, angle, lo, hi });
            }
        }
        Ok(())
    }
}

/// Joint angle of frame `i` (1-based) for the given actuated joints; frame 5 is fixed.
fn link_angle(q: &JointVec, link: usize) -> f64 {
    if link <= ARM_JOINTS {
        q[link - 1]
    } else {
        0.0
    }
}

/// Homogeneous transform of one Craig row: `Rx(alpha) Tx(a) Rz(theta) Tz(d)`.
pub fn craig_transform(row: &CraigRow, theta: f64) -> Pose {
    Pose::new(rot_x(row.alpha) * rot_z(row.theta_offset + theta), row.parent_offset())
}

/// Platform velocity: world angular velocity and world velocity of the `{A}` origin.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Twist {
    pub omega: Vec3,
    pub vel: Vec3,
}

/// Platform acceleration, world frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Accel {
    pub omega_dot: Vec3,
    pub acc: Vec3,
}

/// Prescribed joint angles, rates and accelerations.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointMotion {
    pub q: JointVec,
    pub qd: JointVec,
    pub qdd: JointVec,
}

impl JointMotion {
    pub fn locked(q: JointVec) -> Self {
        Self { q, ..Default::default() }
    }
}

/// Kinematic quantities of one body frame, all in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub rot: RotMat,
    pub pos: Vec3,
    /// Centre of mass.
    pub com: Vec3,
    /// `pos - parent.pos`; zero for the platform.
    pub parent_offset: Vec3,
    /// `com - pos`.
    pub com_offset: Vec3,
    pub omega: Vec3,
    pub vel: Vec3,
    pub com_vel: Vec3,
    pub omega_dot: Vec3,
    pub acc: Vec3,
    pub com_acc: Vec3,
}

impl Frame {
    fn at(rot: RotMat, pos: Vec3, parent_offset: Vec3, local_com: &Vec3) -> Self {
        let com_offset = rot * local_com;
        let z = Vec3::zeros();
        Self {
            rot,
            pos,
            com: pos + com_offset,
            parent_offset,
            com_offset,
            omega: z,
            vel: z,
            com_vel: z,
            omega_dot: z,
            acc: z,
            com_acc: z,
        }
    }

    /// World joint axis (z of this frame).
    pub fn axis(&self) -> Vec3 {
        self.rot.column(2).into_owned()
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.rot, self.pos)
    }
}

/// Frames `{A}, 1..=5`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSet {
    pub frames: [Frame; FRAME_COUNT],
}

impl FrameSet {
    pub fn platform(&self) -> &Frame {
        &self.frames[0]
    }

    /// Link `i` in `1..=5`.
    pub fn link(&self, i: usize) -> &Frame {
        &self.frames[i]
    }

    pub fn end_effector(&self) -> &Frame {
        &self.frames[ARM_LINKS]
    }
}

/// Poses of every frame. `link_coms[i]` is the centre of mass of link `i+1` in
/// its own frame. Velocities and accelerations are left at zero.
pub fn forward_kinematics(
    arm: &ArmModel,
    link_coms: &[Vec3; ARM_LINKS],
    platform: &Pose,
    q: &JointVec,
) -> Result<FrameSet> {
    arm.check_limits(q)?;
    let base = Frame::at(platform.rot, platform.pos, Vec3::zeros(), &Vec3::zeros());
    let mut frames = [base; FRAME_COUNT];
    for i in 1..FRAME_COUNT {
        let row = &arm.rows[i - 1];
        let parent = frames[i - 1];
        let mut local = craig_transform(row, link_angle(q, i));
        if i == 1 {
            local.pos += arm.mount_offset;
        }
        let world = parent.pose().compose(&local);
        frames[i] = Frame::at(world.rot, world.pos, world.pos - parent.pos, &link_coms[i - 1]);
    }
    Ok(FrameSet { frames })
}

/// Fills angular and linear velocities by propagating the platform twist down the chain.
pub fn velocity_recursion(mut fs: FrameSet, platform: &Twist, qd: &JointVec) -> FrameSet {
    let f = &mut fs.frames;
    f[0].omega = platform.omega;
    f[0].vel = platform.vel;
    f[0].com_vel = platform.vel;
    for i in 1..FRAME_COUNT {
        let (prev, cur) = (f[i - 1], &mut f[i]);
        cur.omega = prev.omega + cur.axis() * link_angle(qd, i);
        cur.vel = prev.vel + prev.omega.cross(&cur.parent_offset);
        cur.com_vel = cur.vel + cur.omega.cross(&cur.com_offset);
    }
    fs
}

/// Fills angular and linear accelerations. Requires velocities to be filled.
pub fn acceleration_recursion(mut fs: FrameSet, platform: &Accel, qd: &JointVec, qdd: &JointVec) -> FrameSet {
    let f = &mut fs.frames;
    f[0].omega_dot = platform.omega_dot;
    f[0].acc = platform.acc;
    f[0].com_acc = platform.acc;
    for i in 1..FRAME_COUNT {
        let (prev, cur) = (f[i - 1], &mut f[i]);
        let z = cur.axis();
        let r = cur.parent_offset;
        cur.omega_dot = prev.omega_dot + cur.omega.cross(&(z * link_angle(qd, i))) + z * link_angle(qdd, i);
        cur.acc = prev.acc + prev.omega_dot.cross(&r) + prev.omega.cross(&prev.omega.cross(&r));
        let rc = cur.com_offset;
        cur.com_acc = cur.acc + cur.omega_dot.cross(&rc) + cur.omega.cross(&cur.omega.cross(&rc));
    }
    fs
}

/// Poses, velocities and accelerations in one call.
pub fn full_kinematics(
    arm: &ArmModel,
    link_coms: &[Vec3; ARM_LINKS],
    platform: &Pose,
    twist: &Twist,
    accel: &Accel,
    joints: &JointMotion,
) -> Result<FrameSet> {
    let fs = forward_kinematics(arm, link_coms, platform, &joints.q)?;
    let fs = velocity_recursion(fs, twist, &joints.qd);
    Ok(acceleration_recursion(fs, accel, &joints.qd, &joints.qdd))
}
