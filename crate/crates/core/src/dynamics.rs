//! Coupled platform and arm dynamics as one dense linear system.
//!
//! The unknown vector stacks, in order: platform angular and linear
//! acceleration, the five joint forces, the five joint torques, then the five
//! link angular accelerations, frame-origin accelerations and centre-of-mass
//! accelerations. All quantities are in world coordinates.
//!
//! `f_i, tau_i` is the wrench body `i-1` exerts on link `i` at the origin of
//! frame `i`. Link 5 additionally exerts the external wrench `f_6, tau_6` on
//! its environment at the frame-5 origin. The platform frame origin is taken to
//! be the platform centre of mass, so gravity produces no platform moment.
//!
//! Block rows, per body:
//!
//! * platform: rotational balance, translational balance;
//! * link `i`: rotational balance, translational balance, angular
//!   acceleration recursion, origin acceleration recursion and COM
//!   acceleration recursion.
//!
//! Balances are written as "applied wrench minus inertial wrench", so a joint
//! force enters its child's translational row with `+1` and its parent's with
//! `-1`.

use nalgebra::{DMatrix, DVector, Matrix6, Vector6};

use crate::allocation::RotorConfig;
use crate::error::{Error, Result};
use crate::kinematics::{
    forward_kinematics, velocity_recursion, Accel, ArmModel, FrameSet, JointMotion, Twist, ARM_LINKS, FRAME_COUNT,
};
use crate::spatial::{skew, Mat3, Pose, RotMat, Vec3};

/// Size of the unknown vector.
pub const DIM: usize = 6 + 15 * ARM_LINKS;
/// Condition estimate above which a solve is refused.
pub const MAX_CONDITION: f64 = 1e12;

/// Column placement of each unknown block. Link indices are 1-based.
pub mod layout {
    use super::ARM_LINKS;

    pub const PLATFORM_OMEGA_DOT: usize = 0;
    pub const PLATFORM_ACC: usize = 3;

    pub const fn force(i: usize) -> usize {
        6 + 3 * (i - 1)
    }
    pub const fn torque(i: usize) -> usize {
        6 + 3 * ARM_LINKS + 3 * (i - 1)
    }
    pub const fn omega_dot(i: usize) -> usize {
        6 + 6 * ARM_LINKS + 3 * (i - 1)
    }
    pub const fn acc(i: usize) -> usize {
        6 + 9 * ARM_LINKS + 3 * (i - 1)
    }
    pub const fn com_acc(i: usize) -> usize {
        6 + 12 * ARM_LINKS + 3 * (i - 1)
    }

    /// Row of the platform rotational and translational balances.
    pub const PLATFORM_ROT_ROW: usize = 0;
    pub const PLATFORM_TRANS_ROW: usize = 3;

    /// First of the five 3-row blocks belonging to link `i`.
    pub const fn link_rows(i: usize) -> usize {
        6 + 15 * (i - 1)
    }
}

/// Inertial parameters of one rigid body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyParams {
    pub mass: f64,
    /// About the centre of mass, in the body frame.
    pub inertia: Mat3,
    /// Centre of mass in the body frame.
    pub com_offset: Vec3,
}

impl BodyParams {
    pub fn new(mass: f64, inertia: Mat3, com_offset: Vec3) -> Self {
        Self { mass, inertia, com_offset }
    }

    /// Uniform slender rod of length `len` along body axis `axis`, COM at mid-length.
    pub fn rod(mass: f64, len: f64, axis: usize, transverse_radius: f64) -> Self {
        let along = 0.5 * mass * transverse_radius * transverse_radius;
        let across = mass * (3.0 * transverse_radius * transverse_radius + len * len) / 12.0;
        let mut diag = Vec3::repeat(across);
        diag[axis] = along;
        let mut com = Vec3::zeros();
        com[axis] = 0.5 * len;
        Self::new(mass, Mat3::from_diagonal(&diag), com)
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::InvalidModel(format!("{name}: mass must be positive, got {}", self.mass)));
        }
        if (self.inertia - self.inertia.transpose()).amax() > 1e-12 * self.inertia.amax().max(1.0) {
            return Err(Error::InvalidModel(format!("{name}: inertia is not symmetric")));
        }
        if self.inertia.cholesky().is_none() {
            return Err(Error::InvalidModel(format!("{name}: inertia is not positive definite")));
        }
        if self.com_offset.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel(format!("{name}: COM offset is not finite")));
        }
        Ok(())
    }
}

/// Force and moment pair, world frame unless stated otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Wrench {
    pub force: Vec3,
    pub moment: Vec3,
}

impl Wrench {
    pub fn new(force: Vec3, moment: Vec3) -> Self {
        Self { force, moment }
    }

    /// `[force; moment]`.
    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(self.force.x, self.force.y, self.force.z, self.moment.x, self.moment.y, self.moment.z)
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self::new(v.fixed_rows::<3>(0).into_owned(), v.fixed_rows::<3>(3).into_owned())
    }

    pub fn is_finite(&self) -> bool {
        self.force.iter().chain(self.moment.iter()).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    pub platform: BodyParams,
    /// Links 1..=5; link 5 is the end effector.
    pub links: [BodyParams; ARM_LINKS],
    pub arm: ArmModel,
    pub rotors: RotorConfig,
    pub gravity: Vec3,
}

impl SystemModel {
    pub fn validate(&self) -> Result<()> {
        self.platform.validate("platform")?;
        for (i, l) in self.links.iter().enumerate() {
            l.validate(&format!("link {}", i + 1))?;
        }
        self.arm.validate()?;
        self.rotors.validate()?;
        if self.gravity.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("gravity is not finite".into()));
        }
        Ok(())
    }

    pub fn link_coms(&self) -> [Vec3; ARM_LINKS] {
        self.links.map(|l| l.com_offset)
    }

    pub fn total_mass(&self) -> f64 {
        self.platform.mass + self.links.iter().map(|l| l.mass).sum::<f64>()
    }

    fn body(&self, frame: usize) -> &BodyParams {
        if frame == 0 {
            &self.platform
        } else {
            &self.links[frame - 1]
        }
    }

    /// Poses and velocities of every frame.
    pub fn kinematics(&self, pose: &Pose, twist: &Twist, joints: &JointMotion) -> Result<FrameSet> {
        let fs = forward_kinematics(&self.arm, &self.link_coms(), pose, &joints.q)?;
        Ok(velocity_recursion(fs, twist, &joints.qd))
    }
}

/// `R I R^T`.
pub fn world_inertia(rot: &RotMat, inertia_body: &Mat3) -> Mat3 {
    rot * inertia_body * rot.transpose()
}

/// The assembled system `M X = b`.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    /// Human-readable state description carried into solver errors.
    pub context: String,
}

/// Solution of the coupled system. Link arrays are indexed by link number minus one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InternalSolution {
    pub platform_omega_dot: Vec3,
    pub platform_acc: Vec3,
    pub force: [Vec3; ARM_LINKS],
    pub torque: [Vec3; ARM_LINKS],
    pub link_omega_dot: [Vec3; ARM_LINKS],
    pub link_acc: [Vec3; ARM_LINKS],
    pub link_com_acc: [Vec3; ARM_LINKS],
}

impl InternalSolution {
    pub fn from_vector(x: &DVector<f64>) -> Result<Self> {
        if x.len() != DIM {
            return Err(Error::Dimension(format!("solution has {} entries, expected {DIM}", x.len())));
        }
        let v = |c: usize| Vec3::new(x[c], x[c + 1], x[c + 2]);
        let links = |f: fn(usize) -> usize| std::array::from_fn(|k| v(f(k + 1)));
        Ok(Self {
            platform_omega_dot: v(layout::PLATFORM_OMEGA_DOT),
            platform_acc: v(layout::PLATFORM_ACC),
            force: links(layout::force),
            torque: links(layout::torque),
            link_omega_dot: links(layout::omega_dot),
            link_acc: links(layout::acc),
            link_com_acc: links(layout::com_acc),
        })
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let mut x = DVector::zeros(DIM);
        let mut put = |c: usize, v: &Vec3| x.fixed_rows_mut::<3>(c).copy_from(v);
        put(layout::PLATFORM_OMEGA_DOT, &self.platform_omega_dot);
        put(layout::PLATFORM_ACC, &self.platform_acc);
        for k in 0..ARM_LINKS {
            put(layout::force(k + 1), &self.force[k]);
            put(layout::torque(k + 1), &self.torque[k]);
            put(layout::omega_dot(k + 1), &self.link_omega_dot[k]);
            put(layout::acc(k + 1), &self.link_acc[k]);
            put(layout::com_acc(k + 1), &self.link_com_acc[k]);
        }
        x
    }

    pub fn platform_accel(&self) -> Accel {
        Accel { omega_dot: self.platform_omega_dot, acc: self.platform_acc }
    }

    /// Largest joint force or torque component.
    pub fn max_internal_wrench(&self) -> f64 {
        self.force.iter().chain(&self.torque).map(|v| v.amax()).fold(0.0, f64::max)
    }
}

fn put_block(m: &mut DMatrix<f64>, row: usize, col: usize, block: &Mat3) {
    m.fixed_view_mut::<3, 3>(row, col).copy_from(block);
}

fn put_vec(b: &mut DVector<f64>, row: usize, v: &Vec3) {
    b.fixed_rows_mut::<3>(row).copy_from(v);
}

fn describe(frames: &FrameSet, joints: &JointMotion) -> String {
    let p = frames.platform().pos;
    format!("platform [{:.4}, {:.4}, {:.4}] m, joints {:.4?} rad", p.x, p.y, p.z, joints.q)
}

/// Builds `M X = b` for the given kinematic state (poses and velocities filled),
/// prescribed joint accelerations, rotor wrench `u` on the platform and the
/// wrench `ext` the end effector exerts on its environment.
pub fn assemble(model: &SystemModel, frames: &FrameSet, joints: &JointMotion, u: &Wrench, ext: &Wrench) -> LinearSystem {
    let mut m = DMatrix::zeros(DIM, DIM);
    let mut b = DVector::zeros(DIM);
    let id = Mat3::identity();
    let g = model.gravity;
    let f = &frames.frames;

    // Platform.
    let pa = &f[0];
    let ia = world_inertia(&pa.rot, &model.platform.inertia);
    let r_out = f[1].pos - pa.com;
    let rot = layout::PLATFORM_ROT_ROW;
    put_block(&mut m, rot, layout::PLATFORM_OMEGA_DOT, &-ia);
    put_block(&mut m, rot, layout::torque(1), &-id);
    put_block(&mut m, rot, layout::force(1), &-skew(&r_out));
    put_vec(&mut b, rot, &(pa.omega.cross(&(ia * pa.omega)) - u.moment));
    let tr = layout::PLATFORM_TRANS_ROW;
    put_block(&mut m, tr, layout::PLATFORM_ACC, &(-model.platform.mass * id));
    put_block(&mut m, tr, layout::force(1), &-id);
    put_vec(&mut b, tr, &(-u.force - model.platform.mass * g));

    for i in 1..FRAME_COUNT {
        let body = model.body(i);
        let fr = &f[i];
        let row = layout::link_rows(i);
        let ii = world_inertia(&fr.rot, &body.inertia);
        let r_in = fr.pos - fr.com;
        let is_last = i == ARM_LINKS;
        let r_out = if is_last { fr.pos - fr.com } else { f[i + 1].pos - fr.com };

        // Rotational balance.
        put_block(&mut m, row, layout::omega_dot(i), &-ii);
        put_block(&mut m, row, layout::torque(i), &id);
        put_block(&mut m, row, layout::force(i), &skew(&r_in));
        let mut rhs = fr.omega.cross(&(ii * fr.omega));
        if is_last {
            rhs += ext.moment + r_out.cross(&ext.force);
        } else {
            put_block(&mut m, row, layout::torque(i + 1), &-id);
            put_block(&mut m, row, layout::force(i + 1), &-skew(&r_out));
        }
        put_vec(&mut b, row, &rhs);

        // Translational balance.
        let row = row + 3;
        put_block(&mut m, row, layout::com_acc(i), &(-body.mass * id));
        put_block(&mut m, row, layout::force(i), &id);
        let mut rhs = -body.mass * g;
        if is_last {
            rhs += ext.force;
        } else {
            put_block(&mut m, row, layout::force(i + 1), &-id);
        }
        put_vec(&mut b, row, &rhs);

        let (prev_wd, prev_acc) = if i == 1 {
            (layout::PLATFORM_OMEGA_DOT, layout::PLATFORM_ACC)
        } else {
            (layout::omega_dot(i - 1), layout::acc(i - 1))
        };
        let prev = &f[i - 1];
        let axis = fr.axis();
        let (qd, qdd) = if i <= joints.q.len() { (joints.qd[i - 1], joints.qdd[i - 1]) } else { (0.0, 0.0) };

        // Angular acceleration recursion.
        let row = row + 3;
        put_block(&mut m, row, layout::omega_dot(i), &id);
        put_block(&mut m, row, prev_wd, &-id);
        put_vec(&mut b, row, &(fr.omega.cross(&(axis * qd)) + axis * qdd));

        // Origin acceleration recursion.
        let row = row + 3;
        let r = fr.parent_offset;
        put_block(&mut m, row, layout::acc(i), &id);
        put_block(&mut m, row, prev_acc, &-id);
        put_block(&mut m, row, prev_wd, &skew(&r));
        put_vec(&mut b, row, &prev.omega.cross(&prev.omega.cross(&r)));

        // COM acceleration recursion.
        let row = row + 3;
        let rc = fr.com_offset;
        put_block(&mut m, row, layout::com_acc(i), &id);
        put_block(&mut m, row, layout::acc(i), &-id);
        put_block(&mut m, row, layout::omega_dot(i), &skew(&rc));
        put_vec(&mut b, row, &fr.omega.cross(&fr.omega.cross(&rc)));
    }

    LinearSystem { matrix: m, rhs: b, context: describe(frames, joints) }
}

/// Hager-Higham estimate of `||A^-1||_1` from an LU factorisation.
fn inverse_norm1_estimate(lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>) -> Option<f64> {
    let n = lu.l().nrows();
    let (l, u) = (lu.l(), lu.u());
    let p = lu.p();
    let solve_t = |c: &DVector<f64>| -> Option<DVector<f64>> {
        // A = P^T L U, so A^T x = c is U^T L^T P x = c.
        let y = u.tr_solve_upper_triangular(c)?;
        let mut z = l.tr_solve_lower_triangular(&y)?;
        p.inv_permute_rows(&mut z);
        Some(z)
    };
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut est = 0.0;
    for _ in 0..5 {
        let y = lu.solve(&x)?;
        let new_est = y.lp_norm(1);
        if new_est <= est {
            break;
        }
        est = new_est;
        let z = solve_t(&y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 }))?;
        let jmax = z.iamax();
        if z[jmax].abs() <= z.dot(&x) {
            break;
        }
        x.fill(0.0);
        x[jmax] = 1.0;
    }
    // Higham's alternating-sign safeguard.
    let alt = DVector::from_fn(n, |k, _| {
        let s = if k % 2 == 0 { 1.0 } else { -1.0 };
        s * (1.0 + k as f64 / (n as f64 - 1.0).max(1.0))
    });
    let y = lu.solve(&alt)?;
    Some(est.max(2.0 * y.lp_norm(1) / (3.0 * n as f64)))
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.lp_norm(1)).fold(0.0, f64::max)
}

/// Dense LU solve with condition and residual checks.
fn checked_solve(m: &DMatrix<f64>, b: &DVector<f64>, context: &str) -> Result<DVector<f64>> {
    let lu = m.clone().lu();
    let singular = || Error::SingularSystem { condition: f64::INFINITY, context: context.to_string() };
    let inv_norm = inverse_norm1_estimate(&lu).ok_or_else(singular)?;
    let condition = norm1(m) * inv_norm;
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::SingularSystem { condition, context: context.to_string() });
    }
    let mut x = lu.solve(b).ok_or_else(singular)?;
    let bound = 1e-8 * (1.0 + b.amax());
    let mut residual = (m * &x - b).amax();
    if residual >= bound {
        // One step of iterative refinement.
        let r = b - m * &x;
        x += lu.solve(&r).ok_or_else(singular)?;
        residual = (m * &x - b).amax();
    }
    if !(residual < bound) {
        return Err(Error::Residual { residual, bound, context: context.to_string() });
    }
    Ok(x)
}

/// Solves the full system for accelerations and internal wrenches.
pub fn solve_internal(sys: &LinearSystem) -> Result<InternalSolution> {
    let x = checked_solve(&sys.matrix, &sys.rhs, &sys.context)?;
    InternalSolution::from_vector(&x)
}

/// Solves the link rows only, with the platform acceleration prescribed.
///
/// The platform balance rows are dropped, so the rotor wrench used during
/// assembly is irrelevant. The result carries the joint-1 wrench needed to
/// move the arm along with the given platform motion.
pub fn solve_with_platform_accel(sys: &LinearSystem, accel: &Accel) -> Result<InternalSolution> {
    let n = DIM - 6;
    let sub = sys.matrix.view((6, 6), (n, n)).into_owned();
    let mut xp = DVector::zeros(6);
    xp.fixed_rows_mut::<3>(0).copy_from(&accel.omega_dot);
    xp.fixed_rows_mut::<3>(3).copy_from(&accel.acc);
    let rhs = sys.rhs.rows(6, n) - sys.matrix.view((6, 0), (n, 6)) * &xp;
    let xs = checked_solve(&sub, &rhs, &sys.context)?;
    let mut x = DVector::zeros(DIM);
    x.rows_mut(0, 6).copy_from(&xp);
    x.rows_mut(6, n).copy_from(&xs);
    InternalSolution::from_vector(&x)
}

/// Platform acceleration of the assembly treated as one welded rigid body.
///
/// Only valid with zero joint rates and accelerations. Uses the composite
/// mass, centre of mass and parallel-axis inertia, and rigid-body
/// Newton-Euler about the composite centre of mass.
pub fn composite_oracle(model: &SystemModel, frames: &FrameSet, u: &Wrench, ext: &Wrench) -> Accel {
    let f = &frames.frames;
    let mass: f64 = model.total_mass();
    let c = (0..FRAME_COUNT).map(|i| f[i].com * model.body(i).mass).sum::<Vec3>() / mass;
    let mut ic = Mat3::zeros();
    for (i, fr) in f.iter().enumerate() {
        let body = model.body(i);
        let d = fr.com - c;
        ic += world_inertia(&fr.rot, &body.inertia) + body.mass * (Mat3::identity() * d.dot(&d) - d * d.transpose());
    }
    let pa = f[0].pos;
    let contact = f[ARM_LINKS].pos;
    let force = u.force + mass * model.gravity - ext.force;
    let moment = u.moment + (pa - c).cross(&u.force) - ext.moment - (contact - c).cross(&ext.force);
    let w = f[0].omega;
    let omega_dot = ic.try_inverse().expect("composite inertia is positive definite") * (moment - w.cross(&(ic * w)));
    let r = pa - c;
    let acc = force / mass + omega_dot.cross(&r) + w.cross(&w.cross(&r));
    Accel { omega_dot, acc }
}

/// Kinetic and potential energy, J. Requires velocities to be filled.
pub fn energy(model: &SystemModel, frames: &FrameSet) -> (f64, f64) {
    let mut ke = 0.0;
    let mut pe = 0.0;
    for (i, fr) in frames.frames.iter().enumerate() {
        let body = model.body(i);
        let iw = world_inertia(&fr.rot, &body.inertia);
        ke += 0.5 * (body.mass * fr.com_vel.norm_squared() + fr.omega.dot(&(iw * fr.omega)));
        pe -= body.mass * model.gravity.dot(&fr.com);
    }
    (ke, pe)
}

/// Total linear momentum, kg m/s.
pub fn linear_momentum(model: &SystemModel, frames: &FrameSet) -> Vec3 {
    frames.frames.iter().enumerate().map(|(i, fr)| fr.com_vel * model.body(i).mass).sum()
}

/// Block-diagonal `diag(m I, I_world)` mapping platform accelerations to a wrench.
pub fn platform_mass_matrix(body: &BodyParams, rot: &RotMat) -> Matrix6<f64> {
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&(Mat3::identity() * body.mass));
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&world_inertia(rot, &body.inertia));
    m
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::kinematics::{JointVec, ARM_JOINTS};
    use crate::spatial::{euler_to_rot, rot_z, EulerXyz};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    pub(crate) fn model() -> SystemModel {
        let arm = ArmModel::from_lengths([0.06, 0.12, 0.10, 0.08], Vec3::new(0.0, 0.0, -0.04), 150f64.to_radians());
        SystemModel {
            platform: BodyParams::new(1.6, Mat3::from_diagonal(&Vec3::new(0.03, 0.03, 0.05)), Vec3::zeros()),
            links: [
                BodyParams::rod(0.12, 0.03, 2, 0.015),
                BodyParams::rod(0.10, 0.06, 0, 0.01),
                BodyParams::rod(0.10, 0.12, 0, 0.01),
                BodyParams::rod(0.08, 0.10, 2, 0.01),
                BodyParams::rod(0.02, 0.08, 2, 0.005),
            ],
            arm,
            rotors: RotorConfig::tilted_ring(6, 0.25, 45f64.to_radians(), 8e-6, 1e-7, 1200.0),
            gravity: Vec3::new(0.0, 0.0, -9.81),
        }
    }

    fn frames(m: &SystemModel, pose: &Pose, twist: &Twist, jm: &JointMotion) -> FrameSet {
        m.kinematics(pose, twist, jm).unwrap()
    }

    #[test]
    fn world_inertia_examples() {
        let i = Mat3::from_diagonal(&Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(world_inertia(&Mat3::identity(), &i), i);
        let w = world_inertia(&rot_z(std::f64::consts::FRAC_PI_2), &i);
        assert_relative_eq!(w, Mat3::from_diagonal(&Vec3::new(2.0, 1.0, 3.0)), epsilon = 1e-15);
        let r = euler_to_rot(EulerXyz::new(0.3, -1.1, 2.0));
        let mut ev: Vec<f64> = world_inertia(&r, &i).symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert_relative_eq!(ev.as_slice(), [1.0, 2.0, 3.0].as_slice(), epsilon = 1e-10);
    }

    #[test]
    fn zero_inputs_give_zero_solution() {
        let mut m = model();
        m.gravity = Vec3::zeros();
        let fs = frames(&m, &Pose::identity(), &Twist::default(), &JointMotion::locked([0.1, -0.2, 0.3, 0.4]));
        let sys = assemble(&m, &fs, &JointMotion::locked([0.1, -0.2, 0.3, 0.4]), &Wrench::default(), &Wrench::default());
        assert_eq!((sys.matrix.nrows(), sys.matrix.ncols(), sys.rhs.len()), (DIM, DIM, DIM));
        assert_eq!(DIM, 81);
        assert!(sys.rhs.iter().all(|&v| v == 0.0));
        let sol = solve_internal(&sys).unwrap();
        assert!(sol.to_vector().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn joint_one_force_pairs_platform_and_link_one() {
        let m = model();
        let jm = JointMotion::locked([0.0; ARM_JOINTS]);
        let fs = frames(&m, &Pose::identity(), &Twist::default(), &jm);
        let sys = assemble(&m, &fs, &jm, &Wrench::default(), &Wrench::default());
        let block = |row: usize, col: usize| sys.matrix.fixed_view::<3, 3>(row, col).into_owned();
        assert_eq!(block(layout::PLATFORM_TRANS_ROW, layout::force(1)), -Mat3::identity());
        assert_eq!(block(layout::link_rows(1) + 3, layout::force(1)), Mat3::identity());
        for i in 1..ARM_LINKS {
            assert_eq!(block(layout::link_rows(i) + 3, layout::force(i + 1)), -Mat3::identity());
            assert_eq!(block(layout::link_rows(i + 1) + 3, layout::force(i + 1)), Mat3::identity());
            assert_eq!(block(layout::link_rows(i), layout::torque(i + 1)), -Mat3::identity());
            assert_eq!(block(layout::link_rows(i + 1), layout::torque(i + 1)), Mat3::identity());
        }
    }

    #[test]
    fn static_hover_carries_arm_weight_through_joint_one() {
        let m = model();
        let q: JointVec = [-90f64.to_radians(), -90f64.to_radians(), 0.0, 0.0];
        let jm = JointMotion::locked(q);
        let fs = frames(&m, &Pose::identity(), &Twist::default(), &jm);
        // Total weight up; the moment balances the arm's weight about the platform origin.
        let weight = -m.total_mass() * m.gravity;
        let arm_moment: Vec3 = (1..FRAME_COUNT).map(|i| (fs.frames[i].com - fs.frames[0].pos).cross(&(m.links[i - 1].mass * m.gravity))).sum();
        let u = Wrench::new(weight, -arm_moment);
        let sol = solve_internal(&assemble(&m, &fs, &jm, &u, &Wrench::default())).unwrap();
        assert!(sol.platform_accel().acc.amax() < 1e-12);
        assert!(sol.platform_accel().omega_dot.amax() < 1e-12);
        assert!(sol.link_com_acc.iter().all(|a| a.amax() < 1e-12));
        let arm_weight: Vec3 = m.links.iter().map(|l| l.mass * m.gravity).sum();
        assert_relative_eq!(sol.force[0], -arm_weight, epsilon = 1e-12);
    }

    #[test]
    fn free_fall_has_no_internal_wrench() {
        let m = model();
        let jm = JointMotion { q: [0.3, -0.5, 1.0, 0.2], qd: [0.0; 4], qdd: [0.0; 4] };
        let tw = Twist { omega: Vec3::zeros(), vel: Vec3::new(0.3, 0.0, -1.0) };
        let pose = Pose::new(euler_to_rot(EulerXyz::new(0.2, 0.1, -0.3)), Vec3::new(9.0, 9.0, 9.0));
        let fs = frames(&m, &pose, &tw, &jm);
        let sol = solve_internal(&assemble(&m, &fs, &jm, &Wrench::default(), &Wrench::default())).unwrap();
        for k in 0..ARM_LINKS {
            assert_relative_eq!(sol.link_com_acc[k], m.gravity, epsilon = 1e-12);
            assert!(sol.force[k].amax() < 1e-12 && sol.torque[k].amax() < 1e-12);
            assert!(sol.link_omega_dot[k].amax() < 1e-12);
        }
        assert_relative_eq!(sol.platform_acc, m.gravity, epsilon = 1e-12);
    }

    #[test]
    fn prescribed_platform_acceleration_reproduces_full_solve() {
        let m = model();
        let jm = JointMotion { q: [0.3, -0.5, 1.0, 0.2], qd: [0.4, -0.2, 0.5, 0.1], qdd: [1.0, 0.0, -2.0, 0.5] };
        let tw = Twist { omega: Vec3::new(0.3, -0.2, 0.5), vel: Vec3::new(0.3, 0.0, -1.0) };
        let fs = frames(&m, &Pose::identity(), &tw, &jm);
        let u = Wrench::new(Vec3::new(1.0, 2.0, 25.0), Vec3::new(0.1, -0.2, 0.05));
        let sys = assemble(&m, &fs, &jm, &u, &Wrench::default());
        let full = solve_internal(&sys).unwrap();
        let part = solve_with_platform_accel(&sys, &full.platform_accel()).unwrap();
        assert_relative_eq!(part.to_vector(), full.to_vector(), epsilon = 1e-10);
    }

    #[test]
    fn massless_arm_reduces_to_platform_equations() {
        let mut m = model();
        for l in &mut m.links {
            l.mass = 1e-12;
            l.inertia *= 1e-12;
        }
        let tw = Twist { omega: Vec3::new(0.5, -1.0, 2.0), vel: Vec3::zeros() };
        let pose = Pose::new(euler_to_rot(EulerXyz::new(0.2, 0.1, -0.3)), Vec3::zeros());
        let fs = frames(&m, &pose, &tw, &JointMotion::locked([0.0; 4]));
        let u = Wrench::new(Vec3::new(1.0, 2.0, 25.0), Vec3::new(0.1, -0.2, 0.05));
        let acc = composite_oracle(&m, &fs, &u, &Wrench::default());
        let ia = world_inertia(&pose.rot, &m.platform.inertia);
        let wd = ia.try_inverse().unwrap() * (u.moment - tw.omega.cross(&(ia * tw.omega)));
        assert_relative_eq!(acc.omega_dot, wd, epsilon = 1e-9);
        assert_relative_eq!(acc.acc, u.force / m.platform.mass + m.gravity, epsilon = 1e-9);
    }

    #[test]
    fn symmetric_arm_keeps_composite_com_on_axis() {
        // Two equal links folded straight down below the platform centre.
        let mut m = model();
        m.arm.mount_offset = Vec3::zeros();
        let q = [0.0, 0.0, 0.0, 0.0];
        for l in &mut m.links {
            l.com_offset = Vec3::zeros();
        }
        m.arm.rows = [crate::kinematics::CraigRow::default(); ARM_LINKS];
        m.arm.rows[3].d = 0.1;
        m.arm.rows[4].d = 0.1;
        let fs = frames(&m, &Pose::identity(), &Twist::default(), &JointMotion::locked(q));
        let c: Vec3 = (0..FRAME_COUNT).map(|i| fs.frames[i].com * m.body(i).mass).sum::<Vec3>() / m.total_mass();
        assert!(c.x.abs() < 1e-15 && c.y.abs() < 1e-15);
    }

    fn random_state() -> impl Strategy<Value = (Pose, Vec3, JointVec, Wrench, Wrench)> {
        let v3 = |s: f64| prop::array::uniform3(-s..s).prop_map(Vec3::from);
        (v3(1.2), v3(10.0), v3(3.0), prop::array::uniform4(-2.5..2.5f64), v3(40.0), v3(2.0), v3(2.0), v3(0.2)).prop_map(
            |(e, p, w, q, uf, ut, ef, et)| {
                (
                    Pose::new(euler_to_rot(EulerXyz::new(e.x, e.y, e.z)), p),
                    w,
                    q,
                    Wrench::new(uf, ut),
                    Wrench::new(ef, et),
                )
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn locked_joints_match_composite_body((pose, w, q, u, ext) in random_state()) {
            let m = model();
            let jm = JointMotion::locked(q);
            let tw = Twist { omega: w, vel: Vec3::new(0.5, -0.5, 0.1) };
            let fs = frames(&m, &pose, &tw, &jm);
            let sol = solve_internal(&assemble(&m, &fs, &jm, &u, &ext)).unwrap();
            let oracle = composite_oracle(&m, &fs, &u, &ext);
            prop_assert!((sol.platform_omega_dot - oracle.omega_dot).norm() <= 1e-8 * oracle.omega_dot.norm().max(1.0));
            prop_assert!((sol.platform_acc - oracle.acc).norm() <= 1e-8 * oracle.acc.norm().max(1.0));
        }
    }
}
