//! Rotation utilities shared by the kinematics, dynamics and control layers.
//!
//! Everything here works on plain `nalgebra` 3-vectors and 3x3 matrices. All
//! angles are radians; conversion to degrees happens only at file and report
//! boundaries.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// A 3x3 rotation matrix. Alias rather than newtype so that the rest of the
/// crate can use `nalgebra` arithmetic directly; [`is_rotation`] checks the
/// invariant where it matters.
pub type RotMat = Mat3;

/// Tolerance below which `|R13|` is considered to be 1 (gimbal lock).
pub const GIMBAL_TOL: f64 = 1e-9;

/// Margin from `psi = ±pi/2` inside which the Euler-rate map is refused.
pub const EULER_RATE_MARGIN: f64 = 1e-3;

/// x-y-z Euler angles: `R = Rx(phi) Ry(psi) Rz(gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EulerXyz {
    pub phi: f64,
    pub psi: f64,
    pub gamma: f64,
}

impl EulerXyz {
    pub fn new(phi: f64, psi: f64, gamma: f64) -> Self {
        Self { phi, psi, gamma }
    }

    pub fn from_degrees(deg: [f64; 3]) -> Self {
        Self::new(deg[0].to_radians(), deg[1].to_radians(), deg[2].to_radians())
    }

    pub fn to_degrees(self) -> [f64; 3] {
        [self.phi.to_degrees(), self.psi.to_degrees(), self.gamma.to_degrees()]
    }

    pub fn as_vec(self) -> Vec3 {
        Vec3::new(self.phi, self.psi, self.gamma)
    }
}

/// Result of decomposing a rotation into x-y-z Euler angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerDecomposition {
    pub angles: EulerXyz,
    /// Set when `|R13| >= 1 - 1e-9`. `gamma` is then pinned to 0 and the free
    /// angle is carried entirely by `phi`.
    pub gimbal_lock: bool,
}

/// Exponential coordinates of a rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisAngle {
    pub axis: Vec3,
    pub angle: f64,
}

impl AxisAngle {
    pub fn new(axis: Vec3, angle: f64) -> Self {
        Self { axis, angle }
    }

    /// The rotation vector `angle * axis`.
    pub fn scaled(&self) -> Vec3 {
        self.axis * self.angle
    }

    /// Builds from a rotation vector; zero maps to the identity convention.
    pub fn from_scaled(v: Vec3) -> Self {
        let angle = v.norm();
        if angle == 0.0 {
            Self::new(Vec3::z(), 0.0)
        } else {
            Self::new(v / angle, angle)
        }
    }
}

/// A rigid placement: rotation to world plus origin in world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rot: RotMat,
    pub pos: Vec3,
}

impl Pose {
    pub fn new(rot: RotMat, pos: Vec3) -> Self {
        Self { rot, pos }
    }

    pub fn identity() -> Self {
        Self::new(Mat3::identity(), Vec3::zeros())
    }

    pub fn from_euler(pos: Vec3, e: EulerXyz) -> Self {
        Self::new(euler_to_rot(e), pos)
    }

    /// `self * other` as homogeneous transforms.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::new(self.rot * other.rot, self.pos + self.rot * other.pos)
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.pos + self.rot * p
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

/// Skew-symmetric matrix with `skew(v) * w == v.cross(&w)`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn rot_x(a: f64) -> RotMat {
    let (s, c) = a.sin_cos();
    Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(a: f64) -> RotMat {
    let (s, c) = a.sin_cos();
    Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(a: f64) -> RotMat {
    let (s, c) = a.sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

pub fn euler_to_rot(e: EulerXyz) -> RotMat {
    rot_x(e.phi) * rot_y(e.psi) * rot_z(e.gamma)
}

pub fn rot_to_euler(r: &RotMat) -> EulerDecomposition {
    let r13 = r[(0, 2)].clamp(-1.0, 1.0);
    if r13.abs() >= 1.0 - GIMBAL_TOL {
        // R21 = sin(gamma + s*phi), R22 = cos(gamma + s*phi) with s = sign(R13).
        let s = r13.signum();
        let phi = (s * r[(1, 0)]).atan2(r[(1, 1)]);
        return EulerDecomposition {
            angles: EulerXyz::new(phi, s * std::f64::consts::FRAC_PI_2, 0.0),
            gimbal_lock: true,
        };
    }
    let psi = r13.asin();
    let phi = (-r[(1, 2)]).atan2(r[(2, 2)]);
    let gamma = (-r[(0, 1)]).atan2(r[(0, 0)]);
    EulerDecomposition { angles: EulerXyz::new(phi, psi, gamma), gimbal_lock: false }
}

/// Rodrigues formula `I + sin(t) S + (1 - cos(t)) S^2` with `S = skew(axis)`.
pub fn axis_angle_to_rot(aa: &AxisAngle) -> RotMat {
    if aa.angle == 0.0 {
        return Mat3::identity();
    }
    let s = skew(&aa.axis);
    Mat3::identity() + s * aa.angle.sin() + s * s * (1.0 - aa.angle.cos())
}

/// `exp(skew(v))` for a rotation vector `v`.
pub fn exp_so3(v: &Vec3) -> RotMat {
    axis_angle_to_rot(&AxisAngle::from_scaled(*v))
}

/// Inverse of [`axis_angle_to_rot`] with `angle` in `[0, pi]`.
///
/// Identity maps to axis `+z`. At `angle = pi` the axis comes from the
/// symmetric part and its sign is fixed so the first nonzero component is
/// positive.
pub fn rot_to_axis_angle(r: &RotMat) -> AxisAngle {
    let v = Vec3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    let cos_t = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let sin_t = (0.5 * v.norm()).min(1.0);
    let angle = sin_t.atan2(cos_t);
    if angle == 0.0 || v.norm() == 0.0 && cos_t > 0.0 {
        return AxisAngle::new(Vec3::z(), 0.0);
    }
    if cos_t > -0.5 {
        // sin(angle) is comfortably away from zero here.
        return AxisAngle::new(v.normalize(), angle);
    }
    // Near pi: a a^T = (sym(R) - cos I) / (1 - cos).
    let sym = (r + r.transpose()) * 0.5;
    let outer = (sym - Mat3::identity() * cos_t) / (1.0 - cos_t);
    let k = (0..3).max_by(|&a, &b| outer[(a, a)].total_cmp(&outer[(b, b)])).unwrap_or(0);
    let mut axis = outer.column(k).into_owned() / outer[(k, k)].max(f64::MIN_POSITIVE).sqrt();
    axis.normalize_mut();
    // Below this the skew part is rounding noise and the sign carries no information.
    let dir = if v.norm() < 1e-12 { 0.0 } else { axis.dot(&v) };
    if dir < 0.0 || dir == 0.0 && first_nonzero_negative(&axis) {
        axis = -axis;
    }
    AxisAngle::new(axis, angle)
}

fn first_nonzero_negative(v: &Vec3) -> bool {
    v.iter().find(|c| c.abs() > 1e-12).is_some_and(|c| *c < 0.0)
}

/// `log(R)` as a rotation vector.
pub fn log_so3(r: &RotMat) -> Vec3 {
    rot_to_axis_angle(r).scaled()
}

/// Maps world-frame angular velocity to x-y-z Euler angle rates.
pub fn euler_rates_from_omega(e: EulerXyz, omega_world: &Vec3) -> Result<Vec3> {
    if e.psi.abs() >= std::f64::consts::FRAC_PI_2 - EULER_RATE_MARGIN {
        return Err(Error::EulerSingularity { psi: e.psi });
    }
    let (sp, cp) = e.phi.sin_cos();
    let (tp, cps) = (e.psi.tan(), e.psi.cos());
    let m = Mat3::new(1.0, sp * tp, -cp * tp, 0.0, cp, sp, 0.0, -sp / cps, cp / cps);
    Ok(m * omega_world)
}

/// Projects a nearly orthonormal matrix back onto SO(3) (polar factor).
pub fn orthonormalize(r: &Mat3) -> RotMat {
    let svd = r.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut d = Mat3::identity();
    if (u * vt).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    u * d * vt
}

/// Max-abs deviation of `R^T R` from identity.
pub fn orthonormality_error(r: &Mat3) -> f64 {
    (r.transpose() * r - Mat3::identity()).abs().max()
}

pub fn is_rotation(r: &Mat3, tol: f64) -> bool {
    orthonormality_error(r) <= tol && (r.determinant() - 1.0).abs() <= tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn skew_examples() {
        assert_eq!(skew(&Vec3::zeros()), Mat3::zeros());
        assert_eq!(skew(&Vec3::x()) * Vec3::y(), Vec3::z());
        assert_eq!(skew(&Vec3::new(1.0, 2.0, 3.0)) * Vec3::new(4.0, 5.0, 6.0), Vec3::new(-3.0, 6.0, -3.0));
    }

    #[test]
    fn euler_elementary() {
        assert_eq!(euler_to_rot(EulerXyz::default()), Mat3::identity());
        let r = euler_to_rot(EulerXyz::new(FRAC_PI_2, 0.0, 0.0));
        assert_relative_eq!(r * Vec3::y(), Vec3::z(), epsilon = 1e-15);
        let d = rot_to_euler(&Mat3::identity());
        assert_eq!(d.angles, EulerXyz::default());
        assert!(!d.gimbal_lock);
    }

    #[test]
    fn euler_round_trip_fixed_case() {
        let e = EulerXyz::new(0.3, -0.2, 0.1);
        let back = rot_to_euler(&euler_to_rot(e)).angles;
        assert_relative_eq!(back.as_vec(), e.as_vec(), epsilon = 1e-12);
    }

    #[test]
    fn gimbal_lock_folds_into_phi() {
        for (phi, gamma, psi) in [(0.4, 0.3, FRAC_PI_2), (0.4, 0.3, -FRAC_PI_2), (-1.0, 0.2, FRAC_PI_2)] {
            let r = euler_to_rot(EulerXyz::new(phi, psi, gamma));
            let d = rot_to_euler(&r);
            assert!(d.gimbal_lock);
            assert_eq!(d.angles.gamma, 0.0);
            assert_relative_eq!(euler_to_rot(d.angles), r, epsilon = 1e-9);
        }
    }

    #[test]
    fn axis_angle_examples() {
        assert_eq!(axis_angle_to_rot(&AxisAngle::new(Vec3::x(), 0.0)), Mat3::identity());
        let r = axis_angle_to_rot(&AxisAngle::new(Vec3::z(), FRAC_PI_2));
        assert_relative_eq!(r * Vec3::x(), Vec3::y(), epsilon = 1e-15);

        let id = rot_to_axis_angle(&Mat3::identity());
        assert_eq!((id.axis, id.angle), (Vec3::z(), 0.0));

        let aa = rot_to_axis_angle(&rot_x(PI));
        assert_relative_eq!(aa.angle, PI, epsilon = 1e-12);
        assert_relative_eq!(aa.axis, Vec3::x(), epsilon = 1e-12);
        let aa = rot_to_axis_angle(&axis_angle_to_rot(&AxisAngle::new(-Vec3::y(), PI)));
        assert_relative_eq!(aa.axis, Vec3::y(), epsilon = 1e-12);

        let aa = rot_to_axis_angle(&rot_z(FRAC_PI_2));
        assert_relative_eq!(aa.angle, FRAC_PI_2, epsilon = 1e-15);
        assert_relative_eq!(aa.axis, Vec3::z(), epsilon = 1e-15);
    }

    #[test]
    fn near_pi_keeps_sign_from_skew_part() {
        let axis = Vec3::new(0.3, -0.5, 0.8).normalize();
        for angle in [PI - 1e-3, PI - 1e-7, PI - 0.4] {
            let aa = rot_to_axis_angle(&axis_angle_to_rot(&AxisAngle::new(axis, angle)));
            assert_relative_eq!(aa.angle, angle, epsilon = 1e-9);
            assert_relative_eq!(aa.axis, axis, epsilon = 1e-8);
        }
    }

    #[test]
    fn euler_rates_at_zero_and_singularity() {
        let w = Vec3::new(0.1, -0.2, 0.3);
        assert_eq!(euler_rates_from_omega(EulerXyz::default(), &w).unwrap(), w);
        assert!(matches!(
            euler_rates_from_omega(EulerXyz::new(0.0, FRAC_PI_2, 0.0), &w),
            Err(Error::EulerSingularity { .. })
        ));
    }

    #[test]
    fn euler_rates_match_finite_difference() {
        // Integrate R' = skew(w) R exactly over dt and difference the angles.
        let e0 = EulerXyz::new(0.4, -0.7, 1.1);
        let w = Vec3::new(0.3, -0.5, 0.9);
        let dt = 1e-5;
        let r0 = euler_to_rot(e0);
        let fwd = rot_to_euler(&(exp_so3(&(w * dt)) * r0)).angles.as_vec();
        let bwd = rot_to_euler(&(exp_so3(&(-w * dt)) * r0)).angles.as_vec();
        let fd = (fwd - bwd) / (2.0 * dt);
        assert_relative_eq!(euler_rates_from_omega(e0, &w).unwrap(), fd, epsilon = 1e-8);
    }

    #[test]
    fn error_rotation_vanishes_after_exact_correction() {
        let rc = euler_to_rot(EulerXyz::new(0.2, -0.3, 0.5));
        let rd = euler_to_rot(EulerXyz::new(-0.1, 0.4, 0.0));
        let err = rot_to_axis_angle(&(rd * rc.transpose()));
        let corrected = axis_angle_to_rot(&err) * rc;
        let residual = rot_to_axis_angle(&(rd * corrected.transpose()));
        assert!(residual.angle < 1e-12);
    }

    fn unit_axis() -> impl Strategy<Value = Vec3> {
        (-1.0..1.0f64, 0.0..2.0 * PI).prop_map(|(z, a)| {
            let r = (1.0 - z * z).sqrt();
            Vec3::new(r * a.cos(), r * a.sin(), z)
        })
    }

    proptest! {
        #[test]
        fn skew_is_cross_product(v in prop::array::uniform3(-10.0..10.0f64), w in prop::array::uniform3(-10.0..10.0f64)) {
            let (v, w) = (Vec3::from(v), Vec3::from(w));
            prop_assert!((skew(&v) * w - v.cross(&w)).norm() < 1e-12);
            prop_assert_eq!(skew(&v).transpose(), -skew(&v));
        }

        #[test]
        fn euler_round_trip(phi in -3.1..3.1f64, psi in -1.55..1.55f64, gamma in -3.1..3.1f64) {
            let e = EulerXyz::new(phi, psi, gamma);
            let r = euler_to_rot(e);
            prop_assert!(is_rotation(&r, 1e-9));
            let back = rot_to_euler(&r);
            prop_assert!(!back.gimbal_lock);
            prop_assert!((back.angles.as_vec() - e.as_vec()).amax() < 1e-8);
        }

        #[test]
        fn axis_angle_round_trip(axis in unit_axis(), angle in 1e-6..(PI - 1e-6)) {
            let r = axis_angle_to_rot(&AxisAngle::new(axis, angle));
            prop_assert!(is_rotation(&r, 1e-9));
            let back = rot_to_axis_angle(&r);
            prop_assert!((back.angle - angle).abs() < 1e-8);
            prop_assert!((back.axis - axis).amax() < 1e-8);
            prop_assert!((axis_angle_to_rot(&back) - r).amax() < 1e-8);
        }
    }
}
