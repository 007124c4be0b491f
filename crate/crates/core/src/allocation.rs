//! Rotor coupling matrix and bounded least-squares allocation.
//!
//! Rotor commands are squared speeds `Omega_i = omega_i^2`, bounded in
//! `[0, omega_max^2]`. Column `i` of the coupling matrix maps `Omega_i` to the
//! body-frame wrench `[k_f e_i; (skew(k_f r_i) + d_i k_tau I) e_i]`.

use nalgebra::{DMatrix, DVector, Matrix6, Vector6};

use crate::dynamics::Wrench;
use crate::error::{Error, Result};
use crate::spatial::{skew, Mat3, RotMat, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotor {
    /// Unit thrust direction in `{A}`.
    pub dir: Vec3,
    /// Rotor hub position in `{A}`, m.
    pub pos: Vec3,
    /// Spin sign, +1 or -1.
    pub spin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotorConfig {
    pub rotors: Vec<Rotor>,
    /// Thrust coefficient, N/(rad/s)^2.
    pub k_f: f64,
    /// Drag-torque coefficient, N m/(rad/s)^2.
    pub k_tau: f64,
    /// Speed bound, rad/s.
    pub omega_max: f64,
}

impl RotorConfig {
    /// Rotors on a circle, each tilted by `tilt` about its radial arm, with the
    /// tilt direction and the spin sign alternating from rotor to rotor.
    pub fn tilted_ring(count: usize, radius: f64, tilt: f64, k_f: f64, k_tau: f64, omega_max: f64) -> Self {
        let rotors = (0..count)
            .map(|i| {
                let az = std::f64::consts::TAU * i as f64 / count as f64;
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                let radial = Vec3::new(az.cos(), az.sin(), 0.0);
                let tangent = Vec3::new(-az.sin(), az.cos(), 0.0);
                Rotor { dir: Vec3::z() * tilt.cos() + tangent * (sign * tilt.sin()), pos: radial * radius, spin: sign }
            })
            .collect();
        Self { rotors, k_f, k_tau, omega_max }
    }

    /// Planar "+" quad: arms along +x, +y, -x, -y with spins +, -, +, -.
    pub fn flat_quad(arm: f64, k_f: f64, k_tau: f64, omega_max: f64) -> Self {
        let rotors = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)]
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| Rotor {
                dir: Vec3::z(),
                pos: Vec3::new(x * arm, y * arm, 0.0),
                spin: if i % 2 == 0 { 1.0 } else { -1.0 },
            })
            .collect();
        Self { rotors, k_f, k_tau, omega_max }
    }

    pub fn len(&self) -> usize {
        self.rotors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rotors.is_empty()
    }

    /// Upper bound on each squared speed.
    pub fn omega_sq_max(&self) -> f64 {
        self.omega_max * self.omega_max
    }

    pub fn validate(&self) -> Result<()> {
        if self.rotors.is_empty() {
            return Err(Error::InvalidModel("rotor list is empty".into()));
        }
        for (name, v) in [("k_f", self.k_f), ("k_tau", self.k_tau), ("omega_max", self.omega_max)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidModel(format!("rotors: {name} must be positive, got {v}")));
            }
        }
        for (i, r) in self.rotors.iter().enumerate() {
            if (r.dir.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidModel(format!("rotor {}: direction is not a unit vector", i + 1)));
            }
            if r.spin != 1.0 && r.spin != -1.0 {
                return Err(Error::InvalidModel(format!("rotor {}: spin must be +1 or -1", i + 1)));
            }
            if r.pos.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidModel(format!("rotor {}: position is not finite", i + 1)));
            }
        }
        Ok(())
    }
}

/// Body-frame `6 x n` map from squared speeds to `[force; moment]`.
pub fn coupling_matrix(cfg: &RotorConfig) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(6, cfg.len());
    for (i, r) in cfg.rotors.iter().enumerate() {
        let force = r.dir * cfg.k_f;
        let moment = (skew(&(r.pos * cfg.k_f)) + Mat3::identity() * (r.spin * cfg.k_tau)) * r.dir;
        b.fixed_view_mut::<3, 1>(0, i).copy_from(&force);
        b.fixed_view_mut::<3, 1>(3, i).copy_from(&moment);
    }
    b
}

/// Numerical rank at tolerance `1e-9 sigma_max`, and `sigma_max / sigma_min`
/// over the leading `min(6, n)` singular values.
pub fn actuation_rank(cfg: &RotorConfig) -> (usize, f64) {
    let b = coupling_matrix(cfg);
    if b.ncols() == 0 {
        return (0, f64::INFINITY);
    }
    let sv = b.singular_values();
    let smax = sv.max();
    let rank = sv.iter().filter(|&&s| s > 1e-9 * smax).count();
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    (rank, if smin > 0.0 { smax / smin } else { f64::INFINITY })
}

fn block_rotation(rot: &RotMat) -> Matrix6<f64> {
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(rot);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(rot);
    m
}

/// World wrench produced by the given squared speeds.
pub fn wrench_from_speeds(omega_sq: &DVector<f64>, rot: &RotMat, cfg: &RotorConfig) -> Result<Wrench> {
    if omega_sq.len() != cfg.len() {
        return Err(Error::Dimension(format!("{} rotor commands for {} rotors", omega_sq.len(), cfg.len())));
    }
    if let Some((index, &value)) = omega_sq.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(Error::NegativeSpeed { index, value });
    }
    let body = coupling_matrix(cfg) * omega_sq;
    let body = Vector6::from_iterator(body.iter().copied());
    Ok(Wrench::from_vector(&(block_rotation(rot) * body)))
}

/// Result of [`allocate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    /// Squared rotor speeds, each in `[0, omega_max^2]`.
    pub omega_sq: DVector<f64>,
    /// Requested minus achieved world wrench, `[force; moment]`.
    pub residual: Vector6<f64>,
}

/// Per-axis body-frame wrench envelope `(lo, hi)` of the rotor box.
pub fn body_wrench_limits(cfg: &RotorConfig) -> (Vector6<f64>, Vector6<f64>) {
    let b = coupling_matrix(cfg);
    let ub = cfg.omega_sq_max();
    let mut lo = Vector6::zeros();
    let mut hi = Vector6::zeros();
    for j in 0..6 {
        for i in 0..b.ncols() {
            let v = b[(j, i)] * ub;
            if v > 0.0 {
                hi[j] += v;
            } else {
                lo[j] += v;
            }
        }
    }
    (lo, hi)
}

/// Squared speeds minimising `|R B Omega - u|` over the box `0 <= Omega <= omega_max^2`.
pub fn allocate(u_world: &Wrench, rot: &RotMat, cfg: &RotorConfig) -> Allocation {
    let ub = cfg.omega_sq_max();
    let target = block_rotation(rot).transpose() * u_world.to_vector();
    let target = DVector::from_iterator(6, target.iter().copied());
    // Unit box in scaled variables keeps the columns well balanced.
    let a = coupling_matrix(cfg) * ub;
    let y = bvls_unit_box(&a, &target);
    let omega_sq = y.map(|v| v * ub);
    let achieved = &a * &y;
    let body_res = Vector6::from_iterator((&target - achieved).iter().copied());
    Allocation { omega_sq, residual: block_rotation(rot) * body_res }
}

/// Whether the rotor box realises `u_world` up to round-off.
pub fn is_attainable(u_world: &Wrench, rot: &RotMat, cfg: &RotorConfig) -> bool {
    let tol = 1e-9 * (1.0 + u_world.to_vector().norm());
    allocate(u_world, rot, cfg).residual.norm() <= tol
}

/// Weight of the moment rows relative to the force rows in [`prioritize`].
pub const MOMENT_PRIORITY: f64 = 1e3;

/// Attainable command derived from `u_world` with the moment given priority.
///
/// An attainable command is returned unchanged. Otherwise the rotor box is
/// fitted to `u_world` by least squares with the moment rows weighted by
/// [`MOMENT_PRIORITY`], so the moment is matched as closely as the box allows
/// and the force error is minimised after that. The result is the wrench that
/// fit actually produces.
pub fn prioritize(u_world: &Wrench, rot: &RotMat, cfg: &RotorConfig) -> Wrench {
    if is_attainable(u_world, rot, cfg) {
        return *u_world;
    }
    let ub = cfg.omega_sq_max();
    let a = coupling_matrix(cfg) * ub;
    let target = block_rotation(rot).transpose() * u_world.to_vector();
    let mut weighted = a.clone();
    let mut rhs = DVector::from_iterator(6, target.iter().copied());
    for row in 3..6 {
        weighted.row_mut(row).scale_mut(MOMENT_PRIORITY);
        rhs[row] *= MOMENT_PRIORITY;
    }
    let y = bvls_unit_box(&weighted, &rhs);
    let body = Vector6::from_iterator((&a * y).iter().copied());
    Wrench::from_vector(&(block_rotation(rot) * body))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bound {
    Lower,
    Upper,
    Free,
}

/// Minimum-norm least-squares on the columns in `free`.
fn solve_free(a: &DMatrix<f64>, rhs: &DVector<f64>, free: &[usize]) -> DVector<f64> {
    let sub = a.select_columns(free);
    let svd = sub.svd(true, true);
    let tol = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    svd.solve(rhs, tol).expect("SVD with both factors computed")
}

/// Bounded-variable least squares on `[0, 1]^n` (active-set method).
///
/// Deterministic: ties are broken by the lowest index and the iteration count
/// is capped. The returned point always lies exactly inside the box.
pub fn bvls_unit_box(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut state = vec![Bound::Lower; n];
    let scale = a.amax().max(f64::MIN_POSITIVE) * (b.amax() + a.amax());
    let grad_tol = 1e-13 * scale.max(f64::MIN_POSITIVE);
    let max_outer = 20 * n + 20;
    let mut excluded = vec![false; n];

    for _ in 0..max_outer {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&j| !excluded[j])
            .filter_map(|j| match state[j] {
                Bound::Lower if w[j] > grad_tol => Some((j, w[j])),
                Bound::Upper if w[j] < -grad_tol => Some((j, -w[j])),
                _ => None,
            })
            .fold(None, |best: Option<(usize, f64)>, c| match best {
                Some(bb) if bb.1 >= c.1 => Some(bb),
                _ => Some(c),
            });
        let Some((j, _)) = candidate else { break };
        let from = state[j];
        state[j] = Bound::Free;
        let mut first = true;

        loop {
            let free: Vec<usize> = (0..n).filter(|&k| state[k] == Bound::Free).collect();
            let fixed_contrib = a * x.map_with_location(|k, _, v| if state[k] == Bound::Free { 0.0 } else { v });
            let z = solve_free(a, &(b - fixed_contrib), &free);
            if first {
                first = false;
                let zj = z[free.iter().position(|&k| k == j).unwrap_or(0)];
                let wrong_way = match from {
                    Bound::Lower => zj <= 0.0,
                    Bound::Upper => zj >= 1.0,
                    Bound::Free => false,
                };
                if wrong_way {
                    // Numerically unhelpful; leave j where it was and try another.
                    state[j] = from;
                    excluded[j] = true;
                    break;
                }
            }
            if z.iter().all(|&v| v > 0.0 && v < 1.0) {
                for (slot, &k) in free.iter().enumerate() {
                    x[k] = z[slot];
                }
                excluded.fill(false);
                break;
            }
            // Step towards z until the first free variable hits a bound.
            let mut alpha = 1.0;
            let mut hit = free[0];
            for (slot, &k) in free.iter().enumerate() {
                let (xk, zk) = (x[k], z[slot]);
                let t = if zk <= 0.0 {
                    xk / (xk - zk)
                } else if zk >= 1.0 {
                    (1.0 - xk) / (zk - xk)
                } else {
                    continue;
                };
                let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
                if t < alpha {
                    alpha = t;
                    hit = k;
                }
            }
            for (slot, &k) in free.iter().enumerate() {
                x[k] += alpha * (z[slot] - x[k]);
            }
            for &k in &free {
                if k == hit || x[k] <= 1e-14 || x[k] >= 1.0 - 1e-14 {
                    let to_upper = if k == hit { x[k] >= 0.5 } else { x[k] >= 1.0 - 1e-14 };
                    state[k] = if to_upper { Bound::Upper } else { Bound::Lower };
                    x[k] = if to_upper { 1.0 } else { 0.0 };
                }
            }
            excluded.fill(false);
            if !state.contains(&Bound::Free) {
                break;
            }
        }
    }
    x.map(|v| v.clamp(0.0, 1.0))
}
