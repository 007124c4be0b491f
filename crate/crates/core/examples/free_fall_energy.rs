//! Integrates the unpowered assembly for 2 s and reports energy drift and the
//! largest internal wrench, which vanishes in free fall.
//!
//! ```bash
//! cargo run --example free_fall_energy
//! ```

use std::path::Path;

use aeromanip::config::load_model;
use aeromanip::dynamics::energy;
use aeromanip::kinematics::{JointMotion, Twist};
use aeromanip::sim::{step, Integrator, JointTrajectory, PlantState};
use aeromanip::spatial::{EulerXyz, Pose, Vec3};
use nalgebra::DVector;

fn main() -> aeromanip::Result<()> {
    let model = load_model(&Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/models/default_hexa.toml"))?;
    let q0 = [-90f64.to_radians(), 0.0, -45f64.to_radians(), 0.0];
    let joints = JointMotion::locked(q0);
    let idle = DVector::zeros(model.rotors.len());
    let dt = 1e-3;

    for integrator in [Integrator::SecondOrder, Integrator::Rk4] {
        let mut s = PlantState {
            pose: Pose::from_euler(Vec3::new(9.0, 9.0, 9.0), EulerXyz::new(0.2, -0.1, 0.4)),
            twist: Twist { omega: Vec3::zeros(), vel: Vec3::new(0.5, -0.2, 1.0) },
            t: 0.0,
        };
        let total = |s: &PlantState| -> aeromanip::Result<f64> {
            let (k, p) = energy(&model, &model.kinematics(&s.pose, &s.twist, &joints)?);
            Ok(k + p)
        };
        let e0 = total(&s)?;
        let (mut drift, mut wrench) = (0.0f64, 0.0f64);
        for _ in 0..2000 {
            let (next, sol) = step(&model, &s, &idle, &JointTrajectory::Fixed, &q0, dt, integrator)?;
            s = next;
            drift = drift.max((total(&s)? - e0).abs() / e0.abs());
            wrench = wrench.max(sol.max_internal_wrench());
        }
        println!(
            "{integrator:?}: z {:.4} m after {:.1} s, relative energy drift {drift:.2e}, max internal wrench {wrench:.2e}",
            s.pose.pos.z, s.t
        );
    }
    Ok(())
}
