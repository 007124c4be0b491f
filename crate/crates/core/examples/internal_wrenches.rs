//! Solves the coupled platform and arm equations at hover and prints the
//! wrench each joint transmits, next to the welded-body check of the
//! platform acceleration.
//!
//! ```bash
//! cargo run --example internal_wrenches
//! ```

use std::path::Path;

use aeromanip::config::load_model;
use aeromanip::dynamics::{assemble, composite_oracle, solve_internal, Wrench};
use aeromanip::kinematics::{JointMotion, Twist};
use aeromanip::spatial::{Pose, Vec3};

fn main() -> aeromanip::Result<()> {
    let model = load_model(&Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/models/default_hexa.toml"))?;
    let pose = Pose::from_euler(Vec3::new(9.0, 9.0, 9.0), Default::default());
    let joints = JointMotion::locked([-90f64.to_radians(), -90f64.to_radians(), 0.0, 0.0]);
    let frames = model.kinematics(&pose, &Twist::default(), &joints)?;

    // Pure thrust equal to the total weight: the assembly hovers, the arm's
    // offset centre of mass leaves a residual pitching acceleration.
    let weight = -model.total_mass() * model.gravity;
    let u = Wrench::new(weight, Vec3::zeros());
    let sol = solve_internal(&assemble(&model, &frames, &joints, &u, &Wrench::default()))?;

    println!("total mass {:.3} kg, thrust {:.3} N", model.total_mass(), weight.norm());
    println!("\njoint  force on child [N]                 torque on child [N m]");
    for (i, (f, t)) in sol.force.iter().zip(&sol.torque).enumerate() {
        println!("{:<6} [{:>8.4}, {:>8.4}, {:>8.4}]   [{:>8.4}, {:>8.4}, {:>8.4}]", i + 1, f.x, f.y, f.z, t.x, t.y, t.z);
    }

    let oracle = composite_oracle(&model, &frames, &u, &Wrench::default());
    let a = sol.platform_accel();
    println!("\nplatform acceleration     {:>10.6?}", a.acc.as_slice());
    println!("welded-body acceleration  {:>10.6?}", oracle.acc.as_slice());
    println!("platform angular accel.   {:>10.6?}", a.omega_dot.as_slice());
    println!("welded-body angular accel.{:>10.6?}", oracle.omega_dot.as_slice());
    Ok(())
}
