//! Forward kinematics and the velocity recursion of the default arm.
//!
//! ```bash
//! cargo run --example kinematics_tour
//! ```

use std::path::Path;

use aeromanip::config::load_model;
use aeromanip::kinematics::{forward_kinematics, velocity_recursion, JointVec, Twist};
use aeromanip::spatial::{rot_to_euler, EulerXyz, Pose, Vec3};

fn main() -> aeromanip::Result<()> {
    let model = load_model(&Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/models/default_hexa.toml"))?;
    let platform = Pose::from_euler(Vec3::new(9.0, 9.0, 9.0), EulerXyz::from_degrees([0.0, 0.0, 30.0]));

    let configs: [(&str, [f64; 4]); 4] = [
        ("folded", [0.0, 0.0, 0.0, 0.0]),
        ("P1", [-90.0, -90.0, 0.0, 0.0]),
        ("P3", [0.0, 0.0, -90.0, 0.0]),
        ("reaching", [45.0, -30.0, -60.0, 20.0]),
    ];
    println!("{:<10} {:>30} {:>30}", "joints", "end effector [m]", "end effector XYZ euler [deg]");
    for (name, deg) in configs {
        let q: JointVec = deg.map(f64::to_radians);
        let fs = forward_kinematics(&model.arm, &model.link_coms(), &platform, &q)?;
        let ee = fs.end_effector();
        let e = rot_to_euler(&ee.rot).angles.to_degrees();
        println!(
            "{name:<10} [{:>8.4}, {:>8.4}, {:>8.4}] [{:>8.2}, {:>8.2}, {:>8.2}]",
            ee.pos.x, ee.pos.y, ee.pos.z, e[0], e[1], e[2]
        );
    }

    // Platform yawing at 1 rad/s while joint 3 swings at 0.5 rad/s.
    let q: JointVec = [-90f64.to_radians(), 0.0, -45f64.to_radians(), 0.0];
    let fs = forward_kinematics(&model.arm, &model.link_coms(), &platform, &q)?;
    let twist = Twist { omega: Vec3::new(0.0, 0.0, 1.0), vel: Vec3::new(0.2, 0.0, 0.0) };
    let fs = velocity_recursion(fs, &twist, &[0.0, 0.0, 0.5, 0.0]);
    println!("\nframe  angular velocity [rad/s]            origin velocity [m/s]");
    for (i, f) in fs.frames.iter().enumerate() {
        let label = if i == 0 { "A".to_string() } else { i.to_string() };
        println!(
            "{label:<6} [{:>7.3}, {:>7.3}, {:>7.3}]   [{:>7.3}, {:>7.3}, {:>7.3}]",
            f.omega.x, f.omega.y, f.omega.z, f.vel.x, f.vel.y, f.vel.z
        );
    }
    Ok(())
}
