//! Holds position while tilted, which only a fully actuated rotor layout can
//! do. Runs H1 on the tilted hexa and reports the tilt error and the
//! translational drift.
//!
//! ```bash
//! cargo run --example tilted_hover
//! ```

use std::path::Path;

use aeromanip::allocation::actuation_rank;
use aeromanip::config::{load_model, load_scenario};
use aeromanip::sim::run_scenario;
use aeromanip::spatial::log_so3;

fn main() -> aeromanip::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let hexa = load_model(&root.join("configs/models/default_hexa.toml"))?;
    let quad = load_model(&root.join("configs/models/flat_quad.toml"))?;
    println!("coupling rank: tilted hexa {}, flat quad {}", actuation_rank(&hexa.rotors).0, actuation_rank(&quad.rotors).0);

    let cfg = load_scenario(&root.join("configs/scenarios/h1.toml"))?;
    let log = run_scenario(&cfg, &hexa)?;
    let hold = cfg.desired_at(0.0);
    println!("\n{:>6} {:>14} {:>12} {:>12}", "t [s]", "tilt err [deg]", "xy dev [mm]", "z dev [mm]");
    for row in log.rows.iter().step_by((0.5 / cfg.dt).round() as usize) {
        let tilt = log_so3(&(hold.rot * row.pose.rot.transpose())).norm().to_degrees();
        let d = row.pose.pos - hold.pos;
        println!("{:>6.2} {tilt:>14.3} {:>12.2} {:>12.2}", row.t, d.x.hypot(d.y) * 1e3, d.z * 1e3);
    }
    Ok(())
}
