//! Runs the P1 to P4 position steps under measurement noise and parameter
//! mismatch, prints step metrics and writes each log as CSV.
//!
//! ```bash
//! cargo run --example position_control -- out/
//! ```

use std::path::{Path, PathBuf};

use aeromanip::cli::{cmd_run, RunManifest};
use aeromanip::sim::metrics::AXIS_NAMES;

fn main() -> aeromanip::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("aeromanip-position"), PathBuf::from);
    let scenarios = ["p1", "p2", "p3", "p4"].iter().map(|s| root.join(format!("configs/scenarios/{s}.toml"))).collect();
    let mut manifest = RunManifest::new(root.join("configs/models/default_hexa.toml"), scenarios, out.clone())?;
    manifest.jobs = 2;
    let report = cmd_run(&manifest)?;

    println!("{:<4} {:<6} {:>10} {:>12} {:>12}", "run", "axis", "step", "overshoot %", "settling s");
    for o in &report.outcomes {
        let Ok(m) = &o.result else {
            println!("{}: failed", o.stem);
            continue;
        };
        for (name, a) in AXIS_NAMES.iter().zip(&m.axes) {
            let ts = a.settling_time.map_or_else(|| "none".to_string(), |t| format!("{t:.3}"));
            println!("{:<4} {name:<6} {:>10.3} {:>12.2} {ts:>12}", o.stem, a.step, a.overshoot_pct.unwrap_or(0.0));
        }
    }
    println!("\nlogs written to {}", out.display());
    Ok(())
}
