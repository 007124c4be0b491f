//! Same-seed comparison of the compensated controller against plain PID while
//! the arm swings, printed as a per-axis metric table.
//!
//! ```bash
//! cargo run --example compensation_ablation
//! cargo run --example compensation_ablation -- t2
//! ```

use std::path::Path;

use aeromanip::cli::cmd_compare;
use aeromanip::control::ControlMode;

fn main() -> aeromanip::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let name = std::env::args().nth(1).unwrap_or_else(|| "t1".into());
    let cmp = cmd_compare(
        &root.join("configs/models/default_hexa.toml"),
        &root.join(format!("configs/scenarios/{name}.toml")),
        &[ControlMode::DcPid, ControlMode::PlainPid],
        None,
        None,
    )?;
    println!("scenario {}", cmp.scenario);
    print!("{}", cmp.table());
    Ok(())
}
