//! Actuation report of every model file: coupling matrix, rank, condition
//! number and per-axis wrench envelope at hover.
//!
//! ```bash
//! cargo run --example rank_report
//! cargo run --example rank_report -- path/to/model.toml
//! ```

use std::path::{Path, PathBuf};

use aeromanip::cli::cmd_rank;

fn main() -> aeromanip::Result<()> {
    let mut paths: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    if paths.is_empty() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/models");
        paths = ["default_hexa.toml", "flat_quad.toml"].iter().map(|f| dir.join(f)).collect();
    }
    for p in paths {
        println!("== {}", p.display());
        print!("{}", cmd_rank(&p)?);
        println!();
    }
    Ok(())
}
