//! Run every stage from a TOML config and list what it wrote.
//!
//! cargo run --release --example full_pipeline [config.toml]

use std::path::{Path, PathBuf};

use diachron::pipeline::{run_pipeline, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path: PathBuf = std::env::args()
        .nth(1)
        .map_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini/config.toml"), PathBuf::from);
    let mut config = RunConfig::load(&path)?;
    let out = std::env::temp_dir().join("diachron-full-pipeline");
    let _ = std::fs::remove_dir_all(&out);
    config.output_dir = Some(out.clone());

    let report = match run_pipeline(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("pipeline failed: {e}");
            std::process::exit(e.exit_code());
        }
    };
    println!("config hash {}", report.config_hash);
    for t in &report.stage_times {
        println!("  {:<10} {:>7.2} s", t.stage, t.seconds);
    }
    for w in &report.warnings {
        println!("warning: {w}");
    }
    for o in &report.outputs {
        println!("wrote {o}");
    }
    print!("\n{}", std::fs::read_to_string(out.join("weat.csv"))?);
    Ok(())
}
