//! Runs experiment configs through the bench harness and tabulates them,
//! the same path the `ev-alsac run` and `compare` subcommands take.
//!
//! cargo run --release --example run_experiment [config.toml ...]
//!
//! Defaults to the two MPC configs under examples/configs.

use std::path::PathBuf;

use ev_alsac::bench;

fn main() {
    let mut configs: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    if configs.is_empty() {
        let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/configs");
        configs = vec![dir.join("mpc_ideal.toml"), dir.join("mpc_forecast.toml")];
    }

    let mut manifests = Vec::new();
    for path in &configs {
        match bench::run(path) {
            Ok(record) => {
                println!(
                    "{}: {} cost {:?} violation {:?} in {:.1} s",
                    path.display(),
                    record.label,
                    record.avg_cost_eur,
                    record.avg_violation_kwh,
                    record.wall_clock_seconds
                );
                let cfg = bench::ExperimentConfig::load(path).expect("config loaded once already");
                manifests.push(cfg.output_dir().join("manifest.json"));
            }
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                std::process::exit(e.exit_code());
            }
        }
    }
    // runs on different data cannot share a table; show each on its own
    for m in &manifests {
        let out = std::env::temp_dir().join("ev_alsac_comparison.csv");
        match bench::compare(std::slice::from_ref(m), &out) {
            Ok(text) => println!("\n{text}"),
            Err(e) => eprintln!("{e}"),
        }
    }
}
