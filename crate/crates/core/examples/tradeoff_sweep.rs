//! Sweeps the communication/sensing weight and prints the mean worst-case
//! SINR and SCNR per value.
//!
//! ```text
//! cargo run --release --example tradeoff_sweep -- 5 out/tradeoff
//! ```

use std::path::PathBuf;

use polarisac::bench::{summarize, sweep_tradeoff};
use polarisac::{Hyperparams, ScenarioConfig};

fn main() -> polarisac::Result<()> {
    let mut args = std::env::args().skip(1);
    let trials = args.next().and_then(|s| s.parse().ok()).unwrap_or(3);
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("polarisac-tradeoff"));

    let base = ScenarioConfig { seed: 5, ..ScenarioConfig::desk() };
    let rho = [0.0, 0.25, 0.5, 0.75, 1.0];
    let rows = sweep_tradeoff(&base, &Hyperparams::default(), &rho, trials, &out, 0)?;
    println!("{:>5} {:>10} {:>10}", "rho", "SINR dB", "SCNR dB");
    for s in summarize(&rows)? {
        println!("{:>5} {:>10.2} {:>10.2}", s.sweep_value.unwrap_or(f64::NAN), s.mean_min_sinr_db, s.mean_min_scnr_db);
    }
    println!("rows in {}", out.join("rows.csv").display());
    Ok(())
}
