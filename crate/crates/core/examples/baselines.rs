//! The solver next to its two baselines on the same channels and start:
//! fixed polarization (`fp_fb`) and the weighted sum objective (`pr_wofb`).

use polarisac::bench::{run_single, Method};
use polarisac::{Hyperparams, ScenarioConfig};

fn main() -> polarisac::Result<()> {
    let cfg = ScenarioConfig::desk();
    let hyper = Hyperparams::default();
    println!("{:>4} {:<9} {:>10} {:>10} {:>10}", "seed", "method", "SINR dB", "SCNR dB", "J");
    for seed in 0..3 {
        for method in Method::ALL {
            let out = run_single(&cfg, &hyper, seed, method)?;
            let j = (1.0 - cfg.rho) * out.report.min_sinr + cfg.rho * out.report.min_scnr;
            println!(
                "{seed:>4} {:<9} {:>10.2} {:>10.2} {:>10.3}",
                method.name(),
                out.row.min_sinr_db,
                out.row.min_scnr_db,
                j
            );
        }
    }
    Ok(())
}
