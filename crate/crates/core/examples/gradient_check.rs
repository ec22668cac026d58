//! Compares the closed-form gradient with central finite differences block by block.

use polarisac::bench::gradient_check;
use polarisac::ScenarioConfig;

fn main() -> polarisac::Result<()> {
    let cfg = ScenarioConfig::gradcheck();
    let mut worst = 0f64;
    for mu in [1.5, 1e-2] {
        for seed in 0..4 {
            let e = gradient_check(&cfg, seed, 0.08, mu, 1e-6)?;
            let cols: Vec<String> = e.entries().iter().map(|(name, v)| format!("{name} {v:.1e}")).collect();
            println!("mu {mu:<5} seed {seed}: {}", cols.join("  "));
            worst = worst.max(e.max());
        }
    }
    println!("worst relative error {worst:.2e}");
    Ok(())
}
