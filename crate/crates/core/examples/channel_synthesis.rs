//! Draws one desk-scale channel realization and prints its structure.
//!
//! ```text
//! cargo run --release --example channel_synthesis -- 7
//! ```

use polarisac::scenario::{depolarization_matrix, steering_vector};
use polarisac::{sample_scenario, ScenarioConfig};

fn main() -> polarisac::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let cfg = ScenarioConfig { seed, ..ScenarioConfig::desk() };
    cfg.validate()?;
    let ch = sample_scenario(&cfg)?;

    println!("seed {seed}: {} users, {} targets, {} clutter", cfg.n_users, cfg.n_targets, cfg.n_clutter);
    for (k, h) in ch.comm.iter().enumerate() {
        println!("  H_{k}: {}x{}  |H|_F = {:.3}", h.nrows(), h.ncols(), h.norm());
    }
    for (q, (g, theta)) in ch.sensing.iter().zip(&ch.object_angles).enumerate() {
        let kind = if q < cfg.n_targets { "target" } else { "clutter" };
        println!("  G_{q} ({kind:7}) at {:+6.1} deg: |G|_F = {:.3}", theta.to_degrees(), g.norm());
    }

    // Cross-polar leakage of a single path with zero phases.
    let d = depolarization_matrix(cfg.xpd, [0.0; 4])?;
    println!("depolarization (xpd = {}):", cfg.xpd);
    for r in 0..2 {
        println!("  [{:.3}  {:.3}]", d[(r, 0)].norm(), d[(r, 1)].norm());
    }

    let a = steering_vector(cfg.m_tx, cfg.element_spacing_wavelengths, 0.3)?;
    println!("steering vector at 0.3 rad: |a|^2 = {:.3} (= M_tx)", a.norm_squared());
    Ok(())
}
