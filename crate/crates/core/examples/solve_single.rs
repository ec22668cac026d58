//! Runs the exact-penalty solver on one desk-scale instance and prints the
//! outer-loop trace.

use polarisac::manifold::random_point;
use polarisac::solver::{ep_prmgd_observed, TraceEvent};
use polarisac::{metric_report, sample_scenario, Hyperparams, ScenarioConfig};

fn main() -> polarisac::Result<()> {
    let cfg = ScenarioConfig { seed: 11, ..ScenarioConfig::desk() };
    let hyper = Hyperparams::default();
    let channels = sample_scenario(&cfg)?;
    let start = random_point(&cfg, cfg.seed);

    let before = metric_report(&start, &channels, &cfg)?;
    println!("start: min SINR {:.2} dB, min SCNR {:.2} dB", before.min_sinr_db(), before.min_scnr_db());

    println!("{:>3} {:>8} {:>9} {:>9} {:>10} {:>10} {:>5}", "j", "lambda", "mu", "V_max", "SINR dB", "SCNR dB", "iters");
    let mut print_outer = |e: &TraceEvent| {
        if let TraceEvent::Outer(r) = e {
            println!(
                "{:>3} {:>8.3} {:>9.2e} {:>9.2e} {:>10.3} {:>10.3} {:>5}",
                r.outer,
                r.lambda,
                r.mu,
                r.v_max,
                10.0 * r.min_sinr.log10(),
                10.0 * r.min_scnr.log10(),
                r.inner_iters
            );
        }
    };
    let (x, trace) = ep_prmgd_observed(&cfg, &channels, &hyper, &start, &mut print_outer)?;

    let after = metric_report(&x, &channels, &cfg)?;
    println!("end:   min SINR {:.2} dB, min SCNR {:.2} dB", after.min_sinr_db(), after.min_scnr_db());
    println!("slacks a = {:.4}, b = {:.4}; {} inner steps", x.a, x.b, trace.inner.len());
    Ok(())
}
