//! Small-scenario solver behavior: violation below the final tolerance and
//! the inner-loop exit contract.

use polarisac::bench::{run_single, Method};
use polarisac::{Hyperparams, ScenarioConfig};

#[test]
fn small_scenario_reaches_the_violation_tolerance() {
    let hyper = Hyperparams::default();
    let mut eps_met = 0;
    let mut outer_total = 0;
    for seed in 0..4 {
        let cfg = ScenarioConfig { seed, ..ScenarioConfig::gradcheck() };
        let out = run_single(&cfg, &hyper, seed, Method::EpPrmgd).unwrap();
        assert!(out.row.v_max_final <= hyper.sigma_min, "seed {seed}: V_max {}", out.row.v_max_final);
        assert!(out.row.outer_iters <= hyper.i_outer);
        for r in &out.trace.outer {
            // Every inner run ends at the tolerance, at its budget, or in a stall.
            assert!(r.final_grad_norm <= r.eps || r.inner_iters == hyper.i_inner || r.stalled);
            if r.final_grad_norm <= r.eps {
                eps_met += 1;
            }
            outer_total += 1;
        }
        let last = out.trace.outer.last().unwrap();
        println!(
            "seed {seed}: V_max {:.1e}, last inner exit |grad| {:.2e} vs eps {:.1e} after {} steps",
            last.v_max, last.final_grad_norm, last.eps, last.inner_iters
        );
    }
    println!("inner runs ending at their gradient tolerance: {eps_met}/{outer_total}");
}
