//! A seeded Monte-Carlo campaign described by a TOML document. Rows are
//! written in a fixed order, so any worker count yields identical files.

use polarisac::bench::run_campaign;
use polarisac::config::ConfigDocument;

const DOC: &str = r#"
[scenario]
m_tx = 6
m_rx = 6
n_users = 2
n_radar_streams = 2
n_targets = 2
n_clutter = 2
seed = 42

[solver]
i_inner = 60
i_outer = 12

[plan]
sweep_axis = "snr_db"
sweep_values = [0.0, 10.0]
n_trials = 3
methods = ["ep_prmgd", "fp_fb"]
"#;

fn main() -> polarisac::Result<()> {
    let mut doc = ConfigDocument::from_toml(DOC)?;
    doc.plan.output_dir = std::env::temp_dir().join("polarisac-campaign");
    let plan = doc.plan();
    let rows = run_campaign(&plan, 0)?;
    for r in &rows {
        println!(
            "{:<9} snr {:>4} trial {} seed {:>20}: SINR {:>7.2} dB, SCNR {:>7.2} dB [{}]",
            r.method.name(),
            r.sweep_value.unwrap_or(f64::NAN),
            r.trial,
            r.seed,
            r.min_sinr_db,
            r.min_scnr_db,
            r.status
        );
    }
    println!("{}", std::fs::read_to_string(plan.output_dir.join("summary.csv"))?);
    Ok(())
}
