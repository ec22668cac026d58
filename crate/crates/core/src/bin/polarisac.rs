use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use polarisac::bench::{self, Method};
use polarisac::config::{ConfigDocument, Preset};
use polarisac::scenario::ScenarioConfig;
use polarisac::solver::TraceEvent;
use polarisac::{Error, Result};

const GRADCHECK_TOL: f64 = 1e-5;

#[derive(Parser)]
#[command(name = "polarisac", version, about = "Max-min SINR/SCNR beamforming for polarimetric ISAC")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML document with [scenario], [solver] and [plan] sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in configuration used when no --config is given.
    #[arg(long, value_enum, default_value = "desk")]
    preset: Preset,
    /// Master seed (overrides scenario.seed).
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn document(&self) -> Result<ConfigDocument> {
        let mut doc = match &self.config {
            Some(path) => ConfigDocument::load(path)?,
            None => ConfigDocument::preset(self.preset),
        };
        if let Some(seed) = self.seed {
            doc.scenario.seed = seed;
        }
        Ok(doc)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve one trial, print its result row and write the trace.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "ep_prmgd")]
        method: Method,
        /// Directory for trace.jsonl and point.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the plan of a config document (methods x sweep values x trials).
    Campaign {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<usize>,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// EP-PRMGD over the trade-off grid rho = 0, 0.1, ..., 1.
    SweepTradeoff {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long, default_value = "out/tradeoff")]
        out: PathBuf,
        /// Custom rho values instead of the 0.1-step grid.
        #[arg(long, value_delimiter = ',')]
        rho: Option<Vec<f64>>,
    },
    /// Compare analytic gradients with central finite differences.
    Gradcheck {
        /// TOML document; only [scenario] is used. Defaults to a 4-antenna scenario.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of random instances per smoothing value.
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long, default_value_t = 0.08)]
        lambda: f64,
        #[arg(long, value_delimiter = ',', default_value = "1.5,0.01")]
        mu: Vec<f64>,
    },
    /// Mean and standard error per method and sweep value of a rows.csv.
    Summarize {
        rows: PathBuf,
        /// Output CSV (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { common, method, out } => {
            let doc = common.document()?;
            let mut trace_file = match &out {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    Some(std::io::BufWriter::new(std::fs::File::create(dir.join("trace.jsonl"))?))
                }
                None => None,
            };
            let mut write_err = None;
            let mut observer = |e: &TraceEvent| {
                if let Some(f) = trace_file.as_mut() {
                    let line = serde_json::to_string(e).map_err(Error::from);
                    if let Err(err) = line.and_then(|l| writeln!(f, "{l}").and_then(|_| f.flush()).map_err(Error::from)) {
                        write_err.get_or_insert(err);
                    }
                }
            };
            let seed = doc.scenario.seed;
            let output = bench::run_single_observed(&doc.scenario, &doc.solver, seed, method, &mut observer)?;
            if let Some(err) = write_err {
                return Err(err);
            }
            if let Some(dir) = &out {
                std::fs::write(dir.join("point.txt"), output.point.to_text())?;
            }
            println!("{}", serde_json::to_string_pretty(&output.row)?);
            println!("wall_time_s: {:.3}", output.row.wall_time_s);
        }
        Command::Campaign { common, trials, workers, out } => {
            let mut plan = common.document()?.plan();
            if let Some(t) = trials {
                plan.n_trials = t;
            }
            if let Some(dir) = out {
                plan.output_dir = dir;
            }
            let rows = bench::run_campaign(&plan, workers)?;
            let failed = rows.iter().filter(|r| !r.is_ok()).count();
            println!("{} rows written to {} ({failed} failed)", rows.len(), plan.output_dir.display());
            print_summary(&rows)?;
        }
        Command::SweepTradeoff { common, trials, workers, out, rho } => {
            let doc = common.document()?;
            let grid = rho.unwrap_or_else(bench::rho_grid);
            let rows = bench::sweep_tradeoff(&doc.scenario, &doc.solver, &grid, trials, &out, workers)?;
            println!("{} rows written to {}", rows.len(), out.display());
            print_summary(&rows)?;
        }
        Command::Gradcheck { config, seed, trials, lambda, mu } => {
            let cfg = match config {
                Some(path) => ConfigDocument::load(&path)?.scenario,
                None => ScenarioConfig::gradcheck(),
            };
            println!("{:>6} {:>9} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}", "seed", "mu", "W", "p_tx", "p_rx", "p_users", "F", "a", "b");
            let mut worst = 0f64;
            for &m in &mu {
                for i in 0..trials as u64 {
                    let e = bench::gradient_check(&cfg, seed + i, lambda, m, 1e-6)?;
                    worst = worst.max(e.max());
                    let cols: Vec<String> = e.entries().iter().map(|(_, v)| format!("{v:>10.2e}")).collect();
                    println!("{:>6} {:>9.2e} {}", seed + i, m, cols.join(" "));
                }
            }
            let ok = worst <= GRADCHECK_TOL;
            println!("max relative error {worst:.3e} (tolerance {GRADCHECK_TOL:.0e}): {}", if ok { "PASS" } else { "FAIL" });
            if !ok {
                return Ok(ExitCode::from(3));
            }
        }
        Command::Summarize { rows, out } => {
            let rows = bench::read_rows(&rows)?;
            let summary = bench::summarize(&rows)?;
            match out {
                Some(path) => bench::write_summary(&path, &summary)?,
                None => {
                    let mut w = csv::Writer::from_writer(std::io::stdout());
                    for s in &summary {
                        w.serialize(s)?;
                    }
                    w.flush()?;
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn print_summary(rows: &[bench::ResultRow]) -> Result<()> {
    let Ok(summary) = bench::summarize(rows) else { return Ok(()) };
    println!("{:<9} {:>8} {:>4} {:>16} {:>16}", "method", "value", "n", "min SINR [dB]", "min SCNR [dB]");
    for s in summary {
        let value = s.sweep_value.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
        println!(
            "{:<9} {:>8} {:>4} {:>8.2} ± {:<5.2} {:>8.2} ± {:<5.2}",
            s.method.name(),
            value,
            s.n,
            s.mean_min_sinr_db,
            s.stderr_min_sinr_db,
            s.mean_min_scnr_db,
            s.stderr_min_scnr_db
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let validation = e.is_validation() || matches!(e, Error::Io(_) | Error::Csv(_) | Error::Json(_));
            ExitCode::from(if validation { 1 } else { 2 })
        }
    }
}
