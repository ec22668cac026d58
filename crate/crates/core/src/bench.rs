//! Single runs, seeded Monte-Carlo campaigns, sweeps and summaries.
//!
//! Seeds: trial `i` of a campaign with master seed `s` uses
//! `derive_seed(s, [TRIAL, i])` for both the channel draw and the starting
//! point. Every method and every sweep value of the same trial therefore
//! sees the same random draws, which makes per-trial differences between
//! methods (or between sweep values) paired comparisons.
//!
//! Campaign output (`output_dir`):
//!
//! | file          | content                                                       |
//! |---------------|---------------------------------------------------------------|
//! | `rows.csv`    | one [`ResultRow`] per (method, sweep value, trial), fixed order |
//! | `timings.csv` | wall time of each row, same order                             |
//! | `summary.csv` | [`SummaryRow`] per (method, sweep value)                      |

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gradients::{euclidean_gradient, finite_difference_gradient, BlockErrors};
use crate::manifold::{random_point, ProductPoint};
use crate::objective::{violation_from_metrics, EffectiveLinks, MetricReport};
use crate::rng::{derive_seed, TAG_TRIAL};
use crate::scenario::{linear_to_db, sample_scenario, ScenarioConfig};
use crate::solver::{ep_prmgd_observed, solve_fixed_polarization, solve_sum_objective, Hyperparams, SolveTrace};
use crate::solver::TraceEvent;
use crate::{Error, Pol, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Joint design with optimized polarization.
    #[value(name = "ep_prmgd")]
    EpPrmgd,
    /// Same solver with every combiner fixed at the equal split.
    #[value(name = "fp_fb")]
    FpFb,
    /// Optimized polarization, averaged sum objective without fairness.
    #[value(name = "pr_wofb")]
    PrWofb,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::EpPrmgd, Method::FpFb, Method::PrWofb];

    pub fn name(self) -> &'static str {
        match self {
            Method::EpPrmgd => "ep_prmgd",
            Method::FpFb => "fp_fb",
            Method::PrWofb => "pr_wofb",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// `m_tx = m_rx = value`.
    Antennas,
    /// Transmit SNR in dB: `power_dbm = noise_user_dbm + value`.
    #[value(name = "snr_db")]
    SnrDb,
    Users,
    Targets,
    Rho,
    #[default]
    None,
}

impl SweepAxis {
    /// The scenario at one sweep value.
    pub fn apply(self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let count = |field: &str| -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 && value < 1e6 {
                Ok(value as usize)
            } else {
                Err(Error::Config(format!("plan.sweep_values: {field} sweep needs positive integers, got {value}")))
            }
        };
        let mut cfg = base.clone();
        match self {
            SweepAxis::Antennas => {
                let m = count("antenna")?;
                cfg.m_tx = m;
                cfg.m_rx = m;
            }
            SweepAxis::SnrDb => cfg.power_dbm = cfg.noise_user_dbm + value,
            SweepAxis::Users => cfg.n_users = count("user")?,
            SweepAxis::Targets => cfg.n_targets = count("target")?,
            SweepAxis::Rho => cfg.rho = value,
            SweepAxis::None => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A full campaign: methods x sweep values x trials.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    /// Base scenario; its `seed` is the campaign's master seed.
    pub scenario: ScenarioConfig,
    pub hyper: Hyperparams,
    pub sweep_axis: SweepAxis,
    pub sweep_values: Vec<f64>,
    pub n_trials: usize,
    pub methods: Vec<Method>,
    pub output_dir: PathBuf,
}

impl ExperimentPlan {
    pub fn new(scenario: ScenarioConfig, hyper: Hyperparams, n_trials: usize) -> Self {
        Self {
            scenario,
            hyper,
            sweep_axis: SweepAxis::None,
            sweep_values: Vec::new(),
            n_trials,
            methods: Method::ALL.to_vec(),
            output_dir: PathBuf::from("out"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.hyper.validate()?;
        if self.n_trials == 0 {
            return Err(Error::Config("plan.n_trials must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("plan.methods must not be empty".into()));
        }
        match self.sweep_axis {
            SweepAxis::None if !self.sweep_values.is_empty() => {
                Err(Error::Config("plan.sweep_values must be empty when sweep_axis = \"none\"".into()))
            }
            SweepAxis::None => Ok(()),
            _ if self.sweep_values.is_empty() => {
                Err(Error::Config("plan.sweep_values must not be empty for a sweep".into()))
            }
            axis => self.sweep_values.iter().try_for_each(|&v| axis.apply(&self.scenario, v).map(|_| ())),
        }
    }

    /// `(value, scenario)` per sweep cell; a single `(None, base)` cell without a sweep.
    pub fn cells(&self) -> Result<Vec<(Option<f64>, ScenarioConfig)>> {
        if self.sweep_axis == SweepAxis::None {
            return Ok(vec![(None, self.scenario.clone())]);
        }
        self.sweep_values
            .iter()
            .map(|&v| Ok((Some(v), self.sweep_axis.apply(&self.scenario, v)?)))
            .collect()
    }

    pub fn n_rows(&self) -> usize {
        let cells = if self.sweep_axis == SweepAxis::None { 1 } else { self.sweep_values.len() };
        self.methods.len() * cells * self.n_trials
    }
}

/// Seed of trial `trial` under master seed `master`.
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    derive_seed(master, &[TAG_TRIAL, trial as u64])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: Method,
    pub sweep_value: Option<f64>,
    pub trial: usize,
    pub seed: u64,
    /// `ok`, or the error that ended the run.
    pub status: String,
    pub min_sinr_db: f64,
    pub min_scnr_db: f64,
    pub final_a: f64,
    pub final_b: f64,
    pub v_max_final: f64,
    pub outer_iters: usize,
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    fn failed(method: Method, sweep_value: Option<f64>, trial: usize, seed: u64, err: &Error) -> Self {
        Self {
            method,
            sweep_value,
            trial,
            seed,
            status: err.to_string(),
            min_sinr_db: f64::NAN,
            min_scnr_db: f64::NAN,
            final_a: f64::NAN,
            final_b: f64::NAN,
            v_max_final: f64::NAN,
            outer_iters: 0,
            wall_time_s: 0.0,
        }
    }
}

/// Outcome of [`run_single`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub row: ResultRow,
    pub trace: SolveTrace,
    pub point: ProductPoint,
    pub report: MetricReport,
}

/// Samples channels and a starting point from `seed` and solves with `method`.
pub fn run_single(cfg: &ScenarioConfig, hyper: &Hyperparams, seed: u64, method: Method) -> Result<RunOutput> {
    run_single_observed(cfg, hyper, seed, method, &mut |_| {})
}

/// [`run_single`] with trace records streamed to `observer`.
pub fn run_single_observed(
    cfg: &ScenarioConfig,
    hyper: &Hyperparams,
    seed: u64,
    method: Method,
    observer: &mut dyn FnMut(&TraceEvent),
) -> Result<RunOutput> {
    cfg.validate()?;
    hyper.validate()?;
    let cfg = ScenarioConfig { seed, ..cfg.clone() };
    let start_clock = Instant::now();
    let channels = sample_scenario(&cfg)?;
    let start = random_point(&cfg, seed);
    let (point, trace) = match method {
        Method::EpPrmgd => ep_prmgd_observed(&cfg, &channels, hyper, &start, observer)?,
        Method::FpFb => solve_fixed_polarization(&cfg, &channels, hyper, &start, observer)?,
        Method::PrWofb => solve_sum_objective(&cfg, &channels, hyper, &start, observer)?,
    };
    let links = EffectiveLinks::new(&point, &channels, &cfg)?;
    let report = MetricReport::from_links(&links);
    let row = ResultRow {
        method,
        sweep_value: None,
        trial: 0,
        seed,
        status: "ok".into(),
        min_sinr_db: linear_to_db(report.min_sinr),
        min_scnr_db: linear_to_db(report.min_scnr),
        final_a: point.a,
        final_b: point.b,
        v_max_final: violation_from_metrics(&links.sinr, &links.scnr, point.a, point.b),
        outer_iters: trace.outer.len(),
        wall_time_s: start_clock.elapsed().as_secs_f64(),
    };
    if !(row.min_sinr_db.is_finite() || report.min_sinr == 0.0) || !row.v_max_final.is_finite() {
        return Err(Error::Domain(format!("non-finite metrics for seed {seed}")));
    }
    Ok(RunOutput { row, trace, point, report })
}

/// Writes rows as they complete, in task order.
struct OrderedSink<W: Write> {
    rows: csv::Writer<W>,
    timings: csv::Writer<W>,
    pending: BTreeMap<usize, ResultRow>,
    next: usize,
    done: Vec<ResultRow>,
}

#[derive(Serialize)]
struct TimingRow<'a> {
    method: Method,
    sweep_value: Option<f64>,
    trial: usize,
    status: &'a str,
    wall_time_s: f64,
}

impl<W: Write> OrderedSink<W> {
    fn push(&mut self, index: usize, row: ResultRow) -> Result<()> {
        self.pending.insert(index, row);
        while let Some(row) = self.pending.remove(&self.next) {
            self.rows.serialize(&row)?;
            self.timings.serialize(TimingRow {
                method: row.method,
                sweep_value: row.sweep_value,
                trial: row.trial,
                status: &row.status,
                wall_time_s: row.wall_time_s,
            })?;
            self.rows.flush()?;
            self.timings.flush()?;
            self.done.push(row);
            self.next += 1;
        }
        Ok(())
    }
}

/// Runs every (method, sweep value, trial) cell on `workers` threads
/// (`0` = all cores) and writes `rows.csv`, `timings.csv` and `summary.csv`.
///
/// Rows are returned and written in the fixed order method, sweep value,
/// trial, regardless of scheduling. A failing cell becomes a row whose
/// `status` holds the error.
pub fn run_campaign(plan: &ExperimentPlan, workers: usize) -> Result<Vec<ResultRow>> {
    plan.validate()?;
    let cells = plan.cells()?;
    std::fs::create_dir_all(&plan.output_dir)?;
    let out = |name: &str| -> Result<csv::Writer<File>> { Ok(csv::Writer::from_path(plan.output_dir.join(name))?) };
    let sink = Mutex::new(OrderedSink {
        rows: out("rows.csv")?,
        timings: out("timings.csv")?,
        pending: BTreeMap::new(),
        next: 0,
        done: Vec::with_capacity(plan.n_rows()),
    });

    let mut tasks = Vec::with_capacity(plan.n_rows());
    for &method in &plan.methods {
        for (value, cfg) in &cells {
            for trial in 0..plan.n_trials {
                tasks.push((method, *value, cfg, trial));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(|| {
        tasks.par_iter().enumerate().try_for_each(|(index, &(method, value, cfg, trial))| {
            let seed = trial_seed(plan.scenario.seed, trial);
            let mut row = match run_single(cfg, &plan.hyper, seed, method) {
                Ok(r) => r.row,
                Err(e) => ResultRow::failed(method, value, trial, seed, &e),
            };
            row.sweep_value = value;
            row.trial = trial;
            sink.lock().expect("result sink poisoned").push(index, row)
        })
    })?;

    let rows = sink.into_inner().expect("result sink poisoned").done;
    if let Ok(summary) = summarize(&rows) {
        write_summary(&plan.output_dir.join("summary.csv"), &summary)?;
    }
    Ok(rows)
}

/// Mean and standard error per (method, sweep value), over successful rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub sweep_value: Option<f64>,
    pub n: usize,
    pub mean_min_sinr_db: f64,
    pub stderr_min_sinr_db: f64,
    pub mean_min_scnr_db: f64,
    pub stderr_min_scnr_db: f64,
}

fn mean_stderr(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Groups are emitted in first-appearance order.
pub fn summarize(rows: &[ResultRow]) -> Result<Vec<SummaryRow>> {
    let mut groups: Vec<((Method, Option<u64>), Vec<&ResultRow>)> = Vec::new();
    for row in rows.iter().filter(|r| r.is_ok()) {
        let key = (row.method, row.sweep_value.map(f64::to_bits));
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, g)) => g.push(row),
            None => groups.push((key, vec![row])),
        }
    }
    if groups.is_empty() {
        return Err(Error::EmptyTable("no successful rows to summarize"));
    }
    Ok(groups
        .into_iter()
        .map(|((method, _), g)| {
            let sinr: Vec<f64> = g.iter().map(|r| r.min_sinr_db).collect();
            let scnr: Vec<f64> = g.iter().map(|r| r.min_scnr_db).collect();
            let (mean_min_sinr_db, stderr_min_sinr_db) = mean_stderr(&sinr);
            let (mean_min_scnr_db, stderr_min_scnr_db) = mean_stderr(&scnr);
            SummaryRow {
                method,
                sweep_value: g[0].sweep_value,
                n: g.len(),
                mean_min_sinr_db,
                stderr_min_sinr_db,
                mean_min_scnr_db,
                stderr_min_scnr_db,
            }
        })
        .collect())
}

pub fn write_summary(path: &Path, summary: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for s in summary {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// EP-PRMGD over a grid of trade-off weights.
pub fn sweep_tradeoff(
    base: &ScenarioConfig,
    hyper: &Hyperparams,
    rho_values: &[f64],
    n_trials: usize,
    output_dir: &Path,
    workers: usize,
) -> Result<Vec<ResultRow>> {
    if let Some(bad) = rho_values.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::Config(format!("rho value {bad} not in [0, 1]")));
    }
    let plan = ExperimentPlan {
        sweep_axis: SweepAxis::Rho,
        sweep_values: rho_values.to_vec(),
        methods: vec![Method::EpPrmgd],
        output_dir: output_dir.to_path_buf(),
        ..ExperimentPlan::new(base.clone(), hyper.clone(), n_trials)
    };
    run_campaign(&plan, workers)
}

/// `{0, 0.1, ..., 1.0}`.
pub fn rho_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

/// Test point for gradient checks: combiners rotated off the equal split,
/// and `a`, `b` placed within a fraction of `mu` of a SINR and a SCNR so the
/// smoothed penalties are in their curved region.
pub fn gradient_check_point(cfg: &ScenarioConfig, seed: u64, mu: f64) -> Result<(crate::ChannelSet, ProductPoint)> {
    let cfg = ScenarioConfig { seed, ..cfg.clone() };
    let channels = sample_scenario(&cfg)?;
    let mut x = random_point(&cfg, seed);
    for (i, p) in x.p_tx.iter_mut().chain(x.p_rx.iter_mut()).chain(x.p_users.iter_mut()).enumerate() {
        let angle = 0.61 * i as f64 + 0.2 * (seed % 32) as f64;
        *p = Pol::new(angle.cos(), angle.sin());
    }
    let l = EffectiveLinks::new(&x, &channels, &cfg)?;
    x.a = l.sinr[0] + 0.5 * mu;
    x.b = l.scnr[l.scnr.len() - 1] - 0.3 * mu;
    Ok((channels, x))
}

/// Analytic versus central-difference gradient at [`gradient_check_point`].
pub fn gradient_check(cfg: &ScenarioConfig, seed: u64, lambda: f64, mu: f64, h: f64) -> Result<BlockErrors> {
    let (channels, x) = gradient_check_point(cfg, seed, mu)?;
    let cfg = ScenarioConfig { seed, ..cfg.clone() };
    let an = euclidean_gradient(&x, &channels, &cfg, lambda, mu)?;
    let fd = finite_difference_gradient(&x, &channels, &cfg, lambda, mu, h)?;
    BlockErrors::between(&an, &fd)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_hyper() -> Hyperparams {
        Hyperparams { i_outer: 3, i_inner: 10, ..Hyperparams::default() }
    }

    fn row(method: Method, v: Option<f64>, sinr: f64, scnr: f64) -> ResultRow {
        ResultRow {
            method,
            sweep_value: v,
            trial: 0,
            seed: 0,
            status: "ok".into(),
            min_sinr_db: sinr,
            min_scnr_db: scnr,
            final_a: 0.0,
            final_b: 0.0,
            v_max_final: 0.0,
            outer_iters: 1,
            wall_time_s: 0.0,
        }
    }

    #[test]
    fn sweep_axes() {
        let base = ScenarioConfig::desk();
        let c = SweepAxis::Antennas.apply(&base, 16.0).unwrap();
        assert_eq!((c.m_tx, c.m_rx), (16, 16));
        let c = SweepAxis::SnrDb.apply(&base, -6.0).unwrap();
        assert_eq!(c.power_dbm, base.noise_user_dbm - 6.0);
        assert_eq!(SweepAxis::Users.apply(&base, 3.0).unwrap().n_users, 3);
        assert_eq!(SweepAxis::Targets.apply(&base, 2.0).unwrap().n_targets, 2);
        assert_eq!(SweepAxis::Rho.apply(&base, 0.2).unwrap().rho, 0.2);
        assert!(SweepAxis::Users.apply(&base, 2.5).is_err());
        assert!(SweepAxis::Antennas.apply(&base, 0.0).is_err());
        assert!(SweepAxis::Rho.apply(&base, 1.2).is_err());
    }

    #[test]
    fn plan_validation_and_counts() {
        let mut plan = ExperimentPlan::new(ScenarioConfig::gradcheck(), tiny_hyper(), 2);
        plan.validate().unwrap();
        assert_eq!(plan.n_rows(), 6);
        plan.sweep_axis = SweepAxis::Rho;
        assert!(plan.validate().is_err());
        plan.sweep_values = vec![0.0, 0.5];
        assert_eq!(plan.n_rows(), 12);
        plan.n_trials = 0;
        assert!(plan.validate().is_err());
    }

    #[test]
    fn trial_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..10_000).map(|t| trial_seed(5, t)).collect();
        assert_eq!(seeds.len(), 10_000);
        assert_ne!(trial_seed(5, 0), trial_seed(6, 0));
    }

    #[test]
    fn run_single_is_deterministic() {
        let cfg = ScenarioConfig::gradcheck();
        let a = run_single(&cfg, &tiny_hyper(), 3, Method::EpPrmgd).unwrap();
        let b = run_single(&cfg, &tiny_hyper(), 3, Method::EpPrmgd).unwrap();
        assert_eq!(ResultRow { wall_time_s: 0.0, ..a.row.clone() }, ResultRow { wall_time_s: 0.0, ..b.row });
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.row.outer_iters, 3);
        assert!(a.row.v_max_final >= 0.0);

        let fp = run_single(&cfg, &tiny_hyper(), 3, Method::FpFb).unwrap();
        for p in fp.point.p_tx.iter().chain(&fp.point.p_rx).chain(&fp.point.p_users) {
            assert_eq!(*p, crate::manifold::equal_split());
        }
    }

    #[test]
    fn summary_arithmetic() {
        let s = summarize(&[row(Method::FpFb, None, 2.0, -1.0)]).unwrap();
        assert_eq!((s[0].mean_min_sinr_db, s[0].stderr_min_sinr_db, s[0].n), (2.0, 0.0, 1));

        let s = summarize(&[row(Method::FpFb, None, 2.0, 1.0), row(Method::FpFb, None, 2.0, 1.0)]).unwrap();
        assert_eq!((s[0].mean_min_sinr_db, s[0].stderr_min_sinr_db), (2.0, 0.0));

        // values 1, 2, 6: mean 3, sample variance 7, stderr sqrt(7/3)
        let rows = [
            row(Method::EpPrmgd, Some(0.5), 1.0, 0.0),
            row(Method::EpPrmgd, Some(0.5), 2.0, 0.0),
            row(Method::EpPrmgd, Some(0.5), 6.0, 0.0),
            row(Method::PrWofb, Some(0.5), 4.0, 0.0),
        ];
        let s = summarize(&rows).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].mean_min_sinr_db, 3.0);
        assert!((s[0].stderr_min_sinr_db - (7.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(s[1].method, Method::PrWofb);

        assert!(matches!(summarize(&[]), Err(Error::EmptyTable(_))));
        let mut bad = row(Method::FpFb, None, 0.0, 0.0);
        bad.status = "failed".into();
        assert!(summarize(&[bad]).is_err());
    }

    #[test]
    fn campaign_rows_and_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut plan = ExperimentPlan::new(ScenarioConfig::gradcheck(), tiny_hyper(), 1);
        plan.methods = vec![Method::EpPrmgd];
        plan.output_dir = dir.path().to_path_buf();
        let rows = run_campaign(&plan, 1).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].is_ok());
        let back = read_rows(&dir.path().join("rows.csv")).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].min_sinr_db, rows[0].min_sinr_db);
        assert!(dir.path().join("summary.csv").exists());
        assert!(dir.path().join("timings.csv").exists());

        plan.methods = Method::ALL.to_vec();
        plan.sweep_axis = SweepAxis::Users;
        plan.sweep_values = vec![1.0, 2.0];
        plan.n_trials = 2;
        let rows = run_campaign(&plan, 2).unwrap();
        assert_eq!(rows.len(), 12);
        let keys: Vec<_> = rows.iter().map(|r| (r.method, r.sweep_value.unwrap() as usize, r.trial)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn gradcheck_default_passes() {
        let e = gradient_check(&ScenarioConfig::gradcheck(), 1, 0.08, 1e-2, 1e-6).unwrap();
        assert!(e.max() <= 1e-5, "{e:?}");
    }
}
