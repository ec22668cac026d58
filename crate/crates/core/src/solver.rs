//! Riemannian gradient descent with Armijo backtracking, the exact-penalty
//! outer loop, and the two in-framework baselines.
//!
//! One outer iteration `j` runs the inner loop at `(lambda^j, mu^j, eps^j)`
//! warm-started from the previous iterate, then
//!
//! ```text
//! mu    <- max(mu_min,    decay_mu    * mu)
//! eps   <- max(eps_min,   decay_eps   * eps)
//! sigma <- max(sigma_min, decay_sigma * sigma)
//! lambda <- lambda / decay_lambda   if V_max > sigma (the decayed value)
//! ```
//!
//! and stops once the displacement is below `o_tol` with `mu` and `sigma` at
//! their floors, or after `i_outer` outer iterations.

use serde::{Deserialize, Serialize};

use crate::gradients::{euclidean_gradient_with, metric_gradient, GradientWeights};
use crate::manifold::{equal_split, feasibility_residual, point_distance, project_to_tangent, retract};
use crate::manifold::{ProductPoint, TangentVector};
use crate::objective::{penalized_from_metrics, violation_from_metrics, EffectiveLinks};
use crate::scenario::{ChannelSet, ScenarioConfig};
use crate::{Error, Result};

/// Penalty, smoothing and tolerance schedules plus line-search constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub lambda0: f64,
    pub mu0: f64,
    pub eps0: f64,
    pub sigma0: f64,
    pub decay_lambda: f64,
    pub decay_mu: f64,
    pub decay_eps: f64,
    pub decay_sigma: f64,
    pub mu_min: f64,
    pub eps_min: f64,
    pub sigma_min: f64,
    pub o_tol: f64,
    pub i_inner: usize,
    pub i_outer: usize,
    pub armijo_c: f64,
    pub armijo_beta: f64,
    pub tau_init0: f64,
    pub max_backtracks: usize,
    /// The initial penalty is raised to at least `lambda_margin * max(rho, 1 - rho)`, the
    /// largest multiplier the epigraph constraints can carry. Zero disables the floor.
    pub lambda_margin: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            lambda0: 0.08,
            mu0: 1.5,
            eps0: 1e-2,
            sigma0: 0.1,
            decay_lambda: 0.75,
            decay_mu: 0.5,
            decay_eps: 0.6,
            decay_sigma: 0.7,
            mu_min: 1e-6,
            eps_min: 1e-6,
            sigma_min: 1e-5,
            o_tol: 1e-6,
            i_inner: 150,
            i_outer: 25,
            armijo_c: 1e-4,
            armijo_beta: 0.5,
            tau_init0: 1.0,
            max_backtracks: 50,
            lambda_margin: 1.5,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, reason: &str| {
            Err(Error::Config(format!("solver.{field}: {reason}")))
        };
        for (field, v) in [
            ("lambda0", self.lambda0),
            ("mu0", self.mu0),
            ("eps0", self.eps0),
            ("sigma0", self.sigma0),
            ("mu_min", self.mu_min),
            ("eps_min", self.eps_min),
            ("sigma_min", self.sigma_min),
            ("o_tol", self.o_tol),
            ("tau_init0", self.tau_init0),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(field, "must be positive and finite");
            }
        }
        for (field, v) in [
            ("decay_lambda", self.decay_lambda),
            ("decay_mu", self.decay_mu),
            ("decay_eps", self.decay_eps),
            ("decay_sigma", self.decay_sigma),
            ("armijo_c", self.armijo_c),
            ("armijo_beta", self.armijo_beta),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return bad(field, "must lie strictly between 0 and 1");
            }
        }
        for (field, floor, init) in [
            ("mu_min", self.mu_min, self.mu0),
            ("eps_min", self.eps_min, self.eps0),
            ("sigma_min", self.sigma_min, self.sigma0),
        ] {
            if floor > init {
                return bad(field, "floor exceeds the initial value");
            }
        }
        if !(self.lambda_margin >= 0.0 && self.lambda_margin.is_finite()) {
            return bad("lambda_margin", "must be finite and non-negative");
        }
        if self.i_inner == 0 || self.i_outer == 0 {
            return bad("i_inner/i_outer", "iteration caps must be at least 1");
        }
        Ok(())
    }

    /// Penalty the outer loop starts from for a given scenario.
    pub fn initial_lambda(&self, cfg: &ScenarioConfig) -> f64 {
        let needed = cfg.rho.max(1.0 - cfg.rho);
        self.lambda0.max(self.lambda_margin * needed)
    }
}

/// One accepted (or stalled) inner step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerRecord {
    pub outer: usize,
    pub inner: usize,
    pub phi: f64,
    pub phi_next: f64,
    pub grad_norm_sq: f64,
    pub tau: f64,
    pub backtracks: usize,
    pub feasibility: f64,
}

/// Summary of one outer iteration. `lambda`, `mu`, `eps`, `sigma` are the
/// values the inner loop ran with; `v_max` and the metrics are measured at its
/// output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub outer: usize,
    pub lambda: f64,
    pub mu: f64,
    pub eps: f64,
    pub sigma: f64,
    pub v_max: f64,
    pub min_sinr: f64,
    pub min_scnr: f64,
    pub a: f64,
    pub b: f64,
    pub displacement: f64,
    pub inner_iters: usize,
    pub stalled: bool,
    pub final_grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceEvent {
    Inner(InnerRecord),
    Outer(OuterRecord),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub inner: Vec<InnerRecord>,
    pub outer: Vec<OuterRecord>,
    /// Whether the three-condition stopping rule fired before the outer cap.
    pub converged: bool,
}

impl SolveTrace {
    /// Line-delimited JSON, inner records of each outer iteration followed by its outer record.
    pub fn to_json_lines(&self) -> Result<String> {
        let mut out = String::new();
        let mut inner = self.inner.iter().peekable();
        for rec in &self.outer {
            while let Some(r) = inner.next_if(|r| r.outer == rec.outer) {
                out += &serde_json::to_string(&TraceEvent::Inner(r.clone()))?;
                out.push('\n');
            }
            out += &serde_json::to_string(&TraceEvent::Outer(rec.clone()))?;
            out.push('\n');
        }
        for r in inner {
            out += &serde_json::to_string(&TraceEvent::Inner(r.clone()))?;
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_json_lines(text: &str) -> Result<Self> {
        let mut trace = SolveTrace::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            match serde_json::from_str(line)? {
                TraceEvent::Inner(r) => trace.inner.push(r),
                TraceEvent::Outer(r) => trace.outer.push(r),
            }
        }
        Ok(trace)
    }

    fn push(&mut self, event: TraceEvent, observer: &mut dyn FnMut(&TraceEvent)) {
        observer(&event);
        match event {
            TraceEvent::Inner(r) => self.inner.push(r),
            TraceEvent::Outer(r) => self.outer.push(r),
        }
    }
}

/// A smooth function on the product manifold together with its Riemannian gradient.
pub trait ManifoldObjective {
    fn value(&self, x: &ProductPoint) -> Result<f64>;
    fn gradient(&self, x: &ProductPoint) -> Result<TangentVector>;
    fn retract(&self, x: &ProductPoint, direction: &TangentVector, step: f64) -> Result<ProductPoint> {
        retract(x, direction, step)
    }
}

/// Smoothed exact-penalty objective at fixed `(lambda, mu)`.
pub struct Penalized<'a> {
    pub channels: &'a ChannelSet,
    pub cfg: &'a ScenarioConfig,
    pub lambda: f64,
    pub mu: f64,
    /// Keep every polarization combiner at its current value.
    pub freeze_polarization: bool,
}

impl ManifoldObjective for Penalized<'_> {
    fn value(&self, x: &ProductPoint) -> Result<f64> {
        let l = EffectiveLinks::new(x, self.channels, self.cfg)?;
        Ok(penalized_from_metrics(&l.sinr, &l.scnr, x.a, x.b, self.cfg.rho, self.lambda, self.mu))
    }

    fn gradient(&self, x: &ProductPoint) -> Result<TangentVector> {
        let l = EffectiveLinks::new(x, self.channels, self.cfg)?;
        let mut g = euclidean_gradient_with(x, self.channels, self.cfg, &l, self.lambda, self.mu)?;
        if self.freeze_polarization {
            g = g.without_polarization();
        }
        project_to_tangent(x, &g)
    }

    fn retract(&self, x: &ProductPoint, direction: &TangentVector, step: f64) -> Result<ProductPoint> {
        frozen_retract(x, direction, step, self.freeze_polarization)
    }
}

fn frozen_retract(x: &ProductPoint, direction: &TangentVector, step: f64, freeze: bool) -> Result<ProductPoint> {
    let mut next = retract(x, direction, step)?;
    if freeze {
        next.p_tx.clone_from(&x.p_tx);
        next.p_rx.clone_from(&x.p_rx);
        next.p_users.clone_from(&x.p_users);
    }
    Ok(next)
}

/// Negated weighted sum utility `-(sum_k alpha SINR_k + sum_t beta SCNR_t)`; `a`, `b` are inert.
pub struct SumUtility<'a> {
    pub channels: &'a ChannelSet,
    pub cfg: &'a ScenarioConfig,
    pub alpha: f64,
    pub beta: f64,
}

impl<'a> SumUtility<'a> {
    /// Weights `(1 - rho) / K` and `rho / T`.
    pub fn averaged(channels: &'a ChannelSet, cfg: &'a ScenarioConfig) -> Self {
        Self {
            channels,
            cfg,
            alpha: (1.0 - cfg.rho) / cfg.n_users as f64,
            beta: cfg.rho / cfg.n_targets as f64,
        }
    }
}

impl ManifoldObjective for SumUtility<'_> {
    fn value(&self, x: &ProductPoint) -> Result<f64> {
        let l = EffectiveLinks::new(x, self.channels, self.cfg)?;
        Ok(-(self.alpha * l.sinr.iter().sum::<f64>() + self.beta * l.scnr.iter().sum::<f64>()))
    }

    fn gradient(&self, x: &ProductPoint) -> Result<TangentVector> {
        let l = EffectiveLinks::new(x, self.channels, self.cfg)?;
        let w = GradientWeights::uniform(l.sinr.len(), self.alpha, l.scnr.len(), self.beta);
        project_to_tangent(x, &metric_gradient(x, self.channels, self.cfg, &l, &w)?)
    }
}

/// Outcome of one Armijo search.
#[derive(Debug, Clone)]
pub struct ArmijoStep {
    pub point: ProductPoint,
    pub phi_next: f64,
    pub tau: f64,
    pub backtracks: usize,
}

/// Smallest `m` with `phi(R(x, tau_init beta^m)) <= phi - c tau ||grad||^2`.
///
/// A degenerate retraction counts as a rejected trial step.
pub fn armijo_search(
    objective: &dyn ManifoldObjective,
    point: &ProductPoint,
    phi: f64,
    grad: &TangentVector,
    tau_init: f64,
    hyper: &Hyperparams,
) -> Result<ArmijoStep> {
    if !(tau_init > 0.0) {
        return Err(Error::Domain(format!("tau_init must be > 0, got {tau_init}")));
    }
    let gsq = grad.norm_sqr();
    if gsq == 0.0 {
        return Ok(ArmijoStep { point: point.clone(), phi_next: phi, tau: tau_init, backtracks: 0 });
    }
    let mut tau = tau_init;
    for m in 0..=hyper.max_backtracks {
        if let Ok(next) = objective.retract(point, grad, tau) {
            let phi_next = objective.value(&next)?;
            if phi_next <= phi - hyper.armijo_c * tau * gsq {
                return Ok(ArmijoStep { point: next, phi_next, tau, backtracks: m });
            }
        }
        tau *= hyper.armijo_beta;
    }
    Err(Error::LineSearchFailure(hyper.max_backtracks))
}

/// Initial step for the next iteration: grow after an immediate accept,
/// keep after one backtrack, shrink otherwise.
pub fn next_tau_init(tau_accepted: f64, backtracks: usize) -> f64 {
    match backtracks {
        0 => 2.0 * tau_accepted,
        1 => tau_accepted,
        _ => 0.5 * tau_accepted,
    }
}

#[derive(Debug, Clone)]
pub struct InnerOutcome {
    pub point: ProductPoint,
    pub iterations: usize,
    pub stalled: bool,
    pub final_grad_norm: f64,
    pub tau_init: f64,
}

/// Riemannian gradient descent until `||grad|| <= eps` or `i_inner` steps.
#[allow(clippy::too_many_arguments)]
pub fn prmgd_inner(
    objective: &dyn ManifoldObjective,
    start: &ProductPoint,
    cfg: &ScenarioConfig,
    eps: f64,
    i_inner: usize,
    tau_init: f64,
    hyper: &Hyperparams,
    outer: usize,
    trace: &mut SolveTrace,
    observer: &mut dyn FnMut(&TraceEvent),
) -> Result<InnerOutcome> {
    let mut x = start.clone();
    let mut tau_init = tau_init;
    let mut phi = objective.value(&x)?;
    let mut i = 0;
    loop {
        let g = objective.gradient(&x)?;
        let gsq = g.norm_sqr();
        if gsq.sqrt() <= eps || i >= i_inner {
            return Ok(InnerOutcome { point: x, iterations: i, stalled: false, final_grad_norm: gsq.sqrt(), tau_init });
        }
        let step = match armijo_search(objective, &x, phi, &g, tau_init, hyper) {
            Ok(s) => s,
            Err(Error::LineSearchFailure(_)) => {
                return Ok(InnerOutcome { point: x, iterations: i, stalled: true, final_grad_norm: gsq.sqrt(), tau_init });
            }
            Err(e) => return Err(e),
        };
        let rec = InnerRecord {
            outer,
            inner: i,
            phi,
            phi_next: step.phi_next,
            grad_norm_sq: gsq,
            tau: step.tau,
            backtracks: step.backtracks,
            feasibility: feasibility_residual(&step.point, cfg),
        };
        trace.push(TraceEvent::Inner(rec), observer);
        tau_init = next_tau_init(step.tau, step.backtracks);
        x = step.point;
        phi = step.phi_next;
        i += 1;
    }
}

fn check_start(cfg: &ScenarioConfig, hyper: &Hyperparams, start: &ProductPoint) -> Result<()> {
    cfg.validate()?;
    hyper.validate()?;
    let shape = crate::manifold::Shape::of(cfg);
    if shape != start.shape() {
        return Err(Error::DimensionMismatch {
            block: "start point",
            expected: format!("{shape:?}"),
            got: format!("{:?}", start.shape()),
        });
    }
    let r = feasibility_residual(start, cfg);
    if r > 1e-8 * (1.0 + cfg.power().sqrt()) {
        return Err(Error::Domain(format!("start point is not feasible (residual {r:e})")));
    }
    Ok(())
}

fn run_outer(
    cfg: &ScenarioConfig,
    channels: &ChannelSet,
    hyper: &Hyperparams,
    start: &ProductPoint,
    freeze: bool,
    observer: &mut dyn FnMut(&TraceEvent),
) -> Result<(ProductPoint, SolveTrace)> {
    check_start(cfg, hyper, start)?;
    let mut trace = SolveTrace::default();
    let mut x = start.clone();
    let (mut lambda, mut mu, mut eps, mut sigma) = (hyper.initial_lambda(cfg), hyper.mu0, hyper.eps0, hyper.sigma0);
    let mut tau_init = hyper.tau_init0;
    for j in 0..hyper.i_outer {
        let objective = Penalized { channels, cfg, lambda, mu, freeze_polarization: freeze };
        let out = prmgd_inner(
            &objective,
            &x,
            cfg,
            eps,
            hyper.i_inner,
            tau_init,
            hyper,
            j,
            &mut trace,
            &mut *observer,
        )?;
        tau_init = out.tau_init;
        let displacement = if out.stalled { 0.0 } else { point_distance(&out.point, &x)? };
        x = out.point;

        let l = EffectiveLinks::new(&x, channels, cfg)?;
        let v_max = violation_from_metrics(&l.sinr, &l.scnr, x.a, x.b);
        let next_mu = hyper.mu_min.max(hyper.decay_mu * mu);
        let next_eps = hyper.eps_min.max(hyper.decay_eps * eps);
        let next_sigma = hyper.sigma_min.max(hyper.decay_sigma * sigma);
        let rec = OuterRecord {
            outer: j,
            lambda,
            mu,
            eps,
            sigma,
            v_max,
            min_sinr: l.min_sinr(),
            min_scnr: l.min_scnr(),
            a: x.a,
            b: x.b,
            displacement,
            inner_iters: out.iterations,
            stalled: out.stalled,
            final_grad_norm: out.final_grad_norm,
        };
        trace.push(TraceEvent::Outer(rec), observer);
        if v_max > next_sigma {
            lambda /= hyper.decay_lambda;
        }
        mu = next_mu;
        eps = next_eps;
        sigma = next_sigma;
        if displacement <= hyper.o_tol && mu == hyper.mu_min && sigma == hyper.sigma_min {
            trace.converged = true;
            break;
        }
    }
    Ok((x, trace))
}

/// Exact-penalty product-manifold gradient descent over every block.
pub fn ep_prmgd(
    cfg: &ScenarioConfig,
    channels: &ChannelSet,
    hyper: &Hyperparams,
    start: &ProductPoint,
) -> Result<(ProductPoint, SolveTrace)> {
    run_outer(cfg, channels, hyper, start, false, &mut |_| {})
}

/// [`ep_prmgd`] with every trace record passed to `observer` as it is produced.
pub fn ep_prmgd_observed(
    cfg: &ScenarioConfig,
    channels: &ChannelSet,
    hyper: &Hyperparams,
    start: &ProductPoint,
    observer: &mut dyn FnMut(&TraceEvent),
) -> Result<(ProductPoint, SolveTrace)> {
    run_outer(cfg, channels, hyper, start, false, observer)
}

/// Same outer loop with every polarization combiner held at the equal split.
pub fn solve_fixed_polarization(
    cfg: &ScenarioConfig,
    channels: &ChannelSet,
    hyper: &Hyperparams,
    start: &ProductPoint,
    observer: &mut dyn FnMut(&TraceEvent),
) -> Result<(ProductPoint, SolveTrace)> {
    let mut start = start.clone();
    for p in start.p_tx.iter_mut().chain(start.p_rx.iter_mut()).chain(start.p_users.iter_mut()) {
        *p = equal_split();
    }
    run_outer(cfg, channels, hyper, &start, true, observer)
}

/// Maximizes the averaged sum of SINR and SCNR (no fairness). Runs a single
/// descent with tolerance `eps_min` and budget `i_inner * i_outer`, reported
/// as one outer record.
pub fn solve_sum_objective(
    cfg: &ScenarioConfig,
    channels: &ChannelSet,
    hyper: &Hyperparams,
    start: &ProductPoint,
    observer: &mut dyn FnMut(&TraceEvent),
) -> Result<(ProductPoint, SolveTrace)> {
    check_start(cfg, hyper, start)?;
    let objective = SumUtility::averaged(channels, cfg);
    let mut trace = SolveTrace::default();
    let out = prmgd_inner(
        &objective,
        start,
        cfg,
        hyper.eps_min,
        hyper.i_inner * hyper.i_outer,
        hyper.tau_init0,
        hyper,
        0,
        &mut trace,
        &mut *observer,
    )?;
    let l = EffectiveLinks::new(&out.point, channels, cfg)?;
    let rec = OuterRecord {
        outer: 0,
        lambda: 0.0,
        mu: 0.0,
        eps: hyper.eps_min,
        sigma: 0.0,
        v_max: violation_from_metrics(&l.sinr, &l.scnr, out.point.a, out.point.b),
        min_sinr: l.min_sinr(),
        min_scnr: l.min_scnr(),
        a: out.point.a,
        b: out.point.b,
        displacement: point_distance(&out.point, start)?,
        inner_iters: out.iterations,
        stalled: out.stalled,
        final_grad_norm: out.final_grad_norm,
    };
    trace.push(TraceEvent::Outer(rec), observer);
    trace.converged = out.final_grad_norm <= hyper.eps_min;
    Ok((out.point, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::random_point;
    use crate::objective::metric_report;
    use crate::scenario::sample_scenario;

    /// `phi(x) = x^2` on the `a` block only.
    struct Quadratic;

    impl ManifoldObjective for Quadratic {
        fn value(&self, x: &ProductPoint) -> Result<f64> {
            Ok(x.a * x.a)
        }
        fn gradient(&self, x: &ProductPoint) -> Result<TangentVector> {
            let mut g = TangentVector::zeros(x.shape());
            g.a = 2.0 * x.a;
            Ok(g)
        }
    }

    fn small() -> (ScenarioConfig, ChannelSet, ProductPoint) {
        let cfg = ScenarioConfig { seed: 21, ..ScenarioConfig::gradcheck() };
        let ch = sample_scenario(&cfg).unwrap();
        let x = random_point(&cfg, 22);
        (cfg, ch, x)
    }

    fn quick() -> Hyperparams {
        Hyperparams { i_outer: 6, i_inner: 30, ..Hyperparams::default() }
    }

    #[test]
    fn defaults_validate() {
        Hyperparams::default().validate().unwrap();
        let bad = Hyperparams { decay_mu: 1.0, ..Hyperparams::default() };
        assert!(bad.validate().is_err());
        let bad = Hyperparams { mu_min: 2.0, ..Hyperparams::default() };
        assert!(bad.validate().is_err());
        let bad = Hyperparams { i_outer: 0, ..Hyperparams::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn tau_adaptation() {
        assert_eq!(next_tau_init(0.25, 0), 0.5);
        assert_eq!(next_tau_init(0.25, 1), 0.25);
        assert_eq!(next_tau_init(0.25, 2), 0.125);
        assert_eq!(next_tau_init(0.25, 7), 0.125);
    }

    #[test]
    fn armijo_on_quadratic() {
        let (_, _, mut x) = small();
        x.a = 3.0;
        let h = Hyperparams::default();
        let g = Quadratic.gradient(&x).unwrap();
        // x - tau 2x: accepted iff (1 - 2 tau)^2 <= 1 - 4 c tau, i.e. tau <= 1 - c
        let s = armijo_search(&Quadratic, &x, 9.0, &g, 1.0, &h).unwrap();
        assert_eq!(s.backtracks, 1);
        assert_eq!(s.tau, 0.5);
        assert_eq!(s.point.a, 0.0);
        let s = armijo_search(&Quadratic, &x, 9.0, &g, 0.999, &h).unwrap();
        assert_eq!(s.backtracks, 0);
        assert!(s.phi_next < 9.0);
    }

    #[test]
    fn armijo_zero_gradient_and_failure() {
        let (_, _, x) = small();
        let h = Hyperparams::default();
        let g = TangentVector::zeros(x.shape());
        let s = armijo_search(&Quadratic, &x, 0.0, &g, 1.0, &h).unwrap();
        assert_eq!((s.backtracks, s.tau), (0, 1.0));
        assert_eq!(s.point, x);

        // Ascent direction: never accepted.
        let mut y = x.clone();
        y.a = 1.0;
        let mut g = TangentVector::zeros(y.shape());
        g.a = -1.0;
        let h = Hyperparams { max_backtracks: 5, ..h };
        assert!(matches!(armijo_search(&Quadratic, &y, 1.0, &g, 1.0, &h), Err(Error::LineSearchFailure(5))));
        assert!(armijo_search(&Quadratic, &y, 1.0, &g, 0.0, &h).is_err());
    }

    #[test]
    fn inner_loop_contracts() {
        let (cfg, ch, x) = small();
        let h = Hyperparams::default();
        let obj = Penalized { channels: &ch, cfg: &cfg, lambda: 0.08, mu: 1.5, freeze_polarization: false };
        let mut trace = SolveTrace::default();
        let out = prmgd_inner(&obj, &x, &cfg, 1e-3, 40, 1.0, &h, 0, &mut trace, &mut |_| {}).unwrap();
        assert!(out.final_grad_norm <= 1e-3 || out.iterations == 40 || out.stalled);
        assert_eq!(trace.inner.len(), out.iterations);
        for r in &trace.inner {
            assert!(r.phi_next <= r.phi - h.armijo_c * r.tau * r.grad_norm_sq);
            assert!(r.feasibility <= 1e-10);
        }

        // Huge tolerance: zero steps.
        let mut trace = SolveTrace::default();
        let out = prmgd_inner(&obj, &x, &cfg, 1e30, 40, 1.0, &h, 0, &mut trace, &mut |_| {}).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.point, x);
    }

    #[test]
    fn schedules_and_determinism() {
        let (cfg, ch, x) = small();
        let h = quick();
        let (p1, t1) = ep_prmgd(&cfg, &ch, &h, &x).unwrap();
        let (p2, t2) = ep_prmgd(&cfg, &ch, &h, &x).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(p1, p2);
        assert_eq!(t1.outer.len(), 6);
        let mus: Vec<f64> = t1.outer.iter().map(|r| r.mu).collect();
        assert_eq!(mus, vec![1.5, 0.75, 0.375, 0.1875, 0.09375, 0.046875]);
        for w in t1.outer.windows(2) {
            assert!(w[1].lambda >= w[0].lambda);
            assert!(w[1].eps <= w[0].eps && w[1].sigma <= w[0].sigma);
            let grew = w[1].lambda > w[0].lambda;
            assert_eq!(grew, w[0].v_max > w[1].sigma);
            if grew {
                assert!((w[1].lambda - w[0].lambda / 0.75).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn observer_sees_every_record() {
        let (cfg, ch, x) = small();
        let h = Hyperparams { i_outer: 2, i_inner: 10, ..Hyperparams::default() };
        let mut seen = Vec::new();
        let (_, trace) = ep_prmgd_observed(&cfg, &ch, &h, &x, &mut |e| seen.push(e.clone())).unwrap();
        assert_eq!(seen.len(), trace.inner.len() + trace.outer.len());
        let text = trace.to_json_lines().unwrap();
        assert_eq!(text.lines().count(), seen.len());
        let first: TraceEvent = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first, seen[0]);
        assert_eq!(SolveTrace::from_json_lines(&text).unwrap(), SolveTrace { converged: trace.converged, ..trace });
    }

    #[test]
    fn fixed_polarization_stays_frozen() {
        let (cfg, ch, x) = small();
        let (p, _) = solve_fixed_polarization(&cfg, &ch, &quick(), &x, &mut |_| {}).unwrap();
        for v in p.p_tx.iter().chain(&p.p_rx).chain(&p.p_users) {
            assert_eq!(*v, equal_split());
        }
        assert!(feasibility_residual(&p, &cfg) <= 1e-10);
    }

    #[test]
    fn sum_objective_improves_utility() {
        let (cfg, ch, x) = small();
        let h = Hyperparams { i_outer: 1, i_inner: 60, ..Hyperparams::default() };
        let obj = SumUtility::averaged(&ch, &cfg);
        let before = obj.value(&x).unwrap();
        let (p, trace) = solve_sum_objective(&cfg, &ch, &h, &x, &mut |_| {}).unwrap();
        assert!(obj.value(&p).unwrap() < before);
        assert_eq!(trace.outer.len(), 1);
        assert_eq!((p.a, p.b), (x.a, x.b));
    }

    #[test]
    fn ep_prmgd_raises_worst_link() {
        let (cfg, ch, x) = small();
        let before = metric_report(&x, &ch, &cfg).unwrap();
        let (p, _) = ep_prmgd(&cfg, &ch, &Hyperparams::default(), &x).unwrap();
        let after = metric_report(&p, &ch, &cfg).unwrap();
        assert!(after.min_sinr > before.min_sinr);
        assert!(after.min_scnr > before.min_scnr);
    }

    #[test]
    fn rejects_infeasible_start() {
        let (cfg, ch, mut x) = small();
        x.w *= crate::C64::new(2.0, 0.0);
        assert!(ep_prmgd(&cfg, &ch, &quick(), &x).is_err());
    }
}
