//! SINR/SCNR evaluation, log-sum-exp smoothing and the penalized objective.

use std::io::Write;

use crate::manifold::ProductPoint;
use crate::scenario::{linear_to_db, ChannelSet, ScenarioConfig};
use crate::{CMat, Error, Result};

/// Effective channels of one point, recomputed from scratch for every point.
///
/// Notation: `J = K + L_r` beamformer columns, `Q = T + C` sensed objects.
#[derive(Debug, Clone)]
pub struct EffectiveLinks {
    /// `H_k P_tx`, each `2 x M_tx`.
    pub h_tx: Vec<CMat>,
    /// Row `k` is `h_eff,k^H = p_k^T H_k P_tx`; shape `K x M_tx`.
    pub h_eff: CMat,
    /// `y_{k,j} = h_eff,k^H w_j`; shape `K x J`.
    pub y: CMat,
    /// `V_q = G_q P_tx W`, each `2 M_rx x J`.
    pub v: Vec<CMat>,
    /// `S_q = P_rx^T G_q P_tx W`, each `M_rx x J`.
    pub s_mats: Vec<CMat>,
    /// `u[t]` has row `q` equal to `u_{t,q}^H = f_t^H P_rx^T G_q P_tx`; shape `Q x M_tx`.
    pub u: Vec<CMat>,
    /// `z[t]` has row `q` equal to `f_t^H S_q`; shape `Q x J`.
    pub z: Vec<CMat>,
    /// SINR denominators `D_k`.
    pub d_user: Vec<f64>,
    /// SCNR denominators `D_t^r`.
    pub d_target: Vec<f64>,
    pub sinr: Vec<f64>,
    pub scnr: Vec<f64>,
}

fn check_channels(point: &ProductPoint, channels: &ChannelSet, cfg: &ScenarioConfig) -> Result<()> {
    let s = point.shape();
    let mismatch = |block: &'static str, expected: String, got: String| Error::DimensionMismatch {
        block,
        expected,
        got,
    };
    if channels.comm.len() != s.n_users || point.p_tx.len() != s.m_tx || point.p_rx.len() != s.m_rx {
        return Err(mismatch(
            "users/combiners",
            format!("{} users, {} tx, {} rx", s.n_users, s.m_tx, s.m_rx),
            format!(
                "{} channels, {} tx, {} rx",
                channels.comm.len(),
                point.p_tx.len(),
                point.p_rx.len()
            ),
        ));
    }
    if channels.sensing.len() < s.n_targets || cfg.n_targets != s.n_targets {
        return Err(mismatch(
            "sensing",
            format!("at least {} objects", s.n_targets),
            channels.sensing.len().to_string(),
        ));
    }
    for h in &channels.comm {
        if h.shape() != (2, 2 * s.m_tx) {
            return Err(mismatch("H_k", format!("2 x {}", 2 * s.m_tx), format!("{:?}", h.shape())));
        }
    }
    for g in &channels.sensing {
        if g.shape() != (2 * s.m_rx, 2 * s.m_tx) {
            return Err(mismatch(
                "G_q",
                format!("{} x {}", 2 * s.m_rx, 2 * s.m_tx),
                format!("{:?}", g.shape()),
            ));
        }
    }
    Ok(())
}

/// `X P` for a block-diagonal combining matrix `P` built from `p`: `X` has `2M` columns.
fn right_combine(x: &CMat, p: &[crate::Pol]) -> CMat {
    CMat::from_fn(x.nrows(), p.len(), |r, m| {
        x[(r, 2 * m)] * p[m][0] + x[(r, 2 * m + 1)] * p[m][1]
    })
}

/// `P^T X` for a block-diagonal combining matrix built from `p`: `X` has `2M` rows.
fn left_combine(p: &[crate::Pol], x: &CMat) -> CMat {
    CMat::from_fn(p.len(), x.ncols(), |m, c| {
        x[(2 * m, c)] * p[m][0] + x[(2 * m + 1, c)] * p[m][1]
    })
}

/// `P W` for the transmit combiners: shape `2 M_tx x J`.
pub(crate) fn expand_tx(p: &[crate::Pol], w: &CMat) -> CMat {
    CMat::from_fn(2 * p.len(), w.ncols(), |r, c| w[(r / 2, c)] * p[r / 2][r % 2])
}

impl EffectiveLinks {
    pub fn new(point: &ProductPoint, channels: &ChannelSet, cfg: &ScenarioConfig) -> Result<Self> {
        check_channels(point, channels, cfg)?;
        let n_users = point.p_users.len();
        let n_targets = point.f.ncols();
        let n_streams = point.w.ncols();

        let h_tx: Vec<CMat> = channels.comm.iter().map(|h| right_combine(h, &point.p_tx)).collect();
        let mut h_eff = CMat::zeros(n_users, point.w.nrows());
        for (k, ht) in h_tx.iter().enumerate() {
            let p = point.p_users[k];
            for m in 0..ht.ncols() {
                h_eff[(k, m)] = ht[(0, m)] * p[0] + ht[(1, m)] * p[1];
            }
        }
        let y = &h_eff * &point.w;
        let mut d_user = Vec::with_capacity(n_users);
        let mut sinr = Vec::with_capacity(n_users);
        for k in 0..n_users {
            let total: f64 = y.row(k).iter().map(|v| v.norm_sqr()).sum();
            let signal = y[(k, k)].norm_sqr();
            let d = total - signal + cfg.noise_user(k);
            d_user.push(d);
            sinr.push(signal / d);
        }

        let pw = expand_tx(&point.p_tx, &point.w);
        let v: Vec<CMat> = channels.sensing.iter().map(|g| g * &pw).collect();
        let s_mats: Vec<CMat> = v.iter().map(|vq| left_combine(&point.p_rx, vq)).collect();
        let g_red: Vec<CMat> = channels
            .sensing
            .iter()
            .map(|g| left_combine(&point.p_rx, &right_combine(g, &point.p_tx)))
            .collect();
        let n_obj = channels.sensing.len();
        let sigma_r = cfg.noise_radar();
        let mut u = Vec::with_capacity(n_targets);
        let mut z = Vec::with_capacity(n_targets);
        let mut d_target = Vec::with_capacity(n_targets);
        let mut scnr = Vec::with_capacity(n_targets);
        for t in 0..n_targets {
            let fh = point.f.column(t).adjoint();
            let mut ut = CMat::zeros(n_obj, point.w.nrows());
            let mut zt = CMat::zeros(n_obj, n_streams);
            for q in 0..n_obj {
                ut.set_row(q, &(&fh * &g_red[q]).row(0));
                zt.set_row(q, &(&fh * &s_mats[q]).row(0));
            }
            let energy = |q: usize| -> f64 { zt.row(q).iter().map(|x| x.norm_sqr()).sum() };
            let signal = energy(t);
            let clutter: f64 = (0..n_obj).filter(|&q| q != t).map(energy).sum();
            let fnorm = point.f.column(t).norm_squared();
            let d = clutter + sigma_r * fnorm;
            d_target.push(d);
            scnr.push(if fnorm == 0.0 { 0.0 } else { signal / d });
            u.push(ut);
            z.push(zt);
        }

        Ok(Self {
            h_tx,
            h_eff,
            y,
            v,
            s_mats,
            u,
            z,
            d_user,
            d_target,
            sinr,
            scnr,
        })
    }

    pub fn min_sinr(&self) -> f64 {
        self.sinr.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn min_scnr(&self) -> f64 {
        self.scnr.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// SINR and SCNR of one point, linear scale.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub sinr: Vec<f64>,
    pub scnr: Vec<f64>,
    pub min_sinr: f64,
    pub min_scnr: f64,
}

impl MetricReport {
    pub fn from_links(links: &EffectiveLinks) -> Self {
        Self {
            sinr: links.sinr.clone(),
            scnr: links.scnr.clone(),
            min_sinr: links.min_sinr(),
            min_scnr: links.min_scnr(),
        }
    }

    pub fn min_sinr_db(&self) -> f64 {
        linear_to_db(self.min_sinr)
    }

    pub fn min_scnr_db(&self) -> f64 {
        linear_to_db(self.min_scnr)
    }
}

pub fn metric_report(point: &ProductPoint, channels: &ChannelSet, cfg: &ScenarioConfig) -> Result<MetricReport> {
    Ok(MetricReport::from_links(&EffectiveLinks::new(point, channels, cfg)?))
}

/// SINR of user `k` (0-based).
pub fn sinr(point: &ProductPoint, channels: &ChannelSet, cfg: &ScenarioConfig, k: usize) -> Result<f64> {
    let n = point.p_users.len();
    if k >= n {
        return Err(Error::IndexOutOfRange { what: "user", index: k, len: n });
    }
    Ok(EffectiveLinks::new(point, channels, cfg)?.sinr[k])
}

/// SCNR of target `t` (0-based). A zero filter yields 0.
pub fn scnr(point: &ProductPoint, channels: &ChannelSet, cfg: &ScenarioConfig, t: usize) -> Result<f64> {
    let n = point.f.ncols();
    if t >= n {
        return Err(Error::IndexOutOfRange { what: "target", index: t, len: n });
    }
    Ok(EffectiveLinks::new(point, channels, cfg)?.scnr[t])
}

/// `mu log(1 + exp(z / mu))` in the overflow-safe form `max(z, 0) + mu log1p(exp(-|z|/mu))`.
pub fn lse_smooth(z: f64, mu: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::Domain(format!("smoothing parameter must be > 0, got {mu}")));
    }
    Ok(softplus(z, mu))
}

pub(crate) fn softplus(z: f64, mu: f64) -> f64 {
    z.max(0.0) + mu * (-(z.abs() / mu)).exp().ln_1p()
}

/// Logistic function `1 / (1 + exp(-x))`, stable for large `|x|`.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_penalty(lambda: f64, mu: Option<f64>) -> Result<()> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("penalty must be > 0, got {lambda}")));
    }
    if let Some(mu) = mu {
        if !(mu > 0.0) {
            return Err(Error::Domain(format!("smoothing parameter must be > 0, got {mu}")));
        }
    }
    Ok(())
}

/// Smoothed penalized objective evaluated from precomputed metrics.
pub fn penalized_from_metrics(sinr: &[f64], scnr: &[f64], a: f64, b: f64, rho: f64, lambda: f64, mu: f64) -> f64 {
    let mut pen = softplus(-a, mu) + softplus(-b, mu);
    pen += sinr.iter().map(|s| softplus(a - s, mu)).sum::<f64>();
    pen += scnr.iter().map(|s| softplus(b - s, mu)).sum::<f64>();
    (rho - 1.0) * a - rho * b + lambda * pen
}

/// The smoothed exact-penalty objective minimized over the product manifold.
pub fn penalized_objective(
    point: &ProductPoint,
    channels: &ChannelSet,
    cfg: &ScenarioConfig,
    lambda: f64,
    mu: f64,
) -> Result<f64> {
    check_penalty(lambda, Some(mu))?;
    let l = EffectiveLinks::new(point, channels, cfg)?;
    Ok(penalized_from_metrics(&l.sinr, &l.scnr, point.a, point.b, cfg.rho, lambda, mu))
}

/// The nonsmooth hinge-penalty objective; the `mu -> 0` limit of [`penalized_objective`].
pub fn exact_penalty_objective(
    point: &ProductPoint,
    channels: &ChannelSet,
    cfg: &ScenarioConfig,
    lambda: f64,
) -> Result<f64> {
    check_penalty(lambda, None)?;
    let l = EffectiveLinks::new(point, channels, cfg)?;
    let (a, b) = (point.a, point.b);
    let hinge = |x: f64| x.max(0.0);
    let pen = hinge(-a)
        + hinge(-b)
        + l.sinr.iter().map(|s| hinge(a - s)).sum::<f64>()
        + l.scnr.iter().map(|s| hinge(b - s)).sum::<f64>();
    Ok((cfg.rho - 1.0) * a - cfg.rho * b + lambda * pen)
}

pub fn violation_from_metrics(sinr: &[f64], scnr: &[f64], a: f64, b: f64) -> f64 {
    let mut v = 0f64.max(-a).max(-b);
    for s in sinr {
        v = v.max(a - s);
    }
    for s in scnr {
        v = v.max(b - s);
    }
    v
}

/// Largest violation among the epigraph and nonnegativity constraints.
pub fn max_violation(point: &ProductPoint, channels: &ChannelSet, cfg: &ScenarioConfig) -> Result<f64> {
    let l = EffectiveLinks::new(point, channels, cfg)?;
    Ok(violation_from_metrics(&l.sinr, &l.scnr, point.a, point.b))
}

/// CSV sink for [`MetricReport`] rows:
/// `trial,iteration,min_sinr_db,min_scnr_db[,sinr_db_0..,scnr_db_0..]`.
pub struct MetricCsv<W: Write> {
    out: csv::Writer<W>,
    per_link: bool,
    header_written: bool,
}

impl<W: Write> MetricCsv<W> {
    pub fn new(out: W, per_link: bool) -> Self {
        Self {
            out: csv::Writer::from_writer(out),
            per_link,
            header_written: false,
        }
    }

    pub fn write(&mut self, trial: usize, iteration: usize, report: &MetricReport) -> Result<()> {
        if !self.header_written {
            let mut header = vec![
                "trial".to_string(),
                "iteration".into(),
                "min_sinr_db".into(),
                "min_scnr_db".into(),
            ];
            if self.per_link {
                header.extend((0..report.sinr.len()).map(|k| format!("sinr_db_{k}")));
                header.extend((0..report.scnr.len()).map(|t| format!("scnr_db_{t}")));
            }
            self.out.write_record(&header)?;
            self.header_written = true;
        }
        let mut rec = vec![
            trial.to_string(),
            iteration.to_string(),
            report.min_sinr_db().to_string(),
            report.min_scnr_db().to_string(),
        ];
        if self.per_link {
            rec.extend(report.sinr.iter().map(|s| linear_to_db(*s).to_string()));
            rec.extend(report.scnr.iter().map(|s| linear_to_db(*s).to_string()));
        }
        self.out.write_record(&rec)?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W> {
        self.out
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }
}
