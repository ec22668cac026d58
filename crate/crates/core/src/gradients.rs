//! Closed-form Euclidean gradients of the penalized objective.
//!
//! Complex blocks use the convention `d phi = Re <G, dX> = Re Tr(G^H dX)`, so
//! `grad |h^H w|^2 = 2 h (h^H w)`. Every design-variable gradient goes through
//! the chain rule
//!
//! ```text
//! grad_x phi = - sum_k alpha_k grad_x SINR_k - sum_t beta_t grad_x SCNR_t
//! ```
//!
//! with `alpha_k = lambda * logistic((a - SINR_k) / mu)` and
//! `beta_t = lambda * logistic((b - SCNR_t) / mu)`. The same assembly with
//! constant weights differentiates the sum-utility baseline.

use crate::manifold::{project_to_tangent, ProductPoint, TangentVector};
use crate::objective::{logistic, penalized_objective, EffectiveLinks};
use crate::scenario::{ChannelSet, ScenarioConfig};
use crate::{CMat, Error, Pol, Result, C64};

/// Chain-rule weights on each SINR and SCNR term.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientWeights {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl GradientWeights {
    pub fn from_links(links: &EffectiveLinks, a: f64, b: f64, lambda: f64, mu: f64) -> Self {
        Self {
            alpha: links.sinr.iter().map(|s| lambda * logistic((a - s) / mu)).collect(),
            beta: links.scnr.iter().map(|s| lambda * logistic((b - s) / mu)).collect(),
        }
    }

    /// Constant weights, e.g. `(1 - rho) / K` and `rho / T` for the sum objective.
    pub fn uniform(n_users: usize, alpha: f64, n_targets: usize, beta: f64) -> Self {
        Self {
            alpha: vec![alpha; n_users],
            beta: vec![beta; n_targets],
        }
    }
}

pub fn gradient_weights(
    point: &ProductPoint,
    channels: &ChannelSet,
    cfg: &ScenarioConfig,
    lambda: f64,
    mu: f64,
) -> Result<GradientWeights> {
    check_params(lambda, mu)?;
    let links = EffectiveLinks::new(point, channels, cfg)?;
    Ok(GradientWeights::from_links(&links, point.a, point.b, lambda, mu))
}

fn check_params(lambda: f64, mu: f64) -> Result<()> {
    if !(lambda > 0.0 && mu > 0.0) {
        return Err(Error::Domain(format!("need lambda > 0 and mu > 0, got {lambda}, {mu}")));
    }
    Ok(())
}

fn check_weights(links: &EffectiveLinks, w: &GradientWeights) -> Result<()> {
    if w.alpha.len() != links.sinr.len() || w.beta.len() != links.scnr.len() {
        return Err(Error::DimensionMismatch {
            block: "gradient weights",
            expected: format!("{} / {}", links.sinr.len(), links.scnr.len()),
            got: format!("{} / {}", w.alpha.len(), w.beta.len()),
        });
    }
    Ok(())
}

/// Quotient-rule coefficients of `SINR_k` per beamformer column:
/// `2 / D_k` for the own stream and `-2 SINR_k / D_k` for the others.
fn sinr_coeffs(links: &EffectiveLinks, k: usize, n_streams: usize) -> impl Iterator<Item = f64> + '_ {
    let d = links.d_user[k];
    let s = links.sinr[k];
    (0..n_streams).map(move |j| if j == k { 2.0 / d } else { -2.0 * s / d })
}

/// Quotient-rule coefficients of `SCNR_t` per sensed object; `None` when `f_t = 0`.
fn scnr_coeffs(links: &EffectiveLinks, t: usize) -> Option<Vec<f64>> {
    let d = links.d_target[t];
    if !(d > 0.0) {
        return None;
    }
    let s = links.scnr[t];
    Some((0..links.z[t].nrows()).map(|q| if q == t { 2.0 / d } else { -2.0 * s / d }).collect())
}

/// Gradient with respect to the beamformer `W`.
pub fn grad_w(point: &ProductPoint, links: &EffectiveLinks, weights: &GradientWeights, _cfg: &ScenarioConfig) -> Result<CMat> {
    check_weights(links, weights)?;
    let (m_tx, n_streams) = point.w.shape();
    let mut g = CMat::zeros(m_tx, n_streams);
    for (k, &alpha) in weights.alpha.iter().enumerate() {
        if alpha == 0.0 {
            continue;
        }
        // column h_k = conj(h_eff,k^H)
        let h: Vec<C64> = links.h_eff.row(k).iter().map(|v| v.conj()).collect();
        for (j, c) in sinr_coeffs(links, k, n_streams).enumerate() {
            let s = links.y[(k, j)] * (-alpha * c);
            for m in 0..m_tx {
                g[(m, j)] += h[m] * s;
            }
        }
    }
    for (t, &beta) in weights.beta.iter().enumerate() {
        if beta == 0.0 {
            continue;
        }
        let Some(coeffs) = scnr_coeffs(links, t) else { continue };
        let (u, z) = (&links.u[t], &links.z[t]);
        for (q, c) in coeffs.iter().enumerate() {
            let scale = -beta * c;
            for j in 0..n_streams {
                let s = z[(q, j)] * scale;
                for m in 0..m_tx {
                    g[(m, j)] += u[(q, m)].conj() * s;
                }
            }
        }
    }
    Ok(g)
}

/// Gradient with respect to the receive filters `F`; column `t` only sees `SCNR_t`.
pub fn grad_f(point: &ProductPoint, links: &EffectiveLinks, weights: &GradientWeights, cfg: &ScenarioConfig) -> Result<CMat> {
    check_weights(links, weights)?;
    let mut g = CMat::zeros(point.f.nrows(), point.f.ncols());
    let sigma_r = cfg.noise_radar();
    for (t, &beta) in weights.beta.iter().enumerate() {
        if beta == 0.0 || point.f.column(t).norm_squared() == 0.0 {
            continue;
        }
        let d = links.d_target[t];
        let s = links.scnr[t];
        // A_t f = S_t conj(z_tt), B_t f = sum_{q != t} S_q conj(z_tq) + sigma_r^2 f
        let zt = &links.z[t];
        let mut af = nalgebra::DVector::<C64>::zeros(point.f.nrows());
        let mut bf = point.f.column(t) * C64::new(sigma_r, 0.0);
        for (q, sq) in links.s_mats.iter().enumerate() {
            let zc: nalgebra::DVector<C64> = zt.row(q).transpose().map(|v| v.conj());
            let prod = sq * zc;
            if q == t {
                af += prod;
            } else {
                bf += prod;
            }
        }
        let col = (af - bf * C64::new(s, 0.0)) * C64::new(-beta * 2.0 / d, 0.0);
        g.set_column(t, &col);
    }
    Ok(g)
}

/// Gradients of all user combiners.
pub fn grad_p_users(links: &EffectiveLinks, weights: &GradientWeights, point: &ProductPoint) -> Result<Vec<Pol>> {
    check_weights(links, weights)?;
    let n_streams = point.w.ncols();
    Ok((0..weights.alpha.len())
        .map(|k| {
            let alpha = weights.alpha[k];
            if alpha == 0.0 {
                return Pol::zeros();
            }
            // s_{k,j} = H_k P_tx w_j
            let s = &links.h_tx[k] * &point.w;
            let mut g = Pol::zeros();
            for (j, c) in sinr_coeffs(links, k, n_streams).enumerate() {
                let y = links.y[(k, j)].conj();
                g[0] += c * (y * s[(0, j)]).re;
                g[1] += c * (y * s[(1, j)]).re;
            }
            g * -alpha
        })
        .collect())
}

/// Gradient of the combiner of user `k`.
pub fn grad_p_user(
    point: &ProductPoint,
    _channels: &ChannelSet,
    links: &EffectiveLinks,
    weights: &GradientWeights,
    _cfg: &ScenarioConfig,
    k: usize,
) -> Result<Pol> {
    let n = point.p_users.len();
    if k >= n {
        return Err(Error::IndexOutOfRange { what: "user", index: k, len: n });
    }
    Ok(grad_p_users(links, weights, point)?[k])
}

/// Gradients of all transmit combiners.
///
/// Communication part: `eta_{k,m} = (p_k^T H_{k,m})^T`, `d y_{k,j} / d p_tx,m = eta_{k,m} w_{m,j}`.
/// Sensing part: `d_{t,q,m}` is block `m` of `f_t^H P_rx^T G_q`, `d z_{t,q,j} / d p_tx,m = d_{t,q,m} w_{m,j}`.
pub fn grad_p_tx_all(
    point: &ProductPoint,
    channels: &ChannelSet,
    links: &EffectiveLinks,
    weights: &GradientWeights,
) -> Result<Vec<Pol>> {
    check_weights(links, weights)?;
    let (m_tx, n_streams) = point.w.shape();
    let mut g = vec![Pol::zeros(); m_tx];

    for (k, &alpha) in weights.alpha.iter().enumerate() {
        if alpha == 0.0 {
            continue;
        }
        let pk = point.p_users[k];
        let h = &channels.comm[k];
        // acc_m = sum_j c_kj conj(y_kj) w_{m,j}
        let coeffs: Vec<f64> = sinr_coeffs(links, k, n_streams).collect();
        for m in 0..m_tx {
            let mut acc = C64::new(0.0, 0.0);
            for (j, c) in coeffs.iter().enumerate() {
                acc += links.y[(k, j)].conj() * point.w[(m, j)] * *c;
            }
            for col in 0..2 {
                let eta = h[(0, 2 * m + col)] * pk[0] + h[(1, 2 * m + col)] * pk[1];
                g[m][col] -= alpha * (eta * acc).re;
            }
        }
    }

    for (t, &beta) in weights.beta.iter().enumerate() {
        if beta == 0.0 {
            continue;
        }
        let Some(coeffs) = scnr_coeffs(links, t) else { continue };
        let f = point.f.column(t);
        for (q, gq) in channels.sensing.iter().enumerate() {
            // e = f_t^H P_rx^T G_q, length 2 M_tx
            let mut e = vec![C64::new(0.0, 0.0); 2 * m_tx];
            for (i, prx) in point.p_rx.iter().enumerate() {
                let fi = f[i].conj();
                for (col, ec) in e.iter_mut().enumerate() {
                    *ec += fi * (gq[(2 * i, col)] * prx[0] + gq[(2 * i + 1, col)] * prx[1]);
                }
            }
            let zq = links.z[t].row(q);
            for m in 0..m_tx {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..n_streams {
                    acc += zq[j].conj() * point.w[(m, j)];
                }
                acc *= coeffs[q];
                for col in 0..2 {
                    g[m][col] -= beta * (e[2 * m + col] * acc).re;
                }
            }
        }
    }
    Ok(g)
}

pub fn grad_p_tx(
    point: &ProductPoint,
    channels: &ChannelSet,
    links: &EffectiveLinks,
    weights: &GradientWeights,
    _cfg: &ScenarioConfig,
    m: usize,
) -> Result<Pol> {
    let n = point.p_tx.len();
    if m >= n {
        return Err(Error::IndexOutOfRange { what: "transmit antenna", index: m, len: n });
    }
    Ok(grad_p_tx_all(point, channels, links, weights)?[m])
}

/// Gradients of all receive combiners:
/// `d z_{t,q,j} / d p_rx,m = conj(f_{t,m}) v_{q,m,j}` with `v_{q,m,j}` block `m` of column `j` of `V_q`.
pub fn grad_p_rx_all(point: &ProductPoint, links: &EffectiveLinks, weights: &GradientWeights) -> Result<Vec<Pol>> {
    check_weights(links, weights)?;
    let m_rx = point.p_rx.len();
    let n_streams = point.w.ncols();
    let mut g = vec![Pol::zeros(); m_rx];
    for (t, &beta) in weights.beta.iter().enumerate() {
        if beta == 0.0 {
            continue;
        }
        let Some(coeffs) = scnr_coeffs(links, t) else { continue };
        for (q, vq) in links.v.iter().enumerate() {
            let zq = links.z[t].row(q);
            for m in 0..m_rx {
                let fm = point.f[(m, t)].conj();
                if fm == C64::new(0.0, 0.0) {
                    continue;
                }
                for col in 0..2 {
                    let mut acc = C64::new(0.0, 0.0);
                    for j in 0..n_streams {
                        acc += zq[j].conj() * vq[(2 * m + col, j)];
                    }
                    g[m][col] -= beta * coeffs[q] * (fm * acc).re;
                }
            }
        }
    }
    Ok(g)
}

pub fn grad_p_rx(
    point: &ProductPoint,
    _channels: &ChannelSet,
    links: &EffectiveLinks,
    weights: &GradientWeights,
    _cfg: &ScenarioConfig,
    m: usize,
) -> Result<Pol> {
    let n = point.p_rx.len();
    if m >= n {
        return Err(Error::IndexOutOfRange { what: "receive antenna", index: m, len: n });
    }
    Ok(grad_p_rx_all(point, links, weights)?[m])
}

fn ab_from_weights(weights: &GradientWeights, a: f64, b: f64, rho: f64, lambda: f64, mu: f64) -> (f64, f64) {
    let ga = (rho - 1.0) + weights.alpha.iter().sum::<f64>() - lambda * logistic(-a / mu);
    let gb = -rho + weights.beta.iter().sum::<f64>() - lambda * logistic(-b / mu);
    (ga, gb)
}

/// Partial derivatives with respect to the epigraph scalars `(a, b)`.
pub fn grad_ab(
    point: &ProductPoint,
    channels: &ChannelSet,
    cfg: &ScenarioConfig,
    lambda: f64,
    mu: f64,
) -> Result<(f64, f64)> {
    let w = gradient_weights(point, channels, cfg, lambda, mu)?;
    Ok(ab_from_weights(&w, point.a, point.b, cfg.rho, lambda, mu))
}

/// Gradient of `-sum_k alpha_k SINR_k - sum_t beta_t SCNR_t` over the design blocks
/// (`a` and `b` left at zero).
pub fn metric_gradient(
    point: &ProductPoint,
    channels: &ChannelSet,
    cfg: &ScenarioConfig,
    links: &EffectiveLinks,
    weights: &GradientWeights,
) -> Result<TangentVector> {
    Ok(TangentVector {
        w: grad_w(point, links, weights, cfg)?,
        p_tx: grad_p_tx_all(point, channels, links, weights)?,
        p_rx: grad_p_rx_all(point, links, weights)?,
        p_users: grad_p_users(links, weights, point)?,
        f: grad_f(point, links, weights, cfg)?,
        a: 0.0,
        b: 0.0,
    })
}

/// Full Euclidean gradient of the penalized objective at `point`.
pub fn euclidean_gradient(
    point: &ProductPoint,
    channels: &ChannelSet,
    cfg: &ScenarioConfig,
    lambda: f64,
    mu: f64,
) -> Result<TangentVector> {
    check_params(lambda, mu)?;
    let links = EffectiveLinks::new(point, channels, cfg)?;
    euclidean_gradient_with(point, channels, cfg, &links, lambda, mu)
}

pub(crate) fn euclidean_gradient_with(
    point: &ProductPoint,
    channels: &ChannelSet,
    cfg: &ScenarioConfig,
    links: &EffectiveLinks,
    lambda: f64,
    mu: f64,
) -> Result<TangentVector> {
    let weights = GradientWeights::from_links(links, point.a, point.b, lambda, mu);
    let mut g = metric_gradient(point, channels, cfg, links, &weights)?;
    let (ga, gb) = ab_from_weights(&weights, point.a, point.b, cfg.rho, lambda, mu);
    g.a = ga;
    g.b = gb;
    Ok(g)
}

/// Riemannian gradient: the Euclidean gradient projected onto the tangent space.
pub fn riemannian_gradient(
    point: &ProductPoint,
    channels: &ChannelSet,
    cfg: &ScenarioConfig,
    lambda: f64,
    mu: f64,
) -> Result<TangentVector> {
    project_to_tangent(point, &euclidean_gradient(point, channels, cfg, lambda, mu)?)
}

/// Central-difference gradient of an arbitrary scalar function of the point, over
/// every real coordinate. Complex entries get `d/dRe + j d/dIm`.
pub fn finite_difference<F>(point: &ProductPoint, h: f64, mut f: F) -> Result<TangentVector>
where
    F: FnMut(&ProductPoint) -> Result<f64>,
{
    if !(h > 0.0) {
        return Err(Error::Domain(format!("finite-difference step must be > 0, got {h}")));
    }
    let mut x = point.clone();
    let mut g = TangentVector::zeros(point.shape());
    let mut central = |x: &mut ProductPoint, set: &dyn Fn(&mut ProductPoint, f64)| -> Result<f64> {
        set(x, h);
        let fp = f(x)?;
        set(x, -2.0 * h);
        let fm = f(x)?;
        set(x, h);
        Ok((fp - fm) / (2.0 * h))
    };

    let (rows, cols) = point.w.shape();
    for r in 0..rows {
        for c in 0..cols {
            let re = central(&mut x, &|x, d| x.w[(r, c)].re += d)?;
            let im = central(&mut x, &|x, d| x.w[(r, c)].im += d)?;
            x.w[(r, c)] = point.w[(r, c)];
            g.w[(r, c)] = C64::new(re, im);
        }
    }
    let (rows, cols) = point.f.shape();
    for r in 0..rows {
        for c in 0..cols {
            let re = central(&mut x, &|x, d| x.f[(r, c)].re += d)?;
            let im = central(&mut x, &|x, d| x.f[(r, c)].im += d)?;
            x.f[(r, c)] = point.f[(r, c)];
            g.f[(r, c)] = C64::new(re, im);
        }
    }
    for m in 0..point.p_tx.len() {
        for i in 0..2 {
            g.p_tx[m][i] = central(&mut x, &|x, d| x.p_tx[m][i] += d)?;
            x.p_tx[m][i] = point.p_tx[m][i];
        }
    }
    for m in 0..point.p_rx.len() {
        for i in 0..2 {
            g.p_rx[m][i] = central(&mut x, &|x, d| x.p_rx[m][i] += d)?;
            x.p_rx[m][i] = point.p_rx[m][i];
        }
    }
    for k in 0..point.p_users.len() {
        for i in 0..2 {
            g.p_users[k][i] = central(&mut x, &|x, d| x.p_users[k][i] += d)?;
            x.p_users[k][i] = point.p_users[k][i];
        }
    }
    g.a = central(&mut x, &|x, d| x.a += d)?;
    x.a = point.a;
    g.b = central(&mut x, &|x, d| x.b += d)?;
    Ok(g)
}

/// Finite-difference oracle for [`euclidean_gradient`].
pub fn finite_difference_gradient(
    point: &ProductPoint,
    channels: &ChannelSet,
    cfg: &ScenarioConfig,
    lambda: f64,
    mu: f64,
    h: f64,
) -> Result<TangentVector> {
    check_params(lambda, mu)?;
    finite_difference(point, h, |x| penalized_objective(x, channels, cfg, lambda, mu))
}

/// Per-block relative errors `||G_an - G_fd|| / (1 + ||G_fd||)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockErrors {
    pub w: f64,
    pub p_tx: f64,
    pub p_rx: f64,
    pub p_users: f64,
    pub f: f64,
    pub a: f64,
    pub b: f64,
}

impl BlockErrors {
    pub fn between(analytic: &TangentVector, reference: &TangentVector) -> Result<Self> {
        let diff = analytic.sub(reference)?;
        let pol = |v: &[Pol]| v.iter().map(|p| p.norm_squared()).sum::<f64>().sqrt();
        let rel = |d: f64, r: f64| d / (1.0 + r);
        Ok(Self {
            w: rel(diff.w.norm(), reference.w.norm()),
            p_tx: rel(pol(&diff.p_tx), pol(&reference.p_tx)),
            p_rx: rel(pol(&diff.p_rx), pol(&reference.p_rx)),
            p_users: rel(pol(&diff.p_users), pol(&reference.p_users)),
            f: rel(diff.f.norm(), reference.f.norm()),
            a: rel(diff.a.abs(), reference.a.abs()),
            b: rel(diff.b.abs(), reference.b.abs()),
        })
    }

    pub fn entries(&self) -> [(&'static str, f64); 7] {
        [
            ("W", self.w),
            ("p_tx", self.p_tx),
            ("p_rx", self.p_rx),
            ("p_users", self.p_users),
            ("F", self.f),
            ("a", self.a),
            ("b", self.b),
        ]
    }

    pub fn max(&self) -> f64 {
        self.entries().iter().map(|e| e.1).fold(0.0, f64::max)
    }
}
