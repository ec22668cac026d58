//! Scenario definition and polarimetric channel synthesis.
//!
//! Communication links follow a far-field multipath model with per-path
//! depolarization; sensing links are single-bounce monostatic returns.
//! All internal quantities are linear-scale; dBm only appears in
//! [`ScenarioConfig`].

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Matrix2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::{self, TAG_CLUTTER, TAG_TARGET, TAG_USER};
use crate::{CMat, CVec, Error, Result, C64};

/// Dimensions, powers and channel statistics of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub m_tx: usize,
    pub m_rx: usize,
    pub n_users: usize,
    pub n_radar_streams: usize,
    pub n_targets: usize,
    pub n_clutter: usize,
    pub power_dbm: f64,
    pub noise_user_dbm: f64,
    pub noise_radar_dbm: f64,
    pub rho: f64,
    pub n_paths: usize,
    pub xpd: f64,
    pub element_spacing_wavelengths: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::paper()
    }
}

impl ScenarioConfig {
    /// Full-size setting: 32 antennas, 8 users, 16 radar streams, 8 targets, 8 clutter.
    pub fn paper() -> Self {
        Self {
            m_tx: 32,
            m_rx: 32,
            n_users: 8,
            n_radar_streams: 16,
            n_targets: 8,
            n_clutter: 8,
            power_dbm: 30.0,
            noise_user_dbm: 20.0,
            noise_radar_dbm: 20.0,
            rho: 0.5,
            n_paths: 6,
            xpd: 0.1,
            element_spacing_wavelengths: 0.5,
            seed: 0,
        }
    }

    /// Desk-scale setting used by the default campaigns.
    pub fn desk() -> Self {
        Self {
            m_tx: 8,
            m_rx: 8,
            n_users: 4,
            n_radar_streams: 4,
            n_targets: 4,
            n_clutter: 4,
            ..Self::paper()
        }
    }

    /// Small setting used by gradient checks.
    pub fn gradcheck() -> Self {
        Self {
            m_tx: 4,
            m_rx: 4,
            n_users: 2,
            n_radar_streams: 2,
            n_targets: 2,
            n_clutter: 1,
            ..Self::paper()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("m_tx", self.m_tx),
            ("m_rx", self.m_rx),
            ("n_users", self.n_users),
            ("n_radar_streams", self.n_radar_streams),
            ("n_targets", self.n_targets),
            ("n_paths", self.n_paths),
        ];
        for (field, v) in counts {
            if v == 0 {
                return Err(Error::InvalidScenario {
                    field,
                    reason: "must be at least 1".into(),
                });
            }
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidScenario {
                field: "rho",
                reason: format!("{} not in [0, 1]", self.rho),
            });
        }
        if !(self.xpd >= 0.0) || !self.xpd.is_finite() {
            return Err(Error::InvalidScenario {
                field: "xpd",
                reason: format!("{} must be finite and >= 0", self.xpd),
            });
        }
        if !(self.element_spacing_wavelengths > 0.0) || !self.element_spacing_wavelengths.is_finite() {
            return Err(Error::InvalidScenario {
                field: "element_spacing_wavelengths",
                reason: format!("{} must be finite and > 0", self.element_spacing_wavelengths),
            });
        }
        for (field, v) in [
            ("power_dbm", self.power_dbm),
            ("noise_user_dbm", self.noise_user_dbm),
            ("noise_radar_dbm", self.noise_radar_dbm),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidScenario {
                    field,
                    reason: "must be finite".into(),
                });
            }
        }
        Ok(())
    }

    /// Total transmit power `P` (linear).
    pub fn power(&self) -> f64 {
        db_to_linear(self.power_dbm)
    }

    /// Noise power at user `k` (linear). All users share one level.
    pub fn noise_user(&self, _k: usize) -> f64 {
        db_to_linear(self.noise_user_dbm)
    }

    /// Receiver noise power of the radar (linear).
    pub fn noise_radar(&self) -> f64 {
        db_to_linear(self.noise_radar_dbm)
    }

    /// Number of beamformer columns, `K + L_r`.
    pub fn n_streams(&self) -> usize {
        self.n_users + self.n_radar_streams
    }

    /// Number of sensed objects, `T + C`.
    pub fn n_objects(&self) -> usize {
        self.n_targets + self.n_clutter
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// One propagation path: direction, complex gain and the four polarization phases
/// `[HH, HV, VH, VV]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathRealization {
    pub angle: f64,
    pub gain: C64,
    pub phases: [f64; 4],
}

impl PathRealization {
    fn draw<R: Rng>(rng: &mut R) -> Self {
        let angle = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        let gain = C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;
        let mut phases = [0.0; 4];
        for p in &mut phases {
            *p = rng.random_range(0.0..2.0 * PI);
        }
        Self { angle, gain, phases }
    }
}

/// Realized channels of one Monte-Carlo draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// `H_k`, each `2 x 2 M_tx`.
    pub comm: Vec<CMat>,
    /// `G_q`, each `2 M_rx x 2 M_tx`; the first `T` entries are targets, the rest clutter.
    pub sensing: Vec<CMat>,
    /// Direction of every sensed object, in the order of `sensing`.
    pub object_angles: Vec<f64>,
}

/// ULA steering vector with entries `exp(-j 2 pi spacing i sin(theta))`.
pub fn steering_vector(m: usize, spacing: f64, theta: f64) -> Result<CVec> {
    if m == 0 {
        return Err(Error::InvalidDimension("steering vector needs m >= 1".into()));
    }
    let phase = -2.0 * PI * spacing * theta.sin();
    Ok(CVec::from_fn(m, |i, _| C64::from_polar(1.0, phase * i as f64)))
}

/// Depolarization matrix with cross-polar leakage `xpd` and phases `[HH, HV, VH, VV]`.
pub fn depolarization_matrix(xpd: f64, phases: [f64; 4]) -> Result<Matrix2<C64>> {
    if !(xpd >= 0.0) {
        return Err(Error::Domain(format!("xpd must be >= 0, got {xpd}")));
    }
    let scale = 1.0 / (1.0 + xpd).sqrt();
    let cross = xpd.sqrt();
    let e = |a: f64, mag: f64| C64::from_polar(mag * scale, a);
    Ok(Matrix2::new(
        e(phases[0], 1.0),
        e(phases[1], cross),
        e(phases[2], cross),
        e(phases[3], 1.0),
    ))
}

/// Field response matrix `a ⊗ I_2`, shape `2m x 2`.
pub fn field_response_matrix(steering: &CVec) -> CMat {
    let m = steering.len();
    CMat::from_fn(2 * m, 2, |r, c| {
        if r % 2 == c {
            steering[r / 2]
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

fn jmat(j: &Matrix2<C64>) -> CMat {
    CMat::from_fn(2, 2, |r, c| j[(r, c)])
}

/// Multipath communication channel `H = L^{-1/2} sum_l beta_l J_l A^T(theta_l)`.
pub fn build_comm_channel(cfg: &ScenarioConfig, paths: &[PathRealization]) -> Result<CMat> {
    if paths.is_empty() {
        return Err(Error::InvalidScenario {
            field: "n_paths",
            reason: "communication channel needs at least one path".into(),
        });
    }
    let mut h = CMat::zeros(2, 2 * cfg.m_tx);
    for path in paths {
        let a = field_response_matrix(&steering_vector(
            cfg.m_tx,
            cfg.element_spacing_wavelengths,
            path.angle,
        )?);
        let j = jmat(&depolarization_matrix(cfg.xpd, path.phases)?);
        h += (j * a.transpose()) * path.gain;
    }
    Ok(h / C64::new((paths.len() as f64).sqrt(), 0.0))
}

/// Monostatic sensing channel `G = beta A_rx(theta) J A_tx^T(theta)`.
pub fn build_sensing_channel(cfg: &ScenarioConfig, path: &PathRealization) -> Result<CMat> {
    let spacing = cfg.element_spacing_wavelengths;
    let a_tx = field_response_matrix(&steering_vector(cfg.m_tx, spacing, path.angle)?);
    let a_rx = field_response_matrix(&steering_vector(cfg.m_rx, spacing, path.angle)?);
    let j = jmat(&depolarization_matrix(cfg.xpd, path.phases)?);
    Ok((a_rx * j * a_tx.transpose()) * path.gain)
}

/// Draws the paths of one scenario; see [`crate::rng`] for the stream layout.
pub fn sample_paths(cfg: &ScenarioConfig) -> (Vec<Vec<PathRealization>>, Vec<PathRealization>) {
    let users = (0..cfg.n_users as u64)
        .map(|k| {
            (0..cfg.n_paths as u64)
                .map(|l| PathRealization::draw(&mut rng::stream(cfg.seed, &[TAG_USER, k, l])))
                .collect()
        })
        .collect();
    let targets = (0..cfg.n_targets as u64)
        .map(|t| PathRealization::draw(&mut rng::stream(cfg.seed, &[TAG_TARGET, t])));
    let clutter = (0..cfg.n_clutter as u64)
        .map(|c| PathRealization::draw(&mut rng::stream(cfg.seed, &[TAG_CLUTTER, c])));
    (users, targets.chain(clutter).collect())
}

/// Samples a full channel set. Pure function of `cfg` (including its seed).
pub fn sample_scenario(cfg: &ScenarioConfig) -> Result<ChannelSet> {
    cfg.validate()?;
    let (users, objects) = sample_paths(cfg);
    let comm = users
        .iter()
        .map(|paths| build_comm_channel(cfg, paths))
        .collect::<Result<Vec<_>>>()?;
    let sensing = objects
        .iter()
        .map(|p| build_sensing_channel(cfg, p))
        .collect::<Result<Vec<_>>>()?;
    Ok(ChannelSet {
        comm,
        sensing,
        object_angles: objects.iter().map(|p| p.angle).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    fn one_antenna() -> ScenarioConfig {
        ScenarioConfig {
            m_tx: 1,
            m_rx: 1,
            xpd: 0.0,
            ..ScenarioConfig::desk()
        }
    }

    fn unit_path(gain: f64) -> PathRealization {
        PathRealization {
            angle: 0.0,
            gain: C64::new(gain, 0.0),
            phases: [0.0; 4],
        }
    }

    #[test]
    fn steering_vector_examples() {
        let v = steering_vector(4, 0.5, 0.0).unwrap();
        assert!(v.iter().all(|x| close(*x, C64::new(1.0, 0.0), 1e-15)));

        let v = steering_vector(2, 0.5, FRAC_PI_2).unwrap();
        assert!(close(v[0], C64::new(1.0, 0.0), 1e-15));
        assert!(close(v[1], C64::new(-1.0, 0.0), 1e-15));

        let v = steering_vector(3, 0.5, PI / 6.0).unwrap();
        let want = [C64::new(1.0, 0.0), C64::new(0.0, -1.0), C64::new(-1.0, 0.0)];
        for (x, w) in v.iter().zip(want) {
            assert!(close(*x, w, 1e-12), "{x} vs {w}");
        }
        assert!(matches!(steering_vector(0, 0.5, 0.1), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn depolarization_examples() {
        let j = depolarization_matrix(0.0, [0.0; 4]).unwrap();
        assert!(close(j[(0, 0)], C64::new(1.0, 0.0), 1e-15));
        assert!(close(j[(0, 1)], C64::new(0.0, 0.0), 1e-15));
        assert!(close(j[(1, 0)], C64::new(0.0, 0.0), 1e-15));
        assert!(close(j[(1, 1)], C64::new(1.0, 0.0), 1e-15));

        let j = depolarization_matrix(1.0, [0.0; 4]).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for r in 0..2 {
            for c in 0..2 {
                assert!(close(j[(r, c)], C64::new(s, 0.0), 1e-15));
            }
        }
        assert!(matches!(depolarization_matrix(-0.1, [0.0; 4]), Err(Error::Domain(_))));
    }

    #[test]
    fn frobenius_norm_of_depolarization_is_sqrt_two() {
        let mut rng = rng::stream(11, &[1]);
        for _ in 0..1000 {
            let xpd: f64 = rng.random_range(0.0..20.0);
            let phases = [0; 4].map(|_| rng.random_range(0.0..2.0 * PI));
            let j = depolarization_matrix(xpd, phases).unwrap();
            // brute-force sum of squared magnitudes
            let mut sq = 0.0;
            for r in 0..2 {
                for c in 0..2 {
                    sq += j[(r, c)].norm_sqr();
                }
            }
            assert!((sq.sqrt() - 2f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn field_response_examples() {
        let a = field_response_matrix(&CVec::from_vec(vec![C64::new(1.0, 0.0)]));
        assert_eq!(a, CMat::identity(2, 2));

        let v = CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]);
        let a = field_response_matrix(&v);
        assert_eq!(a.nrows(), 4);
        assert_eq!(a.rows(0, 2).into_owned(), CMat::identity(2, 2));
        assert_eq!(a.rows(2, 2).into_owned(), -CMat::identity(2, 2));

        let s = steering_vector(5, 0.5, 0.3).unwrap();
        let a = field_response_matrix(&s);
        for c in 0..2 {
            assert!((a.column(c).norm() - s.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn comm_channel_examples() {
        let cfg = one_antenna();
        let h = build_comm_channel(&cfg, &[unit_path(1.0)]).unwrap();
        assert!((h - CMat::identity(2, 2)).norm() < 1e-15);

        let h = build_comm_channel(&cfg, &[unit_path(2.0)]).unwrap();
        assert!((h - CMat::identity(2, 2) * C64::new(2.0, 0.0)).norm() < 1e-15);

        // two equal paths: (1/sqrt 2)(I + I) = sqrt(2) I
        let h = build_comm_channel(&cfg, &[unit_path(1.0), unit_path(1.0)]).unwrap();
        let want = CMat::identity(2, 2) * C64::new(2.0 / 2f64.sqrt(), 0.0);
        assert!((h - want).norm() < 1e-14);

        assert!(build_comm_channel(&cfg, &[]).is_err());
    }

    #[test]
    fn comm_channel_superposition() {
        let cfg = ScenarioConfig::desk();
        let mut rng = rng::stream(5, &[2]);
        let p1 = PathRealization::draw(&mut rng);
        let p2 = PathRealization::draw(&mut rng);
        let base = build_comm_channel(&cfg, &[p1, p2]).unwrap();
        let doubled = build_comm_channel(
            &cfg,
            &[PathRealization { gain: p1.gain * 2.0, ..p1 }, p2],
        )
        .unwrap();
        let only1 = build_comm_channel(&cfg, &[p1, PathRealization { gain: C64::new(0.0, 0.0), ..p2 }]).unwrap();
        assert!((doubled - base - only1).norm() < 1e-12);
    }

    #[test]
    fn sensing_channel_examples() {
        let cfg = one_antenna();
        let g = build_sensing_channel(&cfg, &unit_path(1.0)).unwrap();
        assert!((g - CMat::identity(2, 2)).norm() < 1e-15);

        let cfg = ScenarioConfig::desk();
        let mut rng = rng::stream(9, &[3]);
        for _ in 0..20 {
            let p = PathRealization::draw(&mut rng);
            let g = build_sensing_channel(&cfg, &p).unwrap();
            let sv = g.clone().singular_values();
            let top = sv.max();
            let significant = sv.iter().filter(|s| **s > 1e-10 * top).count();
            assert!(significant <= 2);

            let c = C64::new(-0.7, 1.9);
            let scaled = build_sensing_channel(&cfg, &PathRealization { gain: p.gain * c, ..p }).unwrap();
            assert!((scaled - g * c).norm() < 1e-12);
        }
    }

    #[test]
    fn sample_scenario_is_deterministic() {
        let cfg = ScenarioConfig { seed: 42, ..ScenarioConfig::desk() };
        let a = sample_scenario(&cfg).unwrap();
        let b = sample_scenario(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.comm.len(), 4);
        assert_eq!(a.sensing.len(), 8);
        assert_eq!(a.comm[0].shape(), (2, 16));
        assert_eq!(a.sensing[0].shape(), (16, 16));

        let c = sample_scenario(&ScenarioConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn path_statistics() {
        let mut sum = 0.0;
        let n = 10_000;
        for i in 0..n {
            let p = PathRealization::draw(&mut rng::stream(1, &[i]));
            assert!(p.angle > -FRAC_PI_2 - 1e-15 && p.angle < FRAC_PI_2);
            assert!(p.phases.iter().all(|a| (0.0..2.0 * PI).contains(a)));
            sum += p.gain.norm_sqr();
        }
        let mean = sum / n as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean |beta|^2 = {mean}");
    }

    #[test]
    fn user_channels_do_not_depend_on_user_count() {
        let cfg = ScenarioConfig { seed: 3, ..ScenarioConfig::desk() };
        let a = sample_scenario(&cfg).unwrap();
        let b = sample_scenario(&ScenarioConfig { n_users: 6, ..cfg }).unwrap();
        assert_eq!(a.comm[..], b.comm[..4]);
    }

    #[test]
    fn validation_names_fields() {
        let bad = ScenarioConfig { rho: 1.5, ..ScenarioConfig::desk() };
        match bad.validate() {
            Err(Error::InvalidScenario { field, .. }) => assert_eq!(field, "rho"),
            other => panic!("{other:?}"),
        }
        let bad = ScenarioConfig { n_users: 0, ..ScenarioConfig::desk() };
        assert!(bad.validate().is_err());
        let ok = ScenarioConfig { n_clutter: 0, ..ScenarioConfig::desk() };
        assert!(ok.validate().is_ok());
    }
}
