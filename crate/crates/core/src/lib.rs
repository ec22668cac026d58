//! Fairness-aware beamforming for polarimetric integrated sensing and
//! communication (ISAC) with polarization-reconfigurable (PR) antennas.
//!
//! The crate jointly designs the transmit beamformer `W`, the per-antenna
//! transmit/receive polarization combiners, the per-user combiners and the
//! radar receive filters `F` so as to maximize a weighted sum of the
//! worst-case user SINR and worst-case target SCNR. The max-min problem is
//! rewritten in epigraph form, its inequality constraints are moved into
//! the objective as log-sum-exp smoothed exact penalties, and the result is
//! minimized by Riemannian gradient descent on the product of the power
//! sphere, the polarization circles and the flat blocks.
//!
//! Module map:
//!
//! - [`scenario`]: scenario configuration and seeded polarimetric channel synthesis.
//! - [`manifold`]: product-manifold points, tangent vectors, projection and retraction.
//! - [`objective`]: SINR/SCNR, log-sum-exp smoothing, penalized objective, violation.
//! - [`gradients`]: closed-form Euclidean gradients, Riemannian gradient, finite differences.
//! - [`solver`]: Armijo line search, the inner and outer loops, and the two baselines.
//! - [`bench`]: single runs, seeded Monte-Carlo campaigns, sweeps and summaries.
//!
//! See the `examples/` directory of this crate for one runnable program per capability.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod config;
pub mod error;
pub mod gradients;
pub mod manifold;
pub mod objective;
pub mod rng;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
pub use gradients::{euclidean_gradient, finite_difference_gradient, riemannian_gradient};
pub use manifold::{ProductPoint, TangentVector};
pub use objective::{max_violation, metric_report, penalized_objective, MetricReport};
pub use scenario::{sample_scenario, ChannelSet, ScenarioConfig};
pub use solver::{ep_prmgd, Hyperparams, SolveTrace};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<C64>;
/// A real 2-vector holding the (H, V) weights of one polarization combiner.
pub type Pol = nalgebra::Vector2<f64>;
