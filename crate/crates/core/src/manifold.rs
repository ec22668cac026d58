//! Product manifold of the power sphere, polarization circles and flat blocks.
//!
//! A [`ProductPoint`] holds the beamformer `W` on the sphere `||W||_F = sqrt(P)`,
//! one unit 2-vector per transmit antenna, receive antenna and user, the
//! receive filters `F`, and the epigraph scalars `a`, `b`. A [`TangentVector`]
//! has the same block layout and doubles as the container for ambient
//! (Euclidean) gradients.
//!
//! The metric is the unweighted ambient one: `Re Tr(X^H Y)` on complex blocks
//! and the dot product on real blocks.

use std::fmt::Write as _;

use rand_distr::{Distribution, StandardNormal};

use crate::rng::{self, TAG_POINT};
use crate::scenario::ScenarioConfig;
use crate::{CMat, Error, Pol, Result, C64};

/// Block dimensions shared by points and tangent vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub m_tx: usize,
    pub m_rx: usize,
    pub n_users: usize,
    pub n_streams: usize,
    pub n_targets: usize,
}

impl Shape {
    pub fn of(cfg: &ScenarioConfig) -> Self {
        Self {
            m_tx: cfg.m_tx,
            m_rx: cfg.m_rx,
            n_users: cfg.n_users,
            n_streams: cfg.n_streams(),
            n_targets: cfg.n_targets,
        }
    }

    fn check(&self, other: &Shape) -> Result<()> {
        if self != other {
            return Err(Error::DimensionMismatch {
                block: "product manifold",
                expected: format!("{self:?}"),
                got: format!("{other:?}"),
            });
        }
        Ok(())
    }
}

/// A point `(W, P_tx, P_rx, p_1..p_K, F, a, b)` on the product manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductPoint {
    /// Beamformer, `M_tx x (K + L_r)`.
    pub w: CMat,
    /// Transmit combiners, one per antenna.
    pub p_tx: Vec<Pol>,
    /// Receive combiners, one per antenna.
    pub p_rx: Vec<Pol>,
    /// User combiners.
    pub p_users: Vec<Pol>,
    /// Receive filters, `M_rx x T`.
    pub f: CMat,
    pub a: f64,
    pub b: f64,
}

/// A tangent (or ambient) vector with the block layout of [`ProductPoint`].
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub w: CMat,
    pub p_tx: Vec<Pol>,
    pub p_rx: Vec<Pol>,
    pub p_users: Vec<Pol>,
    pub f: CMat,
    pub a: f64,
    pub b: f64,
}

/// The equal-split combiner `(1/sqrt 2, 1/sqrt 2)`.
pub fn equal_split() -> Pol {
    Pol::new(std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2)
}

/// Block-diagonal combining matrix `blkdiag(p_1, ..., p_M)`, shape `2M x M`.
pub fn combining_matrix(p: &[Pol]) -> nalgebra::DMatrix<f64> {
    let mut out = nalgebra::DMatrix::zeros(2 * p.len(), p.len());
    for (m, v) in p.iter().enumerate() {
        out[(2 * m, m)] = v[0];
        out[(2 * m + 1, m)] = v[1];
    }
    out
}

fn gaussian_matrix<R: rand::Rng>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re * s, im * s)
    })
}

fn re_inner(x: &CMat, y: &CMat) -> f64 {
    x.iter().zip(y.iter()).map(|(a, b)| a.re * b.re + a.im * b.im).sum()
}

fn pol_inner(x: &[Pol], y: &[Pol]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a.dot(b)).sum()
}

fn check_pair<T, U>(name: &'static str, a: &[T], b: &[U]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            block: name,
            expected: a.len().to_string(),
            got: b.len().to_string(),
        });
    }
    Ok(())
}

/// Initial point: complex Gaussian `W` rescaled to the power sphere, every
/// combiner at the equal split, unit-variance Gaussian `F`, and `a = b = 0`.
pub fn random_point(cfg: &ScenarioConfig, seed: u64) -> ProductPoint {
    let mut rng = rng::stream(seed, &[TAG_POINT]);
    let w = gaussian_matrix(&mut rng, cfg.m_tx, cfg.n_streams());
    let f = gaussian_matrix(&mut rng, cfg.m_rx, cfg.n_targets);
    let w = &w * C64::new(cfg.power().sqrt() / w.norm(), 0.0);
    ProductPoint {
        w,
        p_tx: vec![equal_split(); cfg.m_tx],
        p_rx: vec![equal_split(); cfg.m_rx],
        p_users: vec![equal_split(); cfg.n_users],
        f,
        a: 0.0,
        b: 0.0,
    }
}

impl ProductPoint {
    pub fn shape(&self) -> Shape {
        Shape {
            m_tx: self.w.nrows(),
            m_rx: self.f.nrows(),
            n_users: self.p_users.len(),
            n_streams: self.w.ncols(),
            n_targets: self.f.ncols(),
        }
    }

    fn check_consistent(&self) -> Result<()> {
        check_pair("p_tx", &self.p_tx, &vec![(); self.w.nrows()])?;
        check_pair("p_rx", &self.p_rx, &vec![(); self.f.nrows()])
    }

    pub fn p_tx_matrix(&self) -> nalgebra::DMatrix<f64> {
        combining_matrix(&self.p_tx)
    }

    pub fn p_rx_matrix(&self) -> nalgebra::DMatrix<f64> {
        combining_matrix(&self.p_rx)
    }

    /// Ambient point `self - step * dir` (no retraction).
    pub fn offset(&self, dir: &TangentVector, step: f64) -> ProductPoint {
        let s = C64::new(step, 0.0);
        let sub = |p: &[Pol], d: &[Pol]| -> Vec<Pol> {
            p.iter().zip(d).map(|(x, y)| x - y * step).collect()
        };
        ProductPoint {
            w: &self.w - &dir.w * s,
            p_tx: sub(&self.p_tx, &dir.p_tx),
            p_rx: sub(&self.p_rx, &dir.p_rx),
            p_users: sub(&self.p_users, &dir.p_users),
            f: &self.f - &dir.f * s,
            a: self.a - step * dir.a,
            b: self.b - step * dir.b,
        }
    }

    /// Serializes to the line-oriented checkpoint format.
    ///
    /// ```text
    /// polarisac-point v1
    /// shape <m_tx> <m_rx> <n_users> <n_streams> <n_targets>
    /// w                      # m_tx lines, each n_streams pairs "re im"
    /// p_tx                   # m_tx lines "h v"
    /// p_rx                   # m_rx lines
    /// p_users                # n_users lines
    /// f                      # m_rx lines, each n_targets pairs
    /// a <value>
    /// b <value>
    /// ```
    pub fn to_text(&self) -> String {
        let s = self.shape();
        let mut out = String::from("polarisac-point v1\n");
        let _ = writeln!(
            out,
            "shape {} {} {} {} {}",
            s.m_tx, s.m_rx, s.n_users, s.n_streams, s.n_targets
        );
        let cmat = |out: &mut String, name: &str, m: &CMat| {
            let _ = writeln!(out, "{name}");
            for r in 0..m.nrows() {
                let row: Vec<String> = (0..m.ncols())
                    .map(|c| format!("{} {}", m[(r, c)].re, m[(r, c)].im))
                    .collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        };
        let pols = |out: &mut String, name: &str, p: &[Pol]| {
            let _ = writeln!(out, "{name}");
            for v in p {
                let _ = writeln!(out, "{} {}", v[0], v[1]);
            }
        };
        cmat(&mut out, "w", &self.w);
        pols(&mut out, "p_tx", &self.p_tx);
        pols(&mut out, "p_rx", &self.p_rx);
        pols(&mut out, "p_users", &self.p_users);
        cmat(&mut out, "f", &self.f);
        let _ = writeln!(out, "a {}", self.a);
        let _ = writeln!(out, "b {}", self.b);
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut rd = LineReader {
            lines: Box::new(text.lines().filter(|l| !l.trim().is_empty())),
        };
        if rd.next("header")?.trim() != "polarisac-point v1" {
            return Err(Error::Parse("missing `polarisac-point v1` header".into()));
        }
        let dims = parse_tagged(rd.next("shape")?, "shape")?;
        if dims.len() != 5 || dims.iter().any(|x| *x < 0.0 || x.fract() != 0.0) {
            return Err(Error::Parse("shape needs 5 non-negative integers".into()));
        }
        let d: Vec<usize> = dims.iter().map(|x| *x as usize).collect();
        let (m_tx, m_rx, n_users, n_streams, n_targets) = (d[0], d[1], d[2], d[3], d[4]);
        let w = rd.cmat("w", m_tx, n_streams)?;
        let p_tx = rd.pols("p_tx", m_tx)?;
        let p_rx = rd.pols("p_rx", m_rx)?;
        let p_users = rd.pols("p_users", n_users)?;
        let f = rd.cmat("f", m_rx, n_targets)?;
        let a = scalar(rd.next("a")?, "a")?;
        let b = scalar(rd.next("b")?, "b")?;
        Ok(ProductPoint { w, p_tx, p_rx, p_users, f, a, b })
    }
}

struct LineReader<'a> {
    lines: Box<dyn Iterator<Item = &'a str> + 'a>,
}

impl<'a> LineReader<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str> {
        self.lines
            .next()
            .ok_or_else(|| Error::Parse(format!("unexpected end of input, expected {what}")))
    }

    fn cmat(&mut self, name: &str, rows: usize, cols: usize) -> Result<CMat> {
        expect_tag(self.next(name)?, name)?;
        let mut m = CMat::zeros(rows, cols);
        for r in 0..rows {
            let vals = parse_floats(self.next(name)?)?;
            if vals.len() != 2 * cols {
                return Err(Error::Parse(format!("{name}: row {r} has {} values", vals.len())));
            }
            for c in 0..cols {
                m[(r, c)] = C64::new(vals[2 * c], vals[2 * c + 1]);
            }
        }
        Ok(m)
    }

    fn pols(&mut self, name: &str, n: usize) -> Result<Vec<Pol>> {
        expect_tag(self.next(name)?, name)?;
        (0..n)
            .map(|_| match parse_floats(self.next(name)?)?.as_slice() {
                [h, v] => Ok(Pol::new(*h, *v)),
                _ => Err(Error::Parse(format!("{name}: expected 2 values"))),
            })
            .collect()
    }
}

fn expect_tag(line: &str, tag: &str) -> Result<()> {
    if line.trim() != tag {
        return Err(Error::Parse(format!("expected `{tag}`, found `{}`", line.trim())));
    }
    Ok(())
}

fn parse_floats(line: &str) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("`{t}`: {e}"))))
        .collect()
}

fn parse_tagged(line: &str, tag: &str) -> Result<Vec<f64>> {
    let mut it = line.split_whitespace();
    if it.next() != Some(tag) {
        return Err(Error::Parse(format!("expected `{tag}` line")));
    }
    parse_floats(&it.collect::<Vec<_>>().join(" "))
}

fn scalar(line: &str, tag: &str) -> Result<f64> {
    match parse_tagged(line, tag)?.as_slice() {
        [v] => Ok(*v),
        _ => Err(Error::Parse(format!("`{tag}` takes one value"))),
    }
}

impl TangentVector {
    pub fn zeros(shape: Shape) -> Self {
        Self {
            w: CMat::zeros(shape.m_tx, shape.n_streams),
            p_tx: vec![Pol::zeros(); shape.m_tx],
            p_rx: vec![Pol::zeros(); shape.m_rx],
            p_users: vec![Pol::zeros(); shape.n_users],
            f: CMat::zeros(shape.m_rx, shape.n_targets),
            a: 0.0,
            b: 0.0,
        }
    }

    pub fn shape(&self) -> Shape {
        Shape {
            m_tx: self.w.nrows(),
            m_rx: self.f.nrows(),
            n_users: self.p_users.len(),
            n_streams: self.w.ncols(),
            n_targets: self.f.ncols(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn norm_sqr(&self) -> f64 {
        inner_unchecked(self, self)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let c = C64::new(s, 0.0);
        let sc = |p: &[Pol]| p.iter().map(|v| v * s).collect();
        Self {
            w: &self.w * c,
            p_tx: sc(&self.p_tx),
            p_rx: sc(&self.p_rx),
            p_users: sc(&self.p_users),
            f: &self.f * c,
            a: self.a * s,
            b: self.b * s,
        }
    }

    /// `self - other`, block by block.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.shape().check(&other.shape())?;
        let d = |p: &[Pol], q: &[Pol]| p.iter().zip(q).map(|(x, y)| x - y).collect();
        Ok(Self {
            w: &self.w - &other.w,
            p_tx: d(&self.p_tx, &other.p_tx),
            p_rx: d(&self.p_rx, &other.p_rx),
            p_users: d(&self.p_users, &other.p_users),
            f: &self.f - &other.f,
            a: self.a - other.a,
            b: self.b - other.b,
        })
    }

    /// Zeroes every polarization block.
    pub fn without_polarization(mut self) -> Self {
        for v in self
            .p_tx
            .iter_mut()
            .chain(self.p_rx.iter_mut())
            .chain(self.p_users.iter_mut())
        {
            *v = Pol::zeros();
        }
        self
    }
}

fn inner_unchecked(x: &TangentVector, y: &TangentVector) -> f64 {
    re_inner(&x.w, &y.w)
        + pol_inner(&x.p_tx, &y.p_tx)
        + pol_inner(&x.p_rx, &y.p_rx)
        + pol_inner(&x.p_users, &y.p_users)
        + re_inner(&x.f, &y.f)
        + x.a * y.a
        + x.b * y.b
}

/// Ambient metric: `Re Tr(X^H Y)` on complex blocks, dot products on real ones.
pub fn inner_product(x: &TangentVector, y: &TangentVector) -> Result<f64> {
    x.shape().check(&y.shape())?;
    Ok(inner_unchecked(x, y))
}

/// Orthogonal projection of an ambient block set onto the tangent space at `base`.
///
/// `W`: removes `Re Tr(G W^H) W / ||W||^2`; each combiner: removes `(p^T g) p`;
/// `F`, `a`, `b` pass through.
pub fn project_to_tangent(base: &ProductPoint, ambient: &TangentVector) -> Result<TangentVector> {
    base.shape().check(&ambient.shape())?;
    base.check_consistent()?;
    let power = base.w.norm_squared();
    let w = if power > 0.0 {
        let radial = re_inner(&ambient.w, &base.w) / power;
        &ambient.w - &base.w * C64::new(radial, 0.0)
    } else {
        ambient.w.clone()
    };
    let proj = |p: &[Pol], g: &[Pol]| -> Vec<Pol> {
        p.iter().zip(g).map(|(p, g)| g - p * p.dot(g)).collect()
    };
    Ok(TangentVector {
        w,
        p_tx: proj(&base.p_tx, &ambient.p_tx),
        p_rx: proj(&base.p_rx, &ambient.p_rx),
        p_users: proj(&base.p_users, &ambient.p_users),
        f: ambient.f.clone(),
        a: ambient.a,
        b: ambient.b,
    })
}

/// Steps from `base` along `-direction` by `step` and normalizes back onto the manifold.
///
/// The power level is taken from `||W_base||_F^2`. A zero step returns `base` unchanged.
pub fn retract(base: &ProductPoint, direction: &TangentVector, step: f64) -> Result<ProductPoint> {
    base.shape().check(&direction.shape())?;
    if step == 0.0 {
        return Ok(base.clone());
    }
    let power = base.w.norm_squared();
    let mut cand = base.offset(direction, step);
    let wn = cand.w.norm();
    if !(wn > 0.0) {
        return Err(Error::DegenerateRetraction("W"));
    }
    cand.w *= C64::new(power.sqrt() / wn, 0.0);
    for (name, block) in [
        ("p_tx", &mut cand.p_tx),
        ("p_rx", &mut cand.p_rx),
        ("p_users", &mut cand.p_users),
    ] {
        for p in block.iter_mut() {
            let n = p.norm();
            if !(n > 0.0) {
                return Err(Error::DegenerateRetraction(name));
            }
            *p /= n;
        }
    }
    Ok(cand)
}

/// Ambient product distance between two points.
pub fn point_distance(x: &ProductPoint, y: &ProductPoint) -> Result<f64> {
    x.shape().check(&y.shape())?;
    let pol = |p: &[Pol], q: &[Pol]| -> f64 { p.iter().zip(q).map(|(a, b)| (a - b).norm_squared()).sum() };
    let sq = (&x.w - &y.w).norm_squared()
        + pol(&x.p_tx, &y.p_tx)
        + pol(&x.p_rx, &y.p_rx)
        + pol(&x.p_users, &y.p_users)
        + (&x.f - &y.f).norm_squared()
        + (x.a - y.a).powi(2)
        + (x.b - y.b).powi(2);
    Ok(sq.sqrt())
}

/// Largest deviation from the power and unit-norm constraints.
pub fn feasibility_residual(x: &ProductPoint, cfg: &ScenarioConfig) -> f64 {
    let mut r = (x.w.norm() - cfg.power().sqrt()).abs();
    for p in x.p_tx.iter().chain(&x.p_rx).chain(&x.p_users) {
        r = r.max((p.norm() - 1.0).abs());
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn cfg() -> ScenarioConfig {
        ScenarioConfig::gradcheck()
    }

    pub(crate) fn random_ambient(shape: Shape, seed: u64) -> TangentVector {
        let mut rng = rng::stream(seed, &[99]);
        let mut pol = |n: usize| -> Vec<Pol> {
            (0..n)
                .map(|_| Pol::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect()
        };
        let p_tx = pol(shape.m_tx);
        let p_rx = pol(shape.m_rx);
        let p_users = pol(shape.n_users);
        let mut rng = rng::stream(seed, &[100]);
        TangentVector {
            w: gaussian_matrix(&mut rng, shape.m_tx, shape.n_streams),
            p_tx,
            p_rx,
            p_users,
            f: gaussian_matrix(&mut rng, shape.m_rx, shape.n_targets),
            a: rng.random_range(-1.0..1.0),
            b: rng.random_range(-1.0..1.0),
        }
    }

    #[test]
    fn random_point_satisfies_constraints() {
        let c = cfg();
        let x = random_point(&c, 1);
        assert!(feasibility_residual(&x, &c) <= 1e-12);
        assert_eq!(x, random_point(&c, 1));
        assert_ne!(x, random_point(&c, 2));
        assert_eq!((x.a, x.b), (0.0, 0.0));

        let tiny = ScenarioConfig {
            m_tx: 1,
            n_users: 1,
            n_radar_streams: 0,
            power_dbm: 0.0,
            ..cfg()
        };
        let x = random_point(&tiny, 3);
        assert!((x.w[(0, 0)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn projection_examples() {
        let c = cfg();
        let x = random_point(&c, 4);
        let mut g = TangentVector::zeros(x.shape());
        g.w = x.w.clone();
        let xi = project_to_tangent(&x, &g).unwrap();
        assert!(xi.w.norm() < 1e-12);

        // p-block already orthogonal to p is left alone
        let mut g = TangentVector::zeros(x.shape());
        let p = x.p_tx[0];
        g.p_tx[0] = Pol::new(-p[1], p[0]) * 3.0;
        let xi = project_to_tangent(&x, &g).unwrap();
        assert!((xi.p_tx[0] - g.p_tx[0]).norm() < 1e-15);
    }

    #[test]
    fn projection_is_tangent_and_passes_flat_blocks() {
        let c = cfg();
        let x = random_point(&c, 5);
        let g = random_ambient(x.shape(), 6);
        let xi = project_to_tangent(&x, &g).unwrap();
        assert!(re_inner(&x.w, &xi.w).abs() <= 1e-10);
        for (p, v) in x.p_tx.iter().chain(&x.p_rx).chain(&x.p_users).zip(
            xi.p_tx.iter().chain(&xi.p_rx).chain(&xi.p_users),
        ) {
            assert!(p.dot(v).abs() <= 1e-10);
        }
        assert_eq!(xi.f, g.f);
        assert_eq!((xi.a, xi.b), (g.a, g.b));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let x = random_point(&cfg(), 1);
        let other = ScenarioConfig { m_tx: 5, ..cfg() };
        let g = TangentVector::zeros(Shape::of(&other));
        assert!(matches!(project_to_tangent(&x, &g), Err(Error::DimensionMismatch { .. })));
        assert!(inner_product(&g, &TangentVector::zeros(x.shape())).is_err());
        assert!(point_distance(&x, &random_point(&other, 1)).is_err());
    }

    #[test]
    fn retraction_examples() {
        let c = cfg();
        let x = random_point(&c, 7);
        let d = project_to_tangent(&x, &random_ambient(x.shape(), 8)).unwrap();
        assert_eq!(retract(&x, &d, 0.0).unwrap(), x);

        let mut base = x.clone();
        base.p_tx[0] = Pol::new(1.0, 0.0);
        let mut dir = TangentVector::zeros(x.shape());
        dir.p_tx[0] = Pol::new(0.0, 1.0);
        let y = retract(&base, &dir, 1.0).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((y.p_tx[0] - Pol::new(s, -s)).norm() < 1e-15);

        // candidate W equal to 2W retracts back to W
        let mut dir = TangentVector::zeros(x.shape());
        dir.w = -x.w.clone();
        let y = retract(&x, &dir, 1.0).unwrap();
        assert!((&y.w - &x.w).norm() < 1e-12);
        assert!(feasibility_residual(&y, &c) <= 1e-12);
    }

    #[test]
    fn degenerate_retraction_is_an_error() {
        let x = random_point(&cfg(), 9);
        let mut dir = TangentVector::zeros(x.shape());
        dir.w = x.w.clone();
        assert!(matches!(retract(&x, &dir, 1.0), Err(Error::DegenerateRetraction("W"))));
        let mut dir = TangentVector::zeros(x.shape());
        dir.p_users[1] = x.p_users[1];
        assert!(matches!(retract(&x, &dir, 1.0), Err(Error::DegenerateRetraction("p_users"))));
    }

    #[test]
    fn inner_product_counts_real_dimensions() {
        let s = Shape::of(&cfg());
        let mut ones = TangentVector::zeros(s);
        ones.w.fill(C64::new(1.0, 1.0));
        ones.f.fill(C64::new(1.0, 1.0));
        for v in ones.p_tx.iter_mut().chain(ones.p_rx.iter_mut()).chain(ones.p_users.iter_mut()) {
            *v = Pol::new(1.0, 1.0);
        }
        ones.a = 1.0;
        ones.b = 1.0;
        // explicit summation oracle over every real coordinate
        let mut count = 0usize;
        count += 2 * s.m_tx * s.n_streams;
        count += 2 * (s.m_tx + s.m_rx + s.n_users);
        count += 2 * s.m_rx * s.n_targets;
        count += 2;
        assert_eq!(inner_product(&ones, &ones).unwrap(), count as f64);
        assert_eq!(ones.norm_sqr(), count as f64);
    }

    #[test]
    fn distance_examples() {
        let x = random_point(&cfg(), 10);
        assert_eq!(point_distance(&x, &x).unwrap(), 0.0);
        let mut y = x.clone();
        y.a += 3.0;
        assert_eq!(point_distance(&x, &y).unwrap(), 3.0);
    }

    #[test]
    fn feasibility_detects_scaled_beamformer() {
        let c = ScenarioConfig { power_dbm: 0.0, ..cfg() };
        let mut x = random_point(&c, 11);
        x.w *= C64::new(2.0, 0.0);
        assert!(feasibility_residual(&x, &c) >= 1.0 - 1e-12);
    }

    #[test]
    fn first_order_retraction() {
        let c = cfg();
        let x = random_point(&c, 12);
        let d = project_to_tangent(&x, &random_ambient(x.shape(), 13)).unwrap();
        let mut prev = f64::INFINITY;
        for t in [1e-2, 1e-3, 1e-4] {
            let r = retract(&x, &d, t).unwrap();
            let lin = x.offset(&d, t);
            let ratio = point_distance(&r, &lin).unwrap() / t;
            assert!(ratio < prev, "ratio {ratio} at t={t}");
            prev = ratio;
        }
    }

    #[test]
    fn text_format_round_trip() {
        let mut x = random_point(&cfg(), 14);
        x.a = 0.1 + 0.2;
        x.b = -1e-300;
        let back = ProductPoint::from_text(&x.to_text()).unwrap();
        assert_eq!(back, x);
        assert!(ProductPoint::from_text("garbage").is_err());
        let truncated: String = x.to_text().lines().take(5).collect::<Vec<_>>().join("\n");
        assert!(ProductPoint::from_text(&truncated).is_err());
    }
}
