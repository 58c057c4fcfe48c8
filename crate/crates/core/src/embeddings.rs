//! Holomorphic discs and maximal polydiscs in a domain, their pulled-back
//! metrics, and integral curves of the gradient field.
//!
//! For a holomorphic disc `u: Δ → Ω` the induced metric is `iλ dζ∧dζ̄` with
//!
//! ```text
//! λ(ζ) = g_{αβ̄}(u(ζ)) u'^α(ζ) conj(u'^β(ζ))
//! ```
//!
//! and its Gaussian curvature is measured with
//! [`gauss_curvature_1d`](crate::geometry::gauss_curvature_1d).

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::domains::{DomainSpec, FactorKind, Point};
use crate::error::{check_dim, GeomError, Result};
use crate::geometry::{gauss_curvature_1d, gradient_vector, metric_at, MetricField};

type DiscMap = dyn Fn(C64) -> Vec<C64> + Send + Sync;

/// Step of the central difference used for `u'` when no closed form is given.
pub const DISC_DERIVATIVE_STEP: f64 = 1e-3;

/// Window around an integer inside which a measured disc rank is accepted.
pub const RANK_WINDOW: f64 = 0.05;

/// A holomorphic map from the unit disc into a domain of dimension
/// `target_dim`.
#[derive(Clone)]
pub struct DiscEmbedding {
    label: String,
    map: Arc<DiscMap>,
    derivative: Option<Arc<DiscMap>>,
    declared_rank: usize,
    target_dim: usize,
}

impl fmt::Debug for DiscEmbedding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiscEmbedding")
            .field("label", &self.label)
            .field("declared_rank", &self.declared_rank)
            .field("target_dim", &self.target_dim)
            .finish()
    }
}

impl DiscEmbedding {
    pub fn new<F>(label: impl Into<String>, target_dim: usize, declared_rank: usize, map: F) -> Self
    where
        F: Fn(C64) -> Vec<C64> + Send + Sync + 'static,
    {
        Self {
            label: label.into(),
            map: Arc::new(map),
            derivative: None,
            declared_rank,
            target_dim,
        }
    }

    pub fn with_derivative<F>(mut self, d: F) -> Self
    where
        F: Fn(C64) -> Vec<C64> + Send + Sync + 'static,
    {
        self.derivative = Some(Arc::new(d));
        self
    }

    /// `ζ ↦ base + ζ·direction`.
    pub fn affine(base: Vec<C64>, direction: Vec<C64>, declared_rank: usize) -> Self {
        let n = base.len();
        let d2 = direction.clone();
        Self::new("affine", n, declared_rank, move |z| {
            base.iter().zip(&direction).map(|(b, d)| b + z * d).collect()
        })
        .with_derivative(move |_| d2.clone())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn declared_rank(&self) -> usize {
        self.declared_rank
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn eval(&self, zeta: C64) -> Point {
        Point((self.map)(zeta))
    }

    /// `u'(ζ)`, closed form or Richardson-extrapolated central difference.
    pub fn derivative(&self, zeta: C64) -> Vec<C64> {
        if let Some(d) = &self.derivative {
            return d(zeta);
        }
        let central = |h: f64| -> Vec<C64> {
            let p = (self.map)(zeta + h);
            let m = (self.map)(zeta - h);
            p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect()
        };
        let h = DISC_DERIVATIVE_STEP;
        let coarse = central(h);
        let fine = central(h / 2.0);
        fine.iter().zip(&coarse).map(|(f, c)| f * (4.0 / 3.0) - c / 3.0).collect()
    }
}

/// `ζ ↦ (ζ, …, ζ, 0, …, 0)` with `k` copies of `ζ`, into `Δⁿ`.
pub fn diagonal_disc(n: usize, k: usize) -> Result<DiscEmbedding> {
    if k == 0 || k > n {
        return Err(GeomError::InvalidArgument(format!(
            "diagonal disc needs 1 <= k <= n, got k={k}, n={n}"
        )));
    }
    let zero = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    Ok(DiscEmbedding::new(format!("diagonal({n},{k})"), n, k, move |z| {
        (0..n).map(|a| if a < k { z } else { zero }).collect()
    })
    .with_derivative(move |_| (0..n).map(|a| if a < k { one } else { zero }).collect()))
}

/// A linear polydisc `(ζ¹,…,ζʳ) ↦ Σ_j ζʲ e_j` in a domain.
#[derive(Clone, Debug, PartialEq)]
pub struct PolydiscEmbedding {
    directions: Vec<Vec<C64>>,
    target_dim: usize,
}

impl PolydiscEmbedding {
    pub fn rank(&self) -> usize {
        self.directions.len()
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn eval(&self, zetas: &[C64]) -> Result<Point> {
        check_dim(self.rank(), zetas.len())?;
        let mut out = vec![C64::new(0.0, 0.0); self.target_dim];
        for (z, d) in zetas.iter().zip(&self.directions) {
            for (o, e) in out.iter_mut().zip(d) {
                *o += z * e;
            }
        }
        Ok(Point(out))
    }

    /// The `j`-th coordinate disc `ζ ↦ ζ e_j`.
    pub fn coordinate_disc(&self, j: usize) -> Result<DiscEmbedding> {
        let d = self.directions.get(j).cloned().ok_or_else(|| {
            GeomError::InvalidArgument(format!("coordinate {j} out of range for rank {}", self.rank()))
        })?;
        Ok(DiscEmbedding::affine(vec![C64::new(0.0, 0.0); self.target_dim], d, 1)
            .relabel(format!("coordinate-disc({j})")))
    }

    /// The full-rank diagonal `ζ ↦ ζ Σ_j e_j`.
    pub fn full_rank_disc(&self) -> DiscEmbedding {
        let mut d = vec![C64::new(0.0, 0.0); self.target_dim];
        for dir in &self.directions {
            for (o, e) in d.iter_mut().zip(dir) {
                *o += e;
            }
        }
        DiscEmbedding::affine(vec![C64::new(0.0, 0.0); self.target_dim], d, self.rank())
            .relabel("full-rank-disc".to_string())
    }
}

impl DiscEmbedding {
    fn relabel(mut self, label: String) -> Self {
        self.label = label;
        self
    }
}

/// The maximal polydisc of `typeI:p,q`: `diag(ζ¹,…,ζʳ)` in the leading block.
pub fn maximal_polydisc_typei(p: usize, q: usize) -> Result<PolydiscEmbedding> {
    if p == 0 || q == 0 {
        return Err(GeomError::InvalidArgument("typeI needs p, q >= 1".into()));
    }
    let r = p.min(q);
    let directions = (0..r)
        .map(|j| {
            let mut e = vec![C64::new(0.0, 0.0); p * q];
            e[j * q + j] = C64::new(1.0, 0.0);
            e
        })
        .collect();
    Ok(PolydiscEmbedding {
        directions,
        target_dim: p * q,
    })
}

/// A maximal polydisc through the origin of any registered domain: the union
/// of the factors' maximal polydiscs.
pub fn maximal_polydisc(domain: &DomainSpec) -> PolydiscEmbedding {
    let n = domain.dim();
    let mut directions = Vec::with_capacity(domain.rank());
    for (f, block) in domain.factors().iter().zip(domain.blocks()) {
        let mut unit = |offset: usize| {
            let mut e = vec![C64::new(0.0, 0.0); n];
            e[block.start + offset] = C64::new(1.0, 0.0);
            directions.push(e);
        };
        match f.kind() {
            FactorKind::Disc | FactorKind::Ball(_) => unit(0),
            FactorKind::Polydisc(m) => (0..m).for_each(unit),
            FactorKind::TypeI(p, q) => (0..p.min(q)).for_each(|j| unit(j * q + j)),
        }
    }
    PolydiscEmbedding {
        directions,
        target_dim: n,
    }
}

/// Conformal factor `λ(ζ)` of `u*ω`.
pub fn pullback_metric_1d(u: &DiscEmbedding, m: &MetricField, zeta: C64) -> Result<f64> {
    check_dim(m.dim(), u.target_dim())?;
    if zeta.norm() >= 1.0 {
        return Err(GeomError::DomainBoundary(format!("disc parameter {zeta} outside the unit disc")));
    }
    let du = u.derivative(zeta);
    if du.iter().map(|c| c.norm_sqr()).sum::<f64>() < 1e-24 {
        return Err(GeomError::InconsistentEmbedding(format!(
            "{} has vanishing derivative at {zeta}",
            u.label()
        )));
    }
    let g = metric_at(m, &u.eval(zeta))?;
    Ok(g.norm_sq(&du))
}

/// Gaussian curvature of `u*ω` at `ζ`.
pub fn pullback_curvature(u: &DiscEmbedding, m: &MetricField, zeta: C64) -> Result<f64> {
    let lambda = |w: C64| pullback_metric_1d(u, m, w);
    gauss_curvature_1d(&lambda, zeta, m.second_step())
}

fn round_rank(x: f64, what: &str) -> Result<usize> {
    let k = x.round();
    if k < 1.0 || (x - k).abs() > RANK_WINDOW {
        return Err(GeomError::InconsistentEmbedding(format!(
            "{what}: measured rank {x:.4} is not an integer"
        )));
    }
    Ok(k as usize)
}

/// `k = λ(0)·K/2`, the rank recovered from the pulled-back metric on a
/// polydisc with Ricci constant `K`.
pub fn disc_rank_measured(u: &DiscEmbedding, m: &MetricField) -> Result<usize> {
    let lambda = pullback_metric_1d(u, m, C64::new(0.0, 0.0))?;
    round_rank(lambda * m.domain().ricci_constant() / 2.0, u.label())
}

/// Rank of a disc in a polydisc whose factors carry Ricci constants `ks`.
/// The active factors are those where `u'(0) ≠ 0`; the measured
/// `K_u = 2/λ(0)` must equal `(Σ_active 1/K_α)⁻¹`.
pub fn disc_rank_measured_mixed(u: &DiscEmbedding, m: &MetricField, ks: &[f64]) -> Result<usize> {
    check_dim(u.target_dim(), ks.len())?;
    let du = u.derivative(C64::new(0.0, 0.0));
    let active: Vec<usize> = (0..ks.len()).filter(|&a| du[a].norm() > 1e-8).collect();
    let lambda = pullback_metric_1d(u, m, C64::new(0.0, 0.0))?;
    let measured = 2.0 / lambda;
    let expected = 1.0 / active.iter().map(|&a| 1.0 / ks[a]).sum::<f64>();
    if ((measured - expected) / expected).abs() > RANK_WINDOW {
        return Err(GeomError::InconsistentEmbedding(format!(
            "{}: K_u = {measured:.5}, active factors predict {expected:.5}",
            u.label()
        )));
    }
    Ok(active.len())
}

/// Disc automorphism `ζ ↦ e^{iθ}(ζ − a)/(1 − āζ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mobius {
    pub a: C64,
    pub theta: f64,
}

impl Mobius {
    pub fn new(a: C64, theta: f64) -> Result<Self> {
        if a.norm() >= 1.0 {
            return Err(GeomError::InvalidArgument(format!("Möbius center {a} outside the disc")));
        }
        Ok(Self { a, theta })
    }

    pub fn eval(&self, z: C64) -> C64 {
        C64::from_polar(1.0, self.theta) * (z - self.a) / (1.0 - self.a.conj() * z)
    }

    pub fn derivative(&self, z: C64) -> C64 {
        let d = 1.0 - self.a.conj() * z;
        C64::from_polar(1.0, self.theta) * (1.0 - self.a.norm_sqr()) / (d * d)
    }
}

/// `| |u'(ζ)|² − ((1 − |u(ζ)|²)/(1 − |ζ|²))² |`, zero for disc automorphisms.
pub fn schwarz_pick_residual<U, D>(u: U, du: D, zeta: C64) -> f64
where
    U: Fn(C64) -> C64,
    D: Fn(C64) -> C64,
{
    let ratio = (1.0 - u(zeta).norm_sqr()) / (1.0 - zeta.norm_sqr());
    (du(zeta).norm_sqr() - ratio * ratio).abs()
}

/// A sampled trajectory of the real flow `dz/dt = V(z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<Point>,
    /// Set when integration stopped because the next point left the
    /// margin-shrunk domain; the trajectory then holds the points before exit.
    pub escaped: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest `|z^α − z^β|` over all points and coordinate pairs.
    pub fn coordinate_spread(&self) -> f64 {
        self.points
            .iter()
            .map(|p| {
                let mut s: f64 = 0.0;
                for a in p.iter() {
                    for b in p.iter() {
                        s = s.max((a - b).norm());
                    }
                }
                s
            })
            .fold(0.0, f64::max)
    }
}

/// Fixed-step RK4 integration of the gradient field from `z0` up to `t_max`.
pub fn flow_gradient(m: &MetricField, z0: &[C64], t_max: f64, dt: f64, margin: f64) -> Result<Trajectory> {
    check_dim(m.dim(), z0.len())?;
    if !(dt > 0.0 && dt.is_finite()) || !(t_max >= 0.0 && t_max.is_finite()) {
        return Err(GeomError::InvalidArgument(format!("bad time grid t_max={t_max}, dt={dt}")));
    }
    if !m.domain().contains(z0, margin)? {
        return Err(GeomError::DomainBoundary(format!("flow start {z0:?} is not interior")));
    }
    let steps = (t_max / dt).round() as usize;
    let mut traj = Trajectory {
        times: vec![0.0],
        points: vec![Point(z0.to_vec())],
        escaped: false,
    };
    let field = |z: &[C64]| gradient_vector(m, z).map(|v| v.components);
    let axpy = |z: &[C64], k: &[C64], s: f64| -> Vec<C64> {
        z.iter().zip(k).map(|(a, b)| a + b * s).collect()
    };
    let mut z = z0.to_vec();
    for step in 1..=steps {
        let next = (|| -> Result<Vec<C64>> {
            let k1 = field(&z)?;
            let k2 = field(&axpy(&z, &k1, dt / 2.0))?;
            let k3 = field(&axpy(&z, &k2, dt / 2.0))?;
            let k4 = field(&axpy(&z, &k3, dt))?;
            Ok((0..z.len())
                .map(|i| z[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0))
                .collect())
        })();
        match next {
            Ok(w) if m.domain().contains(&w, margin)? => {
                z = w;
                traj.times.push(step as f64 * dt);
                traj.points.push(Point(z.clone()));
            }
            Ok(_) | Err(GeomError::DomainBoundary(_)) => {
                traj.escaped = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(traj)
}

/// Curvature at `z` of the affine disc through `z` in the direction of the
/// gradient field. When the integral surface of the field through `z` is an
/// affine disc (complex lines of the ball; the diagonal of a polydisc for
/// symmetric potentials) this is the curvature of that surface.
pub fn gradient_line_curvature(m: &MetricField, z: &[C64]) -> Result<f64> {
    let v = gradient_vector(m, z)?.components;
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(GeomError::InconsistentEmbedding("gradient field vanishes".into()));
    }
    let dir = v.iter().map(|c| c / norm).collect();
    let u = DiscEmbedding::affine(z.to_vec(), dir, 1);
    pullback_curvature(&u, m, C64::new(0.0, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::FdConfig;
    use crate::domains::DEFAULT_MARGIN;
    use crate::potentials::{ko_potential, product_potential, standard_potential, KoParams, ko_potential_polydisc};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn field(desc: &str, k: f64) -> MetricField {
        let d = DomainSpec::parse(desc, k).unwrap();
        MetricField::new(standard_potential(&d), d, FdConfig::default())
    }

    #[test]
    fn diagonal_disc_examples() {
        let u = diagonal_disc(1, 1).unwrap();
        assert_eq!(u.eval(c(0.3, 0.2)).0, vec![c(0.3, 0.2)]);
        let u = diagonal_disc(3, 2).unwrap();
        assert_eq!(u.eval(c(0.5, 0.0)).0, vec![c(0.5, 0.0), c(0.5, 0.0), c(0.0, 0.0)]);
        assert!(diagonal_disc(3, 0).is_err());
        assert!(diagonal_disc(3, 4).is_err());
    }

    #[test]
    fn diagonal_pullback_closed_form() {
        for (n, k, kk) in [(3, 2, 1.0), (4, 1, 2.0), (2, 2, 0.5)] {
            let m = field(&format!("polydisc:{n}"), kk);
            let u = diagonal_disc(n, k).unwrap();
            for z in [c(0.0, 0.0), c(0.4, -0.3), c(-0.7, 0.1)] {
                let lambda = pullback_metric_1d(&u, &m, z).unwrap();
                let expected = 2.0 * k as f64 / (kk * (1.0 - z.norm_sqr()).powi(2));
                assert!((lambda - expected).abs() < 1e-10 * expected);
            }
        }
        let lambda = pullback_metric_1d(&diagonal_disc(3, 2).unwrap(), &field("polydisc:3", 1.0), c(0.0, 0.0)).unwrap();
        assert!((lambda - 4.0).abs() < 1e-14);
    }

    #[test]
    fn typei_maximal_polydisc() {
        let p = maximal_polydisc_typei(1, 1).unwrap();
        assert_eq!(p.eval(&[c(0.3, 0.0)]).unwrap().0, vec![c(0.3, 0.0)]);
        let p = maximal_polydisc_typei(2, 2).unwrap();
        let z = p.eval(&[c(0.5, 0.0), c(1.0 / 3.0, 0.0)]).unwrap();
        assert_eq!(z.0, vec![c(0.5, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0 / 3.0, 0.0)]);
        assert_eq!(maximal_polydisc_typei(2, 3).unwrap().rank(), 2);
        assert!(maximal_polydisc_typei(0, 3).is_err());
        // λ(0) = (p+q)/K on each coordinate disc
        let m = field("typeI:2,2", 1.0);
        let lambda = pullback_metric_1d(&p.coordinate_disc(0).unwrap(), &m, c(0.0, 0.0)).unwrap();
        assert!((lambda - 4.0).abs() < 1e-6);
    }

    #[test]
    fn generic_maximal_polydisc_matches_rank() {
        let d = DomainSpec::parse("ball:2xpolydisc:2xtypeI:2,3", 1.0).unwrap();
        let p = maximal_polydisc(&d);
        assert_eq!(p.rank(), 1 + 2 + 2);
        assert_eq!(p.target_dim(), d.dim());
    }

    #[test]
    fn zero_derivative_is_guarded() {
        let m = field("disc", 1.0);
        let u = DiscEmbedding::new("const", 1, 0, |_| vec![C64::new(0.1, 0.0)]);
        assert!(matches!(
            pullback_metric_1d(&u, &m, c(0.0, 0.0)),
            Err(GeomError::InconsistentEmbedding(_))
        ));
    }

    #[test]
    fn rank_measurement() {
        let m = field("polydisc:3", 1.0);
        assert_eq!(disc_rank_measured(&diagonal_disc(3, 2).unwrap(), &m).unwrap(), 2);
        let m = field("polydisc:5", 3.0);
        assert_eq!(disc_rank_measured(&diagonal_disc(5, 5).unwrap(), &m).unwrap(), 5);
        // half-speed disc is not isometric: λ(0)·K/2 = 0.25
        let half = DiscEmbedding::new("half", 1, 1, |z| vec![z / 2.0]);
        assert!(disc_rank_measured(&half, &field("disc", 1.0)).is_err());
    }

    #[test]
    fn mixed_curvature_rank() {
        let ks = [1.0, 2.0, 4.0];
        let parts = ks
            .iter()
            .map(|&k| ko_potential_polydisc(1, &KoParams::new(k)).unwrap())
            .collect();
        let d = DomainSpec::parse("polydisc:3", 1.0).unwrap();
        let m = MetricField::new(product_potential(parts).unwrap(), d, FdConfig::default());
        assert_eq!(disc_rank_measured_mixed(&diagonal_disc(3, 2).unwrap(), &m, &ks).unwrap(), 2);
        assert_eq!(disc_rank_measured_mixed(&diagonal_disc(3, 3).unwrap(), &m, &ks).unwrap(), 3);
    }

    #[test]
    fn schwarz_pick_examples() {
        assert!(schwarz_pick_residual(|z| z, |_| c(1.0, 0.0), c(0.3, 0.1)) < 1e-15);
        let u = Mobius::new(c(0.3, 0.0), 1.0).unwrap();
        assert!(schwarz_pick_residual(|z| u.eval(z), |z| u.derivative(z), c(0.2, 0.1)) <= 1e-12);
        assert!(schwarz_pick_residual(|z| z / 2.0, |_| c(0.5, 0.0), c(0.0, 0.0)) > 0.1);
        assert!(Mobius::new(c(1.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn flow_from_critical_point_is_constant() {
        let m = field("ball:2", 1.0);
        let t = flow_gradient(&m, &[c(0.0, 0.0), c(0.0, 0.0)], 0.5, 0.01, DEFAULT_MARGIN).unwrap();
        assert_eq!(t.len(), 51);
        assert!(t.points.iter().all(|p| p.norm() == 0.0));
        assert!(!t.escaped);
    }

    #[test]
    fn flow_escape_returns_partial_trajectory() {
        // standard disc potential: V = ζ(1 − |ζ|²) pushes outward
        let m = field("disc", 1.0);
        let t = flow_gradient(&m, &[c(0.5, 0.0)], 50.0, 0.01, DEFAULT_MARGIN).unwrap();
        assert!(t.escaped);
        assert!(t.len() > 1 && t.len() < 5001);
        assert!(flow_gradient(&m, &[c(0.99, 0.0)], 1.0, 0.01, DEFAULT_MARGIN).is_err());
        assert!(flow_gradient(&m, &[c(0.0, 0.0)], 1.0, 0.0, DEFAULT_MARGIN).is_err());
    }

    #[test]
    fn symmetric_ko_flow_stays_diagonal() {
        let d = DomainSpec::parse("polydisc:3", 1.0).unwrap();
        let m = MetricField::new(ko_potential(&d, &KoParams::new(1.0)).unwrap(), d, FdConfig::default());
        let a = c(0.7, 0.05);
        let t = flow_gradient(&m, &[a, a, a], 2.0, 1e-3, DEFAULT_MARGIN).unwrap();
        assert!(!t.escaped);
        assert!(t.coordinate_spread() <= 1e-8);
    }
}
