//! Registry of bounded symmetric domains in their Harish-Chandra realization.
//!
//! A [`DomainSpec`] is an ordered product of [`IrreducibleFactor`]s together
//! with the Ricci constant `K` of the Kähler–Einstein metric
//! `Ric(ω) = −K·ω`. Each factor knows its rank `r`, its genus `c` (the
//! exponent in `K_Ω = c₀·N_Ω^{−c}`) and its generic norm `N_Ω`.
//!
//! | descriptor   | domain                    | dim  | rank      | genus |
//! |--------------|---------------------------|------|-----------|-------|
//! | `disc`       | unit disc                 | 1    | 1         | 2     |
//! | `ball:n`     | unit ball of `C^n`        | n    | 1         | n+1   |
//! | `polydisc:n` | n discs                   | n    | n         | 2 per disc |
//! | `typeI:p,q`  | `p×q` matrices, `‖Z‖<1`   | p·q  | min(p,q)  | p+q   |
//!
//! Products are written by joining descriptors with `x`, e.g.
//! `ball:2xpolydisc:3`.

use std::fmt;
use std::ops::{Deref, DerefMut};
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::calculus::positive_cholesky;
use crate::error::{check_dim, GeomError, Result};
use crate::potentials::PotentialFn;

/// Margin that keeps finite-difference stencils inside the domain.
pub const DEFAULT_MARGIN: f64 = 0.05;

/// Rejections allowed per sampled point before giving up.
pub const MAX_REJECTIONS: usize = 100_000;

/// A point of `C^n`, laid out factor by factor. TypeI blocks are row-major
/// `p×q` matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct Point(pub Vec<C64>);

impl Point {
    pub fn new(coords: Vec<C64>) -> Self {
        Self(coords)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![C64::new(0.0, 0.0); n])
    }

    /// Builds a point from `(re, im)` pairs.
    pub fn from_parts(parts: &[(f64, f64)]) -> Self {
        Self(parts.iter().map(|&(re, im)| C64::new(re, im)).collect())
    }

    pub fn from_reals(xs: &[f64]) -> Self {
        Self(xs.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

impl Deref for Point {
    type Target = [C64];
    fn deref(&self) -> &[C64] {
        &self.0
    }
}

impl DerefMut for Point {
    fn deref_mut(&mut self) -> &mut [C64] {
        &mut self.0
    }
}

impl From<Vec<C64>> for Point {
    fn from(v: Vec<C64>) -> Self {
        Self(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FactorKind {
    Disc,
    Ball(usize),
    Polydisc(usize),
    TypeI(usize, usize),
}

impl FactorKind {
    pub fn dim(&self) -> usize {
        match *self {
            FactorKind::Disc => 1,
            FactorKind::Ball(n) | FactorKind::Polydisc(n) => n,
            FactorKind::TypeI(p, q) => p * q,
        }
    }

    pub fn rank(&self) -> usize {
        match *self {
            FactorKind::Disc | FactorKind::Ball(_) => 1,
            FactorKind::Polydisc(n) => n,
            FactorKind::TypeI(p, q) => p.min(q),
        }
    }

    /// Registry genus; for the polydisc this is the genus of each disc.
    pub fn registry_genus(&self) -> u32 {
        match *self {
            FactorKind::Disc | FactorKind::Polydisc(_) => 2,
            FactorKind::Ball(n) => n as u32 + 1,
            FactorKind::TypeI(p, q) => (p + q) as u32,
        }
    }
}

impl fmt::Display for FactorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FactorKind::Disc => write!(f, "disc"),
            FactorKind::Ball(n) => write!(f, "ball:{n}"),
            FactorKind::Polydisc(n) => write!(f, "polydisc:{n}"),
            FactorKind::TypeI(p, q) => write!(f, "typeI:{p},{q}"),
        }
    }
}

impl FromStr for FactorKind {
    type Err = GeomError;

    fn from_str(s: &str) -> Result<Self> {
        let err = |reason: &str| GeomError::Parse {
            input: s.to_string(),
            reason: reason.to_string(),
        };
        let positive = |t: &str| -> Result<usize> {
            match t.trim().parse::<usize>() {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(err("expected a positive integer")),
            }
        };
        let s = s.trim();
        let (head, args) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        match (head, args) {
            ("disc", None) => Ok(FactorKind::Disc),
            ("ball", Some(a)) => Ok(FactorKind::Ball(positive(a)?)),
            ("polydisc", Some(a)) => Ok(FactorKind::Polydisc(positive(a)?)),
            ("typeI", Some(a)) => {
                let (p, q) = a.split_once(',').ok_or_else(|| err("typeI needs p,q"))?;
                Ok(FactorKind::TypeI(positive(p)?, positive(q)?))
            }
            _ => Err(err("unknown domain; expected disc, ball:n, polydisc:n or typeI:p,q")),
        }
    }
}

/// One irreducible factor of a product domain.
#[derive(Clone, Debug, PartialEq)]
pub struct IrreducibleFactor {
    kind: FactorKind,
    genus: u32,
}

impl IrreducibleFactor {
    pub fn new(kind: FactorKind) -> Self {
        Self {
            kind,
            genus: kind.registry_genus(),
        }
    }

    /// Same factor with a different genus. Only meaningful as a negative
    /// control: the resulting potential is no longer Kähler–Einstein.
    pub fn with_genus(mut self, genus: u32) -> Self {
        self.genus = genus;
        self
    }

    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn rank(&self) -> usize {
        self.kind.rank()
    }

    pub fn genus(&self) -> u32 {
        self.genus
    }

    /// `r·c`, the contribution of the factor to `L_Ω²`.
    pub fn khl_length_sq(&self) -> f64 {
        (self.rank() as f64) * f64::from(self.genus)
    }

    /// Generic norm `N(z, w)` on the factor's coordinate block.
    pub fn norm(&self, z: &[C64], w: &[C64]) -> C64 {
        let one = C64::new(1.0, 0.0);
        match self.kind {
            FactorKind::Disc | FactorKind::Ball(_) => {
                one - z.iter().zip(w).map(|(a, b)| a * b.conj()).sum::<C64>()
            }
            FactorKind::Polydisc(_) => z
                .iter()
                .zip(w)
                .map(|(a, b)| one - a * b.conj())
                .product(),
            FactorKind::TypeI(p, q) => {
                let zm = DMatrix::from_row_slice(p, q, z);
                let wm = DMatrix::from_row_slice(p, q, w);
                (DMatrix::identity(p, p) - zm * wm.adjoint()).determinant()
            }
        }
    }

    /// `Σ` over the factor's log-norm terms weighted by the genus, i.e.
    /// `c·log N(z, z)`, checking membership on the way.
    pub fn genus_log_norm(&self, z: &[C64]) -> Result<f64> {
        let c = f64::from(self.genus);
        let outside = || GeomError::DomainBoundary(format!("{} at {:?}", self.kind, z));
        match self.kind {
            FactorKind::Disc | FactorKind::Ball(_) => {
                let n = 1.0 - z.iter().map(|a| a.norm_sqr()).sum::<f64>();
                if n > 0.0 {
                    Ok(c * n.ln())
                } else {
                    Err(outside())
                }
            }
            FactorKind::Polydisc(_) => {
                let mut acc = 0.0;
                for a in z {
                    let n = 1.0 - a.norm_sqr();
                    if n <= 0.0 {
                        return Err(outside());
                    }
                    acc += n.ln();
                }
                Ok(c * acc)
            }
            FactorKind::TypeI(p, q) => {
                let zm = DMatrix::from_row_slice(p, q, z);
                let h = if p <= q {
                    DMatrix::identity(p, p) - &zm * zm.adjoint()
                } else {
                    DMatrix::identity(q, q) - zm.adjoint() * &zm
                };
                let ch = positive_cholesky(h).ok_or_else(outside)?;
                Ok(c * ch.l().diagonal().iter().map(|d| 2.0 * d.re.ln()).sum::<f64>())
            }
        }
    }

    /// Membership with slack `margin`.
    pub fn contains(&self, z: &[C64], margin: f64) -> bool {
        let bound = 1.0 - margin;
        match self.kind {
            FactorKind::Disc | FactorKind::Ball(_) => {
                z.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt() <= bound
            }
            FactorKind::Polydisc(_) => z.iter().all(|a| a.norm() <= bound),
            FactorKind::TypeI(p, q) => spectral_norm(p, q, z) <= bound,
        }
    }

    /// Radius of the smallest centered ball of the ambient space holding the factor.
    fn ambient_radius(&self) -> f64 {
        match self.kind {
            FactorKind::TypeI(p, q) => (p.min(q) as f64).sqrt(),
            _ => 1.0,
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R, margin: f64) -> Result<Vec<C64>> {
        match self.kind {
            FactorKind::Polydisc(n) => {
                let disc = IrreducibleFactor::new(FactorKind::Disc);
                let mut out = Vec::with_capacity(n);
                for _ in 0..n {
                    out.extend(disc.sample(rng, margin)?);
                }
                Ok(out)
            }
            _ => {
                let d = self.dim();
                let radius = self.ambient_radius();
                for _ in 0..MAX_REJECTIONS {
                    let z = uniform_in_ball(rng, d, radius);
                    if self.contains(&z, margin) {
                        return Ok(z);
                    }
                }
                Err(GeomError::Sampling(format!(
                    "{} rejections exceeded for {} with margin {margin}",
                    MAX_REJECTIONS, self.kind
                )))
            }
        }
    }
}

/// Largest singular value of the row-major `p×q` matrix `z`.
pub fn spectral_norm(p: usize, q: usize, z: &[C64]) -> f64 {
    let zm = DMatrix::from_row_slice(p, q, z);
    zm.singular_values().iter().cloned().fold(0.0, f64::max)
}

fn uniform_in_ball<R: Rng>(rng: &mut R, dim: usize, radius: f64) -> Vec<C64> {
    let real_dim = 2 * dim;
    let g: Vec<f64> = (0..real_dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / real_dim as f64) / norm;
    g.chunks(2).map(|c| C64::new(c[0] * r, c[1] * r)).collect()
}

/// A product of irreducible factors with Ricci constant `K`.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainSpec {
    factors: Vec<IrreducibleFactor>,
    ricci: f64,
}

impl DomainSpec {
    pub fn new(factors: Vec<IrreducibleFactor>, ricci_constant: f64) -> Result<Self> {
        if factors.is_empty() {
            return Err(GeomError::InvalidArgument("domain needs at least one factor".into()));
        }
        if !(ricci_constant.is_finite() && ricci_constant > 0.0) {
            return Err(GeomError::InvalidArgument(format!(
                "Ricci constant K must be positive, got {ricci_constant}"
            )));
        }
        Ok(Self {
            factors,
            ricci: ricci_constant,
        })
    }

    pub fn single(kind: FactorKind, ricci_constant: f64) -> Result<Self> {
        Self::new(vec![IrreducibleFactor::new(kind)], ricci_constant)
    }

    /// Parses a descriptor such as `typeI:2,2xball:2`.
    pub fn parse(descriptor: &str, ricci_constant: f64) -> Result<Self> {
        let factors = descriptor
            .split('x')
            .map(|s| s.parse::<FactorKind>().map(IrreducibleFactor::new))
            .collect::<Result<Vec<_>>>()?;
        Self::new(factors, ricci_constant)
    }

    pub fn factors(&self) -> &[IrreducibleFactor] {
        &self.factors
    }

    pub fn ricci_constant(&self) -> f64 {
        self.ricci
    }

    pub fn with_ricci_constant(&self, k: f64) -> Result<Self> {
        Self::new(self.factors.clone(), k)
    }

    /// Replaces the genus of every factor of the given kind.
    pub fn with_genus_override(&self, kind: FactorKind, genus: u32) -> Self {
        let factors = self
            .factors
            .iter()
            .map(|f| {
                if f.kind() == kind {
                    f.clone().with_genus(genus)
                } else {
                    f.clone()
                }
            })
            .collect();
        Self {
            factors,
            ricci: self.ricci,
        }
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim()).sum()
    }

    pub fn rank(&self) -> usize {
        self.factors.iter().map(|f| f.rank()).sum()
    }

    /// Coordinate ranges of the factors.
    pub fn blocks(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.factors
            .iter()
            .map(|f| {
                let r = start..start + f.dim();
                start += f.dim();
                r
            })
            .collect()
    }

    pub fn descriptor(&self) -> String {
        self.factors
            .iter()
            .map(|f| f.kind().to_string())
            .collect::<Vec<_>>()
            .join("x")
    }

    /// `L_Ω² = Σ_j r_j·c_j`; independent of `K`.
    pub fn khl_length_sq(&self) -> f64 {
        self.factors.iter().map(|f| f.khl_length_sq()).sum()
    }

    /// Generic norm `N(z, w) = Π_j N_j(z_j, w_j)`.
    pub fn generic_norm(&self, z: &[C64], w: &[C64]) -> Result<C64> {
        check_dim(self.dim(), z.len())?;
        check_dim(self.dim(), w.len())?;
        Ok(self
            .factors
            .iter()
            .zip(self.blocks())
            .map(|(f, b)| f.norm(&z[b.clone()], &w[b]))
            .product())
    }

    /// `φ(z) = −(1/K) Σ_j c_j·log N_j(z_j, z_j)`.
    ///
    /// The normalizing constant of the Bergman kernel only shifts `log K_Ω`
    /// by a constant and is dropped.
    pub fn log_kernel_value(&self, z: &[C64]) -> Result<f64> {
        check_dim(self.dim(), z.len())?;
        let mut acc = 0.0;
        for (f, b) in self.factors.iter().zip(self.blocks()) {
            acc += f.genus_log_norm(&z[b])?;
        }
        Ok(-acc / self.ricci)
    }

    /// The log-kernel potential as a [`PotentialFn`] without closed-form
    /// derivatives. See [`crate::potentials::standard_potential`] for the
    /// version with closed forms.
    pub fn log_kernel_potential(&self) -> PotentialFn {
        let d = self.clone();
        PotentialFn::new(
            format!("log-kernel[{}]", self.descriptor()),
            self.dim(),
            move |z| d.log_kernel_value(z),
        )
    }

    pub fn contains(&self, z: &[C64], margin: f64) -> Result<bool> {
        check_dim(self.dim(), z.len())?;
        if !(0.0..1.0).contains(&margin) {
            return Err(GeomError::InvalidArgument(format!("margin {margin} not in [0,1)")));
        }
        Ok(self
            .factors
            .iter()
            .zip(self.blocks())
            .all(|(f, b)| f.contains(&z[b], margin)))
    }

    /// Seed-reproducible interior points satisfying `contains(·, margin)`.
    pub fn sample_interior(&self, seed: u64, count: usize, margin: f64) -> Result<Vec<Point>> {
        if count == 0 {
            return Err(GeomError::InvalidArgument("sample count must be positive".into()));
        }
        if !(margin > 0.0 && margin < 1.0) {
            return Err(GeomError::InvalidArgument(format!("margin {margin} not in (0,1)")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let mut coords = Vec::with_capacity(self.dim());
                for f in &self.factors {
                    coords.extend(f.sample(&mut rng, margin)?);
                }
                Ok(Point(coords))
            })
            .collect()
    }
}

impl fmt::Display for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.descriptor())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn dom(s: &str) -> DomainSpec {
        DomainSpec::parse(s, 1.0).unwrap()
    }

    #[test]
    fn registry_invariants() {
        let disc = IrreducibleFactor::new(FactorKind::Disc);
        assert_eq!((disc.dim(), disc.rank(), disc.genus()), (1, 1, 2));
        let ball = IrreducibleFactor::new(FactorKind::Ball(4));
        assert_eq!((ball.dim(), ball.rank(), ball.genus()), (4, 1, 5));
        let poly = IrreducibleFactor::new(FactorKind::Polydisc(3));
        assert_eq!((poly.dim(), poly.rank(), poly.genus()), (3, 3, 2));
        let t = IrreducibleFactor::new(FactorKind::TypeI(2, 3));
        assert_eq!((t.dim(), t.rank(), t.genus()), (6, 2, 5));
    }

    #[test]
    fn parse_products() {
        let d = dom("typeI:2,2xball:2");
        assert_eq!(d.factors().len(), 2);
        assert_eq!(d.dim(), 6);
        assert_eq!(d.descriptor(), "typeI:2,2xball:2");
        assert!(DomainSpec::parse("torus:2", 1.0).is_err());
        assert!(DomainSpec::parse("ball:0", 1.0).is_err());
        assert!(DomainSpec::parse("typeI:2", 1.0).is_err());
        assert!(DomainSpec::parse("disc", 0.0).is_err());
        assert!(DomainSpec::parse("disc", -1.0).is_err());
    }

    #[test]
    fn generic_norm_examples() {
        assert_eq!(dom("disc").generic_norm(&[c(0.0, 0.0)], &[c(0.0, 0.0)]).unwrap(), c(1.0, 0.0));
        let z = [c(0.5, 0.0), c(0.0, 0.0)];
        let n = dom("ball:2").generic_norm(&z, &z).unwrap();
        assert!((n - c(0.75, 0.0)).norm() < 1e-15);
        // diag(1/2, 1/3), row-major 2x2
        let z = [c(0.5, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0 / 3.0, 0.0)];
        let n = dom("typeI:2,2").generic_norm(&z, &z).unwrap();
        assert!((n - c(2.0 / 3.0, 0.0)).norm() < 1e-14);
        assert!(matches!(
            dom("ball:2").generic_norm(&[c(0.0, 0.0)], &z),
            Err(GeomError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn log_kernel_examples() {
        let disc = dom("disc");
        assert_eq!(disc.log_kernel_value(&[c(0.0, 0.0)]).unwrap(), 0.0);
        let v = disc.log_kernel_value(&[c(0.5, 0.0)]).unwrap();
        assert!((v + 2.0 * 0.75f64.ln()).abs() < 1e-15);
        let ball = DomainSpec::parse("ball:2", 2.0).unwrap();
        let v = ball.log_kernel_value(&[c(0.5, 0.0), c(0.0, 0.0)]).unwrap();
        assert!((v + 1.5 * 0.75f64.ln()).abs() < 1e-15);
        assert!(matches!(
            disc.log_kernel_value(&[c(1.0, 0.0)]),
            Err(GeomError::DomainBoundary(_))
        ));
    }

    #[test]
    fn typei_outside_rejected_even_with_positive_determinant() {
        // singular values 2 and 2: det(I − ZZ*) = 9 > 0 but Z is outside.
        let z = [c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)];
        assert!(dom("typeI:2,2").log_kernel_value(&z).is_err());
    }

    #[test]
    fn khl_lengths() {
        assert_eq!(dom("disc").khl_length_sq(), 2.0);
        assert_eq!(dom("polydisc:3").khl_length_sq(), 6.0);
        assert_eq!(dom("ball:2").khl_length_sq(), 3.0);
        assert_eq!(dom("typeI:2,2").khl_length_sq(), 8.0);
        assert_eq!(DomainSpec::parse("ball:2", 7.0).unwrap().khl_length_sq(), 3.0);
    }

    #[test]
    fn membership_examples() {
        assert!(dom("ball:2").contains(&[c(0.3, 0.0), c(0.4, 0.0)], 0.05).unwrap());
        assert!(!dom("disc").contains(&[c(0.97, 0.0)], 0.05).unwrap());
        let z = [c(0.9, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.1, 0.0)];
        assert!(dom("typeI:2,2").contains(&z, 0.05).unwrap());
        assert!(dom("disc").contains(&[c(0.0, 0.0)], 1.5).is_err());
    }

    #[test]
    fn sampling_contract() {
        let pts = dom("disc").sample_interior(1, 10, 0.05).unwrap();
        assert_eq!(pts.len(), 10);
        assert!(pts.iter().all(|p| p[0].norm() <= 0.95));
        assert_eq!(pts, dom("disc").sample_interior(1, 10, 0.05).unwrap());
        assert_ne!(pts, dom("disc").sample_interior(2, 10, 0.05).unwrap());
        let t = dom("typeI:2,2").sample_interior(7, 5, 0.1).unwrap();
        assert_eq!(t.len(), 5);
        for p in &t {
            assert!(spectral_norm(2, 2, p) <= 0.9 + 1e-12);
        }
    }

    #[test]
    fn sampling_rejects_bad_arguments() {
        assert!(dom("disc").sample_interior(1, 0, 0.05).is_err());
        assert!(dom("disc").sample_interior(1, 3, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn generic_norm_is_hermitian(seed in 0u64..500) {
            let d = dom("typeI:2,3xball:2xdisc");
            let pts = d.sample_interior(seed, 2, 0.05).unwrap();
            let a = d.generic_norm(&pts[0], &pts[1]).unwrap();
            let b = d.generic_norm(&pts[1], &pts[0]).unwrap();
            prop_assert!((a - b.conj()).norm() < 1e-13);
        }

        #[test]
        fn products_add(seed in 0u64..500) {
            let a = dom("ball:2");
            let b = dom("typeI:2,2");
            let ab = dom("ball:2xtypeI:2,2");
            prop_assert_eq!(ab.khl_length_sq(), a.khl_length_sq() + b.khl_length_sq());
            let pa = &a.sample_interior(seed, 1, 0.05).unwrap()[0];
            let pb = &b.sample_interior(seed + 1, 1, 0.05).unwrap()[0];
            let joined: Vec<C64> = pa.iter().chain(pb.iter()).cloned().collect();
            let lhs = ab.log_kernel_value(&joined).unwrap();
            let rhs = a.log_kernel_value(pa).unwrap() + b.log_kernel_value(pb).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
