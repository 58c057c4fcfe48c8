//! Kähler potentials of the Kähler–Einstein metric.
//!
//! A [`PotentialFn`] is a real field `φ` with `dd^c φ = ω`, optionally
//! carrying closed-form Wirtinger gradient and complex hessian. Two potentials
//! of the same metric differ by a pluriharmonic function, which changes the
//! gradient `∂φ` but never the hessian `φ_{αβ̄} = g_{αβ̄}`.
//!
//! Built-ins:
//!
//! * [`standard_potential`]: `−(1/K) Σ c_j log N_j(z, z)`.
//! * [`ko_potential_polydisc`]:
//!   `(1/K) log Π_α |1 − e^{iθ_α} z^α|⁴ / (1 − |z^α|²)²`, constant
//!   gradient length `2n/K`.
//! * [`ko_potential_ball`]: `((n+1)/K) log(|1 − ⟨z,b⟩|² / (1 − ‖z‖²))` for a
//!   unit vector `b`, constant gradient length `(n+1)/K`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::calculus::{mixed_hessian, positive_cholesky, wirtinger_grad, FdConfig, HermitianForm};
use crate::domains::{DomainSpec, FactorKind};
use crate::error::{check_dim, GeomError, Result};

type EvalFn = dyn Fn(&[C64]) -> Result<f64> + Send + Sync;
type GradFn = dyn Fn(&[C64]) -> Result<Vec<C64>> + Send + Sync;
type HessFn = dyn Fn(&[C64]) -> Result<HermitianForm> + Send + Sync;

/// A real scalar field on (part of) `C^n` used as a Kähler potential.
#[derive(Clone)]
pub struct PotentialFn {
    label: String,
    dim: usize,
    eval: Arc<EvalFn>,
    grad: Option<Arc<GradFn>>,
    hess: Option<Arc<HessFn>>,
}

impl fmt::Debug for PotentialFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialFn")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("closed_grad", &self.grad.is_some())
            .field("closed_hess", &self.hess.is_some())
            .finish()
    }
}

impl PotentialFn {
    pub fn new<F>(label: impl Into<String>, dim: usize, eval: F) -> Self
    where
        F: Fn(&[C64]) -> Result<f64> + Send + Sync + 'static,
    {
        Self {
            label: label.into(),
            dim,
            eval: Arc::new(eval),
            grad: None,
            hess: None,
        }
    }

    /// Attaches a closed-form `∂φ/∂z^α`.
    pub fn with_grad<F>(mut self, grad: F) -> Self
    where
        F: Fn(&[C64]) -> Result<Vec<C64>> + Send + Sync + 'static,
    {
        self.grad = Some(Arc::new(grad));
        self
    }

    /// Attaches a closed-form `∂²φ/∂z^α∂z̄^β`.
    pub fn with_hess<F>(mut self, hess: F) -> Self
    where
        F: Fn(&[C64]) -> Result<HermitianForm> + Send + Sync + 'static,
    {
        self.hess = Some(Arc::new(hess));
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_closed_grad(&self) -> bool {
        self.grad.is_some()
    }

    pub fn has_closed_hess(&self) -> bool {
        self.hess.is_some()
    }

    pub fn eval(&self, z: &[C64]) -> Result<f64> {
        check_dim(self.dim, z.len())?;
        (self.eval)(z)
    }

    /// Closed-form gradient if present.
    pub fn closed_grad(&self, z: &[C64]) -> Option<Result<Vec<C64>>> {
        self.grad.as_ref().map(|g| {
            check_dim(self.dim, z.len())?;
            g(z)
        })
    }

    /// Closed-form complex hessian if present.
    pub fn closed_hess(&self, z: &[C64]) -> Option<Result<HermitianForm>> {
        self.hess.as_ref().map(|h| {
            check_dim(self.dim, z.len())?;
            h(z)
        })
    }

    /// `∂φ/∂z^α`, closed form when available.
    pub fn grad(&self, z: &[C64], cfg: &FdConfig) -> Result<Vec<C64>> {
        match self.closed_grad(z) {
            Some(g) => g,
            None => {
                check_dim(self.dim, z.len())?;
                wirtinger_grad(&*self.eval, z, cfg)
            }
        }
    }

    /// `∂²φ/∂z^α∂z̄^β`, closed form when available.
    pub fn hess(&self, z: &[C64], cfg: &FdConfig) -> Result<HermitianForm> {
        match self.closed_hess(z) {
            Some(h) => h,
            None => {
                check_dim(self.dim, z.len())?;
                mixed_hessian(&*self.eval, z, cfg)
            }
        }
    }
}

/// Parameters of the constant-gradient-length potentials.
#[derive(Clone, Debug, PartialEq)]
pub struct KoParams {
    /// One phase per disc coordinate.
    pub thetas: Vec<f64>,
    /// Boundary point `b` of the ball, `‖b‖ = 1`. `None` means `e₁`.
    pub direction: Option<Vec<C64>>,
    /// Ricci constant `K`.
    pub k: f64,
}

impl KoParams {
    pub fn new(k: f64) -> Self {
        Self {
            thetas: Vec::new(),
            direction: None,
            k,
        }
    }

    pub fn with_thetas(mut self, thetas: Vec<f64>) -> Self {
        self.thetas = thetas;
        self
    }

    pub fn with_direction(mut self, b: Vec<C64>) -> Self {
        self.direction = Some(b);
        self
    }

    fn check_k(&self) -> Result<()> {
        if self.k.is_finite() && self.k > 0.0 {
            Ok(())
        } else {
            Err(GeomError::InvalidArgument(format!("K must be positive, got {}", self.k)))
        }
    }

    fn thetas_for(&self, n: usize) -> Result<Vec<f64>> {
        match self.thetas.len() {
            0 => Ok(vec![0.0; n]),
            m if m == n => Ok(self.thetas.clone()),
            m => Err(GeomError::InvalidArgument(format!(
                "expected {n} theta values, got {m}"
            ))),
        }
    }

    fn direction_for(&self, n: usize) -> Result<Vec<C64>> {
        match &self.direction {
            None => {
                let mut b = vec![C64::new(0.0, 0.0); n];
                b[0] = C64::new(1.0, 0.0);
                Ok(b)
            }
            Some(b) => {
                check_dim(n, b.len())?;
                let norm = b.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > 1e-12 {
                    return Err(GeomError::InvalidArgument(format!(
                        "ball direction must be a unit vector, |b| = {norm}"
                    )));
                }
                Ok(b.clone())
            }
        }
    }
}

fn outside(what: &str) -> GeomError {
    GeomError::DomainBoundary(what.to_string())
}

fn disc_gap(z: C64) -> Result<f64> {
    let gap = 1.0 - z.norm_sqr();
    if gap > 0.0 {
        Ok(gap)
    } else {
        Err(outside("disc coordinate |z| >= 1"))
    }
}

fn ball_gap(z: &[C64]) -> Result<f64> {
    let gap = 1.0 - z.iter().map(|c| c.norm_sqr()).sum::<f64>();
    if gap > 0.0 {
        Ok(gap)
    } else {
        Err(outside("ball point |z| >= 1"))
    }
}

/// `c·∂∂̄(−log(1 − ‖z‖²))`, the ball metric scaled by `c`.
fn ball_hess(c: f64, z: &[C64]) -> Result<HermitianForm> {
    let gap = ball_gap(z)?;
    let n = z.len();
    Ok(HermitianForm::exact(DMatrix::from_fn(n, n, |a, b| {
        let delta = if a == b { 1.0 / gap } else { 0.0 };
        (C64::new(delta, 0.0) + z[a].conj() * z[b] / (gap * gap)) * c
    })))
}

fn polydisc_hess(c: f64, z: &[C64]) -> Result<HermitianForm> {
    let diag = z
        .iter()
        .map(|&a| disc_gap(a).map(|g| c / (g * g)))
        .collect::<Result<Vec<_>>>()?;
    Ok(HermitianForm::from_diagonal(&diag))
}

fn factor_standard(kind: FactorKind, genus: u32, k: f64) -> PotentialFn {
    let c = f64::from(genus) / k;
    match kind {
        FactorKind::Disc | FactorKind::Polydisc(_) => {
            let n = kind.dim();
            PotentialFn::new("", n, move |z| {
                let mut acc = 0.0;
                for &a in z {
                    acc += disc_gap(a)?.ln();
                }
                Ok(-c * acc)
            })
            .with_grad(move |z| z.iter().map(|&a| disc_gap(a).map(|g| a.conj() * (c / g))).collect())
            .with_hess(move |z| polydisc_hess(c, z))
        }
        FactorKind::Ball(n) => {
            PotentialFn::new("", n, move |z| Ok(-c * ball_gap(z)?.ln()))
                .with_grad(move |z| {
                    let gap = ball_gap(z)?;
                    Ok(z.iter().map(|a| a.conj() * (c / gap)).collect())
                })
                .with_hess(move |z| ball_hess(c, z))
        }
        FactorKind::TypeI(p, q) => {
            PotentialFn::new("", p * q, move |z| Ok(-c * typei_resolvents(p, q, z)?.log_det))
                .with_grad(move |z| {
                    let r = typei_resolvents(p, q, z)?;
                    let za = r.z.adjoint() * &r.a;
                    Ok((0..p * q).map(|ij| za[(ij % q, ij / q)] * c).collect())
                })
                .with_hess(move |z| {
                    let r = typei_resolvents(p, q, z)?;
                    Ok(HermitianForm::new(DMatrix::from_fn(p * q, p * q, |ij, lk| {
                        let (i, j) = (ij / q, ij % q);
                        let (l, k) = (lk / q, lk % q);
                        r.a[(l, i)] * r.b[(j, k)] * c
                    })))
                })
        }
    }
}

struct TypeIResolvents {
    z: DMatrix<C64>,
    /// `(I − ZZ*)⁻¹`
    a: DMatrix<C64>,
    /// `(I − Z*Z)⁻¹`
    b: DMatrix<C64>,
    /// `log det(I − ZZ*)`
    log_det: f64,
}

/// For `φ = −log det(I − ZZ*)` on `p×q` matrices: `∂φ/∂z_{ij} = (Z*A)_{ji}`
/// and `φ_{(ij)(lk)̄} = A_{li} B_{jk}`.
fn typei_resolvents(p: usize, q: usize, z: &[C64]) -> Result<TypeIResolvents> {
    check_dim(p * q, z.len())?;
    let zm = DMatrix::from_row_slice(p, q, z);
    let inverse = |m: DMatrix<C64>| {
        positive_cholesky(m).ok_or_else(|| outside("typeI point has spectral norm >= 1"))
    };
    let ca = inverse(DMatrix::identity(p, p) - &zm * zm.adjoint())?;
    let log_det = 2.0 * ca.l_dirty().diagonal().iter().map(|d| d.re.ln()).sum::<f64>();
    let cb = inverse(DMatrix::identity(q, q) - zm.adjoint() * &zm)?;
    Ok(TypeIResolvents {
        a: ca.inverse(),
        b: cb.inverse(),
        z: zm,
        log_det,
    })
}

/// The log-kernel potential of `domain`, with closed-form gradient and hessian.
pub fn standard_potential(domain: &DomainSpec) -> PotentialFn {
    let k = domain.ricci_constant();
    let parts = domain
        .factors()
        .iter()
        .map(|f| factor_standard(f.kind(), f.genus(), k))
        .collect();
    product_potential(parts)
        .expect("domain has at least one factor")
        .with_label(format!("standard[{}]", domain.descriptor()))
}

/// `(1/K) log Π_α |1 − e^{iθ_α} z^α|⁴ / (1 − |z^α|²)²` on the polydisc `Δⁿ`.
pub fn ko_potential_polydisc(n: usize, params: &KoParams) -> Result<PotentialFn> {
    if n == 0 {
        return Err(GeomError::InvalidArgument("polydisc dimension must be positive".into()));
    }
    params.check_k()?;
    let k = params.k;
    let phases: Vec<C64> = params
        .thetas_for(n)?
        .into_iter()
        .map(|t| C64::from_polar(1.0, t))
        .collect();
    let rot = phases.clone();
    let rot2 = phases.clone();
    let pole = |w: C64| -> Result<C64> {
        let d = C64::new(1.0, 0.0) - w;
        if d.norm() > 0.0 {
            Ok(d)
        } else {
            Err(outside("boundary pole of the polydisc potential"))
        }
    };
    let label = format!("ko[polydisc:{n},K={k}]");
    Ok(PotentialFn::new(label, n, move |z| {
        let mut acc = 0.0;
        for (&a, &e) in z.iter().zip(&rot) {
            let gap = disc_gap(a)?;
            acc += 4.0 * pole(e * a)?.norm().ln() - 2.0 * gap.ln();
        }
        Ok(acc / k)
    })
    .with_grad(move |z| {
        z.iter()
            .zip(&rot2)
            .map(|(&a, &e)| {
                let gap = disc_gap(a)?;
                Ok((-e / pole(e * a)? + a.conj() / gap) * (2.0 / k))
            })
            .collect()
    })
    .with_hess(move |z| polydisc_hess(2.0 / k, z)))
}

/// `((n+1)/K) log(|1 − ⟨z,b⟩|² / (1 − ‖z‖²))` on the ball `Bⁿ`, where
/// `⟨z,b⟩ = Σ z_i·conj(b_i)`.
pub fn ko_potential_ball(n: usize, params: &KoParams) -> Result<PotentialFn> {
    if n == 0 {
        return Err(GeomError::InvalidArgument("ball dimension must be positive".into()));
    }
    params.check_k()?;
    let c = (n as f64 + 1.0) / params.k;
    let b = params.direction_for(n)?;
    let b2 = b.clone();
    let pairing = |z: &[C64], b: &[C64]| -> Result<C64> {
        let d = C64::new(1.0, 0.0) - z.iter().zip(b).map(|(x, y)| x * y.conj()).sum::<C64>();
        if d.norm() > 0.0 {
            Ok(d)
        } else {
            Err(outside("boundary pole of the ball potential"))
        }
    };
    let label = format!("ko[ball:{n},K={}]", params.k);
    Ok(PotentialFn::new(label, n, move |z| {
        let gap = ball_gap(z)?;
        Ok(c * (pairing(z, &b)?.norm_sqr().ln() - gap.ln()))
    })
    .with_grad(move |z| {
        let gap = ball_gap(z)?;
        let d = pairing(z, &b2)?;
        Ok(z.iter()
            .zip(&b2)
            .map(|(a, bi)| (-bi.conj() / d + a.conj() / gap) * c)
            .collect())
    })
    .with_hess(move |z| ball_hess(c, z)))
}

/// Constant-gradient-length potential on a product of discs, polydiscs and
/// balls. `params.thetas` lists the phases of all disc coordinates in order
/// (empty means all zero); `params.direction` applies to every ball factor.
/// TypeI factors are not supported.
pub fn ko_potential(domain: &DomainSpec, params: &KoParams) -> Result<PotentialFn> {
    let disc_coords: usize = domain
        .factors()
        .iter()
        .map(|f| match f.kind() {
            FactorKind::Disc | FactorKind::Polydisc(_) => f.dim(),
            _ => 0,
        })
        .sum();
    let thetas = params.thetas_for(disc_coords)?;
    let mut offset = 0;
    let mut parts = Vec::new();
    for f in domain.factors() {
        let sub = KoParams {
            thetas: Vec::new(),
            direction: params.direction.clone(),
            k: domain.ricci_constant(),
        };
        match f.kind() {
            FactorKind::Disc | FactorKind::Polydisc(_) => {
                let n = f.dim();
                let sub = sub.with_thetas(thetas[offset..offset + n].to_vec());
                offset += n;
                parts.push(ko_potential_polydisc(n, &sub)?);
            }
            FactorKind::Ball(n) => parts.push(ko_potential_ball(n, &sub)?),
            FactorKind::TypeI(..) => {
                return Err(GeomError::InvalidArgument(
                    "no constant-length potential is available for typeI factors".into(),
                ))
            }
        }
    }
    Ok(product_potential(parts)?.with_label(format!("ko[{}]", domain.descriptor())))
}

/// A holomorphic monomial term `coeff · Π_i z_i^{exponents[i]}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub exponents: Vec<u32>,
    pub coeff: C64,
}

impl Monomial {
    pub fn new(exponents: Vec<u32>, coeff: C64) -> Self {
        Self { exponents, coeff }
    }

    fn eval(&self, z: &[C64]) -> C64 {
        self.exponents
            .iter()
            .zip(z)
            .fold(self.coeff, |acc, (&e, &x)| acc * x.powu(e))
    }

    fn partial(&self, z: &[C64], a: usize) -> C64 {
        let e = self.exponents[a];
        if e == 0 {
            return C64::new(0.0, 0.0);
        }
        let mut acc = self.coeff * f64::from(e);
        for (i, (&ei, &x)) in self.exponents.iter().zip(z).enumerate() {
            let p = if i == a { ei - 1 } else { ei };
            acc *= x.powu(p);
        }
        acc
    }
}

/// `base + 2·Re h` for the holomorphic polynomial `h = Σ terms`.
pub fn perturb_pluriharmonic(base: &PotentialFn, terms: &[Monomial]) -> Result<PotentialFn> {
    if terms.is_empty() {
        return Ok(base.clone());
    }
    for t in terms {
        check_dim(base.dim(), t.exponents.len())?;
    }
    let h: Arc<[Monomial]> = terms.into();
    let (b_eval, h_eval) = (base.clone(), h.clone());
    let mut out = PotentialFn::new(
        format!("{}+2Re(h)", base.label()),
        base.dim(),
        move |z| {
            let hv: C64 = h_eval.iter().map(|t| t.eval(z)).sum();
            Ok(b_eval.eval(z)? + 2.0 * hv.re)
        },
    );
    if base.has_closed_grad() {
        let b_grad = base.clone();
        out = out.with_grad(move |z| {
            let mut g = b_grad.closed_grad(z).expect("closed gradient")?;
            for (a, ga) in g.iter_mut().enumerate() {
                *ga += h.iter().map(|t| t.partial(z, a)).sum::<C64>();
            }
            Ok(g)
        });
    }
    if base.has_closed_hess() {
        let b_hess = base.clone();
        out = out.with_hess(move |z| b_hess.closed_hess(z).expect("closed hessian"));
    }
    Ok(out)
}

/// Blockwise sum of potentials on the product of their domains.
pub fn product_potential(parts: Vec<PotentialFn>) -> Result<PotentialFn> {
    match parts.len() {
        0 => return Err(GeomError::InvalidArgument("product of zero potentials".into())),
        1 => return Ok(parts.into_iter().next().expect("one part")),
        _ => {}
    }
    let dims: Vec<usize> = parts.iter().map(|p| p.dim()).collect();
    let total: usize = dims.iter().sum();
    let ranges: Arc<[std::ops::Range<usize>]> = dims
        .iter()
        .scan(0, |s, &d| {
            let r = *s..*s + d;
            *s += d;
            Some(r)
        })
        .collect();
    let parts: Arc<[PotentialFn]> = parts.into();
    let label = format!(
        "product[{}]",
        parts.iter().map(|p| p.label().to_string()).collect::<Vec<_>>().join(",")
    );
    let (pe, re) = (parts.clone(), ranges.clone());
    let mut out = PotentialFn::new(label, total, move |z| {
        let mut acc = 0.0;
        for (p, r) in pe.iter().zip(re.iter()) {
            acc += p.eval(&z[r.clone()])?;
        }
        Ok(acc)
    });
    if parts.iter().all(|p| p.has_closed_grad()) {
        let (pg, rg) = (parts.clone(), ranges.clone());
        out = out.with_grad(move |z| {
            let mut g = Vec::with_capacity(z.len());
            for (p, r) in pg.iter().zip(rg.iter()) {
                g.extend(p.closed_grad(&z[r.clone()]).expect("closed gradient")?);
            }
            Ok(g)
        });
    }
    if parts.iter().all(|p| p.has_closed_hess()) {
        let (ph, rh) = (parts.clone(), ranges.clone());
        out = out.with_hess(move |z| {
            let mut m = DMatrix::zeros(total, total);
            for (p, r) in ph.iter().zip(rh.iter()) {
                let block = p.closed_hess(&z[r.clone()]).expect("closed hessian")?;
                m.view_mut((r.start, r.start), (r.len(), r.len()))
                    .copy_from(block.entries());
            }
            Ok(HermitianForm::exact(m))
        });
    }
    Ok(out)
}
