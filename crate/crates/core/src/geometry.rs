//! Metric-level quantities of `ω = dd^c φ`.
//!
//! Index conventions: `G[(α, β)] = g_{αβ̄}`. The inverse matrix `H = G⁻¹`
//! satisfies `G·H = I`, and the raised tensor is `g^{αβ̄} = H[(β, α)]`.
//! With these,
//!
//! ```text
//! V^α        = g^{αβ̄} φ_β̄                       (gradient field)
//! |∂φ|²      = φ_α φ_β̄ g^{αβ̄} = ∂φ* · H · ∂φ
//! Γ^γ_{αβ}   = g^{γδ̄} ∂_α g_{βδ̄}
//! φ_{α;β}    = φ_{αβ} − Γ^γ_{αβ} φ_γ
//! V^α_{;β}   = ∂_β V^α + Γ^α_{βγ} V^γ
//! R_{αβ̄}     = −∂_α∂_β̄ log det g
//! Δ_ω f      = g^{αβ̄} f_{αβ̄}
//! ```
//!
//! Derivatives of closed-form quantities use the potential's own steps;
//! derivatives of finite-difference quantities use [`FdConfig::outer_step`].

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::calculus::{
    holomorphic_hessian, hermitian_inverse, mixed_hessian_with_step, wirtinger_jacobian,
    FdConfig, HermitianForm,
};
use crate::domains::DomainSpec;
use crate::error::{check_dim, GeomError, Result};
use crate::potentials::PotentialFn;

/// The Kähler metric `g_{αβ̄} = φ_{αβ̄}` of a potential on a domain.
#[derive(Clone, Debug)]
pub struct MetricField {
    potential: PotentialFn,
    domain: DomainSpec,
    cfg: FdConfig,
}

impl MetricField {
    pub fn new(potential: PotentialFn, domain: DomainSpec, cfg: FdConfig) -> Self {
        Self {
            potential,
            domain,
            cfg,
        }
    }

    pub fn potential(&self) -> &PotentialFn {
        &self.potential
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn cfg(&self) -> &FdConfig {
        &self.cfg
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Whether gradient and hessian are both available in closed form.
    pub fn is_closed_form(&self) -> bool {
        self.potential.has_closed_grad() && self.potential.has_closed_hess()
    }

    /// Step for first derivatives of metric-derived quantities.
    pub fn first_step(&self) -> f64 {
        if self.is_closed_form() {
            self.cfg.step
        } else {
            self.cfg.outer_step
        }
    }

    /// Step for second derivatives of metric-derived quantities.
    pub fn second_step(&self) -> f64 {
        if self.is_closed_form() {
            self.cfg.hess_step
        } else {
            self.cfg.outer_step
        }
    }

    fn check(&self, z: &[C64]) -> Result<()> {
        check_dim(self.dim(), z.len())?;
        check_dim(self.dim(), self.potential.dim())
    }
}

/// A `(1,0)` tangent vector `V^α ∂_α` at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    pub components: Vec<C64>,
}

impl TangentVector {
    pub fn dim(&self) -> usize {
        self.components.len()
    }

    /// `⟨V, V⟩_g = g_{αβ̄} V^α conj(V^β)`.
    pub fn norm_sq(&self, g: &HermitianForm) -> f64 {
        g.norm_sq(&self.components)
    }
}

/// `g_{αβ̄}(z)`; fails unless positive definite.
pub fn metric_at(m: &MetricField, z: &[C64]) -> Result<HermitianForm> {
    m.check(z)?;
    let g = m.potential.hess(z, &m.cfg)?;
    if !g.is_positive_definite() {
        return Err(GeomError::DegenerateMetric(format!(
            "{} is not positive definite at {:?}",
            m.potential.label(),
            z
        )));
    }
    Ok(g)
}

fn inverse_matrix(m: &MetricField, z: &[C64]) -> Result<DMatrix<C64>> {
    Ok(hermitian_inverse(&metric_at(m, z)?)?.into_entries())
}

fn gradient_field(m: &MetricField, z: &[C64]) -> Result<Vec<C64>> {
    let h = inverse_matrix(m, z)?;
    let dphi = DMatrix::from_column_slice(z.len(), 1, &m.potential.grad(z, &m.cfg)?);
    Ok((h * dphi).iter().map(|c| c.conj()).collect())
}

/// Gradient field `V^α = g^{αβ̄} φ_β̄`.
pub fn gradient_vector(m: &MetricField, z: &[C64]) -> Result<TangentVector> {
    m.check(z)?;
    Ok(TangentVector {
        components: gradient_field(m, z)?,
    })
}

/// `|∂φ|²_ω = φ_α φ_β̄ g^{αβ̄}`.
pub fn gradient_length_sq(m: &MetricField, z: &[C64]) -> Result<f64> {
    m.check(z)?;
    let h = inverse_matrix(m, z)?;
    let dphi = m.potential.grad(z, &m.cfg)?;
    let mut acc = C64::new(0.0, 0.0);
    for (a, pa) in dphi.iter().enumerate() {
        for (b, pb) in dphi.iter().enumerate() {
            acc += pa.conj() * h[(a, b)] * pb;
        }
    }
    Ok(acc.re.max(0.0))
}

/// `|d^c φ|²_ω`, half the gradient length.
pub fn dc_length_sq(m: &MetricField, z: &[C64]) -> Result<f64> {
    Ok(gradient_length_sq(m, z)? / 2.0)
}

/// Christoffel symbols; `out[γ][(α, β)] = Γ^γ_{αβ}`.
pub fn christoffel(m: &MetricField, z: &[C64]) -> Result<Vec<DMatrix<C64>>> {
    m.check(z)?;
    let n = z.len();
    let h = inverse_matrix(m, z)?;
    let flat_metric = |w: &[C64]| -> Result<Vec<C64>> {
        let g = m.potential.hess(w, &m.cfg)?;
        Ok((0..n * n).map(|k| g.get(k / n, k % n)).collect())
    };
    // dg[α][β·n + δ] = ∂_α g_{βδ̄}
    let dg = wirtinger_jacobian(&flat_metric, z, m.first_step(), m.cfg.richardson)?;
    Ok((0..n)
        .map(|gamma| {
            DMatrix::from_fn(n, n, |a, b| {
                (0..n).map(|d| h[(d, gamma)] * dg[a][b * n + d]).sum()
            })
        })
        .collect())
}

/// Holomorphic hessian `φ_{αβ}`.
fn holomorphic_second(m: &MetricField, z: &[C64]) -> Result<DMatrix<C64>> {
    let n = z.len();
    if m.potential.has_closed_grad() {
        let grad = |w: &[C64]| m.potential.grad(w, &m.cfg);
        let jac = wirtinger_jacobian(&grad, z, m.cfg.step, m.cfg.richardson)?;
        Ok(DMatrix::from_fn(n, n, |a, b| 0.5 * (jac[b][a] + jac[a][b])))
    } else {
        let eval = |w: &[C64]| m.potential.eval(w);
        holomorphic_hessian(&eval, z, &m.cfg)
    }
}

/// Covariant hessian `φ_{α;β} = φ_{αβ} − Γ^γ_{αβ} φ_γ`.
pub fn covariant_hessian(m: &MetricField, z: &[C64]) -> Result<DMatrix<C64>> {
    m.check(z)?;
    let hol = holomorphic_second(m, z)?;
    let gamma = christoffel(m, z)?;
    let dphi = m.potential.grad(z, &m.cfg)?;
    let mut out = hol;
    for (g, p) in gamma.iter().zip(&dphi) {
        out -= g * *p;
    }
    Ok(out)
}

/// Mixed covariant derivative of the gradient field, `out[(α, β)] = V^α_{;β}`.
pub fn gradient_covariant_derivative(m: &MetricField, z: &[C64]) -> Result<DMatrix<C64>> {
    m.check(z)?;
    let n = z.len();
    let field = |w: &[C64]| gradient_field(m, w);
    let dv = wirtinger_jacobian(&field, z, m.first_step(), m.cfg.richardson)?;
    let v = gradient_field(m, z)?;
    let gamma = christoffel(m, z)?;
    Ok(DMatrix::from_fn(n, n, |a, b| {
        dv[b][a] + (0..n).map(|c| gamma[a][(b, c)] * v[c]).sum::<C64>()
    }))
}

/// `φ_{α;β} V^β + φ_α`, which vanishes when `|∂φ|²` is locally constant.
pub fn constant_length_defect(m: &MetricField, z: &[C64]) -> Result<Vec<C64>> {
    let a = covariant_hessian(m, z)?;
    let v = gradient_field(m, z)?;
    let dphi = m.potential.grad(z, &m.cfg)?;
    let n = z.len();
    Ok((0..n)
        .map(|i| (0..n).map(|b| a[(i, b)] * v[b]).sum::<C64>() + dphi[i])
        .collect())
}

/// `φ_{α;β} φ^{α;β}`: the squared norm of the covariant hessian.
pub fn covariant_hessian_norm_sq(m: &MetricField, z: &[C64]) -> Result<f64> {
    let a = covariant_hessian(m, z)?;
    let h = inverse_matrix(m, z)?;
    let n = z.len();
    // g^{αμ̄} = h[(μ, α)]
    let mut acc = C64::new(0.0, 0.0);
    for al in 0..n {
        for be in 0..n {
            for mu in 0..n {
                for nu in 0..n {
                    acc += h[(mu, al)] * h[(nu, be)] * a[(al, be)] * a[(mu, nu)].conj();
                }
            }
        }
    }
    Ok(acc.re)
}

/// Ricci form coefficients `R_{αβ̄} = −∂_α∂_β̄ log det g`.
pub fn ricci_at(m: &MetricField, z: &[C64]) -> Result<HermitianForm> {
    m.check(z)?;
    let log_det = |w: &[C64]| m.potential.hess(w, &m.cfg)?.log_det();
    let h = mixed_hessian_with_step(&log_det, z, m.second_step(), &m.cfg)?;
    Ok(h.scale(-1.0))
}

/// `Δ_ω f = g^{αβ̄} f_{αβ̄}` with the hessian of `f` taken at `cfg.hess_step`.
pub fn laplace_beltrami<F>(f: &F, m: &MetricField, z: &[C64]) -> Result<f64>
where
    F: Fn(&[C64]) -> Result<f64> + ?Sized,
{
    laplace_beltrami_with_step(f, m, z, m.cfg.hess_step)
}

pub fn laplace_beltrami_with_step<F>(f: &F, m: &MetricField, z: &[C64], h: f64) -> Result<f64>
where
    F: Fn(&[C64]) -> Result<f64> + ?Sized,
{
    m.check(z)?;
    let inv = inverse_matrix(m, z)?;
    let fh = mixed_hessian_with_step(f, z, h, &m.cfg)?;
    Ok((inv * fh.entries()).trace().re)
}

/// Gaussian curvature `κ = −(1/λ) ∂²log λ/∂ζ∂ζ̄` of `iλ dζ∧dζ̄`, with the
/// Laplacian of `log λ` taken by extrapolated central differences at step `h`.
pub fn gauss_curvature_1d<F>(lambda: &F, zeta: C64, h: f64) -> Result<f64>
where
    F: Fn(C64) -> Result<f64> + ?Sized,
{
    let log_lambda = |w: &[C64]| -> Result<f64> {
        let v = lambda(w[0])?;
        if v > 0.0 && v.is_finite() {
            Ok(v.ln())
        } else {
            Err(GeomError::DegenerateMetric(format!(
                "conformal factor {v} is not positive at {}",
                w[0]
            )))
        }
    };
    let cfg = FdConfig::default();
    let lap = mixed_hessian_with_step(&log_lambda, &[zeta], h, &cfg)?.get(0, 0).re;
    let l0 = lambda(zeta)?;
    if l0 <= 0.0 {
        return Err(GeomError::DegenerateMetric(format!("conformal factor {l0} at {zeta}")));
    }
    Ok(-lap / l0)
}
