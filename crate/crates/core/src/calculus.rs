//! Wirtinger derivatives by central differences, and the hermitian matrices
//! they produce.
//!
//! Points of `C^n` are handled as `2n` real coordinates ordered
//! `(x¹, y¹, x², y², …)`. Derivatives are
//!
//! ```text
//! ∂/∂z = ½(∂/∂x − i ∂/∂y),   ∂/∂z̄ = ½(∂/∂x + i ∂/∂y)
//! ```
//!
//! and the mixed second derivative is assembled from the real hessian `H`:
//!
//! ```text
//! ∂²f/∂z^α∂z̄^β = ¼[(H_{xαxβ} + H_{yαyβ}) + i(H_{xαyβ} − H_{yαxβ})]
//! ```
//!
//! Richardson extrapolation combines the stencils at `h` and `h/2` as
//! `(4·D(h/2) − D(h))/3`, cancelling the `h²` term of the central rule.

use log::warn;
use nalgebra::{Cholesky, DMatrix, Dyn};
use num_complex::Complex64 as C64;

use crate::error::{check_dim, GeomError, Result};

/// Finite-difference settings.
///
/// `step` drives first derivatives of a potential and `hess_step` its second
/// derivatives. Quantities that are themselves finite-difference or
/// closed-form derivatives (the metric, `log det g`, the gradient field, a
/// pulled-back conformal factor) are differentiated with `outer_step`, which is
/// larger so that the rounding noise of the inner level is not amplified.
/// All steps are scaled by `max(1, |z|)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdConfig {
    pub step: f64,
    pub hess_step: f64,
    pub outer_step: f64,
    pub richardson: bool,
    pub symmetrize: bool,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            hess_step: 1e-3,
            outer_step: 5e-3,
            richardson: true,
            symmetrize: true,
        }
    }
}

impl FdConfig {
    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    pub fn without_richardson(mut self) -> Self {
        self.richardson = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, h) in [
            ("step", self.step),
            ("hess_step", self.hess_step),
            ("outer_step", self.outer_step),
        ] {
            if !(h.is_finite() && h > 0.0) {
                return Err(GeomError::InvalidArgument(format!(
                    "finite-difference {name} must be positive, got {h}"
                )));
            }
        }
        Ok(())
    }

    /// Largest stencil radius, to be compared with a sampling margin.
    pub fn max_reach(&self) -> f64 {
        self.step.max(self.hess_step).max(self.outer_step)
    }
}

/// Threshold above which the hermitian defect of a computed form is logged.
const ASYMMETRY_WARN: f64 = 1e-8;

/// The matrix `(g_{αβ̄})` of a hermitian form at a point, row `α`, column `β`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianForm {
    entries: DMatrix<C64>,
    asymmetry: f64,
}

impl HermitianForm {
    /// Wraps `m` after replacing it by `½(m + m*)`. The removed defect is kept
    /// as [`HermitianForm::asymmetry`].
    pub fn new(m: DMatrix<C64>) -> Self {
        Self::build(m, true)
    }

    /// Wraps `m` as is; used for quantities that are hermitian by construction.
    pub fn exact(m: DMatrix<C64>) -> Self {
        Self::build(m, false)
    }

    fn build(m: DMatrix<C64>, symmetrize: bool) -> Self {
        assert!(m.is_square(), "hermitian form must be square");
        let adj = m.adjoint();
        let asymmetry = (&m - &adj).iter().map(|c| c.norm()).fold(0.0, f64::max);
        let entries = if symmetrize {
            (m + adj).scale(0.5)
        } else {
            m
        };
        Self { entries, asymmetry }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self::exact(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(d[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    pub fn identity(n: usize) -> Self {
        Self::exact(DMatrix::identity(n, n))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<C64> {
        self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[(row, col)]
    }

    /// Max-norm of `G − G*` before symmetrization.
    pub fn asymmetry(&self) -> f64 {
        self.asymmetry
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            entries: self.entries.scale(s),
            asymmetry: self.asymmetry * s.abs(),
        }
    }

    pub fn is_positive_definite(&self) -> bool {
        positive_cholesky(self.entries.clone()).is_some()
    }

    /// Real determinant; for a positive definite form computed through Cholesky.
    pub fn determinant(&self) -> f64 {
        match positive_cholesky(self.entries.clone()) {
            Some(ch) => ch.l().diagonal().iter().map(|d| d.re * d.re).product(),
            None => self.entries.determinant().re,
        }
    }

    /// `log det G`, requiring positive definiteness.
    pub fn log_det(&self) -> Result<f64> {
        let ch = positive_cholesky(self.entries.clone()).ok_or_else(|| {
            GeomError::DegenerateMetric("form is not positive definite".into())
        })?;
        Ok(ch.l().diagonal().iter().map(|d| 2.0 * d.re.ln()).sum())
    }

    /// Hermitian quadratic form `Σ G_{αβ} v^α conj(v^β)`.
    pub fn norm_sq(&self, v: &[C64]) -> f64 {
        let n = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for a in 0..n {
            for b in 0..n {
                acc += self.entries[(a, b)] * v[a] * v[b].conj();
            }
        }
        acc.re
    }
}

/// Inverse of a positive definite hermitian form via Cholesky.
///
/// As a matrix, the result `H` satisfies `G·H = I`; the raised-index tensor
/// `g^{αβ̄}` is its transpose.
pub fn hermitian_inverse(g: &HermitianForm) -> Result<HermitianForm> {
    let n = g.dim();
    let ch = positive_cholesky(g.entries.clone()).ok_or_else(|| {
        GeomError::DegenerateMetric(format!(
            "{n}x{n} form is singular or not positive definite"
        ))
    })?;
    if g.asymmetry > ASYMMETRY_WARN {
        warn!("inverting form with hermitian defect {:.3e}", g.asymmetry);
    }
    Ok(HermitianForm::new(ch.inverse()))
}

/// Cholesky factorization that also rejects indefinite hermitian input. The
/// complex square root never fails, so a negative pivot shows up as a
/// non-real diagonal entry of `L`.
pub fn positive_cholesky(m: DMatrix<C64>) -> Option<Cholesky<C64, Dyn>> {
    let ch = m.cholesky()?;
    let ok = ch
        .l_dirty()
        .diagonal()
        .iter()
        .all(|d| d.re > 0.0 && d.im.abs() <= 1e-10 * d.re);
    ok.then_some(ch)
}

fn scaled(h: f64, z: &[C64]) -> f64 {
    let norm = z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    h * norm.max(1.0)
}

fn shifted(z: &[C64], shifts: &[(usize, f64)]) -> Vec<C64> {
    let mut w = z.to_vec();
    for &(k, d) in shifts {
        let (a, imag) = (k / 2, k % 2 == 1);
        if imag {
            w[a].im += d;
        } else {
            w[a].re += d;
        }
    }
    w
}

fn richardson<T, F>(h: f64, on: bool, mut d: F) -> Result<T>
where
    T: std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + Copy + std::ops::Add<Output = T>,
    F: FnMut(f64) -> Result<T>,
{
    if on {
        let coarse = d(h)?;
        let fine = d(h / 2.0)?;
        Ok(fine * (4.0 / 3.0) + coarse * (-1.0 / 3.0))
    } else {
        d(h)
    }
}

/// Central-difference Wirtinger gradient `∂f/∂z^α` of a complex-valued field
/// with a fixed (unscaled) step.
pub fn wirtinger_grad_complex<F>(f: &F, z: &[C64], h: f64, richardson_on: bool) -> Result<Vec<C64>>
where
    F: Fn(&[C64]) -> Result<C64> + ?Sized,
{
    let n = z.len();
    let mut out = Vec::with_capacity(n);
    for a in 0..n {
        let partial = |k: usize| {
            move |h: f64| -> Result<C64> {
                Ok((f(&shifted(z, &[(k, h)]))? - f(&shifted(z, &[(k, -h)]))?) / (2.0 * h))
            }
        };
        let dx = richardson(h, richardson_on, partial(2 * a))?;
        let dy = richardson(h, richardson_on, partial(2 * a + 1))?;
        out.push((dx - C64::i() * dy) * 0.5);
    }
    Ok(out)
}

/// Wirtinger gradient `∂f/∂z^α = ½(∂f/∂x^α − i ∂f/∂y^α)` of a real field.
pub fn wirtinger_grad<F>(f: &F, z: &[C64], cfg: &FdConfig) -> Result<Vec<C64>>
where
    F: Fn(&[C64]) -> Result<f64> + ?Sized,
{
    let g = |w: &[C64]| f(w).map(|v| C64::new(v, 0.0));
    wirtinger_grad_complex(&g, z, scaled(cfg.step, z), cfg.richardson)
}

/// Real `2n × 2n` hessian of `f` by central differences with step `h`.
pub fn real_hessian<F>(f: &F, z: &[C64], h: f64, richardson_on: bool) -> Result<DMatrix<f64>>
where
    F: Fn(&[C64]) -> Result<f64> + ?Sized,
{
    let m = 2 * z.len();
    let f0 = f(z)?;
    let single = |h: f64| -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(m, m);
        let mut plus = vec![0.0; m];
        let mut minus = vec![0.0; m];
        for k in 0..m {
            plus[k] = f(&shifted(z, &[(k, h)]))?;
            minus[k] = f(&shifted(z, &[(k, -h)]))?;
            out[(k, k)] = (plus[k] - 2.0 * f0 + minus[k]) / (h * h);
        }
        for k in 0..m {
            for l in (k + 1)..m {
                let pp = f(&shifted(z, &[(k, h), (l, h)]))?;
                let pm = f(&shifted(z, &[(k, h), (l, -h)]))?;
                let mp = f(&shifted(z, &[(k, -h), (l, h)]))?;
                let mm = f(&shifted(z, &[(k, -h), (l, -h)]))?;
                let v = (pp - pm - mp + mm) / (4.0 * h * h);
                out[(k, l)] = v;
                out[(l, k)] = v;
            }
        }
        Ok(out)
    };
    if richardson_on {
        let coarse = single(h)?;
        let fine = single(h / 2.0)?;
        Ok(fine * (4.0 / 3.0) - coarse * (1.0 / 3.0))
    } else {
        single(h)
    }
}

/// `∂²f/∂z^α∂z̄^β` from a real hessian.
pub fn mixed_from_real(h: &DMatrix<f64>) -> DMatrix<C64> {
    let n = h.nrows() / 2;
    DMatrix::from_fn(n, n, |a, b| {
        let (xa, ya, xb, yb) = (2 * a, 2 * a + 1, 2 * b, 2 * b + 1);
        C64::new(
            h[(xa, xb)] + h[(ya, yb)],
            h[(xa, yb)] - h[(ya, xb)],
        ) * 0.25
    })
}

/// `∂²f/∂z^α∂z^β` from a real hessian.
pub fn holomorphic_from_real(h: &DMatrix<f64>) -> DMatrix<C64> {
    let n = h.nrows() / 2;
    DMatrix::from_fn(n, n, |a, b| {
        let (xa, ya, xb, yb) = (2 * a, 2 * a + 1, 2 * b, 2 * b + 1);
        C64::new(
            h[(xa, xb)] - h[(ya, yb)],
            -(h[(xa, yb)] + h[(ya, xb)]),
        ) * 0.25
    })
}

/// Mixed hessian with an explicit unscaled step.
pub fn mixed_hessian_with_step<F>(f: &F, z: &[C64], h: f64, cfg: &FdConfig) -> Result<HermitianForm>
where
    F: Fn(&[C64]) -> Result<f64> + ?Sized,
{
    let real = real_hessian(f, z, scaled(h, z), cfg.richardson)?;
    let m = mixed_from_real(&real);
    Ok(if cfg.symmetrize {
        HermitianForm::new(m)
    } else {
        HermitianForm::exact(m)
    })
}

/// Complex hessian `∂²f/∂z^α∂z̄^β` of a real field, hermitian-symmetrized
/// when `cfg.symmetrize` is set.
pub fn mixed_hessian<F>(f: &F, z: &[C64], cfg: &FdConfig) -> Result<HermitianForm>
where
    F: Fn(&[C64]) -> Result<f64> + ?Sized,
{
    mixed_hessian_with_step(f, z, cfg.hess_step, cfg)
}

/// Holomorphic hessian `∂²f/∂z^α∂z^β` of a real field.
pub fn holomorphic_hessian<F>(f: &F, z: &[C64], cfg: &FdConfig) -> Result<DMatrix<C64>>
where
    F: Fn(&[C64]) -> Result<f64> + ?Sized,
{
    let real = real_hessian(f, z, scaled(cfg.hess_step, z), cfg.richardson)?;
    Ok(holomorphic_from_real(&real))
}

/// Wirtinger derivative along each coordinate of a vector- or matrix-valued
/// complex field, flattened: entry `[α][k]` is `∂F_k/∂z^α`.
pub fn wirtinger_jacobian<F>(f: &F, z: &[C64], h: f64, richardson_on: bool) -> Result<Vec<Vec<C64>>>
where
    F: Fn(&[C64]) -> Result<Vec<C64>> + ?Sized,
{
    let h = scaled(h, z);
    let n = z.len();
    let diff = |k: usize, h: f64| -> Result<Vec<C64>> {
        let p = f(&shifted(z, &[(k, h)]))?;
        let m = f(&shifted(z, &[(k, -h)]))?;
        Ok(p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect())
    };
    let extrapolated = |k: usize| -> Result<Vec<C64>> {
        if richardson_on {
            let c = diff(k, h)?;
            let fi = diff(k, h / 2.0)?;
            Ok(fi.iter().zip(&c).map(|(f, c)| f * (4.0 / 3.0) - c / 3.0).collect())
        } else {
            diff(k, h)
        }
    };
    let mut out = Vec::with_capacity(n);
    for a in 0..n {
        let dx = extrapolated(2 * a)?;
        let dy = extrapolated(2 * a + 1)?;
        out.push(dx.iter().zip(&dy).map(|(x, y)| (x - C64::i() * y) * 0.5).collect());
    }
    Ok(out)
}

/// Convenience for checking vector lengths against a dimension.
pub fn expect_dim(z: &[C64], n: usize) -> Result<()> {
    check_dim(n, z.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn disc_potential(z: &[C64]) -> Result<f64> {
        let r2 = z[0].norm_sqr();
        if r2 >= 1.0 {
            return Err(GeomError::DomainBoundary("disc".into()));
        }
        Ok(-2.0 * (1.0 - r2).ln())
    }

    #[test]
    fn grad_of_modulus_squared_is_conjugate() {
        let f = |z: &[C64]| Ok(z[0].norm_sqr());
        let a = c(0.3, -0.7);
        let g = wirtinger_grad(&f, &[a], &FdConfig::default()).unwrap();
        assert!((g[0] - a.conj()).norm() < 1e-10);
    }

    #[test]
    fn grad_of_real_part_is_half() {
        let f = |z: &[C64]| Ok(z[0].re);
        let g = wirtinger_grad(&f, &[c(2.0, 5.0)], &FdConfig::default()).unwrap();
        assert!((g[0] - c(0.5, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn disc_potential_gradient_matches_closed_form() {
        // φ_ζ = 2ζ̄/(1−|ζ|²) = 4/3 at ζ = 1/2
        let g = wirtinger_grad(&disc_potential, &[c(0.5, 0.0)], &FdConfig::default()).unwrap();
        assert!((g[0] - c(4.0 / 3.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn hessian_of_modulus_squared() {
        let f = |z: &[C64]| Ok(z[0].norm_sqr());
        let h = mixed_hessian(&f, &[c(0.1, 0.2)], &FdConfig::default()).unwrap();
        assert!((h.get(0, 0) - c(1.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn hessian_of_pluriharmonic_vanishes() {
        // 2·Re(z1² z2 + 3 z2³ − i z1)
        let f = |z: &[C64]| {
            let h = z[0] * z[0] * z[1] + 3.0 * z[1] * z[1] * z[1] - C64::i() * z[0];
            Ok(2.0 * h.re)
        };
        let z = [c(0.3, -0.2), c(-0.1, 0.4)];
        let h = mixed_hessian(&f, &z, &FdConfig::default()).unwrap();
        assert!(h.max_abs() < 1e-6, "{}", h.max_abs());
    }

    #[test]
    fn disc_potential_hessian_at_origin() {
        let h = mixed_hessian(&disc_potential, &[c(0.0, 0.0)], &FdConfig::default()).unwrap();
        assert!((h.get(0, 0).re - 2.0).abs() < 1e-6);
    }

    #[test]
    fn holomorphic_hessian_of_quadratic() {
        // f = 2 Re(z1 z2) + |z1|²: ∂1∂2 f = 1, ∂1∂1 f = 0
        let f = |z: &[C64]| Ok(2.0 * (z[0] * z[1]).re + z[0].norm_sqr());
        let h = holomorphic_hessian(&f, &[c(0.2, 0.1), c(0.3, -0.3)], &FdConfig::default()).unwrap();
        assert!((h[(0, 1)] - c(1.0, 0.0)).norm() < 1e-8);
        assert!(h[(0, 0)].norm() < 1e-8);
    }

    #[test]
    fn inverse_of_identity_and_diagonal() {
        let id = hermitian_inverse(&HermitianForm::identity(3)).unwrap();
        assert!((id.entries() - DMatrix::<C64>::identity(3, 3)).norm() < 1e-14);
        let d = hermitian_inverse(&HermitianForm::from_diagonal(&[2.0, 4.0])).unwrap();
        assert!((d.get(0, 0).re - 0.5).abs() < 1e-14);
        assert!((d.get(1, 1).re - 0.25).abs() < 1e-14);
    }

    #[test]
    fn inverse_of_disc_metric_at_half() {
        let g = HermitianForm::from_diagonal(&[2.0 / (0.75f64 * 0.75)]);
        let inv = hermitian_inverse(&g).unwrap();
        assert!((inv.get(0, 0).re - 9.0 / 32.0).abs() < 1e-14);
    }

    #[test]
    fn inverse_rejects_indefinite() {
        let g = HermitianForm::from_diagonal(&[1.0, -1.0]);
        assert!(matches!(hermitian_inverse(&g), Err(GeomError::DegenerateMetric(_))));
    }

    #[test]
    fn symmetrization_records_defect() {
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 1e-3), c(0.0, 0.0), c(1.0, 0.0)]);
        let h = HermitianForm::new(m);
        assert!((h.asymmetry() - 1e-3).abs() < 1e-15);
        assert_eq!(h.get(0, 1), h.get(1, 0).conj());
    }

    #[test]
    fn stencil_leaving_domain_is_reported() {
        let r = wirtinger_grad(&disc_potential, &[c(1.0 - 1e-6, 0.0)], &FdConfig::default());
        assert!(matches!(r, Err(GeomError::DomainBoundary(_))));
    }

    #[test]
    fn richardson_raises_convergence_order() {
        // Error of the mixed hessian of the disc potential at a large step,
        // where truncation dominates rounding.
        let z = [c(0.4, 0.3)];
        let r2 = z[0].norm_sqr();
        let exact = 2.0 / ((1.0 - r2) * (1.0 - r2));
        let err = |h: f64, rich: bool| {
            let cfg = FdConfig { richardson: rich, ..FdConfig::default() };
            let v = mixed_hessian_with_step(&disc_potential, &z, h, &cfg).unwrap();
            (v.get(0, 0).re - exact).abs()
        };
        let order = |rich: bool| (err(2e-2, rich) / err(1e-2, rich)).log2();
        let plain = order(false);
        let extrapolated = order(true);
        assert!((plain - 2.0).abs() < 0.3, "plain order {plain}");
        assert!(extrapolated >= 3.5, "extrapolated order {extrapolated}");
    }
}
