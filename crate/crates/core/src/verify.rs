//! Sampled checks of the curvature and gradient-length identities, each
//! producing a [`CheckReport`].
//!
//! Every check draws its sample points from a seeded ChaCha stream, evaluates
//! a residual at each point (in parallel, collected in order) and reports the
//! largest one. A report passes iff `max_residual <= tolerance`.
//!
//! ```
//! use bsd_geometry::domains::DomainSpec;
//! use bsd_geometry::verify::{check_rigidity, CheckParams, PotentialChoice};
//!
//! let d = DomainSpec::parse("polydisc:3", 1.0).unwrap();
//! let r = check_rigidity(&d, &PotentialChoice::ko(), &CheckParams::default().with_samples(10));
//! assert!(r.passed);
//! assert!((r.mean_value - 6.0).abs() < 1e-9);
//! ```

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{hermitian_inverse, FdConfig};
use crate::domains::{DomainSpec, FactorKind, Point, DEFAULT_MARGIN};
use crate::embeddings::{
    diagonal_disc, flow_gradient, gradient_line_curvature, maximal_polydisc, pullback_curvature,
    schwarz_pick_residual, DiscEmbedding, Mobius,
};
use crate::error::{GeomError, Result};
use crate::geometry::{
    constant_length_defect, covariant_hessian_norm_sq, dc_length_sq, gradient_covariant_derivative,
    gradient_length_sq, gradient_vector, laplace_beltrami, metric_at, ricci_at, MetricField,
};
use crate::potentials::{ko_potential, perturb_pluriharmonic, standard_potential, KoParams, Monomial};

/// Statement identifiers used in reports.
pub mod ids {
    pub const KAHLER_EINSTEIN: &str = "kahler-einstein";
    pub const RIGIDITY: &str = "rigidity";
    pub const LOWER_BOUND: &str = "lower-bound";
    pub const DISC_CURVATURE: &str = "disc-curvature";
    pub const POLYDISC_CURVATURE: &str = "polydisc-curvature";
    pub const GRADIENT_FIELD: &str = "gradient-field";
    pub const CONSTANT_LENGTH: &str = "constant-length";
    pub const FLOW_FOLIATION: &str = "flow-foliation";
    pub const FLOW_CURVATURE: &str = "flow-curvature";
    pub const BOCHNER: &str = "bochner";
    pub const SCHWARZ_PICK: &str = "schwarz-pick";
    pub const DC_RELATION: &str = "dc-relation";
    /// Suite entry that expands to the gradient-field, constant-length and
    /// flow reports.
    pub const GRADIENT_IDENTITIES: &str = "gradient-identities";
}

/// Default tolerances.
pub mod tol {
    pub const KAHLER_EINSTEIN: f64 = 1e-3;
    pub const RIGIDITY_CLOSED: f64 = 1e-5;
    pub const RIGIDITY_FD: f64 = 1e-3;
    pub const POINTWISE_LAW: f64 = 1e-6;
    pub const EQUALITY: f64 = 1e-5;
    /// Relative slack for the "confirmed" status of the lower bound.
    pub const CONFIRM_SLACK: f64 = 1e-5;
    pub const DISC_CURVATURE_CLOSED: f64 = 1e-6;
    pub const DISC_CURVATURE_FD: f64 = 1e-3;
    pub const GRADIENT_FIELD: f64 = 1e-3;
    pub const CONSTANT_LENGTH: f64 = 1e-3;
    pub const FLOW_FOLIATION: f64 = 1e-8;
    pub const FLOW_CURVATURE: f64 = 1e-4;
    pub const BOCHNER: f64 = 1e-2;
    pub const SCHWARZ_PICK: f64 = 1e-10;
    pub const DC_RELATION: f64 = 0.0;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Passed,
    Failed,
    /// Lower-bound check whose sampled supremum reached the bound.
    Confirmed,
    /// Lower-bound check that passed without reaching the bound.
    Inconclusive,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Passed => "passed",
            Self::Failed => "failed",
            Self::Confirmed => "confirmed",
            Self::Inconclusive => "inconclusive",
        })
    }
}

/// Outcome of one check. Non-finite residuals serialize as strings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub statement_id: String,
    pub domain: String,
    pub sample_count: usize,
    #[serde(with = "lenient_f64")]
    pub max_residual: f64,
    /// Mean of the measured quantity. The lower-bound check stores the
    /// sampled maximum here.
    #[serde(with = "lenient_f64")]
    pub mean_value: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub status: CheckStatus,
    pub seed: u64,
    pub runtime_ms: u64,
    pub diagnostics: Vec<String>,
}

impl CheckReport {
    /// Column names of [`CheckReport::to_row`].
    pub const COLUMNS: [&'static str; 12] = [
        "statement_id",
        "domain",
        "sample_count",
        "max_residual",
        "mean_value",
        "expected",
        "tolerance",
        "passed",
        "status",
        "seed",
        "runtime_ms",
        "diagnostics",
    ];

    /// Flat row for tabular output; diagnostics are joined with `"; "`.
    pub fn to_row(&self) -> Vec<String> {
        vec![
            self.statement_id.clone(),
            self.domain.clone(),
            self.sample_count.to_string(),
            self.max_residual.to_string(),
            self.mean_value.to_string(),
            self.expected.to_string(),
            self.tolerance.to_string(),
            self.passed.to_string(),
            self.status.to_string(),
            self.seed.to_string(),
            self.runtime_ms.to_string(),
            self.diagnostics.join("; "),
        ]
    }
}

mod lenient_f64 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            v.serialize(s)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Sampling and finite-difference settings shared by the checks.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckParams {
    pub samples: usize,
    pub seed: u64,
    pub margin: f64,
    /// Overrides the check's default tolerance.
    pub tolerance: Option<f64>,
    pub fd: FdConfig,
}

impl Default for CheckParams {
    fn default() -> Self {
        Self {
            samples: 50,
            seed: 0,
            margin: DEFAULT_MARGIN,
            tolerance: None,
            fd: FdConfig::default(),
        }
    }
}

impl CheckParams {
    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = Some(tol);
        self
    }

    pub fn with_fd(mut self, fd: FdConfig) -> Self {
        self.fd = fd;
        self
    }

    fn tol(&self, default: f64) -> f64 {
        self.tolerance.unwrap_or(default)
    }
}

/// Which potential of the Kähler–Einstein metric a check runs on.
#[derive(Clone, Debug, PartialEq)]
pub enum PotentialChoice {
    /// `−(1/K) Σ c_j log N_j`.
    Standard,
    /// The constant-gradient-length potential.
    Ko {
        thetas: Vec<f64>,
        direction: Option<Vec<C64>>,
    },
    /// The constant-length potential plus `2 Re(coeff·(z¹)²)`.
    KoPerturbed {
        thetas: Vec<f64>,
        direction: Option<Vec<C64>>,
        coeff: C64,
    },
}

impl PotentialChoice {
    pub fn ko() -> Self {
        Self::Ko {
            thetas: Vec::new(),
            direction: None,
        }
    }

    pub fn ko_perturbed(coeff: f64) -> Self {
        Self::KoPerturbed {
            thetas: Vec::new(),
            direction: None,
            coeff: C64::new(coeff, 0.0),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Standard => "standard",
            Self::Ko { .. } => "ko",
            Self::KoPerturbed { .. } => "ko-perturbed",
        }
    }

    /// Whether the gradient length is expected to be constant.
    pub fn has_constant_length(&self) -> bool {
        matches!(self, Self::Ko { .. })
    }

    pub fn build(&self, domain: &DomainSpec, fd: FdConfig) -> Result<MetricField> {
        let ko = |thetas: &[f64], direction: &Option<Vec<C64>>| {
            let mut p = KoParams::new(domain.ricci_constant()).with_thetas(thetas.to_vec());
            p.direction = direction.clone();
            ko_potential(domain, &p)
        };
        let potential = match self {
            Self::Standard => standard_potential(domain),
            Self::Ko { thetas, direction } => ko(thetas, direction)?,
            Self::KoPerturbed {
                thetas,
                direction,
                coeff,
            } => {
                let mut exps = vec![0; domain.dim()];
                exps[0] = 2;
                perturb_pluriharmonic(&ko(thetas, direction)?, &[Monomial::new(exps, *coeff)])?
            }
        };
        fd.validate()?;
        Ok(MetricField::new(potential, domain.clone(), fd))
    }
}

impl FromStr for PotentialChoice {
    type Err = GeomError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Self::Standard),
            "ko" => Ok(Self::ko()),
            "ko-perturbed" => Ok(Self::ko_perturbed(0.1)),
            other => Err(GeomError::Parse {
                input: other.to_string(),
                reason: "expected standard, ko or ko-perturbed".into(),
            }),
        }
    }
}

struct Sampled {
    residual: f64,
    value: f64,
}

/// Report skeleton filled in by the per-check aggregation.
struct Draft<'a> {
    id: &'a str,
    domain: String,
    expected: f64,
    tolerance: f64,
    seed: u64,
    started: Instant,
}

impl Draft<'_> {
    fn new(id: &str, domain: String, expected: f64, tolerance: f64, seed: u64) -> Draft<'_> {
        Draft {
            id,
            domain,
            expected,
            tolerance,
            seed,
            started: Instant::now(),
        }
    }

    fn finish(self, results: Vec<Result<Sampled>>) -> CheckReport {
        let mut diagnostics = Vec::new();
        let mut max_residual: f64 = 0.0;
        let mut sum = 0.0;
        let mut ok = 0usize;
        for (i, r) in results.iter().enumerate() {
            match r {
                Ok(s) => {
                    max_residual = if s.residual.is_nan() { f64::NAN } else { max_residual.max(s.residual) };
                    sum += s.value;
                    ok += 1;
                }
                Err(e) => {
                    max_residual = f64::INFINITY;
                    diagnostics.push(format!("sample {i}: {e}"));
                }
            }
        }
        let mean_value = if ok > 0 { sum / ok as f64 } else { f64::NAN };
        self.build(results.len(), max_residual, mean_value, diagnostics)
    }

    fn fail(self, err: GeomError) -> CheckReport {
        self.build(0, f64::INFINITY, f64::NAN, vec![err.to_string()])
    }

    fn build(self, sample_count: usize, max_residual: f64, mean_value: f64, diagnostics: Vec<String>) -> CheckReport {
        let passed = max_residual <= self.tolerance;
        CheckReport {
            statement_id: self.id.to_string(),
            domain: self.domain,
            sample_count,
            max_residual,
            mean_value,
            expected: self.expected,
            tolerance: self.tolerance,
            passed,
            status: if passed { CheckStatus::Passed } else { CheckStatus::Failed },
            seed: self.seed,
            runtime_ms: self.started.elapsed().as_millis() as u64,
            diagnostics,
        }
    }
}

fn sample_points(domain: &DomainSpec, p: &CheckParams) -> Result<Vec<Point>> {
    if p.samples == 0 {
        return Err(GeomError::InvalidArgument("at least one sample is required".into()));
    }
    domain.sample_interior(p.seed, p.samples, p.margin)
}

fn over_points<F>(points: &[Point], f: F) -> Vec<Result<Sampled>>
where
    F: Fn(&[C64]) -> Result<Sampled> + Sync,
{
    points.par_iter().map(|z| f(z)).collect()
}

fn max_abs<'a>(it: impl IntoIterator<Item = &'a C64>) -> f64 {
    it.into_iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// `max |Ric + K g| / max |g|` for the log-kernel metric; the reported value
/// is the measured Einstein constant `−tr(g⁻¹ Ric)/n`.
pub fn check_kahler_einstein(domain: &DomainSpec, params: &CheckParams) -> CheckReport {
    let k = domain.ricci_constant();
    let draft = Draft::new(ids::KAHLER_EINSTEIN, domain.descriptor(), k, params.tol(tol::KAHLER_EINSTEIN), params.seed);
    let run = || -> Result<Vec<Result<Sampled>>> {
        let m = PotentialChoice::Standard.build(domain, params.fd)?;
        let points = sample_points(domain, params)?;
        Ok(over_points(&points, |z| {
            let g = metric_at(&m, z)?;
            let ric = ricci_at(&m, z)?;
            let defect = ric.entries() + g.entries() * C64::new(k, 0.0);
            let inv = hermitian_inverse(&g)?;
            let einstein = -(inv.entries() * ric.entries()).trace().re / m.dim() as f64;
            Ok(Sampled {
                residual: max_abs(defect.iter()) / g.max_abs(),
                value: einstein,
            })
        }))
    };
    match run() {
        Ok(r) => draft.finish(r),
        Err(e) => draft.fail(e),
    }
}

/// Deviation of `|∂φ|²` from `L²/K`.
pub fn check_rigidity(domain: &DomainSpec, choice: &PotentialChoice, params: &CheckParams) -> CheckReport {
    let expected = domain.khl_length_sq() / domain.ricci_constant();
    let run = || -> Result<(MetricField, Vec<Point>)> {
        Ok((choice.build(domain, params.fd)?, sample_points(domain, params)?))
    };
    let (m, points) = match run() {
        Ok(x) => x,
        Err(e) => {
            return Draft::new(ids::RIGIDITY, domain.descriptor(), expected, params.tol(tol::RIGIDITY_FD), params.seed)
                .fail(e)
        }
    };
    let default_tol = if m.is_closed_form() { tol::RIGIDITY_CLOSED } else { tol::RIGIDITY_FD };
    let draft = Draft::new(ids::RIGIDITY, domain.descriptor(), expected, params.tol(default_tol), params.seed);
    draft.finish(over_points(&points, |z| {
        let len = gradient_length_sq(&m, z)?;
        Ok(Sampled {
            residual: (len - expected).abs(),
            value: len,
        })
    }))
}

/// Whether `|∂φ|² = L²‖z‖²/K` holds pointwise: the standard potential of a
/// single ball (or disc).
fn has_pointwise_law(domain: &DomainSpec, choice: &PotentialChoice) -> bool {
    matches!(choice, PotentialChoice::Standard)
        && domain.factors().len() == 1
        && matches!(domain.factors()[0].kind(), FactorKind::Disc | FactorKind::Ball(_))
}

/// Sampled supremum of `|∂φ|²` against the lower bound `L²/K`.
///
/// A sampled maximum below the bound is never a failure. The residual is the
/// pointwise-law defect for the ball's standard potential, `|max − L²/K|` for
/// constant-length potentials, and zero otherwise. The status is `confirmed`
/// when the maximum reaches `(1 − ε)L²/K`, else `inconclusive`.
pub fn check_lower_bound(domain: &DomainSpec, choice: &PotentialChoice, params: &CheckParams) -> CheckReport {
    let k = domain.ricci_constant();
    let l2 = domain.khl_length_sq();
    let bound = l2 / k;
    let law = has_pointwise_law(domain, choice);
    let equality = choice.has_constant_length();
    let default_tol = if law { tol::POINTWISE_LAW } else { tol::EQUALITY };
    let draft = Draft::new(ids::LOWER_BOUND, domain.descriptor(), bound, params.tol(default_tol), params.seed);
    let run = || -> Result<Vec<Result<Sampled>>> {
        let m = choice.build(domain, params.fd)?;
        let points = sample_points(domain, params)?;
        Ok(over_points(&points, |z| {
            let len = gradient_length_sq(&m, z)?;
            let r2: f64 = z.iter().map(|c| c.norm_sqr()).sum();
            let residual = if law { (len - l2 * r2 / k).abs() } else { 0.0 };
            Ok(Sampled { residual, value: len })
        }))
    };
    let results = match run() {
        Ok(r) => r,
        Err(e) => return draft.fail(e),
    };
    let sup = results
        .iter()
        .filter_map(|r| r.as_ref().ok().map(|s| s.value))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut report = draft.finish(results);
    report.mean_value = sup;
    if equality && report.max_residual.is_finite() {
        report.max_residual = report.max_residual.max((sup - bound).abs());
    }
    report.passed = report.max_residual <= report.tolerance;
    report.status = if !report.passed {
        CheckStatus::Failed
    } else if sup >= (1.0 - tol::CONFIRM_SLACK) * bound {
        CheckStatus::Confirmed
    } else {
        CheckStatus::Inconclusive
    };
    report
}

fn disc_parameters(seed: u64, count: usize, margin: f64) -> Result<Vec<C64>> {
    let disc = DomainSpec::parse("disc", 1.0)?;
    Ok(disc.sample_interior(seed, count, margin)?.into_iter().map(|p| p[0]).collect())
}

/// `max |κ(ζ) − expected|` of `u*ω` over sampled disc parameters.
pub fn check_disc_curvature(u: &DiscEmbedding, m: &MetricField, expected: f64, params: &CheckParams) -> CheckReport {
    let default_tol = if m.is_closed_form() { tol::DISC_CURVATURE_CLOSED } else { tol::DISC_CURVATURE_FD };
    let domain = format!("{}@{}", u.label(), m.domain().descriptor());
    let draft = Draft::new(ids::DISC_CURVATURE, domain, expected, params.tol(default_tol), params.seed);
    let zetas = match disc_parameters(params.seed, params.samples, params.margin.max(0.1)) {
        Ok(z) => z,
        Err(e) => return draft.fail(e),
    };
    let results = zetas
        .par_iter()
        .map(|&zeta| {
            let kappa = pullback_curvature(u, m, zeta)?;
            Ok(Sampled {
                residual: (kappa - expected).abs(),
                value: kappa,
            })
        })
        .collect();
    draft.finish(results)
}

/// `diagonal_disc(n, k)` in `polydisc:n` against `κ = −K/k`.
pub fn check_diagonal_disc(n: usize, k: usize, ricci: f64, params: &CheckParams) -> CheckReport {
    let expected = -ricci / k as f64;
    let setup = || -> Result<(DiscEmbedding, MetricField)> {
        let d = DomainSpec::single(FactorKind::Polydisc(n), ricci)?;
        Ok((diagonal_disc(n, k)?, PotentialChoice::Standard.build(&d, params.fd)?))
    };
    match setup() {
        Ok((u, m)) => check_disc_curvature(&u, &m, expected, params),
        Err(e) => Draft::new(ids::DISC_CURVATURE, format!("diagonal({n},{k})@polydisc:{n}"), expected, params.tol(tol::DISC_CURVATURE_CLOSED), params.seed).fail(e),
    }
}

/// Full-rank disc of the maximal polydisc against `κ = −2K/L²`.
pub fn check_full_rank_disc(domain: &DomainSpec, params: &CheckParams) -> CheckReport {
    let expected = -2.0 * domain.ricci_constant() / domain.khl_length_sq();
    match PotentialChoice::Standard.build(domain, params.fd) {
        Ok(m) => check_disc_curvature(&maximal_polydisc(domain).full_rank_disc(), &m, expected, params),
        Err(e) => Draft::new(ids::DISC_CURVATURE, domain.descriptor(), expected, params.tol(tol::DISC_CURVATURE_FD), params.seed).fail(e),
    }
}

/// Each coordinate disc of the maximal polydisc against `−2K/c` of its
/// factor. The report carries the worst coordinate.
pub fn check_polydisc_curvature(domain: &DomainSpec, params: &CheckParams) -> CheckReport {
    let k = domain.ricci_constant();
    let expected: Vec<f64> = domain
        .factors()
        .iter()
        .flat_map(|f| std::iter::repeat_n(-2.0 * k / f64::from(f.genus()), f.rank()))
        .collect();
    let headline = expected.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let m = match PotentialChoice::Standard.build(domain, params.fd) {
        Ok(m) => m,
        Err(e) => {
            return Draft::new(ids::POLYDISC_CURVATURE, domain.descriptor(), headline, params.tol(tol::DISC_CURVATURE_FD), params.seed)
                .fail(e)
        }
    };
    let default_tol = if m.is_closed_form() { tol::DISC_CURVATURE_CLOSED } else { tol::DISC_CURVATURE_FD };
    let draft = Draft::new(ids::POLYDISC_CURVATURE, domain.descriptor(), headline, params.tol(default_tol), params.seed);
    let poly = maximal_polydisc(domain);
    let zetas = match disc_parameters(params.seed, params.samples, params.margin.max(0.1)) {
        Ok(z) => z,
        Err(e) => return draft.fail(e),
    };
    let jobs: Vec<(usize, C64)> = (0..poly.rank()).flat_map(|j| zetas.iter().map(move |&z| (j, z))).collect();
    let results = jobs
        .par_iter()
        .map(|&(j, zeta)| {
            let kappa = pullback_curvature(&poly.coordinate_disc(j)?, &m, zeta)?;
            Ok(Sampled {
                residual: (kappa - expected[j]).abs(),
                value: kappa,
            })
        })
        .collect();
    draft.finish(results)
}

/// Default start of the flow checks: `(a, …, a)` on a polydisc, `a·e₁` on a
/// ball.
fn flow_start(domain: &DomainSpec) -> Option<Vec<C64>> {
    let a = C64::new(0.7, 0.05);
    match domain.factors() {
        [f] => match f.kind() {
            FactorKind::Disc | FactorKind::Polydisc(_) => Some(vec![a; f.dim()]),
            FactorKind::Ball(n) => {
                let mut z = vec![C64::new(0.0, 0.0); n];
                z[0] = a;
                if n > 1 {
                    z[1] = C64::new(0.0, 0.2);
                }
                Some(z)
            }
            FactorKind::TypeI(..) => None,
        },
        _ => None,
    }
}

/// Distance of `w` from the complex line through `z0` spanned by `v`.
fn line_distance(z0: &[C64], v: &[C64], w: &[C64]) -> f64 {
    let d: Vec<C64> = w.iter().zip(z0).map(|(a, b)| a - b).collect();
    let vv: f64 = v.iter().map(|c| c.norm_sqr()).sum();
    let t: C64 = d.iter().zip(v).map(|(a, b)| a * b.conj()).sum::<C64>() / vv;
    d.iter().zip(v).map(|(a, b)| (a - t * b).norm_sqr()).sum::<f64>().sqrt()
}

/// Flow of the gradient field from the default start over `t ∈ [0, 2]`.
/// Returns the foliation report (the trajectory stays on the leaf through the
/// start) and the curvature report (the leaf has `κ = −2K/L²`).
pub fn check_flow(domain: &DomainSpec, choice: &PotentialChoice, params: &CheckParams) -> Vec<CheckReport> {
    const T_MAX: f64 = 2.0;
    const DT: f64 = 1e-3;
    const STRIDE: usize = 100;
    let expected = -2.0 * domain.ricci_constant() / domain.khl_length_sq();
    let fol = Draft::new(ids::FLOW_FOLIATION, domain.descriptor(), 0.0, params.tol(tol::FLOW_FOLIATION), params.seed);
    let curv = Draft::new(ids::FLOW_CURVATURE, domain.descriptor(), expected, params.tol(tol::FLOW_CURVATURE), params.seed);
    type Columns = Vec<Result<Sampled>>;
    let run = || -> Result<(Columns, Columns)> {
        let m = choice.build(domain, params.fd)?;
        let z0 = flow_start(domain).ok_or_else(|| {
            GeomError::InvalidArgument(format!("no flow start defined for {}", domain.descriptor()))
        })?;
        let traj = flow_gradient(&m, &z0, T_MAX, DT, params.margin.min(DEFAULT_MARGIN))?;
        if traj.escaped {
            return Err(GeomError::DomainBoundary(format!(
                "flow left the domain at t = {}",
                traj.times.last().copied().unwrap_or(0.0)
            )));
        }
        let v0 = gradient_vector(&m, &z0)?.components;
        let polydisc = !matches!(domain.factors()[0].kind(), FactorKind::Ball(_));
        let leaf = traj
            .points
            .iter()
            .map(|p| {
                let residual = if polydisc {
                    max_abs_spread(p)
                } else {
                    line_distance(&z0, &v0, p)
                };
                Ok(Sampled { residual, value: residual })
            })
            .collect();
        let probes: Vec<&Point> = traj.points.iter().step_by(STRIDE).collect();
        let kappas = probes
            .par_iter()
            .map(|p| {
                let kappa = gradient_line_curvature(&m, p)?;
                Ok(Sampled {
                    residual: (kappa - expected).abs(),
                    value: kappa,
                })
            })
            .collect();
        Ok((leaf, kappas))
    };
    match run() {
        Ok((leaf, kappas)) => vec![fol.finish(leaf), curv.finish(kappas)],
        Err(e) => vec![fol.fail(e.clone()), curv.fail(e)],
    }
}

fn max_abs_spread(p: &[C64]) -> f64 {
    let mut s: f64 = 0.0;
    for a in p {
        for b in p {
            s = s.max((a - b).norm());
        }
    }
    s
}

/// `∇V = I` for every potential; for constant-length (and perturbed)
/// potentials also `φ_{α;β}V^β = −φ_α`; for constant-length potentials on a
/// single disc, polydisc or ball also the flow reports.
pub fn check_gradient_identities(domain: &DomainSpec, choice: &PotentialChoice, params: &CheckParams) -> Vec<CheckReport> {
    let field = Draft::new(ids::GRADIENT_FIELD, domain.descriptor(), 1.0, params.tol(tol::GRADIENT_FIELD), params.seed);
    let wants_length = !matches!(choice, PotentialChoice::Standard);
    let setup = || -> Result<(MetricField, Vec<Point>)> {
        Ok((choice.build(domain, params.fd)?, sample_points(domain, params)?))
    };
    let (m, points) = match setup() {
        Ok(x) => x,
        Err(e) => return vec![field.fail(e)],
    };
    let n = m.dim();
    let mut out = vec![field.finish(over_points(&points, |z| {
        let dv = gradient_covariant_derivative(&m, z)?;
        let defect = dv.clone() - nalgebra::DMatrix::<C64>::identity(n, n);
        Ok(Sampled {
            residual: max_abs(defect.iter()),
            value: dv.trace().re / n as f64,
        })
    }))];
    if wants_length {
        let draft = Draft::new(ids::CONSTANT_LENGTH, domain.descriptor(), 0.0, params.tol(tol::CONSTANT_LENGTH), params.seed);
        out.push(draft.finish(over_points(&points, |z| {
            let r = max_abs(constant_length_defect(&m, z)?.iter());
            Ok(Sampled { residual: r, value: r })
        })));
    }
    if choice.has_constant_length() && flow_start(domain).is_some() {
        out.extend(check_flow(domain, choice, params));
    }
    out
}

/// Both sides of `Δ|∂φ|² = φ_{α;β}φ^{α;β} + n − K|∂φ|²` at `z`.
pub fn bochner_sides(m: &MetricField, z: &[C64]) -> Result<(f64, f64)> {
    let len = |w: &[C64]| gradient_length_sq(m, w);
    let lhs = laplace_beltrami(&len, m, z)?;
    let rhs = covariant_hessian_norm_sq(m, z)? + m.dim() as f64 - m.domain().ricci_constant() * len(z)?;
    Ok((lhs, rhs))
}

/// Bochner identity for a Kähler–Einstein potential.
pub fn check_bochner(domain: &DomainSpec, choice: &PotentialChoice, params: &CheckParams) -> CheckReport {
    let draft = Draft::new(ids::BOCHNER, domain.descriptor(), 0.0, params.tol(tol::BOCHNER), params.seed);
    let run = || -> Result<Vec<Result<Sampled>>> {
        let m = choice.build(domain, params.fd)?;
        let points = sample_points(domain, params)?;
        Ok(over_points(&points, |z| {
            let (lhs, rhs) = bochner_sides(&m, z)?;
            Ok(Sampled {
                residual: (lhs - rhs).abs(),
                value: lhs,
            })
        }))
    };
    match run() {
        Ok(r) => draft.finish(r),
        Err(e) => draft.fail(e),
    }
}

/// Schwarz–Pick identity for random disc automorphisms at random points.
pub fn check_schwarz_pick(params: &CheckParams) -> CheckReport {
    let draft = Draft::new(ids::SCHWARZ_PICK, "disc".into(), 0.0, params.tol(tol::SCHWARZ_PICK), params.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let polar = |rng: &mut ChaCha8Rng| C64::from_polar(0.9 * rng.random::<f64>().sqrt(), rng.random_range(0.0..TAU));
    let results = (0..params.samples)
        .map(|_| {
            let a = polar(&mut rng);
            let theta = rng.random_range(0.0..TAU);
            let zeta = polar(&mut rng);
            let u = Mobius::new(a, theta)?;
            let r = schwarz_pick_residual(|z| u.eval(z), |z| u.derivative(z), zeta);
            Ok(Sampled { residual: r, value: r })
        })
        .collect();
    draft.finish(results)
}

/// `|η|² = |∂φ|²/2` for `η = d^cφ`.
pub fn check_dc_relation(domain: &DomainSpec, choice: &PotentialChoice, params: &CheckParams) -> CheckReport {
    let draft = Draft::new(ids::DC_RELATION, domain.descriptor(), 0.5, params.tol(tol::DC_RELATION), params.seed);
    let run = || -> Result<Vec<Result<Sampled>>> {
        let m = choice.build(domain, params.fd)?;
        let points = sample_points(domain, params)?;
        Ok(over_points(&points, |z| {
            let g = gradient_length_sq(&m, z)?;
            let dc = dc_length_sq(&m, z)?;
            Ok(Sampled {
                residual: (dc - g / 2.0).abs(),
                value: if g > 0.0 { dc / g } else { 0.5 },
            })
        }))
    };
    match run() {
        Ok(r) => draft.finish(r),
        Err(e) => draft.fail(e),
    }
}

/// One configured check of a suite.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteEntry {
    /// One of the [`ids`] (the gradient-field, constant-length and flow
    /// reports are produced by [`ids::GRADIENT_IDENTITIES`]).
    pub statement: String,
    pub domain: String,
    pub ricci: f64,
    pub potential: PotentialChoice,
    pub samples: usize,
}

impl SuiteEntry {
    pub fn new(statement: &str, domain: &str, ricci: f64, potential: PotentialChoice, samples: usize) -> Self {
        Self {
            statement: statement.to_string(),
            domain: domain.to_string(),
            ricci,
            potential,
            samples,
        }
    }
}

/// A list of checks plus shared settings.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteConfig {
    pub entries: Vec<SuiteEntry>,
    pub seed: u64,
    pub margin: f64,
    pub fd: FdConfig,
    /// Replaces the genus of every factor of the given kind.
    pub genus_override: Option<(FactorKind, u32)>,
    /// Per-statement tolerance overrides.
    pub tolerances: Vec<(String, f64)>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        use ids::*;
        use PotentialChoice::Standard;
        let ko = PotentialChoice::ko;
        let e = SuiteEntry::new;
        Self {
            entries: vec![
                e(KAHLER_EINSTEIN, "disc", 1.0, Standard, 50),
                e(KAHLER_EINSTEIN, "ball:2", 2.0, Standard, 50),
                e(KAHLER_EINSTEIN, "polydisc:3", 1.0, Standard, 50),
                e(KAHLER_EINSTEIN, "typeI:2,2", 1.0, Standard, 50),
                e(KAHLER_EINSTEIN, "typeI:2,3", 1.0, Standard, 50),
                e(RIGIDITY, "polydisc:3", 1.0, ko(), 100),
                e(RIGIDITY, "ball:2", 2.0, ko(), 100),
                e(LOWER_BOUND, "ball:2", 1.0, Standard, 100),
                e(LOWER_BOUND, "polydisc:2", 1.0, ko(), 100),
                e(DISC_CURVATURE, "polydisc:4", 1.0, Standard, 20),
                e(DISC_CURVATURE, "typeI:2,2", 1.0, Standard, 20),
                e(POLYDISC_CURVATURE, "typeI:2,2", 1.0, Standard, 20),
                e(POLYDISC_CURVATURE, "typeI:2,3", 1.0, Standard, 20),
                e(GRADIENT_IDENTITIES, "polydisc:2", 1.0, ko(), 30),
                e(GRADIENT_IDENTITIES, "ball:2", 1.0, ko(), 30),
                e(GRADIENT_IDENTITIES, "ball:2", 1.0, Standard, 30),
                e(BOCHNER, "disc", 1.0, Standard, 20),
                e(BOCHNER, "ball:2", 1.0, Standard, 20),
                e(SCHWARZ_PICK, "disc", 1.0, Standard, 50),
                e(DC_RELATION, "ball:2", 1.0, Standard, 50),
                e(DC_RELATION, "polydisc:2", 1.0, ko(), 50),
            ],
            seed: 42,
            margin: DEFAULT_MARGIN,
            fd: FdConfig::default(),
            genus_override: None,
            tolerances: Vec::new(),
        }
    }
}

impl SuiteConfig {
    pub fn empty() -> Self {
        Self {
            entries: Vec::new(),
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_genus_override(mut self, kind: FactorKind, genus: u32) -> Self {
        self.genus_override = Some((kind, genus));
        self
    }
}

/// Known statement names accepted by [`run_check`].
pub const STATEMENTS: [&str; 9] = [
    ids::KAHLER_EINSTEIN,
    ids::RIGIDITY,
    ids::LOWER_BOUND,
    ids::DISC_CURVATURE,
    ids::POLYDISC_CURVATURE,
    ids::GRADIENT_IDENTITIES,
    ids::BOCHNER,
    ids::SCHWARZ_PICK,
    ids::DC_RELATION,
];

/// Runs one named check. `disc-curvature` measures the full-rank disc of the
/// maximal polydisc of `domain`.
pub fn run_check(statement: &str, domain: &DomainSpec, choice: &PotentialChoice, params: &CheckParams) -> Result<Vec<CheckReport>> {
    Ok(match statement {
        ids::KAHLER_EINSTEIN => vec![check_kahler_einstein(domain, params)],
        ids::RIGIDITY => vec![check_rigidity(domain, choice, params)],
        ids::LOWER_BOUND => vec![check_lower_bound(domain, choice, params)],
        ids::DISC_CURVATURE => vec![check_full_rank_disc(domain, params)],
        ids::POLYDISC_CURVATURE => vec![check_polydisc_curvature(domain, params)],
        ids::GRADIENT_IDENTITIES | ids::GRADIENT_FIELD | ids::CONSTANT_LENGTH => {
            check_gradient_identities(domain, choice, params)
        }
        ids::FLOW_FOLIATION | ids::FLOW_CURVATURE => check_flow(domain, choice, params),
        ids::BOCHNER => vec![check_bochner(domain, choice, params)],
        ids::SCHWARZ_PICK => vec![check_schwarz_pick(params)],
        ids::DC_RELATION => vec![check_dc_relation(domain, choice, params)],
        other => {
            return Err(GeomError::InvalidArgument(format!(
                "unknown check {other:?}; expected one of {}",
                STATEMENTS.join(", ")
            )))
        }
    })
}

/// Runs every entry, entry `i` seeded with `seed + i`; reports are sorted by
/// statement id, then domain.
pub fn run_suite(config: &SuiteConfig) -> Result<Vec<CheckReport>> {
    let mut jobs = Vec::with_capacity(config.entries.len());
    for (i, e) in config.entries.iter().enumerate() {
        let mut domain = DomainSpec::parse(&e.domain, e.ricci)?;
        if let Some((kind, genus)) = config.genus_override {
            domain = domain.with_genus_override(kind, genus);
        }
        if !STATEMENTS.contains(&e.statement.as_str()) {
            return Err(GeomError::InvalidArgument(format!("unknown check {:?}", e.statement)));
        }
        let mut params = CheckParams {
            samples: e.samples,
            seed: config.seed.wrapping_add(i as u64),
            margin: config.margin,
            tolerance: None,
            fd: config.fd,
        };
        if let Some((_, t)) = config.tolerances.iter().find(|(id, _)| *id == e.statement) {
            params.tolerance = Some(*t);
        }
        jobs.push((e, domain, params));
    }
    let nested: Vec<Result<Vec<CheckReport>>> = jobs
        .par_iter()
        .map(|(e, d, p)| run_check(&e.statement, d, &e.potential, p))
        .collect();
    let mut out = Vec::new();
    for r in nested {
        out.extend(r?);
    }
    out.sort_by(|a, b| (&a.statement_id, &a.domain).cmp(&(&b.statement_id, &b.domain)));
    Ok(out)
}
