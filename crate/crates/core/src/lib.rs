//! Numerical Kähler geometry of bounded symmetric domains.
//!
//! The crate builds the complete Kähler–Einstein metric `ω = (1/K) dd^c log K_Ω`
//! of a bounded symmetric domain from its generic norm, and measures the
//! quantities that govern the Kähler-hyperbolicity length of the domain:
//! gradient lengths of Kähler potentials, Christoffel symbols, covariant
//! derivatives of the gradient field, Ricci forms, and the Gaussian curvature
//! of totally geodesic holomorphic discs.
//!
//! Every derivative is a Wirtinger derivative computed either in closed form
//! (built-in potentials) or by Richardson-extrapolated central
//! differences. The [`verify`] module composes these primitives into check
//! suites producing [`verify::CheckReport`]s.
//!
//! ```
//! use bsd_geometry::prelude::*;
//!
//! let domain = DomainSpec::parse("polydisc:3", 1.0).unwrap();
//! assert_eq!(domain.khl_length_sq(), 6.0);
//!
//! let phi = ko_potential_polydisc(3, &KoParams::new(1.0)).unwrap();
//! let metric = MetricField::new(phi, domain.clone(), FdConfig::default());
//! let z = Point::from_parts(&[(0.2, 0.1), (-0.3, 0.4), (0.0, -0.5)]);
//! let len = gradient_length_sq(&metric, &z).unwrap();
//! assert!((len - 6.0).abs() < 1e-10);
//! ```

pub mod calculus;
pub mod domains;
pub mod embeddings;
pub mod error;
pub mod geometry;
pub mod potentials;
pub mod verify;

pub use error::{GeomError, Result};
pub use num_complex::Complex64 as C64;

pub mod prelude {
    pub use crate::calculus::{
        hermitian_inverse, mixed_hessian, wirtinger_grad, FdConfig, HermitianForm,
    };
    pub use crate::domains::{DomainSpec, FactorKind, IrreducibleFactor, Point};
    pub use crate::embeddings::{
        diagonal_disc, disc_rank_measured, flow_gradient, maximal_polydisc,
        maximal_polydisc_typei, pullback_metric_1d, schwarz_pick_residual, DiscEmbedding,
        Mobius, PolydiscEmbedding, Trajectory,
    };
    pub use crate::error::{GeomError, Result};
    pub use crate::geometry::{
        christoffel, covariant_hessian, dc_length_sq, gauss_curvature_1d, gradient_length_sq,
        gradient_vector, laplace_beltrami, metric_at, ricci_at, MetricField, TangentVector,
    };
    pub use crate::potentials::{
        ko_potential, ko_potential_ball, ko_potential_polydisc, perturb_pluriharmonic,
        product_potential, standard_potential, KoParams, PotentialFn,
    };
    pub use crate::verify::{
        check_kahler_einstein, check_rigidity, run_check, run_suite, CheckParams, CheckReport,
        CheckStatus, PotentialChoice, SuiteConfig,
    };
    pub use crate::C64;
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/domains.md")]
    mod domains {}
    #[doc = include_str!("../../../book/src/calculus.md")]
    mod calculus {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/potentials.md")]
    mod potentials {}
    #[doc = include_str!("../../../book/src/embeddings.md")]
    mod embeddings {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
}
