use bsd_geometry::calculus::{mixed_hessian, FdConfig};
use bsd_geometry::domains::DomainSpec;
use bsd_geometry::embeddings::{diagonal_disc, pullback_curvature, pullback_metric_1d, schwarz_pick_residual, Mobius};
use bsd_geometry::geometry::{
    constant_length_defect, dc_length_sq, gradient_covariant_derivative, gradient_length_sq, metric_at, ricci_at,
    MetricField,
};
use bsd_geometry::potentials::{
    ko_potential, ko_potential_ball, ko_potential_polydisc, perturb_pluriharmonic, standard_potential, KoParams,
    Monomial, PotentialFn,
};
use bsd_geometry::verify::{check_kahler_einstein, check_rigidity, CheckParams, PotentialChoice};
use bsd_geometry::C64;
use proptest::prelude::*;

const FACTORS: [&str; 7] = ["disc", "ball:2", "ball:3", "polydisc:2", "polydisc:3", "typeI:2,2", "typeI:2,3"];
const PRODUCTS: [&str; 4] = ["ball:2xdisc", "polydisc:2xball:2", "typeI:2,2xdisc", "discxdiscxball:3"];

fn dom(s: &str, k: f64) -> DomainSpec {
    DomainSpec::parse(s, k).unwrap()
}

fn point(d: &DomainSpec, seed: u64) -> Vec<C64> {
    d.sample_interior(seed, 1, 0.1).unwrap().remove(0).0
}

fn complex() -> impl Strategy<Value = C64> {
    (-0.5f64..0.5, -0.5f64..0.5).prop_map(|(a, b)| C64::new(a, b))
}

fn in_disc() -> impl Strategy<Value = C64> {
    (0.0f64..0.95, 0.0f64..std::f64::consts::TAU).prop_map(|(r, t)| C64::from_polar(r, t))
}

fn unit_direction(n: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n).prop_filter_map("nonzero", |v| {
        let norm = v.iter().map(|(a, b)| a * a + b * b).sum::<f64>().sqrt();
        (norm > 1e-3).then(|| v.iter().map(|(a, b)| C64::new(a / norm, b / norm)).collect())
    })
}

fn metric(d: &DomainSpec, p: PotentialFn) -> MetricField {
    MetricField::new(p, d.clone(), FdConfig::default())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn log_kernel_metric_is_kahler_einstein(idx in 0usize..FACTORS.len(), k in 0.5f64..3.0, seed in 0u64..1000) {
        let d = dom(FACTORS[idx], k);
        let r = check_kahler_einstein(&d, &CheckParams::default().with_samples(2).with_seed(seed));
        prop_assert!(r.passed, "{:?}", r);
    }

    #[test]
    fn products_are_additive(idx in 0usize..PRODUCTS.len(), seed in 0u64..1000) {
        let d = dom(PRODUCTS[idx], 1.0);
        let z = point(&d, seed);
        let mut khl = 0.0;
        let mut value = 0.0;
        for (f, block) in d.factors().iter().zip(d.blocks()) {
            let single = DomainSpec::new(vec![f.clone()], 1.0).unwrap();
            khl += single.khl_length_sq();
            value += single.log_kernel_value(&z[block]).unwrap();
        }
        prop_assert_eq!(d.khl_length_sq(), khl);
        prop_assert!((d.log_kernel_value(&z).unwrap() - value).abs() < 1e-12);
    }

    #[test]
    fn product_metric_is_block_diagonal(idx in 0usize..PRODUCTS.len(), seed in 0u64..1000) {
        let d = dom(PRODUCTS[idx], 1.0);
        let z = point(&d, seed);
        let fd_only = {
            let p = standard_potential(&d);
            PotentialFn::new("fd", p.dim(), move |w| p.eval(w))
        };
        for m in [metric(&d, standard_potential(&d)), metric(&d, fd_only)] {
            let g = metric_at(&m, &z).unwrap();
            let blocks = d.blocks();
            let owner = |i: usize| blocks.iter().position(|b| b.contains(&i)).unwrap();
            for i in 0..d.dim() {
                for j in 0..d.dim() {
                    if owner(i) != owner(j) {
                        prop_assert!(g.get(i, j).norm() <= 1e-8);
                    }
                }
            }
        }
    }

    #[test]
    fn pluriharmonic_terms_have_no_mixed_hessian(a in complex(), b in complex(), e0 in 0u32..4, e1 in 0u32..4, seed in 0u64..1000) {
        let d = dom("polydisc:2", 1.0);
        let z = point(&d, seed);
        let terms = [Monomial::new(vec![e0, e1], a), Monomial::new(vec![e1, 1], b)];
        let h = |w: &[C64]| -> bsd_geometry::Result<f64> {
            Ok(terms.iter().map(|t| {
                let v = w.iter().zip(&t.exponents).map(|(x, &e)| x.powu(e)).product::<C64>();
                2.0 * (t.coeff * v).re
            }).sum())
        };
        let hess = mixed_hessian(&h, &z, &FdConfig::default()).unwrap();
        prop_assert!(hess.max_abs() <= 1e-6, "{}", hess.max_abs());
        let base = standard_potential(&d);
        let pert = perturb_pluriharmonic(&base, &terms).unwrap();
        let fd = PotentialFn::new("fd", 2, move |w| pert.eval(w));
        let diff = (fd.hess(&z, &FdConfig::default()).unwrap().entries() - base.hess(&z, &FdConfig::default()).unwrap().entries())
            .iter().map(|c| c.norm()).fold(0.0, f64::max);
        prop_assert!(diff <= 1e-6, "{}", diff);
    }

    #[test]
    fn gradient_field_is_parallel(idx in 0usize..FACTORS.len(), perturb in complex(), seed in 0u64..1000) {
        let d = dom(FACTORS[idx], 1.0);
        let z = point(&d, seed);
        let mut exps = vec![0; d.dim()];
        exps[0] = 3;
        let p = perturb_pluriharmonic(&standard_potential(&d), &[Monomial::new(exps, perturb)]).unwrap();
        let dv = gradient_covariant_derivative(&metric(&d, p), &z).unwrap();
        for i in 0..d.dim() {
            for j in 0..d.dim() {
                let target = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dv[(i, j)] - C64::new(target, 0.0)).norm() <= 1e-3);
            }
        }
    }

    #[test]
    fn ko_polydisc_has_constant_length(n in 1usize..4, k in 0.5f64..3.0, thetas in prop::collection::vec(0.0f64..std::f64::consts::TAU, 3), seed in 0u64..1000) {
        let d = dom(&format!("polydisc:{n}"), k);
        let p = ko_potential_polydisc(n, &KoParams::new(k).with_thetas(thetas[..n].to_vec())).unwrap();
        let m = metric(&d, p);
        let z = point(&d, seed);
        prop_assert!((gradient_length_sq(&m, &z).unwrap() - 2.0 * n as f64 / k).abs() <= 1e-6);
        prop_assert!(constant_length_defect(&m, &z).unwrap().iter().all(|c| c.norm() <= 1e-3));
    }

    #[test]
    fn ko_ball_has_constant_length(b in unit_direction(3), k in 0.5f64..3.0, seed in 0u64..1000) {
        let d = dom("ball:3", k);
        let p = ko_potential_ball(3, &KoParams::new(k).with_direction(b)).unwrap();
        let m = metric(&d, p);
        let z = point(&d, seed);
        prop_assert!((gradient_length_sq(&m, &z).unwrap() - 4.0 / k).abs() <= 1e-6);
        prop_assert!(constant_length_defect(&m, &z).unwrap().iter().all(|c| c.norm() <= 1e-3));
    }

    #[test]
    fn ko_length_has_no_spread(seed in 0u64..1000) {
        for desc in ["polydisc:3", "ball:2", "ball:2xdisc"] {
            let d = dom(desc, 1.0);
            let r = check_rigidity(&d, &PotentialChoice::ko(), &CheckParams::default().with_samples(100).with_seed(seed));
            prop_assert!(r.max_residual <= 1e-6);
        }
    }

    #[test]
    fn diagonal_pullback_and_curvature(n in 1usize..5, kk in 0.5f64..3.0, zeta in complex(), rank in 1usize..5) {
        let k = rank.min(n);
        let d = dom(&format!("polydisc:{n}"), kk);
        let m = metric(&d, standard_potential(&d));
        let u = diagonal_disc(n, k).unwrap();
        let lambda = pullback_metric_1d(&u, &m, zeta).unwrap();
        let closed = 2.0 * k as f64 / (kk * (1.0 - zeta.norm_sqr()).powi(2));
        prop_assert!((lambda - closed).abs() <= 1e-8 * closed);
        prop_assert!((pullback_curvature(&u, &m, zeta).unwrap() + kk / k as f64).abs() <= 1e-6);
    }

    #[test]
    fn mobius_maps_satisfy_schwarz_pick(a in in_disc(), theta in 0.0f64..std::f64::consts::TAU, zeta in in_disc()) {
        let u = Mobius::new(a, theta).unwrap();
        prop_assert!(schwarz_pick_residual(|z| u.eval(z), |z| u.derivative(z), zeta) <= 1e-10);
    }

    #[test]
    fn dc_length_is_half_gradient_length(idx in 0usize..FACTORS.len(), seed in 0u64..1000) {
        let d = dom(FACTORS[idx], 1.0);
        let m = metric(&d, standard_potential(&d));
        let z = point(&d, seed);
        prop_assert_eq!(dc_length_sq(&m, &z).unwrap(), gradient_length_sq(&m, &z).unwrap() / 2.0);
    }

    #[test]
    fn ricci_is_invariant_under_pluriharmonic_change(c0 in complex(), seed in 0u64..1000) {
        let d = dom("ball:2", 1.0);
        let z = point(&d, seed);
        let base = ko_potential(&d, &KoParams::new(1.0)).unwrap();
        let pert = perturb_pluriharmonic(&base, &[Monomial::new(vec![1, 2], c0)]).unwrap();
        let r0 = ricci_at(&metric(&d, base), &z).unwrap();
        let r1 = ricci_at(&metric(&d, pert), &z).unwrap();
        prop_assert!((r0.entries() - r1.entries()).iter().all(|c| c.norm() <= 1e-6));
    }
}
