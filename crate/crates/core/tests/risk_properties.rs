//! Coherence and cross-route agreement of the risk kernel.

mod common;

use proptest::prelude::*;
use riskdp_core::risk::{
    avar, avar_qscan, curve_from_distribution, kusuoka_risk, risk_from_gcurve,
    DiscreteDistribution, RiskSpec,
};
use riskdp_core::rng::rng_from_seed;

const TOL: f64 = 1e-10;

fn dist_and_spec() -> impl Strategy<Value = (DiscreteDistribution, RiskSpec, u64)> {
    any::<u64>().prop_map(|seed| {
        let mut rng = rng_from_seed(seed);
        (
            common::random_distribution(&mut rng),
            common::random_spec(&mut rng),
            seed,
        )
    })
}

fn shifted(d: &DiscreteDistribution, f: impl Fn(f64) -> f64) -> DiscreteDistribution {
    DiscreteDistribution::new(d.points.iter().map(|&(z, p)| (f(z), p)).collect()).unwrap()
}

fn q_range(d: &DiscreteDistribution) -> (f64, f64) {
    let lo = d.points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = d
        .points
        .iter()
        .map(|p| p.0)
        .fold(f64::NEG_INFINITY, f64::max);
    (lo - 1.0, hi + 1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn kernel_routes_agree((d, spec, _) in dist_and_spec()) {
        let (lo, hi) = q_range(&d);
        let direct = kusuoka_risk(&d, &spec);
        let via_curve = risk_from_gcurve(&curve_from_distribution(&d), &spec, lo, hi).unwrap();
        prop_assert!((direct - via_curve).abs() <= TOL, "{} vs {}", direct, via_curve);
    }

    #[test]
    fn avar_sort_rule_matches_scan((d, _, seed) in dist_and_spec(), xi in 0.001f64..=1.0) {
        let a = avar(&d, xi).unwrap();
        let b = avar_qscan(&d, xi).unwrap();
        prop_assert!((a - b).abs() <= TOL, "seed {}: {} vs {}", seed, a, b);
    }

    #[test]
    fn translation_equivariance((d, spec, _) in dist_and_spec(), c in -3.0f64..3.0) {
        let r = kusuoka_risk(&d, &spec);
        let rs = kusuoka_risk(&shifted(&d, |z| z + c), &spec);
        prop_assert!((rs - (r + c)).abs() <= TOL);
    }

    #[test]
    fn positive_homogeneity((d, spec, _) in dist_and_spec(), a in 0.0f64..5.0) {
        let r = kusuoka_risk(&d, &spec);
        let ra = kusuoka_risk(&shifted(&d, |z| a * z), &spec);
        prop_assert!((ra - a * r).abs() <= TOL * (1.0 + a));
    }

    #[test]
    fn monotonicity((d, spec, seed) in dist_and_spec()) {
        // Pointwise larger outcome on the same atoms.
        let bumps: Vec<f64> = (0..d.points.len()).map(|n| ((seed >> (n % 60)) & 3) as f64 * 0.1).collect();
        let up = DiscreteDistribution::new(d.points.iter().zip(&bumps).map(|(&(z, p), b)| (z + b, p)).collect()).unwrap();
        prop_assert!(kusuoka_risk(&up, &spec) >= kusuoka_risk(&d, &spec) - TOL);
    }

    #[test]
    fn subadditivity((d, spec, seed) in dist_and_spec()) {
        // Second outcome on the same atoms; the sum is coupled atom by atom.
        let mut rng = rng_from_seed(seed ^ 0x5eed);
        let other: Vec<f64> = (0..d.points.len()).map(|_| rand::Rng::random_range(&mut rng, -2.0..2.0)).collect();
        let y = DiscreteDistribution::new(d.points.iter().zip(&other).map(|(&(_, p), &w)| (w, p)).collect()).unwrap();
        let sum = DiscreteDistribution::new(d.points.iter().zip(&other).map(|(&(z, p), &w)| (z + w, p)).collect()).unwrap();
        prop_assert!(kusuoka_risk(&sum, &spec) <= kusuoka_risk(&d, &spec) + kusuoka_risk(&y, &spec) + TOL);
    }

    #[test]
    fn risk_lies_between_mean_and_max((d, spec, _) in dist_and_spec()) {
        let r = kusuoka_risk(&d, &spec);
        let max = d.points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(r >= d.mean() - TOL && r <= max + TOL);
    }

    #[test]
    fn curves_are_nonincreasing_and_one_lipschitz((d, _, _) in dist_and_spec()) {
        let c = curve_from_distribution(&d);
        prop_assert!(c.check_shape().is_ok());
        for w in c.breakpoints.windows(2).zip(c.values.windows(2)) {
            let slope = (w.1[1] - w.1[0]) / (w.0[1] - w.0[0]);
            prop_assert!(slope <= 1e-12 && slope >= -1.0 - 1e-12);
        }
    }

    #[test]
    fn avar_is_nonincreasing_in_level((d, _, _) in dist_and_spec(), a in 0.01f64..1.0, b in 0.01f64..1.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(avar(&d, lo).unwrap() >= avar(&d, hi).unwrap() - TOL);
    }
}

#[test]
fn expectation_spec_is_the_mean() {
    let mut rng = rng_from_seed(5);
    for _ in 0..100 {
        let d = common::random_distribution(&mut rng);
        assert!((kusuoka_risk(&d, &RiskSpec::expectation()) - d.mean()).abs() <= 1e-12);
    }
}

#[test]
fn avar_outside_unit_interval_is_a_domain_error() {
    let d = DiscreteDistribution::point_mass(1.0);
    for xi in [0.0, -0.1, 1.5, f64::NAN] {
        assert!(matches!(avar(&d, xi), Err(riskdp_core::Error::Domain(_))));
    }
}
