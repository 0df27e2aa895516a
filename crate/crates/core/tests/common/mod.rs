#![allow(dead_code)]

use rand::Rng as _;
use riskdp_core::mdp::{CostModel, MdpModel};
use riskdp_core::risk::{Atom, DiscreteDistribution, RiskSpec, SpectralMeasure};
use riskdp_core::rng::Rng;

pub fn fixture(name: &str) -> serde_json::Value {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Random law with 1..=12 atoms on `[-2, 3]`, possibly with repeated values.
pub fn random_distribution(rng: &mut Rng) -> DiscreteDistribution {
    let n = rng.random_range(1..=12);
    let mut w: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    let points = w
        .into_iter()
        .map(|p| {
            let z = if rng.random_bool(0.2) {
                1.0
            } else {
                rng.random_range(-2.0..3.0)
            };
            (z, p)
        })
        .collect();
    DiscreteDistribution::new(points).unwrap()
}

/// Random set of 1..=4 measures with 1..=3 atoms each on `[0.02, 1]`.
pub fn random_spec(rng: &mut Rng) -> RiskSpec {
    let n = rng.random_range(1..=4);
    let measures = (0..n)
        .map(|_| {
            let k = rng.random_range(1..=3);
            let mut w: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= s);
            let atoms = w
                .into_iter()
                .map(|weight| {
                    let xi = if rng.random_bool(0.2) {
                        1.0
                    } else {
                        rng.random_range(0.02..1.0)
                    };
                    Atom { xi, weight }
                })
                .collect();
            SpectralMeasure::new(atoms).unwrap()
        })
        .collect();
    RiskSpec::new(measures).unwrap()
}

pub fn benchmark_spec() -> RiskSpec {
    RiskSpec::benchmark().0
}

/// One state, one action, constant cost `c`.
pub fn scalar_model(c: f64, gamma: f64) -> MdpModel {
    MdpModel::new(
        1,
        1,
        gamma,
        vec![vec![vec![1.0]]],
        CostModel::Deterministic {
            c_max: 1.0,
            table: vec![vec![vec![c]]],
        },
    )
    .unwrap()
}
