//! Model and trajectory invariants: serialization, reproducibility, empirical frequencies.

use proptest::prelude::*;
use riskdp_core::mdp::{gen_random_mdp, simulate, CostKind, Dataset, MdpModel, SimplexPolicy};

fn kind(beta: bool) -> CostKind {
    if beta {
        CostKind::Beta
    } else {
        CostKind::Deterministic
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_models_validate_and_round_trip(ns in 1usize..6, na in 1usize..6, beta: bool, gamma in 0.01f64..0.99, seed: u64) {
        let m = gen_random_mdp(ns, na, kind(beta), 2.0, gamma, seed).unwrap();
        for k in 0..na {
            for i in 0..ns {
                prop_assert!((m.transitions[k][i].iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
        let back = MdpModel::from_json(&m.to_json().unwrap()).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(back.hash(), m.hash());
    }

    #[test]
    fn datasets_round_trip_through_csv(seed: u64, beta: bool) {
        let m = gen_random_mdp(3, 2, kind(beta), 1.0, 0.3, seed).unwrap();
        let d = simulate(&m, &SimplexPolicy::uniform(3, 2), 300, 0, seed).unwrap();
        let back = Dataset::read_csv(d.to_csv_string().as_bytes(), 3, 2).unwrap();
        prop_assert_eq!(&back, &d);
        prop_assert!(d.is_path());
        prop_assert!(d.transitions.iter().all(|t| (0.0..=1.0).contains(&t.c)));
    }

    #[test]
    fn shorter_runs_are_prefixes(seed: u64, t in 2usize..200) {
        let m = gen_random_mdp(3, 3, CostKind::Beta, 1.0, 0.3, seed).unwrap();
        let pi = SimplexPolicy::uniform(3, 3);
        let long = simulate(&m, &pi, 400, 1, seed).unwrap();
        let short = simulate(&m, &pi, t, 1, seed).unwrap();
        prop_assert_eq!(short, long.prefix(t - 1));
    }
}

#[test]
fn action_and_transition_frequencies_converge() {
    let m = gen_random_mdp(3, 2, CostKind::Deterministic, 1.0, 0.3, 17).unwrap();
    let pi = SimplexPolicy::random_exploration(3, 2, 0.1, 4).unwrap();
    let d = simulate(&m, &pi, 200_001, 0, 8).unwrap();
    let mut state_visits = [0usize; 3];
    let mut pair = [[0usize; 2]; 3];
    let mut next = [[[0usize; 3]; 2]; 3];
    for t in &d.transitions {
        state_visits[t.x] += 1;
        pair[t.x][t.a] += 1;
        next[t.x][t.a][t.x_next] += 1;
    }
    for i in 0..3 {
        for k in 0..2 {
            let f = pair[i][k] as f64 / state_visits[i] as f64;
            let sd = (pi.weights[i][k] * (1.0 - pi.weights[i][k]) / state_visits[i] as f64).sqrt();
            assert!(
                (f - pi.weights[i][k]).abs() <= 5.0 * sd + 1e-12,
                "action freq {f} vs {}",
                pi.weights[i][k]
            );
            for j in 0..3 {
                let p = m.transitions[k][i][j];
                let f = next[i][k][j] as f64 / pair[i][k] as f64;
                let sd = (p * (1.0 - p) / pair[i][k] as f64).sqrt();
                assert!(
                    (f - p).abs() <= 5.0 * sd + 1e-12,
                    "transition freq {f} vs {p}"
                );
            }
        }
    }
}

#[test]
fn unnormalized_transition_rows_are_rejected() {
    let m = gen_random_mdp(2, 1, CostKind::Deterministic, 1.0, 0.3, 0).unwrap();
    let mut bad = m.clone();
    bad.transitions[0][0][0] += 1e-9;
    assert!(bad.validate().is_err());
    let mut neg = m;
    neg.transitions[0][1] = vec![1.5, -0.5];
    assert!(neg.validate().is_err());
}
