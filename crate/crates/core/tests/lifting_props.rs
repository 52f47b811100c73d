mod common;

use common::*;
use ltp_bpod::bench::random::Sampler;
use ltp_bpod::{lift, lifted_impulse_response};
use nalgebra::DVector;
use proptest::prelude::*;

#[test]
fn lifted_matrices_match_block_formulas() {
    let sys = dense_system(1, 6, 2, 3, 4);
    for j in [1, 3, -2] {
        let lifted = lift(&sys, j);
        let oracle = lifted_oracle(&sys, j);
        assert!((&lifted.a - &oracle.a).amax() < 1e-13);
        assert!((&lifted.b - &oracle.b).amax() < 1e-13);
        assert!((&lifted.c - &oracle.c).amax() < 1e-13);
        assert!((&lifted.d - &oracle.d).amax() < 1e-13);
        for i in 1..=4 {
            for k in i..=4 {
                assert_eq!(lifted.d_block(i, k).amax(), 0.0);
            }
        }
    }
}

#[test]
fn lifted_simulation_matches_periodic_simulation() {
    let sys = family_system(2);
    let (j, periods) = (3, 3);
    let lifted = lift(&sys, j);
    let mut rng = Sampler::new(99);
    let x0 = rng.vector(30, -1.0, 1.0);
    let inputs = random_inputs(&mut rng, periods * 5, 1);
    let periodic = sys.simulate(j, &x0, &inputs).unwrap();
    let stacked: Vec<DVector<f64>> = inputs
        .chunks(5)
        .map(|c| DVector::from_iterator(5, c.iter().map(|u| u[0])))
        .collect();
    let (states, outputs) = lifted.simulate(&x0, &stacked).unwrap();
    for t in 0..=periods {
        assert!((&states[t] - &periodic.states[5 * t]).amax() < 1e-12);
    }
    for t in 0..periods {
        for i in 0..5 {
            let y = outputs[t].rows(30 * i, 30);
            assert!((y - &periodic.outputs[5 * t + i]).amax() < 1e-12);
        }
    }
}

#[test]
fn simulated_impulse_blocks_match_explicit_markov_parameters() {
    let sys = family_system(4);
    let j = 2;
    let s = 4;
    let blocks = lifted_impulse_response(&sys, j, s);
    let oracle = lifted_oracle(&sys, j);
    for t in 0..=s {
        let expected = markov_oracle(&oracle, t);
        assert!((blocks.lifted(t) - &expected).amax() <= 1e-11 * expected.amax().max(1.0));
        for i in 0..5 {
            assert_eq!(blocks.block(t, i), &blocks.lifted(t).rows(30 * i, 30).into_owned());
        }
    }
    assert_eq!(blocks.block(0, 0).amax(), 0.0);
}

#[test]
fn impulse_csv_has_one_row_per_entry() {
    let sys = small_system(3, 3, 2, 2, 2);
    let blocks = lifted_impulse_response(&sys, 1, 1);
    let csv = blocks.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,i,output,input,value"));
    assert_eq!(lines.count(), 2 * 2 * 2 * 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lifted_markov_matches_simulation(seed in 0u64..500, j in -6i64..6, period in 1usize..5) {
        let sys = dense_system(seed, 5, 2, 2, period);
        let lifted = lift(&sys, j);
        let blocks = lifted_impulse_response(&sys, j, 3);
        for t in 0..=3 {
            prop_assert!((blocks.lifted(t) - lifted.markov(t)).amax() < 1e-12);
        }
    }
}
