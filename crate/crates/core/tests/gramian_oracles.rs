mod common;

use common::*;
use ltp_bpod::bench::random::Sampler;
use ltp_bpod::gramians::{solve_stein, LYAPUNOV_TOL};
use ltp_bpod::{
    controllability_factor, exact_gramians, truncation_bound, lift, min_input_energy,
    observability_factor, output_energy, Error,
};
use nalgebra::{DMatrix, DVector};

#[test]
fn exact_gramians_match_truncated_series() {
    let sys = family_system(5);
    let g = exact_gramians(&sys, 1).unwrap();
    let wc = controllability_sum(&sys, 1, 300);
    let wo = observability_sum(&sys, 1, 300);
    assert!(rel_fro(&g.controllability, &wc) <= 1e-10);
    assert!(rel_fro(&g.observability, &wo) <= 1e-10);
}

#[test]
fn exact_gramians_solve_lifted_lyapunov_equations() {
    let sys = dense_system(3, 8, 2, 3, 4);
    let j = 2;
    let g = exact_gramians(&sys, j).unwrap();
    let l = lift(&sys, j);
    let rc = &l.a * &g.controllability * l.a.transpose() - &g.controllability + &l.b * l.b.transpose();
    let ro = l.a.transpose() * &g.observability * &l.a - &g.observability + l.c.transpose() * &l.c;
    assert!(rc.norm() <= 1e-12 * g.controllability.norm());
    assert!(ro.norm() <= 1e-12 * g.observability.norm());
    assert!((&g.controllability - g.controllability.transpose()).amax() <= 1e-12 * g.controllability.amax());
    let min_eig = g.controllability.clone().symmetric_eigen().eigenvalues.min();
    assert!(min_eig >= -1e-10 * g.controllability.norm());
}

#[test]
fn periodic_lyapunov_recursions_hold() {
    let sys = dense_system(8, 6, 1, 2, 3);
    let gs: Vec<_> = (1..=4).map(|j| exact_gramians(&sys, j).unwrap()).collect();
    for j in 1..=3usize {
        let k = j as i64;
        let (now, next) = (&gs[j - 1], &gs[j]);
        let rc = sys.a(k) * &now.controllability * sys.a(k).transpose() - &next.controllability
            + sys.b(k) * sys.b(k).transpose();
        assert!(rc.norm() <= 1e-10 * now.controllability.norm());
        let ro = sys.a(k).transpose() * &next.observability * sys.a(k) - &now.observability
            + sys.c(k).transpose() * sys.c(k);
        assert!(ro.norm() <= 1e-10 * now.observability.norm());
    }
    // W(j+T) = W(j)
    assert!(rel_fro(&gs[3].controllability, &gs[0].controllability) <= 1e-10);
    assert!(rel_fro(&gs[3].observability, &gs[0].observability) <= 1e-10);
}

#[test]
fn zero_maps_give_zero_gramians() {
    let sys = small_system(1, 4, 1, 2, 3);
    let zero_b = ltp_bpod::PeriodicSystem::new(
        sys.a_matrices().to_vec(),
        vec![DMatrix::zeros(4, 1); 3],
        sys.c_matrices().to_vec(),
    )
    .unwrap();
    assert_eq!(exact_gramians(&zero_b, 1).unwrap().controllability.amax(), 0.0);
}

#[test]
fn stein_solver_reaches_tolerance_quickly() {
    let a = DMatrix::from_diagonal_element(3, 3, 0.9);
    let f = DMatrix::from_element(3, 1, 1.0);
    let sol = solve_stein(&a, &f).unwrap();
    assert!(sol.iterations < 12);
    let expected = DMatrix::from_element(3, 3, 1.0 / (1.0 - 0.81));
    assert!(rel_fro(&sol.gramian(), &expected) < 1e3 * LYAPUNOV_TOL);
}

#[test]
fn snapshot_factors_reproduce_summation_definitions() {
    let sys = family_system(7);
    for m in [1, 3, 5, 10, 20] {
        let x = controllability_factor(&sys, 1, m).unwrap();
        let y = observability_factor(&sys, 1, m, None).unwrap();
        assert!(rel_fro(&x.gramian(), &controllability_sum(&sys, 1, m)) <= 1e-12);
        assert!(rel_fro(&y.gramian(), &observability_sum(&sys, 1, m)) <= 1e-12);
        assert_eq!(x.simulations, m.min(5));
        assert_eq!(y.simulations, 30 * m.min(5));
    }
}

#[test]
fn factor_columns_are_transition_products() {
    let sys = dense_system(2, 5, 2, 2, 3);
    let (j, m) = (4, 7);
    let x = controllability_factor(&sys, j, m).unwrap();
    let y = observability_factor(&sys, j, m, None).unwrap();
    for d in 0..2 {
        for l in 0..m {
            let k = j - m as i64 + l as i64;
            let xc = transition_oracle(&sys, j, k + 1) * sys.b(k).column(d);
            assert!((x.matrix.column(d * m + l) - xc).amax() < 1e-14);
            let src = j + (m - l) as i64 - 1;
            let yc = transition_oracle(&sys, src, j).transpose() * sys.c(src).row(d).transpose();
            assert!((y.matrix.column(d * m + l) - yc).amax() < 1e-14);
        }
    }
}

#[test]
fn truncation_error_obeys_geometric_bound_and_decreases() {
    for seed in 0..4 {
        let sys = family_system(seed);
        let exact = exact_gramians(&sys, 1).unwrap();
        let norm = spectral_norm(&exact.controllability);
        let mut last = f64::INFINITY;
        for l in 1..=4 {
            let x = controllability_factor(&sys, 1, 5 * l).unwrap();
            let err = spectral_norm(&(&exact.controllability - x.gramian())) / norm;
            assert!(err <= truncation_bound(&sys, 1, l));
            assert!(err <= last);
            last = err;
        }
    }
}

#[test]
fn unstable_systems_are_rejected() {
    let sys = ltp_bpod::PeriodicSystem::new(
        vec![DMatrix::from_element(1, 1, 2.0), DMatrix::from_element(1, 1, 0.5)],
        vec![DMatrix::from_element(1, 1, 1.0); 2],
        vec![DMatrix::from_element(1, 1, 1.0); 2],
    )
    .unwrap();
    assert!(matches!(exact_gramians(&sys, 1), Err(Error::Unstable { .. })));
    assert!(matches!(controllability_factor(&sys, 1, 4), Err(Error::Unstable { .. })));
}

#[test]
fn output_energy_matches_long_simulation() {
    let sys = family_system(9);
    let mut rng = Sampler::new(1);
    for _ in 0..3 {
        let x = rng.vector(30, -1.0, 1.0);
        let energy = output_energy(&sys, 1, &x).unwrap();
        let sim = sys.free_response(1, &x, 200 * 5).unwrap();
        let oracle: f64 = sim.outputs.iter().map(|y| y.norm_squared()).sum();
        assert!((energy - oracle).abs() <= 1e-8 * oracle);
    }
}

#[test]
fn min_input_energy_matches_least_squares_steering() {
    let sys = small_system(4, 6, 3, 2, 5);
    let j = 1;
    let horizon = 40 * 5;
    // Reachability map R: stacked inputs u(j-M..j-1) ↦ x(j).
    let mut reach = DMatrix::zeros(6, 3 * horizon);
    for (col, k) in ((j - horizon as i64)..j).enumerate() {
        let blk = transition_oracle(&sys, j, k + 1) * sys.b(k);
        reach.view_mut((0, 3 * col), (6, 3)).copy_from(&blk);
    }
    let svd = reach.svd(true, true);
    let mut rng = Sampler::new(2);
    for _ in 0..3 {
        let x = rng.vector(6, -1.0, 1.0);
        let u = svd.solve(&x, 1e-14).unwrap();
        let oracle = u.norm_squared();
        let energy = min_input_energy(&sys, j, &x).unwrap();
        assert!((energy - oracle).abs() <= 1e-6 * oracle);
    }
    assert_eq!(min_input_energy(&sys, j, &DVector::zeros(6)).unwrap(), 0.0);
}

#[test]
fn singular_controllability_gramian_is_reported() {
    // One input on the validation family cannot reach all 30 states.
    let sys = family_system(0);
    let x = DVector::from_element(30, 1.0);
    let err = min_input_energy(&sys, 1, &x).unwrap_err();
    assert!(matches!(err.root(), Error::Unreachable { .. }));
}
