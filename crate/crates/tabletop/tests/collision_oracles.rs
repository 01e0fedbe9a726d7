use tabletop::channelcore::NumericPolicy;
use tabletop::collision::*;
use tabletop::matrixkit::*;
use tabletop::Error;
use tabletop::random;
use tabletop::ttr_approx::{log_grid, loglog_fit, scaling_exponent};

fn pol() -> NumericPolicy {
    NumericPolicy::default()
}

#[test]
fn petz_generator_gap_is_second_order_for_non_steady_priors() {
    for seed in 0..4 {
        let mut r = random::rng(100 + seed);
        let spec = random::collision_spec(&mut r, 2, 2, 1.0, 0.5);
        let gamma = random::density(&mut r, 2, 0.1);
        let grid = log_grid(1e-3, 1e-1, 12).unwrap();
        let pts: Vec<(f64, f64)> = grid.iter().map(|&dt| (dt, petz_generator_gap(&spec, &gamma, dt, &pol()).unwrap())).collect();
        let fit = scaling_exponent(&pts).unwrap();
        assert!((1.9..=2.1).contains(&fit.slope), "seed {seed}: slope {}", fit.slope);
    }
}

#[test]
fn petz_generator_gap_vanishes_for_steady_priors() {
    for seed in 0..4 {
        let mut r = random::rng(200 + seed);
        let spec = random::collision_spec(&mut r, 2, 2, 1.0, 0.5);
        let gamma = forward_generator(&spec, None).unwrap().steady_state().unwrap();
        for dt in [1e-3, 1e-2, 1e-1, 0.5] {
            let gap = petz_generator_gap(&spec, &gamma, dt, &pol()).unwrap();
            assert!(gap <= 1e-10, "seed {seed} dt {dt}: gap {gap}");
        }
    }
}

#[test]
fn b_matrix_vanishes() {
    for seed in 0..10 {
        let mut r = random::rng(300 + seed);
        let spec = random::collision_spec(&mut r, 2, 3, 0.8, 0.7);
        let gamma = random::density(&mut r, 2, 0.05);
        let gen = forward_generator(&spec, None).unwrap();
        let b = b_matrix_defect(&gen, &gamma, &pol()).unwrap();
        assert!(b <= 1e-9, "seed {seed}: B defect {b}");
    }
}

#[test]
fn generators_annihilate_trace() {
    let mut r = random::rng(7);
    let spec = random::collision_spec(&mut r, 2, 2, 1.0, 0.3);
    let gamma = random::density(&mut r, 2, 0.1);
    let xp = random::density(&mut r, 2, 0.1);
    for g in [
        forward_generator(&spec, None).unwrap(),
        reverse_generator(&spec, &xp).unwrap(),
        petz_generator(&spec, &gamma, None, &pol()).unwrap(),
    ] {
        assert!(g.trace_defect() <= 1e-10);
    }
}

#[test]
fn linear_reverse_superop_matches_generator_on_states() {
    let mut r = random::rng(8);
    let spec = random::collision_spec(&mut r, 2, 3, 0.9, 0.4);
    let xp = random::density(&mut r, 3, 0.1);
    let a = reverse_generator(&spec, &xp).unwrap();
    let b = reverse_superop_linear(&spec, &xp);
    assert!(max_abs(&(a.superop() - b)) <= 1e-12);
}

#[test]
fn expansion_gap_is_third_order() {
    let mut r = random::rng(9);
    let spec = random::collision_spec(&mut r, 2, 2, 1.0, 0.0);
    let rho = random::density(&mut r, 2, 0.1);
    let pts: Vec<(f64, f64)> = log_grid(1e-3, 1e-1, 10)
        .unwrap()
        .iter()
        .map(|&dt| {
            let a = collision_step(&spec, &rho, dt).unwrap();
            let b = collision_step_expanded(&spec, &rho, dt).unwrap();
            (dt, (a.as_matrix() - b.as_matrix()).norm())
        })
        .collect();
    let fit = scaling_exponent(&pts).unwrap();
    assert!((2.8..=3.2).contains(&fit.slope), "slope {}", fit.slope);
}

#[test]
fn xx_collision_keeps_commuting_prior() {
    let x = HermMatrix::new(pauli_x()).unwrap();
    let zero = HermMatrix::from_real_diagonal(&[0.0, 0.0]);
    let h_i = HermMatrix::new(kron(&pauli_x(), &pauli_x())).unwrap();
    let spec = CollisionSpec::new(2, 2, zero.clone(), zero, h_i, HermMatrix::from_real_diagonal(&[0.3, 0.7]), 1.0, 0.0).unwrap();
    let gamma = HermMatrix::symmetrized((tabletop::matrixkit::identity(2) + x.as_matrix() * tabletop::matrixkit::cr(0.4)) * tabletop::matrixkit::cr(0.5));
    for dt in [0.1, 0.7, 2.0] {
        let out = collision_step(&spec, &gamma, dt).unwrap();
        assert!(max_abs(&(out.as_matrix() - gamma.as_matrix())) <= 1e-12);
    }
}

#[test]
fn pure_hamiltonian_evolution_matches_unitary() {
    let mut r = random::rng(10);
    let h = random::hermitian(&mut r, 3);
    let rho = random::density(&mut r, 3, 0.1);
    let gen = LindbladGenerator::new(h.clone(), vec![]).unwrap();
    let ev = lindblad_evolve(&gen, &rho, 0.8).unwrap();
    let u = unitary_exp(&h, 0.8);
    let direct = &u * rho.as_matrix() * u.adjoint();
    assert!(max_abs(&(ev.state.as_matrix() - direct)) <= 1e-10);
}

#[test]
fn per_step_solve_gap_decays_like_one_over_n() {
    let ex = tabletop::examples::corollary().unwrap();
    let tabletop::examples::ExampleInstance::Collision { spec, gamma0 } = ex.instance else { panic!() };
    let sweep = |policy: &XiPrimePolicy| -> Vec<(f64, f64)> {
        [4usize, 8, 16, 32, 64]
            .iter()
            .map(|&n| (n as f64, sequential_reverse(&spec, &gamma0, policy, 1.0, n, &pol()).unwrap().total_gap))
            .collect()
    };
    let solved = loglog_fit(&sweep(&XiPrimePolicy::SolvePerStep), 3).unwrap();
    assert!((-1.15..=-0.85).contains(&solved.slope), "slope {}", solved.slope);
    let fixed = loglog_fit(&sweep(&XiPrimePolicy::Constant(spec.xi.clone())), 3).unwrap();
    assert!(fixed.slope > -0.5, "constant ancilla slope {}", fixed.slope);
}

fn exchange(omega: f64, xi: HermMatrix, g: f64, rate: f64) -> CollisionSpec {
    let h = HermMatrix::from_real_diagonal(&[0.0, omega]);
    let h_i = HermMatrix::symmetrized(unit(4, 1, 2) + unit(4, 2, 1));
    CollisionSpec::new(2, 2, h.clone(), h, h_i, xi, g, rate).unwrap()
}

#[test]
fn lamb_shift_examples() {
    let xx = HermMatrix::symmetrized(kron(&pauli_x(), &pauli_x()));
    assert!(max_abs(&lamb_shift(&xx, &HermMatrix::maximally_mixed(2), 2).unwrap()) <= 1e-15);
    let plus = HermMatrix::symmetrized((identity(2) + pauli_x()) * cr(0.5));
    assert!(max_abs(&(lamb_shift(&xx, &plus, 2).unwrap().as_matrix() - pauli_x())) <= 1e-15);
    let zero = HermMatrix::symmetrized(ComplexMatrix::zeros(6, 6));
    let mut r = random::rng(1);
    assert!(max_abs(&lamb_shift(&zero, &random::density(&mut r, 3, 0.0), 2).unwrap()) == 0.0);
    assert!(lamb_shift(&xx, &HermMatrix::maximally_mixed(3), 2).is_err());
}

#[test]
fn correction_hamiltonian_examples() {
    let mut r = random::rng(2);
    let spec = random::collision_spec(&mut r, 2, 3, 1.0, 0.7);
    let jumps = forward_generator(&spec, None).unwrap().jumps.clone();
    let hc = correction_hamiltonian(&HermMatrix::maximally_mixed(2), &jumps, &pol()).unwrap();
    assert!(max_abs(&hc) <= 1e-12);
    let g = random::density(&mut r, 2, 0.05);
    let hc = correction_hamiltonian(&g, &jumps, &pol()).unwrap();
    assert!(max_abs(&(hc.as_matrix() - hc.as_matrix().adjoint())) <= 1e-14);
    // Diagonal prior with ladder jumps: M commutes with ln γ.
    let ladder = vec![(0.7, unit(2, 0, 1)), (0.2, unit(2, 1, 0)), (0.4, pauli_z())];
    let hc = correction_hamiltonian(&HermMatrix::from_real_diagonal(&[0.2, 0.8]), &ladder, &pol()).unwrap();
    assert!(max_abs(&hc) <= 1e-10);
}

#[test]
fn lindblad_evolution_examples() {
    let mut r = random::rng(3);
    let spec = random::collision_spec(&mut r, 2, 2, 1.0, 0.5);
    let gen = forward_generator(&spec, None).unwrap();
    let rho = random::density(&mut r, 2, 0.0);
    let same = lindblad_evolve(&gen, &rho, 0.0).unwrap().state;
    assert!(max_abs(&(same.as_matrix() - rho.as_matrix())) <= 1e-15);
    let two = lindblad_evolve(&gen, &lindblad_evolve(&gen, &rho, 0.3).unwrap().state, 0.4).unwrap().state;
    let one = lindblad_evolve(&gen, &rho, 0.7).unwrap();
    assert!(max_abs(&(two.as_matrix() - one.state.as_matrix())) <= 1e-12);
    assert!((one.state.trace_re() - 1.0).abs() <= 1e-12);
    assert!(one.symmetrization_defect <= 1e-12);
    assert!(gen.trace_defect() <= 1e-12);
    assert!(lindblad_evolve(&gen, &rho, -0.1).is_err());
}

#[test]
fn degenerate_couplings() {
    let mut r = random::rng(4);
    let rho = random::density(&mut r, 2, 0.0);
    let off = exchange(1.0, random::density(&mut r, 2, 0.05), 0.0, 1.0);
    for dt in [0.1, 1.0] {
        assert!(max_abs(&(collision_step(&off, &rho, dt).unwrap().as_matrix() - rho.as_matrix())) <= 1e-15);
    }
    let spec = exchange(1.0, random::density(&mut r, 2, 0.05), 0.8, 0.0);
    let fwd = forward_generator(&spec, None).unwrap();
    assert!(fwd.jumps.iter().all(|(w, _)| *w == 0.0));
    let h = HermMatrix::symmetrized(spec.h_s.as_matrix() + lamb_shift(&spec.h_i, &spec.xi, 2).unwrap().as_matrix());
    let u = unitary_exp(&h, 0.8 * 0.5);
    let out = lindblad_evolve(&fwd, &rho, 0.5).unwrap().state;
    assert!(max_abs(&(out.as_matrix() - &u * rho.as_matrix() * u.adjoint())) <= 1e-12);
    let rev = reverse_generator(&spec, &spec.xi).unwrap();
    assert!(max_abs(&(rev.hamiltonian.as_matrix() + fwd.hamiltonian.as_matrix())) <= 1e-15);
}

#[test]
fn thermal_collision_satisfies_the_generator_conditions() {
    let spec = exchange(1.0, tabletop::examples::gibbs(0.7, &HermMatrix::from_real_diagonal(&[0.0, 1.0])), 1.0, 0.5);
    let (r1, r2) = generator_match_residuals(&spec, &spec.xi, &spec.xi, &pol()).unwrap();
    assert!(r1 <= 1e-10 && r2 <= 1e-10, "{r1} {r2}");
    let mut r = random::rng(5);
    let (r1, r2) = generator_match_residuals(&spec, &spec.xi, &random::density(&mut r, 2, 0.05), &pol()).unwrap();
    assert!(r1.max(r2) > 1e-3);
}

#[test]
fn single_step_run_matches_one_petz_map() {
    let mut r = random::rng(6);
    let spec = random::collision_spec(&mut r, 2, 2, 1.0, 0.5);
    let gamma0 = random::density(&mut r, 2, 0.1);
    let run = sequential_reverse(&spec, &gamma0, &XiPrimePolicy::Constant(spec.xi.clone()), 0.2, 1, &pol()).unwrap();
    assert_eq!(run.n_steps, 1);
    assert_eq!(run.per_step_gaps, run.cumulative_gaps);
    assert_eq!(run.prior_trajectory.len(), 2);
    let prop = forward_generator(&spec, None).unwrap().propagator(0.2);
    let next = unvec_col(&(prop * vec_col(&gamma0)), 2);
    assert!(max_abs(&(next - run.prior_trajectory[1].as_matrix())) <= 1e-14);
}

#[test]
fn pure_ancilla_drives_prior_to_rank_loss() {
    let ground = HermMatrix::from_real_diagonal(&[1.0, 0.0]);
    let spec = exchange(1.0, ground, 1.0, 1.0);
    let gamma0 = HermMatrix::maximally_mixed(2);
    let err = sequential_reverse(&spec, &gamma0, &XiPrimePolicy::Constant(spec.xi.clone()), 200.0, 2, &pol()).unwrap_err();
    assert!(matches!(err, Error::RankLoss { step: 1, .. }), "{err:?}");
}

#[test]
fn exponential_sampler_is_seeded() {
    let a = sample_steps(StepSampler::Exponential, 2.0, 50, &mut random::rng(9)).unwrap();
    let b = sample_steps(StepSampler::Exponential, 2.0, 50, &mut random::rng(9)).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().all(|&x| x > 0.0));
    let fixed = sample_steps(StepSampler::Fixed, 2.0, 4, &mut random::rng(0)).unwrap();
    assert_eq!(fixed, vec![0.5; 4]);
    assert!(sample_steps(StepSampler::Fixed, 1.0, 0, &mut random::rng(0)).is_err());
    assert!(sample_steps(StepSampler::Fixed, -1.0, 3, &mut random::rng(0)).is_err());
}
