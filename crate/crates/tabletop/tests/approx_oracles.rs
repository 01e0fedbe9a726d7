use tabletop::channelcore::{channel_from_dilation, NumericPolicy};
use tabletop::examples::{gibbs, xx_default_states, xx_hamiltonian};
use tabletop::matrixkit::*;
use tabletop::petz_ttr::{petz_map, tabletop_reverse};
use tabletop::random;
use tabletop::ttr_approx::*;
use tabletop::Error;

fn superops(hd: &HamiltonianDilation, gamma: &HermMatrix, xp: &HermMatrix, dt: f64) -> (ComplexMatrix, ComplexMatrix) {
    let pol = NumericPolicy::default();
    let dil = hd.dilation(dt).unwrap();
    let fwd = channel_from_dilation(&dil, None, &pol).unwrap();
    let p = petz_map(&fwd, gamma, &pol).unwrap().superop();
    let t = tabletop_reverse(&dil, xp, &pol).unwrap().superop();
    (p, t)
}

#[test]
fn taylor_coefficients_match_finite_differences() {
    let pol = NumericPolicy::default();
    for seed in 0..5u64 {
        let mut r = random::rng(seed);
        let h = random::hermitian(&mut r, 4);
        let xi = random::density(&mut r, 2, 0.05);
        let xp = random::density(&mut r, 2, 0.05);
        let gamma = random::density(&mut r, 2, 0.1);
        let hd = HamiltonianDilation::new(2, 2, h, xi, 0.7).unwrap();
        let (p1, p2) = petz_taylor(&hd, &gamma, &pol).unwrap();
        let (t1, t2) = tabletop_taylor(&hd, &xp).unwrap();
        let s = 1e-3;
        let (pp, tp) = superops(&hd, &gamma, &xp, s);
        let (pm, tm) = superops(&hd, &gamma, &xp, -s);
        let id = identity(4);
        let p1_fd = (&pp - &pm) * cr(0.5 / s);
        let p2_fd = (&pp + &pm - &id * cr(2.0)) * cr(0.5 / (s * s));
        let t1_fd = (&tp - &tm) * cr(0.5 / s);
        let t2_fd = (&tp + &tm - &id * cr(2.0)) * cr(0.5 / (s * s));
        println!("{} {} {} {}", (&p1 - &p1_fd).norm(), (&p2 - &p2_fd).norm(), (&t1 - &t1_fd).norm(), (&t2 - &t2_fd).norm());
        assert!((p1 - p1_fd).norm() < 1e-5);
        assert!((p2 - p2_fd).norm() < 1e-4);
        assert!((t1 - t1_fd).norm() < 1e-5);
        assert!((t2 - t2_fd).norm() < 1e-4);
    }
}

fn pol() -> NumericPolicy {
    NumericPolicy::default()
}

fn bloch(x: f64, y: f64, z: f64) -> HermMatrix {
    HermMatrix::symmetrized((identity(2) + pauli_x() * cr(x) + pauli_y() * cr(y) + pauli_z() * cr(z)) * cr(0.5))
}

/// H = |0⟩⟨0|⊗X + |1⟩⟨1|⊗Y: block diagonal in the system Z basis, with
/// [X, Y] = 2iZ.
fn block(xi: HermMatrix) -> HamiltonianDilation {
    let h = kron(&unit(2, 0, 0), &pauli_x()) + kron(&unit(2, 1, 1), &pauli_y());
    HamiltonianDilation::new(2, 2, HermMatrix::symmetrized(h), xi, 1.0).unwrap()
}

fn thermal() -> (HamiltonianDilation, HermMatrix) {
    let hs = HermMatrix::from_real_diagonal(&[0.0, 1.0]);
    let h = kron(&hs, &identity(2)) + kron(&identity(2), &hs) + unit(4, 1, 2) + unit(4, 2, 1);
    let xi = gibbs(0.8, &hs);
    (HamiltonianDilation::new(2, 2, HermMatrix::symmetrized(h), xi.clone(), 1.0).unwrap(), xi)
}

#[test]
fn effective_hamiltonian_examples() {
    let (xi, _) = xx_default_states();
    let hd = xx_hamiltonian(xi, 1.0).unwrap();
    let z = bloch(0.0, 0.4, 0.2);
    assert!(max_abs(&effective_hamiltonian(&hd, &z).unwrap()) <= 1e-15);
    let plus = bloch(1.0, 0.0, 0.0);
    assert!(max_abs(&(effective_hamiltonian(&hd, &plus).unwrap().as_matrix() - pauli_x())) <= 1e-15);
    let mut r = random::rng(1);
    let hs = random::hermitian(&mut r, 2);
    let local = HamiltonianDilation::new(2, 2, HermMatrix::symmetrized(kron(&hs, &identity(2))), HermMatrix::maximally_mixed(2), 1.0).unwrap();
    let xi = random::density(&mut r, 2, 0.0);
    assert!(max_abs(&(effective_hamiltonian(&local, &xi).unwrap().as_matrix() - hs.as_matrix())) <= 1e-15);
}

#[test]
fn a_operator_examples() {
    let mut r = random::rng(2);
    let h = random::hermitian(&mut r, 2);
    assert!(max_abs(&a_operator(&HermMatrix::maximally_mixed(2), &h, &pol()).unwrap()) <= 1e-15);
    let g = HermMatrix::from_real_diagonal(&[0.3, 0.7]);
    let hd = HermMatrix::from_real_diagonal(&[0.1, -0.4]);
    assert!(max_abs(&a_operator(&g, &hd, &pol()).unwrap()) <= 1e-15);
    for _ in 0..100 {
        let g = random::density(&mut r, 2, 0.05);
        let h = random::hermitian(&mut r, 2);
        let a = a_operator(&g, &h, &pol()).unwrap();
        let s = sqrtm(&g, 1e-10).unwrap();
        let res = s.as_matrix() * &a + &a * s.as_matrix() + commutator(&h, &g) * c(0.0, 1.0);
        assert!(res.norm() <= 1e-10);
    }
}

#[test]
fn first_order_residual_examples() {
    let mut r = random::rng(3);
    let hd = HamiltonianDilation::new(2, 2, random::hermitian(&mut r, 4), random::density(&mut r, 2, 0.05), 1.0).unwrap();
    let (a, b) = first_order_residual(&hd, &HermMatrix::maximally_mixed(2), &hd.xi, &pol()).unwrap();
    assert!(a <= 1e-10 && b <= 1e-10);

    let bl = block(random::density(&mut r, 2, 0.05));
    let g = HermMatrix::from_real_diagonal(&[0.35, 0.65]);
    let (a, b) = first_order_residual(&bl, &g, &bl.xi, &pol()).unwrap();
    assert!(a <= 1e-10 && b <= 1e-10);

    let (xi, gamma) = xx_default_states();
    let xx = xx_hamiltonian(xi.clone(), 1.0).unwrap();
    assert!(is_steady(&xx, &gamma, &pol()).unwrap());
    let (a, b) = first_order_residual(&xx, &gamma, &xi, &pol()).unwrap();
    assert!(a <= 1e-10 && b <= 1e-10);
}

#[test]
fn b_operator_examples() {
    let mut r = random::rng(4);
    let hd = HamiltonianDilation::new(2, 3, random::hermitian(&mut r, 6), random::density(&mut r, 3, 0.05), 0.9).unwrap();
    let mm = HermMatrix::maximally_mixed(2);
    let a = a_operator(&mm, &effective_hamiltonian(&hd, &hd.xi).unwrap(), &pol()).unwrap();
    let b = b_operator(&hd, &mm, &a, None, &pol()).unwrap();
    let mut want = ComplexMatrix::zeros(2, 2);
    for (p, l) in jump_operators(&hd, None) {
        want -= (&l * l.adjoint() - l.adjoint() * &l) * cr(0.5 * p);
    }
    assert!(max_abs(&(b * cr(2f64.sqrt()) - want)) <= 1e-12);

    let (th, xi) = thermal();
    let gamma = xi.clone();
    let a = a_operator(&gamma, &effective_hamiltonian(&th, &xi).unwrap(), &pol()).unwrap();
    assert!(max_abs(&a) <= 1e-14);
    assert!(max_abs(&b_operator(&th, &gamma, &a, None, &pol()).unwrap()) <= 1e-12);

    for _ in 0..20 {
        let g = random::density(&mut r, 2, 0.05);
        let a = a_operator(&g, &effective_hamiltonian(&hd, &hd.xi).unwrap(), &pol()).unwrap();
        let b = b_operator(&hd, &g, &a, None, &pol()).unwrap();
        let cm = c_operator(&hd, &g, &a, None, &pol()).unwrap();
        let s = sqrtm(&g, 1e-10).unwrap();
        assert!((s.as_matrix() * &b + &b * s.as_matrix() - &cm).norm() <= 1e-10 * cm.norm().max(1.0));
    }
}

#[test]
fn second_order_examples() {
    let (th, xi) = thermal();
    let r = second_order_residual(&th, &xi, &xi, SecondOrderMode::General, &pol()).unwrap();
    assert!(r <= 1e-9, "{r}");

    let bl = block(bloch(0.5, 0.3, 0.0));
    let g = HermMatrix::from_real_diagonal(&[0.35, 0.65]);
    let general = second_order_residual(&bl, &g, &bl.xi, SecondOrderMode::General, &pol()).unwrap();
    let steady = second_order_residual(&bl, &g, &bl.xi, SecondOrderMode::SteadyCommuting, &pol()).unwrap();
    assert!(general <= 1e-9 && steady <= 1e-9, "{general} {steady}");
    let grid = log_grid(1e-3, 1e-1, 12).unwrap();
    let pts: Vec<(f64, f64)> = grid.iter().map(|&dt| (dt, map_mismatch(&bl, &g, &bl.xi, dt, &pol()).unwrap())).collect();
    // Either the mismatch sits at round-off or it scales at least cubically.
    match scaling_exponent(&pts) {
        Ok(fit) => assert!(fit.slope >= 2.9, "slope {}", fit.slope),
        Err(_) => assert!(pts.iter().all(|p| p.1 <= 1e-12), "{pts:?}"),
    }

    let off = block(bloch(0.3, 0.2, 0.5));
    let general = second_order_residual(&off, &g, &off.xi, SecondOrderMode::General, &pol()).unwrap();
    let steady = second_order_residual(&off, &g, &off.xi, SecondOrderMode::SteadyCommuting, &pol()).unwrap();
    assert!((general - steady).abs() <= 1e-9 && general > 1e-3, "{general} {steady}");

    let mut rr = random::rng(5);
    let hd = HamiltonianDilation::new(2, 2, random::hermitian(&mut rr, 4), random::density(&mut rr, 2, 0.05), 1.0).unwrap();
    let mm = HermMatrix::maximally_mixed(2);
    let xp = random::density(&mut rr, 2, 0.05);
    for x in [&hd.xi, &xp] {
        let general = second_order_residual(&hd, &mm, x, SecondOrderMode::General, &pol()).unwrap();
        let special = second_order_residual(&hd, &mm, x, SecondOrderMode::MaximallyMixed, &pol()).unwrap();
        assert!((general - special).abs() <= 1e-9, "{general} {special}");
    }
}

#[test]
fn second_order_mode_preconditions() {
    let mut r = random::rng(6);
    let hd = HamiltonianDilation::new(2, 2, random::hermitian(&mut r, 4), random::density(&mut r, 2, 0.05), 1.0).unwrap();
    let g = random::density(&mut r, 2, 0.05);
    assert!(matches!(second_order_residual(&hd, &g, &hd.xi, SecondOrderMode::SteadyCommuting, &pol()), Err(Error::Mode { .. })));
    assert!(matches!(second_order_residual(&hd, &g, &hd.xi, SecondOrderMode::MaximallyMixed, &pol()), Err(Error::Mode { .. })));
}

#[test]
fn map_mismatch_examples() {
    let (th, xi) = thermal();
    for dt in [0.01, 0.1, 1.0] {
        assert!(map_mismatch(&th, &xi, &xi, dt, &pol()).unwrap() <= 1e-9);
    }
    let off = block(bloch(0.3, 0.2, 0.5));
    let g = HermMatrix::from_real_diagonal(&[0.35, 0.65]);
    let ratio = map_mismatch(&off, &g, &off.xi, 0.01, &pol()).unwrap() / map_mismatch(&off, &g, &off.xi, 0.005, &pol()).unwrap();
    assert!((ratio - 4.0).abs() <= 0.1, "ratio {ratio}");
    let mut r = random::rng(7);
    let hd = HamiltonianDilation::new(2, 2, random::hermitian(&mut r, 4), random::density(&mut r, 2, 0.05), 1.0).unwrap();
    let gm = random::density(&mut r, 2, 0.05);
    let xp = random::density(&mut r, 2, 0.05);
    assert!(map_mismatch(&hd, &gm, &xp, 1e-6, &pol()).unwrap() <= 1e-5);
    assert!(map_mismatch(&hd, &gm, &xp, 0.0, &pol()).is_err());
}

#[test]
fn scaling_exponent_examples() {
    let grid = log_grid(1e-3, 1e-1, 8).unwrap();
    let sq: Vec<(f64, f64)> = grid.iter().map(|&x| (x, x * x)).collect();
    let f = scaling_exponent(&sq).unwrap();
    assert!((f.slope - 2.0).abs() <= 1e-12 && (f.r_squared - 1.0).abs() <= 1e-12);
    let cu: Vec<(f64, f64)> = grid.iter().map(|&x| (x, 3.0 * x.powi(3))).collect();
    assert!((scaling_exponent(&cu).unwrap().slope - 3.0).abs() <= 1e-12);
    assert!(matches!(scaling_exponent(&sq[..5]), Err(Error::Fit(_))));
    let floor: Vec<(f64, f64)> = grid.iter().map(|&x| (x, 1e-16)).collect();
    assert!(matches!(scaling_exponent(&floor), Err(Error::Fit(_))));
}

#[test]
fn first_order_pass_means_matching_linear_coefficients() {
    let mut r = random::rng(8);
    for _ in 0..3 {
        let hd = HamiltonianDilation::new(2, 2, random::hermitian(&mut r, 4), random::density(&mut r, 2, 0.05), 1.0).unwrap();
        let mm = HermMatrix::maximally_mixed(2);
        let (a, b) = first_order_residual(&hd, &mm, &hd.xi, &pol()).unwrap();
        assert!(a <= 1e-10 && b <= 1e-10);
        let gap = first_order_gap_fd(&hd, &mm, &hd.xi, 1e-5, &pol()).unwrap();
        assert!(max_abs(&gap) <= 1e-7, "{}", max_abs(&gap));
    }
}

#[test]
fn approx_report_validates_inputs() {
    let (th, xi) = thermal();
    assert!(approx_report(&th, &xi, &xi, 3, &[0.1, 0.2], &pol()).is_err());
    assert!(approx_report(&th, &xi, &xi, 1, &[0.2, 0.1], &pol()).is_err());
    let rep = approx_report(&th, &xi, &xi, 2, &log_grid(1e-3, 1e-1, 12).unwrap(), &pol()).unwrap();
    assert!(matches!(rep.slope_fit, SlopeFit::Floor { .. }));
}
