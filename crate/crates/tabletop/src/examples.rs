//! Worked examples with their predicted reverse ancillas and verdicts.

use std::f64::consts::PI;

use crate::channelcore::{apply, channel_from_dilation, Dilation, NumericPolicy};
use crate::collision::CollisionSpec;
use crate::error::{Error, Result};
use crate::matrixkit::{
    c, commutator, cr, herm_eig, identity, kron, max_abs, pauli_x, unit, unitary_exp, ComplexMatrix, HermMatrix,
};
use crate::petz_ttr::TTRInstance;
use crate::ttr_approx::HamiltonianDilation;

#[derive(Debug, Clone)]
pub enum ExampleInstance {
    Exact(TTRInstance),
    Hamiltonian { dilation: HamiltonianDilation, gamma: HermMatrix },
    Collision { spec: CollisionSpec, gamma0: HermMatrix },
}

/// Predicted answers. `None` means the example makes no claim.
#[derive(Debug, Clone, Default)]
pub struct Expected {
    pub xi_prime: Option<HermMatrix>,
    pub ttr: Option<bool>,
    pub product_preserving: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct NamedExample {
    pub name: String,
    pub instance: ExampleInstance,
    pub expected: Expected,
}

pub const NAMES: [&str; 7] = ["unital", "cx", "xx", "xx-hamiltonian", "thermal", "thermal-collision", "corollary"];

/// e^{-βH}/Tr e^{-βH}.
pub fn gibbs(beta: f64, h: &HermMatrix) -> HermMatrix {
    let e = herm_eig(h);
    let shift = e.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let m = HermMatrix::symmetrized(e.map(|x| (-beta * (x - shift)).exp()));
    let tr = m.trace_re();
    m.scale(1.0 / tr)
}

/// Rotation by `angle` inside the {|01⟩, |10⟩} block of two qubits.
pub fn partial_swap(angle: f64) -> ComplexMatrix {
    let gen = HermMatrix::symmetrized(unit(4, 1, 2) + unit(4, 2, 1));
    unitary_exp(&gen, angle)
}

fn prob(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must lie strictly inside (0, 1), got {x}")))
    }
}

/// Unital dilation with ξ = 𝟙/d and a steady prior.
pub fn make_unital(d: usize, u: ComplexMatrix, gamma: HermMatrix) -> Result<NamedExample> {
    let pol = NumericPolicy::default();
    let xi = HermMatrix::maximally_mixed(d);
    let dil = Dilation::new(d, d, u, xi.clone())?;
    let out = apply(&channel_from_dilation(&dil, None, &pol)?, &gamma)?;
    let drift = max_abs(&(out.as_matrix() - gamma.as_matrix()));
    if drift > 1e-9 {
        return Err(Error::Domain(format!("gamma is not steady for this channel (drift {drift:.3e})")));
    }
    Ok(NamedExample {
        name: "unital".into(),
        instance: ExampleInstance::Exact(TTRInstance::new(dil, gamma, Some(xi.clone()), pol)?),
        expected: Expected { xi_prime: Some(xi), ttr: Some(true), product_preserving: None },
    })
}

/// Controlled-X with ancilla diag(p, 1−p) and prior diag(r, 1−r).
pub fn make_cx(p: f64, r: f64) -> Result<NamedExample> {
    prob("p", p)?;
    prob("r", r)?;
    let u = kron(&unit(2, 0, 0), &identity(2)) + kron(&unit(2, 1, 1), &pauli_x());
    let xi = HermMatrix::from_real_diagonal(&[p, 1.0 - p]);
    let gamma = HermMatrix::from_real_diagonal(&[r, 1.0 - r]);
    let dil = Dilation::new(2, 2, u, xi.clone())?;
    Ok(NamedExample {
        name: "cx".into(),
        instance: ExampleInstance::Exact(TTRInstance::new(dil, gamma, Some(xi.clone()), NumericPolicy::default())?),
        expected: Expected { xi_prime: Some(xi), ttr: Some(true), product_preserving: Some((p - 0.5).abs() < 1e-12) },
    })
}

/// u_θ ξ u_θ† with u_θ = e^{-iθX}.
pub fn xx_witness(theta: f64, xi: &HermMatrix) -> HermMatrix {
    let u = unitary_exp(&HermMatrix::symmetrized(pauli_x()), theta);
    HermMatrix::symmetrized(&u * xi.as_matrix() * u.adjoint())
}

/// U = e^{-iθ X⊗X}; requires [γ, X] = 0.
pub fn make_xx(theta: f64, xi: HermMatrix, gamma: HermMatrix) -> Result<NamedExample> {
    let defect = max_abs(&commutator(&gamma, &pauli_x()));
    if defect > 1e-10 {
        return Err(Error::Domain(format!("gamma must commute with X (defect {defect:.3e})")));
    }
    let h = HermMatrix::symmetrized(kron(&pauli_x(), &pauli_x()));
    let witness = xx_witness(theta, &xi);
    let dil = Dilation::new(2, 2, unitary_exp(&h, theta), xi)?;
    let half_turns = theta / (PI / 2.0);
    let product = if (half_turns - half_turns.round()).abs() < 1e-12 { Some(true) } else { None };
    Ok(NamedExample {
        name: "xx".into(),
        instance: ExampleInstance::Exact(TTRInstance::new(dil, gamma, Some(witness.clone()), NumericPolicy::default())?),
        expected: Expected { xi_prime: Some(witness), ttr: Some(true), product_preserving: product },
    })
}

/// The XX coupling as a Hamiltonian dilation, H_tot = X⊗X.
pub fn xx_hamiltonian(xi: HermMatrix, g: f64) -> Result<HamiltonianDilation> {
    HamiltonianDilation::new(2, 2, HermMatrix::symmetrized(kron(&pauli_x(), &pauli_x())), xi, g)
}

/// Energy-conserving U with Gibbs ancilla and Gibbs prior.
pub fn make_thermal(beta: f64, h_s: HermMatrix, h_e: HermMatrix, u: ComplexMatrix) -> Result<NamedExample> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!("beta must be finite and non-negative, got {beta}")));
    }
    let (ds, de) = (h_s.dim(), h_e.dim());
    let h0 = kron(&h_s, &identity(de)) + kron(&identity(ds), &h_e);
    let defect = commutator(&u, &h0).norm();
    if defect > 1e-10 {
        return Err(Error::Domain(format!("U does not conserve H_S + H_E (commutator norm {defect:.3e})")));
    }
    let xi = gibbs(beta, &h_e);
    let gamma = gibbs(beta, &h_s);
    let dil = Dilation::new(ds, de, u, xi.clone())?;
    Ok(NamedExample {
        name: "thermal".into(),
        instance: ExampleInstance::Exact(TTRInstance::new(dil, gamma, Some(xi.clone()), NumericPolicy::default())?),
        expected: Expected { xi_prime: Some(xi), ttr: Some(true), product_preserving: Some(true) },
    })
}

/// Qubit pair with H_S = H_E = ω|1⟩⟨1|, exchange coupling and Gibbs states.
pub fn thermal_collision(omega: f64, beta: f64, g: f64, gamma_rate: f64) -> Result<NamedExample> {
    let h = HermMatrix::from_real_diagonal(&[0.0, omega]);
    let h_i = HermMatrix::symmetrized(unit(4, 1, 2) + unit(4, 2, 1));
    let xi = gibbs(beta, &h);
    let spec = CollisionSpec::new(2, 2, h.clone(), h.clone(), h_i, xi.clone(), g, gamma_rate)?;
    Ok(NamedExample {
        name: "thermal-collision".into(),
        instance: ExampleInstance::Collision { spec, gamma0: gibbs(beta, &h) },
        expected: Expected { xi_prime: Some(xi), ttr: Some(true), product_preserving: None },
    })
}

/// Qubit system exchanging one quantum with the lowest two levels of a
/// qutrit ancilla. The constant ancilla does not reverse the flow, while
/// an ancilla re-matched at every step does.
pub fn corollary() -> Result<NamedExample> {
    let h_i = kron(&unit(2, 1, 0), &unit(3, 0, 1)) + kron(&unit(2, 0, 1), &unit(3, 1, 0));
    let spec = CollisionSpec::new(
        2,
        3,
        HermMatrix::from_real_diagonal(&[0.0, 1.0]),
        HermMatrix::from_real_diagonal(&[0.0, 1.0, 0.4]),
        HermMatrix::symmetrized(h_i),
        HermMatrix::from_real_diagonal(&[0.3, 0.2, 0.5]),
        1.0,
        1.0,
    )?;
    Ok(NamedExample {
        name: "corollary".into(),
        instance: ExampleInstance::Collision { spec, gamma0: HermMatrix::maximally_mixed(2) },
        expected: Expected { xi_prime: None, ttr: Some(false), product_preserving: None },
    })
}

/// A generic ancilla and the prior (𝟙 + 0.4X)/2.
pub fn xx_default_states() -> (HermMatrix, HermMatrix) {
    let xi = HermMatrix::symmetrized(ComplexMatrix::from_row_slice(2, 2, &[cr(0.7), c(0.1, -0.2), c(0.1, 0.2), cr(0.3)]));
    let gamma = HermMatrix::symmetrized((identity(2) + pauli_x() * cr(0.4)) * cr(0.5));
    (xi, gamma)
}

/// Default parameterization of every named example.
pub fn by_name(name: &str) -> Result<NamedExample> {
    match name {
        "unital" => {
            let mut r = crate::random::rng(1);
            make_unital(2, crate::random::haar_unitary(&mut r, 4), HermMatrix::maximally_mixed(2))
        }
        "cx" => make_cx(0.3, 0.7),
        "xx" => {
            let (xi, gamma) = xx_default_states();
            make_xx(PI / 4.0, xi, gamma)
        }
        "xx-hamiltonian" => {
            let (xi, gamma) = xx_default_states();
            Ok(NamedExample {
                name: "xx-hamiltonian".into(),
                instance: ExampleInstance::Hamiltonian { dilation: xx_hamiltonian(xi.clone(), 1.0)?, gamma },
                expected: Expected { xi_prime: Some(xi), ttr: Some(true), product_preserving: None },
            })
        }
        "thermal" => {
            let z = HermMatrix::symmetrized(crate::matrixkit::pauli_z());
            make_thermal(1.0, z.clone(), z, partial_swap(0.6))
        }
        "thermal-collision" => thermal_collision(1.0, 1.0, 1.0, 0.5),
        "corollary" => corollary(),
        other => Err(Error::Domain(format!("unknown example '{other}'; known: {}", NAMES.join(", ")))),
    }
}
