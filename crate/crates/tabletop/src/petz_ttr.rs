//! Petz recovery maps, tabletop reverse maps and exact reversibility checks.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::channelcore::{
    apply, channel_distance, channel_from_dilation, dilation_choi, Dilation, NumericPolicy, QuantumChannel,
};
use crate::error::{Error, Result};
use crate::feasibility::{AffineProgram, Verdict};
use crate::matrixkit::{
    cr, hermitian_basis, herm_eig, inv_sqrtm, kron, partial_trace, sqrtm, EigDecomposition, HermMatrix, Keep,
};

/// A dilation, a prior and an optional candidate reverse ancilla.
#[derive(Debug, Clone)]
pub struct TTRInstance {
    pub dilation: Dilation,
    pub gamma: HermMatrix,
    pub xi_prime: Option<HermMatrix>,
    pub policy: NumericPolicy,
    forward: QuantumChannel,
    gamma_out: HermMatrix,
}

impl TTRInstance {
    pub fn new(dilation: Dilation, gamma: HermMatrix, xi_prime: Option<HermMatrix>, policy: NumericPolicy) -> Result<Self> {
        policy.validate()?;
        if gamma.dim() != dilation.dim_s {
            return Err(Error::Dimension { context: "prior", expected: dilation.dim_s, got: gamma.dim() });
        }
        gamma.validate_density("gamma", 1e-10, policy.rank_tol)?;
        gamma.validate_full_rank("gamma", policy.rank_tol)?;
        if let Some(xp) = &xi_prime {
            if xp.dim() != dilation.dim_e {
                return Err(Error::Dimension { context: "xi_prime", expected: dilation.dim_e, got: xp.dim() });
            }
            xp.validate_density("xi_prime", 1e-10, policy.rank_tol)?;
        }
        let forward = channel_from_dilation(&dilation, None, &policy)?;
        let gamma_out = apply(&forward, &gamma)?;
        gamma_out.validate_full_rank("gamma_out = N(gamma)", policy.rank_tol)?;
        Ok(TTRInstance { dilation, gamma, xi_prime, policy, forward, gamma_out })
    }

    pub fn forward(&self) -> &QuantumChannel {
        &self.forward
    }

    /// γ′ = N(γ).
    pub fn gamma_out(&self) -> &HermMatrix {
        &self.gamma_out
    }

    pub fn with_xi_prime(&self, xi_prime: HermMatrix) -> Result<Self> {
        TTRInstance::new(self.dilation.clone(), self.gamma.clone(), Some(xi_prime), self.policy)
    }

    fn require_xi_prime(&self) -> Result<&HermMatrix> {
        self.xi_prime
            .as_ref()
            .ok_or_else(|| Error::Domain("instance has no xi_prime".into()))
    }

    pub fn petz(&self) -> Result<QuantumChannel> {
        petz_map(&self.forward, &self.gamma, &self.policy)
    }

    pub fn reverse(&self) -> Result<QuantumChannel> {
        tabletop_reverse(&self.dilation, self.require_xi_prime()?, &self.policy)
    }
}

/// Kraus operators √γ·K†·N(γ)^{-1/2}.
pub fn petz_map(ch: &QuantumChannel, gamma: &HermMatrix, pol: &NumericPolicy) -> Result<QuantumChannel> {
    let gamma_out = apply(ch, gamma)?;
    let sg = sqrtm(gamma, pol.rank_tol)?;
    gamma.validate_full_rank("gamma", pol.rank_tol)?;
    let isg = inv_sqrtm(&gamma_out, pol.rank_tol)?;
    let kraus = ch
        .kraus()
        .iter()
        .map(|k| sg.as_matrix() * k.adjoint() * isg.as_matrix())
        .collect();
    QuantumChannel::from_kraus(ch.dim_out, ch.dim_in, kraus)
}

/// Tr_E(U†(•⊗ξ′)U).
pub fn tabletop_reverse(d: &Dilation, xi_prime: &HermMatrix, pol: &NumericPolicy) -> Result<QuantumChannel> {
    channel_from_dilation(&d.reversed(xi_prime)?, None, pol)
}

/// Φ_{mj←nk} = ⟨λ′_m|⟨e′_j|U|λ_n⟩|e_k⟩ with the four spectral bases.
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    pub dim_s: usize,
    pub dim_e: usize,
    entries: Vec<C64>,
    pub gamma_out: EigDecomposition,
    pub xi_prime: EigDecomposition,
    pub gamma: EigDecomposition,
    pub xi: EigDecomposition,
}

impl TransitionMatrix {
    pub fn get(&self, m: usize, j: usize, n: usize, k: usize) -> C64 {
        let (ds, de) = (self.dim_s, self.dim_e);
        self.entries[((m * de + j) * ds + n) * de + k]
    }

    /// Σ_{mj} |Φ_{mj←nk}|² for a fixed column (n, k).
    pub fn column_weight(&self, n: usize, k: usize) -> f64 {
        let mut acc = 0.0;
        for m in 0..self.dim_s {
            for j in 0..self.dim_e {
                acc += self.get(m, j, n, k).norm_sqr();
            }
        }
        acc
    }

    pub fn any_degenerate(&self) -> bool {
        [&self.gamma_out, &self.xi_prime, &self.gamma, &self.xi]
            .iter()
            .any(|e| e.is_degenerate())
    }
}

pub fn transition_matrix(inst: &TTRInstance) -> Result<TransitionMatrix> {
    let xp = inst.require_xi_prime()?;
    let d = &inst.dilation;
    let (ds, de) = (d.dim_s, d.dim_e);
    let gamma_out = herm_eig(inst.gamma_out());
    let xi_prime = herm_eig(xp);
    let gamma = herm_eig(&inst.gamma);
    let xi = herm_eig(&d.xi);
    let left = kron(&gamma_out.vectors, &xi_prime.vectors);
    let right = kron(&gamma.vectors, &xi.vectors);
    let w = left.adjoint() * &d.u * right;
    let mut entries = vec![cr(0.0); ds * de * ds * de];
    for m in 0..ds {
        for j in 0..de {
            for n in 0..ds {
                for k in 0..de {
                    entries[((m * de + j) * ds + n) * de + k] = w[(m * de + j, n * de + k)];
                }
            }
        }
    }
    Ok(TransitionMatrix { dim_s: ds, dim_e: de, entries, gamma_out, xi_prime, gamma, xi })
}

/// Largest modulus over (m₁, m₂, n₁, n₂) of
/// Σ_{jk} (p_k√(r_{n₁}r_{n₂}) − p′_j√(r′_{m₁}r′_{m₂})) Φ_{m₁j←n₁k} Φ*_{m₂j←n₂k}.
pub fn exact_ttr_residual(inst: &TTRInstance) -> Result<f64> {
    let phi = transition_matrix(inst)?;
    Ok(residual_from_phi(&phi))
}

fn residual_from_phi(phi: &TransitionMatrix) -> f64 {
    let (ds, de) = (phi.dim_s, phi.dim_e);
    let r = &phi.gamma.values;
    let rp = &phi.gamma_out.values;
    let p = &phi.xi.values;
    let pp = &phi.xi_prime.values;
    let sq = |x: f64| x.max(0.0).sqrt();
    let mut worst: f64 = 0.0;
    for m1 in 0..ds {
        for m2 in 0..ds {
            for n1 in 0..ds {
                for n2 in 0..ds {
                    let mut acc = cr(0.0);
                    for j in 0..de {
                        for k in 0..de {
                            let coef = p[k] * sq(r[n1]) * sq(r[n2]) - pp[j] * sq(rp[m1]) * sq(rp[m2]);
                            acc += phi.get(m1, j, n1, k) * phi.get(m2, j, n2, k).conj() * cr(coef);
                        }
                    }
                    worst = worst.max(acc.norm());
                }
            }
        }
    }
    worst
}

/// Normalized Choi distance between the Petz map and the tabletop reverse map.
pub fn choi_gap(inst: &TTRInstance) -> Result<f64> {
    channel_distance(&inst.petz()?, &inst.reverse()?)
}

/// Largest |r_n Tr(N(Π_n)Π′_m) − r′_m Tr(N̂ᵀ(Π′_m)Π_n)| over (n, m).
pub fn bayes_residual(inst: &TTRInstance) -> Result<f64> {
    let rev = inst.reverse()?;
    let g = herm_eig(&inst.gamma);
    let gp = herm_eig(inst.gamma_out());
    let proj = |e: &EigDecomposition, i: usize| {
        let v = e.vector(i);
        &v * v.adjoint()
    };
    let mut worst: f64 = 0.0;
    for n in 0..g.values.len() {
        let pin = proj(&g, n);
        let fwd = inst.forward.apply_raw(&pin);
        for m in 0..gp.values.len() {
            let pim = proj(&gp, m);
            let lhs = g.values[n] * (&fwd * &pim).trace().re;
            let rhs = gp.values[m] * (rev.apply_raw(&pim) * &pin).trace().re;
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct ProductPreservation {
    pub preserved: bool,
    /// ‖σ − Tr_E σ ⊗ Tr_S σ‖_F with σ = U(γ⊗ξ)U†.
    pub residual: f64,
    pub gamma_out: HermMatrix,
    pub xi_out: HermMatrix,
}

pub fn product_preservation_check(d: &Dilation, gamma: &HermMatrix, pol: &NumericPolicy) -> Result<ProductPreservation> {
    if gamma.dim() != d.dim_s {
        return Err(Error::Dimension { context: "prior", expected: d.dim_s, got: gamma.dim() });
    }
    let sigma = &d.u * kron(gamma, &d.xi) * d.u.adjoint();
    let gamma_out = HermMatrix::symmetrized(partial_trace(&sigma, d.dim_s, d.dim_e, Keep::S)?);
    let xi_out = HermMatrix::symmetrized(partial_trace(&sigma, d.dim_s, d.dim_e, Keep::E)?);
    let residual = (sigma - kron(&gamma_out, &xi_out)).norm();
    Ok(ProductPreservation { preserved: residual <= pol.equality_tol, residual, gamma_out, xi_out })
}

/// Outcome of an exact reversibility check.
#[derive(Debug, Clone, Serialize)]
pub struct ExactTTRReport {
    pub theorem1_residual: Option<f64>,
    /// Set when some spectrum is degenerate; the Choi gap then decides.
    pub theorem1_advisory: bool,
    pub choi_gap: Option<f64>,
    pub feasible: Verdict,
    pub witness_xi_prime: Option<HermMatrix>,
    pub degenerate_spectra_flag: bool,
    pub lsq_residual: Option<f64>,
    pub best_min_eigenvalue: Option<f64>,
    pub nullspace_dim: Option<usize>,
    pub iterations: Option<usize>,
}

/// Searches for an ancilla ξ′ whose tabletop reverse map equals the Petz map.
pub fn feasible_xi_prime(d: &Dilation, gamma: &HermMatrix, pol: &NumericPolicy) -> Result<ExactTTRReport> {
    let inst = TTRInstance::new(d.clone(), gamma.clone(), None, *pol)?;
    let petz = inst.petz()?;
    let ud = d.u.adjoint();
    let cols: Vec<_> = hermitian_basis(d.dim_e)
        .iter()
        .map(|b| dilation_choi(&ud, d.dim_s, d.dim_e, b))
        .collect();
    let mut prog = AffineProgram::new(d.dim_e, 0);
    prog.push_matrix_equation(&cols, petz.choi());
    prog.push_unit_trace();
    let out = prog.solve(pol);

    let mut report = ExactTTRReport {
        theorem1_residual: None,
        theorem1_advisory: false,
        choi_gap: None,
        feasible: out.verdict,
        witness_xi_prime: None,
        degenerate_spectra_flag: false,
        lsq_residual: Some(out.lsq_residual),
        best_min_eigenvalue: Some(out.best_min_eigenvalue),
        nullspace_dim: Some(out.nullspace_dim),
        iterations: Some(out.iterations),
    };
    if out.verdict == Verdict::Feasible {
        // Clip the tiny negative eigenvalues the ascent may leave behind.
        let e = herm_eig(&out.point);
        let clipped = HermMatrix::symmetrized(e.map(|x| x.max(0.0)));
        let witness = clipped.scale(1.0 / clipped.trace_re());
        let winst = inst.with_xi_prime(witness.clone())?;
        let gap = choi_gap(&winst)?;
        let phi = transition_matrix(&winst)?;
        report.theorem1_residual = Some(residual_from_phi(&phi));
        report.degenerate_spectra_flag = phi.any_degenerate();
        report.theorem1_advisory = report.degenerate_spectra_flag;
        report.choi_gap = Some(gap);
        if gap > pol.equality_tol {
            report.feasible = Verdict::Undetermined;
        }
        report.witness_xi_prime = Some(witness);
    } else {
        report.degenerate_spectra_flag =
            herm_eig(&inst.gamma).is_degenerate() || herm_eig(inst.gamma_out()).is_degenerate() || herm_eig(&d.xi).is_degenerate();
    }
    Ok(report)
}

/// Full exact check: with ξ′ given, compares maps directly; otherwise
/// searches for a witness.
pub fn check_exact(inst: &TTRInstance) -> Result<ExactTTRReport> {
    match &inst.xi_prime {
        None => feasible_xi_prime(&inst.dilation, &inst.gamma, &inst.policy),
        Some(xp) => {
            let phi = transition_matrix(inst)?;
            let gap = choi_gap(inst)?;
            let degenerate = phi.any_degenerate();
            Ok(ExactTTRReport {
                theorem1_residual: Some(residual_from_phi(&phi)),
                theorem1_advisory: degenerate,
                choi_gap: Some(gap),
                feasible: if gap <= inst.policy.equality_tol { Verdict::Feasible } else { Verdict::Infeasible },
                witness_xi_prime: Some(xp.clone()),
                degenerate_spectra_flag: degenerate,
                lsq_residual: None,
                best_min_eigenvalue: None,
                nullspace_dim: None,
                iterations: None,
            })
        }
    }
}
