//! Quantum channels given by a unitary dilation, with Kraus and Choi forms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrixkit::{
    cr, herm_eig, identity, max_abs, kron, partial_trace, sandwich_superop, trace_norm, unvec_col, vec_col,
    ComplexMatrix, ComplexVector, HermMatrix, Keep,
};

/// Tolerances shared by every numeric routine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericPolicy {
    /// Relative threshold below which an eigenvalue counts as zero.
    pub rank_tol: f64,
    pub cptp_tol: f64,
    /// Threshold for declaring two channels or operators equal.
    pub equality_tol: f64,
    /// Iteration cap for the min-eigenvalue ascent in feasibility solves.
    pub max_iterations: usize,
}

impl Default for NumericPolicy {
    fn default() -> Self {
        NumericPolicy {
            rank_tol: 1e-10,
            cptp_tol: 1e-9,
            equality_tol: 1e-9,
            max_iterations: 5000,
        }
    }
}

impl NumericPolicy {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rank_tol", self.rank_tol),
            ("cptp_tol", self.cptp_tol),
            ("equality_tol", self.equality_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("policy field {name} must be positive, got {v}")));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::Domain("policy field max_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// A channel N(ρ) = Tr_E(U(ρ⊗ξ)U†).
#[derive(Debug, Clone, PartialEq)]
pub struct Dilation {
    pub dim_s: usize,
    pub dim_e: usize,
    pub u: ComplexMatrix,
    pub xi: HermMatrix,
}

impl Dilation {
    pub fn new(dim_s: usize, dim_e: usize, u: ComplexMatrix, xi: HermMatrix) -> Result<Self> {
        let n = dim_s * dim_e;
        if u.nrows() != n || u.ncols() != n {
            return Err(Error::Dimension { context: "Dilation (unitary)", expected: n, got: u.nrows() });
        }
        if xi.dim() != dim_e {
            return Err(Error::Dimension { context: "Dilation (ancilla)", expected: dim_e, got: xi.dim() });
        }
        let defect = max_abs(&(u.adjoint() * &u - identity(n)));
        if defect > 1e-10 {
            return Err(Error::Domain(format!("U is not unitary (defect {defect:e})")));
        }
        xi.validate_density("xi", 1e-12 * dim_e as f64, 1e-12)?;
        Ok(Dilation { dim_s, dim_e, u, xi })
    }

    /// The same dilation run backwards with ancilla `xi_prime`.
    pub fn reversed(&self, xi_prime: &HermMatrix) -> Result<Dilation> {
        Dilation::new(self.dim_s, self.dim_e, self.u.adjoint(), xi_prime.clone())
    }
}

/// ⟨f|_E U |e⟩_E as an operator on S.
pub fn env_block(u: &ComplexMatrix, dim_s: usize, dim_e: usize, f: &ComplexVector, e: &ComplexVector) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim_s, dim_s, |s1, s2| {
        let mut acc = cr(0.0);
        for a in 0..dim_e {
            let fa = f[a].conj();
            if fa == cr(0.0) {
                continue;
            }
            for b in 0..dim_e {
                acc += fa * u[(s1 * dim_e + a, s2 * dim_e + b)] * e[b];
            }
        }
        acc
    })
}

/// Tr_E(U(ρ⊗A)U†) for an arbitrary (not necessarily positive) ancilla operator.
pub fn dilation_map(u: &ComplexMatrix, dim_s: usize, dim_e: usize, ancilla: &ComplexMatrix, rho: &ComplexMatrix) -> ComplexMatrix {
    let full = u * kron(rho, ancilla) * u.adjoint();
    partial_trace(&full, dim_s, dim_e, Keep::S).expect("dimensions fixed by construction")
}

/// Choi matrix of ρ ↦ Tr_E(U(ρ⊗A)U†); linear in A.
pub fn dilation_choi(u: &ComplexMatrix, dim_s: usize, dim_e: usize, ancilla: &ComplexMatrix) -> ComplexMatrix {
    let mut j = ComplexMatrix::zeros(dim_s * dim_s, dim_s * dim_s);
    for a in 0..dim_s {
        for b in 0..dim_s {
            let mut eab = ComplexMatrix::zeros(dim_s, dim_s);
            eab[(a, b)] = cr(1.0);
            let out = dilation_map(u, dim_s, dim_e, ancilla, &eab);
            for o1 in 0..dim_s {
                for o2 in 0..dim_s {
                    j[(a * dim_s + o1, b * dim_s + o2)] = out[(o1, o2)];
                }
            }
        }
    }
    j
}

/// A channel in Kraus form with its Choi matrix cached.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumChannel {
    pub dim_in: usize,
    pub dim_out: usize,
    kraus: Vec<ComplexMatrix>,
    choi: HermMatrix,
}

impl QuantumChannel {
    pub fn from_kraus(dim_in: usize, dim_out: usize, kraus: Vec<ComplexMatrix>) -> Result<Self> {
        for k in &kraus {
            if k.nrows() != dim_out || k.ncols() != dim_in {
                return Err(Error::Dimension { context: "Kraus operator", expected: dim_out, got: k.nrows() });
            }
        }
        let choi = choi_from_kraus(dim_in, dim_out, &kraus);
        Ok(QuantumChannel { dim_in, dim_out, kraus, choi })
    }

    /// Kraus operators from the eigendecomposition of a Choi matrix.
    /// Eigenvalues at or below zero are dropped.
    pub fn from_choi(dim_in: usize, dim_out: usize, choi: &ComplexMatrix) -> Result<Self> {
        let n = dim_in * dim_out;
        if choi.nrows() != n || choi.ncols() != n {
            return Err(Error::Dimension { context: "Choi matrix", expected: n, got: choi.nrows() });
        }
        let e = herm_eig(&HermMatrix::symmetrized(choi.clone()));
        let mut kraus = Vec::new();
        for (idx, &lam) in e.values.iter().enumerate().rev() {
            if lam <= 0.0 {
                continue;
            }
            let v = e.vector(idx);
            let s = lam.sqrt();
            kraus.push(ComplexMatrix::from_fn(dim_out, dim_in, |o, i| v[i * dim_out + o] * cr(s)));
        }
        QuantumChannel::from_kraus(dim_in, dim_out, kraus)
    }

    /// Channel from a column-stacking superoperator matrix.
    pub fn from_superop(dim_in: usize, dim_out: usize, s: &ComplexMatrix) -> Result<Self> {
        QuantumChannel::from_choi(dim_in, dim_out, &choi_from_superop(dim_in, dim_out, s))
    }

    pub fn identity(d: usize) -> Self {
        QuantumChannel::from_kraus(d, d, vec![identity(d)]).expect("square identity")
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    pub fn choi(&self) -> &HermMatrix {
        &self.choi
    }

    /// Σ conj(K)⊗K, acting on column-stacked inputs.
    pub fn superop(&self) -> ComplexMatrix {
        let mut s = ComplexMatrix::zeros(self.dim_out * self.dim_out, self.dim_in * self.dim_in);
        for k in &self.kraus {
            s += sandwich_superop(k, &k.adjoint());
        }
        s
    }

    /// Σ KXK† for any operator X.
    pub fn apply_raw(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.dim_out, self.dim_out);
        for k in &self.kraus {
            out += k * x * k.adjoint();
        }
        out
    }

    /// Σ K†XK for any operator X.
    pub fn adjoint_raw(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.dim_in, self.dim_in);
        for k in &self.kraus {
            out += k.adjoint() * x * k;
        }
        out
    }
}

fn choi_from_kraus(dim_in: usize, dim_out: usize, kraus: &[ComplexMatrix]) -> HermMatrix {
    let n = dim_in * dim_out;
    let mut j = ComplexMatrix::zeros(n, n);
    for k in kraus {
        let w = ComplexVector::from_fn(n, |idx, _| k[(idx % dim_out, idx / dim_out)]);
        j += &w * w.adjoint();
    }
    HermMatrix::symmetrized(j)
}

pub fn choi_from_superop(dim_in: usize, dim_out: usize, s: &ComplexMatrix) -> ComplexMatrix {
    let n = dim_in * dim_out;
    let mut j = ComplexMatrix::zeros(n, n);
    for a in 0..dim_in {
        for b in 0..dim_in {
            let mut eab = ComplexMatrix::zeros(dim_in, dim_in);
            eab[(a, b)] = cr(1.0);
            let out = unvec_col(&(s * vec_col(&eab)), dim_out);
            for o1 in 0..dim_out {
                for o2 in 0..dim_out {
                    j[(a * dim_out + o1, b * dim_out + o2)] = out[(o1, o2)];
                }
            }
        }
    }
    j
}

/// Kraus operators √p_k ⟨f_j|U|e_k⟩ with |e_k⟩ from the eigenbasis of ξ.
///
/// `out_basis` defaults to the same eigenbasis.
pub fn channel_from_dilation(d: &Dilation, out_basis: Option<&[ComplexVector]>, pol: &NumericPolicy) -> Result<QuantumChannel> {
    let eig = herm_eig(&d.xi);
    let fs: Vec<ComplexVector> = match out_basis {
        Some(b) => {
            check_orthonormal(b, d.dim_e)?;
            b.to_vec()
        }
        None => eig.vectors_list(),
    };
    let mut kraus = Vec::new();
    for (k, &p) in eig.values.iter().enumerate() {
        if p <= pol.rank_tol {
            continue;
        }
        let ek = eig.vector(k);
        for f in &fs {
            kraus.push(env_block(&d.u, d.dim_s, d.dim_e, f, &ek) * cr(p.sqrt()));
        }
    }
    QuantumChannel::from_kraus(d.dim_s, d.dim_s, kraus)
}

pub fn check_orthonormal(basis: &[ComplexVector], dim: usize) -> Result<()> {
    if basis.len() != dim || basis.iter().any(|v| v.len() != dim) {
        return Err(Error::Dimension { context: "out_basis", expected: dim, got: basis.len() });
    }
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate() {
            let ip = a.dotc(b);
            let want = if i == j { 1.0 } else { 0.0 };
            if (ip - cr(want)).norm() > 1e-10 {
                return Err(Error::Domain(format!("out_basis is not orthonormal at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

fn check_dim(ch_dim: usize, got: usize, context: &'static str) -> Result<()> {
    if ch_dim != got {
        return Err(Error::Dimension { context, expected: ch_dim, got });
    }
    Ok(())
}

pub fn apply(ch: &QuantumChannel, rho: &HermMatrix) -> Result<HermMatrix> {
    check_dim(ch.dim_in, rho.dim(), "apply")?;
    Ok(HermMatrix::symmetrized(ch.apply_raw(rho)))
}

pub fn adjoint_apply(ch: &QuantumChannel, x: &HermMatrix) -> Result<HermMatrix> {
    check_dim(ch.dim_out, x.dim(), "adjoint_apply")?;
    Ok(HermMatrix::symmetrized(ch.adjoint_raw(x)))
}

pub fn choi(ch: &QuantumChannel) -> &HermMatrix {
    ch.choi()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CptpReport {
    pub passed: bool,
    /// ‖ΣK†K − 𝟙‖_F
    pub tp_residual: f64,
    pub min_choi_eigenvalue: f64,
}

pub fn is_cptp(ch: &QuantumChannel, pol: &NumericPolicy) -> CptpReport {
    let mut sum = ComplexMatrix::zeros(ch.dim_in, ch.dim_in);
    for k in ch.kraus() {
        sum += k.adjoint() * k;
    }
    let tp_residual = (sum - identity(ch.dim_in)).norm();
    let min_choi_eigenvalue = ch.choi().min_eigenvalue();
    CptpReport {
        passed: tp_residual <= pol.cptp_tol && min_choi_eigenvalue >= -pol.cptp_tol,
        tp_residual,
        min_choi_eigenvalue,
    }
}

/// ½‖J_a − J_b‖₁ / dim_in.
pub fn channel_distance(a: &QuantumChannel, b: &QuantumChannel) -> Result<f64> {
    check_dim(a.dim_in, b.dim_in, "channel_distance (input)")?;
    check_dim(a.dim_out, b.dim_out, "channel_distance (output)")?;
    Ok(choi_distance(a.choi(), b.choi(), a.dim_in))
}

pub fn choi_distance(a: &ComplexMatrix, b: &ComplexMatrix, dim_in: usize) -> f64 {
    0.5 * trace_norm(&(a - b)) / dim_in as f64
}

/// Superoperator of a composition: `outer ∘ inner`.
pub fn compose_superops(outer: &ComplexMatrix, inner: &ComplexMatrix) -> ComplexMatrix {
    outer * inner
}
