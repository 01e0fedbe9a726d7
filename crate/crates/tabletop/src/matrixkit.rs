//! Dense complex linear algebra for small Hilbert spaces.
//!
//! Everything here works on `nalgebra::DMatrix<Complex64>`. Hermitian
//! operators are wrapped in [`HermMatrix`], which dereferences to the raw
//! matrix so the usual nalgebra arithmetic stays available.

use std::ops::Deref;

use nalgebra as na;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type ComplexMatrix = na::DMatrix<C64>;
pub type ComplexVector = na::DVector<C64>;

/// Entrywise tolerance for accepting a matrix as Hermitian.
pub const HERM_TOL: f64 = 1e-12;

/// Eigenvalues closer than this are treated as one degenerate cluster.
pub const DEGENERACY_GAP: f64 = 1e-9;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// A Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermMatrix(ComplexMatrix);

impl HermMatrix {
    /// Checks hermiticity (relative to the matrix scale) and stores the
    /// exactly symmetrized matrix.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension {
                context: "HermMatrix::new (square)",
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        check_finite(&m)?;
        let defect = max_abs(&(&m - m.adjoint()));
        let scale = max_abs(&m).max(1.0);
        if defect > HERM_TOL * scale {
            return Err(Error::Domain(format!(
                "matrix is not Hermitian (defect {defect:e})"
            )));
        }
        Ok(Self::symmetrized(m))
    }

    /// Projects onto the Hermitian part, (M + M†)/2, without checking.
    pub fn symmetrized(m: ComplexMatrix) -> Self {
        let h = (&m + m.adjoint()) * cr(0.5);
        HermMatrix(h)
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let v = ComplexVector::from_iterator(diag.len(), diag.iter().map(|&x| cr(x)));
        HermMatrix(ComplexMatrix::from_diagonal(&v))
    }

    pub fn identity(d: usize) -> Self {
        HermMatrix(ComplexMatrix::identity(d, d))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        HermMatrix(ComplexMatrix::identity(d, d) * cr(1.0 / d as f64))
    }

    /// Pure state |ψ⟩⟨ψ| (the vector is normalized first).
    pub fn pure(psi: &ComplexVector) -> Self {
        let psi = psi / cr(psi.norm());
        HermMatrix::symmetrized(&psi * psi.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_inner(self) -> ComplexMatrix {
        self.0
    }

    pub fn trace_re(&self) -> f64 {
        self.0.trace().re
    }

    pub fn eig(&self) -> EigDecomposition {
        herm_eig(self)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eig().values[0]
    }

    pub fn scale(&self, s: f64) -> Self {
        HermMatrix(&self.0 * cr(s))
    }

    /// Checks that the matrix is a density matrix: unit trace and PSD.
    pub fn validate_density(&self, name: &str, trace_tol: f64, psd_tol: f64) -> Result<()> {
        let tr = self.trace_re();
        if (tr - 1.0).abs() > trace_tol {
            return Err(Error::Domain(format!("{name}: trace {tr} is not 1")));
        }
        let lo = self.min_eigenvalue();
        if lo < -psd_tol {
            return Err(Error::Domain(format!(
                "{name}: negative eigenvalue {lo:e}"
            )));
        }
        Ok(())
    }

    /// Density matrix whose smallest eigenvalue clears `rank_tol` relative
    /// to the largest.
    pub fn validate_full_rank(&self, name: &str, rank_tol: f64) -> Result<()> {
        let e = self.eig();
        let top = e.values.last().copied().unwrap_or(0.0).abs().max(f64::MIN_POSITIVE);
        let lo = e.values[0];
        if lo <= rank_tol * top {
            return Err(Error::RankDeficient {
                context: name.to_string(),
                eigenvalue: lo,
                tol: rank_tol * top,
            });
        }
        Ok(())
    }
}

impl Deref for HermMatrix {
    type Target = ComplexMatrix;
    fn deref(&self) -> &ComplexMatrix {
        &self.0
    }
}

impl Serialize for HermMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        serde_cmat::serialize(&self.0, s)
    }
}

impl<'de> Deserialize<'de> for HermMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = serde_cmat::deserialize(d)?;
        HermMatrix::new(m).map_err(serde::de::Error::custom)
    }
}

fn check_finite(m: &ComplexMatrix) -> Result<()> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    Ok(())
}

/// Spectral decomposition with ascending eigenvalues and phase-fixed
/// eigenvectors stored as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EigDecomposition {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl EigDecomposition {
    pub fn vector(&self, i: usize) -> ComplexVector {
        self.vectors.column(i).into_owned()
    }

    pub fn vectors_list(&self) -> Vec<ComplexVector> {
        (0..self.values.len()).map(|i| self.vector(i)).collect()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map(|x| x)
    }

    /// V f(Λ) V†.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let d = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..d {
            let fj = cr(f(self.values[j]));
            for i in 0..d {
                scaled[(i, j)] *= fj;
            }
        }
        scaled * self.vectors.adjoint()
    }

    /// Smallest gap between consecutive eigenvalues (infinite for d = 1).
    pub fn min_gap(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_degenerate(&self) -> bool {
        self.min_gap() < DEGENERACY_GAP
    }
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues ascend; ties keep the factorization's order. Each eigenvector
/// is rotated so that its first largest-modulus component is real positive.
pub fn herm_eig(m: &HermMatrix) -> EigDecomposition {
    let d = m.dim();
    let se = na::SymmetricEigen::new(m.0.clone());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]).then(a.cmp(&b)));
    let mut vectors = ComplexMatrix::zeros(d, d);
    let mut values = Vec::with_capacity(d);
    for (col, &src) in order.iter().enumerate() {
        values.push(se.eigenvalues[src]);
        let v = se.eigenvectors.column(src);
        let mut best = 0;
        let mut best_mod = -1.0;
        for i in 0..d {
            let a = v[i].norm();
            if a > best_mod + 1e-12 {
                best = i;
                best_mod = a;
            }
        }
        let phase = v[best].conj() / cr(v[best].norm());
        for i in 0..d {
            vectors[(i, col)] = v[i] * phase;
        }
    }
    EigDecomposition { values, vectors }
}

/// Scalar functions for [`mat_func`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatFn {
    Sqrt,
    InvSqrt,
    Log,
    Square,
    Pow(f64),
}

/// Applies `f` to the eigenvalues of `m`.
///
/// Singular functions (inverse powers, log) need every eigenvalue above
/// `rank_tol` times the largest eigenvalue. Square roots and positive
/// powers clip eigenvalues in `[-rank_tol·top, 0)` to zero.
pub fn mat_func(m: &HermMatrix, f: MatFn, rank_tol: f64) -> Result<HermMatrix> {
    let e = herm_eig(m);
    let top = e.values.iter().fold(0.0f64, |a, &x| a.max(x.abs())).max(f64::MIN_POSITIVE);
    let lo = e.values[0];
    let singular = matches!(f, MatFn::InvSqrt | MatFn::Log) || matches!(f, MatFn::Pow(a) if a < 0.0);
    if singular && lo <= rank_tol * top {
        return Err(Error::RankDeficient {
            context: format!("mat_func({f:?})"),
            eigenvalue: lo,
            tol: rank_tol * top,
        });
    }
    let needs_psd = matches!(f, MatFn::Sqrt) || matches!(f, MatFn::Pow(a) if a.fract() != 0.0);
    if needs_psd && lo < -rank_tol * top {
        return Err(Error::Domain(format!(
            "mat_func({f:?}) on a matrix with eigenvalue {lo:e}"
        )));
    }
    let g = |x: f64| -> f64 {
        match f {
            MatFn::Sqrt => x.max(0.0).sqrt(),
            MatFn::InvSqrt => 1.0 / x.sqrt(),
            MatFn::Log => x.ln(),
            MatFn::Square => x * x,
            MatFn::Pow(a) if a.fract() != 0.0 => x.max(0.0).powf(a),
            MatFn::Pow(a) => x.powf(a),
        }
    };
    Ok(HermMatrix::symmetrized(e.map(g)))
}

pub fn sqrtm(m: &HermMatrix, rank_tol: f64) -> Result<HermMatrix> {
    mat_func(m, MatFn::Sqrt, rank_tol)
}

pub fn inv_sqrtm(m: &HermMatrix, rank_tol: f64) -> Result<HermMatrix> {
    mat_func(m, MatFn::InvSqrt, rank_tol)
}

/// e^{-iHt}, through the eigendecomposition of `h`.
pub fn unitary_exp(h: &HermMatrix, t: f64) -> ComplexMatrix {
    let e = herm_eig(h);
    let d = h.dim();
    let mut scaled = e.vectors.clone();
    for j in 0..d {
        let ph = C64::from_polar(1.0, -e.values[j] * t);
        for i in 0..d {
            scaled[(i, j)] *= ph;
        }
    }
    scaled * e.vectors.adjoint()
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Which factor of a bipartite operator to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keep {
    S,
    E,
}

/// Partial trace of an operator on S⊗E (S is the first factor).
pub fn partial_trace(m: &ComplexMatrix, dim_s: usize, dim_e: usize, keep: Keep) -> Result<ComplexMatrix> {
    let n = dim_s * dim_e;
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::Dimension {
            context: "partial_trace",
            expected: n,
            got: m.nrows().max(m.ncols()),
        });
    }
    Ok(match keep {
        Keep::S => ComplexMatrix::from_fn(dim_s, dim_s, |i, j| {
            (0..dim_e).map(|a| m[(i * dim_e + a, j * dim_e + a)]).sum()
        }),
        Keep::E => ComplexMatrix::from_fn(dim_e, dim_e, |a, b| {
            (0..dim_s).map(|i| m[(i * dim_e + a, i * dim_e + b)]).sum()
        }),
    })
}

/// Singular triplets of a general matrix with σ above a cutoff, plus an
/// orthonormal basis of the right nullspace.
#[derive(Debug, Clone)]
pub struct SingularSplit<T: na::Scalar> {
    pub values: Vec<f64>,
    pub left: Vec<na::DVector<T>>,
    pub right: Vec<na::DVector<T>>,
    pub null: Vec<na::DVector<T>>,
    pub largest: f64,
}

/// Eigen-decomposition of [[0, M], [M†, 0]], whose spectrum is ±σ(M)
/// padded with zeros. Eigenvalue error is absolute in ‖M‖·ε, which keeps
/// small singular values accurate.
fn augmented_eigen<T>(m: &na::DMatrix<T>) -> na::SymmetricEigen<T, na::Dyn>
where
    T: na::ComplexField<RealField = f64>,
{
    let (r, c) = m.shape();
    let mut aug = na::DMatrix::<T>::zeros(r + c, r + c);
    aug.view_mut((0, r), (r, c)).copy_from(m);
    aug.view_mut((r, 0), (c, r)).copy_from(&m.adjoint());
    na::SymmetricEigen::new(aug)
}

/// Singular values in descending order.
pub fn singular_values<T>(m: &na::DMatrix<T>) -> Vec<f64>
where
    T: na::ComplexField<RealField = f64>,
{
    let k = m.nrows().min(m.ncols());
    if k == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = augmented_eigen(m).eigenvalues.iter().cloned().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev.truncate(k);
    ev.iter().map(|x| x.max(0.0)).collect()
}

/// Keeps triplets with σ > `rel_cut`·σ_max; the rest of the input space is
/// returned as `null`.
pub fn singular_split<T>(m: &na::DMatrix<T>, rel_cut: f64) -> SingularSplit<T>
where
    T: na::ComplexField<RealField = f64>,
{
    let (r, c) = m.shape();
    let se = augmented_eigen(m);
    let largest = se.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let cut = rel_cut * largest.max(f64::MIN_POSITIVE);
    let scale = T::from_real(std::f64::consts::SQRT_2);
    let mut out = SingularSplit { values: Vec::new(), left: Vec::new(), right: Vec::new(), null: Vec::new(), largest };
    let mut order: Vec<usize> = (0..r + c).collect();
    order.sort_by(|&a, &b| se.eigenvalues[b].total_cmp(&se.eigenvalues[a]));
    for idx in order {
        let s = se.eigenvalues[idx];
        if s <= cut {
            break;
        }
        let w = se.eigenvectors.column(idx);
        out.values.push(s);
        out.left.push(w.rows(0, r).into_owned() * scale.clone());
        out.right.push(w.rows(r, c).into_owned() * scale.clone());
    }
    let mut proj = na::DMatrix::<T>::identity(c, c);
    for v in &out.right {
        proj -= v * v.adjoint();
    }
    let pe = na::SymmetricEigen::new(proj);
    for (i, &lam) in pe.eigenvalues.iter().enumerate() {
        if lam > 0.5 {
            out.null.push(pe.eigenvectors.column(i).into_owned());
        }
    }
    out
}

/// Sum of singular values.
pub fn trace_norm(m: &ComplexMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    singular_values(m).iter().sum()
}

/// Solves √γ·B + B·√γ = C in the eigenbasis of γ.
pub fn sylvester_sqrt_solve(gamma: &HermMatrix, c_mat: &ComplexMatrix, rank_tol: f64) -> Result<ComplexMatrix> {
    let d = gamma.dim();
    if c_mat.nrows() != d || c_mat.ncols() != d {
        return Err(Error::Dimension {
            context: "sylvester_sqrt_solve",
            expected: d,
            got: c_mat.nrows(),
        });
    }
    let e = herm_eig(gamma);
    let top = e.values[d - 1].abs().max(f64::MIN_POSITIVE);
    if e.values[0] <= rank_tol * top {
        return Err(Error::RankDeficient {
            context: "sylvester_sqrt_solve".into(),
            eigenvalue: e.values[0],
            tol: rank_tol * top,
        });
    }
    let v = &e.vectors;
    let mut ct = v.adjoint() * c_mat * v;
    for i in 0..d {
        for j in 0..d {
            ct[(i, j)] /= cr(e.values[i].sqrt() + e.values[j].sqrt());
        }
    }
    Ok(v * ct * v.adjoint())
}

pub fn dagger(m: &ComplexMatrix) -> ComplexMatrix {
    m.adjoint()
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

pub fn anticommutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b + b * a
}

/// Largest entry modulus.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

pub fn frob(m: &ComplexMatrix) -> f64 {
    m.norm()
}

pub fn identity(d: usize) -> ComplexMatrix {
    ComplexMatrix::identity(d, d)
}

pub fn basis_vector(d: usize, i: usize) -> ComplexVector {
    let mut v = ComplexVector::zeros(d);
    v[i] = cr(1.0);
    v
}

/// |i⟩⟨j| in dimension d.
pub fn unit(d: usize, i: usize, j: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(d, d);
    m[(i, j)] = cr(1.0);
    m
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)])
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[cr(0.0), c(0.0, -1.0), c(0.0, 1.0), cr(0.0)])
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[cr(1.0), cr(0.0), cr(0.0), cr(-1.0)])
}

/// Orthonormal (Hilbert–Schmidt) basis of d×d Hermitian matrices:
/// diagonal units, then symmetric and antisymmetric off-diagonal pairs.
pub fn hermitian_basis(d: usize) -> Vec<ComplexMatrix> {
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        out.push(unit(d, i, i));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..d {
        for j in (i + 1)..d {
            out.push((unit(d, i, j) + unit(d, j, i)) * cr(s));
            out.push((unit(d, i, j) - unit(d, j, i)) * c(0.0, s));
        }
    }
    out
}

/// Real coordinates of a Hermitian matrix in [`hermitian_basis`].
pub fn hermitian_coords(m: &ComplexMatrix) -> Vec<f64> {
    hermitian_basis(m.nrows())
        .iter()
        .map(|b| (b.adjoint() * m).trace().re)
        .collect()
}

pub fn from_hermitian_coords(d: usize, coords: &[f64]) -> ComplexMatrix {
    hermitian_basis(d)
        .iter()
        .zip(coords)
        .fold(ComplexMatrix::zeros(d, d), |acc, (b, &x)| acc + b * cr(x))
}

/// Column-stacking vectorization.
pub fn vec_col(m: &ComplexMatrix) -> ComplexVector {
    ComplexVector::from_column_slice(m.as_slice())
}

pub fn unvec_col(v: &ComplexVector, d: usize) -> ComplexMatrix {
    ComplexMatrix::from_column_slice(d, d, v.as_slice())
}

/// Superoperator of X ↦ A X B in the column-stacking convention.
pub fn sandwich_superop(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    kron(&b.transpose(), a)
}

/// Serde adapter: nested row-major arrays of `[re, im]` pairs.
pub mod serde_cmat {
    use super::*;
    use serde::de::Error as _;

    pub fn serialize<S: Serializer>(m: &ComplexMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<ComplexMatrix, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        to_matrix(&rows).map_err(D::Error::custom)
    }

    pub fn to_matrix(rows: &[Vec<[f64; 2]>]) -> std::result::Result<ComplexMatrix, String> {
        let nrows = rows.len();
        if nrows == 0 {
            return Err("matrix has no rows".into());
        }
        let ncols = rows[0].len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != ncols {
                return Err(format!("ragged matrix: row {i} has {} entries, row 0 has {ncols}", r.len()));
            }
        }
        let mut m = ComplexMatrix::zeros(nrows, ncols);
        for (i, r) in rows.iter().enumerate() {
            for (j, z) in r.iter().enumerate() {
                if !z[0].is_finite() || !z[1].is_finite() {
                    return Err(format!("non-finite entry at ({i}, {j})"));
                }
                m[(i, j)] = C64::new(z[0], z[1]);
            }
        }
        Ok(m)
    }
}
