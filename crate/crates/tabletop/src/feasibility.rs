//! Affine feasibility over density-like Hermitian matrices.
//!
//! Unknowns are the coordinates of a Hermitian matrix in
//! [`hermitian_basis`](crate::matrixkit::hermitian_basis) plus optional free
//! scalars. The affine constraints are solved by least squares; the
//! remaining freedom (the nullspace) is used to push the smallest
//! eigenvalue up by normalized subgradient ascent with step 1/k.

use nalgebra as na;
use serde::Serialize;

use crate::channelcore::NumericPolicy;
use crate::matrixkit::{from_hermitian_coords, hermitian_basis, herm_eig, singular_split, ComplexMatrix, HermMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Feasible,
    Infeasible,
    Undetermined,
}

/// Real linear system `a · x = b` with `x = (hermitian coords, extras)`.
#[derive(Debug, Clone)]
pub struct AffineProgram {
    pub dim: usize,
    pub extra: usize,
    pub a: na::DMatrix<f64>,
    pub b: na::DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub verdict: Verdict,
    /// Best point found (least-squares solution when infeasible).
    pub point: HermMatrix,
    pub extras: Vec<f64>,
    pub lsq_residual: f64,
    pub best_min_eigenvalue: f64,
    pub nullspace_dim: usize,
    pub iterations: usize,
}

impl AffineProgram {
    pub fn new(dim: usize, extra: usize) -> Self {
        AffineProgram {
            dim,
            extra,
            a: na::DMatrix::zeros(0, dim * dim + extra),
            b: na::DVector::zeros(0),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.dim * self.dim + self.extra
    }

    /// Appends one real equation.
    pub fn push_row(&mut self, coeffs: &[f64], rhs: f64) {
        let m = self.a.nrows();
        let n = self.n_vars();
        let a = std::mem::replace(&mut self.a, na::DMatrix::zeros(0, 0));
        self.a = a.insert_row(m, 0.0);
        for (j, &v) in coeffs.iter().enumerate().take(n) {
            self.a[(m, j)] = v;
        }
        let b = std::mem::replace(&mut self.b, na::DVector::zeros(0));
        self.b = b.insert_row(m, rhs);
    }

    /// Appends the real and imaginary parts of a matrix equation
    /// Σ_i x_i M_i = T, where `cols[i]` is the image of variable i.
    pub fn push_matrix_equation(&mut self, cols: &[ComplexMatrix], target: &ComplexMatrix) {
        let n = self.n_vars();
        let (r, c) = target.shape();
        let rows = 2 * r * c;
        let m0 = self.a.nrows();
        let mut a = na::DMatrix::zeros(m0 + rows, n);
        a.rows_mut(0, m0).copy_from(&self.a);
        let mut b = na::DVector::zeros(m0 + rows);
        b.rows_mut(0, m0).copy_from(&self.b);
        let mut row = m0;
        for i in 0..r {
            for j in 0..c {
                for part in 0..2 {
                    let pick = |z: num_complex::Complex64| if part == 0 { z.re } else { z.im };
                    for (v, m) in cols.iter().enumerate() {
                        a[(row, v)] = pick(m[(i, j)]);
                    }
                    b[row] = pick(target[(i, j)]);
                    row += 1;
                }
            }
        }
        self.a = a;
        self.b = b;
    }

    /// Appends Tr(X) = 1.
    pub fn push_unit_trace(&mut self) {
        let n = self.n_vars();
        let mut row = vec![0.0; n];
        for (i, bm) in hermitian_basis(self.dim).iter().enumerate() {
            row[i] = bm.trace().re;
        }
        self.push_row(&row, 1.0);
    }

    pub fn solve(&self, pol: &NumericPolicy) -> Outcome {
        let n = self.n_vars();
        let nh = self.dim * self.dim;
        let (a, b) = (&self.a, &self.b);
        let split = singular_split(a, pol.rank_tol);
        let mut x0 = na::DVector::zeros(n);
        for ((s, u), v) in split.values.iter().zip(&split.left).zip(&split.right) {
            x0 += v * (u.dot(b) / s);
        }
        let null = split.null;
        let lsq_residual = (a * &x0 - b).norm();
        let herm_of = |x: &na::DVector<f64>| HermMatrix::symmetrized(from_hermitian_coords(self.dim, &x.as_slice()[..nh]));
        let extras_of = |x: &na::DVector<f64>| x.as_slice()[nh..].to_vec();

        let p0 = herm_of(&x0);
        let lam0 = p0.min_eigenvalue();
        if lsq_residual > pol.equality_tol {
            return Outcome {
                verdict: Verdict::Infeasible,
                point: p0,
                extras: extras_of(&x0),
                lsq_residual,
                best_min_eigenvalue: lam0,
                nullspace_dim: null.len(),
                iterations: 0,
            };
        }

        let null_herm: Vec<ComplexMatrix> = null
            .iter()
            .map(|v| from_hermitian_coords(self.dim, &v.as_slice()[..nh]))
            .collect();
        let mut x = x0.clone();
        let mut best_x = x0.clone();
        let mut best = lam0;
        let mut iterations = 0;
        if !null.is_empty() {
            let step0 = 0.5;
            for k in 1..=pol.max_iterations {
                iterations = k;
                let e = herm_eig(&herm_of(&x));
                if e.values[0] > best {
                    best = e.values[0];
                    best_x = x.clone();
                }
                let v = e.vector(0);
                let g: Vec<f64> = null_herm.iter().map(|h| v.dotc(&(h * &v)).re).collect();
                let gn = g.iter().map(|t| t * t).sum::<f64>().sqrt();
                if gn < 1e-14 {
                    break;
                }
                let step = step0 / k as f64 / gn;
                for (gi, vi) in g.iter().zip(&null) {
                    x += vi * (step * gi);
                }
            }
            let last = herm_eig(&herm_of(&x)).values[0];
            if last > best {
                best = last;
                best_x = x.clone();
            }
        }
        let verdict = if best >= -pol.rank_tol {
            Verdict::Feasible
        } else if null.is_empty() {
            Verdict::Infeasible
        } else {
            Verdict::Undetermined
        };
        Outcome {
            verdict,
            point: herm_of(&best_x),
            extras: extras_of(&best_x),
            lsq_residual,
            best_min_eigenvalue: best,
            nullspace_dim: null.len(),
            iterations,
        }
    }
}
