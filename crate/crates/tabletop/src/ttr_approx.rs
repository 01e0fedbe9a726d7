//! Short-time (first- and second-order) reversibility conditions for
//! Hamiltonian dilations, plus the log-log slope harness.
//!
//! The family of channels is N_dt(ρ) = Tr_E(e^{-i g H dt}(ρ⊗ξ)e^{i g H dt}).
//! All conditions below are written for the scaled Hamiltonian g·H.

use serde::Serialize;

use crate::channelcore::{channel_distance, channel_from_dilation, Dilation, NumericPolicy, QuantumChannel};
use crate::error::{Error, Result};
use crate::matrixkit::{
    anticommutator, c, commutator, cr, hermitian_basis, herm_eig, identity, inv_sqrtm, kron, partial_trace,
    sqrtm, sylvester_sqrt_solve, unitary_exp, unvec_col, vec_col, ComplexMatrix, ComplexVector, HermMatrix, Keep,
};
use crate::petz_ttr::{petz_map, tabletop_reverse};

/// Values at or below this are treated as numerical zero in slope fits.
pub const FIT_FLOOR: f64 = 1e-13;

/// A mismatch curve whose largest value is below this is reported as floor.
pub const FLOOR_MISMATCH: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianDilation {
    pub dim_s: usize,
    pub dim_e: usize,
    pub h_tot: HermMatrix,
    pub xi: HermMatrix,
    pub g: f64,
}

impl HamiltonianDilation {
    pub fn new(dim_s: usize, dim_e: usize, h_tot: HermMatrix, xi: HermMatrix, g: f64) -> Result<Self> {
        if h_tot.dim() != dim_s * dim_e {
            return Err(Error::Dimension { context: "H_tot", expected: dim_s * dim_e, got: h_tot.dim() });
        }
        if xi.dim() != dim_e {
            return Err(Error::Dimension { context: "xi", expected: dim_e, got: xi.dim() });
        }
        if !g.is_finite() {
            return Err(Error::Domain("coupling g must be finite".into()));
        }
        xi.validate_density("xi", 1e-12 * dim_e as f64, 1e-12)?;
        Ok(HamiltonianDilation { dim_s, dim_e, h_tot, xi, g })
    }

    /// g·H_tot.
    pub fn scaled_h(&self) -> ComplexMatrix {
        self.h_tot.as_matrix() * cr(self.g)
    }

    pub fn unitary(&self, dt: f64) -> ComplexMatrix {
        unitary_exp(&self.h_tot, self.g * dt)
    }

    pub fn dilation(&self, dt: f64) -> Result<Dilation> {
        Dilation::new(self.dim_s, self.dim_e, self.unitary(dt), self.xi.clone())
    }

    pub fn channel(&self, dt: f64, pol: &NumericPolicy) -> Result<QuantumChannel> {
        channel_from_dilation(&self.dilation(dt)?, None, pol)
    }

    fn lift_s(&self, x: &ComplexMatrix) -> ComplexMatrix {
        kron(x, &identity(self.dim_e))
    }

    fn lift_e(&self, x: &ComplexMatrix) -> ComplexMatrix {
        kron(&identity(self.dim_s), x)
    }

    fn tr_e(&self, m: &ComplexMatrix) -> ComplexMatrix {
        partial_trace(m, self.dim_s, self.dim_e, Keep::S).expect("dimensions fixed by construction")
    }

    fn check_prior(&self, gamma: &HermMatrix) -> Result<()> {
        if gamma.dim() != self.dim_s {
            return Err(Error::Dimension { context: "prior", expected: self.dim_s, got: gamma.dim() });
        }
        Ok(())
    }

    fn check_ancilla(&self, xi_prime: &HermMatrix) -> Result<()> {
        if xi_prime.dim() != self.dim_e {
            return Err(Error::Dimension { context: "xi_prime", expected: self.dim_e, got: xi_prime.dim() });
        }
        Ok(())
    }
}

/// Tr_E(H_tot·(𝟙⊗state)).
pub fn effective_hamiltonian(hd: &HamiltonianDilation, state: &HermMatrix) -> Result<HermMatrix> {
    hd.check_ancilla(state)?;
    let m = hd.tr_e(&(hd.h_tot.as_matrix() * hd.lift_e(state)));
    Ok(HermMatrix::symmetrized(m))
}

/// Solution of √γ·A + A·√γ = −i[H, γ].
pub fn a_operator(gamma: &HermMatrix, h: &HermMatrix, pol: &NumericPolicy) -> Result<ComplexMatrix> {
    let rhs = commutator(h, gamma) * c(0.0, -1.0);
    sylvester_sqrt_solve(gamma, &rhs, pol.rank_tol)
}

/// Operators shared by the first- and second-order expansions.
struct Expansion {
    sg: ComplexMatrix,
    isg: ComplexMatrix,
    a: ComplexMatrix,
    h: ComplexMatrix,
    h_eff: ComplexMatrix,
}

fn expansion(hd: &HamiltonianDilation, gamma: &HermMatrix, pol: &NumericPolicy) -> Result<Expansion> {
    hd.check_prior(gamma)?;
    gamma.validate_full_rank("gamma", pol.rank_tol)?;
    let h = hd.scaled_h();
    let h_eff = hd.tr_e(&(&h * hd.lift_e(&hd.xi)));
    let a = a_operator(gamma, &HermMatrix::symmetrized(h_eff.clone()), pol)?;
    Ok(Expansion {
        sg: sqrtm(gamma, pol.rank_tol)?.into_inner(),
        isg: inv_sqrtm(gamma, pol.rank_tol)?.into_inner(),
        a,
        h,
        h_eff,
    })
}

/// Frobenius defects of the two first-order conditions
/// X = Tr_E(g H ξ′) and Y = Tr_E(g H ξ′), where
/// X = γ^{1/2} Tr_E(g H ξ) γ^{-1/2} + i A γ^{-1/2} and
/// Y = γ^{-1/2} Tr_E(g H ξ) γ^{1/2} − i γ^{-1/2} A.
pub fn first_order_residual(hd: &HamiltonianDilation, gamma: &HermMatrix, xi_prime: &HermMatrix, pol: &NumericPolicy) -> Result<(f64, f64)> {
    hd.check_ancilla(xi_prime)?;
    let ex = expansion(hd, gamma, pol)?;
    let (x, y) = first_order_pair(&ex);
    let r = hd.tr_e(&(&ex.h * hd.lift_e(xi_prime)));
    Ok(((x - &r).norm(), (y - &r).norm()))
}

fn first_order_pair(ex: &Expansion) -> (ComplexMatrix, ComplexMatrix) {
    let i = c(0.0, 1.0);
    let x = &ex.sg * &ex.h_eff * &ex.isg + &ex.a * &ex.isg * i;
    let y = &ex.isg * &ex.h_eff * &ex.sg - &ex.isg * &ex.a * i;
    (x, y)
}

/// Jump operators ⟨f_j|g H|e_k⟩ with weights p_k, |e_k⟩ from eig(ξ).
pub fn jump_operators(hd: &HamiltonianDilation, out_basis: Option<&[ComplexVector]>) -> Vec<(f64, ComplexMatrix)> {
    let e = herm_eig(&hd.xi);
    let fs = out_basis.map(|b| b.to_vec()).unwrap_or_else(|| e.vectors_list());
    let h = hd.scaled_h();
    let mut out = Vec::new();
    for (k, &p) in e.values.iter().enumerate() {
        let ek = e.vector(k);
        for f in &fs {
            out.push((p, crate::channelcore::env_block(&h, hd.dim_s, hd.dim_e, f, &ek)));
        }
    }
    out
}

/// D[L]ρ = LρL† − ½{L†L, ρ}.
pub fn dissipator(l: &ComplexMatrix, rho: &ComplexMatrix) -> ComplexMatrix {
    let ldl = l.adjoint() * l;
    l * rho * l.adjoint() - anticommutator(&ldl, rho) * cr(0.5)
}

/// C = A² + γ^{1/2}Aγ^{-1/2}A + Aγ^{-1/2}Aγ^{1/2} − Σ p_k D[L_jk]γ.
pub fn c_operator(hd: &HamiltonianDilation, gamma: &HermMatrix, a: &ComplexMatrix, out_basis: Option<&[ComplexVector]>, pol: &NumericPolicy) -> Result<ComplexMatrix> {
    hd.check_prior(gamma)?;
    let sg = sqrtm(gamma, pol.rank_tol)?;
    let isg = inv_sqrtm(gamma, pol.rank_tol)?;
    let mut cm = a * a + sg.as_matrix() * a * isg.as_matrix() * a + a * isg.as_matrix() * a * sg.as_matrix();
    for (p, l) in jump_operators(hd, out_basis) {
        cm -= dissipator(&l, gamma) * cr(p);
    }
    Ok(cm)
}

/// Solution of √γ·B + B·√γ = C.
pub fn b_operator(hd: &HamiltonianDilation, gamma: &HermMatrix, a: &ComplexMatrix, out_basis: Option<&[ComplexVector]>, pol: &NumericPolicy) -> Result<ComplexMatrix> {
    let cm = c_operator(hd, gamma, a, out_basis, pol)?;
    sylvester_sqrt_solve(gamma, &cm, pol.rank_tol)
}

/// Superoperator of a linear map on d×d matrices (column stacking).
fn superop_of(d: usize, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> ComplexMatrix {
    let mut s = ComplexMatrix::zeros(d * d, d * d);
    for b in 0..d {
        for a in 0..d {
            let mut e = ComplexMatrix::zeros(d, d);
            e[(a, b)] = cr(1.0);
            let col = vec_col(&f(&e));
            s.set_column(b * d + a, &col);
        }
    }
    s
}

/// Taylor coefficients (order 1 and 2 in dt) of the Petz map of N_dt at
/// prior γ, as superoperators.
pub fn petz_taylor(hd: &HamiltonianDilation, gamma: &HermMatrix, pol: &NumericPolicy) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let ex = expansion(hd, gamma, pol)?;
    let d = hd.dim_s;
    let i = c(0.0, 1.0);
    let xi_l = hd.lift_e(&hd.xi);
    let h = &ex.h;
    let h2xi = hd.tr_e(&(&xi_l * h * h));
    let d1 = |x: &ComplexMatrix| commutator(&ex.h_eff, x) * i;
    let d2 = |x: &ComplexMatrix| {
        hd.tr_e(&(&xi_l * h * hd.lift_s(x) * h)) - anticommutator(&h2xi, x) * cr(0.5)
    };
    let b = b_operator(hd, gamma, &ex.a, None, pol)?;
    let s1 = ex.a.clone();
    let s2 = &ex.a * &ex.isg * &ex.a - b;
    let w0 = &ex.isg;
    let w1 = -(w0 * &s1 * w0);
    let w2 = w0 * &s1 * w0 * &s1 * w0 - w0 * &s2 * w0;
    let sg = &ex.sg;
    let p1 = superop_of(d, |rho| {
        let y0 = w0 * rho * w0;
        let y1 = &w1 * rho * w0 + w0 * rho * &w1;
        sg * (d1(&y0) + y1) * sg
    });
    let p2 = superop_of(d, |rho| {
        let y0 = w0 * rho * w0;
        let y1 = &w1 * rho * w0 + w0 * rho * &w1;
        let y2 = &w2 * rho * w0 + &w1 * rho * &w1 + w0 * rho * &w2;
        sg * (d2(&y0) + d1(&y1) + y2) * sg
    });
    Ok((p1, p2))
}

/// Taylor coefficients (order 1 and 2 in dt) of the tabletop reverse map
/// with ancilla ξ′, as superoperators.
pub fn tabletop_taylor(hd: &HamiltonianDilation, xi_prime: &HermMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    hd.check_ancilla(xi_prime)?;
    let h = hd.scaled_h();
    let xp = hd.lift_e(xi_prime);
    let r = hd.tr_e(&(&h * &xp));
    let h2 = hd.tr_e(&(&h * &h * &xp));
    let i = c(0.0, 1.0);
    let t1 = superop_of(hd.dim_s, |rho| commutator(&r, rho) * i);
    let t2 = superop_of(hd.dim_s, |rho| {
        hd.tr_e(&(&h * kron(rho, xi_prime) * &h)) - anticommutator(&h2, rho) * cr(0.5)
    });
    Ok((t1, t2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondOrderMode {
    General,
    SteadyCommuting,
    MaximallyMixed,
}

/// ‖N_dt(γ) − γ‖_F ≤ 1e-9 at dt = 1e-3 and Tr_E([gH, γ⊗ξ]) vanishes.
pub fn is_steady(hd: &HamiltonianDilation, gamma: &HermMatrix, pol: &NumericPolicy) -> Result<bool> {
    hd.check_prior(gamma)?;
    let ch = hd.channel(1e-3, pol)?;
    let moved = (ch.apply_raw(gamma) - gamma.as_matrix()).norm();
    let gen = hd.tr_e(&commutator(&hd.scaled_h(), &kron(gamma, &hd.xi))).norm();
    Ok(moved <= 1e-9 && gen <= pol.equality_tol)
}

fn max_over_basis(d: usize, s: &ComplexMatrix) -> f64 {
    hermitian_basis(d)
        .iter()
        .map(|b| unvec_col(&(s * vec_col(b)), d).norm())
        .fold(0.0, f64::max)
}

/// Second-order sufficient condition, checked on a Hermitian operator basis.
///
/// `General` compares the exact second-order Taylor coefficients of both
/// maps and includes the first-order defects. The other modes assemble the
/// simplified equations valid under their preconditions.
pub fn second_order_residual(hd: &HamiltonianDilation, gamma: &HermMatrix, xi_prime: &HermMatrix, mode: SecondOrderMode, pol: &NumericPolicy) -> Result<f64> {
    hd.check_prior(gamma)?;
    hd.check_ancilla(xi_prime)?;
    let d = hd.dim_s;
    let h = hd.scaled_h();
    let xi_l = hd.lift_e(&hd.xi);
    let (_, t2) = tabletop_taylor(hd, xi_prime)?;
    let r_xi = hd.tr_e(&(&h * &xi_l));
    let r_xp = hd.tr_e(&(&h * hd.lift_e(xi_prime)));
    match mode {
        SecondOrderMode::General => {
            let (r1, r2) = first_order_residual(hd, gamma, xi_prime, pol)?;
            let (_, p2) = petz_taylor(hd, gamma, pol)?;
            Ok(r1.max(r2).max(max_over_basis(d, &(p2 - t2))))
        }
        SecondOrderMode::SteadyCommuting => {
            if !is_steady(hd, gamma, pol)? {
                return Err(Error::Mode { mode: "steady_commuting", detail: "prior is not steady".into() });
            }
            let comm = commutator(&hd.lift_s(gamma), hd.h_tot.as_matrix()).norm();
            if comm > pol.equality_tol {
                return Err(Error::Mode {
                    mode: "steady_commuting",
                    detail: format!("‖[γ⊗𝟙, H_tot]‖_F = {comm:e}"),
                });
            }
            let h2xi = hd.tr_e(&(&h * &h * &xi_l));
            let lhs = superop_of(d, |rho| {
                hd.tr_e(&(&h * hd.lift_s(rho) * &h * &xi_l)) - anticommutator(&h2xi, rho) * cr(0.5)
            });
            Ok((r_xi - r_xp).norm().max(max_over_basis(d, &(lhs - t2))))
        }
        SecondOrderMode::MaximallyMixed => {
            let mm = HermMatrix::maximally_mixed(d);
            let off = (gamma.as_matrix() - mm.as_matrix()).norm();
            if off > pol.equality_tol {
                return Err(Error::Mode {
                    mode: "maximally_mixed",
                    detail: format!("‖γ − 𝟙/d‖_F = {off:e}"),
                });
            }
            let hxh = hd.tr_e(&(&h * &xi_l * &h));
            let lhs = superop_of(d, |rho| {
                hd.tr_e(&(&h * hd.lift_s(rho) * &h * &xi_l)) - anticommutator(&hxh, rho) * cr(0.5)
            });
            Ok((r_xi - r_xp).norm().max(max_over_basis(d, &(lhs - t2))))
        }
    }
}

/// Choi distance between the Petz map of N_dt and the tabletop reverse map.
pub fn map_mismatch(hd: &HamiltonianDilation, gamma: &HermMatrix, xi_prime: &HermMatrix, dt: f64, pol: &NumericPolicy) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    hd.check_ancilla(xi_prime)?;
    let dil = hd.dilation(dt)?;
    let fwd = channel_from_dilation(&dil, None, pol)?;
    let petz = petz_map(&fwd, gamma, pol)?;
    let rev = tabletop_reverse(&dil, xi_prime, pol)?;
    channel_distance(&petz, &rev)
}

/// Superoperator difference quotient (Petz − tabletop) at ±h with one
/// Richardson step; approximates the difference of first-order coefficients.
pub fn first_order_gap_fd(hd: &HamiltonianDilation, gamma: &HermMatrix, xi_prime: &HermMatrix, h: f64, pol: &NumericPolicy) -> Result<ComplexMatrix> {
    let gap = |dt: f64| -> Result<ComplexMatrix> {
        let dil = hd.dilation(dt)?;
        let fwd = channel_from_dilation(&dil, None, pol)?;
        let petz = petz_map(&fwd, gamma, pol)?;
        let rev = tabletop_reverse(&dil, xi_prime, pol)?;
        Ok(petz.superop() - rev.superop())
    };
    let central = |s: f64| -> Result<ComplexMatrix> { Ok((gap(s)? - gap(-s)?) * cr(0.5 / s)) };
    let d_h = central(h)?;
    let d_2h = central(2.0 * h)?;
    Ok((d_h * cr(4.0) - d_2h) * cr(1.0 / 3.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points_used: usize,
}

/// Least-squares line through (log x, log y) for points with y > 1e-13.
pub fn loglog_fit(points: &[(f64, f64)], min_points: usize) -> Result<ScalingFit> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > FIT_FLOOR && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < min_points {
        return Err(Error::Fit(format!(
            "need at least {min_points} points above {FIT_FLOOR:e}, have {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(ScalingFit { slope, intercept, r_squared, points_used: pts.len() })
}

/// Slope of log(value) against log(dt); needs six usable points.
pub fn scaling_exponent(points: &[(f64, f64)]) -> Result<ScalingFit> {
    loglog_fit(points, 6)
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || n < 2 {
        return Err(Error::Domain(format!("bad grid [{lo}, {hi}] with {n} points")));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect())
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlopeFit {
    Fitted(ScalingFit),
    Floor { max_mismatch: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct NamedResidual {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ApproxReport {
    pub order: u8,
    pub residual_terms: Vec<NamedResidual>,
    pub slope_fit: SlopeFit,
    pub dt_grid: Vec<f64>,
    pub mismatches: Vec<f64>,
}

/// Residuals of the requested order plus a mismatch curve over `dt_grid`.
pub fn approx_report(hd: &HamiltonianDilation, gamma: &HermMatrix, xi_prime: &HermMatrix, order: u8, dt_grid: &[f64], pol: &NumericPolicy) -> Result<ApproxReport> {
    use rayon::prelude::*;
    if !(order == 1 || order == 2) {
        return Err(Error::Domain(format!("order must be 1 or 2, got {order}")));
    }
    if dt_grid.windows(2).any(|w| w[1] <= w[0]) || dt_grid.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Domain("dt grid must be positive and strictly increasing".into()));
    }
    let (r1, r2) = first_order_residual(hd, gamma, xi_prime, pol)?;
    let mut residual_terms = vec![
        NamedResidual { name: "first_order_x".into(), value: r1 },
        NamedResidual { name: "first_order_y".into(), value: r2 },
    ];
    if order == 2 {
        let v = second_order_residual(hd, gamma, xi_prime, SecondOrderMode::General, pol)?;
        residual_terms.push(NamedResidual { name: "second_order_general".into(), value: v });
    }
    let mismatches: Vec<f64> = dt_grid
        .par_iter()
        .map(|&dt| map_mismatch(hd, gamma, xi_prime, dt, pol))
        .collect::<Result<Vec<_>>>()?;
    let top = mismatches.iter().cloned().fold(0.0, f64::max);
    let slope_fit = if top <= FLOOR_MISMATCH {
        SlopeFit::Floor { max_mismatch: top }
    } else {
        let pts: Vec<(f64, f64)> = dt_grid.iter().cloned().zip(mismatches.iter().cloned()).collect();
        SlopeFit::Fitted(scaling_exponent(&pts)?)
    };
    Ok(ApproxReport { order, residual_terms, slope_fit, dt_grid: dt_grid.to_vec(), mismatches })
}
