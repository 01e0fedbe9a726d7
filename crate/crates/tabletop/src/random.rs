//! Seeded random operators for sweeps and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::matrixkit::{c, cr, unitary_exp, ComplexMatrix, HermMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn ginibre<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im)
    })
}

/// Hermitian matrix from the GUE-like ensemble, rescaled to spectral norm 1.
pub fn hermitian<R: Rng>(rng: &mut R, d: usize) -> HermMatrix {
    let g = ginibre(rng, d, d);
    let h = HermMatrix::symmetrized(g);
    let e = h.eig();
    let top = e.values.iter().fold(0.0f64, |a, &x| a.max(x.abs())).max(f64::MIN_POSITIVE);
    h.scale(1.0 / top)
}

/// Haar unitary via QR with the diagonal phases fixed.
pub fn haar_unitary<R: Rng>(rng: &mut R, d: usize) -> ComplexMatrix {
    let qr = ginibre(rng, d, d).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..d {
        let rjj = r[(j, j)];
        let ph = if rjj.norm() > 0.0 { rjj / cr(rjj.norm()) } else { cr(1.0) };
        for i in 0..d {
            q[(i, j)] *= ph;
        }
    }
    q
}

/// e^{-iHt} for a random normalized H.
pub fn hamiltonian_unitary<R: Rng>(rng: &mut R, d: usize, t: f64) -> ComplexMatrix {
    unitary_exp(&hermitian(rng, d), t)
}

/// Full-rank density matrix G G†/Tr, mixed with 𝟙/d so that the smallest
/// eigenvalue is at least `floor`.
pub fn density<R: Rng>(rng: &mut R, d: usize, floor: f64) -> HermMatrix {
    let g = ginibre(rng, d, d);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    let rho = m * cr(1.0 / tr);
    let w = (floor * d as f64).min(1.0);
    HermMatrix::symmetrized(rho * cr(1.0 - w) + ComplexMatrix::identity(d, d) * cr(w / d as f64))
}

/// Diagonal density matrix with entries bounded below by `floor`.
pub fn diagonal_density<R: Rng>(rng: &mut R, d: usize, floor: f64) -> HermMatrix {
    let raw: Vec<f64> = (0..d).map(|_| rng.random::<f64>() + floor).collect();
    let s: f64 = raw.iter().sum();
    HermMatrix::from_real_diagonal(&raw.iter().map(|x| x / s).collect::<Vec<_>>())
}

/// Collision spec with random normalized H_S, H_E, H_I and a full-rank ancilla.
pub fn collision_spec<R: Rng>(rng: &mut R, dim_s: usize, dim_e: usize, g: f64, gamma_rate: f64) -> crate::collision::CollisionSpec {
    let h_s = hermitian(rng, dim_s);
    let h_e = hermitian(rng, dim_e);
    let h_i = hermitian(rng, dim_s * dim_e);
    let xi = density(rng, dim_e, 0.05);
    crate::collision::CollisionSpec::new(dim_s, dim_e, h_s, h_e, h_i, xi, g, gamma_rate).expect("dimensions consistent")
}
